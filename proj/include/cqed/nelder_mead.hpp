#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace cqed {

/// Downhill simplex with reflection, expansion, contraction and shrink
/// coefficients 1, 2, 0.5, 0.5.
struct NelderMeadOptions {
    double x_tol = 1e-10;     // converged when every vertex is within x_tol * (1 + |x_best|) of the best
    long max_evals = 40'000;
    int max_restarts = 3;     // fresh simplices around the optimum after convergence
    double initial_step = 0.05;
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double f = 0.0;
    long evaluations = 0;
    bool converged = false;
    std::vector<double> best_history;  // best objective after each iteration
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// `step` sets the per-coordinate size of the initial simplex; empty uses
/// initial_step * max(|x0_i|, 1).
NelderMeadResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& step = {},
                             const NelderMeadOptions& options = {});

}  // namespace cqed
