#include "cqed/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cqed/error.hpp"

namespace cqed {

namespace {

constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;

struct Run {
    const Objective& f;
    const NelderMeadOptions& opt;
    NelderMeadResult& res;

    double eval(const Eigen::VectorXd& x) {
        ++res.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::max();
    }

    // One simplex descent from x0. Returns true when the spread criterion was met.
    bool descend(const Eigen::VectorXd& x0, const Eigen::VectorXd& step) {
        const Eigen::Index n = x0.size();
        std::vector<Eigen::VectorXd> v(static_cast<std::size_t>(n + 1), x0);
        std::vector<double> fv(static_cast<std::size_t>(n + 1));
        for (Eigen::Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i + 1)][i] += step[i];
        for (std::size_t i = 0; i < v.size(); ++i) fv[i] = eval(v[i]);
        std::vector<std::size_t> order(v.size());

        while (true) {
            std::iota(order.begin(), order.end(), 0);
            // stable sort keeps the tie-break deterministic
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
            const std::size_t best = order.front();
            const std::size_t worst = order.back();
            const std::size_t second = order[order.size() - 2];
            if (res.best_history.empty() || fv[best] <= res.best_history.back()) {
                res.best_history.push_back(fv[best]);
            } else {
                res.best_history.push_back(res.best_history.back());
            }
            if (fv[best] < res.f) {
                res.f = fv[best];
                res.x = v[best];
            }

            double spread = 0.0;
            for (const auto& p : v) {
                spread = std::max(spread, ((p - v[best]).array().abs() / (1.0 + v[best].array().abs())).maxCoeff());
            }
            if (spread <= opt.x_tol) return true;
            if (res.evaluations >= opt.max_evals) return false;

            Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
            for (std::size_t i : order) {
                if (i != worst) centroid += v[i];
            }
            centroid /= static_cast<double>(n);

            const Eigen::VectorXd xr = centroid + kReflect * (centroid - v[worst]);
            const double fr = eval(xr);
            if (fr < fv[best]) {
                const Eigen::VectorXd xe = centroid + kExpand * (xr - centroid);
                const double fe = eval(xe);
                if (fe < fr) {
                    v[worst] = xe;
                    fv[worst] = fe;
                } else {
                    v[worst] = xr;
                    fv[worst] = fr;
                }
                continue;
            }
            if (fr < fv[second]) {
                v[worst] = xr;
                fv[worst] = fr;
                continue;
            }
            const bool outside = fr < fv[worst];
            const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + kContract * (xr - centroid))
                                               : Eigen::VectorXd(centroid + kContract * (v[worst] - centroid));
            const double fc = eval(xc);
            if (fc < (outside ? fr : fv[worst])) {
                v[worst] = xc;
                fv[worst] = fc;
                continue;
            }
            for (std::size_t i : order) {
                if (i == best) continue;
                v[i] = v[best] + kShrink * (v[i] - v[best]);
                fv[i] = eval(v[i]);
            }
        }
    }
};

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                             const NelderMeadOptions& options) {
    if (x0.size() == 0) throw InvalidInput("nelder_mead: empty start vector");
    if (step.size() != 0 && step.size() != x0.size()) throw InvalidInput("nelder_mead: step size mismatch");
    Eigen::VectorXd s = step;
    if (s.size() == 0) s = options.initial_step * x0.array().abs().max(1.0).matrix();

    NelderMeadResult res;
    res.x = x0;
    res.f = std::numeric_limits<double>::infinity();
    Run run{f, options, res};

    bool converged = run.descend(x0, s);
    // A collapsed simplex can stall away from the optimum; restart around the best
    // point until a restart no longer improves it.
    for (int r = 0; converged && r < options.max_restarts; ++r) {
        const double before = res.f;
        const Eigen::VectorXd restart_step = options.initial_step * 0.1 * res.x.array().abs().max(1.0).matrix();
        converged = run.descend(res.x, restart_step);
        if (!(res.f < before)) break;
    }
    res.converged = converged && res.evaluations <= options.max_evals;
    return res;
}

}  // namespace cqed
