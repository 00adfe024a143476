#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cqed/kernels.hpp"
#include "cqed/modespace.hpp"
#include "cqed/ode.hpp"
#include "cqed/tuning.hpp"

namespace cqed {

/// Ladder and number operators over the truncated basis, as dense matrices.
struct OperatorSet {
    HilbertSpec spec;
    Eigen::MatrixXcd sigma_minus;
    Eigen::MatrixXcd a_t;
    Eigen::MatrixXcd a_fp;
    Eigen::MatrixXcd n_e;
    Eigen::MatrixXcd n_t;
    Eigen::MatrixXcd n_fp;
};

OperatorSet build_space(const HilbertSpec& spec);

struct DensityMatrix {
    HilbertSpec spec;
    Eigen::MatrixXcd rho;

    static DensityMatrix basis_state(const HilbertSpec& spec, int e, int n_t, int n_fp);
    static DensityMatrix vacuum(const HilbertSpec& spec) { return basis_state(spec, 0, 0, 0); }

    double trace_deviation() const;
    double hermiticity_error() const;
    double min_eigenvalue() const;
    /// Throws InvalidInput unless trace, Hermiticity and positivity hold to the given tolerances.
    void validate(double trace_tol = 1e-8, double herm_tol = 1e-10, double pos_tol = 1e-8) const;
};

struct Moments {
    double emitter = 0.0;  // <sigma+ sigma->
    double n_t = 0.0;
    double n_fp = 0.0;
    cplx coherence{};      // <a_t^dag a_fp>
};

Moments moments(const DensityMatrix& state);

/// Photon numbers in the coupled modes, using b_1 = alpha a_t + beta a_fp and its
/// unitary complement b_2 = -conj(beta) a_t + conj(alpha) a_fp, so n_1 + n_2 = n_t + n_fp.
std::pair<double, double> mode_populations(const Moments& m, const CoupledModes& coupled);
std::pair<double, double> mode_populations(const DensityMatrix& state, const CoupledModes& coupled);

struct SolverOptions {
    HilbertSpec space{};
    double rtol = 1e-8;
    double atol = 1e-12;
    double fixed_step_ps = 0.0;              // > 0: fixed-step reproducibility mode
    double h_max_ps = 50.0;
    std::optional<double> frame_omega;       // rotating frame, rad/s; default omega_t
    bool check_positivity = true;            // eigen-decompose rho at each recorded time
    bool parallel_kernel = true;
    double steady_max_time_ps = 200'000.0;   // evolution fallback budget for steady_state
    DebugHooks hooks{};
};

struct Trajectory {
    std::vector<double> t_ps;
    std::vector<double> emitter;
    std::vector<double> n_t;
    std::vector<double> n_fp;
    std::vector<double> n1;
    std::vector<double> n2;
    std::vector<cplx> coherence;
    std::vector<CoupledModes> modes;
    std::vector<double> fp_shift_nm;
    double max_trace_deviation = 0.0;
    double max_hermiticity_error = 0.0;
    double min_eigenvalue = 0.0;
    OdeStats stats;
};

/// d(rho)/dt for the instantaneous FP mode, using the CW pump rate from params.
Eigen::MatrixXcd liouvillian_apply(const SystemParams& params, const BareMode& fp_now, const DensityMatrix& rho,
                                   const SolverOptions& options = {});

/// Integrates the master equation from rho0 at t_grid[0] through the grid, with the FP
/// frequency following `profile` (lambda_fp = lambda_t + shift(t)) and the emitter pump
/// following params.pump. Observables are recorded at every grid time.
Trajectory evolve(const SystemParams& params, const TuningProfile& profile, const DensityMatrix& rho0,
                  std::span<const double> t_grid_ps, const SolverOptions& options = {});

/// Stationary state under CW pumping with the FP mode held at fp_fixed. Returns the
/// vacuum when nothing is pumped.
DensityMatrix steady_state(const SystemParams& params, const BareMode& fp_fixed, const SolverOptions& options = {});

}  // namespace cqed
