#pragma once

#include <complex>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cqed/pump.hpp"

namespace cqed {

using cplx = std::complex<double>;
using ComplexMatrix3 = Eigen::Matrix3cd;

/// One uncoupled cavity mode. The complex frequency is omega - i*kappa, so kappa is
/// the field-amplitude decay rate and photon number decays at 2*kappa.
struct BareMode {
    double omega = 0.0;  // rad/s
    double kappa = 0.0;  // rad/s

    cplx complex_frequency() const { return {omega, -kappa}; }
    void validate(std::string_view what) const;

    static BareMode from_wavelength(double lambda_nm, double kappa);
};

struct EmitterParams {
    double omega0 = 0.0;       // rad/s
    double g = 0.0;            // emitter - target coupling, rad/s
    double gamma_leaky = 0.0;  // SE rate into non-cavity modes, 1/s
    double dephasing = 0.0;    // pure dephasing rate, 1/s (off by default)
};

struct SystemParams {
    EmitterParams emitter;
    BareMode target;
    BareMode fp;
    double eta = 0.0;  // cavity-cavity coupling, rad/s
    PumpSchedule pump;

    /// Checks every sub-invariant and the weak-coupling guard g < min(kappa_t, kappa_fp).
    void validate() const;
};

/// Eigenmodes of the target/FP cavity pair.
///
/// Mode 1 has the lower real frequency (ties: lower loss). Its eigenvector in the
/// (target, FP) basis is (alpha, beta); mode 2's is (-beta, alpha). Both are
/// Euclidean-normalized, alpha is real and non-negative unless it vanishes.
struct CoupledModes {
    double omega1 = 0.0;
    double omega2 = 0.0;
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    cplx alpha{1.0, 0.0};
    cplx beta{0.0, 0.0};
    bool degenerate = false;  // exceptional point: eigenvalues and eigenvectors coalesce

    double omega(int mode) const;
    double kappa(int mode) const;
    cplx eigenvalue(int mode) const { return {omega(mode), -kappa(mode)}; }
    cplx target_component(int mode) const;
    cplx fp_component(int mode) const;
    double wavelength_nm(int mode) const;
};

double q_factor(double omega, double kappa);
double q_factor(const BareMode& mode);
double q_factor(const CoupledModes& modes, int mode);

/// Diagonalizes the 2x2 complex-symmetric cavity block [[w_t, eta], [eta, w_fp]].
CoupledModes couple(const BareMode& target, const BareMode& fp, double eta);

/// Emitter + two bare cavities, rad/s.
ComplexMatrix3 bare_hamiltonian(const SystemParams& params);

/// The same system written in the coupled-mode basis. The emitter couplings use the
/// complex-orthogonally normalized eigenvectors so the matrix is exactly similar to
/// bare_hamiltonian(). Throws InvalidInput at an exceptional point (no eigenbasis)
/// or when `coupled` was not derived from `params`.
ComplexMatrix3 coupled_hamiltonian(const SystemParams& params, const CoupledModes& coupled);

/// Weak-coupling SE rate into the uncoupled target cavity, 2 g^2 / kappa_t.
double purcell_rate(double g, double kappa_t);

/// SE rate into coupled mode `mode` relative to the bare target cavity:
/// |target component|^2 * kappa_t / kappa_mode.
double se_rate_ratio(const CoupledModes& coupled, int mode, double kappa_t);

/// Total SE decay time (s) with the FP cavity moved to omega_t + fp_offset (rad/s).
double total_decay_time(const SystemParams& params, double fp_offset);

struct SweepRow {
    double fp_offset = 0.0;   // rad/s, omega_fp - omega_t
    double lambda1 = 0.0;     // nm, mode 1
    double lambda2 = 0.0;     // nm, mode 2
    double q1 = 0.0;
    double q2 = 0.0;
    double decay_time = 0.0;  // s
    bool degenerate = false;
};

/// One row per FP offset, in input order. Parallel over grid points.
std::vector<SweepRow> anticrossing_sweep(const SystemParams& params, std::span<const double> fp_offsets);

/// The shipped default parameter set: lambda_t = 1552 nm, eta = kappa_t = 1.564e11 rad/s,
/// kappa_fp = 3 kappa_t, g = 1e10 rad/s, gamma_leaky = 5e8 1/s, FP on resonance.
SystemParams default_system();

}  // namespace cqed
