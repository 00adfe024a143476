#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace cqed {

using cplx = std::complex<double>;

/// Truncated Fock space of emitter (2 levels) x target mode x FP mode.
struct HilbertSpec {
    int n_max = 2;  // max photons per cavity mode

    int levels() const { return n_max + 1; }
    int dim() const { return 2 * levels() * levels(); }
    int index(int e, int n_t, int n_fp) const { return (e * levels() + n_t) * levels() + n_fp; }
    void validate() const;
};

/// Fault injection for the self-test negative control.
struct DebugHooks {
    /// Flip the sign of the cavity-loss anticommutator term (a classic sign bug);
    /// the generator then no longer preserves the trace.
    bool flip_cavity_anticommutator = false;
};

/// Time-independent structure of the Lindblad generator plus its current coefficients.
///
/// The generator is written as d(rho)/dt = -i (K rho - rho K^dag) + sum_k r_k L_k rho L_k^dag
/// with K = H - (i/2) sum_k r_k L_k^dag L_k. K is diagonal plus the real symmetric g/eta
/// hoppings (stored CSR); every jump operator has at most one nonzero per row and column.
struct Generator {
    struct Jump {
        double rate = 0.0;
        std::vector<int> src;       // src[i] = column of the nonzero in row i, or -1
        std::vector<double> amp;    // value of that nonzero
        std::vector<double> weight; // (L^dag L)_{ii}
        bool cavity = false;        // counted as a cavity-loss term for DebugHooks
    };

    HilbertSpec spec;
    int dim = 0;
    std::vector<int> row_ptr;
    std::vector<int> cols;
    std::vector<double> vals;
    std::vector<double> occ_e, occ_t, occ_fp;
    std::vector<Jump> jumps;  // target loss, FP loss, leaky SE, emitter pump, dephasing, cavity pump
    std::vector<cplx> diag;   // K_ii, rad/s
    DebugHooks hooks;

    // Static coefficients; the time-dependent ones are passed to update().
    double frame_omega = 0.0;
    double omega0 = 0.0;
    double omega_t = 0.0;

    /// Recomputes diag and jump rates for the instantaneous FP mode and pump rate.
    void update(double omega_fp, double kappa_fp, double pump_rate);

    /// Largest rate in the generator; used to scale residual tolerances.
    double rate_scale() const;
};

struct SystemParams;
Generator make_generator(const HilbertSpec& spec, const SystemParams& params, double frame_omega,
                         const DebugHooks& hooks = {});

/// Matrix-free generator application, OpenMP-parallel over output columns. `rho` and
/// `out` are column-major dim x dim. Each output element is accumulated in a fixed
/// order, so the result is bit-identical for any thread count.
void apply_generator(const Generator& gen, const cplx* rho, cplx* out, bool parallel = true);

/// Serial dense reference: -i (K rho - rho K^dag) + sum r L rho L^dag with explicit matrices.
Eigen::MatrixXcd apply_generator_reference(const Generator& gen, const Eigen::MatrixXcd& rho);

Eigen::MatrixXcd dense_k(const Generator& gen);
Eigen::MatrixXcd dense_jump(const Generator& gen, std::size_t k);

/// Sparse superoperator acting on column-major vec(rho).
Eigen::SparseMatrix<cplx> sparse_superoperator(const Generator& gen);

}  // namespace cqed
