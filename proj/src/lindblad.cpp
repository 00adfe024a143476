#include "cqed/lindblad.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/SparseLU>

#include "cqed/error.hpp"
#include "cqed/units.hpp"

namespace cqed {

namespace {

constexpr double kFwhmPerSigma = 2.3548200450309493;

void check_state(const DensityMatrix& s) {
    s.spec.validate();
    const int d = s.spec.dim();
    if (s.rho.rows() != d || s.rho.cols() != d) {
        throw InvalidInput("density matrix is " + std::to_string(s.rho.rows()) + "x" + std::to_string(s.rho.cols()) +
                           " but the Hilbert space has dimension " + std::to_string(d));
    }
}

// exp(area * D[sigma+]) applied in one step: ground-block population is moved to the
// excited block with probability 1 - e^-area, emitter coherences shrink by e^-area/2.
void apply_instant_pump(const HilbertSpec& spec, Eigen::MatrixXcd& rho, double area) {
    const double keep = std::exp(-area);
    const double coh = std::exp(-0.5 * area);
    const int half = spec.dim() / 2;  // e = 0 occupies the first half of the basis
    const Eigen::MatrixXcd gg = rho.topLeftCorner(half, half);
    rho.topLeftCorner(half, half) = keep * gg;
    rho.bottomRightCorner(half, half) += (1.0 - keep) * gg;
    rho.topRightCorner(half, half) *= coh;
    rho.bottomLeftCorner(half, half) *= coh;
}

struct Window {
    double begin;
    double end;
    double h_max_ps;
};

}  // namespace

OperatorSet build_space(const HilbertSpec& spec) {
    spec.validate();
    const int d = spec.dim();
    const int n = spec.levels();
    OperatorSet ops;
    ops.spec = spec;
    ops.sigma_minus = Eigen::MatrixXcd::Zero(d, d);
    ops.a_t = Eigen::MatrixXcd::Zero(d, d);
    ops.a_fp = Eigen::MatrixXcd::Zero(d, d);
    for (int e = 0; e < 2; ++e) {
        for (int nt = 0; nt < n; ++nt) {
            for (int nf = 0; nf < n; ++nf) {
                const int col = spec.index(e, nt, nf);
                if (e == 1) ops.sigma_minus(spec.index(0, nt, nf), col) = 1.0;
                if (nt > 0) ops.a_t(spec.index(e, nt - 1, nf), col) = std::sqrt(double(nt));
                if (nf > 0) ops.a_fp(spec.index(e, nt, nf - 1), col) = std::sqrt(double(nf));
            }
        }
    }
    // number operators written down directly so their spectrum is exactly 0..n_max
    ops.n_e = Eigen::MatrixXcd::Zero(d, d);
    ops.n_t = Eigen::MatrixXcd::Zero(d, d);
    ops.n_fp = Eigen::MatrixXcd::Zero(d, d);
    for (int e = 0; e < 2; ++e) {
        for (int nt = 0; nt < n; ++nt) {
            for (int nf = 0; nf < n; ++nf) {
                const int i = spec.index(e, nt, nf);
                ops.n_e(i, i) = e;
                ops.n_t(i, i) = nt;
                ops.n_fp(i, i) = nf;
            }
        }
    }
    return ops;
}

DensityMatrix DensityMatrix::basis_state(const HilbertSpec& spec, int e, int n_t, int n_fp) {
    spec.validate();
    if (e < 0 || e > 1 || n_t < 0 || n_t > spec.n_max || n_fp < 0 || n_fp > spec.n_max) {
        throw InvalidInput("basis_state: occupation outside the truncated space");
    }
    DensityMatrix s{spec, Eigen::MatrixXcd::Zero(spec.dim(), spec.dim())};
    const int i = spec.index(e, n_t, n_fp);
    s.rho(i, i) = 1.0;
    return s;
}

double DensityMatrix::trace_deviation() const { return std::abs(rho.trace() - cplx{1.0, 0.0}); }

double DensityMatrix::hermiticity_error() const { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }

double DensityMatrix::min_eigenvalue() const {
    const Eigen::MatrixXcd h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void DensityMatrix::validate(double trace_tol, double herm_tol, double pos_tol) const {
    check_state(*this);
    if (!(trace_deviation() <= trace_tol)) throw InvalidInput("density matrix trace deviates from 1");
    if (!(hermiticity_error() <= herm_tol)) throw InvalidInput("density matrix is not Hermitian");
    if (!(min_eigenvalue() >= -pos_tol)) throw InvalidInput("density matrix has a negative eigenvalue");
}

Moments moments(const DensityMatrix& state) {
    check_state(state);
    const HilbertSpec& spec = state.spec;
    const int n = spec.levels();
    Moments m;
    for (int e = 0; e < 2; ++e) {
        for (int nt = 0; nt < n; ++nt) {
            for (int nf = 0; nf < n; ++nf) {
                const int i = spec.index(e, nt, nf);
                const double p = state.rho(i, i).real();
                m.emitter += e * p;
                m.n_t += nt * p;
                m.n_fp += nf * p;
                if (nt + 1 < n && nf > 0) {
                    // <a_t^dag a_fp> = sum A_ij rho_ji with A_{(nt+1,nf-1),(nt,nf)} = sqrt((nt+1) nf)
                    const int up = spec.index(e, nt + 1, nf - 1);
                    m.coherence += std::sqrt((nt + 1.0) * nf) * state.rho(i, up);
                }
            }
        }
    }
    return m;
}

std::pair<double, double> mode_populations(const Moments& m, const CoupledModes& c) {
    const double a2 = std::norm(c.alpha);
    const double b2 = std::norm(c.beta);
    const double cross = 2.0 * (std::conj(c.alpha) * c.beta * m.coherence).real();
    return {a2 * m.n_t + b2 * m.n_fp + cross, b2 * m.n_t + a2 * m.n_fp - cross};
}

std::pair<double, double> mode_populations(const DensityMatrix& state, const CoupledModes& c) {
    return mode_populations(moments(state), c);
}

Eigen::MatrixXcd liouvillian_apply(const SystemParams& params, const BareMode& fp_now, const DensityMatrix& rho,
                                   const SolverOptions& options) {
    check_state(rho);
    Generator gen = make_generator(rho.spec, params, options.frame_omega.value_or(params.target.omega), options.hooks);
    gen.update(fp_now.omega, fp_now.kappa, params.pump.cw_rate);
    Eigen::MatrixXcd out(rho.rho.rows(), rho.rho.cols());
    apply_generator(gen, rho.rho.data(), out.data(), options.parallel_kernel);
    return out;
}

Trajectory evolve(const SystemParams& params, const TuningProfile& profile, const DensityMatrix& rho0,
                  std::span<const double> t_grid_ps, const SolverOptions& options) {
    params.validate();
    profile.validate();
    check_state(rho0);
    if (rho0.spec.n_max != options.space.n_max) {
        throw InvalidInput("evolve: initial state truncation differs from solver options");
    }
    if (t_grid_ps.empty()) throw InvalidInput("evolve: empty time grid");
    for (std::size_t i = 1; i < t_grid_ps.size(); ++i) {
        if (!(t_grid_ps[i] > t_grid_ps[i - 1])) throw InvalidInput("evolve: time grid must be strictly increasing");
    }
    rho0.validate(1e-8, 1e-10, 1e-8);

    const HilbertSpec& spec = rho0.spec;
    const int d = spec.dim();
    const double lambda_t = omega_to_wl(params.target.omega);
    const double t_first = t_grid_ps.front();
    const double t_last = t_grid_ps.back();

    Generator gen = make_generator(spec, params, options.frame_omega.value_or(params.target.omega), options.hooks);

    // Segment boundaries: grid times, pulse arrivals, pump-pulse windows.
    std::vector<double> cuts(t_grid_ps.begin(), t_grid_ps.end());
    std::vector<Window> windows;
    std::vector<std::pair<double, double>> instant_pumps;
    const auto add_cut = [&](double t) {
        if (t > t_first && t < t_last) cuts.push_back(t);
    };
    for (const auto& p : profile.pulses) {
        add_cut(p.t0_ps);
        if (p.tau_rise_ps > 0.0) {
            windows.push_back({p.t0_ps, p.t0_ps + 6.0 * p.tau_rise_ps, 0.25 * p.tau_rise_ps});
            add_cut(p.t0_ps + 6.0 * p.tau_rise_ps);
        }
    }
    for (const auto& p : params.pump.pulses) {
        if (p.area <= 0.0) continue;
        if (p.width_ps <= 0.0) {
            if (p.time_ps >= t_first && p.time_ps <= t_last) {
                instant_pumps.emplace_back(p.time_ps, p.area);
                add_cut(p.time_ps);
            }
            continue;
        }
        const double sigma = p.width_ps / kFwhmPerSigma;
        windows.push_back({p.time_ps - 8.0 * sigma, p.time_ps + 8.0 * sigma, sigma / 3.0});
        add_cut(p.time_ps - 8.0 * sigma);
        add_cut(p.time_ps + 8.0 * sigma);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::sort(instant_pumps.begin(), instant_pumps.end());

    Trajectory traj;
    const std::size_t n_rec = t_grid_ps.size();
    traj.t_ps.assign(t_grid_ps.begin(), t_grid_ps.end());
    traj.emitter.reserve(n_rec);
    traj.n_t.reserve(n_rec);
    traj.n_fp.reserve(n_rec);
    traj.n1.reserve(n_rec);
    traj.n2.reserve(n_rec);
    traj.coherence.reserve(n_rec);
    traj.modes.reserve(n_rec);
    traj.fp_shift_nm.reserve(n_rec);
    traj.min_eigenvalue = 1.0;

    DensityMatrix state{spec, rho0.rho};
    Eigen::VectorXcd y = Eigen::Map<const Eigen::VectorXcd>(rho0.rho.data(), static_cast<Eigen::Index>(d) * d);

    const auto record = [&](double t) {
        state.rho = Eigen::Map<const Eigen::MatrixXcd>(y.data(), d, d);
        const Moments m = moments(state);
        const BareMode fp = fp_mode_at(profile, t, lambda_t, params.fp.kappa);
        const CoupledModes c = couple(params.target, fp, params.eta);
        const auto [n1, n2] = mode_populations(m, c);
        traj.emitter.push_back(m.emitter);
        traj.n_t.push_back(m.n_t);
        traj.n_fp.push_back(m.n_fp);
        traj.n1.push_back(n1);
        traj.n2.push_back(n2);
        traj.coherence.push_back(m.coherence);
        traj.modes.push_back(c);
        traj.fp_shift_nm.push_back(fp_shift_at(profile, t));
        const double dev = state.trace_deviation();
        if (!(dev < 1e3)) {
            std::ostringstream os;
            os << "evolve: state trace diverged (|tr rho - 1| = " << dev << " at t = " << t << " ps)";
            throw NumericalFailure(os.str());
        }
        traj.max_trace_deviation = std::max(traj.max_trace_deviation, dev);
        traj.max_hermiticity_error = std::max(traj.max_hermiticity_error, state.hermiticity_error());
        if (options.check_positivity) traj.min_eigenvalue = std::min(traj.min_eigenvalue, state.min_eigenvalue());
    };

    std::size_t next_instant = 0;
    const auto fire_instant_pumps = [&](double t) {
        bool fired = false;
        while (next_instant < instant_pumps.size() && instant_pumps[next_instant].first <= t) {
            if (instant_pumps[next_instant].first == t) {
                Eigen::Map<Eigen::MatrixXcd> rho(y.data(), d, d);
                Eigen::MatrixXcd tmp = rho;
                apply_instant_pump(spec, tmp, instant_pumps[next_instant].second);
                rho = tmp;
                fired = true;
            }
            ++next_instant;
        }
        return fired;
    };

    OdeOptions ode;
    ode.rtol = options.rtol;
    ode.atol = options.atol;
    ode.fixed_step = ps_to_s(options.fixed_step_ps);

    auto rhs = [&](double t, const Eigen::VectorXcd& yy, Eigen::VectorXcd& dy, bool at_end) {
        const double tp = s_to_ps(t);
        const BareMode fp = fp_mode_at(profile, tp, lambda_t, params.fp.kappa, at_end);
        gen.update(fp.omega, fp.kappa, params.pump.emitter_rate_at(tp));
        apply_generator(gen, yy.data(), dy.data(), options.parallel_kernel);
    };

    fire_instant_pumps(t_first);
    record(t_first);
    std::size_t next_rec = 1;
    double h = 0.0;
    for (std::size_t k = 1; k < cuts.size(); ++k) {
        const double a = cuts[k - 1];
        const double b = cuts[k];
        double hmax = options.h_max_ps;
        for (const auto& w : windows) {
            if (a < w.end && b > w.begin) hmax = std::min(hmax, w.h_max_ps);
        }
        ode.h_max = ps_to_s(hmax);
        try {
            dopri5_integrate(rhs, ps_to_s(a), ps_to_s(b), y, h, ode, traj.stats);
        } catch (const NumericalFailure& e) {
            std::ostringstream os;
            os << e.what() << " [segment " << a << " ps .. " << b << " ps]";
            throw NumericalFailure(os.str());
        }
        fire_instant_pumps(b);
        if (next_rec < n_rec && t_grid_ps[next_rec] == b) {
            record(b);
            ++next_rec;
        }
    }
    return traj;
}

DensityMatrix steady_state(const SystemParams& params, const BareMode& fp_fixed, const SolverOptions& options) {
    params.validate();
    const HilbertSpec& spec = options.space;
    spec.validate();
    if (!(params.pump.cw_rate > 0.0) && !(params.pump.cavity_rate > 0.0)) return DensityMatrix::vacuum(spec);

    const int d = spec.dim();
    Generator gen = make_generator(spec, params, options.frame_omega.value_or(params.target.omega), options.hooks);
    gen.update(fp_fixed.omega, fp_fixed.kappa, params.pump.cw_rate);

    // L vec(rho) = 0 with the first equation replaced by tr(rho) = 1.
    Eigen::SparseMatrix<cplx> s = sparse_superoperator(gen);
    s.prune([](Eigen::Index row, Eigen::Index, const cplx&) { return row != 0; });
    Eigen::SparseMatrix<cplx> trace_row(d * d, d * d);
    std::vector<Eigen::Triplet<cplx>> tr;
    for (int k = 0; k < d; ++k) tr.emplace_back(0, k + k * d, 1.0);
    trace_row.setFromTriplets(tr.begin(), tr.end());
    Eigen::SparseMatrix<cplx> a = s + trace_row;
    a.makeCompressed();

    Eigen::SparseLU<Eigen::SparseMatrix<cplx>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(d * d);
    b[0] = 1.0;

    DensityMatrix out = DensityMatrix::vacuum(spec);
    Eigen::VectorXcd x;
    if (lu.info() == Eigen::Success) {
        x = lu.solve(b);
    }
    if (lu.info() == Eigen::Success && x.allFinite()) {
        out.rho = Eigen::Map<const Eigen::MatrixXcd>(x.data(), d, d);
        out.rho = 0.5 * (out.rho + out.rho.adjoint()).eval();
        out.rho /= out.rho.trace();
    }

    const double tol = 1e-10 * gen.rate_scale();
    Eigen::MatrixXcd residual(d, d);
    const auto converged = [&]() {
        apply_generator(gen, out.rho.data(), residual.data(), options.parallel_kernel);
        return residual.norm() <= tol * out.rho.norm();
    };
    if (converged()) return out;

    // Fallback: relax in time from the best available state.
    OdeOptions ode;
    ode.rtol = std::min(options.rtol, 1e-10);
    ode.atol = std::min(options.atol, 1e-14);
    OdeStats stats;
    auto rhs = [&](double, const Eigen::VectorXcd& yy, Eigen::VectorXcd& dy, bool) {
        apply_generator(gen, yy.data(), dy.data(), options.parallel_kernel);
    };
    Eigen::VectorXcd y = Eigen::Map<const Eigen::VectorXcd>(out.rho.data(), d * d);
    double h = 0.0;
    const double chunk = ps_to_s(1000.0);
    for (double t = 0.0; t < ps_to_s(options.steady_max_time_ps); t += chunk) {
        try {
            dopri5_integrate(rhs, t, t + chunk, y, h, ode, stats);
        } catch (const NumericalFailure& e) {
            throw ConvergenceFailure(std::string("steady_state: relaxation failed: ") + e.what());
        }
        out.rho = Eigen::Map<const Eigen::MatrixXcd>(y.data(), d, d);
        if (converged()) return out;
    }
    std::ostringstream os;
    os << "steady_state: residual " << residual.norm() / out.rho.norm() << " above " << tol << " after "
       << options.steady_max_time_ps << " ps";
    throw ConvergenceFailure(os.str());
}

}  // namespace cqed
