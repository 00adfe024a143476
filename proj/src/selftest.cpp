#include "cqed/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "cqed/fitting.hpp"
#include "cqed/lindblad.hpp"
#include "cqed/modespace.hpp"
#include "cqed/spectra.hpp"
#include "cqed/units.hpp"

namespace cqed {

namespace {

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

SolverOptions solver_with(const DebugHooks& hooks, int n_max = 2) {
    SolverOptions o;
    o.space.n_max = n_max;
    o.hooks = hooks;
    return o;
}

std::vector<double> grid(double stop, int n) {
    std::vector<double> t(static_cast<std::size_t>(n + 1));
    for (int i = 0; i <= n; ++i) t[static_cast<std::size_t>(i)] = stop * i / n;
    return t;
}

// Bare cavities only: target decoupled from FP and emitter.
SystemParams isolated_target() {
    SystemParams p = default_system();
    p.eta = 0.0;
    p.emitter.g = 0.0;
    return p;
}

SelfCheck trace_check(const DebugHooks& hooks) {
    SystemParams p = default_system();
    p.pump.cw_rate = 1e9;
    const SolverOptions o = solver_with(hooks);
    const auto t = grid(50.0, 50);
    const Trajectory tr = evolve(p, TuningProfile{}, DensityMatrix::basis_state(o.space, 1, 1, 0), t, o);
    return {"trace preservation", tr.max_trace_deviation < 1e-8, "max |tr rho - 1| = " + sci(tr.max_trace_deviation)};
}

SelfCheck hermiticity_check(const DebugHooks& hooks) {
    SystemParams p = default_system();
    p.pump.cw_rate = 1e9;
    const SolverOptions o = solver_with(hooks);
    TuningProfile prof;
    prof.pulses.push_back({10.0, 0.6, 150.0, 0.0});
    const Trajectory tr = evolve(p, prof, DensityMatrix::basis_state(o.space, 1, 0, 1), grid(60.0, 30), o);
    const bool ok = tr.max_hermiticity_error < 1e-10 && tr.min_eigenvalue > -1e-8;
    return {"hermiticity and positivity", ok,
            "max |rho - rho^dag| = " + sci(tr.max_hermiticity_error) + ", min eig = " + sci(tr.min_eigenvalue)};
}

SelfCheck cavity_decay_check(const DebugHooks& hooks) {
    const SystemParams p = isolated_target();
    const SolverOptions o = solver_with(hooks);
    const auto t = grid(20.0, 20);
    const Trajectory tr = evolve(p, TuningProfile{}, DensityMatrix::basis_state(o.space, 0, 1, 0), t, o);
    double worst = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double expect = std::exp(-2.0 * p.target.kappa * ps_to_s(t[i]));
        worst = std::max(worst, std::abs(tr.n_t[i] - expect) / expect);
    }
    return {"bare-cavity decay exp(-2 kappa t)", worst < 1e-6, "max relative error " + sci(worst)};
}

SelfCheck emitter_decay_check(const DebugHooks& hooks) {
    SystemParams p = isolated_target();
    p.emitter.g = p.target.kappa / 20.0;
    const SolverOptions o = solver_with(hooks, 1);
    const auto t = grid(2000.0, 40);
    const Trajectory tr = evolve(p, TuningProfile{}, DensityMatrix::basis_state(o.space, 1, 0, 0), t, o);
    const double rate = std::log(tr.emitter[10] / tr.emitter[40]) / ps_to_s(t[40] - t[10]);
    const double expect = p.emitter.gamma_leaky + purcell_rate(p.emitter.g, p.target.kappa);
    const double err = std::abs(rate / expect - 1.0);
    return {"weak-coupling emitter decay", err < 0.05, "rate " + sci(rate) + " vs " + sci(expect) + " (1/s)"};
}

SelfCheck exceptional_point_check() {
    const SystemParams p = default_system();
    const CoupledModes c = couple(p.target, p.fp, p.eta);
    const double q_t = q_factor(p.target);
    const double r1 = q_factor(c, 1) / q_t, r2 = q_factor(c, 2) / q_t;
    const bool ok = c.degenerate && std::abs(r1 - 0.5) < 1e-6 && std::abs(r2 - 0.5) < 1e-6;
    return {"exceptional point Q halving", ok, "Q1/Qt = " + sci(r1) + ", Q2/Qt = " + sci(r2)};
}

SelfCheck similarity_check() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
        SystemParams p = default_system();
        p.target.kappa = 1e10 + 4e11 * u(rng);
        p.fp = BareMode{p.target.omega + 4e11 * (u(rng) - 0.5), 1e10 + 9e11 * u(rng)};
        p.eta = 5e11 * u(rng);
        p.emitter.g = 0.5 * std::min(p.target.kappa, p.fp.kappa) * u(rng);
        const CoupledModes c = couple(p.target, p.fp, p.eta);
        if (c.degenerate) continue;
        Eigen::Vector3cd a = Eigen::ComplexEigenSolver<Eigen::Matrix3cd>(bare_hamiltonian(p), false).eigenvalues();
        Eigen::Vector3cd b = Eigen::ComplexEigenSolver<Eigen::Matrix3cd>(coupled_hamiltonian(p, c), false).eigenvalues();
        // greedy matching of the two multisets
        std::vector<bool> used(3, false);
        for (int i = 0; i < 3; ++i) {
            int best = -1;
            double d = 0.0;
            for (int j = 0; j < 3; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double dj = std::abs(a[i] - b[j]);
                if (best < 0 || dj < d) {
                    best = j;
                    d = dj;
                }
            }
            used[static_cast<std::size_t>(best)] = true;
            worst = std::max(worst, d / std::abs(a[i]));
        }
    }
    return {"coupled-basis similarity", worst < 1e-10, "max relative eigenvalue mismatch " + sci(worst)};
}

SelfCheck purcell_check() {
    SystemParams p = default_system();
    const double g = 1e10, kt = p.target.kappa;
    const double analytic = 2.0 * g * g / kt;
    // a far-detuned, decoupled FP leaves the target mode alone
    const CoupledModes c = couple(p.target, BareMode{p.target.omega + 50.0 * kt, p.fp.kappa}, 0.0);
    const int target_mode = std::abs(c.target_component(1)) > 0.5 ? 1 : 2;
    const double ratio = se_rate_ratio(c, target_mode, kt);
    const bool ok = std::abs(purcell_rate(g, kt) / analytic - 1.0) < 1e-14 && std::abs(ratio - 1.0) < 1e-12;
    return {"Purcell oracle", ok, "2g^2/kappa = " + sci(purcell_rate(g, kt)) + ", uncoupled ratio " + sci(ratio)};
}

SelfCheck kernel_check(const DebugHooks& hooks) {
    SystemParams p = default_system();
    p.pump.cw_rate = 3e8;
    p.pump.cavity_rate = 1e8;
    p.emitter.dephasing = 2e8;
    const HilbertSpec spec{2};
    Generator gen = make_generator(spec, p, p.target.omega, hooks);
    gen.update(p.fp.omega + 1e11, p.fp.kappa, p.pump.cw_rate);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXcd rho(spec.dim(), spec.dim());
    for (Eigen::Index i = 0; i < rho.size(); ++i) rho.data()[i] = {n(rng), n(rng)};
    Eigen::MatrixXcd fast(spec.dim(), spec.dim());
    apply_generator(gen, rho.data(), fast.data(), true);
    const Eigen::MatrixXcd ref = apply_generator_reference(gen, rho);
    const double err = (fast - ref).norm() / ref.norm();
    return {"matrix-free kernel vs dense reference", err < 1e-12, "relative difference " + sci(err)};
}

SelfCheck steady_state_check(const DebugHooks& hooks) {
    SystemParams p = default_system();
    p.pump.cw_rate = 1e9;
    const SolverOptions o = solver_with(hooks);
    try {
        const DensityMatrix s = steady_state(p, p.fp, o);
        const Eigen::MatrixXcd r = liouvillian_apply(p, p.fp, s, o);
        Generator gen = make_generator(o.space, p, p.target.omega, hooks);
        gen.update(p.fp.omega, p.fp.kappa, p.pump.cw_rate);
        const double rel = r.norm() / (gen.rate_scale() * s.rho.norm());
        return {"steady-state residual", rel < 1e-10 && s.trace_deviation() < 1e-8, "residual / rate scale " + sci(rel)};
    } catch (const std::exception& e) {
        return {"steady-state residual", false, e.what()};
    }
}

SelfCheck sum_rule_check(const DebugHooks& hooks) {
    SystemParams p = default_system();
    p.pump.cw_rate = 1e9;
    const SolverOptions o = solver_with(hooks);
    TuningProfile prof;
    prof.static_detuning_nm = 0.3;
    prof.pulses.push_back({5.0, 0.6, 100.0, 0.0});
    const Trajectory tr = evolve(p, prof, DensityMatrix::basis_state(o.space, 1, 1, 1), grid(40.0, 40), o);
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.t_ps.size(); ++i) {
        worst = std::max(worst, std::abs(tr.n1[i] + tr.n2[i] - tr.n_t[i] - tr.n_fp[i]));
    }
    return {"coupled-mode photon sum rule", worst < 1e-8, "max |n1 + n2 - n_t - n_fp| = " + sci(worst)};
}

SelfCheck lorentzian_area_check() {
    // trapezoidal area over +-1000 half widths against (2/pi) atan(1000)
    const double fwhm = 0.01, c = 1552.0, span = 1000.0 * 0.5 * fwhm;
    const int n = 200001;
    const double h = 2.0 * span / (n - 1);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        s += w * h * lorentzian_area_normalized(c - span + i * h, c, fwhm);
    }
    const double expect = 2.0 / std::numbers::pi * std::atan(1000.0);
    const double err = std::abs(s - expect);
    return {"unit-area line shape", err < 1e-6, "area " + sci(s) + " vs " + sci(expect)};
}

SelfCheck fit_consistency_check() {
    const FitParameters truth{1.564e11, 1.564e11, 4.692e11, 1552.0, 0.0, 0.0, 0.0, 0.0};
    AnticrossingData d;
    const EmitterParams em{0.0, 1e10, 5e8, 0.0};
    for (int i = 0; i < 9; ++i) d.rows.push_back(predict_row(truth, ControlKind::Detuning, -1.0 + 0.25 * i, em));
    for (auto& r : d.rows) r.tau_ns.reset();
    FitOptions opt;
    opt.fixed_emitter = em;
    const double norm = residuals(truth, d, {}, opt).norm();
    return {"fit residuals vanish at the generating parameters", norm < 1e-9, "residual norm " + sci(norm)};
}

}  // namespace

std::vector<SelfCheck> run_selftest(const DebugHooks& hooks) {
    const std::vector<std::pair<const char*, std::function<SelfCheck()>>> checks = {
        {"trace preservation", [&] { return trace_check(hooks); }},
        {"hermiticity and positivity", [&] { return hermiticity_check(hooks); }},
        {"bare-cavity decay exp(-2 kappa t)", [&] { return cavity_decay_check(hooks); }},
        {"weak-coupling emitter decay", [&] { return emitter_decay_check(hooks); }},
        {"exceptional point Q halving", [] { return exceptional_point_check(); }},
        {"coupled-basis similarity", [] { return similarity_check(); }},
        {"Purcell oracle", [] { return purcell_check(); }},
        {"matrix-free kernel vs dense reference", [&] { return kernel_check(hooks); }},
        {"steady-state residual", [&] { return steady_state_check(hooks); }},
        {"coupled-mode photon sum rule", [&] { return sum_rule_check(hooks); }},
        {"unit-area line shape", [] { return lorentzian_area_check(); }},
        {"fit residuals vanish at the generating parameters", [] { return fit_consistency_check(); }},
    };
    std::vector<SelfCheck> out;
    for (const auto& [name, check] : checks) {
        try {
            out.push_back(check());
        } catch (const std::exception& e) {
            out.push_back({name, false, std::string("threw: ") + e.what()});
        }
        out.back().name = name;
    }
    return out;
}

std::string format_selftest(const std::vector<SelfCheck>& checks) {
    std::ostringstream os;
    int failed = 0;
    for (const auto& c : checks) {
        char line[160];
        std::snprintf(line, sizeof line, "%-4s  %-50s  ", c.passed ? "PASS" : "FAIL", c.name.c_str());
        os << line << c.detail << "\n";
        failed += c.passed ? 0 : 1;
    }
    os << checks.size() - static_cast<std::size_t>(failed) << "/" << checks.size() << " checks passed\n";
    return os.str();
}

}  // namespace cqed
