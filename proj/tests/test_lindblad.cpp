#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "cqed/config.hpp"
#include "cqed/error.hpp"
#include "cqed/lindblad.hpp"
#include "cqed/parallel.hpp"
#include "cqed/pipeline.hpp"
#include "cqed/units.hpp"
#include "oracles.hpp"

using namespace cqed;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
    return t;
}

SystemParams busy_system() {
    SystemParams p = default_system();
    p.emitter.omega0 = p.target.omega + 4e10;
    p.pump.cw_rate = 3e8;
    p.pump.cavity_rate = 2e8;
    p.emitter.dephasing = 1e9;
    return p;
}

SolverOptions with_nmax(int n) {
    SolverOptions o;
    o.space.n_max = n;
    return o;
}

}  // namespace

TEST_CASE("truncated operators", "[lindblad]") {
    CHECK_THROWS_AS(build_space(HilbertSpec{0}), InvalidInput);
    const OperatorSet s1 = build_space(HilbertSpec{1});
    CHECK(s1.a_t.rows() == 8);
    for (int n_max = 1; n_max <= 3; ++n_max) {
        const HilbertSpec spec{n_max};
        const OperatorSet ops = build_space(spec);
        REQUIRE(ops.a_t.rows() == spec.dim());
        // number operators are diagonal with spectrum 0..n_max
        for (int i = 0; i < spec.dim(); ++i) {
            const double nt = ops.n_t(i, i).real();
            CHECK(nt == std::round(nt));
            CHECK(nt >= 0.0);
            CHECK(nt <= n_max);
        }
        CHECK((ops.n_t - Eigen::MatrixXcd(ops.n_t.diagonal().asDiagonal())).norm() == 0.0);
        CHECK((ops.n_t - ops.a_t.adjoint() * ops.a_t).cwiseAbs().maxCoeff() < 1e-14);
        // [a, a^dag] = 1 below the truncation edge
        for (const auto* a : {&ops.a_t, &ops.a_fp}) {
            const Eigen::MatrixXcd comm = (*a) * a->adjoint() - a->adjoint() * (*a);
            const Eigen::MatrixXcd& num = (a == &ops.a_t) ? ops.n_t : ops.n_fp;
            for (int i = 0; i < spec.dim(); ++i) {
                if (std::round(num(i, i).real()) < n_max) CHECK(std::abs(comm(i, i) - 1.0) < 1e-14);
            }
        }
        // independent Kronecker construction agrees exactly
        const oracle::Ops ref = oracle::operators(n_max);
        CHECK((ops.a_t - ref.at).norm() == 0.0);
        CHECK((ops.a_fp - ref.af).norm() == 0.0);
        CHECK((ops.sigma_minus - ref.sm).norm() == 0.0);
    }
}

TEST_CASE("generator matches the Kronecker superoperator", "[lindblad][oracle]") {
    std::mt19937_64 rng(42);
    for (int n_max = 1; n_max <= 2; ++n_max) {
        const SystemParams p = busy_system();
        const BareMode fp{p.fp.omega - 2e11, 1.3 * p.fp.kappa};
        const SolverOptions o = with_nmax(n_max);
        const Eigen::MatrixXcd sup = oracle::superoperator(p, fp, n_max, p.target.omega, p.pump.cw_rate);
        const int d = o.space.dim();
        for (int k = 0; k < 5; ++k) {
            const DensityMatrix rho{o.space, oracle::random_state(d, rng)};
            const Eigen::MatrixXcd got = liouvillian_apply(p, fp, rho, o);
            const Eigen::VectorXcd want = sup * Eigen::Map<const Eigen::VectorXcd>(rho.rho.data(), d * d);
            const Eigen::Map<const Eigen::VectorXcd> g(got.data(), d * d);
            CHECK((g - want).norm() <= 1e-10 * want.norm());
            // the output is traceless relative to the generator's rate scale
            CHECK(std::abs(got.trace()) <= 1e-12 * sup.norm() * rho.rho.norm());
        }
        Generator gen = make_generator(o.space, p, p.target.omega);
        gen.update(fp.omega, fp.kappa, p.pump.cw_rate);
        const Eigen::MatrixXcd sparse = Eigen::MatrixXcd(sparse_superoperator(gen));
        CHECK((sparse - sup).norm() <= 1e-12 * sup.norm());
    }
}

TEST_CASE("parallel kernel is bit-identical to the serial one", "[lindblad][kernel]") {
    const SystemParams p = busy_system();
    set_threads(4);
    std::mt19937_64 rng(8);
    for (int n_max : {2, 3, 5}) {
        const HilbertSpec spec{n_max};
        Generator gen = make_generator(spec, p, p.target.omega);
        const Eigen::MatrixXcd rho = oracle::random_state(spec.dim(), rng);
        Eigen::MatrixXcd a(spec.dim(), spec.dim()), b(spec.dim(), spec.dim());
        apply_generator(gen, rho.data(), a.data(), true);
        apply_generator(gen, rho.data(), b.data(), false);
        CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
        const Eigen::MatrixXcd ref = apply_generator_reference(gen, rho);
        CHECK((a - ref).norm() <= 1e-12 * ref.norm());
    }
    set_threads(0);
}

TEST_CASE("liouvillian special cases", "[lindblad]") {
    SystemParams p = default_system();
    const SolverOptions o = with_nmax(2);
    const Eigen::MatrixXcd v = liouvillian_apply(p, p.fp, DensityMatrix::vacuum(o.space), o);
    CHECK(v.norm() == 0.0);

    p.emitter.g = 0.0;
    p.eta = 0.0;
    const DensityMatrix one = DensityMatrix::basis_state(o.space, 0, 1, 0);
    const Eigen::MatrixXcd d = liouvillian_apply(p, p.fp, one, o);
    const OperatorSet ops = build_space(o.space);
    const double dn = (ops.n_t * d).trace().real();
    CHECK_THAT(dn, WithinRel(-2.0 * p.target.kappa, 1e-14));

    DensityMatrix wrong{o.space, Eigen::MatrixXcd::Zero(5, 5)};
    CHECK_THROWS_AS(liouvillian_apply(p, p.fp, wrong, o), InvalidInput);
}

TEST_CASE("analytic decays", "[lindblad]") {
    SystemParams p = default_system();
    p.emitter.g = 0.0;
    p.eta = 0.0;
    p.emitter.gamma_leaky = 1e9;
    const SolverOptions o = with_nmax(1);

    const auto t = linspace(0.0, 3000.0, 31);
    const Trajectory e = evolve(p, {}, DensityMatrix::basis_state(o.space, 1, 0, 0), t, o);
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK_THAT(e.emitter[i], WithinRel(std::exp(-1e9 * ps_to_s(t[i])), 1e-6));
    }

    const double t_e = s_to_ps(1.0 / (2.0 * p.target.kappa));
    const std::vector<double> tc{0.0, t_e};
    const Trajectory c = evolve(p, {}, DensityMatrix::basis_state(o.space, 0, 1, 0), tc, o);
    CHECK_THAT(c.n_t[1], WithinRel(std::exp(-1.0), 1e-6));
}

TEST_CASE("weak-coupling Purcell decay", "[lindblad][oracle]") {
    SystemParams p = default_system();
    p.eta = 0.0;
    p.emitter.g = p.target.kappa / 20.0;
    const SolverOptions o = with_nmax(1);
    const auto t = linspace(0.0, 3000.0, 61);
    const Trajectory tr = evolve(p, {}, DensityMatrix::basis_state(o.space, 1, 0, 0), t, o);
    const double rate = -oracle::log_slope(t, tr.emitter, 5, t.size()) / kPicosecond;
    const double expect = p.emitter.gamma_leaky + 2.0 * p.emitter.g * p.emitter.g / p.target.kappa;
    CHECK_THAT(rate, WithinRel(expect, 0.05));
}

TEST_CASE("trajectory invariants under pulses and pumping", "[lindblad][property]") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 6; ++k) {
        SystemParams p = default_system();
        p.pump.cw_rate = 1e9 * u(rng);
        p.pump.pulses.push_back({20.0 + 20.0 * u(rng), 0.5 * u(rng), 6.0});
        TuningProfile prof;
        prof.static_detuning_nm = u(rng) - 0.5;
        prof.pulses.push_back({30.0 * u(rng), 0.6 * u(rng), 50.0 + 400.0 * u(rng), k % 2 ? 3.0 : 0.0});
        const SolverOptions o = with_nmax(2);
        const DensityMatrix rho0{o.space, oracle::random_state(o.space.dim(), rng)};
        const auto t = linspace(0.0, 120.0, 61);
        const Trajectory tr = evolve(p, prof, rho0, t, o);
        CHECK(tr.max_trace_deviation < 1e-8);
        CHECK(tr.max_hermiticity_error < 1e-10);
        CHECK(tr.min_eigenvalue >= -1e-8);
        for (std::size_t i = 0; i < t.size(); ++i) {
            CHECK(tr.n_t[i] >= -1e-8);
            CHECK(tr.n_fp[i] >= -1e-8);
            CHECK(tr.n1[i] >= -1e-8);
            CHECK(tr.n2[i] >= -1e-8);
            CHECK(std::abs(tr.n1[i] + tr.n2[i] - tr.n_t[i] - tr.n_fp[i]) < 1e-8);
        }
    }
}

TEST_CASE("pump pulses move population by 1 - exp(-area)", "[lindblad]") {
    SystemParams p = default_system();
    p.emitter.g = 0.0;
    p.emitter.gamma_leaky = 0.0;
    const SolverOptions o = with_nmax(1);
    const std::vector<double> t{-50.0, 10.0, 60.0};
    for (double width : {0.0, 6.0}) {
        SystemParams q = p;
        q.pump.pulses = {{10.0, 0.7, width}};
        const Trajectory tr = evolve(q, {}, DensityMatrix::vacuum(o.space), t, o);
        CHECK_THAT(tr.emitter[2], WithinRel(1.0 - std::exp(-0.7), 1e-6));
        if (width == 0.0) CHECK_THAT(tr.emitter[1], WithinRel(1.0 - std::exp(-0.7), 1e-12));
    }
}

TEST_CASE("mode populations", "[lindblad]") {
    const HilbertSpec spec{2};
    const DensityMatrix s = DensityMatrix::basis_state(spec, 0, 1, 2);
    const CoupledModes bare{};
    const auto [a, b] = mode_populations(s, bare);
    CHECK(a == 1.0);
    CHECK(b == 2.0);

    CoupledModes half;
    half.alpha = std::sqrt(0.5);
    half.beta = std::sqrt(0.5);
    const auto [h1, h2] = mode_populations(DensityMatrix::basis_state(spec, 0, 1, 0), half);
    CHECK_THAT(h1, WithinAbs(0.5, 1e-15));
    CHECK_THAT(h2, WithinAbs(0.5, 1e-15));

    // against <b^dag b> built from explicit operators, and the sum rule
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const oracle::Ops ops = oracle::operators(2);
    for (int k = 0; k < 50; ++k) {
        const DensityMatrix r{spec, oracle::random_state(spec.dim(), rng)};
        SystemParams p = default_system();
        const CoupledModes c = couple(p.target, BareMode{p.fp.omega + 1e12 * u(rng), p.fp.kappa}, p.eta);
        const Eigen::MatrixXcd b1 = c.alpha * ops.at + c.beta * ops.af;
        const Eigen::MatrixXcd b2 = -std::conj(c.beta) * ops.at + std::conj(c.alpha) * ops.af;
        const auto [n1, n2] = mode_populations(r, c);
        CHECK_THAT(n1, WithinAbs((b1.adjoint() * b1 * r.rho).trace().real(), 1e-12));
        CHECK_THAT(n2, WithinAbs((b2.adjoint() * b2 * r.rho).trace().real(), 1e-12));
        const Moments m = moments(r);
        CHECK_THAT(n1 + n2, WithinAbs(m.n_t + m.n_fp, 1e-12));
    }
}

TEST_CASE("steady state", "[lindblad]") {
    SystemParams p = default_system();
    const SolverOptions o = with_nmax(2);
    const DensityMatrix vac = steady_state(p, p.fp, o);
    CHECK(vac.rho(0, 0) == cplx{1.0, 0.0});

    // weak pump on an isolated target-emitter pair: two-level rate equation
    p.eta = 0.0;
    p.emitter.g = p.target.kappa / 20.0;
    p.pump.cw_rate = 1e7;
    const DensityMatrix s = steady_state(p, p.fp, o);
    CHECK_NOTHROW(s.validate());
    const double gamma = p.emitter.gamma_leaky + purcell_rate(p.emitter.g, p.target.kappa);
    CHECK_THAT(moments(s).emitter, WithinRel(p.pump.cw_rate / gamma, 0.05));

    // long-time limit of the evolution
    SystemParams q = default_system();
    q.pump.cw_rate = 1e9;
    const DensityMatrix ss = steady_state(q, q.fp, o);
    const std::vector<double> t{0.0, 30000.0};
    const Trajectory tr = evolve(q, {}, DensityMatrix::vacuum(o.space), t, o);
    const Moments m = moments(ss);
    CHECK_THAT(tr.emitter[1], WithinRel(m.emitter, 0.01));
    CHECK_THAT(tr.n_t[1], WithinRel(m.n_t, 0.01));
    CHECK_THAT(tr.n_fp[1], WithinRel(m.n_fp, 0.01));
}

TEST_CASE("steady state reports non-convergence", "[lindblad]") {
    SystemParams p = default_system();
    p.pump.cw_rate = 1e9;
    SolverOptions o = with_nmax(1);
    o.hooks.flip_cavity_anticommutator = true;
    o.steady_max_time_ps = 2000.0;
    CHECK_THROWS_AS(steady_state(p, p.fp, o), ConvergenceFailure);
}

TEST_CASE("frame invariance", "[lindblad][property]") {
    SystemParams p = busy_system();
    p.emitter.dephasing = 0.0;
    SolverOptions rot = with_nmax(1);
    rot.rtol = 1e-11;
    rot.atol = 1e-14;
    SolverOptions lab = rot;
    lab.frame_omega = 0.0;
    SolverOptions other = rot;
    other.frame_omega = p.target.omega + 3e11;
    TuningProfile prof;
    prof.pulses.push_back({0.5, 0.3, 100.0, 0.0});
    const auto t = linspace(0.0, 1.0, 5);
    const DensityMatrix rho0 = DensityMatrix::basis_state(rot.space, 1, 0, 1);
    const Trajectory a = evolve(p, prof, rho0, t, rot);
    const Trajectory b = evolve(p, prof, rho0, t, lab);
    const Trajectory c = evolve(p, prof, rho0, t, other);
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK_THAT(b.emitter[i], WithinAbs(a.emitter[i], 1e-9));
        CHECK_THAT(b.n_t[i], WithinAbs(a.n_t[i], 1e-9));
        CHECK_THAT(b.n_fp[i], WithinAbs(a.n_fp[i], 1e-9));
        CHECK_THAT(c.n_t[i], WithinAbs(a.n_t[i], 1e-9));
        CHECK_THAT(c.n_fp[i], WithinAbs(a.n_fp[i], 1e-9));
    }
}

TEST_CASE("fixed-step mode is reproducible and agrees with adaptive", "[lindblad]") {
    SystemParams p = default_system();
    p.pump.cw_rate = 1e9;
    TuningProfile prof;
    prof.pulses.push_back({10.0, 0.6, 100.0, 0.0});
    SolverOptions fixed = with_nmax(2);
    fixed.fixed_step_ps = 0.05;
    const auto t = linspace(0.0, 50.0, 11);
    const DensityMatrix rho0 = DensityMatrix::basis_state(fixed.space, 1, 1, 0);
    const Trajectory a = evolve(p, prof, rho0, t, fixed);
    const Trajectory b = evolve(p, prof, rho0, t, fixed);
    const Trajectory c = evolve(p, prof, rho0, t, with_nmax(2));
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(a.n_t[i] == b.n_t[i]);
        CHECK(a.emitter[i] == b.emitter[i]);
        CHECK_THAT(a.n_t[i], WithinAbs(c.n_t[i], 1e-7));
    }
}

TEST_CASE("evolve input errors", "[lindblad]") {
    const SystemParams p = default_system();
    const SolverOptions o = with_nmax(2);
    const DensityMatrix v = DensityMatrix::vacuum(o.space);
    std::vector<double> bad{0.0, 1.0, 1.0};
    CHECK_THROWS_AS(evolve(p, {}, v, bad, o), InvalidInput);
    std::vector<double> empty;
    CHECK_THROWS_AS(evolve(p, {}, v, empty, o), InvalidInput);
    const std::vector<double> t{0.0, 1.0};
    CHECK_THROWS_AS(evolve(p, {}, DensityMatrix::vacuum(HilbertSpec{3}), t, o), InvalidInput);
    DensityMatrix notrace = v;
    notrace.rho *= 2.0;
    CHECK_THROWS_AS(evolve(p, {}, notrace, t, o), InvalidInput);
    CHECK_THROWS_AS(DensityMatrix::basis_state(o.space, 0, 3, 0), InvalidInput);
}

TEST_CASE("integrator step-size underflow carries a diagnostic", "[lindblad]") {
    // y' = y^2 blows up at t = 1
    auto rhs = [](double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy, bool) { dy = y.cwiseProduct(y); };
    Eigen::VectorXcd y = Eigen::VectorXcd::Ones(1);
    double h = 0.0;
    OdeStats stats;
    try {
        dopri5_integrate(rhs, 0.0, 2.0, y, h, OdeOptions{}, stats);
        FAIL("no exception");
    } catch (const NumericalFailure& e) {
        const std::string msg = e.what();
        CHECK(msg.find("t =") != std::string::npos);
        CHECK(msg.find("step") != std::string::npos);
    }
}

TEST_CASE("truncation convergence in the shipped scenarios", "[lindblad][slow]") {
    for (const std::string name : {"fig3-burst", "fig3-dip", "fig4-delay"}) {
        RunConfig cfg = shipped_scenario(name);
        const std::optional<double> delay =
            cfg.control_delays_ps.empty() ? std::nullopt : std::optional<double>(cfg.control_delays_ps.front());
        cfg.spectra.normalize_to_reference = false;
        const DynamicRun lo = simulate(cfg, delay);
        cfg.solver.space.n_max *= 2;
        const DynamicRun hi = simulate(cfg, delay);
        const auto rel = [](const std::vector<double>& a, const std::vector<double>& b) {
            double peak = 0.0, diff = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                peak = std::max(peak, std::abs(b[i]));
                diff = std::max(diff, std::abs(a[i] - b[i]));
            }
            return diff / peak;
        };
        INFO(name);
        CHECK(rel(lo.trajectory.emitter, hi.trajectory.emitter) < 0.01);
        CHECK(rel(lo.trajectory.n_t, hi.trajectory.n_t) < 0.01);
        CHECK(rel(lo.trajectory.n_fp, hi.trajectory.n_fp) < 0.01);
        CHECK(rel(lo.trajectory.n1, hi.trajectory.n1) < 0.01);
        CHECK(rel(lo.trajectory.n2, hi.trajectory.n2) < 0.01);
        for (std::size_t f = 0; f < lo.filters.size(); ++f) {
            CHECK(rel(lo.filters[f].curve.intensity, hi.filters[f].curve.intensity) < 0.01);
        }
    }
}
