#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "cqed/csv.hpp"
#include "cqed/error.hpp"
#include "cqed/fitting.hpp"
#include "cqed/nelder_mead.hpp"
#include "cqed/units.hpp"

using namespace cqed;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const EmitterParams kEmitter{0.0, 1e10, 5e8, 0.0};

FitParameters truth() { return {1.564e11, 1.564e11, 4.692e11, 1552.0, 0.0, 0.0, 0.0, 0.0}; }

AnticrossingData synthetic(const FitParameters& th, ControlKind control, const std::vector<double>& controls,
                           bool q, bool tau) {
    AnticrossingData d;
    d.control = control;
    for (double c : controls) {
        AnticrossingRow r = predict_row(th, control, c, kEmitter);
        if (!q) {
            r.q1.reset();
            r.q2.reset();
        }
        if (!tau) r.tau_ns.reset();
        d.rows.push_back(r);
    }
    return d;
}

std::vector<double> detunings() {
    std::vector<double> v;
    for (int i = -12; i <= 12; ++i) v.push_back(0.125 * i);
    return v;
}

FitParameters perturbed(FitParameters p) {
    p.eta *= 1.2;
    p.kappa_t *= 0.85;
    p.kappa_fp *= 1.15;
    p.lambda_t += 0.03;
    return p;
}

FitOptions options() {
    FitOptions o;
    o.fixed_emitter = kEmitter;
    return o;
}

}  // namespace

TEST_CASE("residuals vanish at the generating parameters", "[fitting]") {
    const auto d = synthetic(truth(), ControlKind::Detuning, detunings(), true, true);
    FitParameters th = truth();
    th.g = kEmitter.g;
    th.gamma_leaky = kEmitter.gamma_leaky;
    const Eigen::VectorXd r = residuals(th, d, {}, options());
    CHECK(r.size() == 5 * static_cast<Eigen::Index>(d.rows.size()));
    CHECK(r.cwiseAbs().maxCoeff() < 1e-9);

    const auto w = synthetic(truth(), ControlKind::Detuning, detunings(), false, false);
    const Eigen::VectorXd rw = residuals(truth(), w, {}, options());
    CHECK(rw.size() == 2 * static_cast<Eigen::Index>(w.rows.size()));
    CHECK(rw.cwiseAbs().maxCoeff() < 1e-9);

    FitParameters up = truth();
    up.eta *= 1.1;
    CHECK(residuals(up, w, {}, options()).norm() > rw.norm());
}

TEST_CASE("out-of-bounds parameters give large finite penalties", "[fitting]") {
    const auto d = synthetic(truth(), ControlKind::Detuning, detunings(), false, false);
    for (double eta : {1e3, 1e20, -5.0, std::numeric_limits<double>::quiet_NaN()}) {
        FitParameters p = truth();
        p.eta = eta;
        const Eigen::VectorXd r = residuals(p, d, {}, options());
        CHECK(r.allFinite());
        CHECK(r.cwiseAbs().minCoeff() >= 1e6);
    }
}

TEST_CASE("noiseless recovery of every parameter", "[fitting][oracle]") {
    const FitParameters th = truth();
    const auto d = synthetic(th, ControlKind::Detuning, detunings(), true, true);
    FitParameters init = perturbed(th);
    init.g = 1.3 * kEmitter.g;
    init.gamma_leaky = 0.7 * kEmitter.gamma_leaky;
    const FitResult r = fit(d, init, {}, options());
    CHECK(r.converged);
    CHECK(r.parameters.size() == 6);
    CHECK_THAT(r.estimate.eta, WithinRel(th.eta, 1e-3));
    CHECK_THAT(r.estimate.kappa_t, WithinRel(th.kappa_t, 1e-3));
    CHECK_THAT(r.estimate.kappa_fp, WithinRel(th.kappa_fp, 1e-3));
    CHECK_THAT(r.estimate.lambda_t, WithinRel(th.lambda_t, 1e-3));
    CHECK_THAT(r.estimate.g, WithinRel(kEmitter.g, 1e-3));
    CHECK_THAT(r.estimate.gamma_leaky, WithinRel(kEmitter.gamma_leaky, 1e-3));
    CHECK(r.residual_norm >= 0.0);
    CHECK_FALSE(r.near_degenerate);
}

TEST_CASE("noisy wavelengths still pin down the cavity coupling", "[fitting][oracle]") {
    const FitParameters th = truth();
    std::mt19937_64 rng(99);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::vector<double> err;
    for (int k = 0; k < 15; ++k) {
        auto d = synthetic(th, ControlKind::Detuning, detunings(), false, false);
        for (auto& r : d.rows) {
            r.lambda1 += noise(rng);
            r.lambda2 += noise(rng);
        }
        FitOptions o = options();
        o.default_lambda_err_nm = 0.01;
        const FitResult r = fit(d, perturbed(th), {}, o);
        err.push_back(std::abs(r.estimate.eta / th.eta - 1.0));
    }
    std::nth_element(err.begin(), err.begin() + 7, err.end());
    CHECK(err[7] < 0.05);
}

TEST_CASE("uncoupled data are flagged near-degenerate", "[fitting]") {
    FitParameters th = truth();
    th.eta = 0.0;
    th.kappa_fp = 2.0 * th.kappa_t;
    const auto d = synthetic(th, ControlKind::Detuning, detunings(), false, false);
    FitParameters init = truth();
    init.kappa_fp = th.kappa_fp;
    init.eta = 5e10;
    const FitResult r = fit(d, init, {}, options());
    const double resolution = std::abs(detuning_wl_to_omega(0.05, 1552.0));
    CHECK(2.0 * r.estimate.eta < resolution);
    CHECK(r.near_degenerate);
}

TEST_CASE("power calibration", "[fitting][oracle]") {
    FitParameters th = truth();
    th.slope_nm_per_mw = 0.1;
    th.offset_nm = -1.0;
    std::vector<double> powers;
    for (int i = 0; i <= 20; ++i) powers.push_back(1.0 * i);
    const auto d = synthetic(th, ControlKind::Power, powers, false, false);
    FitParameters init = perturbed(th);
    init.slope_nm_per_mw = 0.09;
    init.offset_nm = -0.95;
    const FitResult r = fit(d, init, {}, options());
    const PowerCalibration cal = calibrate_power(d, r);
    CHECK_THAT(cal.slope_nm_per_mw, WithinRel(0.1, 0.02));
    CHECK(cal.detuning(0.0) == cal.offset_nm);
    CHECK(cal.slope_nm_per_mw >= 0.0);
    CHECK_THAT(r.estimate.lambda_t + cal.offset_nm, WithinAbs(th.lambda_t + th.offset_nm, 0.01));

    const auto det = synthetic(truth(), ControlKind::Detuning, detunings(), false, false);
    CHECK_THROWS_AS(calibrate_power(det, fit(det, truth(), {}, options())), InvalidInput);
}

TEST_CASE("fits are reproducible and monotone", "[fitting][property]") {
    const auto d = synthetic(truth(), ControlKind::Detuning, detunings(), true, false);
    FitOptions o = options();
    o.starts = 4;
    o.seed = 17;
    const FitResult a = fit(d, perturbed(truth()), {}, o);
    const FitResult b = fit(d, perturbed(truth()), {}, o);
    CHECK(a.estimate.eta == b.estimate.eta);
    CHECK(a.estimate.kappa_t == b.estimate.kappa_t);
    CHECK(a.estimate.kappa_fp == b.estimate.kappa_fp);
    CHECK(a.estimate.lambda_t == b.estimate.lambda_t);
    CHECK(a.residual_norm == b.residual_norm);
    CHECK(a.best_start == b.best_start);
    CHECK(a.evaluations == b.evaluations);
    CHECK(a.objective_history == b.objective_history);
    REQUIRE(a.objective_history.size() > 2);
    for (std::size_t i = 1; i < a.objective_history.size(); ++i) {
        CHECK(a.objective_history[i] <= a.objective_history[i - 1]);
    }
}

TEST_CASE("row order does not matter", "[fitting][property]") {
    const auto d = synthetic(truth(), ControlKind::Detuning, detunings(), true, false);
    auto shuffled = d;
    std::mt19937_64 rng(5);
    std::vector<std::size_t> perm(d.rows.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled.rows[i] = d.rows[perm[i]];

    const FitParameters probe = perturbed(truth());
    const Eigen::VectorXd r0 = residuals(probe, d, {}, options());
    const Eigen::VectorXd r1 = residuals(probe, shuffled, {}, options());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        for (Eigen::Index k = 0; k < 4; ++k) {
            CHECK(r1[static_cast<Eigen::Index>(4 * i) + k] == r0[static_cast<Eigen::Index>(4 * perm[i]) + k]);
        }
    }
    const FitResult a = fit(d, probe, {}, options());
    const FitResult b = fit(shuffled, probe, {}, options());
    CHECK_THAT(b.estimate.eta, WithinRel(a.estimate.eta, 1e-7));
    CHECK_THAT(b.estimate.kappa_fp, WithinRel(a.estimate.kappa_fp, 1e-7));

    // swapped wavelength pairs are sorted on ingest
    auto swapped = d;
    for (auto& r : swapped.rows) {
        std::swap(r.lambda1, r.lambda2);
        std::swap(r.q1, r.q2);
    }
    CHECK(residuals(probe, swapped, {}, options()) == r0);
}

TEST_CASE("wavelength offset equivariance", "[fitting][equivariance]") {
    const double shift = 1.0;
    const auto d = synthetic(truth(), ControlKind::Detuning, detunings(), true, false);
    auto moved = d;
    for (auto& r : moved.rows) {
        r.lambda1 += shift;
        r.lambda2 += shift;
    }
    const FitResult a = fit(d, perturbed(truth()), {}, options());
    FitParameters init = perturbed(truth());
    init.lambda_t += shift;
    const FitResult b = fit(moved, init, {}, options());
    CHECK_THAT(b.estimate.lambda_t - a.estimate.lambda_t, WithinRel(shift, 1e-6));
    CHECK_THAT(b.estimate.eta, WithinRel(a.estimate.eta, 1e-6));
    CHECK_THAT(b.estimate.kappa_t, WithinRel(a.estimate.kappa_t, 1e-6));
    CHECK_THAT(b.estimate.kappa_fp, WithinRel(a.estimate.kappa_fp, 1e-6));
}

TEST_CASE("fit input errors", "[fitting]") {
    auto d = synthetic(truth(), ControlKind::Detuning, detunings(), false, false);
    FitParameters bad = truth();
    bad.eta = 1e20;
    CHECK_THROWS_AS(fit(d, bad, {}, options()), InvalidInput);
    d.rows.resize(3);
    CHECK_THROWS_AS(fit(d, truth(), {}, options()), InvalidInput);
}

TEST_CASE("anticrossing CSV ingestion", "[fitting][csv]") {
    std::istringstream ok(
        "control[nm],lambda1[nm],lambda2[nm],q1[1],q2[1]\n"
        "-1,1551.9,1553.1,3000,1500\n"
        "0,1552.4,1552.0,2000,2100\n"
        "\n"
        "0.5,1551.8,1552.7,2500,1800\n"
        "1,1551.9,1553.0,3500,1400\n");
    const AnticrossingData d = parse_anticrossing_csv(ok, "ok.csv", ControlKind::Detuning);
    REQUIRE(d.rows.size() == 4);
    CHECK(d.has_q());
    CHECK_FALSE(d.has_tau());
    CHECK(d.rows[1].lambda1 == 1552.0);  // sorted pair carries its Q
    CHECK(*d.rows[1].q1 == 2100.0);

    std::istringstream three("control,lambda1,lambda2\n0,1,2\n1,1,2\n2,1,2\n");
    CHECK_THROWS_WITH(parse_anticrossing_csv(three, "three.csv", ControlKind::Detuning), ContainsSubstring("at least 4"));

    std::istringstream unknown("control,lambda1,lambda2,qq\n0,1,2,3\n");
    CHECK_THROWS_WITH(parse_anticrossing_csv(unknown, "u.csv", ControlKind::Detuning),
                      ContainsSubstring("column 4") && ContainsSubstring("qq"));

    std::istringstream badnum("control,lambda1,lambda2\n0,1,2\n1,1,2\n2,x1,2\n3,1,2\n");
    CHECK_THROWS_WITH(parse_anticrossing_csv(badnum, "b.csv", ControlKind::Detuning),
                      ContainsSubstring("line 4") && ContainsSubstring("column 2"));

    std::istringstream ragged("control,lambda1,lambda2\n0,1,2\n1,1\n");
    CHECK_THROWS_AS(parse_anticrossing_csv(ragged, "r.csv", ControlKind::Detuning), ParseError);

    std::istringstream partial("control,lambda1,lambda2,tau\n0,1,2,1\n1,1,2,\n2,1,2,1\n3,1,2,1\n");
    CHECK_THROWS_AS(parse_anticrossing_csv(partial, "p.csv", ControlKind::Detuning), ParseError);

    CHECK_THROWS_AS(load_anticrossing_csv("/nonexistent/file.csv", ControlKind::Detuning), IoError);
}

TEST_CASE("number formatting round-trips", "[csv][property]") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-300.0, 300.0);
    for (int k = 0; k < 2000; ++k) {
        const double v = std::pow(10.0, u(rng) / 10.0) * (k % 2 ? -1.0 : 1.0);
        CHECK(std::stod(format_number(v)) == v);
    }
    CHECK(strip_unit(" lambda1 [nm] ") == "lambda1");
    CHECK(strip_unit("tau") == "tau");
}

TEST_CASE("simplex minimizes the Rosenbrock valley", "[fitting][nelder-mead]") {
    const Objective rosen = [](const Eigen::VectorXd& x) {
        return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
    };
    Eigen::VectorXd x0(2);
    x0 << -1.2, 1.0;
    const NelderMeadResult r = nelder_mead(rosen, x0);
    CHECK(r.converged);
    CHECK_THAT(r.x[0], WithinAbs(1.0, 1e-6));
    CHECK_THAT(r.x[1], WithinAbs(1.0, 1e-6));
    for (std::size_t i = 1; i < r.best_history.size(); ++i) CHECK(r.best_history[i] <= r.best_history[i - 1]);

    NelderMeadOptions tight;
    tight.max_evals = 20;
    const NelderMeadResult s = nelder_mead(rosen, x0, {}, tight);
    CHECK_FALSE(s.converged);
    CHECK(s.evaluations <= 20 + 3);
}
