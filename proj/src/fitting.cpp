#include "cqed/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <span>

#include "cqed/csv.hpp"
#include "cqed/error.hpp"
#include "cqed/parallel.hpp"
#include "cqed/units.hpp"

namespace cqed {

namespace {

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

template <class Get>
bool all_or_none(const std::vector<AnticrossingRow>& rows, Get get, const char* name) {
    std::size_t n = 0;
    for (const auto& r : rows) n += get(r).has_value() ? 1 : 0;
    if (n != 0 && n != rows.size()) throw InvalidInput(std::string("column '") + name + "' must be filled in every row or none");
    return n == rows.size() && n > 0;
}

// Free-parameter layout of the internal vector.
struct Layout {
    bool power = false;
    bool decay = false;
    Eigen::Index size() const { return 4 + (power ? 2 : 0) + (decay ? 2 : 0); }
};

Layout layout_for(const AnticrossingData& data) { return {data.control == ControlKind::Power, data.has_tau()}; }

// Rates live in log space so the simplex sees comparable scales.
Eigen::VectorXd to_internal(const FitParameters& p, const Layout& l) {
    Eigen::VectorXd x(l.size());
    Eigen::Index i = 0;
    x[i++] = std::log(p.eta);
    x[i++] = std::log(p.kappa_t);
    x[i++] = std::log(p.kappa_fp);
    x[i++] = p.lambda_t;
    if (l.power) {
        x[i++] = p.slope_nm_per_mw;
        x[i++] = p.offset_nm;
    }
    if (l.decay) {
        x[i++] = std::log(p.g);
        x[i++] = std::log(p.gamma_leaky);
    }
    return x;
}

FitParameters from_internal(const Eigen::VectorXd& x, const Layout& l, const FitParameters& fixed) {
    FitParameters p = fixed;
    Eigen::Index i = 0;
    p.eta = std::exp(x[i++]);
    p.kappa_t = std::exp(x[i++]);
    p.kappa_fp = std::exp(x[i++]);
    p.lambda_t = x[i++];
    if (l.power) {
        p.slope_nm_per_mw = x[i++];
        p.offset_nm = x[i++];
    }
    if (l.decay) {
        p.g = std::exp(x[i++]);
        p.gamma_leaky = std::exp(x[i++]);
    }
    return p;
}

struct ResolvedBounds {
    double rate_min, rate_max, gl_min, gl_max, lt_min, lt_max, slope_min, slope_max, offset_min, offset_max;
};

ResolvedBounds resolve(const FitBounds& b, const AnticrossingData& data) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& r : data.rows) {
        lo = std::min(lo, r.lambda1);
        hi = std::max(hi, r.lambda2);
    }
    ResolvedBounds out{b.rate_min, b.rate_max, b.gamma_leaky_min, b.gamma_leaky_max, b.lambda_t_min.value_or(lo - 2.0), b.lambda_t_max.value_or(hi + 2.0),
                       b.slope_min, b.slope_max, b.offset_min, b.offset_max};
    if (!(out.rate_min > 0.0 && out.rate_max > out.rate_min) || !(out.lt_max > out.lt_min) ||
        !(out.gl_min > 0.0 && out.gl_max > out.gl_min) || !(out.slope_max >= out.slope_min) || !(out.offset_max >= out.offset_min)) {
        throw InvalidInput("fit bounds are empty or non-positive");
    }
    return out;
}

// Total distance outside the box, in units loosely comparable across parameters.
double violation(const FitParameters& p, const Layout& l, const ResolvedBounds& b) {
    const auto out = [](double v, double lo, double hi) {
        if (!std::isfinite(v)) return 1e6;
        return v < lo ? lo - v : (v > hi ? v - hi : 0.0);
    };
    const auto out_log = [&](double v, double lo = 0.0, double hi = 0.0) {
        if (!(v > 0.0) || !std::isfinite(v)) return 1e6;
        if (lo == 0.0) {
            lo = b.rate_min;
            hi = b.rate_max;
        }
        return out(std::log(v), std::log(lo), std::log(hi));
    };
    double s = out_log(p.eta) + out_log(p.kappa_t) + out_log(p.kappa_fp) + out(p.lambda_t, b.lt_min, b.lt_max);
    if (l.power) s += out(p.slope_nm_per_mw, b.slope_min, b.slope_max) + out(p.offset_nm, b.offset_min, b.offset_max);
    if (l.decay) {
        s += out_log(p.g) + out_log(p.gamma_leaky, b.gl_min, b.gl_max);
        // weak-coupling guard of the emitter model
        if (p.g >= std::min(p.kappa_t, p.kappa_fp)) s += std::log(p.g / std::min(p.kappa_t, p.kappa_fp)) + 1e-3;
    }
    return s;
}

Eigen::Index residual_count(const AnticrossingData& data) {
    const auto per_row = 2 + (data.has_q() ? 2 : 0) + (data.has_tau() ? 1 : 0);
    return static_cast<Eigen::Index>(data.rows.size()) * per_row;
}

Eigen::VectorXd residuals_impl(const FitParameters& theta, const AnticrossingData& data, const Layout& l,
                               const ResolvedBounds& b, const FitOptions& opt) {
    const Eigen::Index m = residual_count(data);
    const double v = violation(theta, l, b);
    if (v > 0.0) return Eigen::VectorXd::Constant(m, 1e6 * (1.0 + v));

    SystemParams sys;
    sys.target = BareMode::from_wavelength(theta.lambda_t, theta.kappa_t);
    sys.fp = BareMode{sys.target.omega, theta.kappa_fp};
    sys.eta = theta.eta;
    sys.emitter = l.decay ? EmitterParams{sys.target.omega, theta.g, theta.gamma_leaky, 0.0} : opt.fixed_emitter;
    sys.emitter.omega0 = sys.target.omega;

    std::vector<double> offsets;
    offsets.reserve(data.rows.size());
    for (const auto& r : data.rows) {
        const double det = l.power ? theta.slope_nm_per_mw * r.control + theta.offset_nm : r.control;
        const double lambda_fp = theta.lambda_t + det;
        if (!(lambda_fp > 0.0)) return Eigen::VectorXd::Constant(m, 1e6 * (1.0 + std::abs(lambda_fp)));
        offsets.push_back(wl_to_omega(lambda_fp) - sys.target.omega);
    }
    std::vector<SweepRow> rows;
    try {
        rows = anticrossing_sweep(sys, offsets);
    } catch (const std::exception&) {
        return Eigen::VectorXd::Constant(m, 1e6);
    }

    Eigen::VectorXd res(m);
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
        const AnticrossingRow& d = data.rows[i];
        const SweepRow& s = rows[i];
        const bool swap = s.lambda1 > s.lambda2;
        const double ml1 = swap ? s.lambda2 : s.lambda1;
        const double ml2 = swap ? s.lambda1 : s.lambda2;
        const double mq1 = swap ? s.q2 : s.q1;
        const double mq2 = swap ? s.q1 : s.q2;
        res[k++] = (ml1 - d.lambda1) / d.lambda1_err.value_or(opt.default_lambda_err_nm);
        res[k++] = (ml2 - d.lambda2) / d.lambda2_err.value_or(opt.default_lambda_err_nm);
        if (data.has_q()) {
            res[k++] = (mq1 - *d.q1) / d.q1_err.value_or(opt.default_q_rel_err * *d.q1);
            res[k++] = (mq2 - *d.q2) / d.q2_err.value_or(opt.default_q_rel_err * *d.q2);
        }
        if (data.has_tau()) {
            res[k++] = (s.decay_time / kNanosecond - *d.tau_ns) / d.tau_err.value_or(opt.default_tau_rel_err * *d.tau_ns);
        }
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        if (!std::isfinite(res[i])) res[i] = 1e6;
    }
    return res;
}

AnticrossingData prepared(const AnticrossingData& data) {
    AnticrossingData d = data;
    d.sort_pairs();
    d.validate();
    return d;
}

}  // namespace

bool AnticrossingData::has_q() const {
    return !rows.empty() && rows.front().q1.has_value() && rows.front().q2.has_value();
}

bool AnticrossingData::has_tau() const { return !rows.empty() && rows.front().tau_ns.has_value(); }

void AnticrossingData::validate() const {
    if (rows.size() < 4) {
        throw InvalidInput("anticrossing data need at least 4 rows, got " + std::to_string(rows.size()));
    }
    const bool q1 = all_or_none(rows, [](const auto& r) { return r.q1; }, "q1");
    const bool q2 = all_or_none(rows, [](const auto& r) { return r.q2; }, "q2");
    if (q1 != q2) throw InvalidInput("columns q1 and q2 must be given together");
    all_or_none(rows, [](const auto& r) { return r.tau_ns; }, "tau");
    all_or_none(rows, [](const auto& r) { return r.lambda1_err; }, "lambda1_err");
    all_or_none(rows, [](const auto& r) { return r.lambda2_err; }, "lambda2_err");
    all_or_none(rows, [](const auto& r) { return r.q1_err; }, "q1_err");
    all_or_none(rows, [](const auto& r) { return r.q2_err; }, "q2_err");
    all_or_none(rows, [](const auto& r) { return r.tau_err; }, "tau_err");
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const std::string at = "row " + std::to_string(i + 1) + ": ";
        if (!std::isfinite(r.control)) throw InvalidInput(at + "control must be finite");
        if (control == ControlKind::Power && r.control < 0.0) throw InvalidInput(at + "power must be >= 0");
        if (!positive(r.lambda1) || !positive(r.lambda2)) throw InvalidInput(at + "wavelengths must be > 0");
        if (r.lambda1 > r.lambda2) throw InvalidInput(at + "lambda1 must not exceed lambda2");
        for (const auto& o : {r.q1, r.q2, r.tau_ns, r.lambda1_err, r.lambda2_err, r.q1_err, r.q2_err, r.tau_err}) {
            if (o && !positive(*o)) throw InvalidInput(at + "Q, decay times and uncertainties must be > 0");
        }
    }
}

void AnticrossingData::sort_pairs() {
    for (auto& r : rows) {
        if (r.lambda1 > r.lambda2) {
            std::swap(r.lambda1, r.lambda2);
            std::swap(r.lambda1_err, r.lambda2_err);
            std::swap(r.q1, r.q2);
            std::swap(r.q1_err, r.q2_err);
        }
    }
}

AnticrossingData parse_anticrossing_csv(std::istream& in, const std::string& source, ControlKind control) {
    CsvTable t = parse_csv(in, source);
    static const char* known[] = {"control", "lambda1", "lambda2", "q1", "q2", "tau",
                                  "lambda1_err", "lambda2_err", "q1_err", "q2_err", "tau_err"};
    std::vector<int> col(std::size(known), -1);
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        const std::string name = strip_unit(t.header[c]);
        const auto it = std::find_if(std::begin(known), std::end(known), [&](const char* k) { return name == k; });
        if (it == std::end(known)) {
            throw ParseError(source + ": line 1, column " + std::to_string(c + 1) + ": unknown column '" + t.header[c] + "'");
        }
        auto& slot = col[static_cast<std::size_t>(it - std::begin(known))];
        if (slot >= 0) throw ParseError(source + ": line 1: duplicate column '" + name + "'");
        slot = static_cast<int>(c);
    }
    for (int i = 0; i < 3; ++i) {
        if (col[static_cast<std::size_t>(i)] < 0) {
            throw ParseError(source + ": line 1: missing required column '" + known[i] + "'");
        }
    }
    if (t.rows.size() < 4) {
        throw ParseError(source + ": need at least 4 data rows, found " + std::to_string(t.rows.size()));
    }

    AnticrossingData data;
    data.control = control;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto get = [&](std::size_t k) -> std::optional<double> {
            const int c = col[k];
            if (c < 0) return std::nullopt;
            if (t.rows[r].cells[static_cast<std::size_t>(c)].empty()) return std::nullopt;
            return t.number(r, static_cast<std::size_t>(c));
        };
        const auto need = [&](std::size_t k) {
            auto v = get(k);
            if (!v) {
                throw ParseError(source + ": line " + std::to_string(t.rows[r].line) + ", column " +
                                 std::to_string(col[k] + 1) + ": '" + known[k] + "' is required");
            }
            return *v;
        };
        AnticrossingRow row;
        row.control = need(0);
        row.lambda1 = need(1);
        row.lambda2 = need(2);
        row.q1 = get(3);
        row.q2 = get(4);
        row.tau_ns = get(5);
        row.lambda1_err = get(6);
        row.lambda2_err = get(7);
        row.q1_err = get(8);
        row.q2_err = get(9);
        row.tau_err = get(10);
        data.rows.push_back(row);
    }
    data.sort_pairs();
    try {
        data.validate();
    } catch (const InvalidInput& e) {
        throw ParseError(source + ": " + e.what());
    }
    return data;
}

AnticrossingData load_anticrossing_csv(const std::string& path, ControlKind control) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return parse_anticrossing_csv(in, path, control);
}

std::vector<std::string> fit_parameter_names(const AnticrossingData& data) {
    const Layout l = layout_for(data);
    std::vector<std::string> names{"eta", "kappa_t", "kappa_fp", "lambda_t"};
    if (l.power) {
        names.emplace_back("slope_nm_per_mw");
        names.emplace_back("offset_nm");
    }
    if (l.decay) {
        names.emplace_back("g");
        names.emplace_back("gamma_leaky");
    }
    return names;
}

Eigen::VectorXd residuals(const FitParameters& theta, const AnticrossingData& data, const FitBounds& bounds,
                          const FitOptions& options) {
    const AnticrossingData d = prepared(data);
    return residuals_impl(theta, d, layout_for(d), resolve(bounds, d), options);
}

AnticrossingRow predict_row(const FitParameters& theta, ControlKind control, double control_value,
                            const EmitterParams& emitter) {
    SystemParams sys;
    sys.target = BareMode::from_wavelength(theta.lambda_t, theta.kappa_t);
    sys.fp = BareMode{sys.target.omega, theta.kappa_fp};
    sys.eta = theta.eta;
    sys.emitter = emitter;
    sys.emitter.omega0 = sys.target.omega;
    const double det = control == ControlKind::Power ? theta.slope_nm_per_mw * control_value + theta.offset_nm
                                                     : control_value;
    const double offset = wl_to_omega(theta.lambda_t + det) - sys.target.omega;
    const SweepRow s = anticrossing_sweep(sys, std::span<const double>(&offset, 1)).front();
    AnticrossingRow r;
    r.control = control_value;
    r.lambda1 = s.lambda1;
    r.lambda2 = s.lambda2;
    r.q1 = s.q1;
    r.q2 = s.q2;
    r.tau_ns = s.decay_time / kNanosecond;
    if (r.lambda1 > r.lambda2) {
        std::swap(r.lambda1, r.lambda2);
        std::swap(r.q1, r.q2);
    }
    return r;
}

FitResult fit(const AnticrossingData& data_in, const FitParameters& init, const FitBounds& bounds_in,
              const FitOptions& options) {
    const AnticrossingData data = prepared(data_in);
    const Layout l = layout_for(data);
    const ResolvedBounds b = resolve(bounds_in, data);
    if (violation(init, l, b) > 0.0) throw InvalidInput("fit: initial parameters lie outside the bounds");
    if (options.starts < 1) throw InvalidInput("fit: starts must be >= 1");

    const Eigen::Index n = l.size();
    const auto objective = [&](const Eigen::VectorXd& x) {
        return residuals_impl(from_internal(x, l, init), data, l, b, options).squaredNorm();
    };

    // Start lattice: each coordinate takes one of three levels around the initial
    // guess; the seed picks the lattice points. Start 0 is always the guess itself.
    std::vector<Eigen::VectorXd> starts{to_internal(init, l)};
    std::mt19937_64 rng(options.seed);
    const Eigen::VectorXd x0 = starts.front();
    for (int s = 1; s < options.starts; ++s) {
        Eigen::VectorXd x = x0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int level = static_cast<int>(rng() % 3) - 1;  // -1, 0, +1
            const bool is_lambda = i == 3;
            const bool is_linear = is_lambda || (l.power && (i == 4 || i == 5));
            x[i] += level * (is_lambda ? 0.2 : is_linear ? 0.25 * std::max(std::abs(x0[i]), 0.1) : std::log(2.0));
        }
        FitParameters p = from_internal(x, l, init);
        if (violation(p, l, b) > 0.0) x = x0;  // lattice point outside the box
        starts.push_back(x);
    }

    std::vector<NelderMeadResult> runs(starts.size());
    parallel_for(
        static_cast<long>(starts.size()),
        [&](long s) {
            const auto& x = starts[static_cast<std::size_t>(s)];
            Eigen::VectorXd step(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                step[i] = (i == 3) ? 0.05 : (l.power && (i == 4 || i == 5)) ? 0.05 * std::max(std::abs(x[i]), 0.1) : 0.1;
            }
            runs[static_cast<std::size_t>(s)] = nelder_mead(objective, x, step, options.simplex);
        },
        options.parallel && starts.size() > 1);

    std::size_t best = 0;
    for (std::size_t s = 1; s < runs.size(); ++s) {
        if (runs[s].f < runs[best].f) best = s;
    }
    const NelderMeadResult& win = runs[best];

    FitResult r;
    r.estimate = from_internal(win.x, l, init);
    r.parameters = fit_parameter_names(data);
    r.residuals = residuals_impl(r.estimate, data, l, b, options);
    r.residual_norm = r.residuals.norm();
    r.converged = win.converged;
    r.best_start = static_cast<int>(best);
    r.objective_history = win.best_history;
    for (const auto& run : runs) r.evaluations += run.evaluations;

    // Standard errors from the finite-difference Jacobian in internal coordinates.
    const Eigen::Index m = r.residuals.size();
    Eigen::MatrixXd jac(m, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = 1e-6 * (1.0 + std::abs(win.x[i]));
        Eigen::VectorXd xp = win.x, xm = win.x;
        xp[i] += h;
        xm[i] -= h;
        jac.col(i) = (residuals_impl(from_internal(xp, l, init), data, l, b, options) -
                      residuals_impl(from_internal(xm, l, init), data, l, b, options)) /
                     (2.0 * h);
    }
    const double dof = static_cast<double>(std::max<Eigen::Index>(m - n, 1));
    const double s2 = r.residuals.squaredNorm() / dof;
    const Eigen::MatrixXd cov = s2 * (jac.transpose() * jac).completeOrthogonalDecomposition().pseudoInverse();
    Eigen::VectorXd sx = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    FitParameters& e = r.std_error;
    const FitParameters& p = r.estimate;
    Eigen::Index i = 0;
    e.eta = p.eta * sx[i++];
    e.kappa_t = p.kappa_t * sx[i++];
    e.kappa_fp = p.kappa_fp * sx[i++];
    e.lambda_t = sx[i++];
    if (l.power) {
        e.slope_nm_per_mw = sx[i++];
        e.offset_nm = sx[i++];
    }
    if (l.decay) {
        e.g = p.g * sx[i++];
        e.gamma_leaky = p.gamma_leaky * sx[i++];
    }

    const double resolution = std::abs(detuning_wl_to_omega(options.default_lambda_err_nm, p.lambda_t));
    r.near_degenerate = 2.0 * p.eta < resolution;
    return r;
}

PowerCalibration calibrate_power(const AnticrossingData& data, const FitResult& result) {
    if (data.control != ControlKind::Power) throw InvalidInput("calibrate_power: data have no power column");
    if (std::find(result.parameters.begin(), result.parameters.end(), "slope_nm_per_mw") == result.parameters.end()) {
        throw InvalidInput("calibrate_power: the fit did not include calibration parameters");
    }
    return {result.estimate.slope_nm_per_mw, result.estimate.offset_nm};
}

}  // namespace cqed
