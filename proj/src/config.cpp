#include "cqed/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "cqed/csv.hpp"
#include "cqed/error.hpp"
#include "cqed/units.hpp"
#include "scenario_data.hpp"

namespace cqed {

namespace {

using nlohmann::json;

enum class Check { Finite, Positive, NonNegative };

// Object reader that remembers which keys were consumed so leftovers can be
// reported as unknown.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ParseError("config: " + where() + " must be an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw ParseError("config: " + at(key) + ": " + msg);
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json* raw(const std::string& key) {
        used_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    double num(const std::string& key, double def, Check check = Check::Finite) {
        const json* v = raw(key);
        const double x = v ? as_number(*v, at(key)) : def;
        check_value(key, x, check);
        return x;
    }

    double num_required(const std::string& key, Check check = Check::Finite) {
        if (!has(key)) fail(key, "required key is missing");
        return num(key, 0.0, check);
    }

    bool flag(const std::string& key, bool def) {
        const json* v = raw(key);
        if (!v) return def;
        if (!v->is_boolean()) fail(key, "expected true or false");
        return v->get<bool>();
    }

    int integer(const std::string& key, int def, int min_value) {
        const json* v = raw(key);
        if (!v) return def;
        if (!v->is_number_integer()) fail(key, "expected an integer");
        const auto x = v->get<long long>();
        if (x < min_value || x > 1'000'000'000) fail(key, "must be >= " + std::to_string(min_value));
        return static_cast<int>(x);
    }

    std::string str(const std::string& key, const std::string& def) {
        const json* v = raw(key);
        if (!v) return def;
        if (!v->is_string()) fail(key, "expected a string");
        return v->get<std::string>();
    }

    std::vector<double> numbers(const std::string& key, Check check = Check::Finite) {
        const json* v = raw(key);
        std::vector<double> out;
        if (!v) return out;
        if (!v->is_array()) fail(key, "expected an array of numbers");
        for (std::size_t i = 0; i < v->size(); ++i) {
            const std::string p = at(key) + "[" + std::to_string(i) + "]";
            out.push_back(as_number((*v)[i], p));
            check_value(key + "[" + std::to_string(i) + "]", out.back(), check);
        }
        return out;
    }

    std::optional<Node> child(const std::string& key) {
        const json* v = raw(key);
        if (!v) return std::nullopt;
        return Node(*v, at(key));
    }

    /// Elements of an array of objects.
    std::vector<Node> children(const std::string& key) {
        const json* v = raw(key);
        std::vector<Node> out;
        if (!v) return out;
        if (!v->is_array()) fail(key, "expected an array");
        for (std::size_t i = 0; i < v->size(); ++i) out.emplace_back((*v)[i], at(key) + "[" + std::to_string(i) + "]");
        return out;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!used_.count(it.key())) throw ParseError("config: unknown key '" + at(it.key()) + "'");
        }
    }

    const std::string& path() const { return path_; }

private:
    std::string where() const { return path_.empty() ? "document root" : path_; }

    static double as_number(const json& v, const std::string& path) {
        if (!v.is_number()) throw ParseError("config: " + path + ": expected a number");
        return v.get<double>();
    }

    void check_value(const std::string& key, double x, Check check) const {
        if (!std::isfinite(x)) fail(key, "must be finite");
        if (check == Check::Positive && !(x > 0.0)) fail(key, "must be > 0");
        if (check == Check::NonNegative && !(x >= 0.0)) fail(key, "must be >= 0");
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

GridSpec read_grid(Node n) {
    GridSpec g;
    g.start = n.num_required("start");
    g.stop = n.num_required("stop");
    g.step = n.num_required("step", Check::Positive);
    if (g.stop < g.start) n.fail("stop", "must be >= start");
    if ((g.stop - g.start) / g.step > 5e6) n.fail("step", "grid would exceed 5e6 points");
    n.finish();
    return g;
}

// Re-runs a domain validate() and attaches the key path to its message.
template <class F>
void checked(const std::string& path, F&& f) {
    try {
        f();
    } catch (const InvalidInput& e) {
        throw ParseError("config: " + path + ": " + e.what());
    }
}

void canonical_dump(const json& j, std::string& out) {
    // nlohmann objects iterate in key order; numbers use round-trip formatting.
    out += j.dump();
}

}  // namespace

std::vector<double> GridSpec::values() const {
    const auto n = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
    std::vector<double> v(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = start + static_cast<double>(i) * step;
    return v;
}

double RunConfig::lambda_t_nm() const { return omega_to_wl(system.target.omega); }

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

RunConfig parse_config(const json& doc) {
    Node root(doc, "");
    RunConfig cfg;
    cfg.source = doc;
    std::string canon;
    canonical_dump(doc, canon);
    cfg.hash = fnv1a64(canon);

    const json* schema = root.raw("schema");
    if (!schema) root.fail("schema", "required key is missing (expected \"" + std::string(kConfigSchema) + "\")");
    if (!schema->is_string() || schema->get<std::string>() != kConfigSchema) {
        root.fail("schema", "unsupported schema, expected \"" + std::string(kConfigSchema) + "\"");
    }
    cfg.name = root.str("name", "custom");

    // system
    double lambda_t = 1552.0;
    {
        const SystemParams def = default_system();
        auto n = root.child("system");
        Node empty(json::object(), "system");
        Node& s = n ? *n : empty;
        lambda_t = s.num("lambda_t_nm", 1552.0, Check::Positive);
        const double kappa_t = s.num("kappa_t", def.target.kappa, Check::Positive);
        const double kappa_fp = s.num("kappa_fp", def.fp.kappa, Check::Positive);
        cfg.system.eta = s.num("eta", def.eta, Check::NonNegative);
        cfg.system.emitter.g = s.num("g", def.emitter.g, Check::NonNegative);
        cfg.system.emitter.gamma_leaky = s.num("gamma_leaky", def.emitter.gamma_leaky, Check::NonNegative);
        cfg.system.emitter.dephasing = s.num("dephasing", 0.0, Check::NonNegative);
        const double emitter_offset = s.num("emitter_offset_nm", 0.0);
        cfg.system.target = BareMode::from_wavelength(lambda_t, kappa_t);
        cfg.system.fp = BareMode{cfg.system.target.omega, kappa_fp};
        if (!(lambda_t + emitter_offset > 0.0)) s.fail("emitter_offset_nm", "emitter wavelength must be > 0");
        cfg.system.emitter.omega0 = wl_to_omega(lambda_t + emitter_offset);
        s.finish();
    }

    if (auto p = root.child("pump")) {
        cfg.system.pump.cw_rate = p->num("cw_rate", 0.0, Check::NonNegative);
        cfg.system.pump.cavity_rate = p->num("cavity_rate", 0.0, Check::NonNegative);
        for (Node& e : p->children("pulses")) {
            PumpPulse pulse;
            pulse.time_ps = e.num_required("time_ps");
            pulse.area = e.num_required("area", Check::NonNegative);
            pulse.width_ps = e.num("width_ps", 6.0, Check::NonNegative);
            e.finish();
            cfg.system.pump.pulses.push_back(pulse);
        }
        p->finish();
    }

    if (auto t = root.child("tuning")) {
        cfg.tuning.static_detuning_nm = t->num("static_detuning_nm", 0.0);
        if (auto th = t->child("thermo")) {
            ThermoOpticModel m;
            m.coeff_nm_per_mw = th->num_required("coeff_nm_per_mw", Check::NonNegative);
            m.power_mw = th->num_required("power_mw", Check::NonNegative);
            th->finish();
            cfg.tuning.thermo = m;
        }
        for (Node& e : t->children("pulses")) {
            FreeCarrierPulse pulse;
            pulse.t0_ps = e.num_required("t0_ps");
            pulse.delta_lambda_max_nm = e.num_required("delta_lambda_max_nm", Check::NonNegative);
            pulse.tau_fc_ps = e.num("tau_fc_ps", 150.0, Check::Positive);
            pulse.tau_rise_ps = e.num("tau_rise_ps", 0.0, Check::NonNegative);
            e.finish();
            cfg.tuning.pulses.push_back(pulse);
        }
        cfg.tuning.fc_kappa_per_nm = t->num("fc_kappa_per_nm", 0.0, Check::NonNegative);
        t->finish();
    }
    checked("tuning", [&] { cfg.tuning.validate(); });
    {
        // FP mode before the first control pulse
        const double before = cfg.tuning.pulses.empty() ? 0.0 : cfg.tuning.pulses.front().t0_ps - 1.0;
        const BareMode fp0 = fp_mode_at(cfg.tuning, before, lambda_t, cfg.system.fp.kappa);
        if (!(fp0.omega > 0.0)) throw ParseError("config: tuning: FP wavelength must stay positive");
        cfg.system.fp = fp0;
    }
    checked("system", [&] { cfg.system.validate(); });

    if (auto s = root.child("solver")) {
        cfg.solver.space.n_max = s->integer("n_max", 2, 1);
        cfg.solver.rtol = s->num("rtol", 1e-8, Check::Positive);
        cfg.solver.atol = s->num("atol", 1e-12, Check::Positive);
        cfg.solver.fixed_step_ps = s->num("fixed_step_ps", 0.0, Check::NonNegative);
        cfg.solver.h_max_ps = s->num("h_max_ps", 50.0, Check::Positive);
        cfg.solver.check_positivity = s->flag("check_positivity", true);
        cfg.solver.parallel_kernel = s->flag("parallel_kernel", true);
        cfg.convergence_check = s->flag("convergence_check", false);
        s->finish();
    }

    if (auto g = root.child("grids")) {
        if (auto d = g->child("detuning_nm")) cfg.detuning_nm = read_grid(std::move(*d));
        if (auto d = g->child("time_ps")) cfg.time_ps = read_grid(std::move(*d));
        if (auto d = g->child("wavelength_nm")) {
            cfg.wavelength_nm = read_grid(std::move(*d));
            if (!(cfg.wavelength_nm->start > 0.0)) g->fail("wavelength_nm.start", "must be > 0");
        }
        g->finish();
    }

    if (auto s = root.child("spectra")) {
        cfg.spectra.collection_exponent = s->num("collection_exponent", 1.0, Check::NonNegative);
        cfg.spectra.filters_nm = s->numbers("filters_nm", Check::Positive);
        cfg.spectra.filter_fwhm_nm = s->num("filter_fwhm_nm", 0.5, Check::Positive);
        if (s->has("baseline_window_ps")) {
            const auto w = s->numbers("baseline_window_ps");
            if (w.size() != 2 || !(w[1] > w[0])) s->fail("baseline_window_ps", "expected [t_a, t_b] with t_b > t_a");
            cfg.spectra.baseline_window_ps = std::make_pair(w[0], w[1]);
        }
        cfg.spectra.baseline_length_ps = s->num("baseline_length_ps", 500.0, Check::Positive);
        cfg.spectra.irf_sigma_ps = s->num("irf_sigma_ps", 0.0, Check::NonNegative);
        cfg.spectra.normalize_to_reference = s->flag("normalize_to_reference", false);
        s->finish();
    }
    if (cfg.wavelength_nm) {
        for (std::size_t i = 0; i < cfg.spectra.filters_nm.size(); ++i) {
            const double f = cfg.spectra.filters_nm[i];
            if (f < cfg.wavelength_nm->start || f > cfg.wavelength_nm->stop) {
                throw ParseError("config: spectra.filters_nm[" + std::to_string(i) + "]: outside grids.wavelength_nm");
            }
        }
    }

    if (auto s = root.child("scan")) {
        cfg.control_delays_ps = s->numbers("control_delays_ps");
        if (!cfg.control_delays_ps.empty() && cfg.tuning.pulses.empty()) {
            s->fail("control_delays_ps", "a delay scan needs at least one tuning pulse");
        }
        s->finish();
    }

    if (auto c = root.child("calibration")) {
        CalibrationConfig cal;
        cal.target_fwhm_ps = c->num("target_fwhm_ps", 232.0, Check::Positive);
        cal.filter_nm = c->num_required("filter_nm", Check::Positive);
        cal.tau_min_ps = c->num("tau_min_ps", 20.0, Check::Positive);
        cal.tau_max_ps = c->num("tau_max_ps", 3000.0, Check::Positive);
        cal.tolerance_ps = c->num("tolerance_ps", 0.5, Check::Positive);
        if (!(cal.tau_max_ps > cal.tau_min_ps)) c->fail("tau_max_ps", "must exceed tau_min_ps");
        if (cfg.tuning.pulses.empty()) c->fail("filter_nm", "calibration needs at least one tuning pulse");
        if (cfg.wavelength_nm && (cal.filter_nm < cfg.wavelength_nm->start || cal.filter_nm > cfg.wavelength_nm->stop)) {
            c->fail("filter_nm", "outside grids.wavelength_nm");
        }
        c->finish();
        cfg.calibration = cal;
    }

    {
        FitConfig& f = cfg.fit;
        f.init = FitParameters{cfg.system.eta,          cfg.system.target.kappa,          cfg.system.fp.kappa,
                               lambda_t,                0.0,
                               0.0,                     cfg.system.emitter.g,             cfg.system.emitter.gamma_leaky};
        if (auto n = root.child("fit")) {
            const std::string control = n->str("control", "detuning");
            if (control == "detuning") {
                f.control = ControlKind::Detuning;
            } else if (control == "power") {
                f.control = ControlKind::Power;
            } else {
                n->fail("control", "expected \"detuning\" or \"power\"");
            }
            if (auto i = n->child("init")) {
                f.init.eta = i->num("eta", f.init.eta, Check::Positive);
                f.init.kappa_t = i->num("kappa_t", f.init.kappa_t, Check::Positive);
                f.init.kappa_fp = i->num("kappa_fp", f.init.kappa_fp, Check::Positive);
                f.init.lambda_t = i->num("lambda_t_nm", f.init.lambda_t, Check::Positive);
                f.init.slope_nm_per_mw = i->num("slope_nm_per_mw", 0.0, Check::NonNegative);
                f.init.offset_nm = i->num("offset_nm", 0.0);
                f.init.g = i->num("g", f.init.g, Check::Positive);
                f.init.gamma_leaky = i->num("gamma_leaky", f.init.gamma_leaky, Check::Positive);
                i->finish();
            }
            if (auto b = n->child("bounds")) {
                f.bounds.rate_min = b->num("rate_min", f.bounds.rate_min, Check::Positive);
                f.bounds.rate_max = b->num("rate_max", f.bounds.rate_max, Check::Positive);
                f.bounds.gamma_leaky_min = b->num("gamma_leaky_min", f.bounds.gamma_leaky_min, Check::Positive);
                f.bounds.gamma_leaky_max = b->num("gamma_leaky_max", f.bounds.gamma_leaky_max, Check::Positive);
                if (b->has("lambda_t_min_nm")) f.bounds.lambda_t_min = b->num("lambda_t_min_nm", 0.0, Check::Positive);
                if (b->has("lambda_t_max_nm")) f.bounds.lambda_t_max = b->num("lambda_t_max_nm", 0.0, Check::Positive);
                f.bounds.slope_min = b->num("slope_min", f.bounds.slope_min, Check::NonNegative);
                f.bounds.slope_max = b->num("slope_max", f.bounds.slope_max, Check::NonNegative);
                f.bounds.offset_min = b->num("offset_min", f.bounds.offset_min);
                f.bounds.offset_max = b->num("offset_max", f.bounds.offset_max);
                b->finish();
            }
            f.options.starts = n->integer("starts", 1, 1);
            f.options.default_lambda_err_nm = n->num("default_lambda_err_nm", 0.05, Check::Positive);
            f.options.default_q_rel_err = n->num("default_q_rel_err", 0.10, Check::Positive);
            f.options.default_tau_rel_err = n->num("default_tau_rel_err", 0.10, Check::Positive);
            f.options.simplex.max_evals = n->integer("max_evals", 40'000, 10);
            n->finish();
        }
        f.options.fixed_emitter = cfg.system.emitter;
    }

    if (auto r = root.child("render")) {
        cfg.render.enabled = r->flag("enabled", true);
        cfg.render.log_scale = r->flag("log_scale", false);
        cfg.render.log_decades = r->num("log_decades", 3.0, Check::Positive);
        cfg.render.width = r->integer("width", 900, 200);
        cfg.render.height = r->integer("height", 600, 200);
        r->finish();
    }

    root.finish();
    return cfg;
}

RunConfig parse_config_text(const std::string& text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(source + ": " + e.what());
    }
    try {
        return parse_config(doc);
    } catch (const ParseError& e) {
        throw ParseError(source + ": " + e.what());
    }
}

RunConfig load_config(const std::string& path) { return parse_config_text(read_text_file(path), path); }

std::vector<std::string> scenario_names() {
    std::vector<std::string> out;
    for (const auto& s : detail::shipped_scenarios()) out.push_back(s.first);
    return out;
}

const std::string& scenario_text(const std::string& name) {
    for (const auto& s : detail::shipped_scenarios()) {
        if (s.first == name) return s.second;
    }
    std::string known;
    for (const auto& s : detail::shipped_scenarios()) known += (known.empty() ? "" : ", ") + s.first;
    throw InvalidInput("unknown scenario '" + name + "' (shipped: " + known + ")");
}

RunConfig shipped_scenario(const std::string& name) { return parse_config_text(scenario_text(name), "scenario " + name); }

}  // namespace cqed
