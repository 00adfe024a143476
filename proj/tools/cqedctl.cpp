#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cqed/config.hpp"
#include "cqed/csv.hpp"
#include "cqed/error.hpp"
#include "cqed/fitting.hpp"
#include "cqed/parallel.hpp"
#include "cqed/pipeline.hpp"
#include "cqed/render.hpp"
#include "cqed/selftest.hpp"

namespace {

using namespace cqed;

enum ExitCode { kOk = 0, kError = 1, kNotConverged = 2 };

struct Common {
    std::string config;
    std::string scenario;
    std::string out = "out";
    int threads = 0;
    std::string render;  // "", "on" or "off"
};

void add_common(CLI::App* sub, Common& c) {
    auto* cfg = sub->add_option("--config", c.config, "config JSON");
    auto* scn = sub->add_option("--scenario", c.scenario, "shipped scenario name");
    cfg->excludes(scn);
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
    sub->add_option("--threads", c.threads, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);
    sub->add_option("--render", c.render, "write SVG/PPM plots")->check(CLI::IsMember({"on", "off"}));
}

RunConfig resolve_config(const Common& c, const char* fallback_scenario) {
    if (!c.config.empty()) return load_config(c.config);
    if (!c.scenario.empty()) return shipped_scenario(c.scenario);
    if (fallback_scenario) return shipped_scenario(fallback_scenario);
    throw InvalidInput("give --config PATH or --scenario NAME");
}

bool render_enabled(const Common& c, const RunConfig& cfg) {
    if (c.render == "on") return true;
    if (c.render == "off") return false;
    return cfg.render.enabled;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const std::vector<std::string>& files, const std::string& dir) {
    for (const auto& f : files) std::cout << (std::filesystem::path(dir) / f).string() << "\n";
}

PlotOptions plot_options(const RunConfig& cfg, std::string title) {
    return {cfg.render.width, cfg.render.height, std::move(title)};
}

int cmd_static_sweep(const Common& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig cfg = resolve_config(c, "fig2-sweep");
    set_threads(c.threads);
    const auto rows = run_static_sweep(cfg);
    const auto det = cfg.detuning_nm->values();
    OutputSet out;
    out.add("sweep.csv", sweep_csv(rows, det));
    if (render_enabled(c, cfg)) {
        Panel wl{"detuning [nm]", "wavelength [nm]", {{"mode 1", det, {}}, {"mode 2", det, {}}}};
        Panel q{"detuning [nm]", "Q [1]", {{"mode 1", det, {}}, {"mode 2", det, {}}}};
        for (const auto& r : rows) {
            wl.series[0].y.push_back(r.lambda1);
            wl.series[1].y.push_back(r.lambda2);
            q.series[0].y.push_back(r.q1);
            q.series[1].y.push_back(r.q2);
        }
        out.add("sweep.svg", render_lines_svg({wl, q}, plot_options(cfg, cfg.name + ": coupled modes")));
    }
    report(out.write(c.out, cfg, "static-sweep", seconds_since(t0)), c.out);
    return kOk;
}

std::string run_suffix(const DynamicRun& run) {
    return run.delay_ps ? "_d" + format_number(*run.delay_ps) + "ps" : "";
}

int cmd_dynamic(const Common& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig cfg = resolve_config(c, nullptr);
    set_threads(c.threads);
    DynamicResult result;
    try {
        result = run_dynamic(cfg);
    } catch (const NumericalFailure& e) {
        throw NumericalFailure("scenario '" + cfg.name + "': " + e.what());
    } catch (const ConvergenceFailure& e) {
        throw ConvergenceFailure("scenario '" + cfg.name + "': " + e.what());
    }
    OutputSet out;
    out.add("metrics.json", metrics_json(cfg, result).dump(2) + "\n");
    const bool render = render_enabled(c, cfg);
    for (const auto& run : result.runs) {
        const std::string sfx = run_suffix(run);
        out.add("map" + sfx + ".csv", map_csv(run.map));
        out.add("curves" + sfx + ".csv", curves_csv(run));
        out.add("modes" + sfx + ".csv", modes_csv(run));
        if (!render) continue;
        HeatmapOptions h;
        h.log_scale = cfg.render.log_scale;
        h.log_decades = cfg.render.log_decades;
        h.plot = plot_options(cfg, cfg.name + sfx + ": emission map");
        out.add("map" + sfx + ".ppm", render_heatmap_ppm(run.map, h));
        out.add("map" + sfx + ".svg", render_heatmap_svg(run.map, h));
        Panel raw{"time [ps]", "filtered intensity [arb]", {}};
        Panel ratio{"time [ps]", "intensity / reference [1]", {}};
        for (const auto& f : run.filters) {
            raw.series.push_back({format_number(f.curve.center_nm) + " nm", run.trajectory.t_ps, f.curve.intensity});
            if (f.normalized) {
                ratio.series.push_back({format_number(f.curve.center_nm) + " nm", run.trajectory.t_ps, f.normalized->intensity});
            }
        }
        std::vector<Panel> panels;
        if (!raw.series.empty()) panels.push_back(raw);
        if (!ratio.series.empty()) panels.push_back(ratio);
        if (!panels.empty()) out.add("curves" + sfx + ".svg", render_lines_svg(panels, plot_options(cfg, cfg.name + sfx)));
    }
    report(out.write(c.out, cfg, "dynamic", seconds_since(t0)), c.out);
    return kOk;
}

int cmd_fit(const Common& c, const std::string& data_path, std::uint64_t seed, bool seed_given) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = resolve_config(c, "fig2-sweep");
    set_threads(c.threads);
    if (seed_given) cfg.fit.options.seed = seed;
    const AnticrossingData data = load_anticrossing_csv(data_path, cfg.fit.control);
    const FitResult r = fit(data, cfg.fit.init, cfg.fit.bounds, cfg.fit.options);
    OutputSet out;
    nlohmann::json j = fit_json(r, data);
    j["data"] = std::filesystem::path(data_path).filename().string();
    if (data.control == ControlKind::Power) {
        const PowerCalibration cal = calibrate_power(data, r);
        j["calibration"] = {{"slope_nm_per_mw", cal.slope_nm_per_mw}, {"offset_nm", cal.offset_nm}};
    }
    out.add("fit.json", j.dump(2) + "\n");
    out.add("fit_residuals.csv", fit_residuals_csv(r, data));
    if (render_enabled(c, cfg)) {
        Panel p{data.control == ControlKind::Power ? "power [mW]" : "detuning [nm]", "wavelength [nm]", {}};
        Series d1{"data 1", {}, {}}, d2{"data 2", {}, {}}, m1{"model 1", {}, {}}, m2{"model 2", {}, {}};
        for (const auto& row : data.rows) {
            const AnticrossingRow m = predict_row(r.estimate, data.control, row.control, cfg.fit.options.fixed_emitter);
            d1.x.push_back(row.control);
            d1.y.push_back(row.lambda1);
            d2.x.push_back(row.control);
            d2.y.push_back(row.lambda2);
            m1.x.push_back(row.control);
            m1.y.push_back(m.lambda1);
            m2.x.push_back(row.control);
            m2.y.push_back(m.lambda2);
        }
        p.series = {d1, d2, m1, m2};
        out.add("fit.svg", render_lines_svg({p}, plot_options(cfg, "anticrossing fit")));
    }
    report(out.write(c.out, cfg, "fit", seconds_since(t0)), c.out);
    if (!r.converged) {
        std::cerr << "fit did not converge after " << r.evaluations << " evaluations\n";
        return kNotConverged;
    }
    return kOk;
}

// Map layout: "t[ps]" followed only by "S@<lambda>nm[arb]" columns.
bool is_map(const CsvTable& t) {
    if (t.header.size() < 3 || t.header[0] != "t[ps]") return false;
    for (std::size_t i = 1; i < t.header.size(); ++i) {
        if (t.header[i].rfind("S@", 0) != 0) return false;
    }
    return true;
}

double map_wavelength(const CsvTable& t, std::size_t c) {
    const std::string name = strip_unit(t.header[c]);  // S@1552.5nm
    const std::string num = name.substr(2, name.size() >= 4 ? name.size() - 4 : 0);
    try {
        std::size_t used = 0;
        const double v = std::stod(num, &used);
        if (used != num.size() || name.substr(name.size() - 2) != "nm") throw std::invalid_argument(num);
        return v;
    } catch (const std::exception&) {
        throw ParseError(t.source + ": line 1, column " + std::to_string(c + 1) + ": bad map column '" + t.header[c] + "'");
    }
}

int cmd_render(const Common& c, const std::string& input, bool log_scale) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg = (!c.config.empty() || !c.scenario.empty()) ? resolve_config(c, nullptr)
                                                               : parse_config(nlohmann::json{{"schema", kConfigSchema}});
    cfg.name = "render";
    if (log_scale) cfg.render.log_scale = true;
    const CsvTable t = read_csv(input);
    if (t.rows.empty()) throw ParseError(input + ": empty data region (no data rows)");
    const std::string stem = std::filesystem::path(input).stem().string();
    OutputSet out;
    if (is_map(t)) {
        PLMap map;
        for (std::size_t j = 1; j < t.header.size(); ++j) map.lambda_nm.push_back(map_wavelength(t, j));
        map.intensity.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size() - 1));
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            map.t_ps.push_back(t.number(r, 0));
            for (std::size_t j = 1; j < t.header.size(); ++j) {
                map.intensity(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j - 1)) = t.number(r, j);
            }
        }
        try {
            map.validate();
        } catch (const InvalidInput& e) {
            throw ParseError(input + ": " + e.what());
        }
        HeatmapOptions h;
        h.log_scale = cfg.render.log_scale;
        h.log_decades = cfg.render.log_decades;
        h.plot = plot_options(cfg, stem);
        out.add(stem + ".ppm", render_heatmap_ppm(map, h));
        out.add(stem + ".svg", render_heatmap_svg(map, h));
    } else {
        if (t.header.size() < 2) throw ParseError(input + ": line 1: need an x column and at least one y column");
        Panel p{t.header[0], "", {}};
        for (std::size_t j = 1; j < t.header.size(); ++j) {
            Series s{t.header[j], {}, {}};
            for (std::size_t r = 0; r < t.rows.size(); ++r) {
                s.x.push_back(t.number(r, 0));
                s.y.push_back(t.number(r, j));
            }
            p.series.push_back(std::move(s));
        }
        p.y_label = t.header.size() == 2 ? t.header[1] : "value";
        out.add(stem + ".svg", render_lines_svg({p}, plot_options(cfg, stem)));
    }
    report(out.write(c.out, cfg, "render", seconds_since(t0)), c.out);
    return kOk;
}

int cmd_selftest(const std::string& fault) {
    DebugHooks hooks;
    if (fault == "kappa-sign") hooks.flip_cavity_anticommutator = true;
    const auto checks = run_selftest(hooks);
    std::cout << format_selftest(checks);
    for (const auto& ch : checks) {
        if (!ch.passed) return kNotConverged;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coupled-cavity emitter simulator: static sweeps, master-equation dynamics, fits and plots"};
    app.require_subcommand(1);

    Common sweep_c, dyn_c, fit_c, render_c;
    auto* sweep = app.add_subcommand("static-sweep", "coupled-mode wavelengths, Q and decay time versus detuning");
    add_common(sweep, sweep_c);

    auto* dyn = app.add_subcommand("dynamic", "time-resolved emission under free-carrier tuning");
    add_common(dyn, dyn_c);

    auto* fitc = app.add_subcommand("fit", "fit coupled-mode parameters to an anticrossing CSV");
    add_common(fitc, fit_c);
    std::string data_path;
    std::uint64_t seed = 0;
    fitc->add_option("--data", data_path, "anticrossing CSV")->required()->check(CLI::ExistingFile);
    auto* seed_opt = fitc->add_option("--seed", seed, "multi-start lattice selection");

    auto* render = app.add_subcommand("render", "plot a curve or map CSV as SVG (and PPM for maps)");
    add_common(render, render_c);
    std::string input;
    bool log_scale = false;
    render->add_option("--input", input, "CSV written by this tool")->required()->check(CLI::ExistingFile);
    render->add_flag("--log", log_scale, "log-scale heatmap");

    auto* self = app.add_subcommand("selftest", "run the embedded invariant suite");
    std::string fault;
    self->add_option("--inject-fault", fault, "debug hook for the negative control")->check(CLI::IsMember({"kappa-sign"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sweep) return cmd_static_sweep(sweep_c);
        if (*dyn) return cmd_dynamic(dyn_c);
        if (*fitc) return cmd_fit(fit_c, data_path, seed, seed_opt->count() > 0);
        if (*render) return cmd_render(render_c, input, log_scale);
        if (*self) return cmd_selftest(fault);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kError;
    }
    return kError;
}
