#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "cqed/config.hpp"
#include "cqed/csv.hpp"
#include "cqed/error.hpp"
#include "cqed/fitting.hpp"
#include "cqed/pipeline.hpp"
#include "cqed/render.hpp"
#include "cqed/selftest.hpp"

using namespace cqed;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("cqed_cli_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CQEDCTL_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) { return read_text_file(path); }

nlohmann::json scenario_json(const std::string& name) { return nlohmann::json::parse(scenario_text(name)); }

const FilterResult& filter_at(const DynamicRun& run, double lambda_nm) {
    for (const auto& f : run.filters) {
        if (std::abs(f.curve.center_nm - lambda_nm) < 1e-9) return f;
    }
    throw std::runtime_error("no filter at requested wavelength");
}

}  // namespace

TEST_CASE("config errors name the offending key", "[cli][config]") {
    auto doc = scenario_json("fig3-burst");
    doc["system"]["kapa_t"] = 1.0;
    CHECK_THROWS_WITH(parse_config_text(doc.dump(), "x.json"),
                      ContainsSubstring("x.json") && ContainsSubstring("system.kapa_t") && ContainsSubstring("unknown key"));

    doc = scenario_json("fig3-burst");
    doc["system"]["kappa_t"] = -1.0;
    CHECK_THROWS_WITH(parse_config(doc), ContainsSubstring("system.kappa_t"));

    doc = scenario_json("fig3-burst");
    doc["tuning"]["pulses"][0]["tau_fc_ps"] = "long";
    CHECK_THROWS_WITH(parse_config(doc), ContainsSubstring("tau_fc_ps") && ContainsSubstring("number"));

    doc = scenario_json("fig3-burst");
    doc.erase("schema");
    CHECK_THROWS_WITH(parse_config(doc), ContainsSubstring("schema"));
    doc["schema"] = "cqed-config/2";
    CHECK_THROWS_WITH(parse_config(doc), ContainsSubstring("unsupported schema"));

    doc = scenario_json("fig3-burst");
    doc["spectra"]["filters_nm"] = {1600.0};
    CHECK_THROWS_WITH(parse_config(doc), ContainsSubstring("filters_nm[0]"));

    CHECK_THROWS_AS(parse_config_text("{ \"schema\": ", "broken.json"), ParseError);
    CHECK_THROWS_AS(load_config("/nonexistent/cfg.json"), IoError);
    CHECK_THROWS_AS(shipped_scenario("fig9"), InvalidInput);
}

TEST_CASE("shipped scenarios parse and match the config directory", "[cli][config]") {
    const auto names = scenario_names();
    CHECK(names == std::vector<std::string>{"fig2-sweep", "fig3-burst", "fig3-dip", "fig4-delay"});
    for (const auto& n : names) {
        const RunConfig cfg = shipped_scenario(n);
        CHECK(cfg.name == n);
        CHECK(cfg.hash != 0);
        const RunConfig disk = load_config(std::string(CQED_SOURCE_DIR) + "/configs/" + n + ".json");
        CHECK(disk.hash == cfg.hash);
    }
    const RunConfig d = shipped_scenario("fig4-delay");
    CHECK(d.control_delays_ps == std::vector<double>{1500.0, 2000.0, 2500.0});
    CHECK(shipped_scenario("fig3-dip").tuning.static_detuning_nm == 0.6);
    CHECK(shipped_scenario("fig3-burst").tuning.static_detuning_nm == 0.0);
}

TEST_CASE("heatmap and line rendering", "[cli][render]") {
    PLMap map;
    map.lambda_nm = {1551.0, 1552.0, 1553.0};
    map.t_ps = {0.0, 1.0};
    map.intensity.resize(2, 3);
    map.intensity << 0.0, 1.0, 0.5, 0.25, 2.0, 0.0;
    const std::string a = render_heatmap_ppm(map), b = render_heatmap_ppm(map);
    CHECK(a == b);
    CHECK(a.rfind("P6\n3 2\n255\n", 0) == 0);
    CHECK(a.size() == std::string("P6\n3 2\n255\n").size() + 3 * 6);
    CHECK(render_heatmap_svg(map) == render_heatmap_svg(map));
    CHECK_THAT(render_heatmap_svg(map), ContainsSubstring("wavelength [nm]") && ContainsSubstring("time [ps]"));

    const Eigen::MatrixXd n = normalized_intensity(map, {});
    CHECK(n.maxCoeff() == 1.0);
    CHECK(n.minCoeff() == 0.0);

    double prev = -1.0;
    for (int i = 0; i <= 100; ++i) {
        const auto c = hot_colormap(i / 100.0);
        const double lum = 0.2126 * c[0] + 0.7152 * c[1] + 0.0722 * c[2];
        CHECK(lum >= prev);
        prev = lum;
    }

    PLMap empty;
    CHECK_THROWS_AS(normalized_intensity(empty, {}), InvalidInput);
    PLMap dark = map;
    dark.intensity.setZero();
    CHECK_THROWS_AS(normalized_intensity(dark, {}), InvalidInput);

    const Panel p{"time [ps]", "intensity [arb]", {{"a", {0.0, 1.0, 2.0}, {1.0, 3.0, 2.0}}}};
    const std::string svg = render_lines_svg({p});
    CHECK(svg == render_lines_svg({p}));
    CHECK_THAT(svg, ContainsSubstring("<svg") && ContainsSubstring("time [ps]"));
}

TEST_CASE("selftest suite and its negative control", "[cli][selftest]") {
    const auto checks = run_selftest();
    CHECK(checks.size() >= 10);
    for (const auto& c : checks) {
        INFO(c.name << ": " << c.detail);
        CHECK(c.passed);
    }
    CHECK_THAT(format_selftest(checks), ContainsSubstring("trace"));

    DebugHooks hooks;
    hooks.flip_cavity_anticommutator = true;
    bool trace_failed = false;
    for (const auto& c : run_selftest(hooks)) {
        if (c.name.find("trace") != std::string::npos && !c.passed) trace_failed = true;
    }
    CHECK(trace_failed);
}

TEST_CASE("command-line exit codes and outputs", "[cli][process]") {
    TempDir tmp;
    CHECK(run_cli("selftest") == 0);
    CHECK(run_cli("selftest --inject-fault kappa-sign") == 2);
    CHECK(run_cli("") != 0);
    CHECK(run_cli("dynamic --out " + tmp / "x") == 1);  // no scenario
    CHECK(run_cli("dynamic --scenario nope --out " + tmp / "x") == 1);

    write_text_file(tmp / "bad.json", "{\"schema\": \"cqed-config/1\", \"sytem\": {}}");
    CHECK(run_cli("static-sweep --config " + tmp / "bad.json" + " --out " + tmp / "x") == 1);

    write_text_file(tmp / "three.csv", "control,lambda1,lambda2\n0,1552,1553\n1,1552,1553\n2,1552,1553\n");
    CHECK(run_cli("fit --data " + tmp / "three.csv" + " --out " + tmp / "x") == 1);

    write_text_file(tmp / "empty.csv", "t[ps],S@1552nm[arb],S@1553nm[arb]\n");
    CHECK(run_cli("render --input " + tmp / "empty.csv" + " --out " + tmp / "r0") == 1);
    CHECK_FALSE(fs::exists(tmp / "r0/empty.ppm"));

    write_text_file(tmp / "badrow.csv", "t[ps],y[arb]\n0,1\n1,oops\n");
    CHECK(run_cli("render --input " + tmp / "badrow.csv" + " --out " + tmp / "r0") == 1);

    write_text_file(tmp / "m.csv", "t[ps],S@1552nm[arb],S@1553nm[arb]\n0,1,2\n1,3,0.5\n");
    REQUIRE(run_cli("render --input " + tmp / "m.csv" + " --out " + tmp / "r1") == 0);
    REQUIRE(run_cli("render --input " + tmp / "m.csv" + " --out " + tmp / "r2") == 0);
    for (const char* f : {"m.ppm", "m.svg"}) {
        CHECK(slurp(tmp / (std::string("r1/") + f)) == slurp(tmp / (std::string("r2/") + f)));
    }
    CHECK(fs::exists(tmp / "r1/manifest.json"));

    REQUIRE(run_cli("static-sweep --scenario fig2-sweep --render off --out " + tmp / "s") == 0);
    const CsvTable sweep = read_csv(tmp / "s/sweep.csv");
    CHECK(sweep.rows.size() == 61);
    for (const auto& h : sweep.header) CHECK(h.find('[') != std::string::npos);  // every column has a unit
}

TEST_CASE("static sweep round-trips through the fitter", "[cli][oracle]") {
    const RunConfig cfg = shipped_scenario("fig2-sweep");
    const auto rows = run_static_sweep(cfg);
    std::istringstream in(sweep_csv(rows, cfg.detuning_nm->values()));
    const AnticrossingData data = parse_anticrossing_csv(in, "sweep.csv", ControlKind::Detuning);
    CHECK(data.has_q());
    CHECK(data.has_tau());
    const FitResult r = fit(data, cfg.fit.init, cfg.fit.bounds, cfg.fit.options);
    CHECK(r.converged);
    CHECK_THAT(r.estimate.eta, WithinRel(cfg.system.eta, 1e-3));
    CHECK_THAT(r.estimate.kappa_t, WithinRel(cfg.system.target.kappa, 1e-3));
    CHECK_THAT(r.estimate.kappa_fp, WithinRel(cfg.system.fp.kappa, 1e-3));
    CHECK_THAT(r.estimate.lambda_t, WithinRel(cfg.lambda_t_nm(), 1e-3));
    CHECK_THAT(r.estimate.g, WithinRel(cfg.system.emitter.g, 1e-3));
    CHECK_THAT(r.estimate.gamma_leaky, WithinRel(cfg.system.emitter.gamma_leaky, 1e-3));
}

TEST_CASE("uncoupled sweep branches cross linearly", "[cli]") {
    auto doc = scenario_json("fig2-sweep");
    doc["system"]["eta"] = 0.0;
    const RunConfig cfg = parse_config(doc);
    const auto rows = run_static_sweep(cfg);
    const auto det = cfg.detuning_nm->values();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double lo = std::min(rows[i].lambda1, rows[i].lambda2), hi = std::max(rows[i].lambda1, rows[i].lambda2);
        const double fp = std::abs(lo - 1552.0) < 1e-9 ? hi : lo;
        CHECK_THAT(fp - 1552.0, WithinAbs(det[i], 2e-3 * std::abs(det[i]) + 1e-9));
    }
}

TEST_CASE("minimum sweep splitting is 0.4 nm", "[cli][published]") {
    const RunConfig cfg = shipped_scenario("fig2-sweep");
    const auto rows = run_static_sweep(cfg);
    double split = 1e9;
    for (const auto& r : rows) split = std::min(split, std::abs(r.lambda1 - r.lambda2));
    CHECK_THAT(split, WithinAbs(0.4, 0.04));
}

TEST_CASE("burst scenario yields a burst with a bright transient", "[cli][published][dynamic]") {
    const RunConfig cfg = shipped_scenario("fig3-burst");
    const DynamicRun run = simulate(cfg);
    const FilterResult& f = filter_at(run, 1552.2);
    REQUIRE(f.metrics);
    CHECK(f.metrics->kind == FeatureKind::Burst);

    // the brightest map row sits after the control pulse and outshines the pre-pulse rows
    Eigen::Index peak_row = 0, peak_col = 0;
    run.map.intensity.maxCoeff(&peak_row, &peak_col);
    CHECK(run.map.t_ps[static_cast<std::size_t>(peak_row)] > 0.0);
    double before = 0.0;
    for (std::size_t k = 0; k < run.map.t_ps.size(); ++k) {
        if (run.map.t_ps[k] < 0.0) before = std::max(before, run.map.intensity.row(static_cast<Eigen::Index>(k)).maxCoeff());
    }
    CHECK(run.map.intensity(peak_row, peak_col) > 1.5 * before);
}

TEST_CASE("detuned start yields a dip", "[cli][published][dynamic]") {
    const RunConfig cfg = shipped_scenario("fig3-dip");
    const DynamicRun run = simulate(cfg);
    const FilterResult& f = filter_at(run, 1552.0);
    REQUIRE(f.metrics);
    CHECK(f.metrics->kind == FeatureKind::Dip);
}

TEST_CASE("feature times follow the control delay", "[cli][published][dynamic]") {
    const RunConfig cfg = shipped_scenario("fig4-delay");
    for (double d : cfg.control_delays_ps) {
        const DynamicRun run = simulate(cfg, d);
        const FilterResult& f = run.filters.front();
        REQUIRE(f.metrics);
        INFO("delay " << d);
        CHECK(std::abs(f.metrics->extremum_t_ps - d) <= 50.0);
    }
}
