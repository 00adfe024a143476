#include "cqed/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "cqed/csv.hpp"
#include "cqed/error.hpp"
#include "cqed/parallel.hpp"
#include "cqed/units.hpp"

namespace cqed {

namespace {

using nlohmann::json;

Trajectory trajectory_for(const RunConfig& cfg, const TuningProfile& prof, const std::vector<double>& t,
                          const SolverOptions& solver) {
    SystemParams sys = cfg.system;
    sys.fp = fp_mode_at(prof, t.front(), cfg.lambda_t_nm(), cfg.system.fp.kappa);
    const DensityMatrix rho0 = (sys.pump.cw_rate > 0.0 || sys.pump.cavity_rate > 0.0)
                                   ? steady_state(sys, sys.fp, solver)
                                   : DensityMatrix::vacuum(solver.space);
    return evolve(sys, prof, rho0, t, solver);
}

std::string wl_tag(double lambda_nm) { return format_number(lambda_nm) + "nm"; }

json metrics_to_json(const FilterResult& f) {
    json j;
    j["filter_nm"] = f.curve.center_nm;
    j["filter_fwhm_nm"] = f.curve.fwhm_nm;
    j["normalized_to_reference"] = f.normalized.has_value();
    if (f.metrics) {
        j["kind"] = std::string(to_string(f.metrics->kind));
        j["depth"] = f.metrics->depth;
        j["fwhm_ps"] = f.metrics->fwhm_ps;
        j["extremum_t_ps"] = f.metrics->extremum_t_ps;
        j["baseline"] = f.metrics->baseline;
    } else {
        j["no_feature"] = f.no_feature;
    }
    return j;
}

double max_relative_difference(const DynamicRun& a, const DynamicRun& b) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.filters.size(); ++k) {
        const auto& x = a.filters[k].curve.intensity;
        const auto& y = b.filters[k].curve.intensity;
        const double scale = *std::max_element(x.begin(), x.end());
        if (!(scale > 0.0)) continue;
        for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]) / scale);
    }
    return worst;
}

}  // namespace

RunConfig with_tau_fc(RunConfig cfg, double tau_fc_ps) {
    if (!(tau_fc_ps > 0.0)) throw InvalidInput("tau_fc must be > 0");
    for (auto& p : cfg.tuning.pulses) p.tau_fc_ps = tau_fc_ps;
    return cfg;
}

DynamicRun simulate(const RunConfig& cfg, std::optional<double> delay_ps) {
    if (!cfg.time_ps || !cfg.wavelength_nm) {
        throw InvalidInput("dynamic run needs grids.time_ps and grids.wavelength_nm");
    }
    TuningProfile prof = cfg.tuning;
    if (delay_ps && !prof.pulses.empty()) {
        const double shift = *delay_ps - prof.pulses.front().t0_ps;
        for (auto& p : prof.pulses) p.t0_ps += shift;
    }
    const std::vector<double> t = cfg.time_ps->values();
    const std::vector<double> lambda = cfg.wavelength_nm->values();

    DynamicRun run;
    run.delay_ps = delay_ps;
    run.trajectory = trajectory_for(cfg, prof, t, cfg.solver);
    run.map = synthesize_map(run.trajectory, lambda, cfg.spectra.collection_exponent);

    std::optional<PLMap> reference;
    if (cfg.spectra.normalize_to_reference) {
        TuningProfile quiet = prof;
        quiet.pulses.clear();
        reference = synthesize_map(trajectory_for(cfg, quiet, t, cfg.solver), lambda, cfg.spectra.collection_exponent);
    }

    const double L = cfg.spectra.baseline_length_ps;
    if (cfg.spectra.baseline_window_ps) {
        run.baseline_window_ps = *cfg.spectra.baseline_window_ps;
    } else {
        const double tc = prof.pulses.empty() ? t.front() + L : prof.pulses.front().t0_ps;
        // stop short of the arrival sample, which already carries the switched modes
        run.baseline_window_ps = {tc - L, tc - 1e-6};
    }

    for (double lc : cfg.spectra.filters_nm) {
        FilterResult fr;
        fr.curve = irf_convolve(apply_filter(run.map, lc, cfg.spectra.filter_fwhm_nm), cfg.spectra.irf_sigma_ps);
        const DecayCurve* measured = &fr.curve;
        if (reference) {
            const DecayCurve ref =
                irf_convolve(apply_filter(*reference, lc, cfg.spectra.filter_fwhm_nm), cfg.spectra.irf_sigma_ps);
            DecayCurve ratio = fr.curve;
            // before any emission the ratio is undefined; call it unmodulated
            for (std::size_t i = 0; i < ratio.intensity.size(); ++i) {
                ratio.intensity[i] = ref.intensity[i] > 0.0 ? fr.curve.intensity[i] / ref.intensity[i] : 1.0;
            }
            fr.normalized = std::move(ratio);
            measured = &*fr.normalized;
        }
        try {
            fr.metrics = burst_metrics(*measured, run.baseline_window_ps.first, run.baseline_window_ps.second);
        } catch (const NoFeature& e) {
            fr.no_feature = e.what();
        }
        run.filters.push_back(std::move(fr));
    }
    return run;
}

double calibrate_tau_fc(const RunConfig& cfg, const CalibrationConfig& cal) {
    RunConfig base = cfg;
    base.spectra.filters_nm = {cal.filter_nm};
    const auto fwhm = [&](double tau) {
        const DynamicRun run = simulate(with_tau_fc(base, tau));
        const FilterResult& f = run.filters.front();
        if (!f.metrics) throw ConvergenceFailure("calibration: no feature at tau_fc = " + format_number(tau) + " ps: " + f.no_feature);
        if (f.metrics->kind != FeatureKind::Burst) {
            throw ConvergenceFailure("calibration: feature at tau_fc = " + format_number(tau) + " ps is a dip, not a burst");
        }
        return f.metrics->fwhm_ps;
    };
    double lo = cal.tau_min_ps, hi = cal.tau_max_ps;
    const double f_lo = fwhm(lo), f_hi = fwhm(hi);
    if (!(f_lo <= cal.target_fwhm_ps && cal.target_fwhm_ps <= f_hi)) {
        std::ostringstream os;
        os << "calibration: target FWHM " << cal.target_fwhm_ps << " ps not bracketed by tau_fc in [" << lo << ", " << hi
           << "] ps (FWHM " << f_lo << " .. " << f_hi << " ps)";
        throw ConvergenceFailure(os.str());
    }
    for (int it = 0; it < 60; ++it) {
        const double mid = std::sqrt(lo * hi);
        const double f = fwhm(mid);
        if (std::abs(f - cal.target_fwhm_ps) <= cal.tolerance_ps || hi / lo - 1.0 < 1e-9) return mid;
        (f < cal.target_fwhm_ps ? lo : hi) = mid;
    }
    throw ConvergenceFailure("calibration: bisection did not reach the FWHM tolerance");
}

DynamicResult run_dynamic(const RunConfig& cfg_in, bool parallel_scan) {
    RunConfig cfg = cfg_in;
    DynamicResult result;
    if (cfg.calibration) {
        const double tau = calibrate_tau_fc(cfg, *cfg.calibration);
        result.tau_fc_calibrated_ps = tau;
        cfg = with_tau_fc(cfg, tau);
    }
    result.tau_fc_ps = cfg.tuning.pulses.empty() ? 0.0 : cfg.tuning.pulses.front().tau_fc_ps;

    if (cfg.control_delays_ps.empty()) {
        result.runs.push_back(simulate(cfg));
    } else {
        result.runs.resize(cfg.control_delays_ps.size());
        parallel_for(
            static_cast<long>(cfg.control_delays_ps.size()),
            [&](long i) {
                const auto k = static_cast<std::size_t>(i);
                result.runs[k] = simulate(cfg, cfg.control_delays_ps[k]);
            },
            parallel_scan);
    }

    if (cfg.convergence_check) {
        RunConfig bigger = cfg;
        bigger.solver.space.n_max += 1;
        const auto delay = cfg.control_delays_ps.empty() ? std::nullopt : std::optional<double>(cfg.control_delays_ps.front());
        result.truncation_delta = max_relative_difference(result.runs.front(), simulate(bigger, delay));
    }
    return result;
}

std::vector<SweepRow> run_static_sweep(const RunConfig& cfg) {
    if (!cfg.detuning_nm) throw InvalidInput("static sweep needs grids.detuning_nm");
    const double lt = cfg.lambda_t_nm();
    std::vector<double> offsets;
    for (double d : cfg.detuning_nm->values()) {
        if (!(lt + d > 0.0)) throw InvalidInput("static sweep: FP wavelength must stay positive");
        offsets.push_back(wl_to_omega(lt + d) - cfg.system.target.omega);
    }
    return anticrossing_sweep(cfg.system, offsets);
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::vector<double>& detuning_nm) {
    if (rows.size() != detuning_nm.size()) throw InvalidInput("sweep_csv: row count mismatch");
    std::string out = "control[nm],lambda1[nm],lambda2[nm],q1[1],q2[1],tau[ns]\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const SweepRow& r = rows[i];
        const bool swap = r.lambda1 > r.lambda2;  // ascending wavelength, Q follows its mode
        out += format_number(detuning_nm[i]) + "," + format_number(swap ? r.lambda2 : r.lambda1) + "," +
               format_number(swap ? r.lambda1 : r.lambda2) + "," + format_number(swap ? r.q2 : r.q1) + "," +
               format_number(swap ? r.q1 : r.q2) + "," + format_number(r.decay_time / kNanosecond) + "\n";
    }
    return out;
}

std::string map_csv(const PLMap& map) {
    map.validate();
    std::string out = "t[ps]";
    for (double l : map.lambda_nm) out += ",S@" + wl_tag(l) + "[arb]";
    out += "\n";
    for (std::size_t k = 0; k < map.t_ps.size(); ++k) {
        out += format_number(map.t_ps[k]);
        for (Eigen::Index j = 0; j < map.intensity.cols(); ++j) {
            out += "," + format_number(map.intensity(static_cast<Eigen::Index>(k), j));
        }
        out += "\n";
    }
    return out;
}

std::string curves_csv(const DynamicRun& run) {
    std::string out = "t[ps]";
    for (const auto& f : run.filters) out += ",I@" + wl_tag(f.curve.center_nm) + "[arb]";
    for (const auto& f : run.filters) {
        if (f.normalized) out += ",R@" + wl_tag(f.curve.center_nm) + "[1]";
    }
    out += "\n";
    const auto& t = run.trajectory.t_ps;
    for (std::size_t k = 0; k < t.size(); ++k) {
        out += format_number(t[k]);
        for (const auto& f : run.filters) out += "," + format_number(f.curve.intensity[k]);
        for (const auto& f : run.filters) {
            if (f.normalized) out += "," + format_number(f.normalized->intensity[k]);
        }
        out += "\n";
    }
    return out;
}

std::string modes_csv(const DynamicRun& run) {
    const Trajectory& tr = run.trajectory;
    std::string out =
        "t[ps],fp_shift[nm],lambda1[nm],lambda2[nm],kappa1[rad/s],kappa2[rad/s],n1[1],n2[1],n_t[1],n_fp[1],emitter[1]\n";
    for (std::size_t k = 0; k < tr.t_ps.size(); ++k) {
        const CoupledModes& c = tr.modes[k];
        out += format_number(tr.t_ps[k]) + "," + format_number(tr.fp_shift_nm[k]) + "," + format_number(c.wavelength_nm(1)) +
               "," + format_number(c.wavelength_nm(2)) + "," + format_number(c.kappa1) + "," + format_number(c.kappa2) +
               "," + format_number(tr.n1[k]) + "," + format_number(tr.n2[k]) + "," + format_number(tr.n_t[k]) + "," +
               format_number(tr.n_fp[k]) + "," + format_number(tr.emitter[k]) + "\n";
    }
    return out;
}

json metrics_json(const RunConfig& cfg, const DynamicResult& result) {
    json j;
    j["scenario"] = cfg.name;
    j["config_hash"] = hex64(cfg.hash);
    j["tau_fc_ps"] = result.tau_fc_ps;
    if (result.tau_fc_calibrated_ps) j["tau_fc_calibrated_ps"] = *result.tau_fc_calibrated_ps;
    if (result.truncation_delta) {
        j["truncation_check"] = {{"n_max", cfg.solver.space.n_max},
                                 {"max_relative_change_at_n_max_plus_1", *result.truncation_delta}};
    }
    json runs = json::array();
    for (const auto& run : result.runs) {
        json r;
        if (run.delay_ps) r["control_delay_ps"] = *run.delay_ps;
        r["baseline_window_ps"] = {run.baseline_window_ps.first, run.baseline_window_ps.second};
        json filters = json::array();
        for (const auto& f : run.filters) filters.push_back(metrics_to_json(f));
        r["filters"] = filters;
        const Trajectory& tr = run.trajectory;
        r["diagnostics"] = {{"max_trace_deviation", tr.max_trace_deviation},
                            {"max_hermiticity_error", tr.max_hermiticity_error},
                            {"min_eigenvalue", tr.min_eigenvalue},
                            {"steps", tr.stats.steps},
                            {"rejected_steps", tr.stats.rejected}};
        runs.push_back(r);
    }
    j["runs"] = runs;
    return j;
}

json fit_json(const FitResult& r, const AnticrossingData& data) {
    struct Field {
        const char* name;
        const char* unit;
        double FitParameters::*member;
    };
    static const Field fields[] = {
        {"eta", "rad/s", &FitParameters::eta},
        {"kappa_t", "rad/s", &FitParameters::kappa_t},
        {"kappa_fp", "rad/s", &FitParameters::kappa_fp},
        {"lambda_t", "nm", &FitParameters::lambda_t},
        {"slope_nm_per_mw", "nm/mW", &FitParameters::slope_nm_per_mw},
        {"offset_nm", "nm", &FitParameters::offset_nm},
        {"g", "rad/s", &FitParameters::g},
        {"gamma_leaky", "1/s", &FitParameters::gamma_leaky},
    };
    json params = json::object();
    for (const auto& f : fields) {
        if (std::find(r.parameters.begin(), r.parameters.end(), f.name) == r.parameters.end()) continue;
        params[f.name] = {{"value", r.estimate.*f.member}, {"std_error", r.std_error.*f.member}, {"unit", f.unit}};
    }
    json j;
    j["converged"] = r.converged;
    j["evaluations"] = r.evaluations;
    j["residual_norm"] = r.residual_norm;
    j["near_degenerate"] = r.near_degenerate;
    j["best_start"] = r.best_start;
    j["rows"] = data.rows.size();
    j["control"] = data.control == ControlKind::Power ? "power" : "detuning";
    j["parameters"] = params;
    return j;
}

std::string fit_residuals_csv(const FitResult& r, const AnticrossingData& data) {
    const bool q = data.has_q(), tau = data.has_tau();
    std::string out = std::string("row[1],control[") + (data.control == ControlKind::Power ? "mW" : "nm") +
                      "],r_lambda1[1],r_lambda2[1]" + (q ? ",r_q1[1],r_q2[1]" : "") + (tau ? ",r_tau[1]" : "") + "\n";
    const Eigen::Index per_row = r.residuals.size() / static_cast<Eigen::Index>(data.rows.size());
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
        out += std::to_string(i + 1) + "," + format_number(data.rows[i].control);
        for (Eigen::Index k = 0; k < per_row; ++k) out += "," + format_number(r.residuals[static_cast<Eigen::Index>(i) * per_row + k]);
        out += "\n";
    }
    return out;
}

std::vector<std::string> OutputSet::write(const std::string& dir, const RunConfig& cfg, const std::string& command,
                                          double wall_seconds) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    std::vector<std::string> names;
    for (const auto& [name, content] : files_) {
        write_text_file((std::filesystem::path(dir) / name).string(), content);
        names.push_back(name);
    }
    json m;
    m["tool"] = "cqedctl";
    m["tool_version"] = kToolVersion;
    m["command"] = command;
    m["scenario"] = cfg.name;
    m["config_hash"] = hex64(cfg.hash);
    m["wall_clock_s"] = wall_seconds;
    m["outputs"] = names;
    write_text_file((std::filesystem::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
    names.emplace_back("manifest.json");
    return names;
}

}  // namespace cqed
