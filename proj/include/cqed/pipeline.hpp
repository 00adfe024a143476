#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cqed/config.hpp"
#include "cqed/spectra.hpp"

namespace cqed {

struct FilterResult {
    DecayCurve curve;                       // raw filtered trace
    std::optional<DecayCurve> normalized;   // divided by the no-control-pulse reference
    std::optional<BurstMetrics> metrics;
    std::string no_feature;                 // reason when metrics are absent
};

struct DynamicRun {
    std::optional<double> delay_ps;
    Trajectory trajectory;
    PLMap map;
    std::vector<FilterResult> filters;
    std::pair<double, double> baseline_window_ps{};
};

struct DynamicResult {
    double tau_fc_ps = 0.0;                  // carrier lifetime actually used (first pulse)
    std::optional<double> tau_fc_calibrated_ps;
    std::optional<double> truncation_delta;  // max relative change of filtered traces at n_max + 1
    std::vector<DynamicRun> runs;
};

/// Sets the free-carrier lifetime of every control pulse.
RunConfig with_tau_fc(RunConfig cfg, double tau_fc_ps);

/// One dynamic simulation; with a delay, the control pulses are shifted so the first arrives then.
DynamicRun simulate(const RunConfig& cfg, std::optional<double> delay_ps = std::nullopt);

/// Bisection in log(tau_fc) until the burst FWHM on the calibration filter is within tolerance.
double calibrate_tau_fc(const RunConfig& cfg, const CalibrationConfig& cal);

/// Calibration (if configured), the delay scan or a single run, and the optional truncation check.
DynamicResult run_dynamic(const RunConfig& cfg, bool parallel_scan = true);

std::vector<SweepRow> run_static_sweep(const RunConfig& cfg);

// Serializers; every number uses 17 significant digits.
std::string sweep_csv(const std::vector<SweepRow>& rows, const std::vector<double>& detuning_nm);
std::string map_csv(const PLMap& map);
std::string curves_csv(const DynamicRun& run);
std::string modes_csv(const DynamicRun& run);
nlohmann::json metrics_json(const RunConfig& cfg, const DynamicResult& result);
nlohmann::json fit_json(const FitResult& result, const AnticrossingData& data);
std::string fit_residuals_csv(const FitResult& result, const AnticrossingData& data);

/// Output directory writer: collects files in memory and writes them in name order.
class OutputSet {
public:
    void add(const std::string& name, std::string content) { files_[name] = std::move(content); }
    /// Writes every file plus manifest.json; returns the file list (manifest last).
    std::vector<std::string> write(const std::string& dir, const RunConfig& cfg, const std::string& command,
                                   double wall_seconds) const;
    const std::map<std::string, std::string>& files() const { return files_; }

private:
    std::map<std::string, std::string> files_;
};

}  // namespace cqed
