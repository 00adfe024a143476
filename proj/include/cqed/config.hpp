#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cqed/fitting.hpp"
#include "cqed/lindblad.hpp"
#include "cqed/modespace.hpp"
#include "cqed/tuning.hpp"

namespace cqed {

inline constexpr const char* kConfigSchema = "cqed-config/1";
inline constexpr const char* kToolVersion = "1.0.0";

/// Evenly spaced samples from start to stop inclusive.
struct GridSpec {
    double start = 0.0;
    double stop = 0.0;
    double step = 0.0;
    std::vector<double> values() const;
};

struct SpectraConfig {
    double collection_exponent = 1.0;
    std::vector<double> filters_nm;
    double filter_fwhm_nm = 0.5;
    std::optional<std::pair<double, double>> baseline_window_ps;  // default: 500 ps before the first control pulse
    double baseline_length_ps = 500.0;
    double irf_sigma_ps = 0.0;
    /// Divide each filtered trace by the trace of the same run without control pulses
    /// before measuring the feature (for decaying backgrounds).
    bool normalize_to_reference = false;
};

/// One-dimensional scan of the free-carrier lifetime for a target burst FWHM.
struct CalibrationConfig {
    double target_fwhm_ps = 232.0;
    double filter_nm = 0.0;
    double tau_min_ps = 20.0;
    double tau_max_ps = 3000.0;
    double tolerance_ps = 0.5;
};

struct FitConfig {
    ControlKind control = ControlKind::Detuning;
    FitParameters init{};
    FitBounds bounds{};
    FitOptions options{};
};

struct RenderConfig {
    bool enabled = true;
    bool log_scale = false;
    double log_decades = 3.0;
    int width = 900;
    int height = 600;
};

struct RunConfig {
    std::string name;        // scenario label
    SystemParams system;     // system.fp holds the FP mode at the static detuning
    TuningProfile tuning;
    SolverOptions solver;
    bool convergence_check = false;  // rerun with n_max + 1 and report the difference
    std::optional<GridSpec> detuning_nm;
    std::optional<GridSpec> time_ps;
    std::optional<GridSpec> wavelength_nm;
    SpectraConfig spectra;
    std::vector<double> control_delays_ps;  // delay scan: first control pulse moved to each delay
    std::optional<CalibrationConfig> calibration;
    FitConfig fit;
    RenderConfig render;
    nlohmann::json source;   // the document as read
    std::uint64_t hash = 0;  // FNV-1a of the canonical serialization of `source`

    double lambda_t_nm() const;
};

/// Parses and validates a config document. Errors name the offending key path.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_config_text(const std::string& text, const std::string& source);
RunConfig load_config(const std::string& path);

std::vector<std::string> scenario_names();
/// JSON text of a shipped scenario; throws InvalidInput for unknown names.
const std::string& scenario_text(const std::string& name);
RunConfig shipped_scenario(const std::string& name);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

}  // namespace cqed
