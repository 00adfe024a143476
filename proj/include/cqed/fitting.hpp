#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cqed/modespace.hpp"
#include "cqed/nelder_mead.hpp"

namespace cqed {

enum class ControlKind { Detuning, Power };

struct AnticrossingRow {
    double control = 0.0;  // nm of detuning, or mW of tuning-laser power
    double lambda1 = 0.0;  // nm, lambda1 <= lambda2
    double lambda2 = 0.0;
    std::optional<double> q1, q2;
    std::optional<double> tau_ns;
    std::optional<double> lambda1_err, lambda2_err, q1_err, q2_err, tau_err;
};

struct AnticrossingData {
    ControlKind control = ControlKind::Detuning;
    std::vector<AnticrossingRow> rows;

    bool has_q() const;
    bool has_tau() const;
    /// At least 4 rows, finite positive values, optional columns present in every row or none.
    void validate() const;
    /// Swaps each row so lambda1 <= lambda2, carrying Q and its errors along.
    void sort_pairs();
};

/// Columns: control, lambda1, lambda2, and optionally q1, q2, tau and *_err variants.
/// A trailing "[unit]" in a header name is ignored.
AnticrossingData parse_anticrossing_csv(std::istream& in, const std::string& source, ControlKind control);
AnticrossingData load_anticrossing_csv(const std::string& path, ControlKind control);

/// Model parameters. Rates in rad/s (gamma_leaky in 1/s), wavelengths in nm.
struct FitParameters {
    double eta = 0.0;
    double kappa_t = 0.0;
    double kappa_fp = 0.0;
    double lambda_t = 0.0;
    double slope_nm_per_mw = 0.0;  // power control only
    double offset_nm = 0.0;        // power control only
    double g = 0.0;                // decay data only
    double gamma_leaky = 0.0;      // decay data only
};

struct FitBounds {
    double rate_min = 1e9;
    double rate_max = 1e14;
    double gamma_leaky_min = 1e6;   // 1/s; leaky SE sits below the cavity-rate floor
    double gamma_leaky_max = 1e12;
    std::optional<double> lambda_t_min;  // default: data span - 2 nm
    std::optional<double> lambda_t_max;  // default: data span + 2 nm
    double slope_min = 0.0;
    double slope_max = 100.0;
    double offset_min = -20.0;
    double offset_max = 20.0;
};

struct FitOptions {
    double default_lambda_err_nm = 0.05;
    double default_q_rel_err = 0.10;
    double default_tau_rel_err = 0.10;
    int starts = 1;           // multi-start lattice size; start 0 is the initial guess
    std::uint64_t seed = 0;   // selects which lattice points are used
    bool parallel = true;
    NelderMeadOptions simplex{};
    /// Used for the emitter when the data carry no decay column.
    EmitterParams fixed_emitter{0.0, 1e10, 5e8, 0.0};
};

/// Names of the free parameters for this data set, in the fit's internal order.
std::vector<std::string> fit_parameter_names(const AnticrossingData& data);

/// Weighted residuals (model - datum) / uncertainty: per row lambda1, lambda2, then
/// q1, q2 and tau when present. Out-of-bounds parameters produce large finite penalties.
Eigen::VectorXd residuals(const FitParameters& theta, const AnticrossingData& data, const FitBounds& bounds = {},
                          const FitOptions& options = {});

/// Model row for one control value, as it would appear in the data (sorted wavelengths).
AnticrossingRow predict_row(const FitParameters& theta, ControlKind control, double control_value,
                            const EmitterParams& emitter);

struct FitResult {
    FitParameters estimate;
    FitParameters std_error;
    std::vector<std::string> parameters;  // which fields were free
    double residual_norm = 0.0;           // sqrt of the weighted sum of squares
    Eigen::VectorXd residuals;
    bool converged = false;
    bool near_degenerate = false;         // splitting 2 eta below the wavelength resolution
    long evaluations = 0;
    int best_start = 0;
    std::vector<double> objective_history;
};

FitResult fit(const AnticrossingData& data, const FitParameters& init, const FitBounds& bounds = {},
              const FitOptions& options = {});

struct PowerCalibration {
    double slope_nm_per_mw = 0.0;
    double offset_nm = 0.0;
    double detuning(double power_mw) const { return slope_nm_per_mw * power_mw + offset_nm; }
};

/// Throws InvalidInput unless the data use power control.
PowerCalibration calibrate_power(const AnticrossingData& data, const FitResult& result);

}  // namespace cqed
