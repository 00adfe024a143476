#pragma once

#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cqed/lindblad.hpp"

namespace cqed {

/// Time-resolved emission map; row = time, column = wavelength.
struct PLMap {
    std::vector<double> lambda_nm;
    std::vector<double> t_ps;
    Eigen::MatrixXd intensity;

    void validate() const;
};

struct DecayCurve {
    std::vector<double> t_ps;
    std::vector<double> intensity;
    double center_nm = 0.0;
    double fwhm_nm = 0.0;

    void validate() const;
};

enum class FeatureKind { Burst, Dip };
std::string_view to_string(FeatureKind kind);

struct BurstMetrics {
    FeatureKind kind = FeatureKind::Burst;
    double depth = 1.0;         // I_max/I_0 or I_0/I_min
    double fwhm_ps = 0.0;
    double extremum_t_ps = 0.0;
    double baseline = 0.0;
};

/// Unit-area Lorentzian in wavelength with full width `fwhm`.
double lorentzian_area_normalized(double lambda, double center, double fwhm);

/// Quasi-static spectrum: each coupled mode contributes a Lorentzian at its
/// instantaneous wavelength with area w * 2 kappa * n, w = |target component|^(2p).
/// Rows are computed in parallel when `parallel` is set.
PLMap synthesize_map(const Trajectory& traj, std::span<const double> lambda_grid_nm, double collection_exponent = 1.0,
                     bool parallel = true);

/// Serial reference for synthesize_map.
PLMap synthesize_map_reference(const Trajectory& traj, std::span<const double> lambda_grid_nm,
                               double collection_exponent = 1.0);

/// Bandpass-filtered trace: trapezoidal integral of S times a unit-peak Lorentzian filter.
DecayCurve apply_filter(const PLMap& map, double lambda_c_nm, double fwhm_nm);

/// Wavelength-integrated intensity per time row (trapezoidal).
std::vector<double> integrated_intensity(const PLMap& map);

/// Burst or dip after the baseline window [t_a, t_b]. Throws NoFeature when the
/// extremum is within three baseline standard deviations of the baseline mean.
BurstMetrics burst_metrics(const DecayCurve& curve, double t_a_ps, double t_b_ps);

/// Gaussian instrument response of standard deviation sigma_ps. Area-preserving on
/// the trapezoidal measure of the curve's own grid; sigma = 0 returns the input.
DecayCurve irf_convolve(const DecayCurve& curve, double sigma_ps);

}  // namespace cqed
