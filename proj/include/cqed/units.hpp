#pragma once

#include <numbers>

namespace cqed {

inline constexpr double kSpeedOfLight = 2.99792458e8;  // m/s
inline constexpr double kNanometre = 1e-9;
inline constexpr double kPicosecond = 1e-12;
inline constexpr double kNanosecond = 1e-9;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Vacuum wavelength (nm) to angular frequency (rad/s): omega = 2 pi c / lambda.
double wl_to_omega(double lambda_nm);

/// Inverse of wl_to_omega.
double omega_to_wl(double omega);

/// First-order conversion of a wavelength offset into an angular-frequency offset.
/// Longer wavelength means lower frequency, so the result has the opposite sign.
double detuning_wl_to_omega(double delta_lambda_nm, double lambda_ref_nm);

/// First-order conversion of an angular-frequency width (rad/s) into a wavelength width (nm).
double width_omega_to_wl(double delta_omega, double lambda_ref_nm);

inline constexpr double ps_to_s(double t_ps) { return t_ps * kPicosecond; }
inline constexpr double s_to_ps(double t_s) { return t_s / kPicosecond; }

}  // namespace cqed
