#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cqed/modespace.hpp"

namespace cqed {

/// Linear red shift of the FP resonance from CW heating.
struct ThermoOpticModel {
    double coeff_nm_per_mw = 0.0;
    double power_mw = 0.0;
};

/// Free-carrier blue shift: an abrupt (or exponentially rising) pull of the FP
/// resonance by delta_lambda_max_nm that relaxes back with time constant tau_fc_ps.
struct FreeCarrierPulse {
    double t0_ps = 0.0;
    double delta_lambda_max_nm = 0.0;
    double tau_fc_ps = 150.0;
    double tau_rise_ps = 0.0;
};

struct TuningProfile {
    double static_detuning_nm = 0.0;  // lambda_fp - lambda_t before any pulse
    std::optional<ThermoOpticModel> thermo;
    std::vector<FreeCarrierPulse> pulses;  // sorted by t0
    /// Free-carrier absorption hook: kappa_fp(t) = kappa_fp * (1 + k * |free-carrier shift in nm|).
    double fc_kappa_per_nm = 0.0;

    void validate() const;
    /// Pulse arrival times, where the profile (or its derivative) is discontinuous.
    std::vector<double> breakpoints_ps() const;
};

/// Throws InvalidInput for negative power.
double thermo_shift(const ThermoOpticModel& model);

/// Sum of the free-carrier contributions at time t (nm, <= 0).
/// With left_limit the pulses arriving exactly at t are excluded.
double free_carrier_shift(const TuningProfile& profile, double t_ps, bool left_limit = false);

/// FP wavelength offset from lambda_t at time t (nm).
double fp_shift_at(const TuningProfile& profile, double t_ps, bool left_limit = false);

/// Instantaneous FP mode: lambda_fp = lambda_t + shift(t); kappa_fp constant unless
/// the absorption hook is set.
BareMode fp_mode_at(const TuningProfile& profile, double t_ps, double lambda_t_nm, double kappa_fp,
                    bool left_limit = false);

/// One FP snapshot per grid time. The grid must be strictly increasing.
std::vector<BareMode> sample_profile(const TuningProfile& profile, std::span<const double> t_grid_ps,
                                     double lambda_t_nm, double kappa_fp);

}  // namespace cqed
