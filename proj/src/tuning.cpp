#include "cqed/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cqed/error.hpp"
#include "cqed/units.hpp"

namespace cqed {

void TuningProfile::validate() const {
    if (!std::isfinite(static_detuning_nm)) throw InvalidInput("tuning.static_detuning_nm must be finite");
    if (thermo) {
        if (!(thermo->coeff_nm_per_mw >= 0.0)) {
            throw InvalidInput("tuning.thermo.coeff_nm_per_mw must be >= 0 (heating red-shifts the FP mode)");
        }
        if (!(thermo->power_mw >= 0.0)) throw InvalidInput("tuning.thermo.power_mw must be >= 0");
    }
    if (!(fc_kappa_per_nm >= 0.0)) throw InvalidInput("tuning.fc_kappa_per_nm must be >= 0");
    for (std::size_t i = 0; i < pulses.size(); ++i) {
        const auto& p = pulses[i];
        const std::string at = "tuning.pulses[" + std::to_string(i) + "]";
        if (!std::isfinite(p.t0_ps)) throw InvalidInput(at + ".t0_ps must be finite");
        if (!(p.tau_fc_ps > 0.0)) throw InvalidInput(at + ".tau_fc_ps must be > 0");
        if (!(p.delta_lambda_max_nm >= 0.0)) throw InvalidInput(at + ".delta_lambda_max_nm must be >= 0");
        if (!(p.tau_rise_ps >= 0.0)) throw InvalidInput(at + ".tau_rise_ps must be >= 0");
        if (i > 0 && p.t0_ps < pulses[i - 1].t0_ps) throw InvalidInput(at + ": pulses must be sorted by t0_ps");
    }
}

std::vector<double> TuningProfile::breakpoints_ps() const {
    std::vector<double> out;
    out.reserve(pulses.size());
    for (const auto& p : pulses) out.push_back(p.t0_ps);
    return out;
}

double thermo_shift(const ThermoOpticModel& model) {
    if (!(model.power_mw >= 0.0)) throw InvalidInput("thermo_shift: power must be >= 0");
    return model.coeff_nm_per_mw * model.power_mw;
}

double free_carrier_shift(const TuningProfile& profile, double t_ps, bool left_limit) {
    double shift = 0.0;
    for (const auto& p : profile.pulses) {
        if (t_ps < p.t0_ps || (left_limit && t_ps == p.t0_ps)) continue;
        const double dt = t_ps - p.t0_ps;
        const double rise = p.tau_rise_ps > 0.0 ? -std::expm1(-dt / p.tau_rise_ps) : 1.0;
        shift -= p.delta_lambda_max_nm * rise * std::exp(-dt / p.tau_fc_ps);
    }
    return shift;
}

double fp_shift_at(const TuningProfile& profile, double t_ps, bool left_limit) {
    double shift = profile.static_detuning_nm;
    if (profile.thermo) shift += thermo_shift(*profile.thermo);
    return shift + free_carrier_shift(profile, t_ps, left_limit);
}

BareMode fp_mode_at(const TuningProfile& profile, double t_ps, double lambda_t_nm, double kappa_fp,
                    bool left_limit) {
    const double fc = free_carrier_shift(profile, t_ps, left_limit);
    double shift = profile.static_detuning_nm + fc;
    if (profile.thermo) shift += thermo_shift(*profile.thermo);
    const double kappa = kappa_fp * (1.0 + profile.fc_kappa_per_nm * std::abs(fc));
    return BareMode{wl_to_omega(lambda_t_nm + shift), kappa};
}

std::vector<BareMode> sample_profile(const TuningProfile& profile, std::span<const double> t_grid_ps,
                                     double lambda_t_nm, double kappa_fp) {
    for (std::size_t i = 1; i < t_grid_ps.size(); ++i) {
        if (!(t_grid_ps[i] > t_grid_ps[i - 1])) {
            throw InvalidInput("sample_profile: time grid must be strictly increasing (index " + std::to_string(i) +
                               ")");
        }
    }
    std::vector<BareMode> out;
    out.reserve(t_grid_ps.size());
    for (double t : t_grid_ps) out.push_back(fp_mode_at(profile, t, lambda_t_nm, kappa_fp));
    return out;
}

}  // namespace cqed
