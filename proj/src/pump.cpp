#include "cqed/pump.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cqed/error.hpp"
#include "cqed/units.hpp"

namespace cqed {

namespace {
constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)
}

double PumpSchedule::emitter_rate_at(double t_ps) const {
    double rate = cw_rate;
    for (const auto& p : pulses) {
        if (p.width_ps <= 0.0 || p.area == 0.0) continue;
        const double sigma_ps = p.width_ps / kFwhmPerSigma;
        const double x = (t_ps - p.time_ps) / sigma_ps;
        if (std::abs(x) > 12.0) continue;
        const double sigma_s = ps_to_s(sigma_ps);
        rate += p.area * std::exp(-0.5 * x * x) / (sigma_s * std::sqrt(2.0 * std::numbers::pi));
    }
    return rate;
}

bool PumpSchedule::pumped() const {
    if (cw_rate > 0.0 || cavity_rate > 0.0) return true;
    for (const auto& p : pulses) {
        if (p.area > 0.0) return true;
    }
    return false;
}

void PumpSchedule::validate() const {
    if (!(cw_rate >= 0.0) || !std::isfinite(cw_rate)) {
        throw InvalidInput("pump.cw_rate must be >= 0");
    }
    if (!(cavity_rate >= 0.0) || !std::isfinite(cavity_rate)) {
        throw InvalidInput("pump.cavity_rate must be >= 0");
    }
    for (std::size_t i = 0; i < pulses.size(); ++i) {
        const auto& p = pulses[i];
        const std::string at = "pump.pulses[" + std::to_string(i) + "]";
        if (!(p.area >= 0.0) || !std::isfinite(p.area)) throw InvalidInput(at + ".area must be >= 0");
        if (!(p.width_ps >= 0.0) || !std::isfinite(p.width_ps)) {
            throw InvalidInput(at + ".width_ps must be >= 0 (0 = instantaneous)");
        }
        if (!std::isfinite(p.time_ps)) throw InvalidInput(at + ".time_ps must be finite");
    }
}

}  // namespace cqed
