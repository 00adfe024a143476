#pragma once

#include <vector>

namespace cqed {

/// One pulse of incoherent emitter pumping.
///
/// `width_ps` is the FWHM of a Gaussian rate envelope whose time integral equals
/// `area`. A width of zero selects instantaneous re-preparation: at `time_ps` the
/// state is mapped through exp(area * D[sigma+]) in one step.
struct PumpPulse {
    double time_ps = 0.0;
    double area = 0.0;
    double width_ps = 6.0;
};

struct PumpSchedule {
    double cw_rate = 0.0;      // 1/s, incoherent emitter pump
    double cavity_rate = 0.0;  // 1/s, incoherent target-cavity pump (off unless set)
    std::vector<PumpPulse> pulses;

    /// Emitter pump rate (1/s) at time t, summing the CW baseline and all
    /// finite-width Gaussian envelopes.
    double emitter_rate_at(double t_ps) const;

    bool pumped() const;
    void validate() const;
};

}  // namespace cqed
