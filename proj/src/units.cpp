#include "cqed/units.hpp"

#include <cmath>
#include <string>

#include "cqed/error.hpp"

namespace cqed {

namespace {
void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw InvalidInput(std::string(what) + " must be positive and finite, got " + std::to_string(v));
    }
}
}  // namespace

double wl_to_omega(double lambda_nm) {
    require_positive(lambda_nm, "wavelength");
    return kTwoPi * kSpeedOfLight / (lambda_nm * kNanometre);
}

double omega_to_wl(double omega) {
    require_positive(omega, "angular frequency");
    return kTwoPi * kSpeedOfLight / omega / kNanometre;
}

double detuning_wl_to_omega(double delta_lambda_nm, double lambda_ref_nm) {
    require_positive(lambda_ref_nm, "reference wavelength");
    const double lref = lambda_ref_nm * kNanometre;
    return -kTwoPi * kSpeedOfLight * (delta_lambda_nm * kNanometre) / (lref * lref);
}

double width_omega_to_wl(double delta_omega, double lambda_ref_nm) {
    require_positive(lambda_ref_nm, "reference wavelength");
    const double lref = lambda_ref_nm * kNanometre;
    return delta_omega * lref * lref / (kTwoPi * kSpeedOfLight) / kNanometre;
}

}  // namespace cqed
