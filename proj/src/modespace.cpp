#include "cqed/modespace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cqed/error.hpp"
#include "cqed/parallel.hpp"
#include "cqed/units.hpp"

namespace cqed {

namespace {

void check_mode_index(int mode) {
    if (mode != 1 && mode != 2) {
        throw InvalidInput("coupled mode index must be 1 or 2, got " + std::to_string(mode));
    }
}

bool finite(double v) { return std::isfinite(v); }

// Eigenvector of [[wt, eta], [eta, wf]] for eigenvalue lam, taken from whichever
// row gives the better-conditioned null vector.
std::pair<cplx, cplx> null_vector(cplx wt, cplx wf, double eta, cplx lam) {
    const cplx ax = eta;
    const cplx ay = lam - wt;
    const cplx bx = lam - wf;
    const cplx by = eta;
    const double na = std::norm(ax) + std::norm(ay);
    const double nb = std::norm(bx) + std::norm(by);
    if (na >= nb) return {ax, ay};
    return {bx, by};
}

// Euclidean normalization with the phase fixed so the first nonzero component is
// real and positive.
std::pair<cplx, cplx> normalize(std::pair<cplx, cplx> v) {
    const double n = std::sqrt(std::norm(v.first) + std::norm(v.second));
    cplx a = v.first / n;
    cplx b = v.second / n;
    const cplx pivot = std::abs(a) > 0.0 ? a : b;
    const cplx phase = std::conj(pivot) / std::abs(pivot);
    return {a * phase, b * phase};
}

}  // namespace

void BareMode::validate(std::string_view what) const {
    const std::string w(what);
    if (!(omega > 0.0) || !finite(omega)) throw InvalidInput(w + ".omega must be > 0");
    if (!(kappa > 0.0) || !finite(kappa)) throw InvalidInput(w + ".kappa must be > 0");
    if (!(q_factor(omega, kappa) > 1.0)) throw InvalidInput(w + ": quality factor must exceed 1");
}

BareMode BareMode::from_wavelength(double lambda_nm, double kappa) {
    return BareMode{wl_to_omega(lambda_nm), kappa};
}

void SystemParams::validate() const {
    if (!(emitter.omega0 > 0.0) || !finite(emitter.omega0)) throw InvalidInput("emitter.omega0 must be > 0");
    if (!(emitter.g >= 0.0) || !finite(emitter.g)) throw InvalidInput("emitter.g must be >= 0");
    if (!(emitter.gamma_leaky >= 0.0) || !finite(emitter.gamma_leaky)) {
        throw InvalidInput("emitter.gamma_leaky must be >= 0");
    }
    if (!(emitter.dephasing >= 0.0) || !finite(emitter.dephasing)) {
        throw InvalidInput("emitter.dephasing must be >= 0");
    }
    target.validate("target");
    fp.validate("fp");
    if (!(eta >= 0.0) || !finite(eta)) throw InvalidInput("eta must be >= 0");
    if (!(emitter.g < std::min(target.kappa, fp.kappa))) {
        throw InvalidInput("emitter.g must satisfy the weak-coupling guard g < min(kappa_t, kappa_fp)");
    }
    pump.validate();
}

double CoupledModes::omega(int mode) const {
    check_mode_index(mode);
    return mode == 1 ? omega1 : omega2;
}

double CoupledModes::kappa(int mode) const {
    check_mode_index(mode);
    return mode == 1 ? kappa1 : kappa2;
}

cplx CoupledModes::target_component(int mode) const {
    check_mode_index(mode);
    return mode == 1 ? alpha : -beta;
}

cplx CoupledModes::fp_component(int mode) const {
    check_mode_index(mode);
    return mode == 1 ? beta : alpha;
}

double CoupledModes::wavelength_nm(int mode) const { return omega_to_wl(omega(mode)); }

double q_factor(double omega, double kappa) {
    if (!(kappa > 0.0)) throw InvalidInput("q_factor: kappa must be > 0");
    return omega / (2.0 * kappa);
}

double q_factor(const BareMode& mode) { return q_factor(mode.omega, mode.kappa); }

double q_factor(const CoupledModes& modes, int mode) { return q_factor(modes.omega(mode), modes.kappa(mode)); }

CoupledModes couple(const BareMode& target, const BareMode& fp, double eta) {
    if (!(eta >= 0.0) || !finite(eta)) throw InvalidInput("couple: eta must be >= 0");
    const cplx wt = target.complex_frequency();
    const cplx wf = fp.complex_frequency();
    const cplx mean = 0.5 * (wt + wf);
    const cplx half = 0.5 * (wt - wf);
    const cplx root = std::sqrt(half * half + eta * eta);

    CoupledModes out;
    const double scale = std::abs(half) + eta;
    const bool coalesced = scale == 0.0 || std::abs(root) <= 1e-9 * scale;

    if (coalesced) {
        out.degenerate = true;
        out.omega1 = out.omega2 = mean.real();
        out.kappa1 = out.kappa2 = -mean.imag();
        if (eta == 0.0) {
            // identical bare modes: diagonalizable, keep the bare basis
            out.alpha = 1.0;
            out.beta = 0.0;
        } else {
            auto [a, b] = normalize({eta, -half});
            out.alpha = a;
            out.beta = b;
        }
        return out;
    }

    cplx lam1 = mean - root;
    cplx lam2 = mean + root;
    if (lam2.real() < lam1.real() || (lam2.real() == lam1.real() && -lam2.imag() < -lam1.imag())) {
        std::swap(lam1, lam2);
    }
    auto [a, b] = normalize(null_vector(wt, wf, eta, lam1));
    out.omega1 = lam1.real();
    out.kappa1 = -lam1.imag();
    out.omega2 = lam2.real();
    out.kappa2 = -lam2.imag();
    out.alpha = a;
    out.beta = b;
    return out;
}

ComplexMatrix3 bare_hamiltonian(const SystemParams& params) {
    ComplexMatrix3 h = ComplexMatrix3::Zero();
    h(0, 0) = params.emitter.omega0;
    h(0, 1) = h(1, 0) = params.emitter.g;
    h(1, 1) = params.target.complex_frequency();
    h(1, 2) = h(2, 1) = params.eta;
    h(2, 2) = params.fp.complex_frequency();
    return h;
}

ComplexMatrix3 coupled_hamiltonian(const SystemParams& params, const CoupledModes& coupled) {
    const CoupledModes ref = couple(params.target, params.fp, params.eta);
    const double scale = std::max({std::abs(ref.eigenvalue(1)), std::abs(ref.eigenvalue(2)), 1.0});
    const bool same = std::abs(ref.eigenvalue(1) - coupled.eigenvalue(1)) <= 1e-9 * scale &&
                      std::abs(ref.eigenvalue(2) - coupled.eigenvalue(2)) <= 1e-9 * scale &&
                      std::abs(ref.alpha - coupled.alpha) <= 1e-9 && std::abs(ref.beta - coupled.beta) <= 1e-9;
    if (!same) throw InvalidInput("coupled_hamiltonian: coupled modes were not derived from these parameters");
    if (coupled.degenerate && params.eta > 0.0) {
        throw InvalidInput("coupled_hamiltonian: no coupled-mode basis at an exceptional point");
    }

    // Complex-orthogonal normalization: alpha^2 + beta^2 = 1 makes V^T V = 1.
    const cplx s = std::sqrt(coupled.alpha * coupled.alpha + coupled.beta * coupled.beta);
    const cplx a = coupled.alpha / s;
    const cplx b = coupled.beta / s;
    const double g = params.emitter.g;

    ComplexMatrix3 h = ComplexMatrix3::Zero();
    h(0, 0) = params.emitter.omega0;
    h(0, 1) = h(1, 0) = g * a;
    h(0, 2) = h(2, 0) = -g * b;
    h(1, 1) = coupled.eigenvalue(1);
    h(2, 2) = coupled.eigenvalue(2);
    return h;
}

double purcell_rate(double g, double kappa_t) {
    if (!(kappa_t > 0.0)) throw InvalidInput("purcell_rate: kappa_t must be > 0");
    return 2.0 * g * g / kappa_t;
}

double se_rate_ratio(const CoupledModes& coupled, int mode, double kappa_t) {
    if (!(kappa_t > 0.0)) throw InvalidInput("se_rate_ratio: kappa_t must be > 0");
    return std::norm(coupled.target_component(mode)) * kappa_t / coupled.kappa(mode);
}

double total_decay_time(const SystemParams& params, double fp_offset) {
    const BareMode fp{params.target.omega + fp_offset, params.fp.kappa};
    const CoupledModes c = couple(params.target, fp, params.eta);
    const double gamma_t = purcell_rate(params.emitter.g, params.target.kappa);
    const double rate = params.emitter.gamma_leaky +
                        gamma_t * (se_rate_ratio(c, 1, params.target.kappa) + se_rate_ratio(c, 2, params.target.kappa));
    if (!(rate > 0.0)) throw InvalidInput("invalid configuration: total SE rate is zero");
    return 1.0 / rate;
}

std::vector<SweepRow> anticrossing_sweep(const SystemParams& params, std::span<const double> fp_offsets) {
    if (fp_offsets.empty()) throw InvalidInput("anticrossing_sweep: empty detuning grid");
    for (double d : fp_offsets) {
        if (!finite(d)) throw InvalidInput("anticrossing_sweep: non-finite detuning");
    }
    std::vector<SweepRow> rows(fp_offsets.size());
    parallel_for(static_cast<long>(fp_offsets.size()), [&](long i) {
        const double d = fp_offsets[static_cast<std::size_t>(i)];
        const BareMode fp{params.target.omega + d, params.fp.kappa};
        const CoupledModes c = couple(params.target, fp, params.eta);
        SweepRow& r = rows[static_cast<std::size_t>(i)];
        r.fp_offset = d;
        r.lambda1 = c.wavelength_nm(1);
        r.lambda2 = c.wavelength_nm(2);
        r.q1 = q_factor(c, 1);
        r.q2 = q_factor(c, 2);
        r.decay_time = total_decay_time(params, d);
        r.degenerate = c.degenerate;
    });
    return rows;
}

SystemParams default_system() {
    constexpr double lambda_t = 1552.0;
    constexpr double kappa_t = 1.564e11;
    SystemParams p;
    p.target = BareMode::from_wavelength(lambda_t, kappa_t);
    p.fp = BareMode{p.target.omega, 3.0 * kappa_t};
    p.eta = kappa_t;
    p.emitter.omega0 = p.target.omega;
    p.emitter.g = 1e10;
    p.emitter.gamma_leaky = 5e8;
    return p;
}

}  // namespace cqed
