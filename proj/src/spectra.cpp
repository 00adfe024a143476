#include "cqed/spectra.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "cqed/error.hpp"
#include "cqed/parallel.hpp"
#include "cqed/units.hpp"

namespace cqed {

namespace {

void check_ascending(const std::vector<double>& v, const char* what) {
    if (v.empty()) throw InvalidInput(std::string(what) + " is empty");
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i] > v[i - 1])) throw InvalidInput(std::string(what) + " must be strictly ascending");
    }
}

struct Line {
    double center;
    double fwhm;
    double area;
};

// The two lines of one time row.
std::array<Line, 2> row_lines(const Trajectory& traj, std::size_t k, double p) {
    const CoupledModes& c = traj.modes[k];
    const double n[2] = {traj.n1[k], traj.n2[k]};
    std::array<Line, 2> out{};
    for (int l = 1; l <= 2; ++l) {
        const double lambda = c.wavelength_nm(l);
        const double w = std::pow(std::abs(c.target_component(l)), 2.0 * p);
        // tiny negative populations from truncation round-off would make negative intensity
        const double pop = std::max(n[l - 1], 0.0);
        out[l - 1] = {lambda, width_omega_to_wl(2.0 * c.kappa(l), lambda), w * 2.0 * c.kappa(l) * pop};
    }
    return out;
}

void check_trajectory(const Trajectory& traj, std::span<const double> lambda_grid, double p) {
    if (traj.t_ps.empty()) throw InvalidInput("synthesize_map: empty time grid");
    if (lambda_grid.empty()) throw InvalidInput("synthesize_map: empty wavelength grid");
    if (traj.modes.size() != traj.t_ps.size() || traj.n1.size() != traj.t_ps.size() ||
        traj.n2.size() != traj.t_ps.size()) {
        throw InvalidInput("synthesize_map: trajectory lacks coupled-mode snapshots");
    }
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidInput("synthesize_map: collection exponent must be >= 0");
    for (std::size_t i = 1; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] > lambda_grid[i - 1])) {
            throw InvalidInput("synthesize_map: wavelength grid must be strictly ascending");
        }
    }
}

double trapz(std::span<const double> x, const double* y, std::ptrdiff_t stride) {
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        s += 0.5 * (x[i] - x[i - 1]) * (y[(i - 1) * stride] + y[i * stride]);
    }
    return s;
}

}  // namespace

std::string_view to_string(FeatureKind kind) { return kind == FeatureKind::Burst ? "burst" : "dip"; }

void PLMap::validate() const {
    check_ascending(lambda_nm, "PLMap wavelength grid");
    check_ascending(t_ps, "PLMap time grid");
    if (intensity.rows() != static_cast<Eigen::Index>(t_ps.size()) ||
        intensity.cols() != static_cast<Eigen::Index>(lambda_nm.size())) {
        throw InvalidInput("PLMap intensity shape does not match its grids");
    }
    if (!intensity.allFinite() || (intensity.size() > 0 && intensity.minCoeff() < 0.0)) {
        throw InvalidInput("PLMap intensity must be finite and non-negative");
    }
}

void DecayCurve::validate() const {
    check_ascending(t_ps, "DecayCurve time grid");
    if (intensity.size() != t_ps.size()) throw InvalidInput("DecayCurve grids differ in length");
    for (double v : intensity) {
        if (!std::isfinite(v) || v < 0.0) throw InvalidInput("DecayCurve intensity must be finite and non-negative");
    }
}

double lorentzian_area_normalized(double lambda, double center, double fwhm) {
    const double hw = 0.5 * fwhm;
    const double x = lambda - center;
    return hw / (std::numbers::pi * (x * x + hw * hw));
}

PLMap synthesize_map(const Trajectory& traj, std::span<const double> lambda_grid, double p, bool parallel) {
    check_trajectory(traj, lambda_grid, p);
    const auto nt = static_cast<Eigen::Index>(traj.t_ps.size());
    const auto nl = static_cast<Eigen::Index>(lambda_grid.size());
    PLMap map{{lambda_grid.begin(), lambda_grid.end()}, traj.t_ps, Eigen::MatrixXd(nt, nl)};
    parallel_for(
        nt,
        [&](long k) {
            const auto lines = row_lines(traj, static_cast<std::size_t>(k), p);
            for (Eigen::Index j = 0; j < nl; ++j) {
                const double lam = lambda_grid[static_cast<std::size_t>(j)];
                map.intensity(k, j) = lines[0].area * lorentzian_area_normalized(lam, lines[0].center, lines[0].fwhm) +
                                      lines[1].area * lorentzian_area_normalized(lam, lines[1].center, lines[1].fwhm);
            }
        },
        parallel);
    return map;
}

PLMap synthesize_map_reference(const Trajectory& traj, std::span<const double> lambda_grid, double p) {
    check_trajectory(traj, lambda_grid, p);
    PLMap map{{lambda_grid.begin(), lambda_grid.end()}, traj.t_ps,
              Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(traj.t_ps.size()),
                                    static_cast<Eigen::Index>(lambda_grid.size()))};
    for (std::size_t k = 0; k < traj.t_ps.size(); ++k) {
        const auto lines = row_lines(traj, k, p);
        for (std::size_t j = 0; j < lambda_grid.size(); ++j) {
            double s = 0.0;
            for (const Line& ln : lines) s += ln.area * lorentzian_area_normalized(lambda_grid[j], ln.center, ln.fwhm);
            map.intensity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = s;
        }
    }
    return map;
}

DecayCurve apply_filter(const PLMap& map, double lambda_c, double fwhm) {
    map.validate();
    if (!(fwhm > 0.0)) throw InvalidInput("apply_filter: filter FWHM must be > 0");
    if (!(lambda_c >= map.lambda_nm.front() && lambda_c <= map.lambda_nm.back())) {
        std::ostringstream os;
        os << "apply_filter: centre " << lambda_c << " nm outside the map grid [" << map.lambda_nm.front() << ", "
           << map.lambda_nm.back() << "] nm";
        throw InvalidInput(os.str());
    }
    const std::size_t nl = map.lambda_nm.size();
    std::vector<double> filt(nl);
    for (std::size_t j = 0; j < nl; ++j) {
        const double x = (map.lambda_nm[j] - lambda_c) / (0.5 * fwhm);
        filt[j] = 1.0 / (1.0 + x * x);
    }
    DecayCurve curve{map.t_ps, std::vector<double>(map.t_ps.size()), lambda_c, fwhm};
    std::vector<double> row(nl);
    for (std::size_t k = 0; k < map.t_ps.size(); ++k) {
        for (std::size_t j = 0; j < nl; ++j) row[j] = map.intensity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) * filt[j];
        curve.intensity[k] = trapz(map.lambda_nm, row.data(), 1);
    }
    return curve;
}

std::vector<double> integrated_intensity(const PLMap& map) {
    map.validate();
    std::vector<double> out(map.t_ps.size());
    const Eigen::MatrixXd rowmajor = map.intensity.transpose();  // contiguous rows
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = trapz(map.lambda_nm, rowmajor.data() + k * map.lambda_nm.size(), 1);
    }
    return out;
}

BurstMetrics burst_metrics(const DecayCurve& curve, double t_a, double t_b) {
    curve.validate();
    if (!(t_b > t_a)) throw InvalidInput("burst_metrics: baseline window must have t_b > t_a");
    const auto& t = curve.t_ps;
    const auto& y = curve.intensity;
    const std::size_t n = t.size();

    double sum = 0.0;
    std::size_t count = 0;
    std::size_t after = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (t[i] >= t_a && t[i] <= t_b) {
            sum += y[i];
            ++count;
        }
        if (after == n && t[i] > t_b) after = i;
    }
    if (count < 3) throw InvalidInput("burst_metrics: baseline window holds fewer than 3 samples");
    if (after == n) throw InvalidInput("burst_metrics: no samples after the baseline window");
    const double i0 = sum / static_cast<double>(count);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (t[i] >= t_a && t[i] <= t_b) var += (y[i] - i0) * (y[i] - i0);
    }
    const double sd = std::sqrt(var / static_cast<double>(count));

    std::size_t imax = after, imin = after;
    for (std::size_t i = after; i < n; ++i) {
        if (y[i] > y[imax]) imax = i;
        if (y[i] < y[imin]) imin = i;
    }
    const bool burst = (y[imax] - i0) >= (i0 - y[imin]);
    const std::size_t iext = burst ? imax : imin;
    const double dev = std::abs(y[iext] - i0);
    // the relative floor keeps round-off on a flat curve from registering as a feature
    if (dev <= std::max(3.0 * sd, 1e-9 * std::abs(i0)) || !(i0 > 0.0)) {
        throw NoFeature("burst_metrics: no feature beyond 3 baseline standard deviations");
    }

    BurstMetrics m;
    m.kind = burst ? FeatureKind::Burst : FeatureKind::Dip;
    m.baseline = i0;
    m.extremum_t_ps = t[iext];
    if (burst) {
        m.depth = y[iext] / i0;
    } else {
        if (!(y[iext] > 0.0)) throw NoFeature("burst_metrics: dip reaches zero intensity, depth undefined");
        m.depth = i0 / y[iext];
    }

    const double half = 0.5 * (i0 + y[iext]);
    const auto beyond = [&](double v) { return burst ? v < half : v > half; };
    const auto cross = [&](std::size_t a, std::size_t b) {
        return t[a] + (half - y[a]) * (t[b] - t[a]) / (y[b] - y[a]);
    };
    std::size_t l = iext;
    while (l > 0 && !beyond(y[l - 1])) --l;
    std::size_t r = iext;
    while (r + 1 < n && !beyond(y[r + 1])) ++r;
    if (l == 0 || r + 1 == n) throw NoFeature("burst_metrics: feature does not return to its half level inside the trace");
    m.fwhm_ps = cross(r, r + 1) - cross(l - 1, l);
    return m;
}

DecayCurve irf_convolve(const DecayCurve& curve, double sigma) {
    curve.validate();
    if (!(sigma >= 0.0)) throw InvalidInput("irf_convolve: sigma must be >= 0");
    if (sigma == 0.0 || curve.t_ps.size() < 2) return curve;
    const auto& t = curve.t_ps;
    const std::size_t n = t.size();
    std::vector<double> w(n, 0.0);  // trapezoidal weights
    for (std::size_t i = 1; i < n; ++i) {
        const double h = 0.5 * (t[i] - t[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    const double cut = 8.0 * sigma;
    const auto kernel = [&](double dt) { return std::exp(-0.5 * (dt / sigma) * (dt / sigma)); };

    DecayCurve out = curve;
    std::fill(out.intensity.begin(), out.intensity.end(), 0.0);
    // Each source sample scatters its trapezoidal area over the output grid with
    // weights normalized on that grid, so total area is preserved exactly.
    for (std::size_t j = 0; j < n; ++j) {
        const double src = w[j] * curve.intensity[j];
        if (src == 0.0) continue;
        const auto lo = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), t[j] - cut) - t.begin());
        const auto hi = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), t[j] + cut) - t.begin());
        double norm = 0.0;
        for (std::size_t i = lo; i < hi; ++i) norm += w[i] * kernel(t[i] - t[j]);
        if (!(norm > 0.0)) {
            out.intensity[j] += curve.intensity[j];
            continue;
        }
        for (std::size_t i = lo; i < hi; ++i) out.intensity[i] += src * kernel(t[i] - t[j]) / norm;
    }
    return out;
}

}  // namespace cqed
