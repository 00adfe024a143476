#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "cqed/error.hpp"

namespace cqed {

struct OdeOptions {
    double rtol = 1e-8;
    double atol = 1e-12;
    double h_max = std::numeric_limits<double>::infinity();
    double fixed_step = 0.0;  // > 0 disables error control
    long max_steps = 50'000'000;
};

struct OdeStats {
    long steps = 0;
    long rejected = 0;
    long evaluations = 0;
};

/// Dormand-Prince 5(4) on a complex state vector, from t0 to exactly t1.
///
/// rhs(t, y, dy, at_end) must fill dy; at_end is true only for stages evaluated at
/// t1 itself, so callers can use left limits of quantities that jump at t1.
/// `h` carries the step size in and out so consecutive segments reuse it.
template <class Rhs>
void dopri5_integrate(Rhs&& rhs, double t0, double t1, Eigen::VectorXcd& y, double& h, const OdeOptions& opt,
                      OdeStats& stats) {
    if (!(t1 > t0)) return;

    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;

    const Eigen::Index n = y.size();
    Eigen::VectorXcd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n);

    const bool fixed = opt.fixed_step > 0.0;
    const double h_max = std::min(opt.h_max, t1 - t0);
    if (fixed) {
        h = opt.fixed_step;
    } else if (!(h > 0.0)) {
        h = 1e-3 * (t1 - t0);
    }
    h = std::min(h, h_max);

    double t = t0;
    rhs(t, y, k1, false);
    ++stats.evaluations;

    while (t < t1) {
        if (stats.steps >= opt.max_steps) {
            std::ostringstream os;
            os << "integrator step budget exhausted at t = " << t << " s";
            throw NumericalFailure(os.str());
        }
        bool last = false;
        const double proposed = std::min(h, h_max);
        double step = proposed;
        if (t + step >= t1 || t1 - (t + step) < 1e-9 * step) {
            step = t1 - t;
            last = true;
        }
        const double tiny = 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), std::abs(t1));
        if (step <= tiny) {
            std::ostringstream os;
            os << "step-size underflow at t = " << t << " s (step " << step << " s)";
            throw NumericalFailure(os.str());
        }
        const double t_end = last ? t1 : t + step;

        tmp = y + step * (a21 * k1);
        rhs(t + c2 * step, tmp, k2, false);
        tmp = y + step * (a31 * k1 + a32 * k2);
        rhs(t + c3 * step, tmp, k3, false);
        tmp = y + step * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(t + c4 * step, tmp, k4, false);
        tmp = y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(t + c5 * step, tmp, k5, false);
        tmp = y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs(t_end, tmp, k6, last);
        ynew = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        rhs(t_end, ynew, k7, last);
        stats.evaluations += 6;

        if (fixed) {
            if (!ynew.allFinite()) throw NumericalFailure("non-finite state in fixed-step integration");
            y.swap(ynew);
            k1.swap(k7);
            t = t_end;
            ++stats.steps;
            continue;
        }

        double err = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const std::complex<double> e = step * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err += std::norm(e / sc);  // scale first so huge states cannot overflow the square
        }
        err = std::sqrt(err / static_cast<double>(n));
        if (!std::isfinite(err)) err = 1e10;

        if (err <= 1.0) {
            y.swap(ynew);
            k1.swap(k7);
            t = t_end;
            ++stats.steps;
            const double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
            h = step * std::clamp(fac, 0.2, 5.0);
            // a step clipped to land on t1 says nothing about the next segment
            if (last) h = std::max(h, proposed);
        } else {
            ++stats.rejected;
            h = step * std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
            const double tiny_next =
                16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), std::abs(t1));
            if (h <= tiny_next) {
                std::ostringstream os;
                os << "step-size underflow at t = " << t << " s (step " << h << " s, error estimate " << err << ")";
                throw NumericalFailure(os.str());
            }
        }
    }
}

}  // namespace cqed
