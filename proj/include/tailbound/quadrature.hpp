#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <queue>
#include <string>
#include <vector>

#include "tailbound/errors.hpp"

namespace tailbound {

struct QuadOptions {
    double rel_tol = 1e-10;
    double abs_tol = 0.0;    // acceptance is err <= max(abs_tol, rel_tol * |value|)
    int max_intervals = 4000;
};

struct QuadResult {
    double value = 0.0;
    double error_estimate = 0.0;
    int intervals = 0;
};

namespace detail {

// 15-point Kronrod extension of 7-point Gauss (QUADPACK dqk15 constants).
inline constexpr double kXgk[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
};
inline constexpr double kWgk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
};
inline constexpr double kWg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
};

struct PanelEstimate {
    double kronrod;
    double error;
};

template <class F>
PanelEstimate gauss_kronrod_15(F&& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);

    const double fc = f(center);
    double result_gauss = kWg[3] * fc;
    double result_kronrod = kWgk[7] * fc;
    double resabs = kWgk[7] * std::abs(fc);

    double fv1[7], fv2[7];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        fv1[j] = f(center - dx);
        fv2[j] = f(center + dx);
        const double fsum = fv1[j] + fv2[j];
        result_kronrod += kWgk[j] * fsum;
        resabs += kWgk[j] * (std::abs(fv1[j]) + std::abs(fv2[j]));
        if (j % 2 == 1) result_gauss += kWg[j / 2] * fsum;
    }

    const double mean = 0.5 * result_kronrod;
    double resasc = kWgk[7] * std::abs(fc - mean);
    for (int j = 0; j < 7; ++j)
        resasc += kWgk[j] * (std::abs(fv1[j] - mean) + std::abs(fv2[j] - mean));

    result_gauss *= half;
    result_kronrod *= half;
    resabs *= std::abs(half);
    resasc *= std::abs(half);

    // QUADPACK's sharpened error estimate: the raw Gauss/Kronrod difference,
    // damped when it is small relative to the variation of f on the panel.
    double err = std::abs(result_kronrod - result_gauss);
    if (resasc != 0.0 && err != 0.0)
        err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    const double eps = std::numeric_limits<double>::epsilon();
    const double uflow = std::numeric_limits<double>::min();
    if (resabs > uflow / (50.0 * eps)) err = std::max(err, 50.0 * eps * resabs);

    return {result_kronrod, err};
}

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

}  // namespace detail

// Adaptive integration of f over the finite interval [a, b]: globally adaptive
// bisection, always splitting the panel with the largest error estimate.
template <class F>
QuadResult integrate_adaptive(F&& f, double a, double b, const QuadOptions& opt = {}) {
    if (!(std::isfinite(a) && std::isfinite(b)))
        throw ParameterError("integrate_adaptive: endpoints must be finite");
    if (a == b) return {0.0, 0.0, 0};
    double sign = 1.0;
    if (a > b) {
        std::swap(a, b);
        sign = -1.0;
    }

    std::priority_queue<detail::Panel> panels;
    auto first = detail::gauss_kronrod_15(f, a, b);
    panels.push({a, b, first.kronrod, first.error});
    double total = first.kronrod;
    double total_err = first.error;
    int count = 1;

    auto converged = [&] {
        return total_err <= std::max(opt.abs_tol, opt.rel_tol * std::abs(total));
    };

    while (!converged() && count < opt.max_intervals) {
        detail::Panel worst = panels.top();
        panels.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) {
            // Interval no longer splittable in double precision; put it back
            // and stop refining -- the remaining error is what it is.
            panels.push(worst);
            break;
        }
        auto left = detail::gauss_kronrod_15(f, worst.a, mid);
        auto right = detail::gauss_kronrod_15(f, mid, worst.b);
        total += left.kronrod + right.kronrod - worst.value;
        total_err += left.error + right.error - worst.error;
        panels.push({worst.a, mid, left.kronrod, left.error});
        panels.push({mid, worst.b, right.kronrod, right.error});
        ++count;
    }

    if (!converged()) {
        const double achieved =
            std::abs(total) > 0 ? total_err / std::abs(total) : total_err;
        throw QuadratureError(
            "integrate_adaptive: failed to reach tolerance (achieved relative error " +
                std::to_string(achieved) + " with " + std::to_string(count) + " intervals)",
            achieved);
    }
    return {sign * total, total_err, count};
}

// Integration of f over [a, +inf) through the map u = a + s/(1-s), s in [0,1),
// which compresses the tail; du = ds/(1-s)^2.
template <class F>
QuadResult integrate_to_infinity(F&& f, double a, const QuadOptions& opt = {}) {
    if (!std::isfinite(a))
        throw ParameterError("integrate_to_infinity: lower endpoint must be finite");
    auto mapped = [&f, a](double s) {
        const double om = 1.0 - s;
        const double u = a + s / om;
        if (!std::isfinite(u)) return 0.0;
        const double w = 1.0 / (om * om);
        const double fu = f(u);
        return std::isfinite(fu) ? fu * w : 0.0;
    };
    return integrate_adaptive(mapped, 0.0, 1.0, opt);
}

}  // namespace tailbound
