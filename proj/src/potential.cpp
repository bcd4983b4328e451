#include "tailbound/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tailbound/quadrature.hpp"

namespace tailbound {

std::vector<double> geometric_grid(double lo, double hi, int n) {
    if (!(lo > 0.0) || !(hi > lo))
        throw ParameterError("geometric_grid: need 0 < lo < hi");
    if (n < 2) throw ParameterError("geometric_grid: need at least 2 points");
    std::vector<double> g(n);
    const double ratio = std::log(hi / lo);
    for (int k = 0; k < n; ++k)
        g[k] = lo * std::exp(ratio * static_cast<double>(k) / (n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

}  // namespace tailbound

namespace tailbound::potential {

namespace {

constexpr double kTailFloor = 1e-280;  // below this the tail ratios are noise
constexpr double kQuadRel = 1e-12;

QuadOptions drift_quad_options() { return {kQuadRel, 1e-300, 4000}; }

double tail_product_integral(const IncrementModel& m, double lo, double hi, double t) {
    // int_lo^hi tail(y) * tail(t - y) dy, split at the midpoint because the
    // integrand typically peaks at both ends.
    if (hi <= lo) return 0.0;
    const double mid = 0.5 * (lo + hi);
    auto f = [&](double y) { return m.tail(y) * m.tail(t - y); };
    const auto left = integrate_adaptive(f, lo, mid, drift_quad_options());
    const auto right = integrate_adaptive(f, mid, hi, drift_quad_options());
    return left.value + right.value;
}

double negative_part_integral(const IncrementModel& m, double t) {
    // int over the negative support of cdf(z) * tail(t - z) dz
    const double lo = m.support_inf();
    if (lo >= 0.0) return 0.0;
    auto f = [&](double z) { return m.cdf(z) * m.tail(t - z); };
    return integrate_adaptive(f, lo, 0.0, drift_quad_options()).value;
}

void require_positive_t(double t, const char* who) {
    if (!(t > 0.0)) throw ParameterError(std::string(who) + ": requires t > 0");
}

double guarded_tail(const IncrementModel& m, double t, const char* who) {
    const double ft = m.tail(t);
    if (ft < kTailFloor)
        throw DomainError(std::string(who) + ": tail underflow at t = " + std::to_string(t));
    return ft;
}

}  // namespace

double threshold_r(const IncrementModel& m, double c) {
    if (!(c > 0.0)) throw ParameterError("threshold_r: requires c > 0");
    if (m.integrated_tail(0.0) <= c) return 0.0;
    double lo = 0.0, hi = 1.0;
    while (m.integrated_tail(hi) > c) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw DomainError("threshold_r: no finite switch point found");
    }
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;  // interval below one ulp at this magnitude
        (m.integrated_tail(mid) > c ? lo : hi) = mid;
    }
    return hi;  // integrated_tail(hi) <= c by the bracket invariant
}

TailPotential make_potential(const IncrementModel& m, double c) {
    return {c, threshold_r(m, c)};
}

double potential_value(const IncrementModel& m, double c, double x) {
    if (!(c > 0.0)) throw ParameterError("potential_value: requires c > 0");
    return x < 0.0 ? c : m.integrated_tail(x);
}

double potential_value_capped(const IncrementModel& m, const TailPotential& pot, double x) {
    return x < pot.r_c ? pot.c : m.integrated_tail(x);
}

double drift_capped(const IncrementModel& m, const TailPotential& pot, double t) {
    if (t < pot.r_c)
        throw DomainError("drift_capped: requires t >= r_c (capped region boundary)");
    const double T = t - pot.r_c;
    // E min(G_c, c)(t - xi) written without the density:
    //   c F(T) - F(T) Gs(r_c) + Gs(t) + int_0^T tail*tail - negative part,
    // with F = tail of xi and Gs = integrated tail.
    const double ft_T = m.tail(T);
    const double boundary = pot.c * ft_T - ft_T * m.integrated_tail(pot.r_c);
    const double conv = tail_product_integral(m, 0.0, T, t);
    return boundary + m.integrated_tail(t) + conv - negative_part_integral(m, t);
}

double drift_capped(const IncrementModel& m, double c, double t) {
    return drift_capped(m, make_potential(m, c), t);
}

double drift_plain(const IncrementModel& m, double c, double t) {
    if (!(c > 0.0)) throw ParameterError("drift_plain: requires c > 0");
    require_positive_t(t, "drift_plain");
    const double conv = tail_product_integral(m, 0.0, t, t);
    return m.integrated_tail(t) + (c - m.moments().a_plus) * m.tail(t) + conv -
           negative_part_integral(m, t);
}

double sstar_ratio(const IncrementModel& m, double t) {
    require_positive_t(t, "sstar_ratio");
    const double ft = guarded_tail(m, t, "sstar_ratio");
    // folded form of the tail self-product over [0, t]
    return 2.0 * tail_product_integral(m, 0.0, 0.5 * t, t) / ft;
}

double subexp_ratio(const IncrementModel& m, double t) {
    require_positive_t(t, "subexp_ratio");
    if (m.family() == Family::point_mass)
        throw ParameterError("subexp_ratio: requires an absolutely continuous law");
    // Self-convolution ratio of the underlying nonnegative jump Y = xi + mu
    // (t in jump coordinates): int_0^t jump_tail(t-y) jump_density(y) dy over
    // jump_tail(t).  Settles near 1 for subexponential jumps, diverges for
    // light tails.
    const double mu = -m.support_inf();
    const double ft = m.tail(t - mu);
    if (ft < kTailFloor)
        throw DomainError("subexp_ratio: tail underflow at t = " + std::to_string(t));
    const double mid = 0.5 * t;
    auto f = [&](double y) { return m.density(y - mu) * m.tail(t - y - mu); };
    const auto left = integrate_adaptive(f, 0.0, mid, drift_quad_options());
    const auto right = integrate_adaptive(f, mid, t, drift_quad_options());
    return (left.value + right.value) / ft;
}

double longtail_ratio(const IncrementModel& m, double t, double y) {
    require_positive_t(t, "longtail_ratio");
    return m.tail(t - y) / guarded_tail(m, t, "longtail_ratio");
}

double longtail_integral_ratio(const IncrementModel& m, double t) {
    require_positive_t(t, "longtail_integral_ratio");
    const double ft = guarded_tail(m, t, "longtail_integral_ratio");
    return negative_part_integral(m, t) / ft;
}

std::string kind_name(CertKind k) { return k == CertKind::sub ? "sub" : "super"; }

namespace {

struct ScanCurve {
    std::vector<CurvePoint> points;  // (t, value, threshold)
    std::vector<bool> ok;
};

// Evaluate `value(t)` against `ok(value)` over the grid; evaluation failures
// past the representable range count as not-ok (the condition cannot be
// verified there, so certification must not silently pass through).
template <class ValueFn, class OkFn>
ScanCurve scan_condition(const std::vector<double>& grid, double threshold, ValueFn value,
                         OkFn ok) {
    ScanCurve out;
    out.points.reserve(grid.size());
    out.ok.reserve(grid.size());
    for (double t : grid) {
        double v;
        bool good;
        try {
            v = value(t);
            good = ok(v);
        } catch (const DomainError&) {
            v = std::numeric_limits<double>::quiet_NaN();
            good = false;
        }
        out.points.push_back({t, v, threshold});
        out.ok.push_back(good);
    }
    return out;
}

// First grid point from which the condition holds through the end of the
// grid; -1 if there is none.
int first_suffix_ok(const std::vector<bool>& ok) {
    int idx = -1;
    for (int i = static_cast<int>(ok.size()) - 1; i >= 0; --i) {
        if (!ok[static_cast<size_t>(i)]) break;
        idx = i;
    }
    return idx;
}

CurvePoint worst_failure(const ScanCurve& sc) {
    // last failing point with a reportable value; NaN entries (underflow
    // region) only if nothing better exists
    CurvePoint fallback = sc.points.back();
    bool have_fallback = false;
    for (int i = static_cast<int>(sc.ok.size()) - 1; i >= 0; --i) {
        if (sc.ok[static_cast<size_t>(i)]) continue;
        const auto& p = sc.points[static_cast<size_t>(i)];
        if (!std::isnan(p.value)) return p;
        if (!have_fallback) {
            fallback = p;
            have_fallback = true;
        }
    }
    return fallback;
}

// Certificate provenance echo of the law; the test-only degenerate family is
// not serializable through the config path, so it gets an inline marker.
nlohmann::json model_echo(const IncrementModel& m) {
    if (m.family() == Family::point_mass)
        return {{"family", "point_mass"}, {"m", m.shift()}};
    return m.to_json();
}

// Does |value - limit| settle monotonically (nonincreasing) over the curve
// restricted to t >= t_split?  Small numerical wiggle is tolerated.
bool deviation_settles(const std::vector<CurvePoint>& pts, double t_split, double limit) {
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) {
        if (p.t < t_split || std::isnan(p.value)) continue;
        const double dev = std::abs(p.value - limit);
        if (dev > prev + 1e-10 * std::max(1.0, prev)) return false;
        prev = dev;
    }
    return true;
}

struct GridSetup {
    double t_max;
    std::vector<double> scan_grid;
};

GridSetup resolve_grids(const GridSpec& grid, double r_c) {
    if (!(grid.t_floor > 0.0)) throw ParameterError("grid: t_floor must be positive");
    if (grid.points < 8) throw ParameterError("grid: need at least 8 verification points");
    const double t_max = grid.t_max > 0.0 ? grid.t_max : 1e3 * (1.0 + r_c);
    if (!(t_max > grid.t_floor))
        throw ParameterError("grid: t_max must exceed t_floor");
    const int scan_points = std::max(1024, 2 * grid.points);
    return {t_max, geometric_grid(grid.t_floor, t_max, scan_points)};
}

// Shared drift-margin verification over a geometric grid.
template <class MarginFn>
void verify_margins(const std::vector<double>& grid, double tolerance, MarginFn margin_at,
                    std::vector<DriftReport>& curve, Certificate& cert) {
    curve.reserve(grid.size());
    double min_margin = std::numeric_limits<double>::infinity();
    double argmin = grid.front();
    for (double t : grid) {
        DriftReport r = margin_at(t);
        if (r.margin < min_margin) {
            min_margin = r.margin;
            argmin = t;
        }
        curve.push_back(r);
    }
    cert.min_margin = min_margin;
    cert.argmin_t = argmin;
    if (min_margin < -tolerance) {
        std::vector<CurvePoint> cps;
        cps.reserve(curve.size());
        for (const auto& r : curve) cps.push_back({r.t, r.margin, 0.0});
        throw CertificationError("drift margin " + std::to_string(min_margin) +
                                     " below -tolerance at t = " + std::to_string(argmin),
                                 argmin, min_margin, std::move(cps));
    }
}

}  // namespace

CertifyResult certify_sub(const IncrementModel& m, double epsilon, GridSpec grid,
                          double tolerance) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw ParameterError("certify_sub: requires epsilon > 0");
    if (!(tolerance > 0.0)) throw ParameterError("certify_sub: tolerance must be positive");

    const double a = m.moments().a;
    const double a_plus = m.moments().a_plus;
    const double c = a + epsilon;
    TailPotential pot = make_potential(m, c);
    auto setup = resolve_grids(grid, pot.r_c);

    // Side condition one, in closed form: the folded tail-product mass
    // 2 * int_0^{t/2} tail exceeds 2 a_plus - eps/2 exactly when the
    // integrated tail at t/2 has dropped to eps/4.
    const double R1 = 2.0 * threshold_r(m, 0.25 * epsilon);

    // Side condition two: the plateau-width tail ratio
    // (tail(t - r_c) - tail(t)) / tail(t) must fall below eps / (4 a_plus).
    double R2 = 0.0;
    bool ratio_monotone = true;
    if (pot.r_c > 0.0 && a_plus > 0.0) {
        const double cap = 0.25 * epsilon / a_plus;
        auto sc = scan_condition(
            setup.scan_grid, cap,
            [&](double t) { return longtail_ratio(m, t, pot.r_c) - 1.0; },
            [&](double v) { return v <= cap; });
        const int idx = first_suffix_ok(sc.ok);
        if (idx < 0) {
            const auto w = worst_failure(sc);
            throw CertificationError(
                "plateau-width tail-ratio condition not met by t_max = " +
                    std::to_string(setup.t_max) + " (worst at t = " + std::to_string(w.t) + ")",
                w.t, w.value, sc.points);
        }
        R2 = sc.points[static_cast<size_t>(idx)].t;
        ratio_monotone = deviation_settles(sc.points, 0.5 * setup.t_max, 0.0);
    }

    Certificate cert{};
    cert.kind = CertKind::sub;
    cert.epsilon = epsilon;
    cert.c = c;
    cert.r_c = pot.r_c;
    cert.thresholds = {R1, R2};
    cert.R = std::max({R1, R2, pot.r_c});
    cert.t_max = setup.t_max;
    cert.grid_points = grid.points;
    cert.tolerance = tolerance;
    cert.ratio_monotone = ratio_monotone;
    cert.model = model_echo(m);

    const double t_lo = std::max(cert.R, grid.t_floor);
    cert.t_min = t_lo;
    auto vgrid = geometric_grid(t_lo, setup.t_max, grid.points);

    CertifyResult out;
    out.cert = cert;
    verify_margins(
        vgrid, tolerance,
        [&](double t) {
            const double drift = drift_capped(m, pot, t);
            const double g = potential_value_capped(m, pot, t);
            return DriftReport{t, drift, g, drift - g};
        },
        out.curve, out.cert);
    return out;
}

CertifyResult certify_super(const IncrementModel& m, double epsilon, GridSpec grid,
                            double tolerance) {
    const double a = m.moments().a;
    if (!(epsilon > 0.0) || !(epsilon < a))
        throw ParameterError("certify_super: requires 0 < epsilon < a");
    if (!(tolerance > 0.0)) throw ParameterError("certify_super: tolerance must be positive");

    const double a_plus = m.moments().a_plus;
    const double a_minus = m.moments().a_minus;
    const double c = a - epsilon;
    const double r_c = threshold_r(m, c);
    auto setup = resolve_grids(grid, r_c);

    // Side condition one: the tail self-product ratio must stay at or below
    // 2 a_plus + eps/2 from the threshold on.
    const double cap1 = 2.0 * a_plus + 0.5 * epsilon;
    auto sc1 = scan_condition(
        setup.scan_grid, cap1, [&](double t) { return sstar_ratio(m, t); },
        [&](double v) { return v <= cap1; });
    const int idx1 = first_suffix_ok(sc1.ok);
    if (idx1 < 0) {
        const auto w = worst_failure(sc1);
        throw CertificationError(
            "tail self-product ratio stays above " + std::to_string(cap1) +
                " through t_max = " + std::to_string(setup.t_max) +
                "; the law is too light-tailed for this construction (worst at t = " +
                std::to_string(w.t) + ")",
            w.t, w.value, sc1.points);
    }

    // Side condition two: the negative-part integral ratio must have climbed
    // back to a_minus - eps/2 (it converges to a_minus from below).
    const double floor2 = a_minus - 0.5 * epsilon;
    auto sc2 = scan_condition(
        setup.scan_grid, floor2, [&](double t) { return longtail_integral_ratio(m, t); },
        [&](double v) { return v >= floor2; });
    const int idx2 = first_suffix_ok(sc2.ok);
    if (idx2 < 0) {
        const auto w = worst_failure(sc2);
        throw CertificationError(
            "negative-part integral ratio stays below " + std::to_string(floor2) +
                " through t_max = " + std::to_string(setup.t_max) + " (worst at t = " +
                std::to_string(w.t) + ")",
            w.t, w.value, sc2.points);
    }

    Certificate cert{};
    cert.kind = CertKind::super;
    cert.epsilon = epsilon;
    cert.c = c;
    cert.r_c = r_c;
    cert.thresholds = {sc1.points[static_cast<size_t>(idx1)].t,
                       sc2.points[static_cast<size_t>(idx2)].t};
    cert.R = std::max(cert.thresholds.R1, cert.thresholds.R2);
    cert.t_max = setup.t_max;
    cert.grid_points = grid.points;
    cert.tolerance = tolerance;
    cert.ratio_monotone = deviation_settles(sc1.points, 0.5 * setup.t_max, 2.0 * a_plus) &&
                          deviation_settles(sc2.points, 0.5 * setup.t_max, a_minus);
    cert.model = model_echo(m);

    const double t_lo = std::max(cert.R, grid.t_floor);
    cert.t_min = t_lo;
    auto vgrid = geometric_grid(t_lo, setup.t_max, grid.points);

    CertifyResult out;
    out.cert = cert;
    verify_margins(
        vgrid, tolerance,
        [&](double t) {
            const double drift = drift_plain(m, c, t);
            const double g = potential_value(m, c, t);
            return DriftReport{t, drift, g, g - drift};
        },
        out.curve, out.cert);
    return out;
}

nlohmann::json Certificate::to_json() const {
    return {
        {"kind", kind_name(kind)},
        {"epsilon", epsilon},
        {"c", c},
        {"r_c", r_c},
        {"R", R},
        {"R1", thresholds.R1},
        {"R2", thresholds.R2},
        {"t_min", t_min},
        {"t_max", t_max},
        {"grid_points", grid_points},
        {"tolerance", tolerance},
        {"min_margin", min_margin},
        {"argmin_t", argmin_t},
        {"ratio_monotone", ratio_monotone},
        {"side_conditions",
         kind == CertKind::sub
             ? "R1: folded tail-product mass at eps/4; R2: plateau-width tail ratio at "
               "eps/(4 a_plus); drift of the capped potential verified on the grid"
             : "R1: tail self-product ratio <= 2 a_plus + eps/2; R2: negative-part "
               "integral ratio >= a_minus - eps/2 (lower threshold); drift of the plain "
               "potential verified on the grid"},
        {"model", model},
    };
}

Certificate Certificate::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("certificate: expected a JSON object");
    for (const char* key : {"kind", "epsilon", "R", "t_max", "min_margin", "R1", "R2"})
        if (!j.contains(key))
            throw ConfigError(std::string("certificate: missing field \"") + key + "\"");
    Certificate c{};
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "sub")
        c.kind = CertKind::sub;
    else if (kind == "super")
        c.kind = CertKind::super;
    else
        throw ConfigError("certificate: unknown kind \"" + kind + "\"");
    c.epsilon = j.at("epsilon").get<double>();
    c.R = j.at("R").get<double>();
    c.t_max = j.at("t_max").get<double>();
    c.min_margin = j.at("min_margin").get<double>();
    c.thresholds.R1 = j.at("R1").get<double>();
    c.thresholds.R2 = j.at("R2").get<double>();
    c.c = j.value("c", 0.0);
    c.r_c = j.value("r_c", 0.0);
    c.t_min = j.value("t_min", c.R);
    c.grid_points = j.value("grid_points", 0);
    c.tolerance = j.value("tolerance", 1e-9);
    c.argmin_t = j.value("argmin_t", 0.0);
    c.ratio_monotone = j.value("ratio_monotone", false);
    if (j.contains("model")) c.model = j.at("model");
    return c;
}

}  // namespace tailbound::potential
