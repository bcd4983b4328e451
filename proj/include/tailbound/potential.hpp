#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "tailbound/errors.hpp"
#include "tailbound/model.hpp"

namespace tailbound::potential {

// Plateau potential built from the integrated tail of the increment law:
//   G_c(x) = integrated_tail(x) for x >= 0,  c for x < 0,
// and its capped variant  Ghat_c = min(G_c, c), which is constant (= c) below
// the switch point r_c = min{x >= 0 : integrated_tail(x) <= c}.
//
// certify_sub establishes that Ghat_{a+eps}(t - S_n) is a submartingale while
// the walk stays above a threshold, certify_super that G_{a-eps}(t - S_n) is a
// supermartingale; both by verifying the one-step drift inequality on a
// geometric grid after locating the thresholds demanded by the closed-form
// side conditions.

struct TailPotential {
    double c;
    double r_c;
};

// Smallest x >= 0 with integrated_tail(x) <= c (0 if that already holds at 0).
// Bisection to absolute width 1e-12; the returned point satisfies the
// inequality, so it is always a valid switch point.
double threshold_r(const IncrementModel& m, double c);

TailPotential make_potential(const IncrementModel& m, double c);

double potential_value(const IncrementModel& m, double c, double x);          // G_c
double potential_value_capped(const IncrementModel& m, const TailPotential& pot,
                              double x);  // min(G_c, c)

// One-step expectations E G(t - xi), evaluated density-free through the
// integration-by-parts form (boundary terms plus two tail-product integrals).
// drift_capped requires t >= r_c.
double drift_capped(const IncrementModel& m, const TailPotential& pot, double t);
double drift_capped(const IncrementModel& m, double c, double t);
double drift_plain(const IncrementModel& m, double c, double t);

// Diagnostic tail ratios.  All require t > 0 and throw DomainError once the
// tail has underflowed to the point where the ratio is meaningless.
double sstar_ratio(const IncrementModel& m, double t);        // -> 2 a_plus if S*
double subexp_ratio(const IncrementModel& m, double t);       // truncated self-convolution
double longtail_ratio(const IncrementModel& m, double t, double y);  // tail(t-y)/tail(t)
double longtail_integral_ratio(const IncrementModel& m, double t);   // -> a_minus

enum class CertKind { sub, super };

struct DriftReport {
    double t;
    double drift;      // E G(t - xi)
    double potential;  // G(t)
    double margin;     // sub: drift - potential; super: potential - drift
};

struct SideThresholds {
    double R1 = 0.0;
    double R2 = 0.0;
};

struct GridSpec {
    double t_floor = 1e-3;  // lowest t ever evaluated
    double t_max = 0.0;     // 0 means auto: 1e3 * (1 + r_c)
    int points = 512;       // geometric verification grid size
};

struct Certificate {
    CertKind kind;
    double epsilon;
    double c;
    double r_c;
    double R;  // max of the side-condition thresholds (and r_c for the capped kind)
    SideThresholds thresholds;
    double t_min;  // first grid point actually verified
    double t_max;
    int grid_points;
    double tolerance;
    double min_margin;
    double argmin_t;
    bool ratio_monotone;  // side-condition curves settle monotonically on [t_max/2, t_max]
    nlohmann::json model;

    nlohmann::json to_json() const;
    static Certificate from_json(const nlohmann::json& j);
};

struct CertifyResult {
    Certificate cert;
    std::vector<DriftReport> curve;
};

// Certify the submartingale property of Ghat_{a+eps}(t - .) above a threshold.
// Throws CertificationError (with the offending curve) if a side condition
// cannot be met by t_max or the drift margin dips below -tolerance.
CertifyResult certify_sub(const IncrementModel& m, double epsilon, GridSpec grid = {},
                          double tolerance = 1e-9);

// Certify the supermartingale property of G_{a-eps}(t - .).  Requires
// 0 < epsilon < a.  Fails honestly (CertificationError) for laws that are not
// square-root-insensitive enough for the tail-product condition to hold.
CertifyResult certify_super(const IncrementModel& m, double epsilon, GridSpec grid = {},
                            double tolerance = 1e-9);

std::string kind_name(CertKind k);

}  // namespace tailbound::potential

namespace tailbound {
// n points geometrically spaced on [lo, hi] (inclusive); requires 0 < lo < hi.
std::vector<double> geometric_grid(double lo, double hi, int n);
}
