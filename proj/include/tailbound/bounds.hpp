#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tailbound/errors.hpp"
#include "tailbound/model.hpp"
#include "tailbound/potential.hpp"

namespace tailbound::bounds {

using potential::CertKind;
using potential::Certificate;

// Closed-form asymptotics and certificate-backed inequalities for the tails of
// the all-time supremum M and the first-cycle maximum M_tau of the walk.
// Every function returns a probability, clamped to [0, 1] after evaluation.

// Veraverbecke asymptotic P(M > x) ~ integrated_tail(x) / a.  Not a bound:
// accurate only once x is well into the tail.
double veraverbecke(const IncrementModel& m, double x);

// Foss-Korshunov-Zachary lower bound integrated_tail(x) / (a +
// integrated_tail(x)).  Holds for every x and every negative-drift law, no
// certificate needed.
double fkz_lower_bound(const IncrementModel& m, double x);

// Submartingale-certificate lower bound integrated_tail(x + R) / (a + eps).
// Requires cert.kind == sub.
double lower_bound_M(const IncrementModel& m, const Certificate& cert, double x);

// Supermartingale-certificate upper bound integrated_tail(x - R - r) /
// (a - eps), where r is a level with P(M > r) <= integrated_tail(R) /
// (a - eps) (see choose_r).  Vacuous for x <= R + r: DomainError.
double upper_bound_M(const IncrementModel& m, const Certificate& cert, double r,
                     double x);

// Cycle-maximum upper bound (a / (a - eps)) * tau_mean * tail(x - R - r),
// with tau_mean the upper confidence edge of the estimated mean cycle length
// (Wald's identity supplies the a * E tau factor).  Same domain as
// upper_bound_M.
double upper_bound_Mtau(const IncrementModel& m, const Certificate& cert, double r,
                        double tau_mean, double x);

// Cycle-maximum lower bound
//   (integrated_tail(x + R) - mean_i integrated_tail(x + R - stau_i)) /
//   (a + eps),
// floored at zero.  stau_samples are simulated cycle-end positions S_tau
// (all <= 0); empty input is a ParameterError.
double lower_bound_Mtau(const IncrementModel& m, const Certificate& cert,
                        std::span<const double> stau_samples, double x);

// Cycle-maximum asymptotic P(M_tau > x) ~ tau_mean * tail(x).
double asymp_Mtau(const IncrementModel& m, double tau_mean, double x);

struct RChoice {
    double r;          // smallest admissible grid value
    double threshold;  // integrated_tail(cert.R) / (a - eps)
};

// Scan r_grid (ascending) for the first r whose supremum-tail upper bound
// drops below integrated_tail(R) / (a - eps); that level makes upper_bound_M
// valid beyond R + r.  sup_tail_upper must be a pointwise upper bound on
// P(M > .) -- typically a one-sided Monte Carlo confidence curve; its
// statistical character is the caller's to track.  No admissible r below the
// grid cap is a NoRootError.
RChoice choose_r(const IncrementModel& m, const Certificate& cert,
                 const std::function<double(double)>& sup_tail_upper,
                 std::span<const double> r_grid);

// Light-tail (Cramer-Lundberg) baseline: the exponent h0 > 0 solving
// E exp(h0 xi) = 1, found by bracketed bisection on (0, mgf_sup).
struct LundbergBaseline {
    double h0 = 0.0;
    double residual = 0.0;  // |E exp(h0 xi) - 1| at the accepted root
    // Filled when cycle-end samples are supplied: mean exp(h0 S_tau) and the
    // local prefactor 1 - mean exp(h0 S_tau).
    std::optional<double> exp_moment_stau;
    std::optional<double> cl_prefactor;

    // Doob's inequality for the exponential martingale: P(M > x) <= exp(-h0 x).
    double doob(double x) const;
};

// Heavy-tailed model (divergent moment generating function): NoExponentError.
// Finite mgf but E exp(h xi) < 1 on the whole searchable range (e.g. bounded
// increments with no upcrossing mass): NoRootError.
LundbergBaseline lundberg(const IncrementModel& m,
                          std::span<const double> stau_samples = {});

// Monotone nonincreasing piecewise-linear interpolant through (x_i, p_i),
// clamped to [0, 1].  Values are repaired to be nonincreasing by a running
// minimum (the underlying curve P(M > .) is a tail, so the repair keeps a
// pointwise upper bound an upper bound).  Flat extension outside the grid.
class TailCurve {
public:
    TailCurve(std::vector<double> xs, std::vector<double> ps);

    double operator()(double x) const;

    const std::vector<double>& grid() const { return x_; }
    const std::vector<double>& values() const { return p_; }

private:
    std::vector<double> x_;
    std::vector<double> p_;
};

// One row of the assembled bound table.  Cells are empty when the inputs
// needed to evaluate them were not supplied, or when the bound is vacuous at
// this x (then `note` says why).
struct BoundRow {
    double x = 0.0;
    std::optional<double> lower_M;
    std::optional<double> upper_M;
    std::optional<double> fkz_lower;
    std::optional<double> asymp_M;
    std::optional<double> lower_Mtau;
    std::optional<double> upper_Mtau;
    std::optional<double> asymp_Mtau;
    std::optional<double> doob;
    std::string note;
};

struct BoundInputs {
    const Certificate* sub = nullptr;
    const Certificate* super = nullptr;
    std::optional<double> r;               // level from choose_r; enables upper bounds
    std::optional<double> tau_mean;        // point estimate, asymptotic column
    std::optional<double> tau_mean_upper;  // upper confidence edge, upper bound column
    std::span<const double> stau_samples;
    const LundbergBaseline* light_tail = nullptr;
};

struct BoundTable {
    std::vector<BoundRow> rows;
    nlohmann::json provenance;
};

// Evaluate every column the inputs allow over x_grid (strictly increasing).
// The row invariants lower_M <= upper_M and fkz_lower <= upper_M are verified
// on every populated row; a violation means an input (typically the level r)
// was not the valid bound it claimed to be, and raises StatCheckError.
BoundTable build_bound_table(const IncrementModel& m, std::span<const double> x_grid,
                             const BoundInputs& in);

}  // namespace tailbound::bounds
