#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "tailbound/bounds.hpp"
#include "tailbound/errors.hpp"
#include "tailbound/model.hpp"
#include "tailbound/potential.hpp"
#include "tailbound/rng.hpp"

namespace tailbound::walk_sim {

// Monte Carlo engines for the walk S_n = xi_1 + ... + xi_n: regenerative
// cycle sampling of (tau, S_tau, M_tau), stationary Lindley estimation of
// P(M > x), first-passage estimation, and live re-checks of certified drift
// inequalities.  All randomness is addressed by (seed, stream id): fixed seed
// and configuration reproduce results bit-for-bit at any thread count.

// Normal quantiles used for every confidence statement in this module.
inline constexpr double z99_two_sided = 2.5758293035489004;
inline constexpr double z999_one_sided = 3.0902323061678132;

// One regeneration cycle: tau = first n >= 1 with S_n <= 0, S_tau its landing
// point, M_tau the maximum over 0 <= n < tau (the prefix includes S_0 = 0, so
// M_tau >= 0).  A cycle still running at n_cap steps is returned truncated,
// with the state at the cap.
struct CycleSample {
    std::uint64_t tau = 0;
    double s_tau = 0.0;
    double m_tau = 0.0;
    bool truncated = false;

    bool operator==(const CycleSample&) const = default;
};

struct TauStats {
    double tau_mean = 0.0;
    double tau_ci = 0.0;  // 99% halfwidth
    double stau_mean = 0.0;
    double stau_ci = 0.0;
    double wald_residual = 0.0;  // |stau_mean + a * tau_mean|
    std::size_t n_used = 0;
    std::size_t n_truncated = 0;
};

struct LindleyEstimate {
    std::vector<double> x_grid;
    std::vector<double> p_hat;
    std::vector<double> ci_halfwidth;  // 99%, from the spread of replica means
    std::uint64_t steps_per_replica = 0;
    std::uint64_t burn_in = 0;
    int replicas = 0;
};

struct SupremumEstimate {
    double x = 0.0;
    double p_hat = 0.0;
    double ci_halfwidth = 0.0;  // 99% binomial
    double stop_level_K = 0.0;
    double bias_upper = 0.0;  // estimator is downward biased by at most this
    std::uint64_t n_paths = 0;
};

struct TailPoint {
    double p_hat = 0.0;
    double ci_halfwidth = 0.0;  // 99% binomial
};

struct DriftCheckRow {
    double t = 0.0;
    double mc_drift = 0.0;    // sampled E G(t - xi)
    double mc_se = 0.0;
    double quad_drift = 0.0;  // quadrature value of the same expectation
    double margin = 0.0;      // certificate-oriented sign: >= 0 is healthy
    bool sign_ok = false;     // margin >= -4 se
    bool quad_ok = false;     // |mc - quad| <= 4 se
};

struct DriftCheckReport {
    std::vector<DriftCheckRow> rows;
    std::vector<double> violations;  // t values with sign_ok false
    bool ok = false;                 // no violations and quadrature agrees
};

struct IglehartCheck {
    double x = 0.0;
    double lhs = 0.0;          // interpolated P(M > x)
    double cycle_term = 0.0;   // P(M_tau > x)
    double renewal_term = 0.0; // mean of 1{M_tau <= x} P(M > x - S_tau)
    double residual = 0.0;     // |lhs - cycle_term - renewal_term|
    double combined_ci = 0.0;
    bool ok = false;
};

// ---- cycle sampling ------------------------------------------------------

inline constexpr std::uint64_t kDefaultCycleCap = 10'000'000;

CycleSample run_cycle(const IncrementModel& m, RngStream& rng,
                      std::uint64_t n_cap = kDefaultCycleCap);

// n_cycles cycles, chunked over per-chunk RNG streams; identical output for
// any thread count.
std::vector<CycleSample> sample_cycles(const IncrementModel& m, std::size_t n_cycles,
                                       std::uint64_t seed,
                                       std::uint64_t n_cap = kDefaultCycleCap,
                                       int n_threads = 0);

double truncated_fraction(std::span<const CycleSample> samples);

// Fails (StatCheckError) when the truncated fraction exceeds max_fraction:
// under negative drift a truncated cycle is an anomaly, not a tail event.
void require_truncation_ok(std::span<const CycleSample> samples,
                           double max_fraction = 1e-6);

// Means, 99% confidence halfwidths, and the Wald residual |E S_tau + a E tau|
// over the untruncated samples.  All-truncated input is a ParameterError.
TauStats tau_stats(std::span<const CycleSample> samples, const IncrementModel& m);

// Fraction of untruncated cycles with M_tau > x, with 99% binomial halfwidth.
TailPoint mtau_tail(std::span<const CycleSample> samples, double x);

// Mean of exp(h0 * S_tau) over untruncated samples (all summands <= 1).
double exp_moment_stau(std::span<const CycleSample> samples, double h0);

// ---- stationary and first-passage estimators -----------------------------

// Iterate W <- (W + xi)^+ per replica from W = 0, discard burn_in steps, and
// time-average the indicators {W > x} over an ascending x_grid; mean and 99%
// confidence halfwidth across replica means (replicas are i.i.d., so no
// autocorrelation estimate is needed).  Requires steps > burn_in and at least
// two replicas.
LindleyEstimate lindley_tail(const IncrementModel& m, std::vector<double> x_grid,
                             std::uint64_t steps, std::uint64_t burn_in, int replicas,
                             std::uint64_t seed, int n_threads = 0);

// One-sided upper confidence curve p_hat + z * se on the Lindley grid, as a
// monotone interpolant.  z defaults to the 99.9% one-sided quantile.
bounds::TailCurve upper_confidence_curve(const LindleyEstimate& est,
                                         double z = z999_one_sided);

// First-passage estimate of P(M > x): run paths until S > x (hit) or
// S <= -K (stop).  Downward biased by at most bias_fn(x + K), where bias_fn
// is any valid pointwise upper bound on P(M > .): a stopped path could still
// have exceeded x only by first climbing from below -K, i.e. via a fresh
// supremum above x + K.  For x < 0 the probability is 1 by definition.
SupremumEstimate direct_sup_tail(const IncrementModel& m, double x, double stop_level_K,
                                 std::uint64_t n_paths, std::uint64_t seed,
                                 const std::function<double(double)>& bias_fn,
                                 int n_threads = 0);

// ---- certified-inequality and decomposition checks -----------------------

// Re-check a certificate's drift inequality by live sampling at the given
// states: at each t, estimate E G(t - xi) from n_draws fresh increments
// (capped potential for the submartingale kind, plain for the super), demand
// the certified sign within 4 standard errors, and cross-validate the
// quadrature drift operator against the sample mean.  The potential's plateau
// term is added in closed form rather than sampled, so states deep in the
// tail are not biased by overshoot events rarer than 1/n_draws.  Violations
// are reported, not thrown.
DriftCheckReport empirical_drift_check(const IncrementModel& m,
                                       const potential::Certificate& cert,
                                       std::span<const double> states,
                                       std::uint64_t n_draws, std::uint64_t seed,
                                       int n_threads = 0);

// Same, on n_states geometrically spaced over the certificate's verified
// range [t_min, t_max].
DriftCheckReport empirical_drift_check(const IncrementModel& m,
                                       const potential::Certificate& cert,
                                       int n_states, std::uint64_t n_draws,
                                       std::uint64_t seed, int n_threads = 0);

// One-cycle decomposition of the supremum tail,
//   P(M > x) = P(M_tau > x) + E[ 1{M_tau <= x} P(M > x - S_tau) ],
// checked with the Lindley curve standing in for P(M > .) (monotone
// piecewise-linear interpolation, clamped).  The residual must fit within the
// summed 99% confidence allowances of the three estimated pieces.
IglehartCheck iglehart_residual(const LindleyEstimate& est,
                                std::span<const CycleSample> cycles, double x);

// ---- binary cycle spill --------------------------------------------------

// Columnar little-endian layout: all tau (u64), all s_tau (f64), all m_tau
// (f64), all flags (u8, bit 0 = truncated); 25 bytes per sample, no header.
void write_cycles(const std::filesystem::path& path,
                  std::span<const CycleSample> samples);
std::vector<CycleSample> read_cycles(const std::filesystem::path& path);

}  // namespace tailbound::walk_sim
