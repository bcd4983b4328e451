#include "tailbound/walk_sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "tailbound/parallel.hpp"

namespace tailbound::walk_sim {

namespace {

constexpr std::size_t kCycleChunk = std::size_t{1} << 16;
constexpr std::size_t kPathChunk = std::size_t{1} << 13;

void require_grid(std::span<const double> grid, const char* who) {
    if (grid.empty()) throw ParameterError(std::string(who) + ": empty grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(grid[i]) || (i > 0 && !(grid[i] > grid[i - 1])))
            throw ParameterError(std::string(who) +
                                 ": grid must be finite and strictly increasing");
    }
}

double binomial_ci99(double p, double n) {
    return z99_two_sided * std::sqrt(std::max(0.0, p * (1.0 - p)) / n);
}

// Linear interpolation without monotone repair, for confidence-halfwidth
// curves; flat extension outside the grid, floored at zero.
double lerp_on_grid(const std::vector<double>& xs, const std::vector<double>& vs,
                    double x) {
    if (x <= xs.front()) return std::max(0.0, vs.front());
    if (x >= xs.back()) return std::max(0.0, vs.back());
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs.begin());
    const double w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return std::max(0.0, vs[i - 1] + w * (vs[i] - vs[i - 1]));
}

}  // namespace

CycleSample run_cycle(const IncrementModel& m, RngStream& rng, std::uint64_t n_cap) {
    if (n_cap < 1) throw ParameterError("run_cycle: n_cap must be >= 1");
    double s = 0.0;
    double mx = 0.0;
    for (std::uint64_t n = 1; n <= n_cap; ++n) {
        s += m.sample(rng);
        if (s <= 0.0) return {n, s, mx, false};
        if (s > mx) mx = s;
    }
    return {n_cap, s, mx, true};
}

std::vector<CycleSample> sample_cycles(const IncrementModel& m, std::size_t n_cycles,
                                       std::uint64_t seed, std::uint64_t n_cap,
                                       int n_threads) {
    std::vector<CycleSample> out(n_cycles);
    const std::size_t n_chunks = (n_cycles + kCycleChunk - 1) / kCycleChunk;
    parallel_for(n_chunks, n_threads, [&](std::size_t c) {
        RngStream rng(seed, stream_domain::cycles + c);
        const std::size_t lo = c * kCycleChunk;
        const std::size_t hi = std::min(n_cycles, lo + kCycleChunk);
        for (std::size_t i = lo; i < hi; ++i) out[i] = run_cycle(m, rng, n_cap);
    });
    return out;
}

double truncated_fraction(std::span<const CycleSample> samples) {
    if (samples.empty()) return 0.0;
    std::size_t t = 0;
    for (const auto& s : samples) t += s.truncated ? 1 : 0;
    return static_cast<double>(t) / static_cast<double>(samples.size());
}

void require_truncation_ok(std::span<const CycleSample> samples, double max_fraction) {
    const double f = truncated_fraction(samples);
    if (f > max_fraction)
        throw StatCheckError("truncated cycle fraction " + std::to_string(f) +
                             " exceeds " + std::to_string(max_fraction) +
                             "; the walk is not draining as certified");
}

TauStats tau_stats(std::span<const CycleSample> samples, const IncrementModel& m) {
    TauStats st;
    double tau_acc = 0.0, stau_acc = 0.0;
    for (const auto& s : samples) {
        if (s.truncated) {
            ++st.n_truncated;
            continue;
        }
        ++st.n_used;
        tau_acc += static_cast<double>(s.tau);
        stau_acc += s.s_tau;
    }
    if (st.n_used < 2)
        throw ParameterError("tau_stats: need at least two untruncated cycles");
    const double n = static_cast<double>(st.n_used);
    st.tau_mean = tau_acc / n;
    st.stau_mean = stau_acc / n;

    double tau_var = 0.0, stau_var = 0.0;
    for (const auto& s : samples) {
        if (s.truncated) continue;
        const double dt = static_cast<double>(s.tau) - st.tau_mean;
        const double ds = s.s_tau - st.stau_mean;
        tau_var += dt * dt;
        stau_var += ds * ds;
    }
    st.tau_ci = z99_two_sided * std::sqrt(tau_var / (n - 1.0) / n);
    st.stau_ci = z99_two_sided * std::sqrt(stau_var / (n - 1.0) / n);
    st.wald_residual = std::abs(st.stau_mean + m.moments().a * st.tau_mean);
    return st;
}

TailPoint mtau_tail(std::span<const CycleSample> samples, double x) {
    std::size_t n = 0, hits = 0;
    for (const auto& s : samples) {
        if (s.truncated) continue;
        ++n;
        hits += s.m_tau > x ? 1 : 0;
    }
    if (n == 0) throw ParameterError("mtau_tail: no untruncated cycles");
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    return {p, binomial_ci99(p, static_cast<double>(n))};
}

double exp_moment_stau(std::span<const CycleSample> samples, double h0) {
    if (!(h0 > 0.0) || !std::isfinite(h0))
        throw ParameterError("exp_moment_stau: h0 must be positive");
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& s : samples) {
        if (s.truncated) continue;
        ++n;
        acc += std::exp(h0 * s.s_tau);
    }
    if (n == 0) throw ParameterError("exp_moment_stau: no untruncated cycles");
    return acc / static_cast<double>(n);
}

LindleyEstimate lindley_tail(const IncrementModel& m, std::vector<double> x_grid,
                             std::uint64_t steps, std::uint64_t burn_in, int replicas,
                             std::uint64_t seed, int n_threads) {
    require_grid(x_grid, "lindley_tail");
    if (steps <= burn_in) throw ParameterError("lindley_tail: steps must exceed burn_in");
    if (replicas < 2)
        throw ParameterError(
            "lindley_tail: need at least two replicas for a confidence interval");

    const std::size_t k = x_grid.size();
    const double effective = static_cast<double>(steps - burn_in);
    std::vector<std::vector<double>> rep_means(static_cast<std::size_t>(replicas),
                                               std::vector<double>(k, 0.0));
    parallel_for(static_cast<std::size_t>(replicas), n_threads, [&](std::size_t r) {
        RngStream rng(seed, stream_domain::lindley + r);
        std::vector<std::uint64_t> at(k + 1, 0);
        double w = 0.0;
        for (std::uint64_t step = 1; step <= steps; ++step) {
            w = std::max(0.0, w + m.sample(rng));
            if (step > burn_in) {
                // Number of grid points strictly below w = index of the cell
                // this observation adds to; suffix sums recover {w > x_j}.
                const std::size_t idx = static_cast<std::size_t>(
                    std::lower_bound(x_grid.begin(), x_grid.end(), w) - x_grid.begin());
                ++at[idx];
            }
        }
        std::uint64_t acc = 0;
        for (std::size_t j = k; j-- > 0;) {
            acc += at[j + 1];
            rep_means[r][j] = static_cast<double>(acc) / effective;
        }
    });

    LindleyEstimate est;
    est.steps_per_replica = steps;
    est.burn_in = burn_in;
    est.replicas = replicas;
    est.p_hat.assign(k, 0.0);
    est.ci_halfwidth.assign(k, 0.0);
    const double nr = static_cast<double>(replicas);
    for (std::size_t j = 0; j < k; ++j) {
        double mean = 0.0;
        for (const auto& rm : rep_means) mean += rm[j];
        mean /= nr;
        double var = 0.0;
        for (const auto& rm : rep_means) var += (rm[j] - mean) * (rm[j] - mean);
        est.p_hat[j] = mean;
        est.ci_halfwidth[j] = z99_two_sided * std::sqrt(var / (nr - 1.0) / nr);
    }
    est.x_grid = std::move(x_grid);
    return est;
}

bounds::TailCurve upper_confidence_curve(const LindleyEstimate& est, double z) {
    std::vector<double> up(est.x_grid.size());
    for (std::size_t j = 0; j < up.size(); ++j) {
        const double se = est.ci_halfwidth[j] / z99_two_sided;
        up[j] = est.p_hat[j] + z * se;
    }
    return bounds::TailCurve(est.x_grid, std::move(up));
}

SupremumEstimate direct_sup_tail(const IncrementModel& m, double x, double stop_level_K,
                                 std::uint64_t n_paths, std::uint64_t seed,
                                 const std::function<double(double)>& bias_fn,
                                 int n_threads) {
    if (!(stop_level_K > 0.0) || !std::isfinite(stop_level_K))
        throw ParameterError("direct_sup_tail: stop level must be positive");
    if (n_paths == 0) throw ParameterError("direct_sup_tail: no paths requested");
    if (!bias_fn) throw ParameterError("direct_sup_tail: a bias bound is required");

    SupremumEstimate est;
    est.x = x;
    est.stop_level_K = stop_level_K;
    est.n_paths = n_paths;
    if (x < 0.0) {
        // M >= S_0 = 0 > x by definition; nothing to simulate and no bias.
        est.p_hat = 1.0;
        return est;
    }
    const double bias = bias_fn(x + stop_level_K);
    if (!std::isfinite(bias) || bias < 0.0)
        throw ParameterError("direct_sup_tail: bias bound must be finite and >= 0");

    const std::size_t n = static_cast<std::size_t>(n_paths);
    const std::size_t n_chunks = (n + kPathChunk - 1) / kPathChunk;
    std::vector<std::uint64_t> chunk_hits(n_chunks, 0);
    parallel_for(n_chunks, n_threads, [&](std::size_t c) {
        RngStream rng(seed, stream_domain::paths + c);
        const std::size_t lo = c * kPathChunk;
        const std::size_t hi = std::min(n, lo + kPathChunk);
        std::uint64_t hits = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            double s = 0.0;
            for (;;) {
                s += m.sample(rng);
                if (s > x) {
                    ++hits;
                    break;
                }
                if (s <= -stop_level_K) break;
            }
        }
        chunk_hits[c] = hits;
    });
    std::uint64_t hits = 0;
    for (auto h : chunk_hits) hits += h;
    est.p_hat = static_cast<double>(hits) / static_cast<double>(n_paths);
    est.ci_halfwidth = binomial_ci99(est.p_hat, static_cast<double>(n_paths));
    est.bias_upper = bias;
    return est;
}

DriftCheckReport empirical_drift_check(const IncrementModel& m,
                                       const potential::Certificate& cert,
                                       std::span<const double> states,
                                       std::uint64_t n_draws, std::uint64_t seed,
                                       int n_threads) {
    require_grid(states, "empirical_drift_check");
    if (n_draws < 2) throw ParameterError("empirical_drift_check: need n_draws >= 2");

    const bool capped = cert.kind == potential::CertKind::sub;
    const potential::TailPotential pot{cert.c, cert.r_c};

    DriftCheckReport report;
    report.rows.assign(states.size(), {});
    parallel_for(states.size(), n_threads, [&](std::size_t i) {
        const double t = states[i];
        RngStream rng(seed, stream_domain::drift + i);
        // The potential sits exactly on its plateau (value c) once the
        // increment overshoots past `split`, and that event can be rarer than
        // 1/n_draws deep in the tail while its mass c * tail(split) is the
        // same order as the certified margin.  Take the plateau term in
        // closed form and sample only the smooth part, so the estimator has
        // no invisible rare-event deficit.
        const double split = capped ? t - pot.r_c : t;
        const double plateau = cert.c * m.tail(split);
        double mean = 0.0, m2 = 0.0;
        for (std::uint64_t d = 0; d < n_draws; ++d) {
            const double xi = m.sample(rng);
            double v = 0.0;
            if (xi <= split)
                v = capped ? potential::potential_value_capped(m, pot, t - xi)
                           : potential::potential_value(m, cert.c, t - xi);
            const double delta = v - mean;
            mean += delta / static_cast<double>(d + 1);
            m2 += delta * (v - mean);
        }
        mean += plateau;
        const double nd = static_cast<double>(n_draws);
        const double se = std::sqrt(m2 / (nd - 1.0) / nd);

        DriftCheckRow row;
        row.t = t;
        row.mc_drift = mean;
        row.mc_se = se;
        if (capped) {
            row.quad_drift = potential::drift_capped(m, pot, t);
            row.margin = mean - potential::potential_value_capped(m, pot, t);
        } else {
            row.quad_drift = potential::drift_plain(m, cert.c, t);
            row.margin = potential::potential_value(m, cert.c, t) - mean;
        }
        row.sign_ok = row.margin >= -4.0 * se;
        row.quad_ok = std::abs(mean - row.quad_drift) <= 4.0 * se + 1e-9;
        report.rows[i] = row;
    });

    bool quad_all = true;
    for (const auto& row : report.rows) {
        if (!row.sign_ok) report.violations.push_back(row.t);
        quad_all = quad_all && row.quad_ok;
    }
    report.ok = report.violations.empty() && quad_all;
    return report;
}

DriftCheckReport empirical_drift_check(const IncrementModel& m,
                                       const potential::Certificate& cert,
                                       int n_states, std::uint64_t n_draws,
                                       std::uint64_t seed, int n_threads) {
    if (n_states < 1) throw ParameterError("empirical_drift_check: need n_states >= 1");
    const auto states = geometric_grid(cert.t_min, cert.t_max, n_states);
    return empirical_drift_check(m, cert, states, n_draws, seed, n_threads);
}

IglehartCheck iglehart_residual(const LindleyEstimate& est,
                                std::span<const CycleSample> cycles, double x) {
    if (!std::isfinite(x)) throw ParameterError("iglehart_residual: x must be finite");
    const bounds::TailCurve pi(est.x_grid, est.p_hat);

    IglehartCheck chk;
    chk.x = x;
    chk.lhs = pi(x);
    const double lhs_ci = lerp_on_grid(est.x_grid, est.ci_halfwidth, x);

    std::size_t n = 0, hits = 0;
    double acc = 0.0, acc_ci = 0.0;
    std::vector<double> renewal;
    renewal.reserve(cycles.size());
    for (const auto& s : cycles) {
        if (s.truncated) continue;
        ++n;
        if (s.m_tau > x) {
            ++hits;
            renewal.push_back(0.0);
        } else {
            const double arg = x - s.s_tau;
            const double v = pi(arg);
            renewal.push_back(v);
            acc += v;
            acc_ci += lerp_on_grid(est.x_grid, est.ci_halfwidth, arg);
        }
    }
    if (n == 0) throw ParameterError("iglehart_residual: no untruncated cycles");
    const double nn = static_cast<double>(n);
    chk.cycle_term = static_cast<double>(hits) / nn;
    chk.renewal_term = acc / nn;

    double var = 0.0;
    for (double v : renewal) var += (v - chk.renewal_term) * (v - chk.renewal_term);
    const double renewal_ci = z99_two_sided * std::sqrt(var / (nn - 1.0) / nn);
    // The interpolated curve is itself estimated; charge its average local
    // confidence halfwidth over the renewal arguments as well.
    const double curve_ci = acc_ci / nn;

    chk.residual = std::abs(chk.lhs - chk.cycle_term - chk.renewal_term);
    chk.combined_ci = lhs_ci + binomial_ci99(chk.cycle_term, nn) + renewal_ci + curve_ci;
    chk.ok = chk.residual <= chk.combined_ci;
    return chk;
}

// ---- binary cycle spill --------------------------------------------------

static_assert(std::endian::native == std::endian::little,
              "cycle files are little-endian; this build targets LE hosts only");
static_assert(sizeof(double) == 8);

void write_cycles(const std::filesystem::path& path,
                  std::span<const CycleSample> samples) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_cycles: cannot open " + path.string());

    const std::size_t n = samples.size();
    std::vector<std::uint64_t> taus(n);
    std::vector<double> staus(n), mtaus(n);
    std::vector<std::uint8_t> flags(n);
    for (std::size_t i = 0; i < n; ++i) {
        taus[i] = samples[i].tau;
        staus[i] = samples[i].s_tau;
        mtaus[i] = samples[i].m_tau;
        flags[i] = samples[i].truncated ? 1 : 0;
    }
    out.write(reinterpret_cast<const char*>(taus.data()),
              static_cast<std::streamsize>(n * 8));
    out.write(reinterpret_cast<const char*>(staus.data()),
              static_cast<std::streamsize>(n * 8));
    out.write(reinterpret_cast<const char*>(mtaus.data()),
              static_cast<std::streamsize>(n * 8));
    out.write(reinterpret_cast<const char*>(flags.data()),
              static_cast<std::streamsize>(n));
    if (!out) throw IoError("write_cycles: short write to " + path.string());
}

std::vector<CycleSample> read_cycles(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_cycles: cannot open " + path.string());
    std::error_code ec;
    const auto bytes = std::filesystem::file_size(path, ec);
    if (ec) throw IoError("read_cycles: cannot stat " + path.string());
    if (bytes % 25 != 0)
        throw IoError("read_cycles: " + path.string() +
                      " is not a whole number of 25-byte records");
    const std::size_t n = static_cast<std::size_t>(bytes / 25);

    std::vector<std::uint64_t> taus(n);
    std::vector<double> staus(n), mtaus(n);
    std::vector<std::uint8_t> flags(n);
    in.read(reinterpret_cast<char*>(taus.data()), static_cast<std::streamsize>(n * 8));
    in.read(reinterpret_cast<char*>(staus.data()), static_cast<std::streamsize>(n * 8));
    in.read(reinterpret_cast<char*>(mtaus.data()), static_cast<std::streamsize>(n * 8));
    in.read(reinterpret_cast<char*>(flags.data()), static_cast<std::streamsize>(n));
    if (!in && n > 0) throw IoError("read_cycles: short read from " + path.string());

    std::vector<CycleSample> samples(n);
    for (std::size_t i = 0; i < n; ++i)
        samples[i] = {taus[i], staus[i], mtaus[i], (flags[i] & 1) != 0};
    return samples;
}

}  // namespace tailbound::walk_sim
