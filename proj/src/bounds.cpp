#include "tailbound/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tailbound::bounds {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void require_kind(const Certificate& cert, CertKind want, const char* who) {
    if (cert.kind != want)
        throw ParameterError(std::string(who) + ": certificate of kind '" +
                             potential::kind_name(cert.kind) + "', need '" +
                             potential::kind_name(want) + "'");
}

// R + r, validated once per call chain.
double vacuous_edge(const Certificate& cert, double r, const char* who) {
    if (!(r >= 0.0) || !std::isfinite(r))
        throw ParameterError(std::string(who) + ": level r must be finite and >= 0");
    return cert.R + r;
}

}  // namespace

double veraverbecke(const IncrementModel& m, double x) {
    return clamp01(m.integrated_tail(x) / m.moments().a);
}

double fkz_lower_bound(const IncrementModel& m, double x) {
    const double it = m.integrated_tail(x);
    return clamp01(it / (m.moments().a + it));
}

double lower_bound_M(const IncrementModel& m, const Certificate& cert, double x) {
    require_kind(cert, CertKind::sub, "lower_bound_M");
    return clamp01(m.integrated_tail(x + cert.R) / cert.c);
}

double upper_bound_M(const IncrementModel& m, const Certificate& cert, double r,
                     double x) {
    require_kind(cert, CertKind::super, "upper_bound_M");
    const double edge = vacuous_edge(cert, r, "upper_bound_M");
    if (!(x > edge))
        throw DomainError("upper_bound_M: vacuous at x = " + std::to_string(x) +
                          " <= R + r = " + std::to_string(edge));
    return clamp01(m.integrated_tail(x - edge) / cert.c);
}

double upper_bound_Mtau(const IncrementModel& m, const Certificate& cert, double r,
                        double tau_mean, double x) {
    require_kind(cert, CertKind::super, "upper_bound_Mtau");
    const double edge = vacuous_edge(cert, r, "upper_bound_Mtau");
    if (!(tau_mean >= 0.0) || !std::isfinite(tau_mean))
        throw ParameterError("upper_bound_Mtau: tau_mean must be finite and >= 0");
    if (!(x > edge))
        throw DomainError("upper_bound_Mtau: vacuous at x = " + std::to_string(x) +
                          " <= R + r = " + std::to_string(edge));
    return clamp01(m.moments().a / cert.c * tau_mean * m.tail(x - edge));
}

double lower_bound_Mtau(const IncrementModel& m, const Certificate& cert,
                        std::span<const double> stau_samples, double x) {
    require_kind(cert, CertKind::sub, "lower_bound_Mtau");
    if (stau_samples.empty())
        throw ParameterError("lower_bound_Mtau: no cycle-end samples");
    const double t = x + cert.R;
    double acc = 0.0;
    for (double s : stau_samples) {
        if (!(s <= 0.0))
            throw ParameterError(
                "lower_bound_Mtau: cycle-end sample " + std::to_string(s) +
                " is not <= 0");
        acc += m.integrated_tail(t - s);
    }
    const double num = m.integrated_tail(t) - acc / static_cast<double>(stau_samples.size());
    return clamp01(std::max(0.0, num) / cert.c);
}

double asymp_Mtau(const IncrementModel& m, double tau_mean, double x) {
    if (!(tau_mean >= 0.0) || !std::isfinite(tau_mean))
        throw ParameterError("asymp_Mtau: tau_mean must be finite and >= 0");
    return clamp01(tau_mean * m.tail(x));
}

RChoice choose_r(const IncrementModel& m, const Certificate& cert,
                 const std::function<double(double)>& sup_tail_upper,
                 std::span<const double> r_grid) {
    require_kind(cert, CertKind::super, "choose_r");
    if (r_grid.empty()) throw ParameterError("choose_r: empty r grid");
    for (std::size_t i = 0; i < r_grid.size(); ++i) {
        if (!std::isfinite(r_grid[i]) || r_grid[i] < 0.0 ||
            (i > 0 && !(r_grid[i] > r_grid[i - 1])))
            throw ParameterError("choose_r: r grid must be finite, >= 0, ascending");
    }
    const double threshold = m.integrated_tail(cert.R) / cert.c;
    for (double r : r_grid) {
        const double p = sup_tail_upper(r);
        if (std::isnan(p))
            throw ParameterError("choose_r: supremum-tail bound returned NaN at r = " +
                                 std::to_string(r));
        if (p <= threshold) return {r, threshold};
    }
    throw NoRootError("choose_r: no level below the cap " +
                      std::to_string(r_grid.back()) +
                      " brings the supremum-tail bound under the threshold " +
                      std::to_string(threshold));
}

double LundbergBaseline::doob(double x) const { return clamp01(std::exp(-h0 * x)); }

LundbergBaseline lundberg(const IncrementModel& m,
                          std::span<const double> stau_samples) {
    if (!m.has_mgf())
        throw NoExponentError(
            "lundberg: increment law has no finite exponential moment");

    // Signed excess E exp(h xi) - 1.  Evaluation can blow up (quadrature
    // overflow) near mgf_sup; any such failure means the value is far above
    // one, which is all the bracketing needs to know.
    auto excess = [&m](double h) -> double {
        try {
            const double v = m.mgf(h);
            return std::isfinite(v) ? v - 1.0 : kInf;
        } catch (const Error&) {
            return kInf;
        }
    };

    // E exp(h xi) is convex in h and equals 1 at h = 0 with negative slope
    // (negative drift), so the excess is negative exactly on (0, h0) when a
    // root exists.  First walk down from a starting guess until the excess is
    // negative, then ladder up toward mgf_sup until it turns nonnegative.
    const double h_sup = m.mgf_sup();
    double lo = std::isfinite(h_sup) ? 0.5 * h_sup : 1e-3;
    double lo_val = excess(lo);
    for (int j = 0; j < 80 && !(lo_val < 0.0); ++j) {
        lo *= 0.5;
        lo_val = excess(lo);
    }
    if (!(lo_val < 0.0))
        throw NoRootError(
            "lundberg: found no h with E exp(h xi) < 1; drift too weak to resolve");

    double hi = 0.0, hi_val = 0.0;
    bool bracketed = false;
    for (int k = 1; k <= 64 && !bracketed; ++k) {
        const double h = std::isfinite(h_sup) ? h_sup * (1.0 - std::pow(2.0, -k))
                                              : 1e-3 * std::pow(2.0, k - 1);
        if (h <= lo) continue;
        const double v = excess(h);
        if (v < 0.0) {
            lo = h;
            lo_val = v;
        } else {
            hi = h;
            hi_val = v;
            bracketed = true;
        }
    }
    if (!bracketed)
        throw NoRootError(
            "lundberg: E exp(h xi) stays below 1 on the searchable range; no "
            "positive exponent");

    double best_h = lo, best_res = std::abs(lo_val);
    if (hi_val < best_res) {
        best_h = hi;
        best_res = hi_val;
    }
    for (int iter = 0; iter < 200 && best_res > 0.0; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;  // bracket down to one ulp
        const double v = excess(mid);
        if (std::abs(v) < best_res) {
            best_res = std::abs(v);
            best_h = mid;
        }
        if (v < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    if (!(best_res <= 1e-12))
        throw NoRootError("lundberg: residual " + std::to_string(best_res) +
                          " after bisection; root not resolved to 1e-12");

    LundbergBaseline base;
    base.h0 = best_h;
    base.residual = best_res;
    if (!stau_samples.empty()) {
        double acc = 0.0;
        for (double s : stau_samples) {
            if (!(s <= 0.0))
                throw ParameterError("lundberg: cycle-end sample " + std::to_string(s) +
                                     " is not <= 0");
            acc += std::exp(base.h0 * s);
        }
        const double mean = acc / static_cast<double>(stau_samples.size());
        base.exp_moment_stau = mean;
        base.cl_prefactor = 1.0 - mean;
    }
    return base;
}

TailCurve::TailCurve(std::vector<double> xs, std::vector<double> ps)
    : x_(std::move(xs)), p_(std::move(ps)) {
    if (x_.empty() || x_.size() != p_.size())
        throw ParameterError("TailCurve: need equal-length nonempty grids");
    for (std::size_t i = 0; i < x_.size(); ++i) {
        if (!std::isfinite(x_[i]) || std::isnan(p_[i]))
            throw ParameterError("TailCurve: non-finite node");
        if (i > 0 && !(x_[i] > x_[i - 1]))
            throw ParameterError("TailCurve: grid must be strictly increasing");
    }
    double running = 1.0;
    for (double& p : p_) {
        running = std::min(running, clamp01(p));
        p = running;
    }
}

double TailCurve::operator()(double x) const {
    if (x <= x_.front()) return p_.front();
    if (x >= x_.back()) return p_.back();
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin());
    const double w = (x - x_[i - 1]) / (x_[i] - x_[i - 1]);
    return p_[i - 1] + w * (p_[i] - p_[i - 1]);
}

namespace {

nlohmann::json cert_summary(const Certificate* c) {
    if (!c) return nullptr;
    return {{"kind", potential::kind_name(c->kind)},
            {"epsilon", c->epsilon},
            {"c", c->c},
            {"R", c->R}};
}

}  // namespace

BoundTable build_bound_table(const IncrementModel& m, std::span<const double> x_grid,
                             const BoundInputs& in) {
    if (x_grid.empty()) throw ParameterError("build_bound_table: empty x grid");
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
        if (!std::isfinite(x_grid[i]) || (i > 0 && !(x_grid[i] > x_grid[i - 1])))
            throw ParameterError(
                "build_bound_table: x grid must be finite and strictly increasing");
    }
    if (in.sub) require_kind(*in.sub, CertKind::sub, "build_bound_table");
    if (in.super) require_kind(*in.super, CertKind::super, "build_bound_table");

    const bool upper_ready = in.super && in.r.has_value();
    const double edge =
        upper_ready ? vacuous_edge(*in.super, *in.r, "build_bound_table") : 0.0;

    BoundTable table;
    table.rows.reserve(x_grid.size());
    for (double x : x_grid) {
        BoundRow row;
        row.x = x;
        row.fkz_lower = fkz_lower_bound(m, x);
        row.asymp_M = veraverbecke(m, x);
        if (in.sub) row.lower_M = lower_bound_M(m, *in.sub, x);
        if (upper_ready) {
            if (x > edge) {
                row.upper_M = upper_bound_M(m, *in.super, *in.r, x);
                if (in.tau_mean_upper)
                    row.upper_Mtau =
                        upper_bound_Mtau(m, *in.super, *in.r, *in.tau_mean_upper, x);
            } else {
                row.note = "vacuous: x <= R + r";
            }
        }
        if (in.sub && !in.stau_samples.empty())
            row.lower_Mtau = lower_bound_Mtau(m, *in.sub, in.stau_samples, x);
        if (in.tau_mean) row.asymp_Mtau = asymp_Mtau(m, *in.tau_mean, x);
        if (in.light_tail) row.doob = in.light_tail->doob(x);

        if (row.upper_M) {
            if (row.lower_M && *row.lower_M > *row.upper_M + 1e-12)
                throw StatCheckError(
                    "bound table row invariant lower_M <= upper_M violated at x = " +
                    std::to_string(x));
            if (row.fkz_lower && *row.fkz_lower > *row.upper_M + 1e-12)
                throw StatCheckError(
                    "bound table row invariant fkz_lower <= upper_M violated at x = " +
                    std::to_string(x));
        }
        table.rows.push_back(std::move(row));
    }

    table.provenance = {
        {"certificates",
         {{"sub", cert_summary(in.sub)}, {"super", cert_summary(in.super)}}},
        {"r", in.r ? nlohmann::json(*in.r) : nlohmann::json(nullptr)},
        {"tau_mean", in.tau_mean ? nlohmann::json(*in.tau_mean) : nlohmann::json(nullptr)},
        {"tau_mean_upper",
         in.tau_mean_upper ? nlohmann::json(*in.tau_mean_upper) : nlohmann::json(nullptr)},
        {"stau_samples", in.stau_samples.size()},
        {"lundberg", in.light_tail
                         ? nlohmann::json{{"h0", in.light_tail->h0},
                                          {"residual", in.light_tail->residual}}
                         : nlohmann::json(nullptr)}};
    return table;
}

}  // namespace tailbound::bounds
