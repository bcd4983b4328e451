#pragma once

// Shared fixtures and independent oracle formulas for the test suites.  The
// oracles here are written out from first principles on purpose: they must not
// call the library code paths they are used to check.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "tailbound/model.hpp"

namespace testsup {

// Two-sided normal quantiles.
inline constexpr double kZ99 = 2.5758293035489004;   // 99%
inline constexpr double kZ999 = 3.2905267314919255;  // 99.9%
// One-sided.
inline constexpr double kZ99OneSided = 2.3263478740408408;

inline tailbound::IncrementModel canonical_pareto() {
    return tailbound::IncrementModel::pareto_shift(3.0, 1.0, 1.5);
}
inline tailbound::IncrementModel canonical_exp() {
    return tailbound::IncrementModel::exp_shift(1.0, 2.0);
}
inline tailbound::IncrementModel heavy_weibull() {
    return tailbound::IncrementModel::weibull_shift(0.5, 1.0, 3.0);
}
inline tailbound::IncrementModel light_weibull() {
    return tailbound::IncrementModel::weibull_shift(2.0, 1.0, 1.0);
}

// ---- independent closed forms -------------------------------------------

inline double pareto_tail(double alpha, double sigma, double mu, double x) {
    if (x < -mu) return 1.0;
    return std::pow(1.0 + (x + mu) / sigma, -alpha);
}

inline double pareto_itail(double alpha, double sigma, double mu, double x) {
    if (x < -mu) return pareto_itail(alpha, sigma, mu, -mu) + (-mu - x);
    return sigma / (alpha - 1.0) * std::pow(1.0 + (x + mu) / sigma, 1.0 - alpha);
}

inline double exp_tail(double lambda, double mu, double x) {
    if (x < -mu) return 1.0;
    return std::exp(-lambda * (x + mu));
}

inline double exp_itail(double lambda, double mu, double x) {
    if (x < -mu) return 1.0 / lambda + (-mu - x);
    return std::exp(-lambda * (x + mu)) / lambda;
}

// Integrated tail of the beta = 1/2 Weibull jump: for w = (x + mu)/sigma >= 0,
//   int_w^inf exp(-sqrt(v)) dv = 2 exp(-sqrt(w)) (1 + sqrt(w)),
// scaled by sigma.
inline double weibull_half_itail(double sigma, double mu, double x) {
    if (x < -mu) return weibull_half_itail(sigma, mu, -mu) + (-mu - x);
    const double w = (x + mu) / sigma;
    const double r = std::sqrt(w);
    return sigma * 2.0 * std::exp(-r) * (1.0 + r);
}

// E exp(hY) for Y ~ Weibull(shape 2, scale sigma):
//   1 + (sqrt(pi) s / 2) exp(s^2 / 4) (1 + erf(s / 2)),  s = h sigma.
inline double weibull2_jump_mgf(double sigma, double h) {
    const double s = h * sigma;
    return 1.0 + 0.5 * std::sqrt(M_PI) * s * std::exp(0.25 * s * s) *
                     (1.0 + std::erf(0.5 * s));
}

// ---- small statistics helpers -------------------------------------------

inline double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sd_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / (static_cast<double>(v.size()) - 1.0));
}

// Fresh scratch directory under the system temp root.
inline std::filesystem::path fresh_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("tailbound_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testsup
