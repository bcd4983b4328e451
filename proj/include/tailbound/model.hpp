#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "tailbound/errors.hpp"
#include "tailbound/rng.hpp"

namespace tailbound {

enum class Family { pareto_shift, weibull_shift, exp_shift, point_mass };

// First-moment summary of an increment law xi with E xi = -a < 0:
//   a_plus  = integral over (0, inf) of P(xi > z) dz,
//   a_minus = integral over (-inf, 0) of P(xi <= z) dz,
//   a       = a_minus - a_plus = -E xi.
struct Moments {
    double a;
    double a_plus;
    double a_minus;
};

// Immutable increment law xi = Y - mu for a nonnegative jump Y, with cached
// moments and closed-form tail machinery wherever the family admits it.
//
// Families:
//   pareto_shift  : P(Y > y) = (1 + y/sigma)^(-alpha), alpha > 1
//   weibull_shift : P(Y > y) = exp(-(y/sigma)^beta)
//   exp_shift     : P(Y > y) = exp(-lambda y)
//   point_mass    : xi == -m, degenerate; test-only, not serializable
//
// All evaluators are total functions of x on the real line: below the support
// infimum -mu the tail is 1 and the integrated tail continues linearly.
class IncrementModel {
public:
    static IncrementModel pareto_shift(double alpha, double sigma, double mu,
                                       double quad_tol = 1e-10);
    static IncrementModel weibull_shift(double beta, double sigma, double mu,
                                        double quad_tol = 1e-10);
    static IncrementModel exp_shift(double lambda, double mu, double quad_tol = 1e-10);
    static IncrementModel point_mass(double m);

    Family family() const { return family_; }
    std::string name() const;

    double tail(double x) const;             // P(xi > x)
    double cdf(double x) const { return 1.0 - tail(x); }
    double density(double x) const;          // throws DomainError for point_mass
    double integrated_tail(double x) const;  // int_x^inf P(xi > z) dz

    const Moments& moments() const { return moments_; }
    double support_inf() const { return -mu_; }
    double quad_tol() const { return quad_tol_; }

    // One draw of xi by the inverse-tail transform (one uniform consumed;
    // none for the degenerate family).
    double sample(RngStream& rng) const;

    // Exponential moments.  has_mgf() says whether E exp(h xi) is finite for
    // some h > 0; mgf() returns +inf for h at or beyond mgf_sup().
    bool has_mgf() const;
    double mgf_sup() const;
    double mgf(double h) const;

    nlohmann::json to_json() const;
    static IncrementModel from_json(const nlohmann::json& j);

    // Family parameters, for reporting.
    double shape() const { return p1_; }   // alpha / beta / lambda / unused
    double scale() const { return p2_; }   // sigma (1 where not applicable)
    double shift() const { return mu_; }   // mu / m

private:
    IncrementModel(Family f, double p1, double p2, double mu, double quad_tol);
    void compute_moments();

    Family family_;
    double p1_;
    double p2_;
    double mu_;
    double quad_tol_;
    Moments moments_{};
    double mean_jump_ = 0.0;  // E Y
};

std::string family_name(Family f);

}  // namespace tailbound
