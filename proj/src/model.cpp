#include "tailbound/model.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "tailbound/quadrature.hpp"

namespace tailbound {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const char* msg) {
    if (!ok) throw ParameterError(msg);
}

double get_number(const nlohmann::json& j, const char* key) {
    if (!j.contains(key))
        throw ConfigError(std::string("model: missing field \"") + key + "\"");
    const auto& v = j.at(key);
    if (!v.is_number())
        throw ConfigError(std::string("model: field \"") + key + "\" must be a number");
    return v.get<double>();
}

}  // namespace

std::string family_name(Family f) {
    switch (f) {
        case Family::pareto_shift: return "pareto_shift";
        case Family::weibull_shift: return "weibull_shift";
        case Family::exp_shift: return "exp_shift";
        case Family::point_mass: return "point_mass";
    }
    return "?";
}

IncrementModel::IncrementModel(Family f, double p1, double p2, double mu, double quad_tol)
    : family_(f), p1_(p1), p2_(p2), mu_(mu), quad_tol_(quad_tol) {
    require(std::isfinite(p1) && std::isfinite(p2) && std::isfinite(mu),
            "model: parameters must be finite");
    require(quad_tol > 0 && quad_tol < 1e-2, "model: quad_tol must lie in (0, 1e-2)");
    compute_moments();
    require(moments_.a > 0, "model: mean increment must be negative (shift exceeds mean jump)");
}

IncrementModel IncrementModel::pareto_shift(double alpha, double sigma, double mu,
                                            double quad_tol) {
    require(alpha > 1, "pareto_shift: alpha must exceed 1 (finite mean)");
    require(sigma > 0, "pareto_shift: sigma must be positive");
    return IncrementModel(Family::pareto_shift, alpha, sigma, mu, quad_tol);
}

IncrementModel IncrementModel::weibull_shift(double beta, double sigma, double mu,
                                             double quad_tol) {
    require(beta > 0, "weibull_shift: beta must be positive");
    require(sigma > 0, "weibull_shift: sigma must be positive");
    return IncrementModel(Family::weibull_shift, beta, sigma, mu, quad_tol);
}

IncrementModel IncrementModel::exp_shift(double lambda, double mu, double quad_tol) {
    require(lambda > 0, "exp_shift: lambda must be positive");
    return IncrementModel(Family::exp_shift, lambda, 1.0, mu, quad_tol);
}

IncrementModel IncrementModel::point_mass(double m) {
    require(m > 0, "point_mass: step must be negative (m > 0)");
    return IncrementModel(Family::point_mass, 0.0, 1.0, m, 1e-10);
}

void IncrementModel::compute_moments() {
    switch (family_) {
        case Family::pareto_shift: mean_jump_ = p2_ / (p1_ - 1.0); break;
        case Family::weibull_shift: mean_jump_ = p2_ * std::tgamma(1.0 + 1.0 / p1_); break;
        case Family::exp_shift: mean_jump_ = 1.0 / p1_; break;
        case Family::point_mass: mean_jump_ = 0.0; break;
    }
    moments_.a = mu_ - mean_jump_;
    moments_.a_plus = family_ == Family::point_mass ? 0.0 : integrated_tail(0.0);
    moments_.a_minus = moments_.a + moments_.a_plus;
}

double IncrementModel::tail(double x) const {
    if (x < -mu_) return 1.0;
    const double y = x + mu_;  // jump coordinate, y >= 0
    switch (family_) {
        case Family::pareto_shift: return std::pow(1.0 + y / p2_, -p1_);
        case Family::weibull_shift: return std::exp(-std::pow(y / p2_, p1_));
        case Family::exp_shift: return std::exp(-p1_ * y);
        case Family::point_mass: return 0.0;
    }
    return 0.0;
}

double IncrementModel::density(double x) const {
    if (family_ == Family::point_mass)
        throw DomainError("point_mass: degenerate law has no density");
    if (x < -mu_) return 0.0;
    const double y = x + mu_;
    switch (family_) {
        case Family::pareto_shift:
            return (p1_ / p2_) * std::pow(1.0 + y / p2_, -p1_ - 1.0);
        case Family::weibull_shift: {
            if (y == 0.0) {
                if (p1_ < 1.0) return kInf;
                if (p1_ == 1.0) return 1.0 / p2_;
                return 0.0;
            }
            const double t = std::pow(y / p2_, p1_);
            return (p1_ / y) * t * std::exp(-t);
        }
        case Family::exp_shift: return p1_ * std::exp(-p1_ * y);
        case Family::point_mass: break;
    }
    return 0.0;
}

double IncrementModel::integrated_tail(double x) const {
    if (x < -mu_) return integrated_tail(-mu_) + (-mu_ - x);
    const double y = x + mu_;
    switch (family_) {
        case Family::pareto_shift:
            return p2_ / (p1_ - 1.0) * std::pow(1.0 + y / p2_, 1.0 - p1_);
        case Family::weibull_shift: {
            if (y == 0.0) return mean_jump_;
            auto res = integrate_to_infinity(
                [this](double z) { return tail(z); }, x,
                QuadOptions{quad_tol_, 1e-300, 4000});
            return res.value;
        }
        case Family::exp_shift: return std::exp(-p1_ * y) / p1_;
        case Family::point_mass: return 0.0;
    }
    return 0.0;
}

double IncrementModel::sample(RngStream& rng) const {
    if (family_ == Family::point_mass) return -mu_;
    const double u = rng.uniform01();  // u ~ U(0,1); Y = inverse tail at u
    double y = 0.0;
    switch (family_) {
        case Family::pareto_shift: y = p2_ * (std::pow(u, -1.0 / p1_) - 1.0); break;
        case Family::weibull_shift: y = p2_ * std::pow(-std::log(u), 1.0 / p1_); break;
        case Family::exp_shift: y = -std::log(u) / p1_; break;
        case Family::point_mass: break;
    }
    return y - mu_;
}

bool IncrementModel::has_mgf() const {
    switch (family_) {
        case Family::pareto_shift: return false;
        case Family::weibull_shift: return p1_ >= 1.0;
        case Family::exp_shift: return true;
        case Family::point_mass: return true;
    }
    return false;
}

double IncrementModel::mgf_sup() const {
    if (!has_mgf()) return 0.0;
    switch (family_) {
        case Family::weibull_shift: return p1_ == 1.0 ? 1.0 / p2_ : kInf;
        case Family::exp_shift: return p1_;
        default: return kInf;
    }
}

double IncrementModel::mgf(double h) const {
    if (!has_mgf())
        throw NoExponentError(name() + ": no finite exponential moment for h > 0");
    if (h == 0.0) return 1.0;
    if (h >= mgf_sup()) return kInf;
    switch (family_) {
        case Family::exp_shift:
            return p1_ / (p1_ - h) * std::exp(-h * mu_);
        case Family::weibull_shift: {
            if (p1_ == 1.0)  // genuinely exponential jump with rate 1/sigma
                return std::exp(-h * mu_) / (1.0 - p2_ * h);
            // E exp(hY) = 1 + h * int_0^inf exp(hy) P(Y > y) dy
            auto res = integrate_to_infinity(
                [this, h](double y) {
                    return std::exp(h * y - std::pow(y / p2_, p1_));
                },
                0.0, QuadOptions{1e-13, 1e-300, 8000});
            return std::exp(-h * mu_) * (1.0 + h * res.value);
        }
        case Family::point_mass: return std::exp(-h * mu_);
        default: break;
    }
    return kInf;
}

std::string IncrementModel::name() const {
    char buf[128];
    switch (family_) {
        case Family::pareto_shift:
            std::snprintf(buf, sizeof buf, "pareto_shift(alpha=%g, sigma=%g, mu=%g)", p1_,
                          p2_, mu_);
            break;
        case Family::weibull_shift:
            std::snprintf(buf, sizeof buf, "weibull_shift(beta=%g, sigma=%g, mu=%g)", p1_,
                          p2_, mu_);
            break;
        case Family::exp_shift:
            std::snprintf(buf, sizeof buf, "exp_shift(lambda=%g, mu=%g)", p1_, mu_);
            break;
        case Family::point_mass:
            std::snprintf(buf, sizeof buf, "point_mass(m=%g)", mu_);
            break;
    }
    return buf;
}

nlohmann::json IncrementModel::to_json() const {
    nlohmann::json j;
    switch (family_) {
        case Family::pareto_shift:
            j = {{"family", "pareto_shift"}, {"alpha", p1_}, {"sigma", p2_}, {"mu", mu_}};
            break;
        case Family::weibull_shift:
            j = {{"family", "weibull_shift"}, {"beta", p1_}, {"sigma", p2_}, {"mu", mu_}};
            break;
        case Family::exp_shift:
            j = {{"family", "exp_shift"}, {"lambda", p1_}, {"mu", mu_}};
            break;
        case Family::point_mass:
            throw ParameterError("point_mass: test-only family, not serializable");
    }
    j["quad_tol"] = quad_tol_;
    return j;
}

IncrementModel IncrementModel::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("model: expected a JSON object");
    if (!j.contains("family") || !j.at("family").is_string())
        throw ConfigError("model: missing string field \"family\"");
    const std::string fam = j.at("family").get<std::string>();
    const double quad_tol = j.contains("quad_tol") ? get_number(j, "quad_tol") : 1e-10;
    try {
        if (fam == "pareto_shift")
            return pareto_shift(get_number(j, "alpha"), get_number(j, "sigma"),
                                get_number(j, "mu"), quad_tol);
        if (fam == "weibull_shift")
            return weibull_shift(get_number(j, "beta"), get_number(j, "sigma"),
                                 get_number(j, "mu"), quad_tol);
        if (fam == "exp_shift")
            return exp_shift(get_number(j, "lambda"), get_number(j, "mu"), quad_tol);
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    throw ConfigError("model: unknown family \"" + fam + "\"");
}

}  // namespace tailbound
