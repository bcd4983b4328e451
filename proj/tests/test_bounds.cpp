#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "tailbound/bounds.hpp"
#include "tailbound/potential.hpp"
#include "tailbound/quadrature.hpp"
#include "support.hpp"

using tailbound::DomainError;
using tailbound::IncrementModel;
using tailbound::NoExponentError;
using tailbound::NoRootError;
using tailbound::ParameterError;
using tailbound::StatCheckError;
using tailbound::potential::CertKind;
using tailbound::potential::Certificate;
namespace bd = tailbound::bounds;

namespace {

// Hand-built certificates for formula-level checks; the constant c is set the
// way the certifier would (a + eps below, a - eps above).
Certificate fake_sub(double eps, double R, double a = 1.0) {
    Certificate c{};
    c.kind = CertKind::sub;
    c.epsilon = eps;
    c.c = a + eps;
    c.R = R;
    return c;
}

Certificate fake_super(double eps, double R, double a = 1.0) {
    Certificate c{};
    c.kind = CertKind::super;
    c.epsilon = eps;
    c.c = a - eps;
    c.R = R;
    return c;
}

// Pareto jump with integrated tail 4 / (1 + (x + 4.5) / 4): crosses its own
// drift rate a = 1/2 at x = 23.5, so the plain asymptotic saturates there.
IncrementModel wide_pareto() { return IncrementModel::pareto_shift(2.0, 4.0, 4.5); }

}  // namespace

TEST_CASE("veraverbecke ratio against the closed-form integrated tail") {
    const auto m = testsup::canonical_pareto();
    CHECK(bd::veraverbecke(m, 2.5) == doctest::Approx(0.02).epsilon(1e-13));
    CHECK(bd::veraverbecke(m, 22.5) == doctest::Approx(8e-4).epsilon(1e-13));
    for (double x : {0.0, 1.0, 7.5, 40.0, 300.0})
        CHECK(bd::veraverbecke(m, x) ==
              doctest::Approx(testsup::pareto_itail(3, 1, 1.5, x)).epsilon(1e-13));

    const auto w = wide_pareto();
    CHECK(bd::veraverbecke(w, 23.5) == doctest::Approx(1.0).epsilon(1e-13));
    // Below the crossing the raw ratio exceeds one and is clamped.
    CHECK(bd::veraverbecke(w, 0.0) == 1.0);
    CHECK(bd::veraverbecke(w, 23.0) == 1.0);
    CHECK(bd::veraverbecke(w, 24.0) < 1.0);
}

TEST_CASE("fkz lower bound: closed form, uniform validity, asymptotic match") {
    const auto m = testsup::canonical_pareto();
    CHECK(bd::fkz_lower_bound(m, 2.5) == doctest::Approx(0.02 / 1.02).epsilon(1e-13));

    // Certificate-free and never above the asymptotic ratio.
    const double a_plus = m.moments().a_plus;
    for (double x : {0.0, 0.5, 2.0, 10.0, 80.0}) {
        const double it = testsup::pareto_itail(3, 1, 1.5, x);
        CHECK(bd::fkz_lower_bound(m, x) >= it / (1.0 + a_plus) - 1e-15);
        CHECK(bd::fkz_lower_bound(m, x) <= bd::veraverbecke(m, x) + 1e-15);
    }

    // Far out the two agree to first order.
    const double far = bd::fkz_lower_bound(m, 200.0) / bd::veraverbecke(m, 200.0);
    CHECK(far == doctest::Approx(1.0).epsilon(3e-5));
}

TEST_CASE("lower_bound_M evaluates the certified inequality") {
    const auto m = testsup::canonical_pareto();

    // Formula check with a hypothetical radius.
    const auto hyp = fake_sub(0.5, 10.0);
    CHECK(bd::lower_bound_M(m, hyp, 10.0) ==
          doctest::Approx(std::pow(22.5, -2.0) / 3.0).epsilon(1e-12));

    // With the real certificate.
    const auto res = tailbound::potential::certify_sub(m, 0.5);
    const double want = testsup::pareto_itail(3, 1, 1.5, 10.0 + res.cert.R) / 1.5;
    CHECK(bd::lower_bound_M(m, res.cert, 10.0) == doctest::Approx(want).epsilon(1e-12));
    CHECK(bd::lower_bound_M(m, res.cert, 1e8) < 1e-12);

    CHECK_THROWS_AS(bd::lower_bound_M(m, fake_super(0.5, 4.0), 10.0), ParameterError);
}

TEST_CASE("choose_r scans the grid against the certificate threshold") {
    const auto m = testsup::canonical_pareto();
    const auto cert = fake_super(0.5, 4.0);
    const double threshold = testsup::pareto_itail(3, 1, 1.5, 4.0) / 0.5;

    std::vector<double> grid;
    for (int r = 1; r <= 20; ++r) grid.push_back(static_cast<double>(r));

    SUBCASE("an always-zero curve admits the grid minimum") {
        const auto pick = bd::choose_r(m, cert, [](double) { return 0.0; }, grid);
        CHECK(pick.r == 1.0);
        CHECK(pick.threshold == doctest::Approx(threshold).epsilon(1e-12));
    }
    SUBCASE("a decaying curve admits the first grid point under the threshold") {
        const auto pick =
            bd::choose_r(m, cert, [](double r) { return std::exp(-0.5 * r); }, grid);
        // exp(-r/2) <= (6.5)^-2 first holds at r >= 2 ln(42.25) ~ 7.49.
        CHECK(pick.r == 8.0);
    }
    SUBCASE("an always-one curve runs out the cap") {
        CHECK_THROWS_AS(bd::choose_r(m, cert, [](double) { return 1.0; }, grid),
                        NoRootError);
        try {
            bd::choose_r(m, cert, [](double) { return 1.0; }, grid);
        } catch (const NoRootError& e) {
            CHECK(std::string(e.what()).find("20") != std::string::npos);
        }
    }
    SUBCASE("input validation") {
        CHECK_THROWS_AS(bd::choose_r(m, fake_sub(0.5, 4.0), [](double) { return 0.0; }, grid),
                        ParameterError);
        CHECK_THROWS_AS(bd::choose_r(m, cert, [](double) { return 0.0; },
                                     std::vector<double>{}),
                        ParameterError);
        CHECK_THROWS_AS(bd::choose_r(m, cert, [](double) { return 0.0; },
                                     std::vector<double>{2.0, 1.0}),
                        ParameterError);
        const std::vector<double> one{1.0};
        CHECK_THROWS_AS(
            bd::choose_r(m, cert, [](double) { return std::nan(""); }, one),
            ParameterError);
    }
}

TEST_CASE("upper_bound_M: closed form and vacuous region") {
    const auto m = testsup::canonical_pareto();
    const auto cert = fake_super(0.5, 4.0);

    CHECK(bd::upper_bound_M(m, cert, 2.0, 16.0) ==
          doctest::Approx(std::pow(12.5, -2.0)).epsilon(1e-12));
    CHECK(bd::upper_bound_M(m, cert, 2.0, 6.0 + 1e-7) <= 1.0);

    CHECK_THROWS_AS(bd::upper_bound_M(m, cert, 2.0, 6.0), DomainError);
    CHECK_THROWS_AS(bd::upper_bound_M(m, cert, 2.0, 5.9), DomainError);
    CHECK_THROWS_AS(bd::upper_bound_M(m, cert, -1.0, 16.0), ParameterError);
    CHECK_THROWS_AS(bd::upper_bound_M(m, fake_sub(0.5, 0.0), 2.0, 16.0), ParameterError);
}

TEST_CASE("certified lower and upper bounds nest") {
    const auto m = testsup::canonical_pareto();
    const auto sub = tailbound::potential::certify_sub(m, 0.5).cert;
    const auto super = tailbound::potential::certify_super(m, 0.5).cert;
    const double r = 2.0;

    for (double x = super.R + r + 0.5; x < 100.0; x *= 1.4) {
        const double lo = bd::lower_bound_M(m, sub, x);
        const double hi = bd::upper_bound_M(m, super, r, x);
        CHECK(lo <= hi);
        CHECK(bd::fkz_lower_bound(m, x) <= hi);
        CHECK(lo >= 0.0);
        CHECK(hi <= 1.0);
    }
}

TEST_CASE("upper_bound_Mtau: closed form, degenerate mean, monotone in x") {
    const auto m = testsup::canonical_pareto();
    const auto cert = fake_super(0.5, 4.0);
    const double tau = 1.1275;

    CHECK(bd::upper_bound_Mtau(m, cert, 2.0, tau, 16.0) ==
          doctest::Approx(2.0 * tau * std::pow(12.5, -3.0)).epsilon(1e-12));
    CHECK(bd::upper_bound_Mtau(m, cert, 2.0, 0.0, 16.0) == 0.0);

    double prev = 2.0;
    for (double x = 6.5; x < 60.0; x += 1.7) {
        const double v = bd::upper_bound_Mtau(m, cert, 2.0, tau, x);
        CHECK(v <= prev + 1e-15);
        prev = v;
    }

    CHECK_THROWS_AS(bd::upper_bound_Mtau(m, cert, 2.0, -1.0, 16.0), ParameterError);
    CHECK_THROWS_AS(bd::upper_bound_Mtau(m, cert, 2.0, tau, 6.0), DomainError);
    CHECK_THROWS_AS(bd::upper_bound_Mtau(m, fake_sub(0.5, 4.0), 2.0, tau, 16.0),
                    ParameterError);
}

TEST_CASE("lower_bound_Mtau: unit-interval identity and degenerate samples") {
    const auto m = testsup::canonical_pareto();
    const auto cert = fake_sub(0.5, 0.0);

    SUBCASE("one sample at -1 integrates the tail over a unit interval") {
        const std::vector<double> s{-1.0};
        for (double x : {2.0, 5.0, 12.0}) {
            const auto q = tailbound::integrate_adaptive(
                [&m](double u) { return m.tail(u); }, x, x + 1.0, {1e-13, 1e-13});
            const double want = std::max(0.0, q.value) / 1.5;
            CHECK(bd::lower_bound_Mtau(m, cert, s, x) ==
                  doctest::Approx(want).epsilon(1e-10));
        }
    }
    SUBCASE("samples collapsing to zero collapse the bound") {
        CHECK(bd::lower_bound_Mtau(m, cert, std::vector<double>{0.0}, 5.0) == 0.0);
        CHECK(bd::lower_bound_Mtau(m, cert, std::vector<double>{-1e-13}, 5.0) < 1e-13);
    }
    SUBCASE("mean over several samples, against the closed form") {
        const std::vector<double> s{-0.5, -1.0, -2.0};
        const double x = 7.0;
        double acc = 0.0;
        for (double v : s) acc += testsup::pareto_itail(3, 1, 1.5, x - v);
        const double want =
            std::max(0.0, testsup::pareto_itail(3, 1, 1.5, x) - acc / 3.0) / 1.5;
        CHECK(bd::lower_bound_Mtau(m, cert, s, x) ==
              doctest::Approx(want).epsilon(1e-13));
    }
    SUBCASE("rejects empty and positive samples, wrong certificate kind") {
        CHECK_THROWS_AS(bd::lower_bound_Mtau(m, cert, std::vector<double>{}, 5.0),
                        ParameterError);
        CHECK_THROWS_AS(
            bd::lower_bound_Mtau(m, cert, std::vector<double>{-1.0, 0.5}, 5.0),
            ParameterError);
        CHECK_THROWS_AS(bd::lower_bound_Mtau(m, fake_super(0.5, 0.0),
                                             std::vector<double>{-1.0}, 5.0),
                        ParameterError);
    }
}

TEST_CASE("asymp_Mtau pins to the jump tail") {
    const auto m = testsup::canonical_pareto();
    CHECK(bd::asymp_Mtau(m, 1.0, 15.0) ==
          doctest::Approx(testsup::pareto_tail(3, 1, 1.5, 15.0)).epsilon(1e-13));
    CHECK(bd::asymp_Mtau(m, 1.1275, 15.0) ==
          doctest::Approx(1.1275 * std::pow(17.5, -3.0)).epsilon(1e-12));
    CHECK(bd::asymp_Mtau(m, 1e6, 0.0) == 1.0);
    CHECK(bd::asymp_Mtau(m, 0.0, 15.0) == 0.0);
    CHECK_THROWS_AS(bd::asymp_Mtau(m, -0.5, 15.0), ParameterError);
}

TEST_CASE("lundberg exponent for the shifted exponential law") {
    const auto m = testsup::canonical_exp();
    const auto lb = bd::lundberg(m);

    // Independent oracle: bisect 1 - h = exp(-2h) on [0.5, 0.95].
    double lo = 0.5, hi = 0.95;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        ((1.0 - mid) - std::exp(-2.0 * mid) > 0.0 ? lo : hi) = mid;
    }
    const double h_oracle = 0.5 * (lo + hi);

    CHECK(lb.h0 == doctest::Approx(h_oracle).epsilon(1e-12));
    CHECK(lb.h0 == doctest::Approx(0.79681213002002).epsilon(1e-11));
    CHECK(lb.residual <= 1e-12);
    CHECK(std::abs(m.mgf(lb.h0) - 1.0) <= 1e-12);

    CHECK(lb.doob(0.0) == 1.0);
    CHECK(lb.doob(5.0) == doctest::Approx(std::exp(-5.0 * lb.h0)).epsilon(1e-13));
    CHECK(lb.doob(-1.0) == 1.0);

    CHECK_FALSE(lb.exp_moment_stau.has_value());
    CHECK_FALSE(lb.cl_prefactor.has_value());
}

TEST_CASE("lundberg cycle-end moment from samples") {
    const auto m = testsup::canonical_exp();
    const std::vector<double> s{-1.0, -2.0};
    const auto lb = bd::lundberg(m, s);
    const double want = 0.5 * (std::exp(-lb.h0) + std::exp(-2.0 * lb.h0));
    REQUIRE(lb.exp_moment_stau.has_value());
    CHECK(*lb.exp_moment_stau == doctest::Approx(want).epsilon(1e-13));
    CHECK(*lb.cl_prefactor == doctest::Approx(1.0 - want).epsilon(1e-13));
    CHECK(*lb.exp_moment_stau > 0.0);
    CHECK(*lb.exp_moment_stau < 1.0);

    CHECK_THROWS_AS(bd::lundberg(m, std::vector<double>{-1.0, 0.5}), ParameterError);
}

TEST_CASE("lundberg rejects laws without a usable exponent") {
    CHECK_THROWS_AS(bd::lundberg(testsup::canonical_pareto()), NoExponentError);
    CHECK_THROWS_AS(bd::lundberg(testsup::heavy_weibull()), NoExponentError);
    // Bounded increments that only ever step down: finite exponential moments,
    // but E exp(h xi) < 1 for every h > 0.
    CHECK_THROWS_AS(bd::lundberg(IncrementModel::point_mass(1.0)), NoRootError);
}

TEST_CASE("lundberg with a quadrature-backed exponential moment") {
    const auto m = testsup::light_weibull();
    const auto lb = bd::lundberg(m);
    CHECK(lb.residual <= 1e-12);
    CHECK(lb.h0 > 0.9);
    CHECK(lb.h0 < 1.05);
    // Independent erf-form oracle for the jump moment.
    const double against = std::exp(-lb.h0) * testsup::weibull2_jump_mgf(1.0, lb.h0);
    CHECK(against == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("tail curve interpolates, repairs monotonicity, clamps") {
    SUBCASE("construction guards") {
        CHECK_THROWS_AS(bd::TailCurve({}, {}), ParameterError);
        CHECK_THROWS_AS(bd::TailCurve({0.0, 1.0}, {0.5}), ParameterError);
        CHECK_THROWS_AS(bd::TailCurve({1.0, 1.0}, {0.5, 0.4}), ParameterError);
        CHECK_THROWS_AS(bd::TailCurve({1.0, 0.0}, {0.5, 0.4}), ParameterError);
        CHECK_THROWS_AS(bd::TailCurve({0.0, std::nan("")}, {0.5, 0.4}), ParameterError);
        CHECK_THROWS_AS(bd::TailCurve({0.0, 1.0}, {0.5, std::nan("")}), ParameterError);
    }
    SUBCASE("running-minimum repair and clamping") {
        const bd::TailCurve c({0.0, 1.0, 2.0}, {0.5, 0.6, 0.3});
        CHECK(c.values() == std::vector<double>{0.5, 0.5, 0.3});
        const bd::TailCurve d({0.0, 1.0}, {1.2, -0.1});
        CHECK(d.values() == std::vector<double>{1.0, 0.0});
    }
    SUBCASE("piecewise-linear evaluation with flat extension") {
        const bd::TailCurve c({0.0, 2.0}, {1.0, 0.0});
        CHECK(c(1.0) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(c(0.5) == doctest::Approx(0.75).epsilon(1e-15));
        CHECK(c(-5.0) == 1.0);
        CHECK(c(10.0) == 0.0);
    }
    SUBCASE("single node is a constant") {
        const bd::TailCurve c({5.0}, {0.3});
        CHECK(c(0.0) == 0.3);
        CHECK(c(5.0) == 0.3);
        CHECK(c(100.0) == 0.3);
    }
}

TEST_CASE("bound table populates the columns its inputs allow") {
    const auto m = testsup::canonical_pareto();
    const auto sub = tailbound::potential::certify_sub(m, 0.5).cert;
    const auto super = tailbound::potential::certify_super(m, 0.5).cert;
    const std::vector<double> stau{-0.5, -1.0, -2.0};
    const std::vector<double> xs{1.0, 5.0, 10.0, 20.0, 100.0};

    bd::BoundInputs in;
    in.sub = &sub;
    in.super = &super;
    in.r = 2.0;
    in.tau_mean = 1.1275;
    in.tau_mean_upper = 1.128;
    in.stau_samples = stau;

    const auto table = bd::build_bound_table(m, xs, in);
    REQUIRE(table.rows.size() == xs.size());
    const double edge = super.R + 2.0;

    for (const auto& row : table.rows) {
        CHECK(row.fkz_lower.has_value());
        CHECK(row.asymp_M.has_value());
        CHECK(row.lower_M.has_value());
        CHECK(row.lower_Mtau.has_value());
        CHECK(row.asymp_Mtau.has_value());
        CHECK_FALSE(row.doob.has_value());
        if (row.x > edge) {
            REQUIRE(row.upper_M.has_value());
            REQUIRE(row.upper_Mtau.has_value());
            CHECK(row.note.empty());
            CHECK(*row.lower_M <= *row.upper_M);
            CHECK(*row.fkz_lower <= *row.upper_M);
            CHECK(*row.lower_Mtau <= *row.upper_Mtau);
        } else {
            CHECK_FALSE(row.upper_M.has_value());
            CHECK_FALSE(row.upper_Mtau.has_value());
            CHECK(row.note.find("vacuous") != std::string::npos);
        }
        for (const auto& cell :
             {row.lower_M, row.upper_M, row.fkz_lower, row.asymp_M, row.lower_Mtau,
              row.upper_Mtau, row.asymp_Mtau}) {
            if (cell) {
                CHECK(*cell >= 0.0);
                CHECK(*cell <= 1.0);
            }
        }
    }

    CHECK(table.provenance["r"] == 2.0);
    CHECK(table.provenance["stau_samples"] == 3);
    CHECK(table.provenance["lundberg"].is_null());
    CHECK(table.provenance["certificates"]["sub"]["kind"] == "sub");
    CHECK(table.provenance["certificates"]["super"]["epsilon"] == 0.5);
}

TEST_CASE("bound table: sparse inputs, light-tail column, input guards") {
    const auto m = testsup::canonical_exp();
    const std::vector<double> xs{1.0, 3.0, 5.0};

    SUBCASE("no inputs gives only the certificate-free columns") {
        const auto table = bd::build_bound_table(m, xs, {});
        for (const auto& row : table.rows) {
            CHECK(row.fkz_lower.has_value());
            CHECK(row.asymp_M.has_value());
            CHECK_FALSE(row.lower_M.has_value());
            CHECK_FALSE(row.upper_M.has_value());
            CHECK_FALSE(row.lower_Mtau.has_value());
            CHECK_FALSE(row.upper_Mtau.has_value());
            CHECK_FALSE(row.asymp_Mtau.has_value());
            CHECK(row.note.empty());
        }
    }
    SUBCASE("a light-tail baseline fills the doob column") {
        const auto lb = bd::lundberg(m);
        bd::BoundInputs in;
        in.light_tail = &lb;
        const auto table = bd::build_bound_table(m, xs, in);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            REQUIRE(table.rows[i].doob.has_value());
            CHECK(*table.rows[i].doob ==
                  doctest::Approx(std::exp(-lb.h0 * xs[i])).epsilon(1e-13));
        }
        CHECK(table.provenance["lundberg"]["h0"] == lb.h0);
    }
    SUBCASE("grid and certificate-kind validation") {
        CHECK_THROWS_AS(bd::build_bound_table(m, std::vector<double>{}, {}),
                        ParameterError);
        CHECK_THROWS_AS(bd::build_bound_table(m, std::vector<double>{1.0, 1.0}, {}),
                        ParameterError);
        const auto wrong = fake_super(0.5, 4.0);
        bd::BoundInputs in;
        in.sub = &wrong;
        CHECK_THROWS_AS(bd::build_bound_table(m, xs, in), ParameterError);
    }
    SUBCASE("corrupt certificate constants trip the row invariant") {
        // A sub certificate claiming c far below the drift rate makes the
        // claimed lower bound exceed a valid upper bound.
        const auto pm = testsup::canonical_pareto();
        auto bad_sub = fake_sub(0.5, 0.0);
        bad_sub.c = 0.2;
        const auto super = fake_super(0.5, 0.0);
        bd::BoundInputs in;
        in.sub = &bad_sub;
        in.super = &super;
        in.r = 0.0;
        CHECK_THROWS_AS(
            bd::build_bound_table(pm, std::vector<double>{1.0, 2.0}, in),
            StatCheckError);
    }
}
