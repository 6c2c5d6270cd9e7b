#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <tuple>
#include <vector>

#include "gazeskill/special_functions.hpp"
#include "oracles.hpp"

using namespace gazeskill;

namespace {

/// P(F > x) by numerical integration of the F density.
double quadrature_sf(double x, double d1, double d2) {
    auto pdf = [=](double t) { return oracle::f_pdf(t, d1, d2); };
    // integrate whichever side is better conditioned
    if (x < 1.0) {
        boost::math::quadrature::tanh_sinh<double> ts;
        return 1.0 - ts.integrate(pdf, 0.0, x);
    }
    boost::math::quadrature::exp_sinh<double> es;
    return es.integrate(pdf, x, std::numeric_limits<double>::infinity());
}

std::vector<std::tuple<double, double, double>> grid30() {
    const double xs[] = {0.05, 0.4, 1.0, 2.5, 10.3};
    const std::pair<double, double> dfs[] = {{1, 1}, {2, 18}, {8, 72}, {4, 10}, {1, 30}, {12, 5}};
    std::vector<std::tuple<double, double, double>> g;
    for (double x : xs)
        for (auto [a, b] : dfs) g.emplace_back(x, a, b);
    return g;
}

}  // namespace

TEST(FSf, ZeroIsOne) {
    for (double a : {1.0, 2.0, 7.0})
        for (double b : {1.0, 3.0, 50.0}) EXPECT_EQ(f_sf(0.0, a, b), 1.0);
}

TEST(FSf, MedianOfF22) { EXPECT_NEAR(f_sf(1.0, 2.0, 2.0), 0.5, 1e-10); }

TEST(FSf, ClosedForms) {
    for (double x : {0.01, 0.3, 1.0, 4.0, 100.0}) {
        EXPECT_NEAR(f_sf(x, 2.0, 2.0), 1.0 / (1.0 + x), 1e-12);
        EXPECT_NEAR(f_sf(x, 1.0, 1.0), 1.0 - 2.0 / M_PI * std::atan(std::sqrt(x)), 1e-12);
        // F(2, d2): P(F > x) = (1 + 2x/d2)^(-d2/2)
        EXPECT_NEAR(f_sf(x, 2.0, 9.0), std::pow(1.0 + 2.0 * x / 9.0, -4.5), 1e-12);
    }
}

TEST(FSf, InteractionReportedInPaperIsSignificant) { EXPECT_LT(f_sf(10.3, 8.0, 72.0), 0.001); }

TEST(FSf, MatchesQuadratureOnGrid) {
    const auto g = grid30();
    ASSERT_EQ(g.size(), 30u);
    for (auto [x, a, b] : g) EXPECT_NEAR(f_sf(x, a, b), quadrature_sf(x, a, b), 1e-8) << x << " " << a << " " << b;
}

TEST(FSf, MonotoneAndVanishing) {
    for (auto [a, b] : {std::pair{2.0, 18.0}, {8.0, 72.0}, {1.0, 1.0}}) {
        double prev = 1.0;
        for (double x = 0.0; x < 200.0; x += 0.37) {
            const double p = f_sf(x, a, b);
            EXPECT_LE(p, prev);
            EXPECT_GE(p, 0.0);
            prev = p;
        }
        EXPECT_LT(f_sf(1e8, a, b), 1e-3);
        EXPECT_EQ(f_sf(std::numeric_limits<double>::infinity(), a, b), 0.0);
    }
}

TEST(FSf, Errors) {
    try {
        f_sf(1.0, 0.5, 3.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InvalidDf);
    }
    EXPECT_THROW(f_sf(-1.0, 2.0, 3.0), Error);
    EXPECT_THROW(f_sf(std::nan(""), 2.0, 3.0), Error);
}

TEST(IncompleteBeta, Identities) {
    for (double x : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
        EXPECT_NEAR(incomplete_beta(1.0, 1.0, x), x, 1e-14);
        EXPECT_NEAR(incomplete_beta(3.0, 1.0, x), x * x * x, 1e-14);
        for (auto [a, b] : {std::pair{0.5, 4.0}, {9.0, 36.0}, {2.5, 2.5}})
            EXPECT_NEAR(incomplete_beta(a, b, x), 1.0 - incomplete_beta(b, a, 1.0 - x), 1e-13);
    }
}

TEST(FCritical, InvertsSurvival) {
    for (auto [a, b] : {std::pair{2.0, 18.0}, {8.0, 72.0}, {1.0, 2.0}, {2.0, 5.0}})
        for (double alpha : {0.001, 0.01, 0.05, 0.5}) {
            const double c = f_critical(alpha, a, b);
            EXPECT_NEAR(f_sf(c, a, b), alpha, 1e-12);
        }
    // textbook table value F_0.05(2, 18) = 3.5546
    EXPECT_NEAR(f_critical(0.05, 2, 18), 3.5546, 5e-5);
}
