/**
 * @file special_functions.hpp
 * @brief Regularized incomplete beta function and the F distribution tail.
 */
#pragma once

#include <cmath>
#include <limits>

#include "gazeskill/error.hpp"

namespace gazeskill {

namespace detail {

/// Continued fraction for I_x(a, b), evaluated with the modified Lentz method.
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 100000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b). The continued fraction is evaluated
/// on whichever side of the pivot (a + 1) / (a + b + 2) converges quickly.
inline double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw Error(Errc::InvalidArgument, "incomplete beta needs a, b > 0");
    if (std::isnan(x)) throw Error(Errc::InvalidArgument, "incomplete beta of NaN");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Upper-tail probability P(F > x) of the F distribution with (df1, df2)
/// degrees of freedom.
inline double f_sf(double x, double df1, double df2) {
    if (!(df1 >= 1.0) || !(df2 >= 1.0) || !std::isfinite(df1) || !std::isfinite(df2))
        throw Error(Errc::InvalidDf, "degrees of freedom must be >= 1");
    if (std::isnan(x) || x < 0.0) throw Error(Errc::InvalidArgument, "F statistic must be >= 0");
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return incomplete_beta(0.5 * df2, 0.5 * df1, df2 / (df2 + df1 * x));
}

/// Critical value c with P(F > c) = alpha, by bracketing and bisection.
inline double f_critical(double alpha, double df1, double df2) {
    if (!(alpha > 0.0) || !(alpha < 1.0)) throw Error(Errc::InvalidArgument, "alpha must lie in (0, 1)");
    double lo = 0.0, hi = 1.0;
    while (f_sf(hi, df1, df2) > alpha) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw Error(Errc::InvalidArgument, "F critical value out of range");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (f_sf(mid, df1, df2) > alpha)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace gazeskill
