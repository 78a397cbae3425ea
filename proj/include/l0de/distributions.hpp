#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "error.hpp"

/**
 * @file distributions.hpp
 *
 * @brief Regularized incomplete beta function, its inverse, and the t and F
 * quantiles derived from it.
 */

namespace l0de {

namespace beta_detail {

// Continued fraction for I_x(a, b), modified Lentz evaluation.
inline double continued_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    const double qab = a + b, qap = a + 1, qam = a - 1;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int k = 1; k <= 10000; ++k) {
        const double m2 = 2.0 * k;
        double aa = k * (b - k) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + k) * (qab + k) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < eps) {
            return h;
        }
    }
    throw Error("incomplete beta continued fraction failed to converge");
}

inline double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

} // namespace beta_detail

/// Regularized incomplete beta function I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (!(a > 0) || !(b > 0)) {
        throw Error("incomplete_beta: shape parameters must be positive");
    }
    if (!(x >= 0 && x <= 1)) {
        throw Error("incomplete_beta: x must lie in [0, 1]");
    }
    if (x == 0) return 0;
    if (x == 1) return 1;
    const double log_front = a * std::log(x) + b * std::log1p(-x) - beta_detail::log_beta(a, b);
    if (x < (a + 1) / (a + b + 2)) {
        return std::exp(log_front) * beta_detail::continued_fraction(a, b, x) / a;
    }
    return 1.0 - std::exp(log_front) * beta_detail::continued_fraction(b, a, 1.0 - x) / b;
}

/**
 * Solves I_x(a, b) = p for x by safeguarded Newton iteration inside a shrinking
 * bisection bracket.
 */
inline double inverse_incomplete_beta(double a, double b, double p) {
    if (!(a > 0) || !(b > 0)) {
        throw Error("inverse_incomplete_beta: shape parameters must be positive");
    }
    if (!(p >= 0 && p <= 1)) {
        throw Error("inverse_incomplete_beta: p must lie in [0, 1]");
    }
    if (p == 0) return 0;
    if (p == 1) return 1;

    const double lbeta = beta_detail::log_beta(a, b);
    double lo = 0, hi = 1;
    double x = a / (a + b);
    for (int iter = 0; iter < 300; ++iter) {
        const double f = incomplete_beta(a, b, x) - p;
        if (f == 0) {
            return x;
        }
        if (f < 0) {
            lo = x;
        } else {
            hi = x;
        }
        const double log_pdf = (a - 1) * std::log(x) + (b - 1) * std::log1p(-x) - lbeta;
        double next = x - f / std::exp(log_pdf);
        if (!(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        if (std::fabs(next - x) <= 4 * std::numeric_limits<double>::epsilon() * x || hi - lo <= std::numeric_limits<double>::min()) {
            return next;
        }
        x = next;
    }
    return x;
}

/// CDF of Student's t with `df` degrees of freedom.
inline double t_cdf(double t, double df) {
    if (!(df > 0)) {
        throw Error("t_cdf: degrees of freedom must be positive");
    }
    const double x = df / (df + t * t);
    const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
    return t > 0 ? 1.0 - tail : tail;
}

/// Inverse CDF of Student's t.
inline double t_quantile(double p, double df) {
    if (!(p > 0 && p < 1)) {
        throw Error("t_quantile: p must lie in (0, 1)");
    }
    if (!(df >= 1)) {
        throw Error("t_quantile: degrees of freedom must be at least 1");
    }
    if (p == 0.5) {
        return 0.0;
    }
    const double upper = p > 0.5 ? 1.0 - p : p; // one-sided tail mass
    const double two_tail = 2.0 * upper;
    double t2;
    if (two_tail < 0.5) {
        // tail mass = I_{df/(df+t^2)}(df/2, 1/2)
        const double x = inverse_incomplete_beta(0.5 * df, 0.5, two_tail);
        t2 = df * (1.0 - x) / x;
    } else {
        // central mass = I_{t^2/(df+t^2)}(1/2, df/2)
        const double y = inverse_incomplete_beta(0.5, 0.5 * df, 1.0 - two_tail);
        t2 = df * y / (1.0 - y);
    }
    const double t = std::sqrt(t2);
    return p > 0.5 ? t : -t;
}

/// CDF of the F distribution.
inline double f_cdf(double f, double df1, double df2) {
    if (!(df1 > 0) || !(df2 > 0)) {
        throw Error("f_cdf: degrees of freedom must be positive");
    }
    if (f <= 0) {
        return 0;
    }
    return incomplete_beta(0.5 * df1, 0.5 * df2, df1 * f / (df1 * f + df2));
}

/// Inverse CDF of the F distribution.
inline double f_quantile(double p, double df1, double df2) {
    if (!(p > 0 && p < 1)) {
        throw Error("f_quantile: p must lie in (0, 1)");
    }
    if (!(df1 >= 1) || !(df2 >= 1)) {
        throw Error("f_quantile: degrees of freedom must be at least 1");
    }
    // Upper tail mass 1 - p = I_{df2/(df2+df1 F)}(df2/2, df1/2); solving on the
    // complement keeps precision for large quantiles.
    const double y = inverse_incomplete_beta(0.5 * df2, 0.5 * df1, 1.0 - p);
    return df2 * (1.0 - y) / (df1 * y);
}

} // namespace l0de
