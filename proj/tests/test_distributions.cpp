#include <cmath>
#include <vector>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <gtest/gtest.h>

#include "distributions.hpp"
#include "fitter.hpp"

using namespace l0de;

TEST(Quantiles, TableValues) {
    EXPECT_NEAR(t_quantile(0.995, 6), 3.7074, 5e-5);
    EXPECT_NEAR(f_quantile(0.99, 1, 6), 13.745, 5e-4);
    EXPECT_NEAR(f_quantile(0.99, 2, 12), 6.9266, 5e-5);
    EXPECT_NEAR(f_quantile(0.99, 2, 27), 5.4881, 5e-5);
}

TEST(Quantiles, TMedianIsZero) {
    for (double df : {1.0, 2.0, 6.0, 30.0, 1000.0}) EXPECT_EQ(t_quantile(0.5, df), 0.0);
}

TEST(Quantiles, TSymmetric) {
    for (double df : {1.0, 3.0, 12.0}) {
        for (double p : {0.6, 0.9, 0.999}) EXPECT_NEAR(t_quantile(1 - p, df), -t_quantile(p, df), 1e-9);
    }
}

TEST(Quantiles, AgreeWithBoostMath) {
    for (double df : {1.0, 2.0, 3.0, 4.5, 6.0, 10.0, 27.0, 100.0, 1e4}) {
        boost::math::students_t t(df);
        for (double p : {1e-6, 0.001, 0.01, 0.1, 0.3, 0.55, 0.75, 0.9, 0.975, 0.995, 0.99999}) {
            const double expected = boost::math::quantile(t, p);
            EXPECT_NEAR(t_quantile(p, df), expected, 1e-6 * std::max(1.0, std::fabs(expected))) << "t p=" << p << " df=" << df;
            EXPECT_NEAR(t_cdf(expected, df), p, 1e-10) << "t cdf df=" << df;
        }
    }
    for (double d1 : {1.0, 2.0, 3.0, 7.0, 20.0}) {
        for (double d2 : {1.0, 2.0, 6.0, 12.0, 27.0, 200.0}) {
            boost::math::fisher_f f(d1, d2);
            for (double p : {0.01, 0.25, 0.5, 0.9, 0.99, 0.999}) {
                const double expected = boost::math::quantile(f, p);
                EXPECT_NEAR(f_quantile(p, d1, d2), expected, 1e-6 * std::max(1.0, expected)) << "F p=" << p << " df=" << d1 << "," << d2;
                EXPECT_NEAR(f_cdf(expected, d1, d2), p, 1e-10);
            }
        }
    }
}

TEST(Quantiles, FOneIsTSquared) {
    for (int nu = 2; nu <= 100; ++nu) {
        for (double q : {0.001, 0.01, 0.05, 0.2}) {
            const double t = t_quantile(1 - q / 2, nu);
            EXPECT_NEAR(f_quantile(1 - q, 1, nu), t * t, 1e-9 * std::max(1.0, t * t)) << "nu=" << nu << " q=" << q;
        }
    }
}

TEST(Quantiles, RejectInvalidArguments) {
    EXPECT_THROW(t_quantile(0.0, 5), Error);
    EXPECT_THROW(t_quantile(1.0, 5), Error);
    EXPECT_THROW(t_quantile(0.5, 0.5), Error);
    EXPECT_THROW(f_quantile(1.5, 1, 2), Error);
    EXPECT_THROW(f_quantile(0.9, 0, 2), Error);
    EXPECT_THROW(f_quantile(0.9, 2, -1), Error);
}

TEST(Tuning, AlphaTwoGroupTableValue) {
    const double alpha = alpha_from_q(0.01, 2, 8);
    EXPECT_NEAR(alpha, 0.5 * 3.7074 * 3.7074, 5e-4);
    EXPECT_NEAR(alpha, 6.8724, 5e-4);
    EXPECT_NEAR(alpha, alpha_from_q_t(0.01, 4, 4), 1e-9);

    std::vector<double> a{alpha, alpha}, s2{1.0, 0.25};
    auto lambda = lambda_from_alpha(a, s2, 4, 4);
    const double t = t_quantile(0.995, 6);
    EXPECT_NEAR(lambda[0], t * 1.0 * std::sqrt(0.5), 1e-9);
    EXPECT_NEAR(lambda[1], t * 0.5 * std::sqrt(0.5), 1e-9);
}

TEST(Tuning, FormsAgreeForTwoGroups) {
    for (std::size_t n1 = 2; n1 <= 12; ++n1) {
        for (std::size_t n2 = 2; n2 <= 12; n2 += 3) {
            for (double q : {0.001, 0.01, 0.1}) {
                EXPECT_NEAR(alpha_from_q(q, 2, n1 + n2), alpha_from_q_t(q, n1, n2), 1e-9);
            }
        }
    }
}

TEST(Tuning, AlphaThreeGroups) {
    EXPECT_NEAR(alpha_from_q(0.01, 3, 30), 5.4881, 5e-5);
}

TEST(Tuning, NoResidualDegreesOfFreedom) {
    try {
        alpha_from_q(0.01, 2, 2);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("no residual degrees of freedom"), std::string::npos);
    }
    EXPECT_THROW(alpha_from_q(0.0, 2, 8), Error);
    EXPECT_THROW(alpha_from_q(1.0, 2, 8), Error);
}
