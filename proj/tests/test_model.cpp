#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "hjb/model.hpp"

using namespace hjb;

TEST(Utility, ExponentialValues)
{
    EXPECT_DOUBLE_EQ(eval_utility(ExponentialUtility{1.0}, 0.0), -1.0);
    EXPECT_NEAR(eval_utility(ExponentialUtility{5.0}, 1.0), -6.7379e-3, 1e-7);
}

TEST(Utility, ConvexComboValue)
{
    EXPECT_NEAR(eval_utility(ConvexComboUtility{0.5, 2.0, 0.5}, 0.0), 0.0, 1e-15);
}

TEST(Utility, Derivatives)
{
    EXPECT_DOUBLE_EQ(eval_utility_prime(ExponentialUtility{1.0}, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(eval_utility_prime(ConvexComboUtility{0.5, 2.0, 0.5}, 0.0), 1.25);
    EXPECT_NEAR(eval_utility_prime(ExponentialUtility{2.0}, 1.0), 0.27067, 1e-5);
}

TEST(Utility, DerivativeMatchesCentralDifference)
{
    for (UtilitySpec u : {UtilitySpec{ExponentialUtility{1.0}}, UtilitySpec{ExponentialUtility{2.0}},
                          UtilitySpec{ConvexComboUtility{0.5, 2.0, 0.3}}}) {
        for (double x = -20.0; x <= 20.0; x += 0.37) {
            double h = 1e-5;
            double fd = (eval_utility(u, x + h) - eval_utility(u, x - h)) / (2 * h);
            double an = eval_utility_prime(u, x);
            EXPECT_GT(an, 0.0);
            EXPECT_NEAR(fd / an, 1.0, 1e-6) << "x=" << x;
        }
    }
}

TEST(Utility, ConcaveEverywhere)
{
    UtilitySpec u = ConvexComboUtility{0.5, 2.0, 0.5};
    for (double x = -10.0; x <= 10.0; x += 0.5) EXPECT_LT(eval_utility_second(u, x), 0.0);
}

TEST(RiskAversion, ExponentialIsConstant)
{
    auto xs = uniform_samples(-50, 50);
    auto rep = check_risk_aversion_band(ExponentialUtility{1.0}, xs);
    EXPECT_TRUE(rep.pass);
    EXPECT_DOUBLE_EQ(rep.min_ratio, 1.0);
    EXPECT_DOUBLE_EQ(rep.max_ratio, 1.0);
}

TEST(RiskAversion, ComboWithinBand)
{
    auto xs = uniform_samples(-10, 10);
    auto rep = check_risk_aversion_band(ConvexComboUtility{0.5, 2.0, 0.5}, xs);
    EXPECT_TRUE(rep.pass);
    EXPECT_GE(rep.min_ratio, 0.5);
    EXPECT_LE(rep.max_ratio, 2.0);
}

TEST(RiskAversion, MatchesQuotientOfDerivatives)
{
    UtilitySpec u = ConvexComboUtility{0.5, 2.0, 0.5};
    for (double x = -5.0; x <= 5.0; x += 0.25)
        EXPECT_NEAR(absolute_risk_aversion(u, x), -eval_utility_second(u, x) / eval_utility_prime(u, x), 1e-12);
}

TEST(RiskAversion, WrongBandFails)
{
    auto xs = uniform_samples(-10, 10);
    auto rep = check_risk_aversion_band(ConvexComboUtility{0.5, 2.0, 0.5}, xs, {0.6, 2.0});
    EXPECT_FALSE(rep.pass);
    EXPECT_LT(rep.min_ratio, 0.6);
}

TEST(RiskAversion, EmptySamplesRejected)
{
    std::vector<double> none;
    try {
        check_risk_aversion_band(ExponentialUtility{1.0}, none);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::usage);
    }
}

TEST(Conjugate, QuadraticValues)
{
    EXPECT_EQ(fenchel_conjugate(QuadraticCost{0.1}, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(fenchel_conjugate(QuadraticCost{0.1}, 1.0), 2.5);
    EXPECT_DOUBLE_EQ(fenchel_conjugate(QuadraticCost{0.25}, -2.0), 4.0);
    EXPECT_EQ(fenchel_conjugate_prime(QuadraticCost{0.1}, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(fenchel_conjugate_prime(QuadraticCost{0.1}, 1.0), 5.0);
    EXPECT_DOUBLE_EQ(fenchel_conjugate_prime(QuadraticCost{0.1}, -1.0), -5.0);
}

TEST(Conjugate, BruteForceSupremumQuadratic)
{
    CostSpec c = QuadraticCost{0.1};
    for (double y : {-3.0, -1.0, -0.2, 0.0, 0.5, 2.0, 4.0})
        EXPECT_NEAR(brute_force_conjugate(c, y), y * y / 0.4, 1e-6) << "y=" << y;
}

TEST(Conjugate, BruteForceSupremumQuartic)
{
    CostSpec c = quartic_cost(0.2);
    for (double y : {-3.0, -0.7, 0.0, 1.3, 5.0})
        EXPECT_NEAR(brute_force_conjugate(c, y, 10.0), fenchel_conjugate(c, y), 1e-6) << "y=" << y;
}

TEST(Conjugate, DerivativeMatchesDifference)
{
    for (CostSpec c : {CostSpec{QuadraticCost{0.1}}, CostSpec{quartic_cost(0.2)}})
        for (double y = -4.0; y <= 4.0; y += 0.3) {
            double h = 1e-6;
            double fd = (fenchel_conjugate(c, y + h) - fenchel_conjugate(c, y - h)) / (2 * h);
            EXPECT_NEAR(fd, fenchel_conjugate_prime(c, y), 1e-6 * std::max(1.0, std::abs(fd)));
        }
}

TEST(Conjugate, SubgradientInequality)
{
    for (CostSpec c : {CostSpec{QuadraticCost{0.1}}, CostSpec{QuadraticCost{2.0}}, CostSpec{quartic_cost(0.5)}})
        for (double a = -10.0; a <= 10.0; a += 0.173) {
            if (a == 0.0) continue;
            double fs = fenchel_conjugate(c, a);
            EXPECT_GE(fs, 0.0);
            EXPECT_GT(a * fenchel_conjugate_prime(c, a), fs);
        }
}

TEST(Conjugate, MonotoneOnHalfLines)
{
    for (CostSpec c : {CostSpec{QuadraticCost{0.1}}, CostSpec{quartic_cost(0.5)}}) {
        double prev = fenchel_conjugate(c, -10.0);
        for (double y = -9.9; y <= 0.0; y += 0.1) {
            double v = fenchel_conjugate(c, y);
            EXPECT_LE(v, prev);
            prev = v;
        }
        prev = 0.0;
        for (double y = 0.0; y <= 10.0; y += 0.1) {
            double v = fenchel_conjugate(c, y);
            EXPECT_GE(v, prev);
            prev = v;
        }
    }
}

TEST(Conjugate, DivergingCustomConjugateIsDomainError)
{
    CustomCost c = quartic_cost(1.0);
    c.f_star = [](double y) { return y == 0.0 ? 0.0 : INFINITY; };
    try {
        fenchel_conjugate(CostSpec{c}, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::domain);
    }
}

TEST(Validation, AsymmetricCostRejected)
{
    CustomCost c = quartic_cost(1.0);
    c.f = [](double x) { return x > 0 ? x * x : 2 * x * x; };
    EXPECT_THROW(validate_cost(CostSpec{c}), Error);
    EXPECT_NO_THROW(validate_cost(CostSpec{quartic_cost(1.0)}));
}

TEST(Validation, ModelInvariants)
{
    ModelParams p;
    EXPECT_NO_THROW(validate(p, -50, 50));
    p.sigma = 0.0;
    EXPECT_THROW(validate(p, -50, 50), Error);
    p.sigma = 0.1;
    p.big_b = -1.0;
    EXPECT_THROW(validate(p, -50, 50), Error);

    ModelParams q;
    q.big_b = 1.0;
    q.utility = ConvexComboUtility{0.5, 2.0, 0.6}; // mu / A1 > 1
    EXPECT_THROW(validate(q, 0, 20), Error);
    q.utility = ConvexComboUtility{0.5, 2.0, 0.25};
    EXPECT_NO_THROW(validate(q, 0, 20));
    q.utility = ConvexComboUtility{1.5, 2.0, 0.25}; // A1 >= 1
    EXPECT_THROW(validate(q, 0, 20), Error);
}

TEST(Validation, LogShiftIsOverflowSafe)
{
    ModelParams p;
    p.utility = ExponentialUtility{5.0};
    p.big_b = 1.0;
    // exp(1000) is not representable, its logarithm is
    EXPECT_NEAR(log_b_minus_u(p, -200.0), 1000.0, 1e-9);
    EXPECT_NEAR(log_b_minus_u(p, 200.0), 0.0, 1e-12);
}
