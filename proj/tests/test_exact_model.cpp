#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "singlet/exact_model.hpp"

using namespace singlet::exact;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST(HigherSpin, Mapping)
{
    using Counts = std::pair<std::int64_t, std::int64_t>;
    EXPECT_EQ(map_higher_spin(10, 10, 1), Counts(10, 10));
    EXPECT_EQ(map_higher_spin(500'000, 500'000, 2), Counts(1'000'000, 1'000'000));
    EXPECT_EQ(map_higher_spin(3, 3, 3), Counts(9, 9));
    EXPECT_THROW(map_higher_spin(1, 1, 0), std::invalid_argument);
}

TEST(TwoGroup, Variances)
{
    const TwoGroupState s = TwoGroupState::balanced(1000, 1);
    EXPECT_DOUBLE_EQ(s.collective_spin(), 500.0);
    EXPECT_DOUBLE_EQ(s.prior_variance(), 250.0);
    EXPECT_DOUBLE_EQ(s.transverse_variance(), 250.0);
    EXPECT_FALSE(s.asymmetric());
    EXPECT_TRUE(TwoGroupState(4, 6, 1).asymmetric());
    EXPECT_THROW(TwoGroupState::balanced(7, 1), std::invalid_argument);
    EXPECT_THROW(TwoGroupState(3, 3, 1), std::invalid_argument); // odd spin-1/2 counts
    EXPECT_NO_THROW(TwoGroupState(3, 3, 2));
}

TEST(Kernel, VarianceScaling)
{
    EXPECT_DOUBLE_EQ(KernelG::at(2.0, 1e6).variance, 0.5 * 1e6 / 4.0);
    EXPECT_THROW(KernelG::at(0.0, 1e6), std::invalid_argument);
}

TEST(Kernel, FittedConstantIsOneHalf)
{
    for (double s0 : {2e3, 1e4}) {
        for (double j : {1e2, 1e4}) {
            for (double kappa : {0.5, 2.0}) {
                EXPECT_NEAR(fit_kernel_constant(s0, j, kappa), kKernelConstant, 1e-3) << s0 << " " << j << " " << kappa;
            }
        }
    }
}

TEST(VarJx, LimitsAndScaling)
{
    const TwoGroupState s = TwoGroupState::balanced(2'000'000, 1);
    const double J = s.collective_spin();
    EXPECT_NEAR(var_jx_exact(s, 1e-9), J / 2.0, 1e-6 * J);
    EXPECT_DOUBLE_EQ(var_jx_exact(s, kInf), 0.0);
    EXPECT_THROW(var_jx_exact(s, 0.0), std::invalid_argument);
    const double at_root = var_jx_exact(s, std::sqrt(J));
    EXPECT_GT(at_root, 0.1);
    EXPECT_LT(at_root, 10.0);
    std::vector<double> ratios;
    for (double big_j : {1e2, 1e4, 1e6}) {
        const TwoGroupState t = TwoGroupState::balanced(static_cast<std::int64_t>(2 * big_j), 1);
        const double r = var_jx_exact(t, std::pow(big_j, 0.25)) / std::sqrt(big_j);
        EXPECT_GE(r, 0.1);
        EXPECT_LE(r, 10.0);
        ratios.push_back(r);
    }
    EXPECT_NEAR(ratios.front(), ratios.back(), 0.05);
}

TEST(VarJx, QuadratureMatchesClosedForm)
{
    const TwoGroupState s = TwoGroupState::balanced(20'000, 1);
    const double J = s.collective_spin();
    for (double t = 0.1; t <= std::sqrt(J); t *= 1.7) {
        const double closed = var_jx_closed_form(s, t);
        EXPECT_NEAR(var_jx_quadrature(s, t), closed, kQuadratureAgreement * closed) << t;
    }
    EXPECT_NO_THROW(var_jx_exact(s, 3.0, true));
}

TEST(VarJx, AsymmetricGroupsUseSummedPrior)
{
    const TwoGroupState s(40, 100, 1);
    EXPECT_NEAR(var_jx_quadrature(s, 1.5), var_jx_closed_form(s, 1.5), 1e-8 * var_jx_closed_form(s, 1.5));
}

TEST(Xi, LimitsAndMonotone)
{
    const TwoGroupState s = TwoGroupState::balanced(1'000'000, 1);
    const double J = s.collective_spin();
    EXPECT_DOUBLE_EQ(xi_exact(s, 0.0), 1.0);
    EXPECT_NEAR(xi_exact(s, 1e-6), 1.0, 1e-6);
    EXPECT_NEAR(xi_exact(s, 10.0 * std::sqrt(J)), 0.5, 0.01);
    EXPECT_DOUBLE_EQ(xi_exact(s, kInf), 0.5);
    double previous = xi_exact(s, 0.0);
    for (double t = 0.01; t < 1e5; t *= 1.5) {
        const double xi = xi_exact(s, t);
        EXPECT_LE(xi, previous);
        previous = xi;
    }
    EXPECT_THROW(xi_exact(s, -1.0), std::invalid_argument);
}

TEST(Xi, CoincidesWithGaussianForUpDown)
{
    // Gaussian: first-segment Gamma_xx = (1/2)(1/2) / (1/2 + kappa^2 / 2) plus transverse 1/2.
    const TwoGroupState s = TwoGroupState::balanced(1'000'000, 2);
    for (double kappa : {0.25, 1.0, 2.0}) {
        EXPECT_NEAR(xi_exact(s, kappa), 0.5 / (1.0 + kappa * kappa) + 0.5, 1e-12);
    }
}
