#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "singlet/ensemble.hpp"

using namespace singlet;

namespace {

const PulseParams kPulse(5e7, 1.0);

}

TEST(EnsembleParams, SpinFromDouble)
{
    const EnsembleParams e = EnsembleParams::from_spin(1'000'000, 1.0);
    EXPECT_EQ(e.two_j(), 2);
    EXPECT_DOUBLE_EQ(e.collective_spin(), 1e6);
    EXPECT_DOUBLE_EQ(e.mixed_scaled_variance(), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(EnsembleParams::from_spin(10, 0.5).mixed_scaled_variance(), 0.5);
}

TEST(EnsembleParams, RejectsBadInput)
{
    EXPECT_THROW(EnsembleParams::from_spin(0, 1.0), std::invalid_argument);
    EXPECT_THROW(EnsembleParams::from_spin(10, 0.7), std::invalid_argument);
    EXPECT_THROW(EnsembleParams(10, 0), std::invalid_argument);
}

TEST(PulseParams, ValidatesLevelFactor)
{
    EXPECT_THROW(PulseParams(5e7, 1.0, 50.0, 0.0), std::invalid_argument);
    EXPECT_THROW(PulseParams(5e7, 1.0, 50.0, 1.5), std::invalid_argument);
    EXPECT_THROW(PulseParams(-1.0, 1.0), std::invalid_argument);
    EXPECT_TRUE(kPulse.lossless());
    EXPECT_FALSE(kPulse.with_optical_depth(50.0).lossless());
}

TEST(PulseParams, DefaultLevelFactor)
{
    EXPECT_DOUBLE_EQ(*default_level_factor(1), 1.0);
    EXPECT_DOUBLE_EQ(*default_level_factor(2), 8.0 / 9.0);
    EXPECT_FALSE(default_level_factor(3).has_value());
}

TEST(PulseParams, TimeScale)
{
    const EnsembleParams e(1'000'000, 2);
    EXPECT_NEAR(kPulse.time_scale(e), 1.0 / std::sqrt(5e7 * 1e6), 1e-20);
}

TEST(States, CompletelyMixedIsIsotropic)
{
    const GaussianState s = make_completely_mixed(EnsembleParams(1'000'000, 2), kPulse);
    EXPECT_TRUE(is_valid_covariance(s.cov));
    for (int k = kJx; k <= kJz; ++k) {
        EXPECT_DOUBLE_EQ(s.cov(k, k), 2.0 / 3.0);
    }
    EXPECT_DOUBLE_EQ(s.cov(kSx, kSx), 0.0);
    EXPECT_DOUBLE_EQ(s.cov(kSy, kSy), 0.5);
    EXPECT_DOUBLE_EQ(s.mean(kSx), 5e7);
    EXPECT_NEAR(xi_squared(s).xi_squared, 2.0, 1e-15); // j + 1
}

TEST(States, UpDownHasUnitSqueezing)
{
    const GaussianState s = make_product_updown(EnsembleParams(1'000'000, 2), kPulse);
    EXPECT_DOUBLE_EQ(s.cov(kJx, kJx), 0.5);
    EXPECT_DOUBLE_EQ(s.cov(kJy, kJy), 0.5);
    EXPECT_DOUBLE_EQ(s.cov(kJz, kJz), 0.0);
    EXPECT_DOUBLE_EQ(xi_squared(s).xi_squared, 1.0);
    EXPECT_THROW(make_product_updown(EnsembleParams(7, 1), kPulse), std::invalid_argument);
}

TEST(States, ScaledMeanRoundTrip)
{
    GaussianState s = make_completely_mixed(EnsembleParams(100, 1), kPulse);
    EXPECT_NEAR(s.scaled_mean()(kSx), std::sqrt(5e7), 1e-6);
    Vector6 m;
    m << 1, 2, 3, 4, 5, 6;
    s.set_scaled_mean(m);
    EXPECT_LT((s.scaled_mean() - m).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Squeezing, ReportFields)
{
    GaussianState s = make_completely_mixed(EnsembleParams(1000, 1), kPulse);
    s.cov(kJx, kJx) = 0.1;
    s.cov(kJy, kJy) = 0.2;
    s.cov(kJz, kJz) = 0.3;
    const SqueezingReport r = xi_squared(s);
    EXPECT_NEAR(r.xi_squared, 0.6, 1e-15);
    EXPECT_NEAR(r.var_x, 50.0, 1e-12);
    EXPECT_NEAR(r.unentangled_bound, 600.0, 1e-9);
    EXPECT_TRUE(r.entangled);
}

TEST(Squeezing, FieldSensitivityBoundedByXi)
{
    const GaussianState s = make_product_updown(EnsembleParams(1000, 1), kPulse);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    for (int i = 0; i < 100; ++i) {
        Vector3 d(n(rng), n(rng), n(rng));
        d.normalize();
        const FieldSensitivity f = field_sensitivity(s, d, 0.01);
        EXPECT_LE(f.fidelity_loss, f.bound + 1e-12);
    }
    EXPECT_THROW(field_sensitivity(s, Vector3(1, 1, 0), 0.1), std::invalid_argument);
    EXPECT_DOUBLE_EQ(fisher_upper_bound(s), 4.0 * 500.0);
}

TEST(Covariance, ValidityChecks)
{
    Matrix6 m = Matrix6::Identity();
    EXPECT_TRUE(is_valid_covariance(m));
    m(0, 1) = 1e-6;
    EXPECT_FALSE(is_valid_covariance(m)); // asymmetric
    m = Matrix6::Identity();
    m(2, 2) = -1e-3;
    EXPECT_FALSE(is_valid_covariance(m));
}

TEST(Covariance, ConditioningRejectsNegativeAndKeepsExactPsd)
{
    Matrix6 bad = Matrix6::Identity();
    bad(0, 0) = -0.1;
    EXPECT_THROW(detail::condition_covariance(bad), NumericError);

    Matrix6 good = Matrix6::Identity();
    good(0, 1) = good(1, 0) = 0.5;
    const Matrix6 copy = good;
    detail::condition_covariance(good);
    EXPECT_EQ(good, copy);
}
