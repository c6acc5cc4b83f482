#include <cmath>

#include <gtest/gtest.h>

#include "singlet/oracle.hpp"

using namespace singlet::oracle;

TEST(Oracle, ZeroCouplingKeepsInitialVariances)
{
    for (int n : {2, 4, 6}) {
        const OracleResult r = brute_force_oracle({n, 21, 0.0});
        EXPECT_NEAR(r.var_x, n / 4.0, 1e-12);
        EXPECT_NEAR(r.var_y, n / 4.0, 1e-12);
        EXPECT_NEAR(r.var_z, 0.0, 1e-12);
        EXPECT_NEAR(r.outcome_probability, 1.0, 1e-12);
    }
}

TEST(Oracle, MixedZeroCoupling)
{
    const OracleResult r = brute_force_oracle({3, 11, 0.0, InitialState::mixed});
    for (double v : {r.var_x, r.var_y, r.var_z}) {
        EXPECT_NEAR(v, 0.75, 1e-12);
    }
}

TEST(Oracle, CloseToGaussianAtModerateSize)
{
    const double g = gaussian_var_jx(4, 2.0);
    const OracleResult r = brute_force_oracle({4, 41, 2.0});
    // O(1 / sqrt(S0)) with S0 = 20.
    EXPECT_LT(std::abs(r.var_x - g) / g, 1.0 / std::sqrt(20.0));
}

TEST(Oracle, ReferenceErrors)
{
    // Relative var(Jx) errors from an independent dense prototype.
    struct Case {
        int atoms, levels;
        double kappa, error;
    };
    for (const Case& c : {Case{2, 21, 0.5, 0.0018}, Case{2, 81, 2.0, 0.1994}, Case{4, 41, 1.0, 0.0041},
                          Case{6, 81, 1.0, 0.0016}}) {
        const double g = gaussian_var_jx(c.atoms, c.kappa);
        const double err = std::abs(brute_force_oracle({c.atoms, c.levels, c.kappa}).var_x - g) / g;
        EXPECT_NEAR(err, c.error, 5e-5) << c.atoms << " " << c.levels << " " << c.kappa;
    }
}

TEST(Oracle, AveragedReadoutConservesTransverseVariance)
{
    for (double kappa : {0.5, 1.0, 2.0}) {
        const OracleResult r = brute_force_oracle({4, 41, kappa});
        EXPECT_NEAR(r.var_y + r.var_z, 1.0, 1e-12);
    }
}

TEST(Oracle, ProjectedReadoutIsNormalizedAndReducesVariance)
{
    const OracleResult r = brute_force_oracle({2, 21, 1.0, InitialState::updown, Readout::project_sy_zero});
    EXPECT_GT(r.outcome_probability, 0.0);
    EXPECT_LT(r.outcome_probability, 1.0);
    EXPECT_LT(r.var_x, 0.5);
}

TEST(Oracle, RejectsBadSizes)
{
    EXPECT_THROW(brute_force_oracle({0, 21, 1.0}), std::invalid_argument);
    EXPECT_THROW(brute_force_oracle({9, 21, 1.0}), std::invalid_argument);
    EXPECT_THROW(brute_force_oracle({2, 20, 1.0}), std::invalid_argument);
    EXPECT_THROW(brute_force_oracle({2, 83, 1.0}), std::invalid_argument);
    EXPECT_THROW(brute_force_oracle({3, 21, 1.0}), std::invalid_argument); // updown needs even N
    EXPECT_THROW(brute_force_oracle({2, 21, -1.0}), std::invalid_argument);
    EXPECT_EQ(oracle_dimension(8, 81), 256u * 81u);
    EXPECT_GT(oracle_memory_bytes({8, 81, 1.0}), oracle_dimension(8, 81) * 16);
}
