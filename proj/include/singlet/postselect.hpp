/**
 * @file postselect.hpp
 * @brief Truncated-Gaussian post-selection statistics.
 *
 * Runs are retained only when the measured spin mean satisfies |<J_l>| <= B.
 * With Delta the spread of measured means and I(f, L) = int_{-L}^{L} f(x) exp(-x^2 / 2 Delta^2) dx,
 *   q  = I(1, B) / I(1, inf)                                       (retained fraction)
 *   mu = [I(x^2, B) / I(1, B)] / [I(x^2, inf) / I(1, inf)]         (variance ratio)
 * Both depend on B / Delta only, so everything here is normalized to Delta = 1.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace singlet {

namespace detail {
inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();
}

/// Integrand weight of truncated_integral: 1 or x^2.
enum class Moment { zeroth = 0, second = 2 };

/// I(f, L) for f = 1 or x^2 with Delta = 1, via the error function.
inline double truncated_integral(Moment power, double limit)
{
    if (std::isnan(limit) || limit < 0.0) {
        throw std::invalid_argument("truncation limit must be >= 0");
    }
    const double root_two_pi = std::sqrt(2.0 * std::numbers::pi);
    if (std::isinf(limit)) {
        return root_two_pi;
    }
    const double zeroth = root_two_pi * std::erf(limit / std::numbers::sqrt2);
    if (power == Moment::zeroth) {
        return zeroth;
    }
    return zeroth - 2.0 * limit * std::exp(-0.5 * limit * limit);
}

/// Same integral by adaptive Gauss-Kronrod quadrature; kept as an independent check.
inline double truncated_integral_quadrature(Moment power, double limit)
{
    if (std::isnan(limit) || limit < 0.0) {
        throw std::invalid_argument("truncation limit must be >= 0");
    }
    auto f = [power](double x) {
        const double w = std::exp(-0.5 * x * x);
        return power == Moment::zeroth ? w : x * x * w;
    };
    using boost::math::quadrature::gauss_kronrod;
    if (std::isinf(limit)) {
        return gauss_kronrod<double, 61>::integrate(f, -detail::kUnbounded, detail::kUnbounded, 15, 1e-14);
    }
    if (limit == 0.0) {
        return 0.0;
    }
    return gauss_kronrod<double, 61>::integrate(f, -limit, limit, 15, 1e-14);
}

struct PostSelectionRule {
    /// B / Delta; infinite means no selection.
    double threshold_ratio;
    double retained_fraction; // q
    double variance_ratio;    // mu
};

/// Builds the rule for a threshold B / Delta (may be infinite).
inline PostSelectionRule make_rule(double threshold_ratio)
{
    if (std::isnan(threshold_ratio) || threshold_ratio <= 0.0) {
        throw std::invalid_argument("threshold ratio must be positive, got " + std::to_string(threshold_ratio));
    }
    if (std::isinf(threshold_ratio)) {
        return {threshold_ratio, 1.0, 1.0};
    }
    const double full0 = truncated_integral(Moment::zeroth, detail::kUnbounded);
    const double full2 = truncated_integral(Moment::second, detail::kUnbounded);
    const double cut0 = truncated_integral(Moment::zeroth, threshold_ratio);
    const double cut2 = truncated_integral(Moment::second, threshold_ratio);
    const double q = cut0 / full0;
    const double mu = (cut2 / cut0) / (full2 / full0);
    return {threshold_ratio, q, mu};
}

struct InvertedRule {
    PostSelectionRule rule;
    /// Set when the solution sits beyond B / Delta = 5, where q is within 1e-6 of 1.
    bool extreme;
};

/// Finds B / Delta with q(B / Delta) = target_q by bisection on (0, 10].
inline InvertedRule invert_for_q(double target_q)
{
    if (!(target_q > 0.0 && target_q < 1.0)) {
        throw std::invalid_argument("target retention must lie in (0, 1), got " + std::to_string(target_q));
    }
    double lo = 0.0;
    double hi = 10.0;
    // q(B) = erf(B / sqrt2) is strictly increasing; 200 halvings reach the double grid.
    for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) {
            break;
        }
        if (make_rule(mid).retained_fraction < target_q) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    PostSelectionRule rule = make_rule(hi);
    return {rule, hi > 5.0};
}

/// Unconditional variance after post-selection: only the run-to-run spread of
/// the means (prior - conditional) is scaled by mu.
inline double apply_postselection(double prior_var, double conditional_var, const PostSelectionRule& rule)
{
    if (!(conditional_var >= 0.0) || conditional_var > prior_var) {
        throw std::invalid_argument("post-selection needs 0 <= conditional_var <= prior_var");
    }
    return conditional_var + rule.variance_ratio * (prior_var - conditional_var);
}

/// Overall retained fraction for `steps` independent selections with the same rule.
inline double overall_retention(const PostSelectionRule& rule, int steps)
{
    return std::pow(rule.retained_fraction, steps);
}

struct RejectionSample {
    double acceptance;
    double accepted_variance;
};

/// Draws `draws` standard normals and keeps those with |x| <= threshold_ratio.
inline RejectionSample sample_postselection(double threshold_ratio, std::size_t draws, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::size_t kept = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < draws; ++i) {
        const double x = normal(rng);
        if (std::abs(x) <= threshold_ratio) {
            ++kept;
            sum += x;
            sum_sq += x * x;
        }
    }
    if (kept == 0) {
        return {0.0, 0.0};
    }
    const double n = static_cast<double>(kept);
    const double mean = sum / n;
    return {n / static_cast<double>(draws), sum_sq / n - mean * mean};
}

} // namespace singlet
