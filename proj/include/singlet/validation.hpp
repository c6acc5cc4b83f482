/**
 * @file validation.hpp
 * @brief Named pass/fail checks over every module, as run by `validate`.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <json.hpp>

#include "singlet/experiment.hpp"

namespace singlet {

struct Check {
    std::string name;
    bool passed;
    double observed;
    double expected;
    double tolerance;
    std::string detail;
};

inline Check check_near(std::string name, double observed, double expected, double tolerance, std::string detail = {})
{
    const bool ok = std::abs(observed - expected) <= tolerance;
    return {std::move(name), ok, observed, expected, tolerance, std::move(detail)};
}

inline nlohmann::json to_json(const Check& c)
{
    return {{"name", c.name},         {"passed", c.passed},       {"observed", c.observed},
            {"expected", c.expected}, {"tolerance", c.tolerance}, {"detail", c.detail}};
}

struct ValidationReport {
    std::vector<Check> checks;

    bool passed() const
    {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
    }
    std::size_t failures() const
    {
        return static_cast<std::size_t>(std::count_if(checks.begin(), checks.end(), [](const Check& c) { return !c.passed; }));
    }
    nlohmann::json to_json() const
    {
        nlohmann::json list = nlohmann::json::array();
        for (const Check& c : checks) {
            list.push_back(singlet::to_json(c));
        }
        return {{"passed", passed()}, {"failures", failures()}, {"total", checks.size()}, {"checks", list}};
    }
};

// ---------------------------------------------------------------------------
// Fuzzing helpers

namespace fuzz {

/// Random Gaussian state with covariance A A^T, A entries uniform in [-1, 1].
template <typename Rng>
GaussianState random_state(Rng& rng, const EnsembleParams& ensemble, const PulseParams& pulse)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix6 a;
    for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 6; ++c) {
            a(r, c) = u(rng);
        }
    }
    GaussianState s = make_completely_mixed(ensemble, pulse);
    s.cov = a * a.transpose();
    s.cov = 0.5 * (s.cov + s.cov.transpose()).eval();
    Vector6 scaled;
    for (int k = 0; k < 6; ++k) {
        scaled(k) = u(rng);
    }
    scaled(kSx) = std::sqrt(pulse.stokes_number()); // polarized light
    s.set_scaled_mean(scaled);
    return s;
}

inline double min_eigenvalue(const Matrix6& m)
{
    Eigen::SelfAdjointEigenSolver<Matrix6> solver(0.5 * (m + m.transpose()));
    return solver.eigenvalues().minCoeff();
}

inline double scale_of(const Matrix6& m)
{
    return std::max(1.0, m.cwiseAbs().maxCoeff());
}

/// Per-property failure counts over `cases` random states.
struct FuzzOutcome {
    int cases = 0;
    int contraction_failures = 0;
    int psd_failures = 0;
    int rotation_failures = 0;
    int fixed_point_failures = 0;
};

inline FuzzOutcome run_invariant_fuzz(int cases, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const EnsembleParams ensemble(1'000'000, 2);
    const PulseParams pulse(5e7, 1.0, kInfinity, 8.0 / 9.0);
    FuzzOutcome out;
    out.cases = cases;
    for (int i = 0; i < cases; ++i) {
        const GaussianState s = random_state(rng, ensemble, pulse);
        const double scale = scale_of(s.cov);

        // Readout never increases any variance: Gamma - Gamma_M is PSD, Gamma_M too.
        const GaussianState m = measure_sy(s).state;
        if (min_eigenvalue(s.cov - m.cov) < -1e-10 * scale || min_eigenvalue(m.cov) < -1e-10 * scale ||
            std::abs(m.cov(kSy, kSy)) > 1e-10 * scale) {
            ++out.contraction_failures;
        }

        // Every map keeps the covariance valid.
        const double kappa = 3.0 * unit(rng);
        const double eta = unit(rng);
        bool psd_ok = true;
        try {
            GaussianState t = evolve(s, kappa);
            psd_ok = psd_ok && is_valid_covariance(t.cov);
            t = apply_losses(t, LossChannel::make(eta, ensemble));
            psd_ok = psd_ok && is_valid_covariance(t.cov);
            t = measure_sy(t).state;
            psd_ok = psd_ok && is_valid_covariance(t.cov);
            t = feedback_reset(t, unit(rng));
            psd_ok = psd_ok && is_valid_covariance(t.cov);
        } catch (const NumericError&) {
            psd_ok = false;
        }
        if (!psd_ok) {
            ++out.psd_failures;
        }

        // Axis rotations keep the atomic trace and invert exactly.
        const double trace = s.atomic_cov().trace();
        for (Axis axis : {Axis::x, Axis::y, Axis::z}) {
            const GaussianState r = rotate_to_axis(s, axis);
            const GaussianState back = rotate_from_axis(r, axis);
            if (std::abs(r.atomic_cov().trace() - trace) > 1e-12 * scale ||
                (back.cov - s.cov).cwiseAbs().maxCoeff() > 1e-12 * scale ||
                (back.mean - s.mean).cwiseAbs().maxCoeff() > 1e-9 * s.mean.cwiseAbs().maxCoeff()) {
                ++out.rotation_failures;
                break;
            }
        }

        // The completely mixed atomic block is the fixed point of the loss channel.
        GaussianState mixed = s;
        mixed.cov.topLeftCorner<3, 3>() = ensemble.mixed_scaled_variance() * Matrix3::Identity();
        mixed.cov.topRightCorner<3, 3>().setZero();
        mixed.cov.bottomLeftCorner<3, 3>().setZero();
        const GaussianState damped = apply_losses(mixed, LossChannel::make(eta, ensemble));
        if ((damped.atomic_cov() - mixed.atomic_cov()).cwiseAbs().maxCoeff() > 1e-12) {
            ++out.fixed_point_failures;
        }
    }
    return out;
}

} // namespace fuzz

// ---------------------------------------------------------------------------
// Independent per-axis recursion for the lossy thermal sequence

/// xi^2 of the lossy x, y, z sequence from scalar per-axis updates: every axis
/// is damped each segment; the measured one also loses the readout term.
inline double lossy_recursion_xi(double kappa, double alpha, double level_factor, double mixed_scaled)
{
    const double eta = std::min(1.0, level_factor * kappa * kappa / alpha);
    const double light = 0.5;
    std::array<double, 3> v = {mixed_scaled, mixed_scaled, mixed_scaled};
    for (std::size_t segment = 0; segment < 3; ++segment) {
        for (std::size_t axis = 0; axis < 3; ++axis) {
            const double u = v[axis];
            v[axis] = u * (1.0 - eta) * (1.0 - eta) + eta * (2.0 - eta) * mixed_scaled;
            if (axis == segment) {
                const double cross = kappa * u * (1.0 - eta);
                v[axis] -= cross * cross / (light + kappa * kappa * u);
            }
        }
    }
    return v[0] + v[1] + v[2];
}

// ---------------------------------------------------------------------------
// The validation suite

inline ValidationReport run_validation(const ExperimentConfig& config)
{
    ValidationReport report;
    auto& checks = report.checks;
    const EnsembleParams ensemble = config.ensemble();
    const double q_factor = config.resolved_level_factor();

    // Gaussian endpoints.
    const MeasurementSchedule lossless = config.schedule();
    const double mixed_end =
        xi_squared(run_sequence(make_completely_mixed(ensemble, config.pulse()), lossless).final_state).xi_squared;
    checks.push_back(check_near("gaussian.endpoint.mixed_lossless", mixed_end, 6.0 / 19.0, 1e-6));
    if (ensemble.atom_count() % 2 == 0) {
        const double updown_end =
            xi_squared(run_sequence(make_product_updown(ensemble, config.pulse()), lossless).final_state).xi_squared;
        checks.push_back(check_near("gaussian.endpoint.updown_lossless", updown_end, 0.2, 1e-6));
    }
    const std::array<std::pair<double, double>, 3> lossy = {{{50.0, 0.737}, {75.0, 0.609}, {100.0, 0.540}}};
    for (const auto& [alpha, expected] : lossy) {
        const double xi =
            xi_squared(run_sequence(make_completely_mixed(ensemble, config.pulse(alpha)), config.schedule(alpha))
                           .final_state)
                .xi_squared;
        checks.push_back(check_near(fmt::format("gaussian.endpoint.alpha{}", alpha), xi, expected, 0.005,
                                    fmt::format("Q = {:.6g}", q_factor)));
        const double recursion =
            lossy_recursion_xi(config.kappa_per_segment, alpha, q_factor, ensemble.mixed_scaled_variance());
        checks.push_back(check_near(fmt::format("gaussian.recursion.alpha{}", alpha), xi, recursion, 5e-4,
                                    "independent per-axis recursion"));
    }

    // Structural invariants.
    const fuzz::FuzzOutcome fz = fuzz::run_invariant_fuzz(1000, config.seed);
    checks.push_back(check_near("invariant.measurement_contraction", fz.contraction_failures, 0, 0, "1000 cases"));
    checks.push_back(check_near("invariant.psd_preservation", fz.psd_failures, 0, 0, "1000 cases"));
    checks.push_back(check_near("invariant.rotation_trace", fz.rotation_failures, 0, 0, "1000 cases"));
    checks.push_back(check_near("invariant.loss_fixed_point", fz.fixed_point_failures, 0, 0, "1000 cases"));

    // Post-selection.
    const PostSelectionRule half = make_rule(0.678);
    const PostSelectionRule three_quarters = make_rule(1.150);
    checks.push_back(check_near("postselect.q_0.678", half.retained_fraction, 0.500, 0.002));
    checks.push_back(check_near("postselect.mu_0.678", half.variance_ratio, 0.144, 0.002));
    checks.push_back(check_near("postselect.q_1.150", three_quarters.retained_fraction, 0.750, 0.002));
    checks.push_back(check_near("postselect.mu_1.150", three_quarters.variance_ratio, 0.370, 0.005));
    for (const PostSelectionRule& rule : {half, three_quarters}) {
        constexpr std::size_t draws = 1'000'000;
        const RejectionSample mc = sample_postselection(rule.threshold_ratio, draws, config.seed + 17);
        const double q_sigma = std::sqrt(rule.retained_fraction * (1.0 - rule.retained_fraction) / draws);
        checks.push_back(check_near(fmt::format("postselect.mc_q_{:.3f}", rule.threshold_ratio), mc.acceptance,
                                    rule.retained_fraction, 3.0 * q_sigma, "3 sigma"));
        // var of x^2 under the truncated normal: E[x^4] - mu^2 with E[x^4] from the closed-form moments.
        const double b = rule.threshold_ratio;
        const double fourth = 3.0 * rule.variance_ratio - b * b * b * std::exp(-0.5 * b * b) * 2.0 /
                                                              truncated_integral(Moment::zeroth, b);
        const double kept = rule.retained_fraction * draws;
        const double mu_sigma = std::sqrt(std::max(fourth - rule.variance_ratio * rule.variance_ratio, 0.0) / kept);
        checks.push_back(check_near(fmt::format("postselect.mc_mu_{:.3f}", rule.threshold_ratio), mc.accepted_variance,
                                    rule.variance_ratio, 3.0 * mu_sigma, "3 sigma"));
    }
    checks.push_back(check_near("postselect.invert_0.5", invert_for_q(0.5).rule.threshold_ratio, 0.6744897501960817,
                                1e-9));

    // Exact model.
    {
        const auto state = exact::TwoGroupState::balanced(ensemble.atom_count() - ensemble.atom_count() % 2, 1);
        const double J = state.collective_spin();
        checks.push_back(check_near("exact.xi_at_zero", exact::xi_exact(state, 1e-12), 1.0, 1e-6));
        checks.push_back(check_near("exact.xi_von_neumann", exact::xi_exact(state, 10.0 * std::sqrt(J)), 0.5, 0.01));
        std::vector<double> ratios;
        for (double big_j : {1e2, 1e4, 1e6}) {
            const auto s = exact::TwoGroupState::balanced(static_cast<std::int64_t>(2 * big_j), 1);
            ratios.push_back(exact::var_jx_exact(s, std::pow(big_j, 0.25)) / std::sqrt(big_j));
        }
        const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
        checks.push_back({"exact.sqrt_j_scaling", *hi / *lo < 2.0, *hi / *lo, 1.0, 2.0,
                          "max/min of var/sqrt(J) over J = 1e2, 1e4, 1e6 must stay below 2"});
        const auto small = exact::TwoGroupState::balanced(20'000, 1);
        double worst = 0.0;
        for (double t : {0.1, 1.0, 10.0, std::sqrt(small.collective_spin())}) {
            const double closed = exact::var_jx_closed_form(small, t);
            worst = std::max(worst, std::abs(exact::var_jx_quadrature(small, t) - closed) / closed);
        }
        checks.push_back(check_near("exact.quadrature_vs_closed_form", worst, 0.0, exact::kQuadratureAgreement));
        checks.push_back(check_near("exact.kernel_constant", exact::fit_kernel_constant(1e4, 1e4, 2.0),
                                    exact::kKernelConstant, 1e-3));
    }

    // Small-N oracle against the Gaussian closed form.
    const std::array<int, 3> levels = {21, 41, 81};
    double worst_largest = 0.0;
    double worst_transverse = 0.0;
    for (int n : {2, 4, 6}) {
        for (double kappa : {0.5, 1.0, 2.0}) {
            std::array<double, 3> err{};
            for (std::size_t i = 0; i < levels.size(); ++i) {
                const auto r = oracle::brute_force_oracle({n, levels[i], kappa});
                const double g = oracle::gaussian_var_jx(n, kappa);
                err[i] = std::abs(r.var_x - g) / g;
                if (i + 1 == levels.size()) {
                    worst_largest = std::max(worst_largest, err[i]);
                    worst_transverse = std::max(worst_transverse, std::abs(r.var_y + r.var_z - 0.25 * n) / (0.25 * n));
                }
            }
            const bool monotone = err[1] <= err[0] && err[2] <= err[1];
            checks.push_back({fmt::format("oracle.trend.N{}_kappa{}", n, kappa), monotone, err[2], err[0], 0.0,
                              fmt::format("relative error at S0 levels 21/41/81: {:.4g} {:.4g} {:.4g}", err[0],
                                          err[1], err[2])});
        }
    }
    checks.push_back({"oracle.max_error_largest", worst_largest <= 0.25, worst_largest, 0.0, 0.25,
                      "relative var(Jx) error at 81 levels"});
    checks.push_back({"oracle.transverse_conservation", worst_transverse <= 0.05, worst_transverse, 0.0, 0.05,
                      "relative change of var(Jy) + var(Jz) at 81 levels"});

    // Plumbing.
    const ExperimentConfig reparsed = config_from_json(to_json(config));
    checks.push_back({"config.round_trip", reparsed == config, reparsed == config ? 1.0 : 0.0, 1.0, 0.0, ""});
    auto render_all = [&config] {
        std::string text;
        for (const Table& t : fig2_tables(config)) {
            text += render_table(t, config);
        }
        return text;
    };
    const bool same = render_all() == render_all();
    checks.push_back({"determinism.fig2", same, same ? 1.0 : 0.0, 1.0, 0.0, "two renders are byte-identical"});
    return report;
}

} // namespace singlet
