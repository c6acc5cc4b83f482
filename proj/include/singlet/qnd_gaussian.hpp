/**
 * @file qnd_gaussian.hpp
 * @brief Gaussian QND squeezing engine.
 *
 * One QND segment on the axis currently rotated into slot Jx is
 *   interaction  Gamma <- M Gamma M^T, M = identity except M(Sy, Jx) = kappa <R_Sx> / sqrt(S0)
 *   losses       Gamma <- (1 - eta D) Gamma (1 - eta D) + eta (2 - eta) D Gamma_noise
 *   readout      Gamma <- Gamma - Gamma (P_y Gamma P_y)^+ Gamma
 * followed by feedback that restores <J> = 0. A full sequence repeats this for
 * the x, y and z components, rotating the requested component into slot Jx.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "singlet/ensemble.hpp"
#include "singlet/postselect.hpp"

namespace singlet {

enum class Axis { x = 0, y = 1, z = 2 };

inline char axis_name(Axis axis)
{
    return "xyz"[static_cast<int>(axis)];
}

inline Axis parse_axis(const std::string& name)
{
    if (name == "x") {
        return Axis::x;
    }
    if (name == "y") {
        return Axis::y;
    }
    if (name == "z") {
        return Axis::z;
    }
    throw std::invalid_argument("unknown axis '" + name + "'");
}

/// Linearized atom-light interaction of strength kappa = t / tau.
struct InteractionMap {
    double kappa;
    Matrix6 matrix;

    /// `light_polarization` is <R_Sx> / sqrt(S0), i.e. 1 for a fresh pulse.
    static InteractionMap make(double kappa, double light_polarization = 1.0)
    {
        if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
            throw std::invalid_argument("kappa must be finite and >= 0");
        }
        InteractionMap map{kappa, Matrix6::Identity()};
        map.matrix(kSy, kJx) = kappa * light_polarization;
        return map;
    }
};

/// Applies the interaction map to covariance and means.
inline GaussianState evolve(const GaussianState& state, double kappa)
{
    // <R_Sx> / sqrt(S0) = <Sx> / S0 with the mean stored in raw units.
    const double polarization = state.mean(kSx) / state.pulse.stokes_number();
    const InteractionMap map = InteractionMap::make(kappa, polarization);
    GaussianState out = state;
    out.cov = map.matrix * state.cov * map.matrix.transpose();
    detail::condition_covariance(out.cov);
    out.set_scaled_mean(map.matrix * state.scaled_mean());
    return out;
}

struct LossRate {
    double eta;
    /// Q kappa^2 / alpha exceeded 1 and was clipped.
    bool saturated;
};

/// eta = Q kappa^2 / alpha, clipped to 1. An infinite alpha gives eta = 0.
inline LossRate eta_from_kappa(double kappa, double alpha, double level_factor)
{
    if (!(alpha > 0.0)) {
        throw std::invalid_argument("optical depth must be positive, got " + std::to_string(alpha));
    }
    if (!(kappa >= 0.0)) {
        throw std::invalid_argument("kappa must be >= 0");
    }
    if (std::isinf(alpha)) {
        return {0.0, false};
    }
    const double eta = level_factor * kappa * kappa / alpha;
    if (eta > 1.0) {
        return {1.0, true};
    }
    return {eta, false};
}

/// Spontaneous-scattering channel: a fraction eta of the atoms is replaced by
/// fully mixed ones. Only the atomic slots are affected.
struct LossChannel {
    double eta;
    /// n_j / j, the scaled per-axis variance the scattered atoms relax to.
    double noise_variance;

    static LossChannel make(double eta, const EnsembleParams& ensemble)
    {
        if (!(eta >= 0.0 && eta <= 1.0)) {
            throw std::invalid_argument("eta must lie in [0, 1], got " + std::to_string(eta));
        }
        return {eta, ensemble.mixed_scaled_variance()};
    }
};

inline GaussianState apply_losses(const GaussianState& state, const LossChannel& channel)
{
    if (!(channel.eta >= 0.0 && channel.eta <= 1.0)) {
        throw std::invalid_argument("eta must lie in [0, 1], got " + std::to_string(channel.eta));
    }
    const double eta = channel.eta;
    Vector6 damping = Vector6::Ones();
    damping.head<3>().setConstant(1.0 - eta);
    GaussianState out = state;
    out.cov = damping.asDiagonal() * state.cov * damping.asDiagonal();
    const double injected = eta * (2.0 - eta) * channel.noise_variance;
    for (int k = kJx; k <= kJz; ++k) {
        out.cov(k, k) += injected;
    }
    detail::condition_covariance(out.cov);
    out.mean.head<3>() *= (1.0 - eta);
    return out;
}

/// Below this Gamma_SySy the readout carries no information and is skipped.
inline constexpr double kReadoutTolerance = 1e-12;

struct Measurement {
    GaussianState state;
    /// Recorded Sy value in raw units.
    double outcome;
    /// Gamma_SySy was below kReadoutTolerance; the state is unchanged.
    bool skipped;
};

namespace detail {

inline Measurement condition_on_sy(const GaussianState& state, std::optional<double> scaled_outcome)
{
    const double g55 = state.cov(kSy, kSy);
    const Vector6 scaled = state.scaled_mean();
    const double root_s0 = std::sqrt(state.pulse.stokes_number());
    if (g55 <= kReadoutTolerance) {
        return {state, scaled(kSy) * root_s0, true};
    }
    const Vector6 column = state.cov.col(kSy);
    GaussianState out = state;
    // (P_y Gamma P_y)^+ has the single entry 1 / Gamma_SySy.
    out.cov = state.cov - column * column.transpose() / g55;
    condition_covariance(out.cov);
    double outcome = scaled(kSy);
    if (scaled_outcome) {
        outcome = *scaled_outcome;
        out.set_scaled_mean(scaled + (outcome - scaled(kSy)) / g55 * column);
    }
    return {out, outcome * root_s0, false};
}

} // namespace detail

/// Deterministic readout: conditional covariance, unconditional (unchanged) means.
inline Measurement measure_sy(const GaussianState& state)
{
    return detail::condition_on_sy(state, std::nullopt);
}

/// Sampled readout: draws the Sy outcome from N(<R_Sy>, Gamma_SySy) and shifts
/// the means to the conditional Gaussian mean.
template <typename Rng>
Measurement measure_sy(const GaussianState& state, Rng& rng)
{
    const double g55 = state.cov(kSy, kSy);
    if (g55 <= kReadoutTolerance) {
        return detail::condition_on_sy(state, std::nullopt);
    }
    std::normal_distribution<double> normal(state.scaled_mean()(kSy), std::sqrt(g55));
    return detail::condition_on_sy(state, normal(rng));
}

/// Restores <J> = 0. A positive `noise_c` adds c sqrt(N) / J to the
/// measured-axis (slot Jx) scaled variance, modeling the incoherent feedback.
inline GaussianState feedback_reset(const GaussianState& state, double noise_c = 0.0)
{
    if (!(noise_c >= 0.0)) {
        throw std::invalid_argument("feedback noise scale must be >= 0");
    }
    GaussianState out = state;
    out.mean.head<3>().setZero();
    if (noise_c > 0.0) {
        out.cov(kJx, kJx) += noise_c * std::sqrt(static_cast<double>(state.ensemble.atom_count())) /
                             state.ensemble.collective_spin();
    }
    return out;
}

/// Proper rotation (a cyclic permutation) that brings `axis` into slot Jx.
inline Matrix3 axis_rotation(Axis axis)
{
    Matrix3 p = Matrix3::Zero();
    switch (axis) {
    case Axis::x:
        p.setIdentity();
        break;
    case Axis::y: // (x, y, z) -> (y, z, x)
        p(0, 1) = p(1, 2) = p(2, 0) = 1.0;
        break;
    case Axis::z: // (x, y, z) -> (z, x, y)
        p(0, 2) = p(1, 0) = p(2, 1) = 1.0;
        break;
    }
    return p;
}

namespace detail {

inline GaussianState rotate_atoms(const GaussianState& state, const Matrix3& rotation)
{
    Matrix6 t = Matrix6::Identity();
    t.topLeftCorner<3, 3>() = rotation;
    GaussianState out = state;
    out.cov = t * state.cov * t.transpose();
    out.mean = t * state.mean;
    return out;
}

} // namespace detail

inline GaussianState rotate_to_axis(const GaussianState& state, Axis axis)
{
    return detail::rotate_atoms(state, axis_rotation(axis));
}

/// Inverse of rotate_to_axis.
inline GaussianState rotate_from_axis(const GaussianState& state, Axis axis)
{
    return detail::rotate_atoms(state, axis_rotation(axis).transpose());
}

/// Replaces the light with a fresh x-polarized pulse and drops atom-light correlations.
inline GaussianState fresh_light(const GaussianState& state, const PulseParams& pulse)
{
    GaussianState out = state;
    out.pulse = pulse;
    const Matrix3 atoms = state.atomic_cov();
    out.cov = detail::fresh_light_block();
    out.cov.topLeftCorner<3, 3>() = atoms;
    const Vector3 atom_mean = state.mean.head<3>();
    out.mean = detail::fresh_light_mean(pulse);
    out.mean.head<3>() = atom_mean;
    return out;
}

inline GaussianState fresh_light(const GaussianState& state)
{
    return fresh_light(state, state.pulse);
}

struct ApproximationDiagnostics {
    /// kappa^2 / S0 <(dR4)^2 (dR1)^2> under Gaussian moment factorization.
    double quartic_term;
    /// kappa / sqrt(S0) |<dR1 {dR4, dR5}>|, reported as its Cauchy-Schwarz bound
    /// (the Gaussian third moment itself vanishes).
    double cubic_term;
    /// kappa >= 0.1 sqrt(J): the linearization is no longer trustworthy.
    bool validity_warning;
};

inline ApproximationDiagnostics approximation_terms(const GaussianState& state, double kappa)
{
    const Matrix6& g = state.cov;
    const double s0 = state.pulse.stokes_number();
    const double quartic_moment = g(kSx, kSx) * g(kJx, kJx) + 2.0 * g(kJx, kSx) * g(kJx, kSx);
    const double pair_moment = g(kSx, kSx) * g(kSy, kSy) + 2.0 * g(kSx, kSy) * g(kSx, kSy);
    ApproximationDiagnostics d{};
    d.quartic_term = kappa * kappa / s0 * quartic_moment;
    d.cubic_term = kappa / std::sqrt(s0) * 2.0 * std::sqrt(g(kJx, kJx) * pair_moment);
    d.validity_warning = kappa >= 0.1 * std::sqrt(state.ensemble.collective_spin());
    return d;
}

// ---------------------------------------------------------------------------
// Sequential measurement schedule

struct Segment {
    Axis axis;
    /// Interaction time in units of tau.
    double duration;
    /// Sample times in [0, duration], strictly increasing, units of tau.
    std::vector<double> grid;
};

inline std::vector<double> uniform_grid(double duration, int points)
{
    if (points < 2) {
        throw std::invalid_argument("a segment grid needs at least 2 points");
    }
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        grid[static_cast<std::size_t>(i)] = duration * i / (points - 1);
    }
    grid.back() = duration;
    return grid;
}

enum class FeedbackKind { reset, reset_with_noise, postselect };

struct FeedbackMode {
    FeedbackKind kind = FeedbackKind::reset;
    double noise_c = 0.0;
    PostSelectionRule rule = make_rule(kInfinity);

    static FeedbackMode plain() { return {}; }
    static FeedbackMode with_noise(double c) { return {FeedbackKind::reset_with_noise, c, make_rule(kInfinity)}; }
    static FeedbackMode selecting(const PostSelectionRule& r) { return {FeedbackKind::postselect, 0.0, r}; }
};

struct MeasurementSchedule {
    std::vector<Segment> segments;
    /// Infinite for the lossless model.
    double optical_depth = kInfinity;
    FeedbackMode feedback;
    /// When set, each segment's committed readout is sampled with this seed;
    /// otherwise the deterministic readout is used throughout.
    std::optional<std::uint64_t> sample_seed;

    /// x, y, z (or the given axes), each for `kappa_per_segment` tau on a uniform grid.
    static MeasurementSchedule sequential(double kappa_per_segment, int grid_points,
                                          std::vector<Axis> axes = {Axis::x, Axis::y, Axis::z})
    {
        if (!(kappa_per_segment > 0.0) || !std::isfinite(kappa_per_segment)) {
            throw std::invalid_argument("segment duration must be positive");
        }
        MeasurementSchedule s;
        for (Axis a : axes) {
            s.segments.push_back({a, kappa_per_segment, uniform_grid(kappa_per_segment, grid_points)});
        }
        return s;
    }

    void validate() const
    {
        if (segments.empty()) {
            throw std::invalid_argument("schedule has no segments");
        }
        if (!(optical_depth > 0.0)) {
            throw std::invalid_argument("optical depth must be positive");
        }
        for (const Segment& seg : segments) {
            if (!(seg.duration > 0.0) || !std::isfinite(seg.duration)) {
                throw std::invalid_argument("segment durations must be positive");
            }
            if (seg.grid.empty()) {
                throw std::invalid_argument("segment grid is empty");
            }
            for (std::size_t i = 0; i < seg.grid.size(); ++i) {
                const double t = seg.grid[i];
                if (t < 0.0 || t > seg.duration || (i > 0 && !(t > seg.grid[i - 1]))) {
                    throw std::invalid_argument("segment grid must be strictly increasing within [0, duration]");
                }
            }
        }
    }
};

struct TrajectoryRow {
    /// Total interaction time in units of tau.
    double t_total;
    double xi_squared;
    double gamma_xx;
    double gamma_yy;
    double gamma_zz;
    double eta;
    bool validity_warning;
};

struct Trajectory {
    std::vector<TrajectoryRow> rows;
    GaussianState final_state;
    /// Sampled post-selection mode: false once a segment's mean fell outside B.
    bool accepted = true;
    /// Product of the retention fractions of all post-selection steps.
    double retained_fraction = 1.0;
};

namespace detail {

struct PreparedPulse {
    /// Evolved (and damped) state, before the Sy readout.
    GaussianState state;
    double eta;
    bool validity_warning;
};

/// Interaction and losses of one pulse of strength kappa on a segment-start state.
inline PreparedPulse prepare_pulse(const GaussianState& start, double kappa, double optical_depth)
{
    GaussianState s = evolve(start, kappa);
    double eta = 0.0;
    if (!std::isinf(optical_depth)) {
        eta = eta_from_kappa(kappa, optical_depth, start.pulse.level_factor()).eta;
        s = apply_losses(s, LossChannel::make(eta, s.ensemble));
    }
    return {s, eta, approximation_terms(start, kappa).validity_warning};
}

} // namespace detail

/// Runs the sequential QND protocol. Each grid time t is evaluated as a single
/// pulse of strength t / tau from the segment-start state; the segment commits
/// the pulse of full duration, then applies feedback (or post-selection).
inline Trajectory run_sequence(const GaussianState& initial, const MeasurementSchedule& schedule)
{
    schedule.validate();
    std::optional<std::mt19937_64> rng;
    if (schedule.sample_seed) {
        rng.emplace(*schedule.sample_seed);
    }

    Trajectory traj{{}, initial, true, 1.0};
    GaussianState current = initial;
    double elapsed = 0.0;
    for (const Segment& seg : schedule.segments) {
        const GaussianState start = fresh_light(rotate_to_axis(current, seg.axis));
        for (double t : seg.grid) {
            const detail::PreparedPulse r = detail::prepare_pulse(start, t, schedule.optical_depth);
            const GaussianState lab = rotate_from_axis(measure_sy(r.state).state, seg.axis);
            traj.rows.push_back({elapsed + t, xi_squared(lab).xi_squared, lab.cov(kJx, kJx), lab.cov(kJy, kJy),
                                 lab.cov(kJz, kJz), r.eta, r.validity_warning});
        }

        const GaussianState before = detail::prepare_pulse(start, seg.duration, schedule.optical_depth).state;
        GaussianState after = rng ? measure_sy(before, *rng).state : measure_sy(before).state;

        switch (schedule.feedback.kind) {
        case FeedbackKind::reset:
            after = feedback_reset(after);
            break;
        case FeedbackKind::reset_with_noise:
            after = feedback_reset(after, schedule.feedback.noise_c);
            break;
        case FeedbackKind::postselect: {
            const PostSelectionRule& rule = schedule.feedback.rule;
            traj.retained_fraction *= rule.retained_fraction;
            if (rng) {
                // Delta^2 is the run-to-run spread of the conditional mean: the
                // variance removed by the readout, in raw units.
                const double spread =
                    (before.cov(kJx, kJx) - after.cov(kJx, kJx)) * start.ensemble.collective_spin();
                const double bound = rule.threshold_ratio * std::sqrt(std::max(spread, 0.0));
                if (std::abs(after.mean(kJx) - before.mean(kJx)) > bound) {
                    traj.accepted = false;
                }
            } else {
                // Ensemble view: the retained means keep mu of their spread, which
                // becomes unconditional variance once they are forgotten.
                const double selected = apply_postselection(before.cov(kJx, kJx), after.cov(kJx, kJx), rule);
                after = feedback_reset(after);
                after.cov(kJx, kJx) = selected;
            }
            break;
        }
        }
        current = rotate_from_axis(after, seg.axis);
        elapsed += seg.duration;
    }
    traj.final_state = current;
    return traj;
}

} // namespace singlet
