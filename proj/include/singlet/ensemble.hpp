/**
 * @file ensemble.hpp
 * @brief Ensemble and pulse parameters, the Gaussian atom-light state, and
 *        the squeezing / field-sensitivity metrics computed from it.
 *
 * The state is described by the scaled operators
 *   R = { Jx/sqrt(J), Jy/sqrt(J), Jz/sqrt(J), Sx/sqrt(S0), Sy/sqrt(S0), Sz/sqrt(S0) }
 * with covariance Gamma_mn = 1/2 <R_m R_n + R_n R_m> - <R_m><R_n>.
 * Means are kept in raw operator units (<Jx>, ..., <Sx> = S0) and scaled on
 * demand; the covariance is always in scaled units.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace singlet {

using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// Index of each scaled operator in the 6-vector R.
enum Slot : int { kJx = 0, kJy = 1, kJz = 2, kSx = 3, kSy = 4, kSz = 5 };

inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kPsdFloor = -1e-9;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Raised when a covariance map leaves the PSD cone beyond kPsdFloor.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// N spin-j atoms. The spin is stored as the integer 2j.
class EnsembleParams {
public:
    EnsembleParams(std::int64_t atom_count, int two_j)
        : atom_count_(atom_count), two_j_(two_j)
    {
        if (atom_count < 1) {
            throw std::invalid_argument("atom count must be >= 1, got " + std::to_string(atom_count));
        }
        if (two_j < 1) {
            throw std::invalid_argument("2j must be a positive integer, got " + std::to_string(two_j));
        }
    }

    /// Accepts j as a real number; rejects values that are not half-integers.
    static EnsembleParams from_spin(std::int64_t atom_count, double spin)
    {
        const double twice = 2.0 * spin;
        const double rounded = std::round(twice);
        if (!(spin > 0.0) || std::abs(twice - rounded) > 1e-12) {
            throw std::invalid_argument("spin must be a positive half-integer, got " + std::to_string(spin));
        }
        return EnsembleParams(atom_count, static_cast<int>(rounded));
    }

    std::int64_t atom_count() const { return atom_count_; }
    int two_j() const { return two_j_; }
    double spin() const { return 0.5 * two_j_; }

    /// J = N j.
    double collective_spin() const { return static_cast<double>(atom_count_) * spin(); }

    /// n_j = j(j+1)/3, the single-axis variance of a fully mixed spin-j particle.
    double mixed_variance() const { return spin() * (spin() + 1.0) / 3.0; }

    /// n_j / j, the scaled per-axis variance of the fully mixed ensemble.
    double mixed_scaled_variance() const { return mixed_variance() / spin(); }

    friend bool operator==(const EnsembleParams&, const EnsembleParams&) = default;

private:
    std::int64_t atom_count_;
    int two_j_;
};

/// Level-structure factor Q known for a given spin; empty when the caller must supply it.
inline std::optional<double> default_level_factor(int two_j)
{
    if (two_j == 1) {
        return 1.0;
    }
    if (two_j == 2) {
        return 8.0 / 9.0;
    }
    return std::nullopt;
}

/// Probe pulse. An infinite optical depth means the lossless model.
class PulseParams {
public:
    PulseParams(double stokes_number, double coupling_rate, double optical_depth = kInfinity,
                double level_factor = 1.0)
        : stokes_number_(stokes_number), coupling_rate_(coupling_rate),
          optical_depth_(optical_depth), level_factor_(level_factor)
    {
        if (!(stokes_number > 0.0) || !std::isfinite(stokes_number)) {
            throw std::invalid_argument("S0 must be positive and finite");
        }
        if (!(coupling_rate > 0.0) || !std::isfinite(coupling_rate)) {
            throw std::invalid_argument("Omega must be positive and finite");
        }
        if (!(optical_depth > 0.0)) {
            throw std::invalid_argument("optical depth must be positive (inf for lossless)");
        }
        if (!(level_factor > 0.0 && level_factor <= 1.0)) {
            throw std::invalid_argument("level factor Q must lie in (0, 1]");
        }
    }

    double stokes_number() const { return stokes_number_; }
    double coupling_rate() const { return coupling_rate_; }
    double optical_depth() const { return optical_depth_; }
    double level_factor() const { return level_factor_; }
    bool lossless() const { return std::isinf(optical_depth_); }

    /// tau = 1 / (Omega sqrt(S0 J)).
    double time_scale(const EnsembleParams& ensemble) const
    {
        return 1.0 / (coupling_rate_ * std::sqrt(stokes_number_ * ensemble.collective_spin()));
    }

    PulseParams with_optical_depth(double alpha) const
    {
        return PulseParams(stokes_number_, coupling_rate_, alpha, level_factor_);
    }

    friend bool operator==(const PulseParams&, const PulseParams&) = default;

private:
    double stokes_number_;
    double coupling_rate_;
    double optical_depth_;
    double level_factor_;
};

/// Gaussian atom-light state: raw means, scaled covariance, and the parameters
/// needed to convert between the two.
struct GaussianState {
    Vector6 mean;
    Matrix6 cov;
    EnsembleParams ensemble;
    PulseParams pulse;

    /// sqrt(J) for the atomic slots, sqrt(S0) for the light slots.
    Vector6 unit_scale() const
    {
        const double a = std::sqrt(ensemble.collective_spin());
        const double l = std::sqrt(pulse.stokes_number());
        Vector6 s;
        s << a, a, a, l, l, l;
        return s;
    }

    Vector6 scaled_mean() const { return mean.cwiseQuotient(unit_scale()); }

    void set_scaled_mean(const Vector6& scaled) { mean = scaled.cwiseProduct(unit_scale()); }

    Matrix3 atomic_cov() const { return cov.topLeftCorner<3, 3>(); }
};

namespace detail {

/// Symmetrizes in place, then rejects eigenvalues below kPsdFloor and clips the
/// small negative ones produced by round-off.
inline void condition_covariance(Matrix6& cov)
{
    cov = 0.5 * (cov + cov.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix6> solver(cov);
    const Vector6 eig = solver.eigenvalues();
    const double scale = std::max(1.0, eig.cwiseAbs().maxCoeff());
    if (eig.minCoeff() < kPsdFloor * scale) {
        throw NumericError("covariance is not positive semidefinite: min eigenvalue " +
                           std::to_string(eig.minCoeff()));
    }
    // Reconstructing perturbs every entry at round-off level, so only do it
    // when a negative eigenvalue is visible above that level.
    const double roundoff = 64.0 * std::numeric_limits<double>::epsilon() * scale;
    if (eig.minCoeff() < -roundoff) {
        const Vector6 clipped = eig.cwiseMax(0.0);
        cov = solver.eigenvectors() * clipped.asDiagonal() * solver.eigenvectors().transpose();
        cov = 0.5 * (cov + cov.transpose()).eval();
    }
}

inline Matrix6 fresh_light_block()
{
    Matrix6 cov = Matrix6::Zero();
    cov(kSy, kSy) = 0.5;
    cov(kSz, kSz) = 0.5;
    return cov;
}

inline Vector6 fresh_light_mean(const PulseParams& pulse)
{
    Vector6 mean = Vector6::Zero();
    mean(kSx) = pulse.stokes_number();
    return mean;
}

} // namespace detail

/// Checks symmetry and positive semidefiniteness of the covariance.
inline bool is_valid_covariance(const Matrix6& cov)
{
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance) {
        return false;
    }
    Eigen::SelfAdjointEigenSolver<Matrix6> solver(cov);
    const double scale = std::max(1.0, solver.eigenvalues().cwiseAbs().maxCoeff());
    return solver.eigenvalues().minCoeff() >= kPsdFloor * scale;
}

/// Thermal (completely mixed) atoms with a fresh x-polarized pulse.
inline GaussianState make_completely_mixed(const EnsembleParams& ensemble, const PulseParams& pulse)
{
    Matrix6 cov = detail::fresh_light_block();
    const double v = ensemble.mixed_scaled_variance();
    cov(kJx, kJx) = v;
    cov(kJy, kJy) = v;
    cov(kJz, kJz) = v;
    return GaussianState{detail::fresh_light_mean(pulse), cov, ensemble, pulse};
}

/// |+j>^{N/2} (x) |-j>^{N/2}: transverse per-particle variance j/2, so the
/// scaled atomic block is diag(1/2, 1/2, 0) for any j.
inline GaussianState make_product_updown(const EnsembleParams& ensemble, const PulseParams& pulse)
{
    if (ensemble.atom_count() % 2 != 0) {
        throw std::invalid_argument("up/down product state needs an even atom count, got " +
                                    std::to_string(ensemble.atom_count()));
    }
    Matrix6 cov = detail::fresh_light_block();
    cov(kJx, kJx) = 0.5;
    cov(kJy, kJy) = 0.5;
    return GaussianState{detail::fresh_light_mean(pulse), cov, ensemble, pulse};
}

struct SqueezingReport {
    double xi_squared;
    double var_x;
    double var_y;
    double var_z;
    /// N xi^2: upper bound on the number of particles unentangled with the rest.
    double unentangled_bound;
    bool entangled;
};

/// Generalized spin squeezing parameter (var Jx + var Jy + var Jz) / J.
inline SqueezingReport xi_squared(const GaussianState& state)
{
    const double J = state.ensemble.collective_spin();
    SqueezingReport r{};
    r.var_x = J * state.cov(kJx, kJx);
    r.var_y = J * state.cov(kJy, kJy);
    r.var_z = J * state.cov(kJz, kJz);
    r.xi_squared = (r.var_x + r.var_y + r.var_z) / J;
    r.unentangled_bound = static_cast<double>(state.ensemble.atom_count()) * r.xi_squared;
    r.entangled = r.xi_squared < 1.0;
    return r;
}

struct FieldSensitivity {
    /// Delta F ~ var(J_n) beta^2.
    double fidelity_loss;
    /// beta^2 J xi^2, which bounds fidelity_loss for every direction.
    double bound;
};

/// Fidelity decrease of the state under a small rotation exp(-i beta J_n).
inline FieldSensitivity field_sensitivity(const GaussianState& state, const Vector3& direction, double beta)
{
    if (std::abs(direction.norm() - 1.0) > 1e-9) {
        throw std::invalid_argument("field direction must be a unit vector");
    }
    const double J = state.ensemble.collective_spin();
    const double var_n = J * direction.dot(state.atomic_cov() * direction);
    const double beta2 = beta * beta;
    return {var_n * beta2, beta2 * J * xi_squared(state).xi_squared};
}

/// 4 J xi^2 = 4 sum_l var(J_l), an upper bound on the quantum Fisher information.
inline double fisher_upper_bound(const GaussianState& state)
{
    return 4.0 * state.ensemble.collective_spin() * xi_squared(state).xi_squared;
}

} // namespace singlet
