/**
 * @file oracle.hpp
 * @brief Brute-force Hilbert-space simulation of one QND pulse for a handful
 *        of spin-1/2 atoms and a spin-S light pulse.
 *
 * The light is the S_x = S coherent state of a spin S = (levels - 1) / 2, so
 * S0 = S. The pulse exp(-i Jx Sz Omega t), Omega t = kappa / sqrt(S0 J), is
 * diagonal in the product (Jx, Sz) basis; the light is then read out in the
 * S_y eigenbasis obtained by exact diagonalization.
 */
#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace singlet::oracle {

inline constexpr int kMaxAtoms = 8;
inline constexpr int kMaxLightLevels = 81;
inline constexpr std::size_t kMaxAmplitudes = std::size_t{1} << 20;

enum class InitialState {
    /// |+1/2>^{N/2} |-1/2>^{N/2} along z.
    updown,
    /// Completely mixed atoms.
    mixed,
};

enum class Readout {
    /// Conditional moments averaged over every S_y outcome with its Born weight.
    average_outcomes,
    /// Conditioned on the single outcome S_y = 0.
    project_sy_zero,
};

struct OracleConfig {
    int atoms;
    int light_levels;
    double kappa;
    InitialState initial = InitialState::updown;
    Readout readout = Readout::average_outcomes;
};

struct OracleResult {
    double var_x;
    double var_y;
    double var_z;
    double xi_squared;
    /// Probability of the conditioning event (1 for the averaged readout).
    double outcome_probability;
};

/// Number of complex amplitudes of the joint atom-light state.
inline std::size_t oracle_dimension(int atoms, int light_levels)
{
    return (std::size_t{1} << atoms) * static_cast<std::size_t>(light_levels);
}

/// Transient memory of one run: the joint state plus the light eigenbasis.
inline std::size_t oracle_memory_bytes(const OracleConfig& config)
{
    const auto levels = static_cast<std::size_t>(config.light_levels);
    return sizeof(std::complex<double>) * (oracle_dimension(config.atoms, config.light_levels) + 2 * levels * levels);
}

/// Gaussian-model var(Jx) after one pulse for N spin-1/2 atoms with scaled
/// prior Gamma_xx = 1/2 and fresh light Gamma_SySy = 1/2.
inline double gaussian_var_jx(int atoms, double kappa)
{
    const double prior = 0.5;
    const double light = 0.5;
    return 0.5 * atoms * prior * light / (light + kappa * kappa * prior);
}

namespace detail {

using CVector = Eigen::VectorXcd;

struct LightBasis {
    Eigen::VectorXd s_values;   // Sz eigenvalues, descending
    CVector coherent;           // S_x = S eigenvector in the Sz basis
    Eigen::MatrixXcd sy_vectors; // columns: S_y eigenvectors
    Eigen::VectorXd sy_values;
};

inline LightBasis make_light(int levels)
{
    const double spin = 0.5 * (levels - 1);
    Eigen::VectorXd m(levels);
    for (int i = 0; i < levels; ++i) {
        m(i) = spin - i;
    }
    // <m+1|S+|m> on the superdiagonal.
    Eigen::MatrixXd raise = Eigen::MatrixXd::Zero(levels, levels);
    for (int i = 1; i < levels; ++i) {
        raise(i - 1, i) = std::sqrt(spin * (spin + 1.0) - m(i) * (m(i) + 1.0));
    }
    const Eigen::MatrixXd sx = 0.5 * (raise + raise.transpose());
    const Eigen::MatrixXcd sy =
        (raise - raise.transpose()).cast<std::complex<double>>() / std::complex<double>(0.0, 2.0);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sx_solver(sx);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> sy_solver(sy);
    LightBasis basis;
    basis.s_values = m;
    basis.coherent = sx_solver.eigenvectors().col(levels - 1).cast<std::complex<double>>();
    basis.sy_vectors = sy_solver.eigenvectors();
    basis.sy_values = sy_solver.eigenvalues();
    return basis;
}

/// Jx of product-x basis state b: bit k set means atom k is in |-x>.
inline double jx_of(std::uint32_t b, int atoms)
{
    const int down = std::popcount(b);
    return 0.5 * (atoms - 2 * down);
}

/// Accumulates weight * <phi|X|phi> for X in {Jx, Jx^2, Jy, Jy^2, Jz, Jz^2}.
struct Moments {
    double norm = 0.0;
    double first[3] = {0.0, 0.0, 0.0};
    double second[3] = {0.0, 0.0, 0.0};

    void add(const CVector& phi, int atoms, double weight)
    {
        const Eigen::Index dim = phi.size();
        CVector jy = CVector::Zero(dim);
        CVector jz = CVector::Zero(dim);
        double nx = 0.0;
        double x1 = 0.0;
        double x2 = 0.0;
        const std::complex<double> half_i(0.0, 0.5);
        for (Eigen::Index b = 0; b < dim; ++b) {
            const double p = std::norm(phi(b));
            const double jx = jx_of(static_cast<std::uint32_t>(b), atoms);
            nx += p;
            x1 += p * jx;
            x2 += p * jx * jx;
            for (int k = 0; k < atoms; ++k) {
                const Eigen::Index flipped = b ^ (Eigen::Index{1} << k);
                const bool plus = ((b >> k) & 1) == 0;
                // In the x basis, sigma_z / 2 flips the bit and sigma_y / 2 flips it with phase -+i/2.
                jz(b) += 0.5 * phi(flipped);
                jy(b) += (plus ? half_i : -half_i) * phi(flipped);
            }
        }
        norm += weight * nx;
        first[0] += weight * x1;
        second[0] += weight * x2;
        first[1] += weight * phi.dot(jy).real();
        second[1] += weight * jy.squaredNorm();
        first[2] += weight * phi.dot(jz).real();
        second[2] += weight * jz.squaredNorm();
    }
};

} // namespace detail

/// Runs one pulse and returns the atomic variances after the readout.
inline OracleResult brute_force_oracle(const OracleConfig& config)
{
    const int atoms = config.atoms;
    const int levels = config.light_levels;
    if (atoms < 1 || atoms > kMaxAtoms) {
        throw std::invalid_argument("oracle supports 1.." + std::to_string(kMaxAtoms) + " atoms, got " +
                                    std::to_string(atoms));
    }
    if (levels < 3 || levels > kMaxLightLevels || levels % 2 == 0) {
        throw std::invalid_argument("oracle light levels must be odd in [3, " + std::to_string(kMaxLightLevels) +
                                    "] (integer S has an S_y = 0 eigenstate), got " + std::to_string(levels));
    }
    const std::size_t dim = oracle_dimension(atoms, levels);
    if (dim > kMaxAmplitudes) {
        throw std::invalid_argument("oracle state needs " + std::to_string(dim) + " amplitudes, limit " +
                                    std::to_string(kMaxAmplitudes));
    }
    if (!(config.kappa >= 0.0) || !std::isfinite(config.kappa)) {
        throw std::invalid_argument("kappa must be finite and >= 0");
    }
    if (config.initial == InitialState::updown && atoms % 2 != 0) {
        throw std::invalid_argument("up/down initial state needs an even atom count");
    }

    const detail::LightBasis light = detail::make_light(levels);
    const double stokes = 0.5 * (levels - 1);
    const double collective = 0.5 * atoms;
    const double omega_t = config.kappa / std::sqrt(stokes * collective);
    const auto atom_dim = static_cast<Eigen::Index>(std::size_t{1} << atoms);

    // Outcomes to condition on.
    std::vector<Eigen::Index> outcomes;
    if (config.readout == Readout::project_sy_zero) {
        Eigen::Index zero = 0;
        light.sy_values.cwiseAbs().minCoeff(&zero);
        outcomes.push_back(zero);
    } else {
        for (Eigen::Index o = 0; o < levels; ++o) {
            outcomes.push_back(o);
        }
    }

    // The readout amplitude depends on Jx only: c(jx, o) = sum_s conj(w_o(s)) L(s) exp(-i jx s Omega t).
    auto readout_amplitude = [&](double jx, Eigen::Index o) {
        std::complex<double> c{0.0, 0.0};
        for (int s = 0; s < levels; ++s) {
            c += std::conj(light.sy_vectors(s, o)) * light.coherent(s) *
                 std::polar(1.0, -jx * light.s_values(s) * omega_t);
        }
        return c;
    };
    std::vector<std::vector<std::complex<double>>> table(static_cast<std::size_t>(atoms + 1));
    for (int down = 0; down <= atoms; ++down) {
        const double jx = 0.5 * (atoms - 2 * down);
        for (Eigen::Index o : outcomes) {
            table[static_cast<std::size_t>(down)].push_back(readout_amplitude(jx, o));
        }
    }

    // Initial ensemble as weighted pure states in the x basis.
    std::vector<std::pair<double, detail::CVector>> ensemble;
    if (config.initial == InitialState::updown) {
        detail::CVector a(atom_dim);
        const double amp = std::pow(2.0, -0.5 * atoms);
        const std::uint32_t down_group = ((1u << atoms) - 1u) & ~((1u << (atoms / 2)) - 1u);
        for (Eigen::Index b = 0; b < atom_dim; ++b) {
            // |-z> = (|+x> - |-x>) / sqrt2 on the second half of the atoms.
            const int sign_flips = std::popcount(static_cast<std::uint32_t>(b) & down_group);
            a(b) = (sign_flips % 2 == 0) ? amp : -amp;
        }
        ensemble.emplace_back(1.0, std::move(a));
    } else {
        const double w = 1.0 / static_cast<double>(atom_dim);
        for (Eigen::Index b = 0; b < atom_dim; ++b) {
            detail::CVector a = detail::CVector::Zero(atom_dim);
            a(b) = 1.0;
            ensemble.emplace_back(w, std::move(a));
        }
    }

    double var[3] = {0.0, 0.0, 0.0};
    double total = 0.0;
    for (std::size_t oi = 0; oi < outcomes.size(); ++oi) {
        detail::Moments mom;
        for (const auto& [weight, amplitude] : ensemble) {
            detail::CVector phi(atom_dim);
            for (Eigen::Index b = 0; b < atom_dim; ++b) {
                const int down = std::popcount(static_cast<std::uint32_t>(b));
                phi(b) = amplitude(b) * table[static_cast<std::size_t>(down)][oi];
            }
            mom.add(phi, atoms, weight);
        }
        if (mom.norm <= 1e-300) {
            continue;
        }
        total += mom.norm;
        for (int l = 0; l < 3; ++l) {
            const double m1 = mom.first[l] / mom.norm;
            const double m2 = mom.second[l] / mom.norm;
            var[l] += mom.norm * (m2 - m1 * m1);
        }
    }
    if (total <= 0.0) {
        throw std::runtime_error("oracle readout has zero probability");
    }
    OracleResult r{};
    r.var_x = var[0] / total;
    r.var_y = var[1] / total;
    r.var_z = var[2] / total;
    r.xi_squared = (r.var_x + r.var_y + r.var_z) / collective;
    r.outcome_probability = total;
    return r;
}

} // namespace singlet::oracle
