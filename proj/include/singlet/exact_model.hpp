/**
 * @file exact_model.hpp
 * @brief Exact (non-Gaussian) model of the Jx QND measurement on the two-group
 *        state |+j>^{N1} |-j>^{N2}.
 *
 * In the Jx basis of the two groups the post-readout atomic amplitude is
 *   G(j1 + j2) f1(j1) f2(j2) (-1)^{j2},
 * where f_m has |f_m(x)|^2 ~ exp(-2 x^2 / N_m) (spin-1/2 counts) and G is the
 * Fourier transform of the light amplitude g(s) ~ exp(-s^2 / 2 S0) times the
 * S_y = 0 projection weights w(s). With w nonzero on every other s the transform
 * gives |G(u)|^2 ~ exp(-u^2 / 2 sigma_G^2) with sigma_G^2 = J / (2 kappa^2).
 * Higher spins reduce to spin-1/2 by counting 2 N_m j constituents per group.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace singlet::exact {

/// (N1, N2, j) -> (2 N1 j, 2 N2 j): spin-1/2 group sizes with the same dynamics.
inline std::pair<std::int64_t, std::int64_t> map_higher_spin(std::int64_t n1, std::int64_t n2, int two_j)
{
    if (two_j < 1) {
        throw std::invalid_argument("2j must be a positive integer");
    }
    return {n1 * two_j, n2 * two_j};
}

/// Two polarized groups, stored as their spin-1/2 equivalents.
class TwoGroupState {
public:
    /// `n_up` atoms in |+j>_z and `n_down` in |-j>_z.
    TwoGroupState(std::int64_t n_up, std::int64_t n_down, int two_j)
        : two_j_(two_j)
    {
        if (n_up < 1 || n_down < 1) {
            throw std::invalid_argument("both groups need at least one atom");
        }
        std::tie(up_, down_) = map_higher_spin(n_up, n_down, two_j);
        if (up_ % 2 != 0 || down_ % 2 != 0) {
            throw std::invalid_argument("spin-1/2 group sizes must be even, got " + std::to_string(up_) + " and " +
                                        std::to_string(down_));
        }
    }

    /// The symmetric |+j>^{N/2} |-j>^{N/2} state.
    static TwoGroupState balanced(std::int64_t atom_count, int two_j)
    {
        if (atom_count % 2 != 0) {
            throw std::invalid_argument("balanced two-group state needs an even atom count");
        }
        return TwoGroupState(atom_count / 2, atom_count / 2, two_j);
    }

    std::int64_t up_count() const { return up_; }
    std::int64_t down_count() const { return down_; }
    int two_j() const { return two_j_; }
    bool asymmetric() const { return up_ != down_; }

    /// J = N j = (N1' + N2') / 2.
    double collective_spin() const { return 0.5 * static_cast<double>(up_ + down_); }

    /// Variance of group m's Jx distribution |f_m|^2: N_m' / 4.
    double up_variance() const { return 0.25 * static_cast<double>(up_); }
    double down_variance() const { return 0.25 * static_cast<double>(down_); }

    /// Prior variance of j1 + j2.
    double prior_variance() const { return up_variance() + down_variance(); }

    /// var(Jy) + var(Jz) of the initial state; Jz is sharp on the two-group state.
    double transverse_variance() const { return prior_variance(); }

private:
    std::int64_t up_ = 0;
    std::int64_t down_ = 0;
    int two_j_ = 1;
};

inline constexpr double kKernelConstant = 0.5;

/// Gaussian envelope of |G(u)|^2 after a pulse of strength kappa = t / tau.
struct KernelG {
    double t_over_tau;
    /// sigma_G^2 = c J (tau / t)^2 with c = 1/2.
    double variance;

    static KernelG at(double t_over_tau, double collective_spin)
    {
        if (!(t_over_tau > 0.0)) {
            throw std::invalid_argument("t / tau must be positive");
        }
        return {t_over_tau, kKernelConstant * collective_spin / (t_over_tau * t_over_tau)};
    }
};

/// Fits c in sigma_G^2 = c J / kappa^2 from the discrete sum
/// G(u) = sum_{s even} exp(-i u s Omega t) g(s), with Omega t = kappa / sqrt(S0 J).
/// The second moment of |G|^2 is taken over one period of G centred at 0,
/// narrowed to 40 sqrt(J) / kappa when the period is much wider than the kernel.
inline double fit_kernel_constant(double stokes_number, double collective_spin, double kappa, int samples = 4001)
{
    if (!(stokes_number > 0.0 && collective_spin > 0.0 && kappa > 0.0)) {
        throw std::invalid_argument("kernel fit needs positive S0, J and kappa");
    }
    const double omega_t = kappa / std::sqrt(stokes_number * collective_spin);
    // exp(-s^2 / 2 S0) is negligible beyond 12 sqrt(S0).
    const auto s_max = static_cast<std::int64_t>(std::ceil(12.0 * std::sqrt(stokes_number)));
    const double half_period =
        std::min(std::numbers::pi / (2.0 * omega_t), 40.0 * std::sqrt(collective_spin) / kappa);
    double norm = 0.0;
    double second = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double u = -half_period + 2.0 * half_period * k / (samples - 1);
        std::complex<double> g{0.0, 0.0};
        for (std::int64_t s = -s_max - (s_max % 2); s <= s_max; s += 2) {
            const double sd = static_cast<double>(s);
            g += std::polar(std::exp(-sd * sd / (2.0 * stokes_number)), -u * sd * omega_t);
        }
        const double weight = std::norm(g);
        norm += weight;
        second += weight * u * u;
    }
    const double sigma2 = second / norm;
    return sigma2 * kappa * kappa / collective_spin;
}

/// Posterior variance of j1 + j2 under the Gaussian kernel (harmonic combination).
inline double var_jx_closed_form(const TwoGroupState& state, double t_over_tau)
{
    const double g = KernelG::at(t_over_tau, state.collective_spin()).variance;
    const double u = state.prior_variance();
    return g * u / (g + u);
}

/// <Jx^2> from the 2-D integral of (j1 + j2)^2 |G(j1 + j2) f1(j1) f2(j2)|^2,
/// evaluated in the coordinates (j1, u = j1 + j2) by nested adaptive quadrature.
inline double var_jx_quadrature(const TwoGroupState& state, double t_over_tau)
{
    using boost::math::quadrature::gauss_kronrod;
    constexpr double kWindow = 10.0; // standard deviations
    constexpr double kTol = 1e-13;

    const double kernel = KernelG::at(t_over_tau, state.collective_spin()).variance;
    const double v1 = state.up_variance();
    const double v2 = state.down_variance();
    const double s1 = std::sqrt(v1);
    const double u_half = kWindow * std::sqrt(std::min(kernel, v1 + v2));

    auto inner = [&](double u) {
        auto f = [&](double j1) {
            const double j2 = u - j1;
            return std::exp(-0.5 * (j1 * j1 / v1 + j2 * j2 / v2));
        };
        const double centre = u * v1 / (v1 + v2);
        const double lo = std::min(-kWindow * s1, centre - kWindow * s1);
        const double hi = std::max(kWindow * s1, centre + kWindow * s1);
        return gauss_kronrod<double, 31>::integrate(f, lo, hi, 12, kTol) * std::exp(-0.5 * u * u / kernel);
    };
    const double norm = gauss_kronrod<double, 31>::integrate(inner, -u_half, u_half, 15, kTol);
    const double second =
        gauss_kronrod<double, 31>::integrate([&](double u) { return u * u * inner(u); }, -u_half, u_half, 15, kTol);
    return second / norm;
}

/// Relative disagreement allowed between the closed form and the quadrature.
inline constexpr double kQuadratureAgreement = 1e-8;

/// var(Jx) after a pulse of strength t / tau. With `cross_check` the 2-D
/// quadrature is evaluated too and a disagreement above 1e-8 throws.
inline double var_jx_exact(const TwoGroupState& state, double t_over_tau, bool cross_check = false)
{
    if (!(t_over_tau > 0.0)) {
        throw std::invalid_argument("exact model needs t > 0");
    }
    if (std::isinf(t_over_tau)) {
        return 0.0;
    }
    const double closed = var_jx_closed_form(state, t_over_tau);
    if (cross_check) {
        const double quad = var_jx_quadrature(state, t_over_tau);
        if (std::abs(quad - closed) > kQuadratureAgreement * std::abs(closed)) {
            throw std::runtime_error("exact var(Jx): closed form " + std::to_string(closed) +
                                     " disagrees with quadrature " + std::to_string(quad));
        }
    }
    return closed;
}

/// xi^2(t) = (var Jx(t) + var Jy + var Jz) / J, holding the transverse part at
/// its initial value since [Jx, Jy^2 + Jz^2] = 0. t = 0 returns the prior.
inline double xi_exact(const TwoGroupState& state, double t_over_tau)
{
    if (!(t_over_tau >= 0.0)) {
        throw std::invalid_argument("exact model needs t >= 0");
    }
    const double var_x = t_over_tau == 0.0 ? state.prior_variance() : var_jx_exact(state, t_over_tau);
    return (var_x + state.transverse_variance()) / state.collective_spin();
}

} // namespace singlet::exact
