#pragma once
/// @file currents.hpp
/// @brief Continuum fluxes of mass, energy and momentum at a point, from the
/// local fields, their gradients and the potential gradient.
///
/// Gradients come from the caller, so the module is grid-agnostic. Composite
/// gradients such as grad(Theta^(1/2) rho) are expanded by the product rule
/// from grad rho, grad Theta and grad u.

#include <cmath>
#include <cstddef>
#include <string>

#include "kinhydro/errors.hpp"
#include "kinhydro/thermo.hpp"
#include "kinhydro/vec3.hpp"

namespace kinhydro {

/// First derivatives of the primitive fields. u[i][j] = d_i u_j.
struct HydroGradients {
    Vec3 rho{};
    Vec3 Theta{};
    Tensor3 u{};
};

struct MassCurrentParts {
    Vec3 advective{};  ///< rho u
    Vec3 drift{};      ///< J_S = -lambda grad Phi / (k_B Theta^(1/2))
    Vec3 diffusive{};  ///< J_d = -(lambda/rho) grad(Theta^(1/2) rho) = fick + soret
    Vec3 fick{};       ///< -lambda Theta^(1/2) grad log rho
    Vec3 soret{};      ///< -lambda grad Theta / (2 Theta^(1/2))
    Vec3 total{};
};

struct EnergyCurrentParts {
    Vec3 advective{};       ///< u (rho e + P)
    Vec3 potential_drift{}; ///< (J_d + J_S) phi
    Vec3 pressure_drift{};  ///< 2 J_S P / rho
    Vec3 diffusive{};       ///< -2 (lambda/rho) grad(P Theta^(1/2))
    Vec3 total{};
};

/// Pi[i][j]: flux along i of momentum component j.
struct MomentumFluxTensor {
    Tensor3 advective{};  ///< rho u_i u_j
    Tensor3 pressure{};   ///< P delta_ij
    Tensor3 drift{};      ///< J_S,i u_j
    Tensor3 viscous{};    ///< (2 lambda / 5 rho)(3 d_i(rho Theta^(1/2) u_j) + d_j(rho Theta^(1/2) u_i))
    Tensor3 total{};      ///< advective + pressure + drift - viscous
};

namespace detail {

inline void require_regular(const HydroSite& s, const ModelParams& p) {
    if (!(s.rho >= p.rho_floor()) || !(s.rho > 0.0))
        throw DomainError("current evaluated below the density floor (rho = " +
                          std::to_string(s.rho) + ")");
    if (!(s.Theta > 0.0))
        throw DomainError("current evaluated at nonpositive temperature " + std::to_string(s.Theta));
}

/// Drift current; the field-free instantiation omits it entirely.
template <bool WithField>
Vec3 drift_current(const HydroSite& s, const Vec3& grad_phi, double lambda, const ModelParams& p) {
    if constexpr (WithField) {
        return grad_phi * (-lambda / (p.k_B * std::sqrt(s.Theta)));
    } else {
        return Vec3{};
    }
}

}  // namespace detail

template <bool WithField>
MassCurrentParts mass_current_impl(const HydroSite& s, const HydroGradients& g,
                                   const Vec3& grad_phi, double lambda, const ModelParams& p) {
    detail::require_regular(s, p);
    MassCurrentParts c;
    const double sq = std::sqrt(s.Theta);
    c.advective = s.u * s.rho;
    c.fick = g.rho * (-lambda * sq / s.rho);
    c.soret = g.Theta * (-lambda / (2.0 * sq));
    c.diffusive = c.fick + c.soret;
    c.drift = detail::drift_current<WithField>(s, grad_phi, lambda, p);
    c.total = c.advective + c.diffusive;
    if constexpr (WithField) c.total += c.drift;
    return c;
}

/// Total mass current J = rho u + J_d + J_S and its parts.
inline MassCurrentParts mass_current(const HydroSite& s, const HydroGradients& g,
                                     const Vec3& grad_phi, double lambda, const ModelParams& p) {
    return mass_current_impl<true>(s, g, grad_phi, lambda, p);
}

/// grad(P Theta^(1/2)) with P = rho k_B Theta / m.
inline Vec3 grad_pressure_root_theta(const HydroSite& s, const HydroGradients& g,
                                     const ModelParams& p) {
    const double sq = std::sqrt(s.Theta);
    return (g.rho * (s.Theta * sq) + g.Theta * (1.5 * s.rho * sq)) * (p.k_B / p.m);
}

template <bool WithField>
EnergyCurrentParts energy_current_impl(const HydroSite& s, const HydroGradients& g,
                                       const Vec3& grad_phi, double lambda, double phi,
                                       const ModelParams& p) {
    const MassCurrentParts mc = mass_current_impl<WithField>(s, g, grad_phi, lambda, p);
    EnergyCurrentParts c;
    c.advective = s.u * (s.rho * s.e + s.P);
    c.diffusive = grad_pressure_root_theta(s, g, p) * (-2.0 * lambda / s.rho);
    if constexpr (WithField) {
        c.potential_drift = (mc.diffusive + mc.drift) * phi;
        c.pressure_drift = mc.drift * (2.0 * s.P / s.rho);
        c.total = c.advective + c.potential_drift + c.pressure_drift + c.diffusive;
    } else {
        c.total = c.advective + c.diffusive;
    }
    return c;
}

/// Energy flux u(rho e + P) + (J_d + J_S) phi + 2 J_S P / rho - 2 (lambda/rho) grad(P Theta^(1/2)).
inline EnergyCurrentParts energy_current(const HydroSite& s, const HydroGradients& g,
                                         const Vec3& grad_phi, double lambda, double phi,
                                         const ModelParams& p) {
    return energy_current_impl<true>(s, g, grad_phi, lambda, phi, p);
}

/// d_i(rho Theta^(1/2) u_j).
inline Tensor3 grad_rho_root_theta_u(const HydroSite& s, const HydroGradients& g) {
    const double sq = std::sqrt(s.Theta);
    Tensor3 t{};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            t[i][j] = g.rho[i] * sq * s.u[j] + s.rho * g.Theta[i] / (2.0 * sq) * s.u[j] +
                      s.rho * sq * g.u[i][j];
    return t;
}

template <bool WithField>
MomentumFluxTensor momentum_flux_impl(const HydroSite& s, const HydroGradients& g,
                                      const Vec3& grad_phi, double lambda, const ModelParams& p) {
    detail::require_regular(s, p);
    MomentumFluxTensor f;
    const Tensor3 G = grad_rho_root_theta_u(s, g);
    const Vec3 js = detail::drift_current<WithField>(s, grad_phi, lambda, p);
    const double visc = 2.0 * lambda / (5.0 * s.rho);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            f.advective[i][j] = s.rho * s.u[i] * s.u[j];
            f.pressure[i][j] = i == j ? s.P : 0.0;
            f.drift[i][j] = js[i] * s.u[j];
            f.viscous[i][j] = visc * (3.0 * G[i][j] + G[j][i]);
            f.total[i][j] = f.advective[i][j] + f.pressure[i][j];
            if constexpr (WithField) f.total[i][j] += f.drift[i][j];
            f.total[i][j] -= f.viscous[i][j];
        }
    return f;
}

/// Momentum flux tensor rho u u + P I + J_S u - viscous.
inline MomentumFluxTensor momentum_flux(const HydroSite& s, const HydroGradients& g,
                                        const Vec3& grad_phi, double lambda, const ModelParams& p) {
    return momentum_flux_impl<true>(s, g, grad_phi, lambda, p);
}

/// Body force density rho f with f = -grad Phi / m.
inline Vec3 body_force_density(const HydroSite& s, const Vec3& grad_phi, const ModelParams& p) {
    return grad_phi * (-s.rho / p.m);
}

}  // namespace kinhydro
