#pragma once
/// @file pde.hpp
/// @brief Conservative finite-volume solver for density, energy and momentum
/// in an external potential, on 1-3 dimensional periodic or reflecting grids.
///
/// Face fluxes are evaluated by module `currents` on face-centred states:
/// arithmetic averages of the neighbouring cells, normal gradients by the
/// two-point difference and tangential gradients by averaged central
/// differences. The divergence telescopes, so totals change only through
/// the body force. Reflecting walls pass no mass or energy; their momentum
/// flux comes from a mirror ghost cell.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kinhydro/currents.hpp"
#include "kinhydro/errors.hpp"
#include "kinhydro/parallel.hpp"
#include "kinhydro/thermo.hpp"
#include "kinhydro/vec3.hpp"

namespace kinhydro {

enum class Boundary { Periodic, Reflecting };
enum class FluxScheme { Central, UpwindAdvective };
enum class TimeScheme { Euler, RK2 };
/// Constant: lambda from ModelParams for the whole run.
/// MeanFreePath: lambda = ell(rho) c rho / (2 pi Theta0)^(1/2) per face.
enum class LambdaMode { Constant, MeanFreePath };

struct Grid {
    std::size_t dims = 1;
    std::array<std::size_t, 3> n{1, 1, 1};
    double h = 1.0;  ///< cm
    Boundary boundary = Boundary::Periodic;

    std::size_t cells() const { return n[0] * n[1] * n[2]; }
    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
        return i + n[0] * (j + n[1] * k);
    }
    std::array<std::size_t, 3> coords(std::size_t c) const {
        return {c % n[0], (c / n[0]) % n[1], c / (n[0] * n[1])};
    }
    /// Cell-centre position.
    Vec3 center(std::size_t c) const {
        const auto q = coords(c);
        return {(static_cast<double>(q[0]) + 0.5) * h, (static_cast<double>(q[1]) + 0.5) * h,
                (static_cast<double>(q[2]) + 0.5) * h};
    }
    /// Neighbour along axis with offset +-1; nullopt outside a reflecting box.
    std::optional<std::size_t> neighbor(std::size_t c, std::size_t axis, int offset) const {
        auto q = coords(c);
        const long v = static_cast<long>(q[axis]) + offset;
        const long len = static_cast<long>(n[axis]);
        if (v < 0 || v >= len) {
            if (boundary == Boundary::Reflecting) return std::nullopt;
            q[axis] = static_cast<std::size_t>((v + len) % len);
        } else {
            q[axis] = static_cast<std::size_t>(v);
        }
        return index(q[0], q[1], q[2]);
    }
    double cell_volume() const { return std::pow(h, static_cast<double>(dims)); }

    void validate() const {
        if (dims < 1 || dims > 3) throw DomainError("grid dims must be 1, 2 or 3");
        if (!(h > 0.0)) throw DomainError("grid spacing must be positive");
        for (std::size_t d = 0; d < 3; ++d) {
            if (d < dims && n[d] < 4) throw DomainError("grid needs at least 4 cells per active axis");
            if (d >= dims && n[d] != 1) throw DomainError("inactive grid axes must have one cell");
        }
    }
};

/// Conserved variables, one value per cell.
struct HydroState {
    Grid grid;
    std::vector<double> rho;
    std::vector<double> rhoe;
    std::array<std::vector<double>, 3> mom;
    double time = 0.0;

    explicit HydroState(const Grid& g = {})
        : grid(g), rho(g.cells(), 0.0), rhoe(g.cells(), 0.0),
          mom{std::vector<double>(g.cells(), 0.0), std::vector<double>(g.cells(), 0.0),
              std::vector<double>(g.cells(), 0.0)} {}
};

struct SolverConfig {
    std::optional<double> dt;       ///< fixed step; must satisfy the CFL bound
    double cfl = 0.4;
    std::optional<double> lambda;   ///< overrides ModelParams::lambda() in Constant mode
    LambdaMode lambda_mode = LambdaMode::Constant;
    FluxScheme flux = FluxScheme::Central;
    TimeScheme time = TimeScheme::RK2;
    unsigned threads = 1;
};

/// Time derivative of the conserved arrays.
struct Derivative {
    std::vector<double> rho, rhoe;
    std::array<std::vector<double>, 3> mom;
    Vec3 body_force_total{};  ///< sum over cells of rho f times the cell volume

    explicit Derivative(std::size_t n = 0)
        : rho(n, 0.0), rhoe(n, 0.0),
          mom{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)} {}
};

// ---------------------------------------------------------------------------
// Primitive variables

/// Potential at cell centres at time t.
inline std::vector<double> cell_potential(const Grid& g, const ModelParams& p, double t) {
    std::vector<double> phi(g.cells());
    for (std::size_t c = 0; c < phi.size(); ++c) phi[c] = p.potential(g.center(c), t);
    return phi;
}

/// Primitive fields of one cell; phi_cell is Phi (erg) at the cell centre.
inline HydroSite primitive_recovery(const HydroState& s, std::size_t cell, double phi_cell,
                                    const ModelParams& p) {
    const double rho = s.rho[cell];
    if (!(rho >= p.rho_floor()) || !(rho > 0.0))
        throw RecoveryError("density " + std::to_string(rho) + " below floor", cell);
    const Vec3 u{s.mom[0][cell] / rho, s.mom[1][cell] / rho, s.mom[2][cell] / rho};
    const double e = s.rhoe[cell] / rho;
    double internal = e - phi_cell / p.m;
    if (p.keep_kinetic_in_e) internal -= 0.5 * dot(u, u);
    const double Theta = 2.0 * p.m * internal / (3.0 * p.k_B);
    if (Theta < 0.0) throw RecoveryError("negative temperature " + std::to_string(Theta), cell);
    HydroSite h;
    h.rho = rho;
    h.u = u;
    h.e = e;
    h.Theta = Theta;
    h.P = rho * p.k_B * Theta / p.m;
    return h;
}

/// Writes the conserved variables of a primitive site into a cell.
inline void store_primitive(HydroState& s, std::size_t cell, const HydroSite& h) {
    s.rho[cell] = h.rho;
    s.rhoe[cell] = h.rho * h.e;
    for (std::size_t j = 0; j < 3; ++j) s.mom[j][cell] = h.rho * h.u[j];
}

/// State from primitive fields rho(x), u(x), Theta(x) at cell centres.
template <class RhoFn, class UFn, class ThetaFn>
HydroState make_state(const Grid& g, const ModelParams& p, RhoFn rho, UFn u, ThetaFn Theta,
                      double t = 0.0) {
    g.validate();
    HydroState s(g);
    s.time = t;
    for (std::size_t c = 0; c < g.cells(); ++c) {
        const Vec3 x = g.center(c);
        store_primitive(s, c, make_hydro_site(rho(x), u(x), Theta(x), p.potential(x, t), p));
    }
    return s;
}

inline double run_lambda(const SolverConfig& cfg, const ModelParams& p) {
    return cfg.lambda.value_or(p.lambda());
}

// ---------------------------------------------------------------------------
// Face assembly

namespace detail {

/// Central difference of q at cell c along axis; one-sided (ghost = self) at a
/// reflecting wall.
inline double central_diff(const Grid& g, std::span<const double> q, std::size_t c,
                           std::size_t axis) {
    const auto lo = g.neighbor(c, axis, -1), hi = g.neighbor(c, axis, +1);
    const double ql = lo ? q[*lo] : q[c];
    const double qh = hi ? q[*hi] : q[c];
    return (qh - ql) / (2.0 * g.h);
}

/// Primitive fields held as structure-of-arrays for stencil access.
struct PrimitiveArrays {
    std::vector<double> rho, e, Theta, phi;
    std::array<std::vector<double>, 3> u;
};

inline PrimitiveArrays primitives(const HydroState& s, std::span<const double> phi,
                                  const ModelParams& p) {
    const std::size_t n = s.grid.cells();
    PrimitiveArrays a;
    a.rho.resize(n);
    a.e.resize(n);
    a.Theta.resize(n);
    a.phi.assign(phi.begin(), phi.end());
    for (auto& v : a.u) v.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
        const HydroSite h = primitive_recovery(s, c, phi[c], p);
        a.rho[c] = h.rho;
        a.e[c] = h.e;
        a.Theta[c] = h.Theta;
        for (std::size_t j = 0; j < 3; ++j) a.u[j][c] = h.u[j];
    }
    return a;
}

/// Face state between cells L and R (R is the + neighbour along axis).
struct FaceData {
    HydroSite site;
    HydroGradients grad;
    Vec3 grad_phi{};
    double phi_specific = 0.0;  ///< Phi/m at the face
    double lambda = 0.0;
};

inline double face_lambda(double rho_f, const SolverConfig& cfg, const ModelParams& p) {
    if (cfg.lambda_mode == LambdaMode::Constant) return run_lambda(cfg, p);
    return mean_free_path(rho_f, p) * p.sound_speed() * rho_f /
           std::sqrt(2.0 * std::numbers::pi * p.Theta0);
}

inline FaceData face_data(const Grid& g, const PrimitiveArrays& a, std::size_t L, std::size_t R,
                          std::size_t axis, const SolverConfig& cfg, const ModelParams& p) {
    FaceData f;
    const auto avg = [&](const std::vector<double>& q) { return 0.5 * (q[L] + q[R]); };
    const auto normal = [&](const std::vector<double>& q) { return (q[R] - q[L]) / g.h; };
    const auto tangential = [&](const std::vector<double>& q, std::size_t t) {
        return 0.5 * (central_diff(g, q, L, t) + central_diff(g, q, R, t));
    };
    f.site.rho = avg(a.rho);
    f.site.e = avg(a.e);
    f.site.Theta = avg(a.Theta);
    for (std::size_t j = 0; j < 3; ++j) f.site.u[j] = avg(a.u[j]);
    f.site.P = f.site.rho * p.k_B * f.site.Theta / p.m;
    for (std::size_t t = 0; t < 3; ++t) {
        if (t >= g.dims) continue;
        if (t == axis) {
            f.grad.rho[t] = normal(a.rho);
            f.grad.Theta[t] = normal(a.Theta);
            for (std::size_t j = 0; j < 3; ++j) f.grad.u[t][j] = normal(a.u[j]);
            f.grad_phi[t] = normal(a.phi);
        } else {
            f.grad.rho[t] = tangential(a.rho, t);
            f.grad.Theta[t] = tangential(a.Theta, t);
            for (std::size_t j = 0; j < 3; ++j) f.grad.u[t][j] = tangential(a.u[j], t);
            f.grad_phi[t] = tangential(a.phi, t);
        }
    }
    f.phi_specific = avg(a.phi) / p.m;
    f.lambda = face_lambda(f.site.rho, cfg, p);
    return f;
}

/// Normal fluxes through one face: mass, energy, momentum components.
struct FaceFlux {
    double mass = 0.0, energy = 0.0;
    std::array<double, 3> mom{};
};

template <bool WithField>
FaceFlux face_flux(const Grid& g, const PrimitiveArrays& a, std::size_t L, std::size_t R,
                   std::size_t axis, const SolverConfig& cfg, const ModelParams& p) {
    const FaceData f = face_data(g, a, L, R, axis, cfg, p);
    const auto mc = mass_current_impl<WithField>(f.site, f.grad, f.grad_phi, f.lambda, p);
    const auto ec = energy_current_impl<WithField>(f.site, f.grad, f.grad_phi, f.lambda,
                                                   f.phi_specific, p);
    const auto mf = momentum_flux_impl<WithField>(f.site, f.grad, f.grad_phi, f.lambda, p);
    FaceFlux out;
    out.mass = mc.total[axis];
    out.energy = ec.total[axis];
    for (std::size_t j = 0; j < 3; ++j) out.mom[j] = mf.total[axis][j];
    if (cfg.flux == FluxScheme::UpwindAdvective) {
        const double un = f.site.u[axis];
        const std::size_t up = un >= 0.0 ? L : R;
        const double rho_up = a.rho[up];
        const double enth_up = rho_up * a.e[up] + rho_up * p.k_B * a.Theta[up] / p.m;
        out.mass += un * rho_up - mc.advective[axis];
        out.energy += un * enth_up - ec.advective[axis];
        for (std::size_t j = 0; j < 3; ++j)
            out.mom[j] += un * rho_up * a.u[j][up] - mf.advective[axis][j];
    }
    return out;
}

/// Flux through a reflecting wall on side `side` (+1 or -1) of cell c along
/// axis. The mirror ghost has the normal velocity reversed and every other
/// field equal, so no mass or energy crosses and the wall exerts its stress.
template <bool WithField>
FaceFlux wall_flux(const Grid& g, const PrimitiveArrays& a, std::size_t c, std::size_t axis,
                   int side, const SolverConfig& cfg, const ModelParams& p) {
    HydroSite site;
    site.rho = a.rho[c];
    site.e = a.e[c];
    site.Theta = a.Theta[c];
    for (std::size_t j = 0; j < 3; ++j) site.u[j] = j == axis ? 0.0 : a.u[j][c];
    site.P = site.rho * p.k_B * site.Theta / p.m;
    HydroGradients grad;
    Vec3 grad_phi{};
    for (std::size_t t = 0; t < g.dims; ++t) {
        if (t == axis) {
            grad.u[t][axis] = -2.0 * side * a.u[axis][c] / g.h;
            continue;
        }
        grad.rho[t] = central_diff(g, a.rho, c, t);
        grad.Theta[t] = central_diff(g, a.Theta, c, t);
        for (std::size_t j = 0; j < 3; ++j)
            if (j != axis) grad.u[t][j] = central_diff(g, a.u[j], c, t);
        grad_phi[t] = central_diff(g, a.phi, c, t);
    }
    const auto mf = momentum_flux_impl<WithField>(site, grad, grad_phi, face_lambda(site.rho, cfg, p), p);
    FaceFlux out;
    for (std::size_t j = 0; j < 3; ++j) out.mom[j] = mf.total[axis][j];
    return out;
}

/// Index of the face on the + side of cell c along axis (faces share cell indexing).
template <bool WithField>
std::array<std::vector<FaceFlux>, 3> all_face_fluxes(const Grid& g, const PrimitiveArrays& a,
                                                     const SolverConfig& cfg,
                                                     const ModelParams& p) {
    std::array<std::vector<FaceFlux>, 3> faces;
    for (std::size_t axis = 0; axis < g.dims; ++axis) {
        faces[axis].assign(g.cells(), FaceFlux{});
        parallel_for(g.cells(), cfg.threads, [&](std::size_t c) {
            const auto R = g.neighbor(c, axis, +1);
            if (R) faces[axis][c] = face_flux<WithField>(g, a, c, *R, axis, cfg, p);
        });
    }
    return faces;
}

template <bool WithField>
Derivative rhs_impl(const HydroState& s, std::span<const double> phi, const SolverConfig& cfg,
                    const ModelParams& p) {
    const Grid& g = s.grid;
    const PrimitiveArrays a = primitives(s, phi, p);
    const auto faces = all_face_fluxes<WithField>(g, a, cfg, p);
    Derivative d(g.cells());
    std::vector<Vec3> force(g.cells());
    parallel_for(g.cells(), cfg.threads, [&](std::size_t c) {
        for (std::size_t axis = 0; axis < g.dims; ++axis) {
            const FaceFlux plus = g.neighbor(c, axis, +1)
                                      ? faces[axis][c]
                                      : wall_flux<WithField>(g, a, c, axis, +1, cfg, p);
            const auto lo = g.neighbor(c, axis, -1);
            const FaceFlux minus =
                lo ? faces[axis][*lo] : wall_flux<WithField>(g, a, c, axis, -1, cfg, p);
            d.rho[c] -= (plus.mass - minus.mass) / g.h;
            d.rhoe[c] -= (plus.energy - minus.energy) / g.h;
            for (std::size_t j = 0; j < 3; ++j) d.mom[j][c] -= (plus.mom[j] - minus.mom[j]) / g.h;
        }
        if constexpr (WithField) {
            Vec3 gp{};
            for (std::size_t axis = 0; axis < g.dims; ++axis) gp[axis] = central_diff(g, a.phi, c, axis);
            HydroSite site;
            site.rho = a.rho[c];
            force[c] = body_force_density(site, gp, p);
            for (std::size_t j = 0; j < 3; ++j) d.mom[j][c] += force[c][j];
        }
    });
    if constexpr (WithField) {
        for (const auto& f : force) d.body_force_total += f * g.cell_volume();
    }
    return d;
}

}  // namespace detail

/// Time derivative of the conserved arrays with the potential at time t.
inline Derivative rhs(const HydroState& s, const ModelParams& p, const SolverConfig& cfg,
                      double t) {
    const auto phi = cell_potential(s.grid, p, t);
    return detail::rhs_impl<true>(s, phi, cfg, p);
}

/// The field-free system assembled without drift terms or body force.
inline Derivative rhs_field_free(const HydroState& s, const ModelParams& p,
                                 const SolverConfig& cfg) {
    const std::vector<double> zero(s.grid.cells(), 0.0);
    return detail::rhs_impl<false>(s, zero, cfg, p);
}

// ---------------------------------------------------------------------------
// Time stepping

/// Largest stable step: cfl * min(h / (|u| + c_s + drift), h^2 / (2 d D_max)).
inline double cfl_bound(const HydroState& s, const ModelParams& p, const SolverConfig& cfg,
                        double t) {
    const Grid& g = s.grid;
    const auto phi = cell_potential(g, p, t);
    const auto a = detail::primitives(s, phi, p);
    double wave = 0.0, diff = 0.0;
    for (std::size_t c = 0; c < g.cells(); ++c) {
        const double sq = std::sqrt(a.Theta[c]);
        const double lam = detail::face_lambda(a.rho[c], cfg, p);
        double speed = std::sqrt(5.0 * p.k_B * a.Theta[c] / (3.0 * p.m));
        double grad_phi = 0.0, unorm = 0.0;
        for (std::size_t axis = 0; axis < g.dims; ++axis) {
            grad_phi = std::max(grad_phi, std::abs(detail::central_diff(g, a.phi, c, axis)));
            grad_phi = std::max(grad_phi, [&] {
                const auto R = g.neighbor(c, axis, +1);
                return R ? std::abs(a.phi[*R] - a.phi[c]) / g.h : 0.0;
            }());
            unorm = std::max(unorm, std::abs(a.u[axis][c]));
        }
        if (sq > 0.0) speed += lam * grad_phi / (p.k_B * sq * a.rho[c]);
        wave = std::max(wave, unorm + speed);
        diff = std::max(diff, 2.0 * lam * sq / a.rho[c]);
    }
    double bound = std::numeric_limits<double>::infinity();
    if (wave > 0.0) bound = std::min(bound, g.h / wave);
    if (diff > 0.0) bound = std::min(bound, g.h * g.h / (2.0 * static_cast<double>(g.dims) * diff));
    return cfg.cfl * bound;
}

/// Totals over the grid, times the cell volume.
struct ConservedTotals {
    double mass = 0.0;
    double energy = 0.0;
    Vec3 momentum{};
};

inline ConservedTotals totals(const HydroState& s) {
    ConservedTotals t;
    const double v = s.grid.cell_volume();
    for (std::size_t c = 0; c < s.grid.cells(); ++c) {
        t.mass += s.rho[c] * v;
        t.energy += s.rhoe[c] * v;
        for (std::size_t j = 0; j < 3; ++j) t.momentum[j] += s.mom[j][c] * v;
    }
    return t;
}

struct StepReport {
    double dt = 0.0;
    Vec3 impulse{};  ///< time-integrated total body force over the step
};

namespace detail {

inline void axpy(HydroState& out, const HydroState& base, const Derivative& d, double dt) {
    const std::size_t n = base.grid.cells();
    for (std::size_t c = 0; c < n; ++c) {
        out.rho[c] = base.rho[c] + dt * d.rho[c];
        out.rhoe[c] = base.rhoe[c] + dt * d.rhoe[c];
        for (std::size_t j = 0; j < 3; ++j) out.mom[j][c] = base.mom[j][c] + dt * d.mom[j][c];
    }
}

}  // namespace detail

/// One explicit step. Throws StepSizeError before touching the state if a
/// fixed dt exceeds the CFL bound.
inline StepReport step(HydroState& s, const ModelParams& p, const SolverConfig& cfg) {
    const double bound = cfl_bound(s, p, cfg, s.time);
    double dt = bound;
    if (cfg.dt) {
        dt = *cfg.dt;
        if (!(dt > 0.0) || dt > bound)
            throw StepSizeError("dt = " + std::to_string(dt) + " exceeds the CFL bound " +
                                std::to_string(bound));
    }
    StepReport rep;
    rep.dt = dt;
    const Derivative d0 = rhs(s, p, cfg, s.time);
    if (cfg.time == TimeScheme::Euler) {
        detail::axpy(s, s, d0, dt);
        rep.impulse = d0.body_force_total * dt;
    } else {
        HydroState mid = s;
        detail::axpy(mid, s, d0, dt);
        const Derivative d1 = rhs(mid, p, cfg, s.time + dt);
        for (std::size_t c = 0; c < s.grid.cells(); ++c) {
            s.rho[c] += 0.5 * dt * (d0.rho[c] + d1.rho[c]);
            s.rhoe[c] += 0.5 * dt * (d0.rhoe[c] + d1.rhoe[c]);
            for (std::size_t j = 0; j < 3; ++j)
                s.mom[j][c] += 0.5 * dt * (d0.mom[j][c] + d1.mom[j][c]);
        }
        rep.impulse = (d0.body_force_total + d1.body_force_total) * (0.5 * dt);
    }
    s.time += dt;
    return rep;
}

// ---------------------------------------------------------------------------
// Smoluchowski reference: the mass equation alone with u = 0

/// d rho / dt = -div(J_d + J_S) with the given temperature field.
inline std::vector<double> smoluchowski_rhs(const Grid& g, std::span<const double> rho,
                                            std::span<const double> Theta,
                                            std::span<const double> phi, const SolverConfig& cfg,
                                            const ModelParams& p) {
    detail::PrimitiveArrays a;
    a.rho.assign(rho.begin(), rho.end());
    a.Theta.assign(Theta.begin(), Theta.end());
    a.phi.assign(phi.begin(), phi.end());
    a.e.assign(rho.size(), 0.0);
    for (auto& v : a.u) v.assign(rho.size(), 0.0);
    std::vector<double> mass_face(g.cells() * g.dims, 0.0);
    for (std::size_t axis = 0; axis < g.dims; ++axis)
        parallel_for(g.cells(), cfg.threads, [&](std::size_t c) {
            const auto R = g.neighbor(c, axis, +1);
            if (!R) return;
            const auto f = detail::face_data(g, a, c, *R, axis, cfg, p);
            mass_face[axis * g.cells() + c] =
                mass_current_impl<true>(f.site, f.grad, f.grad_phi, f.lambda, p).total[axis];
        });
    std::vector<double> d(g.cells(), 0.0);
    for (std::size_t c = 0; c < g.cells(); ++c)
        for (std::size_t axis = 0; axis < g.dims; ++axis) {
            const double plus = mass_face[axis * g.cells() + c];
            const auto lo = g.neighbor(c, axis, -1);
            const double minus = lo ? mass_face[axis * g.cells() + *lo] : 0.0;
            d[c] -= (plus - minus) / g.h;
        }
    return d;
}

/// Evolves rho alone to t_end (RK2 or Euler per cfg) at uniform temperature.
inline std::vector<double> smoluchowski_reference(std::vector<double> rho, const ModelParams& p,
                                                  double Theta_uniform, double t_end,
                                                  const Grid& g, const SolverConfig& cfg = {}) {
    g.validate();
    if (!(Theta_uniform > 0.0)) throw DomainError("Smoluchowski reference needs Theta > 0");
    const std::vector<double> Theta(g.cells(), Theta_uniform);
    double t = 0.0;
    while (t < t_end * (1.0 - 1e-12)) {
        HydroState probe(g);
        probe.rho = rho;
        for (std::size_t c = 0; c < g.cells(); ++c)
            probe.rhoe[c] = rho[c] * (p.potential(g.center(c), t) / p.m + 1.5 * p.k_B * Theta_uniform / p.m);
        double dt = std::min(cfg.dt.value_or(cfl_bound(probe, p, cfg, t)), t_end - t);
        const auto phi0 = cell_potential(g, p, t);
        const auto d0 = smoluchowski_rhs(g, rho, Theta, phi0, cfg, p);
        if (cfg.time == TimeScheme::Euler) {
            for (std::size_t c = 0; c < rho.size(); ++c) rho[c] += dt * d0[c];
        } else {
            std::vector<double> mid(rho.size());
            for (std::size_t c = 0; c < rho.size(); ++c) mid[c] = rho[c] + dt * d0[c];
            const auto phi1 = cell_potential(g, p, t + dt);
            const auto d1 = smoluchowski_rhs(g, mid, Theta, phi1, cfg, p);
            for (std::size_t c = 0; c < rho.size(); ++c) rho[c] += 0.5 * dt * (d0[c] + d1[c]);
        }
        t += dt;
    }
    return rho;
}

/// F = sum (k_B Theta / m) rho log rho + rho Phi / m, times the cell volume.
inline double free_energy(std::span<const double> rho, double Theta, std::span<const double> phi,
                          const Grid& g, const ModelParams& p) {
    double f = 0.0;
    for (std::size_t c = 0; c < rho.size(); ++c)
        f += (p.k_B * Theta / p.m) * rho[c] * std::log(rho[c]) + rho[c] * phi[c] / p.m;
    return f * g.cell_volume();
}

}  // namespace kinhydro
