#pragma once
/// @file thermo.hpp
/// @brief State manifold of the lattice gas: exponential site states in
/// canonical (xi, beta, zeta) and mixture (N, E, w) coordinates, partition
/// functions, entropy, pressure and the macroscopic fields built from them.
///
/// Units are c.g.s. throughout. A site state is
///   p(omega) = Xi^-1 exp(-xi N(omega) - beta E(omega) - zeta . P(omega))
/// on Omega_x = {hole} U (eps Z)^3, with momentum sums replaced by integrals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>

#include "kinhydro/errors.hpp"
#include "kinhydro/vec3.hpp"

namespace kinhydro {

/// External potential Phi(x, t) in erg. Time-independent potentials ignore t.
using PotentialFn = std::function<double(const Vec3& x, double t)>;

/// Physical constants of the model plus the switches shared by the modules.
struct ModelParams {
    double m = 6.63e-23;          ///< molecule mass (g), argon
    double a = 1.0e-8;            ///< lattice spacing / hard-core size (cm)
    double eps = 6.6e-19;         ///< momentum quantum (g cm/s)
    double k_B = 1.380649e-16;    ///< Boltzmann constant (erg/K)
    double Theta0 = 300.0;        ///< reference temperature (K)
    double cutoff_sigmas = 8.0;   ///< momentum cutoff K in thermal widths
    double rho_floor_fraction = 1e-12;  ///< density floor as a fraction of rho_max
    bool keep_kinetic_in_e = false;     ///< keep u.u/2 in the specific energy e
    PotentialFn potential = [](const Vec3&, double) { return 0.0; };

    /// Largest mass density, one molecule per a^3.
    double rho_max() const { return m / (a * a * a); }
    /// Approximate sound speed c = (k_B Theta0 / m)^(1/2).
    double sound_speed() const { return std::sqrt(k_B * Theta0 / m); }
    /// Diffusion constant lambda = a rho_max c / (2 pi Theta0)^(1/2).
    double lambda() const {
        return a * rho_max() * sound_speed() / std::sqrt(2.0 * std::numbers::pi * Theta0);
    }
    double rho_floor() const { return rho_floor_fraction * rho_max(); }

    /// Throws DomainError unless every constant is strictly positive.
    void validate() const {
        const auto check = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v))
                throw DomainError(std::string("model parameter ") + name + " must be positive");
        };
        check(m, "m");
        check(a, "a");
        check(eps, "eps");
        check(k_B, "k_B");
        check(Theta0, "Theta0");
        check(cutoff_sigmas, "cutoff_sigmas");
        if (!potential) throw DomainError("model potential is empty");
    }
};

/// Intensive coordinates of an exponential site state.
struct CanonicalSite {
    double xi = 0.0;    ///< fugacity parameter
    double beta = 1.0;  ///< inverse temperature (1/erg)
    Vec3 zeta{};        ///< conjugate to momentum (s/(g cm))
    bool vacuum = false;  ///< N = 0; the canonical chart is undefined there

    static CanonicalSite vacuum_site() {
        CanonicalSite s;
        s.vacuum = true;
        return s;
    }
    friend bool operator==(const CanonicalSite&, const CanonicalSite&) = default;
};

/// Mean values of the slow variables at one site.
struct MixtureSite {
    double N = 0.0;  ///< mean occupation
    double E = 0.0;  ///< mean energy including Phi (erg)
    Vec3 w{};        ///< mean momentum (g cm/s)
    friend bool operator==(const MixtureSite&, const MixtureSite&) = default;
};

/// Both charts of one exponential site state. The mixture part is the
/// defining data; the canonical part is derived from it.
struct ThermalSite {
    CanonicalSite canonical;
    MixtureSite mixture;
};

/// Continuum fields at one point or cell.
struct HydroSite {
    double rho = 0.0;    ///< mass density (g/cm^3)
    double e = 0.0;      ///< energy per unit mass (erg/g)
    Vec3 u{};            ///< velocity (cm/s)
    double Theta = 0.0;  ///< temperature (K)
    double P = 0.0;      ///< pressure (erg/cm^3), rho k_B Theta / m
};

namespace detail {

inline void require_positive_beta(double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw DomainError("beta must be positive and finite, got " + std::to_string(beta));
}

}  // namespace detail

/// log Z_i for one momentum axis.
inline double log_partition_single_axis(double beta, double zeta_i, const ModelParams& p) {
    detail::require_positive_beta(beta);
    return -std::log(p.eps) + 0.5 * std::log(2.0 * p.m * std::numbers::pi / beta) +
           p.m * zeta_i * zeta_i / (2.0 * beta);
}

/// Z_i = eps^-1 (2 m pi / beta)^(1/2) exp(m zeta_i^2 / (2 beta)).
inline double partition_single_axis(double beta, double zeta_i, const ModelParams& p) {
    const double lz = log_partition_single_axis(beta, zeta_i, p);
    if (lz > 700.0) throw OverflowError("single-axis partition function overflows", lz);
    return std::exp(lz);
}

/// log of the occupied-site weight exp(-xi - beta Phi) Z1 Z2 Z3.
inline double log_occupied_weight(double xi, double beta, const Vec3& zeta, double phi_x,
                                  const ModelParams& p) {
    double s = -xi - beta * phi_x;
    for (std::size_t i = 0; i < 3; ++i) s += log_partition_single_axis(beta, zeta[i], p);
    return s;
}

/// log Xi = log(1 + exp(log_occupied_weight)), evaluated without overflow.
inline double log_grand_partition(double xi, double beta, const Vec3& zeta, double phi_x,
                                  const ModelParams& p) {
    const double a = log_occupied_weight(xi, beta, zeta, phi_x, p);
    return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

/// Xi = 1 + exp(-xi - beta Phi) Z1 Z2 Z3.
inline double grand_partition(double xi, double beta, const Vec3& zeta, double phi_x,
                              const ModelParams& p) {
    const double a = log_occupied_weight(xi, beta, zeta, phi_x, p);
    if (a > 700.0) throw OverflowError("grand partition function overflows", a);
    return 1.0 + std::exp(a);
}

/// Legendre map: N = -d logXi/d xi, E = -d logXi/d beta, w = -d logXi/d zeta.
inline MixtureSite canonical_to_mixture(const CanonicalSite& s, double phi_x,
                                        const ModelParams& p) {
    if (s.vacuum) return {};
    const double a = log_occupied_weight(s.xi, s.beta, s.zeta, phi_x, p);
    MixtureSite out;
    out.N = 1.0 / (1.0 + std::exp(-a));
    const double zz = dot(s.zeta, s.zeta);
    out.E = out.N * (phi_x + 1.5 / s.beta + p.m * zz / (2.0 * s.beta * s.beta));
    out.w = s.zeta * (-p.m * out.N / s.beta);
    return out;
}

/// Inverse Legendre map, in closed form. N = 0 gives the vacuum site.
inline CanonicalSite mixture_to_canonical(const MixtureSite& s, double phi_x,
                                          const ModelParams& p) {
    if (!(s.N >= 0.0)) throw DomainError("negative occupation N = " + std::to_string(s.N));
    if (s.N == 0.0) {
        if (s.E != 0.0 || s.w != Vec3{})
            throw UnphysicalStateError("vacuum site carries energy or momentum");
        return CanonicalSite::vacuum_site();
    }
    if (!(s.N < 1.0))
        throw UnphysicalStateError("occupation N = " + std::to_string(s.N) +
                                   " is not below 1");
    const double thermal = s.E - s.N * phi_x - dot(s.w, s.w) / (2.0 * p.m * s.N);
    if (!(thermal > 0.0))
        throw UnphysicalStateError("nonpositive thermal energy " + std::to_string(thermal));
    CanonicalSite c;
    c.beta = 1.5 * s.N / thermal;
    const Vec3 u = s.w / (p.m * s.N);
    c.zeta = u * (-c.beta);
    const double log_x = std::log(s.N) - std::log1p(-s.N);
    double log_z = 0.0;
    for (std::size_t i = 0; i < 3; ++i) log_z += log_partition_single_axis(c.beta, c.zeta[i], p);
    c.xi = -log_x - c.beta * phi_x + log_z;
    return c;
}

/// Both charts from mixture coordinates.
inline ThermalSite thermal_site_from_mixture(const MixtureSite& s, double phi_x,
                                             const ModelParams& p) {
    return ThermalSite{mixture_to_canonical(s, phi_x, p), s};
}

/// Mixture coordinates of the state with occupation N, temperature Theta and
/// velocity u at potential phi_x.
inline MixtureSite mixture_from_fields(double N, double Theta, const Vec3& u, double phi_x,
                                       const ModelParams& p) {
    MixtureSite s;
    s.N = N;
    s.E = N * (phi_x + 1.5 * p.k_B * Theta + 0.5 * p.m * dot(u, u));
    s.w = u * (p.m * N);
    return s;
}

/// Temperature Theta = 1 / (k_B beta).
inline double temperature(const CanonicalSite& c, const ModelParams& p) {
    return 1.0 / (p.k_B * c.beta);
}

/// Site entropy in units of k_B: xi N + beta E + zeta.w + log Xi.
inline double site_entropy_nats(const ThermalSite& s, double phi_x, const ModelParams& p) {
    if (s.canonical.vacuum) return 0.0;
    const auto& c = s.canonical;
    const auto& x = s.mixture;
    return c.xi * x.N + c.beta * x.E + dot(c.zeta, x.w) +
           log_grand_partition(c.xi, c.beta, c.zeta, phi_x, p);
}

/// Sum over sites of the site entropy without the k_B factor.
inline double entropy_nats(std::span<const ThermalSite> sites, std::span<const double> phi,
                           const ModelParams& p) {
    if (sites.size() != phi.size()) throw DomainError("entropy: field sizes differ");
    double s = 0.0;
    for (std::size_t i = 0; i < sites.size(); ++i) s += site_entropy_nats(sites[i], phi[i], p);
    return s;
}

/// Von Neumann entropy S = -k_B sum p log p of a product of exponential states.
inline double entropy(std::span<const ThermalSite> sites, std::span<const double> phi,
                      const ModelParams& p) {
    return p.k_B * entropy_nats(sites, phi, p);
}

struct PressureForms {
    double from_log_xi = 0.0;  ///< a^-3 k_B Theta log Xi
    double ideal = 0.0;        ///< N k_B Theta / a^3
};

/// Both pressure expressions; they agree to first order in N.
inline PressureForms pressure(const MixtureSite& s, double Theta, double Xi,
                              const ModelParams& p) {
    if (!(Xi >= 1.0)) throw DomainError("pressure: Xi must be >= 1");
    const double a3 = p.a * p.a * p.a;
    return {p.k_B * Theta * std::log(Xi) / a3, s.N * p.k_B * Theta / a3};
}

/// Continuum fields with the perfect-gas closure P = rho k_B Theta / m.
/// e carries u.u/2 only when keep_kinetic_in_e is set.
inline HydroSite make_hydro_site(double rho, const Vec3& u, double Theta, double phi_x,
                                 const ModelParams& p) {
    HydroSite h;
    h.rho = rho;
    h.u = u;
    h.Theta = Theta;
    h.e = phi_x / p.m + 1.5 * p.k_B * Theta / p.m;
    if (p.keep_kinetic_in_e) h.e += 0.5 * dot(u, u);
    h.P = rho * p.k_B * Theta / p.m;
    return h;
}

/// Mean free path ell = a round(rho_max / rho), at least a.
inline double mean_free_path(double rho_local, const ModelParams& p) {
    if (!(rho_local > 0.0)) throw DomainError("mean_free_path needs positive density");
    return p.a * std::max(1.0, std::round(p.rho_max() / rho_local));
}

/// Macroscopic fields of a site from its mixture coordinates.
inline HydroSite hydro_from_mixture(const MixtureSite& s, double phi_x, const ModelParams& p) {
    const CanonicalSite c = mixture_to_canonical(s, phi_x, p);
    if (c.vacuum) return {};
    const double a3 = p.a * p.a * p.a;
    return make_hydro_site(p.m * s.N / a3, s.w / (p.m * s.N), temperature(c, p), phi_x, p);
}

}  // namespace kinhydro
