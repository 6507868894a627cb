#pragma once
/// @file checks.hpp
/// @brief Self-contained certification experiments shared by the test suite,
/// the acceptance binary and the CLI. Each returns the measured quantities and
/// a pass flag against the documented tolerance.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "kinhydro/microsim.hpp"
#include "kinhydro/moments.hpp"
#include "kinhydro/pde.hpp"
#include "kinhydro/rng.hpp"
#include "kinhydro/thermo.hpp"

namespace kinhydro::checks {

/// Dimensionless constants (m = a = k_B = Theta0 = 1) with a fine momentum grid.
inline ModelParams unit_params(double eps = 1e-4) {
    ModelParams p;
    p.m = 1.0;
    p.a = 1.0;
    p.eps = eps;
    p.k_B = 1.0;
    p.Theta0 = 1.0;
    return p;
}

// ---------------------------------------------------------------------------
// Truncated moment expansions under zeta halving

struct HalvingReport {
    std::size_t draws = 0;
    double min_ratio_second = 1e300, max_ratio_second = 0.0;  ///< M2: expected 4
    double min_ratio_first = 1e300, max_ratio_first = 0.0;    ///< M0, M1: expected 2
    bool pass = false;
};

/// Residual |closed - exact| at zeta and zeta/2 for random (beta, m, zeta)
/// with |zeta| (m/beta)^(1/2) in [0.005, 0.05].
inline HalvingReport moment_halving(std::size_t draws, std::uint64_t seed) {
    HalvingReport r;
    r.draws = draws;
    CounterRng rng(seed, 0x4A1F);
    for (std::size_t i = 0; i < draws; ++i) {
        const double beta = std::pow(10.0, 2.0 * rng.uniform() - 1.0);
        const double m = std::pow(10.0, 2.0 * rng.uniform() - 1.0);
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        const double zeta = sign * (0.005 + 0.045 * rng.uniform()) * std::sqrt(beta / m);
        for (int n = 0; n < 3; ++n) {
            const auto resid = [&](double z) {
                return std::abs(moment_closed({n, beta, z, m, 0.0}) - moment_exact({n, beta, z, m, 0.0}));
            };
            const double ratio = resid(zeta) / resid(zeta / 2.0);
            if (n == 2) {
                r.min_ratio_second = std::min(r.min_ratio_second, ratio);
                r.max_ratio_second = std::max(r.max_ratio_second, ratio);
            } else {
                r.min_ratio_first = std::min(r.min_ratio_first, ratio);
                r.max_ratio_first = std::max(r.max_ratio_first, ratio);
            }
        }
    }
    r.pass = r.min_ratio_second >= 3.5 && r.max_ratio_second <= 4.5 && r.min_ratio_first >= 1.75 &&
             r.max_ratio_first <= 2.25;
    return r;
}

// ---------------------------------------------------------------------------
// Legendre maps

struct LegendreReport {
    std::size_t states = 0;
    double max_roundtrip = 0.0;  ///< relative, both directions
    double max_fd = 0.0;         ///< finite-difference Legendre check, relative
    bool pass = false;
};

/// Random valid argon states: N in (0.001, 0.99), Theta in (30, 3000) K,
/// |u_i| up to the thermal speed, Phi up to a few k_B Theta.
inline LegendreReport legendre_roundtrip(std::size_t states, std::uint64_t seed) {
    const ModelParams p;
    LegendreReport r;
    r.states = states;
    CounterRng rng(seed, 0x1E6E);
    const auto rel = [](double a, double b, double scale) { return std::abs(a - b) / scale; };
    for (std::size_t i = 0; i < states; ++i) {
        const double N = 0.001 + 0.989 * rng.uniform();
        const double Theta = 30.0 * std::pow(100.0, rng.uniform());
        const double c = std::sqrt(p.k_B * Theta / p.m);
        const Vec3 u{c * (2 * rng.uniform() - 1), c * (2 * rng.uniform() - 1), c * (2 * rng.uniform() - 1)};
        const double phi = 3.0 * p.k_B * Theta * (2 * rng.uniform() - 1);
        const MixtureSite x = mixture_from_fields(N, Theta, u, phi, p);
        const CanonicalSite k = mixture_to_canonical(x, phi, p);
        const MixtureSite x2 = canonical_to_mixture(k, phi, p);
        const CanonicalSite k2 = mixture_to_canonical(x2, phi, p);
        const double wscale = N * p.m * c;
        const double zscale = k.beta * c;
        double e = std::max({rel(x2.N, x.N, x.N), rel(x2.E, x.E, std::abs(x.E) + N * p.k_B * Theta),
                             rel(k2.beta, k.beta, k.beta), rel(k2.xi, k.xi, std::max(1.0, std::abs(k.xi)))});
        for (std::size_t j = 0; j < 3; ++j)
            e = std::max({e, rel(x2.w[j], x.w[j], wscale), rel(k2.zeta[j], k.zeta[j], zscale)});
        r.max_roundtrip = std::max(r.max_roundtrip, e);

        // N = -d logXi/d xi, E = -d logXi/d beta, w = -d logXi/d zeta.
        const auto L = [&](double xi, double beta, const Vec3& z) {
            return log_grand_partition(xi, beta, z, phi, p);
        };
        const double hx = 1e-5, hb = 1e-5 * k.beta, hz = 1e-5 * zscale;
        const double dN = -(L(k.xi + hx, k.beta, k.zeta) - L(k.xi - hx, k.beta, k.zeta)) / (2 * hx);
        const double dE = -(L(k.xi, k.beta + hb, k.zeta) - L(k.xi, k.beta - hb, k.zeta)) / (2 * hb);
        double fd = std::max(rel(dN, x2.N, x2.N), rel(dE, x2.E, std::abs(x2.E) + N * p.k_B * Theta));
        for (std::size_t j = 0; j < 3; ++j) {
            Vec3 zp = k.zeta, zm = k.zeta;
            zp[j] += hz;
            zm[j] -= hz;
            fd = std::max(fd, rel(-(L(k.xi, k.beta, zp) - L(k.xi, k.beta, zm)) / (2 * hz), x2.w[j], wscale));
        }
        r.max_fd = std::max(r.max_fd, fd);
    }
    r.pass = r.max_roundtrip <= 1e-10 && r.max_fd <= 1e-8;
    return r;
}

// ---------------------------------------------------------------------------
// Microscopic rate law

/// Four-site ring around site 1 whose neighbours realise the thresholds:
/// the + neighbour sits kappa_dep^2/2m higher, the - neighbour kappa_arr^2/2m lower.
inline HopField threshold_ring(double kappa_dep, double kappa_arr, const ModelParams& p) {
    HopField f;
    f.phi = {-kappa_arr * kappa_arr / (2 * p.m), 0.0, kappa_dep * kappa_dep / (2 * p.m), 0.0};
    f.ell.assign(4, 1);
    return f;
}

struct RatePair {
    double k = 0.0, kappa = 0.0;
    double expected_p = 0.0;  ///< rate dt
    std::size_t hops = 0;
    double z = 0.0;  ///< (hops - trials p) / binomial sigma; 0 when p = 0 and no hop occurred
    bool pass = false;
};

struct RateLawReport {
    std::size_t trials = 0;
    std::vector<RatePair> pairs;
    bool pass = false;
};

/// Empirical hop frequency of a particle with axis momentum k (thermal units)
/// over `trials` independent copies, against hop_rate dt.
inline RatePair rate_law_pair(double k, double kappa, std::size_t trials, std::uint64_t seed) {
    const ModelParams p = unit_params(1e-6);
    const LatticeShape shape{{4, 1, 1}};
    const HopField f = threshold_ring(kappa, kappa, p);
    StepPolicy pol;
    pol.K = 4.0;
    pol.dt = 0.5 / max_exit_rate(shape, f, pol.K, p);
    RatePair r;
    r.k = k;
    r.kappa = kappa;
    r.expected_p = hop_rate(k, kappa, kappa, p.a, p.m) * pol.dt;
    LatticeConfiguration c{shape, std::vector<Particle>(trials, Particle{1, {k / p.eps, 0.0, 0.0}})};
    r.hops = step_T(c, f, pol, p, seed, 0, 0).hops;
    const double n = static_cast<double>(trials);
    const double sigma = std::sqrt(n * r.expected_p * (1.0 - r.expected_p));
    if (r.expected_p == 0.0) {
        r.pass = r.hops == 0;
    } else {
        r.z = (static_cast<double>(r.hops) - n * r.expected_p) / sigma;
        r.pass = std::abs(r.z) <= 3.0;
    }
    return r;
}

/// Twenty (k, kappa) pairs spanning both branches, the threshold and the
/// forbidden band 0 <= k < kappa.
inline RateLawReport rate_law(std::size_t trials, std::uint64_t seed) {
    RateLawReport r;
    r.trials = trials;
    std::uint64_t stream = seed;
    for (double kappa : {0.0, 0.3, 1.0, 2.0}) {
        const double inside = kappa > 0.0 ? 0.5 * kappa : 0.7;
        const double edge = kappa > 0.0 ? kappa : 0.2;
        for (double k : {-1.5, 0.0, inside, edge, 2.5}) r.pairs.push_back(rate_law_pair(k, kappa, trials, ++stream));
    }
    r.pass = std::all_of(r.pairs.begin(), r.pairs.end(), [](const RatePair& q) { return q.pass; });
    return r;
}

// ---------------------------------------------------------------------------
// Body force from the threshold mismatch

struct BodyForceReport {
    std::size_t members = 0;
    double N_x = 0.0;
    double grad_phi = 0.0, dt = 0.0;
    double tally = 0.0;          ///< ensemble mean of the summed momentum mismatch
    double leading = 0.0;        ///< -N_x dPhi dt
    double band_corrected = 0.0; ///< -N_x dPhi dt (1 - P(0 < k < kappa))
    double sigma = 0.0;          ///< standard error of the ensemble mean
    double z = 0.0;              ///< (tally - leading) / sigma
    bool pass = false;
};

/// Members sample the thermal site state (occupation N_x, beta = 1, at rest) at
/// site 1 of a linear potential ramp and take one T step. The mean momentum
/// mismatch along the ramp is compared with the body force -N_x dPhi dt.
inline BodyForceReport body_force(std::size_t members, std::uint64_t seed, double grad_phi = 1e-4,
                                  double N_x = 0.6) {
    const ModelParams p = unit_params(1e-4);
    const LatticeShape shape{{4, 1, 1}};
    HopField f;
    f.phi = {-grad_phi, 0.0, grad_phi, 0.0};
    f.ell.assign(4, 1);
    StepPolicy pol;
    pol.K = p.cutoff_sigmas * std::sqrt(p.m / 1.0);
    pol.dt = 0.5 / max_exit_rate(shape, f, pol.K, p);
    const ThermalSite site = thermal_site_from_mixture(mixture_from_fields(N_x, 1.0, {}, 0.0, p), 0.0, p);

    BodyForceReport r;
    r.members = members;
    r.N_x = N_x;
    r.grad_phi = grad_phi;
    r.dt = pol.dt;
    std::vector<double> x(members, 0.0);
    parallel_for(members, 1, [&](std::size_t i) {
        CounterRng rng(seed, 0xB0D7, i);
        LatticeConfiguration c{shape, {}};
        if (auto k = sample_site(site, p, rng)) c.particles.push_back({1, *k});
        x[i] = step_T(c, f, pol, p, seed, i, 0).momentum_mismatch[0];
    });
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(members);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(members - 1);
    const double kappa = std::sqrt(2.0 * p.m * grad_phi);
    const double band = 0.5 * std::erf(kappa / std::sqrt(2.0));  // P(0 < k < kappa), unit thermal width
    r.tally = mean;
    r.leading = -N_x * grad_phi * pol.dt;
    r.band_corrected = r.leading * (1.0 - band);
    r.sigma = std::sqrt(var / static_cast<double>(members));
    r.z = (r.tally - r.leading) / r.sigma;
    r.pass = std::abs(r.z) <= 3.0;
    return r;
}

// ---------------------------------------------------------------------------
// Thermalising projection

/// One axis of a non-exponential momentum law sampled on the eps grid.
struct AxisLaw {
    std::vector<double> pmf;
    double offset = 0.0;  ///< momentum of pmf[0]
    double mean = 0.0, second = 0.0, entropy = 0.0;
};

inline AxisLaw random_axis_law(CounterRng& rng, const ModelParams& p) {
    const double sd = 0.5 + rng.uniform();
    const double centre = 0.5 * (2 * rng.uniform() - 1);
    const int kind = static_cast<int>(rng.below(3));
    const double sep = (1.0 + 2.0 * rng.uniform()) * sd, frac = 0.2 + 0.6 * rng.uniform();
    const double half = (1.0 + rng.uniform()) * sd;
    const auto density = [&](double k) {
        const double y = k - centre;
        switch (kind) {
            case 0:  // two-component Gaussian mixture
                return frac * std::exp(-0.5 * std::pow((y - sep) / sd, 2)) +
                       (1 - frac) * std::exp(-0.5 * std::pow((y + sep) / sd, 2));
            case 1:  // uniform slab
                return std::abs(y) <= half ? 1.0 : 0.0;
            default:  // Laplace
                return std::exp(-std::abs(y) / sd);
        }
    };
    AxisLaw a;
    const double span = 25.0 * sd + sep;
    const long lo = static_cast<long>(std::floor((centre - span) / p.eps));
    const long hi = static_cast<long>(std::ceil((centre + span) / p.eps));
    a.offset = static_cast<double>(lo) * p.eps;
    a.pmf.resize(static_cast<std::size_t>(hi - lo + 1));
    double total = 0.0;
    for (std::size_t j = 0; j < a.pmf.size(); ++j) total += a.pmf[j] = density(a.offset + static_cast<double>(j) * p.eps);
    for (std::size_t j = 0; j < a.pmf.size(); ++j) {
        const double q = a.pmf[j] /= total;
        const double k = a.offset + static_cast<double>(j) * p.eps;
        a.mean += q * k;
        a.second += q * k * k;
        if (q > 0.0) a.entropy -= q * std::log(q);
    }
    return a;
}

struct QReport {
    std::size_t inputs = 0;
    double max_moment_error = 0.0;  ///< relative, Q output vs input moments
    bool idempotent = false;        ///< Q(Q(x)) bit-identical to Q(x)
    double min_entropy_gain = 1e300;
    std::size_t flagged = 0;
    bool pass = false;
};

/// Non-exponential product site laws (hole or occupied with independent
/// axis laws) on a fine eps grid. Their exact Shannon entropy is compared with
/// that of the exponential state Q returns for the same moments.
inline QReport q_projection(std::size_t inputs, std::uint64_t seed) {
    const ModelParams p = unit_params(0.01);
    QReport r;
    r.inputs = inputs;
    CounterRng rng(seed, 0x0770);
    std::vector<MixtureSite> means(inputs);
    std::vector<double> phi(inputs), s_in(inputs);
    for (std::size_t i = 0; i < inputs; ++i) {
        const double N = 0.05 + 0.9 * rng.uniform();
        phi[i] = 2 * rng.uniform() - 1;
        double kinetic = 0.0, H = 0.0;
        Vec3 w{};
        for (std::size_t j = 0; j < 3; ++j) {
            const AxisLaw a = random_axis_law(rng, p);
            kinetic += a.second / (2 * p.m);
            w[j] = N * a.mean;
            H += a.entropy;
        }
        means[i] = {N, N * (kinetic + phi[i]), w};
        s_in[i] = -(1 - N) * std::log(1 - N) - N * std::log(N) + N * H;
    }
    const ThermalizeResult q = thermalize_Q(std::span<const MixtureSite>(means), phi, p);
    const ThermalizeResult qq = thermalize_Q(std::span<const ThermalSite>(q.sites), phi, p);
    r.flagged = q.flagged.size();
    r.idempotent = qq.flagged == q.flagged;
    for (std::size_t i = 0; i < inputs; ++i) {
        const auto& a = q.sites[i];
        const auto& b = qq.sites[i];
        r.idempotent = r.idempotent && a.canonical == b.canonical && a.mixture == b.mixture;
        const MixtureSite back = canonical_to_mixture(a.canonical, phi[i], p);
        const double scale = means[i].N * std::sqrt(p.m / a.canonical.beta);
        double e = std::max(std::abs(back.N - means[i].N) / means[i].N,
                            std::abs(back.E - means[i].E) / (std::abs(means[i].E) + means[i].N));
        for (std::size_t j = 0; j < 3; ++j) e = std::max(e, std::abs(back.w[j] - means[i].w[j]) / scale);
        r.max_moment_error = std::max(r.max_moment_error, e);
        r.min_entropy_gain = std::min(r.min_entropy_gain, site_entropy_nats(a, phi[i], p) - s_in[i]);
    }
    r.pass = r.flagged == 0 && r.max_moment_error <= 1e-10 && r.idempotent && r.min_entropy_gain >= 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// Continuum solver

/// Argon on a periodic line of `cells` cells of 10 a, under a static
/// sinusoidal potential of amplitude `amp` k_B Theta0.
inline ModelParams periodic_argon(double length, double amp) {
    ModelParams p;
    const double A = amp * p.k_B * p.Theta0;
    p.potential = [A, length](const Vec3& x, double) {
        return A * std::sin(2.0 * std::numbers::pi * x[0] / length);
    };
    return p;
}

struct ConservationReport {
    std::size_t cells = 0, steps = 0;
    double mass_drift = 0.0;      ///< |M(T) - M(0)| / M(0)
    double energy_drift = 0.0;    ///< |E(T) - E(0)| / |E(0)|
    double momentum_residual = 0.0;  ///< |dP - sum impulse| / sum |impulse|
    bool pass = false;
};

inline ConservationReport pde_conservation(std::size_t cells, std::size_t steps, unsigned threads = 1) {
    Grid g;
    g.n = {cells, 1, 1};
    const ModelParams base;
    g.h = 10.0 * base.a;
    const double L = g.h * static_cast<double>(cells);
    const ModelParams p = periodic_argon(L, 0.2);
    const double rho0 = 0.3 * p.rho_max(), c = p.sound_speed();
    const double tau = 2.0 * std::numbers::pi / L;
    HydroState s = make_state(
        g, p,
        [&](const Vec3& x) { return rho0 * (1.0 + 0.1 * std::exp(-std::pow((x[0] - 0.5 * L) / (0.1 * L), 2))); },
        [&](const Vec3& x) { return Vec3{0.05 * c * std::sin(tau * x[0]), 0.0, 0.0}; },
        [&](const Vec3& x) { return p.Theta0 * (1.0 + 0.05 * std::cos(tau * x[0])); });
    SolverConfig cfg;
    cfg.threads = threads;
    const ConservedTotals t0 = totals(s);
    Vec3 impulse{};
    double gross = 0.0;
    for (std::size_t i = 0; i < steps; ++i) {
        const StepReport rep = step(s, p, cfg);
        impulse += rep.impulse;
        gross += norm(rep.impulse);
    }
    const ConservedTotals t1 = totals(s);
    ConservationReport r;
    r.cells = cells;
    r.steps = steps;
    r.mass_drift = std::abs(t1.mass - t0.mass) / t0.mass;
    r.energy_drift = std::abs(t1.energy - t0.energy) / std::abs(t0.energy);
    r.momentum_residual = norm(t1.momentum - t0.momentum - impulse) / gross;
    r.pass = r.mass_drift <= 1e-12 && r.energy_drift <= 1e-12 && r.momentum_residual <= 1e-10;
    return r;
}

struct BarometricReport {
    std::vector<std::size_t> cells;
    std::vector<double> residual;  ///< RMS of d rho/dt over the grid, scaled by rho0 lambda / (rho0 L^2)
    std::vector<double> momentum_residual;
    double order = 0.0, momentum_order = 0.0;
    bool pass = false;
};

/// Least-squares slope of log y against log x.
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Stationary residual of rho* = rho0 exp(-Phi / (k_B Theta)), u = 0, uniform
/// Theta, on a periodic line refined from `coarse` cells by three doublings.
inline BarometricReport barometric_order(std::size_t coarse = 32, double amp = 0.5) {
    BarometricReport r;
    const ModelParams base;
    const double L = 64.0 * 10.0 * base.a;
    const ModelParams p = periodic_argon(L, amp);
    const double rho0 = 0.3 * p.rho_max();
    std::vector<double> hs;
    for (std::size_t n = coarse; n <= coarse * 8; n *= 2) {
        Grid g;
        g.n = {n, 1, 1};
        g.h = L / static_cast<double>(n);
        const HydroState s = make_state(
            g, p, [&](const Vec3& x) { return rho0 * std::exp(-p.potential(x, 0.0) / (p.k_B * p.Theta0)); },
            [](const Vec3&) { return Vec3{}; }, [&](const Vec3&) { return p.Theta0; });
        const Derivative d = rhs(s, p, SolverConfig{}, 0.0);
        double mass = 0.0, mom = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            mass += d.rho[c] * d.rho[c];
            mom += d.mom[0][c] * d.mom[0][c];
        }
        r.cells.push_back(n);
        hs.push_back(g.h);
        r.residual.push_back(std::sqrt(mass / static_cast<double>(n)) * L * L / p.lambda());
        r.momentum_residual.push_back(std::sqrt(mom / static_cast<double>(n)) * L / (rho0 * p.k_B * p.Theta0 / p.m));
    }
    r.order = loglog_slope(hs, r.residual);
    r.momentum_order = loglog_slope(hs, r.momentum_residual);
    r.pass = std::abs(r.order - 2.0) <= 0.2 && std::abs(r.momentum_order - 2.0) <= 0.2;
    return r;
}

}  // namespace kinhydro::checks
