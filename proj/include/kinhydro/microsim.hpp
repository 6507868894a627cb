#pragma once
/// @file microsim.hpp
/// @brief Stochastic lattice dynamics: configurations, field-dependent hop
/// rates with energy thresholds, the synchronous Markov step T, an exact
/// event-driven oracle, the thermalising projection Q and coarse-graining.
///
/// A particle at x with momentum component k along axis i hops one mean free
/// path ell toward +e_i if k > 0 and toward -e_i if k <= 0. Its momentum change
/// is entirely along e_i and conserves energy: k'^2 = k^2 - 2m (Phi(x') - Phi(x)).
/// Up-potential hops need |k| >= kappa = (2 m dPhi)^(1/2). The rate is the mean
/// of the departure and arrival rates, (|k| + |k'|) / (2 m ell).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kinhydro/errors.hpp"
#include "kinhydro/parallel.hpp"
#include "kinhydro/rng.hpp"
#include "kinhydro/thermo.hpp"
#include "kinhydro/vec3.hpp"

namespace kinhydro {

// ---------------------------------------------------------------------------
// Geometry and configurations

/// Periodic box of sites; axes with extent 1 are inactive (no hops along them).
struct LatticeShape {
    std::array<std::size_t, 3> extent{1, 1, 1};

    std::size_t sites() const { return extent[0] * extent[1] * extent[2]; }
    bool active(std::size_t axis) const { return extent[axis] > 1; }

    std::size_t index(const std::array<std::size_t, 3>& c) const {
        return c[0] + extent[0] * (c[1] + extent[1] * c[2]);
    }
    std::array<std::size_t, 3> coords(std::size_t s) const {
        return {s % extent[0], (s / extent[0]) % extent[1], s / (extent[0] * extent[1])};
    }
    /// Site reached by moving `offset` sites along `axis`, with wrap-around.
    std::size_t shift(std::size_t s, std::size_t axis, long offset) const {
        auto c = coords(s);
        const long n = static_cast<long>(extent[axis]);
        long v = (static_cast<long>(c[axis]) + offset) % n;
        if (v < 0) v += n;
        c[axis] = static_cast<std::size_t>(v);
        return index(c);
    }
    /// Physical position (cm) of a site.
    Vec3 position(std::size_t s, double a) const {
        const auto c = coords(s);
        return {static_cast<double>(c[0]) * a, static_cast<double>(c[1]) * a,
                static_cast<double>(c[2]) * a};
    }
};

/// One molecule. Momentum is stored in units of eps.
struct Particle {
    std::size_t site = 0;
    Vec3 k{};
    friend bool operator==(const Particle&, const Particle&) = default;
};

/// Microstate of one ensemble member: the occupied sites and their momenta.
/// Particles are kept sorted by site. Without exclusion a site may transiently
/// hold several particles.
struct LatticeConfiguration {
    LatticeShape shape;
    std::vector<Particle> particles;

    void sort() {
        std::stable_sort(particles.begin(), particles.end(),
                         [](const Particle& a, const Particle& b) { return a.site < b.site; });
    }
    std::vector<std::uint32_t> occupancy() const {
        std::vector<std::uint32_t> occ(shape.sites(), 0);
        for (const auto& p : particles) ++occ[p.site];
        return occ;
    }
    friend bool operator==(const LatticeConfiguration& a, const LatticeConfiguration& b) {
        return a.shape.extent == b.shape.extent && a.particles == b.particles;
    }
};

/// Total occupation, energy (kinetic plus Phi) and momentum of a configuration.
struct ShellTotals {
    double N = 0.0;
    double E = 0.0;
    Vec3 w{};
};

inline ShellTotals shell_totals(const LatticeConfiguration& c, std::span<const double> phi,
                                const ModelParams& p) {
    ShellTotals t;
    for (const auto& q : c.particles) {
        const Vec3 k = q.k * p.eps;
        t.N += 1.0;
        t.E += dot(k, k) / (2.0 * p.m) + phi[q.site];
        t.w += k;
    }
    return t;
}

// ---------------------------------------------------------------------------
// Rates

/// Hop rate: backward branch for k <= 0, forward branch for k >= kappa_dep, 0 in between.
inline double hop_rate(double k, double kappa_dep, double kappa_arr, double ell, double m) {
    if (k <= 0.0) return (-k + std::sqrt(k * k + kappa_arr * kappa_arr)) / (2.0 * m * ell);
    if (k < kappa_dep) return 0.0;
    return (k + std::sqrt(k * k - kappa_dep * kappa_dep)) / (2.0 * m * ell);
}

struct HopKinematics {
    double rate = 0.0;     ///< 1/s; zero when the hop is energetically forbidden
    double k_after = 0.0;  ///< arrival momentum component along the hop axis
};

/// Hop of a particle with axis momentum k over a potential step
/// delta_phi = Phi(target) - Phi(source). Direction follows the sign of k.
inline HopKinematics hop_kinematics(double k, double delta_phi, double ell, double m) {
    const double after2 = k * k - 2.0 * m * delta_phi;
    if (after2 < 0.0) return {};
    const double speed_after = std::sqrt(after2);
    return {(std::abs(k) + speed_after) / (2.0 * m * ell), k > 0.0 ? speed_after : -speed_after};
}

/// Per-site lookup data for the step: potential and hop length in sites.
struct HopField {
    std::vector<double> phi;  ///< Phi at each site (erg)
    std::vector<long> ell;    ///< hop length in lattice spacings, >= 1
};

/// Potential sampled at the sites of a shape at time t.
inline std::vector<double> sample_potential(const LatticeShape& shape, const ModelParams& p,
                                            double t) {
    std::vector<double> phi(shape.sites());
    for (std::size_t s = 0; s < phi.size(); ++s) phi[s] = p.potential(shape.position(s, p.a), t);
    return phi;
}

/// Hop lengths from mean occupations: ell/a = round(1/N), capped at `cap`.
inline std::vector<long> hop_lengths(std::span<const double> N, long cap) {
    std::vector<long> ell(N.size());
    for (std::size_t s = 0; s < N.size(); ++s) {
        const double r = N[s] > 0.0 ? std::round(1.0 / N[s]) : static_cast<double>(cap);
        ell[s] = std::clamp(static_cast<long>(std::min(r, 1e9)), 1L, std::max(1L, cap));
    }
    return ell;
}

struct StepPolicy {
    double dt = 0.0;         ///< s
    double K = 0.0;          ///< momentum cutoff (g cm/s); no hop along an axis with |k_i| > K
    bool exclusion = false;  ///< require an empty target
};

/// Cutoff K = cutoff_sigmas (m k_B Theta_max)^(1/2).
inline double momentum_cutoff(double Theta_max, const ModelParams& p) {
    return p.cutoff_sigmas * std::sqrt(p.m * p.k_B * Theta_max);
}

/// Upper bound on the total exit rate of a particle at site s with |k_i| <= K.
inline double site_exit_rate_bound(const LatticeShape& shape, const HopField& f, std::size_t s,
                                   double K, const ModelParams& p) {
    double total = 0.0;
    for (std::size_t axis = 0; axis < 3; ++axis) {
        if (!shape.active(axis)) continue;
        const double ell = static_cast<double>(f.ell[s]) * p.a;
        double worst = 0.0;
        for (long dir : {-1L, 1L}) {
            const std::size_t t = shape.shift(s, axis, dir * f.ell[s]);
            const double drop = std::max(0.0, f.phi[s] - f.phi[t]);
            worst = std::max(worst, (K + std::sqrt(K * K + 2.0 * p.m * drop)) / (2.0 * p.m * ell));
        }
        total += worst;
    }
    return total;
}

inline double max_exit_rate(const LatticeShape& shape, const HopField& f, double K,
                            const ModelParams& p) {
    double r = 0.0;
    for (std::size_t s = 0; s < shape.sites(); ++s)
        r = std::max(r, site_exit_rate_bound(shape, f, s, K, p));
    return r;
}

/// dt = 0.5 / (max exit rate at K).
inline StepPolicy default_policy(const LatticeShape& shape, const HopField& f, double Theta_max,
                                 const ModelParams& p, bool exclusion = false) {
    StepPolicy pol;
    pol.K = momentum_cutoff(Theta_max, p);
    pol.exclusion = exclusion;
    const double r = max_exit_rate(shape, f, pol.K, p);
    if (!(r > 0.0)) throw DomainError("no active axis: exit rate is zero");
    pol.dt = 0.5 / r;
    return pol;
}

inline void check_policy(const LatticeShape& shape, const HopField& f, const StepPolicy& pol,
                         const ModelParams& p) {
    if (f.phi.size() != shape.sites() || f.ell.size() != shape.sites())
        throw DomainError("hop field does not match the lattice");
    if (!(pol.dt > 0.0) || !(pol.K > 0.0)) throw StepSizeError("step policy needs dt > 0 and K > 0");
    const double r = max_exit_rate(shape, f, pol.K, p);
    if (!(pol.dt * r < 1.0))
        throw StepSizeError("dt * max exit rate = " + std::to_string(pol.dt * r) +
                            " violates sub-stochasticity");
}

struct HopProposal {
    std::size_t site = 0;
    std::size_t axis = 0;
    int direction = 0;  ///< +1 or -1
    std::size_t target = 0;
    double k = 0.0;        ///< outgoing component (g cm/s)
    double k_after = 0.0;  ///< arrival component (g cm/s)
    double rate = 0.0;     ///< 1/s
};

/// All hops available to particle q, one per active axis, with their rates.
/// Axes with |k_i| > K or a forbidden threshold get rate zero.
inline std::array<HopProposal, 3> hop_options(const Particle& q, const LatticeShape& shape,
                                              const HopField& f, double K, const ModelParams& p) {
    std::array<HopProposal, 3> out{};
    for (std::size_t axis = 0; axis < 3; ++axis) {
        HopProposal& h = out[axis];
        h.site = q.site;
        h.axis = axis;
        if (!shape.active(axis)) continue;
        const double k = q.k[axis] * p.eps;
        if (std::abs(k) > K) continue;
        h.direction = k > 0.0 ? 1 : -1;
        h.k = k;
        h.target = shape.shift(q.site, axis, h.direction * f.ell[q.site]);
        const auto kin = hop_kinematics(k, f.phi[h.target] - f.phi[q.site],
                                        static_cast<double>(f.ell[q.site]) * p.a, p.m);
        h.rate = kin.rate;
        h.k_after = kin.k_after;
    }
    return out;
}

struct StepTally {
    std::size_t hops = 0;
    std::size_t blocked = 0;  ///< proposals refused by exclusion
    std::size_t clamped = 0;  ///< arrivals with |k'| > K, clamped to K
    Vec3 momentum_mismatch{};  ///< sum of (k' - k) over executed hops (g cm/s)

    StepTally& operator+=(const StepTally& o) {
        hops += o.hops;
        blocked += o.blocked;
        clamped += o.clamped;
        momentum_mismatch += o.momentum_mismatch;
        return *this;
    }
};

namespace detail {

inline void execute_hop(Particle& q, const HopProposal& h, double K, const ModelParams& p,
                        StepTally& tally) {
    double k_after = h.k_after;
    if (std::abs(k_after) > K) {
        k_after = std::copysign(K, k_after);
        ++tally.clamped;
    }
    tally.momentum_mismatch[h.axis] += k_after - h.k;
    // A level hop keeps the stored component bit-for-bit.
    if (k_after != h.k) q.k[h.axis] = k_after / p.eps;
    q.site = h.target;
    ++tally.hops;
}

}  // namespace detail

namespace detail {

/// step_T without the policy check; callers have checked it once per step.
inline StepTally step_T_checked(LatticeConfiguration& config, const HopField& f,
                                const StepPolicy& pol, const ModelParams& p, std::uint64_t seed,
                                std::uint64_t stream, std::uint64_t step) {
    StepTally tally;
    std::vector<std::uint32_t> occ;
    std::vector<std::uint8_t> claimed;
    if (pol.exclusion) {
        occ = config.occupancy();
        claimed.assign(occ.size(), 0);
    }
    std::size_t slot = 0, previous_site = 0;
    for (std::size_t i = 0; i < config.particles.size(); ++i) {
        Particle& q = config.particles[i];
        // Slots count particles sharing a start-of-step site.
        slot = (i > 0 && previous_site == q.site) ? slot + 1 : 0;
        previous_site = q.site;
        CounterRng rng(seed, stream, step, q.site, slot);
        const double u = rng.uniform();
        const auto options = hop_options(q, config.shape, f, pol.K, p);
        double acc = 0.0;
        for (const auto& h : options) {
            if (h.rate <= 0.0) continue;
            acc += h.rate * pol.dt;
            if (u >= acc) continue;
            if (pol.exclusion) {
                if (occ[h.target] > 0 || claimed[h.target]) {
                    ++tally.blocked;
                    break;
                }
                claimed[h.target] = 1;
            }
            execute_hop(q, h, pol.K, p, tally);
            break;
        }
    }
    config.sort();
    return tally;
}

}  // namespace detail

/// One synchronous tau-leap step. Each particle draws one uniform and hops
/// along axis i with probability rate_i dt. With exclusion, a hop needs a target
/// empty at the start of the step and not already claimed (first proposal wins).
/// `stream` distinguishes ensemble members; `step` is the step counter.
inline StepTally step_T(LatticeConfiguration& config, const HopField& f, const StepPolicy& pol,
                        const ModelParams& p, std::uint64_t seed, std::uint64_t stream,
                        std::uint64_t step) {
    check_policy(config.shape, f, pol, p);
    return detail::step_T_checked(config, f, pol, p, seed, stream, step);
}

struct GillespieResult {
    double time = 0.0;
    StepTally tally;
};

/// Exact event-driven evolution up to t_end with the same rates and cutoff.
/// Intended as an oracle for small lattices.
inline GillespieResult gillespie_run(LatticeConfiguration& config, const HopField& f, double K,
                                     double t_end, const ModelParams& p, std::uint64_t seed,
                                     bool exclusion = false) {
    GillespieResult res;
    CounterRng rng(seed, 0x6A11E5F1Eull);
    auto occ = config.occupancy();
    std::vector<std::array<HopProposal, 3>> options(config.particles.size());
    for (std::size_t i = 0; i < options.size(); ++i)
        options[i] = hop_options(config.particles[i], config.shape, f, K, p);
    while (true) {
        double total = 0.0;
        for (const auto& o : options)
            for (const auto& h : o) total += h.rate;
        if (!(total > 0.0)) break;
        const double wait = -std::log(1.0 - rng.uniform()) / total;
        if (res.time + wait > t_end) break;
        res.time += wait;
        double pick = rng.uniform() * total;
        std::size_t pi = 0, ax = 0;
        bool found = false;
        for (pi = 0; pi < options.size() && !found; ++pi)
            for (ax = 0; ax < 3; ++ax) {
                pick -= options[pi][ax].rate;
                if (pick < 0.0 && options[pi][ax].rate > 0.0) {
                    found = true;
                    break;
                }
            }
        if (!found) continue;  // round-off at the upper end of the cumulative sum
        --pi;
        const HopProposal h = options[pi][ax];
        if (exclusion && occ[h.target] > 0) {
            ++res.tally.blocked;
            continue;
        }
        --occ[h.site];
        ++occ[h.target];
        detail::execute_hop(config.particles[pi], h, K, p, res.tally);
        options[pi] = hop_options(config.particles[pi], config.shape, f, K, p);
    }
    res.time = t_end;
    config.sort();
    return res;
}

// ---------------------------------------------------------------------------
// Ensemble statistics and the thermalising projection

/// Ensemble sums at one site (physical units).
struct SiteTally {
    std::size_t count = 0;
    Vec3 momentum{};
    double kinetic = 0.0;  ///< sum of k.k / 2m
};

/// Per-site sums over every member, accumulated in member order.
inline std::vector<SiteTally> tally_sites(std::span<const LatticeConfiguration> members,
                                          const ModelParams& p) {
    if (members.empty()) throw DomainError("tally_sites needs at least one member");
    std::vector<SiteTally> t(members.front().shape.sites());
    for (const auto& c : members)
        for (const auto& q : c.particles) {
            const Vec3 k = q.k * p.eps;
            auto& s = t[q.site];
            ++s.count;
            s.momentum += k;
            s.kinetic += dot(k, k) / (2.0 * p.m);
        }
    return t;
}

/// Empirical means (N, E, w) of one site from ensemble sums.
inline MixtureSite mixture_from_tally(const SiteTally& t, std::size_t members, double phi_x) {
    const double n = static_cast<double>(members);
    MixtureSite s;
    s.N = static_cast<double>(t.count) / n;
    s.E = (t.kinetic + static_cast<double>(t.count) * phi_x) / n;
    s.w = t.momentum / n;
    return s;
}

inline std::vector<MixtureSite> ensemble_means(std::span<const LatticeConfiguration> members,
                                               std::span<const double> phi, const ModelParams& p) {
    const auto t = tally_sites(members, p);
    std::vector<MixtureSite> out(t.size());
    for (std::size_t s = 0; s < t.size(); ++s) out[s] = mixture_from_tally(t[s], members.size(), phi[s]);
    return out;
}

struct ThermalizeResult {
    std::vector<ThermalSite> sites;
    std::vector<std::size_t> flagged;  ///< sites whose moments no exponential state matches
};

/// Q: the exponential site state with the same (N, E, w) at every site.
/// Flagged sites keep their input moments and a vacuum canonical chart.
inline ThermalizeResult thermalize_Q(std::span<const MixtureSite> means,
                                     std::span<const double> phi, const ModelParams& p) {
    if (means.size() != phi.size()) throw DomainError("thermalize_Q: field sizes differ");
    ThermalizeResult r;
    r.sites.resize(means.size());
    for (std::size_t s = 0; s < means.size(); ++s) {
        try {
            r.sites[s] = thermal_site_from_mixture(means[s], phi[s], p);
        } catch (const UnphysicalStateError&) {
            r.sites[s] = ThermalSite{CanonicalSite::vacuum_site(), means[s]};
            r.flagged.push_back(s);
        } catch (const DomainError&) {
            r.sites[s] = ThermalSite{CanonicalSite::vacuum_site(), means[s]};
            r.flagged.push_back(s);
        }
    }
    return r;
}

/// Q applied to states that are already exponential. The mixture part is the
/// defining data, so this is exactly the identity on valid sites.
inline ThermalizeResult thermalize_Q(std::span<const ThermalSite> states,
                                     std::span<const double> phi, const ModelParams& p) {
    std::vector<MixtureSite> means(states.size());
    for (std::size_t s = 0; s < states.size(); ++s) means[s] = states[s].mixture;
    return thermalize_Q(std::span<const MixtureSite>(means), phi, p);
}

/// One draw from an exponential site state: hole with probability 1 - N,
/// otherwise a Gaussian momentum with mean w/N and variance m/beta per axis,
/// rounded to the eps grid (returned in units of eps).
inline std::optional<Vec3> sample_site(const ThermalSite& s, const ModelParams& p,
                                       CounterRng& rng) {
    if (s.canonical.vacuum || rng.uniform() >= s.mixture.N) return std::nullopt;
    const double sd = std::sqrt(p.m / s.canonical.beta);
    const Vec3 mean = s.mixture.w / s.mixture.N;
    Vec3 k;
    for (std::size_t i = 0; i < 3; ++i) k[i] = std::round((mean[i] + sd * rng.normal()) / p.eps);
    return k;
}

/// Target for one site of a resample: exact count and momentum/kinetic sums.
struct SiteTarget {
    std::size_t count = 0;
    Vec3 momentum{};
    double kinetic = 0.0;
};

/// Target sums for `members` copies of an exponential state, count rounded.
inline SiteTarget target_from_state(const MixtureSite& s, double phi_x, std::size_t members) {
    SiteTarget t;
    const double c = std::round(s.N * static_cast<double>(members));
    t.count = static_cast<std::size_t>(c);
    if (t.count == 0 || s.N <= 0.0) return {};
    t.momentum = s.w * (c / s.N);
    t.kinetic = c * (s.E / s.N - phi_x);
    return t;
}

/// Moment-matched sampling of one site across the ensemble. Chooses which
/// members hold the `count` particles, draws Gaussian momenta and shifts and
/// rescales them so their sum and kinetic sum equal the target, then rounds
/// to the eps grid. Returns (member, momentum in eps units) pairs in member order.
inline std::vector<std::pair<std::size_t, Vec3>> resample_site(const SiteTarget& t,
                                                               std::size_t members,
                                                               const ModelParams& p,
                                                               CounterRng& rng) {
    std::vector<std::pair<std::size_t, Vec3>> out;
    if (t.count == 0) return out;
    const std::size_t base = t.count / members, extra = t.count % members;
    // Floyd's algorithm picks `extra` distinct members uniformly.
    std::vector<std::uint8_t> bonus(members, 0);
    for (std::size_t j = members - extra; j < members; ++j) {
        const std::size_t r = rng.below(j + 1);
        bonus[bonus[r] ? j : r] = 1;
    }
    out.reserve(t.count);
    for (std::size_t mbr = 0; mbr < members; ++mbr)
        for (std::size_t j = 0; j < base + bonus[mbr]; ++j) out.emplace_back(mbr, Vec3{});

    const double c = static_cast<double>(t.count);
    const Vec3 mean = t.momentum / c;
    const double thermal = t.kinetic - dot(t.momentum, t.momentum) / (2.0 * p.m * c);
    Vec3 gbar{};
    for (auto& e : out) {
        for (std::size_t i = 0; i < 3; ++i) e.second[i] = rng.normal();
        gbar += e.second;
    }
    gbar = gbar / c;
    double scatter = 0.0;
    for (auto& e : out) {
        e.second -= gbar;
        scatter += dot(e.second, e.second);
    }
    const double alpha =
        (t.count > 1 && thermal > 0.0 && scatter > 0.0) ? std::sqrt(2.0 * p.m * thermal / scatter) : 0.0;
    for (auto& e : out) {
        const Vec3 k = mean + e.second * alpha;
        for (std::size_t i = 0; i < 3; ++i) e.second[i] = std::round(k[i] / p.eps);
    }
    return out;
}

/// Rebuilds every member from per-site targets (one resample stream per site).
inline void resample_ensemble(std::vector<LatticeConfiguration>& members,
                              std::span<const SiteTarget> targets, const ModelParams& p,
                              std::uint64_t seed, std::uint64_t step, unsigned threads = 1) {
    const std::size_t E = members.size();
    std::vector<std::vector<std::pair<std::size_t, Vec3>>> per_site(targets.size());
    parallel_for(targets.size(), threads, [&](std::size_t s) {
        CounterRng rng(seed, 0x5A3F1E00ull, step, s);
        per_site[s] = resample_site(targets[s], E, p, rng);
    });
    for (auto& m : members) m.particles.clear();
    for (std::size_t s = 0; s < per_site.size(); ++s)
        for (const auto& [mbr, k] : per_site[s]) members[mbr].particles.push_back({s, k});
}

// ---------------------------------------------------------------------------
// Coarse-graining

/// Cell-averaged fields from an ensemble. Cells are blocks of `cell` sites
/// along each active axis; a cell without particles gives std::nullopt.
inline std::vector<std::optional<HydroSite>> coarse_grain(
    std::span<const LatticeConfiguration> members, std::size_t cell, std::span<const double> phi,
    const ModelParams& p) {
    if (members.empty()) throw DomainError("coarse_grain needs at least one member");
    if (cell == 0) throw DomainError("coarse_grain: cell size must be positive");
    const LatticeShape& shape = members.front().shape;
    std::array<std::size_t, 3> cells{1, 1, 1};
    std::size_t per_cell = 1;
    for (std::size_t ax = 0; ax < 3; ++ax) {
        if (!shape.active(ax)) continue;
        if (shape.extent[ax] % cell != 0)
            throw DomainError("coarse_grain: extent not divisible by the cell size");
        cells[ax] = shape.extent[ax] / cell;
        per_cell *= cell;
    }
    const std::size_t ncell = cells[0] * cells[1] * cells[2];
    const auto cell_of = [&](std::size_t s) {
        auto c = shape.coords(s);
        for (std::size_t ax = 0; ax < 3; ++ax)
            if (shape.active(ax)) c[ax] /= cell;
        return c[0] + cells[0] * (c[1] + cells[1] * c[2]);
    };
    std::vector<std::size_t> count(ncell, 0);
    std::vector<Vec3> mom(ncell);
    std::vector<double> pot(ncell, 0.0);
    for (const auto& m : members)
        for (const auto& q : m.particles) {
            const std::size_t c = cell_of(q.site);
            ++count[c];
            mom[c] += q.k * p.eps;
            pot[c] += phi[q.site];
        }
    // Second pass: thermal energy about the cell mean velocity.
    std::vector<double> thermal(ncell, 0.0);
    for (const auto& m : members)
        for (const auto& q : m.particles) {
            const std::size_t c = cell_of(q.site);
            const Vec3 d = q.k * p.eps - mom[c] / static_cast<double>(count[c]);
            thermal[c] += dot(d, d) / (2.0 * p.m);
        }
    const double a3 = p.a * p.a * p.a;
    const double samples = static_cast<double>(members.size() * per_cell);
    std::vector<std::optional<HydroSite>> out(ncell);
    for (std::size_t c = 0; c < ncell; ++c) {
        if (count[c] == 0) continue;
        const double n = static_cast<double>(count[c]);
        const double Theta = 2.0 * thermal[c] / (3.0 * p.k_B * n);
        out[c] = make_hydro_site(p.m * n / (samples * a3), mom[c] / (p.m * n), Theta,
                                 pot[c] / n, p);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ensemble driver: T on every member, then Q through moment-matched resampling

struct EnsembleOptions {
    std::size_t members = 1000;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    bool exclusion = false;
    bool thermalize = true;           ///< apply Q after each T step
    std::optional<double> dt;         ///< default: 0.5 / max exit rate with ell = a
    bool adaptive_dt = false;         ///< without dt: 0.5 / max exit rate of the current field, every step
    std::optional<double> Theta_max;  ///< default: hottest initial site
};

struct EnsembleLedger {
    ShellTotals initial;
    ShellTotals current;
    StepTally hops;                ///< cumulative over all steps
    double max_T_energy_drift = 0.0;  ///< largest |dE|/E across one T step
    std::size_t flagged_sites = 0;    ///< cumulative count of Q-flagged sites
};

class EnsembleSimulator {
public:
    EnsembleSimulator(LatticeShape shape, ModelParams params, std::span<const MixtureSite> initial,
                      EnsembleOptions opt)
        : shape_(shape), p_(std::move(params)), opt_(opt) {
        p_.validate();
        if (initial.size() != shape_.sites()) throw DomainError("initial state size mismatch");
        if (opt_.members == 0) throw DomainError("ensemble needs at least one member");
        phi_ = sample_potential(shape_, p_, 0.0);
        double Theta_max = 0.0;
        std::vector<double> N(initial.size());
        std::vector<SiteTarget> targets(initial.size());
        for (std::size_t s = 0; s < initial.size(); ++s) {
            const auto c = mixture_to_canonical(initial[s], phi_[s], p_);
            if (!c.vacuum) Theta_max = std::max(Theta_max, temperature(c, p_));
            N[s] = initial[s].N;
            targets[s] = target_from_state(initial[s], phi_[s], opt_.members);
        }
        members_.assign(opt_.members, LatticeConfiguration{shape_, {}});
        resample_ensemble(members_, targets, p_, opt_.seed, ~0ull, opt_.threads);
        field_.phi = phi_;
        field_.ell = hop_lengths(N, ell_cap());
        policy_.K = momentum_cutoff(opt_.Theta_max.value_or(Theta_max), p_);
        policy_.exclusion = opt_.exclusion;
        if (opt_.dt) {
            policy_.dt = *opt_.dt;
        } else if (adaptive()) {
            policy_.dt = 0.5 / max_exit_rate(shape_, field_, policy_.K, p_);
        } else {
            HopField unit = field_;
            std::fill(unit.ell.begin(), unit.ell.end(), 1L);
            policy_.dt = 0.5 / max_exit_rate(shape_, unit, policy_.K, p_);
        }
        ledger_.initial = ledger_.current = totals();
    }

    /// One T step on every member followed by Q. A positive `cap` shortens an
    /// adaptive step.
    void advance(double cap = 0.0) {
        if (adaptive()) {
            policy_.dt = 0.5 / max_exit_rate(shape_, field_, policy_.K, p_);
            if (cap > 0.0) policy_.dt = std::min(policy_.dt, cap);
        }
        check_policy(shape_, field_, policy_, p_);
        const ShellTotals before = ledger_.current;
        std::vector<StepTally> tallies(members_.size());
        parallel_for(members_.size(), opt_.threads, [&](std::size_t i) {
            tallies[i] = detail::step_T_checked(members_[i], field_, policy_, p_, opt_.seed, i, step_);
        });
        for (const auto& t : tallies) ledger_.hops += t;
        const auto sums = tally_sites(members_, p_);
        double after_E = 0.0;
        for (std::size_t s = 0; s < sums.size(); ++s)
            after_E += sums[s].kinetic + static_cast<double>(sums[s].count) * phi_[s];
        if (before.E != 0.0)
            ledger_.max_T_energy_drift =
                std::max(ledger_.max_T_energy_drift, std::abs(after_E - before.E) / std::abs(before.E));
        time_ += policy_.dt;
        ++step_;
        const std::vector<double> phi_new = sample_potential(shape_, p_, time_);
        if (opt_.thermalize) {
            std::vector<SiteTarget> targets(sums.size());
            std::vector<MixtureSite> means(sums.size());
            for (std::size_t s = 0; s < sums.size(); ++s) {
                targets[s] = {sums[s].count, sums[s].momentum, sums[s].kinetic};
                means[s] = mixture_from_tally(sums[s], members_.size(), phi_[s]);
            }
            last_q_ = thermalize_Q(std::span<const MixtureSite>(means), phi_, p_);
            ledger_.flagged_sites += last_q_.flagged.size();
            resample_ensemble(members_, targets, p_, opt_.seed, step_, opt_.threads);
            std::vector<double> N(means.size());
            for (std::size_t s = 0; s < N.size(); ++s) N[s] = means[s].N;
            field_.ell = hop_lengths(N, ell_cap());
        }
        phi_ = phi_new;
        field_.phi = phi_;
        ledger_.current = totals();
    }

    /// Advances until time >= t_end; returns the number of steps taken.
    std::size_t run_until(double t_end) {
        std::size_t n = 0;
        while (time_ < t_end * (1.0 - 1e-12)) {
            advance(t_end - time_);
            ++n;
        }
        return n;
    }

    ShellTotals totals() const {
        ShellTotals t;
        for (const auto& m : members_) {
            const auto s = shell_totals(m, phi_, p_);
            t.N += s.N;
            t.E += s.E;
            t.w += s.w;
        }
        return t;
    }

    std::vector<MixtureSite> means() const { return ensemble_means(members_, phi_, p_); }
    std::vector<std::optional<HydroSite>> coarse(std::size_t cell) const {
        return coarse_grain(members_, cell, phi_, p_);
    }

    const std::vector<LatticeConfiguration>& members() const { return members_; }
    const StepPolicy& policy() const { return policy_; }
    const HopField& field() const { return field_; }
    const EnsembleLedger& ledger() const { return ledger_; }
    const ThermalizeResult& last_q() const { return last_q_; }
    const std::vector<double>& phi() const { return phi_; }
    double time() const { return time_; }
    std::uint64_t steps() const { return step_; }

private:
    bool adaptive() const { return opt_.adaptive_dt && !opt_.dt; }
    long ell_cap() const {
        std::size_t e = 1;
        for (std::size_t ax = 0; ax < 3; ++ax) e = std::max(e, shape_.extent[ax]);
        return static_cast<long>(std::max<std::size_t>(1, e / 2));
    }

    LatticeShape shape_;
    ModelParams p_;
    EnsembleOptions opt_;
    std::vector<double> phi_;
    std::vector<LatticeConfiguration> members_;
    HopField field_;
    StepPolicy policy_;
    EnsembleLedger ledger_;
    ThermalizeResult last_q_;
    double time_ = 0.0;
    std::uint64_t step_ = 0;
};

}  // namespace kinhydro
