#pragma once
/// @file harness.hpp
/// @brief Experiment orchestration: micro ensembles, PDE solves, micro-versus-
/// PDE comparison, bound certification and reduction checks, each producing a
/// report with conservation ledgers and pass/fail verdicts.
///
/// Lattice sites are placed at cell centres, x = (s + 1/2) a, so a block of
/// `cell` sites coincides with one PDE cell of spacing h = cell a.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinhydro/config.hpp"
#include "kinhydro/microsim.hpp"
#include "kinhydro/moments.hpp"
#include "kinhydro/pde.hpp"
#include "kinhydro/rng.hpp"
#include "kinhydro/snapshot.hpp"

namespace kinhydro::harness {

using json = nlohmann::ordered_json;

/// One measured quantity checked against a tolerance.
struct Check {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string note;
};

struct FieldError {
    std::string field;
    double l2 = 0.0;
    double linf = 0.0;
};

struct ComparisonReport {
    std::string name;
    std::string mode;
    std::vector<FieldError> errors;  ///< micro versus PDE, compare mode only
    std::vector<Check> ledgers;      ///< conservation ledgers
    std::vector<Check> checks;       ///< other in-run assertions
    json details = json::object();

    bool pass() const {
        const auto ok = [](const Check& c) { return c.pass; };
        return std::all_of(ledgers.begin(), ledgers.end(), ok) &&
               std::all_of(checks.begin(), checks.end(), ok);
    }

    json to_json() const {
        json j;
        j["name"] = name;
        j["mode"] = mode;
        j["pass"] = pass();
        const auto list = [](const std::vector<Check>& v) {
            json a = json::array();
            for (const auto& c : v) {
                json e;
                e["name"] = c.name;
                e["value"] = c.value;
                e["tolerance"] = c.tolerance;
                e["pass"] = c.pass;
                if (!c.note.empty()) e["note"] = c.note;
                a.push_back(e);
            }
            return a;
        };
        json errs = json::array();
        for (const auto& e : errors) errs.push_back({{"field", e.field}, {"l2", e.l2}, {"linf", e.linf}});
        if (!errors.empty()) j["errors"] = errs;
        j["ledgers"] = list(ledgers);
        j["checks"] = list(checks);
        j["details"] = details;
        return j;
    }
};

/// Overrides applied on top of the spec (CLI flags).
struct RunOptions {
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    bool write_files = true;
};

struct RunResult {
    ComparisonReport report;
    std::vector<std::filesystem::path> files;
};

namespace detail {

inline Check at_most(std::string name, double value, double tol, std::string note = {}) {
    return {std::move(name), value, tol, std::isfinite(value) && value <= tol, std::move(note)};
}

/// Relative errors of a against the reference b over cells present in both.
inline FieldError relative_error(std::string field, const std::vector<double>& a,
                                 const std::vector<double>& b, std::optional<double> scale = {}) {
    double num = 0.0, den = 0.0, worst = 0.0, peak = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a[i]) || !std::isfinite(b[i])) continue;
        const double d = a[i] - b[i];
        num += d * d;
        den += b[i] * b[i];
        worst = std::max(worst, std::abs(d));
        peak = std::max(peak, std::abs(b[i]));
        ++n;
    }
    FieldError e{std::move(field), 0.0, 0.0};
    if (n == 0) return {e.field, INFINITY, INFINITY};
    if (scale) {
        // Fields that may vanish (velocity) are measured against a fixed scale.
        e.l2 = std::sqrt(num / static_cast<double>(n)) / *scale;
        e.linf = worst / *scale;
    } else {
        e.l2 = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
        e.linf = peak > 0.0 ? worst / peak : worst;
    }
    return e;
}

inline std::size_t active_dims(const std::array<std::size_t, 3>& extent) {
    std::size_t d = 0;
    for (std::size_t ax = 0; ax < 3; ++ax)
        if (extent[ax] > 1) d = ax + 1;
    return d;
}

/// Potential seen by the lattice: Phi at the site centre (s + 1/2) a.
inline ModelParams lattice_params(const ExperimentSpec& s) {
    ModelParams pm = s.params;
    const std::array<std::size_t, 3> ext = s.lattice->extent;
    const double half = 0.5 * s.params.a;
    pm.potential = [phi = s.params.potential, ext, half](const Vec3& x, double t) {
        Vec3 y = x;
        for (std::size_t ax = 0; ax < 3; ++ax)
            if (ext[ax] > 1) y[ax] += half;
        return phi(y, t);
    };
    return pm;
}

inline InitialFields initial_fields(const ExperimentSpec& s) {
    return {s.initial, box_length(s), s.params.potential, s.params.k_B};
}

/// Site means (N, E, w) of the initial profile; occupations must lie in (0, 1).
inline std::vector<MixtureSite> initial_sites(const ExperimentSpec& s, const ModelParams& pm) {
    const LatticeShape shape{s.lattice->extent};
    const InitialFields init = initial_fields(s);
    std::vector<MixtureSite> sites(shape.sites());
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const Vec3 x0 = shape.position(i, pm.a);
        Vec3 x = x0;
        for (std::size_t ax = 0; ax < 3; ++ax)
            if (shape.extent[ax] > 1) x[ax] += 0.5 * pm.a;
        const double N = init.occupation(x);
        if (!(N > 0.0 && N < 1.0) && problems.empty())
            problems.push_back("initial: occupation " + std::to_string(N) + " outside (0, 1) at site " +
                               std::to_string(i));
        sites[i] = mixture_from_fields(N, init.Theta(x), init.velocity(x), pm.potential(x0, 0.0), pm);
    }
    if (!problems.empty()) throw ConfigError(problems);
    return sites;
}

struct Writer {
    std::filesystem::path dir;
    SnapshotFormat format;
    bool enabled;
    std::vector<std::filesystem::path> files;

    void snapshot(const Snapshot& s, const std::string& stem) {
        if (!enabled) return;
        std::filesystem::create_directories(dir);
        if (format != SnapshotFormat::Binary) {
            write_csv(s, dir / (stem + ".csv"));
            files.push_back(dir / (stem + ".csv"));
        }
        if (format != SnapshotFormat::Csv) {
            write_binary(s, dir / (stem + ".bin"));
            files.push_back(dir / (stem + ".bin"));
        }
    }
    void report(const ComparisonReport& r) {
        if (!enabled) return;
        std::filesystem::create_directories(dir);
        std::ofstream out(dir / "report.json");
        out << r.to_json().dump(2) << '\n';
        files.push_back(dir / "report.json");
    }
};

// ---------------------------------------------------------------------------
// Micro runs

struct MicroOutcome {
    std::vector<Check> ledgers;
    json details;
    Snapshot initial, final;
};

inline MicroOutcome run_micro(const ExperimentSpec& s, std::size_t members, std::size_t cell) {
    const ModelParams pm = lattice_params(s);
    const LatticeShape shape{s.lattice->extent};
    const auto sites = initial_sites(s, pm);
    EnsembleOptions opt;
    opt.members = members;
    opt.seed = *s.seed;
    opt.threads = s.threads;
    opt.exclusion = s.lattice->exclusion;
    opt.dt = s.lattice->dt;
    opt.adaptive_dt = true;
    EnsembleSimulator sim(shape, pm, sites, opt);

    std::array<std::size_t, 3> dims{1, 1, 1};
    for (std::size_t ax = 0; ax < 3; ++ax)
        if (shape.active(ax)) dims[ax] = shape.extent[ax] / cell;
    const double h = static_cast<double>(cell) * pm.a;
    MicroOutcome out;
    out.initial = snapshot_of(sim.coarse(cell), dims, h, 0.0, pm);
    sim.run_until(s.t_end);
    out.final = snapshot_of(sim.coarse(cell), dims, h, sim.time(), pm);

    const EnsembleLedger& L = sim.ledger();
    const double steps = static_cast<double>(sim.steps());
    const double N = L.initial.N;
    const double Theta_max = s.initial.Theta;
    const double sigma = std::sqrt(pm.m * pm.k_B * Theta_max);
    // Rounding momenta to the eps grid after each resample: systematic heating
    // below eps^2 / m per particle and step, plus a random walk of 5 sigma.
    const double rounding_E = steps * N * pm.eps * pm.eps / pm.m +
                              5.0 * std::sqrt(steps * N * 3.0 / 12.0) * pm.eps * sigma / pm.m;
    const double rounding_w = 5.0 * std::sqrt(steps * N / 12.0) * pm.eps;
    const double E_scale = 1.5 * N * pm.k_B * Theta_max;
    out.ledgers.push_back(at_most("micro.mass_change", std::abs(L.current.N - L.initial.N), 0.0,
                                  "particles created or lost over the run"));
    out.ledgers.push_back(at_most("micro.T_step_energy_drift", L.max_T_energy_drift, 1e-12,
                                  "largest relative energy change across one hop step"));
    out.ledgers.push_back(at_most("micro.energy_change", std::abs(L.current.E - L.initial.E) / E_scale,
                                  rounding_E / E_scale + 1e-12,
                                  "relative to the thermal energy; budget is eps-grid rounding"));
    double w_err = 0.0;
    for (std::size_t j = 0; j < 3; ++j)
        w_err = std::max(w_err, std::abs(L.current.w[j] - L.initial.w[j] - L.hops.momentum_mismatch[j]));
    out.ledgers.push_back(at_most("micro.momentum_minus_hop_mismatch", w_err / (std::sqrt(N) * sigma),
                                  rounding_w / (std::sqrt(N) * sigma) + 1e-12,
                                  "momentum change not accounted for by hop mismatches"));
    out.details = {{"members", members},
                   {"steps", sim.steps()},
                   {"dt_s", sim.policy().dt},
                   {"cutoff_K", sim.policy().K},
                   {"hops", L.hops.hops},
                   {"blocked", L.hops.blocked},
                   {"clamped", L.hops.clamped},
                   {"q_flagged_sites", L.flagged_sites},
                   {"particles", N}};
    return out;
}

// ---------------------------------------------------------------------------
// PDE runs

struct PdeOutcome {
    std::vector<Check> ledgers;
    std::vector<Check> checks;
    json details;
    Snapshot initial, final;
    HydroState state;
};

inline SolverConfig solver_config(const GridSpec& gs, unsigned threads) {
    SolverConfig cfg;
    cfg.cfl = gs.cfl;
    cfg.lambda_mode = gs.lambda_mode;
    cfg.flux = gs.flux;
    cfg.time = gs.time;
    cfg.threads = threads;
    return cfg;
}

inline PdeOutcome run_pde(const ExperimentSpec& s, HydroState state, const GridSpec& gs) {
    const ModelParams& p = s.params;
    SolverConfig cfg = solver_config(gs, s.threads);
    PdeOutcome out;
    out.initial = snapshot_of(state, p);
    const ConservedTotals t0 = totals(state);
    const Derivative d0 = rhs(state, p, cfg, 0.0);
    const std::vector<double> rho0 = state.rho;

    Vec3 impulse{}, gross{};
    double momentum_scale = 0.0;
    std::size_t steps = 0;
    const auto track = [&] {
        double m = 0.0;
        for (std::size_t j = 0; j < 3; ++j)
            for (double v : state.mom[j]) m += std::abs(v);
        momentum_scale = std::max(momentum_scale, m * state.grid.cell_volume());
    };
    track();
    while (state.time < s.t_end * (1.0 - 1e-12)) {
        const double remaining = s.t_end - state.time;
        cfg.dt = std::min(gs.dt.value_or(cfl_bound(state, p, cfg, state.time)), remaining);
        const StepReport r = step(state, p, cfg);
        impulse += r.impulse;
        for (std::size_t j = 0; j < 3; ++j) gross[j] += std::abs(r.impulse[j]);
        ++steps;
        track();
    }
    out.final = snapshot_of(state, p);
    const ConservedTotals t1 = totals(state);
    out.ledgers.push_back(at_most("pde.mass_drift", std::abs(t1.mass - t0.mass) / std::abs(t0.mass), 1e-12));
    out.ledgers.push_back(at_most("pde.energy_drift", std::abs(t1.energy - t0.energy) / std::abs(t0.energy),
                                  1e-12, "static potential"));
    if (state.grid.boundary == Boundary::Periodic) {
        double worst = 0.0, scale = momentum_scale;
        for (std::size_t j = 0; j < 3; ++j) {
            worst = std::max(worst, std::abs(t1.momentum[j] - t0.momentum[j] - impulse[j]));
            scale = std::max(scale, gross[j]);
        }
        out.ledgers.push_back(at_most("pde.momentum_minus_impulse", scale > 0.0 ? worst / scale : worst,
                                      1e-10, "relative to the larger of gross impulse and total |momentum|"));
    }
    double rate = 0.0, change = 0.0, peak = 0.0;
    for (std::size_t c = 0; c < rho0.size(); ++c) {
        rate = std::max(rate, std::abs(d0.rho[c]));
        change = std::max(change, std::abs(state.rho[c] - rho0[c]));
        peak = std::max(peak, rho0[c]);
    }
    if (s.initial.kind == ProfileKind::Barometric && s.initial.velocity == Vec3{})
        out.checks.push_back(at_most("pde.stationarity_residual", change / peak, s.stationarity_tolerance,
                                     "max |rho(t_end) - rho(0)| / max rho(0) for a barometric start"));
    out.details = {{"cells", state.grid.cells()},
                   {"h_cm", state.grid.h},
                   {"steps", steps},
                   {"initial_rhs_residual", rate * s.t_end / peak}};
    out.state = std::move(state);
    return out;
}

inline Grid spec_grid(const GridSpec& gs) {
    Grid g;
    g.dims = gs.dims;
    g.n = gs.cells;
    g.h = gs.h;
    g.boundary = gs.boundary;
    g.validate();
    return g;
}

inline HydroState pde_initial_state(const ExperimentSpec& s, const Grid& g) {
    const InitialFields init = initial_fields(s);
    const double rho_max = s.params.rho_max();
    for (std::size_t c = 0; c < g.cells(); ++c) {
        const double N = init.occupation(g.center(c));
        if (!(N > 0.0 && N < 1.0))
            throw ConfigError({"initial: occupation " + std::to_string(N) + " outside (0, 1) at cell " +
                               std::to_string(c)});
    }
    return make_state(
        g, s.params, [&](const Vec3& x) { return rho_max * init.occupation(x); },
        [&](const Vec3& x) { return init.velocity(x); }, [&](const Vec3& x) { return init.Theta(x); });
}

/// PDE state matching a lattice run: block averages of the site fields.
inline HydroState compare_initial_state(const ExperimentSpec& s, const Grid& g) {
    const InitialFields init = initial_fields(s);
    const auto& ext = s.lattice->extent;
    const std::size_t cell = s.compare.cell;
    const double a = s.params.a;
    HydroState st(g);
    for (std::size_t c = 0; c < g.cells(); ++c) {
        const auto q = g.coords(c);
        double N = 0.0, Theta = 0.0;
        Vec3 u{};
        std::size_t n = 0;
        for (std::size_t k = 0; k < (ext[2] > 1 ? cell : 1); ++k)
            for (std::size_t j = 0; j < (ext[1] > 1 ? cell : 1); ++j)
                for (std::size_t i = 0; i < (ext[0] > 1 ? cell : 1); ++i) {
                    const std::array<std::size_t, 3> site{q[0] * cell + i, q[1] * cell + j, q[2] * cell + k};
                    Vec3 x{};
                    for (std::size_t ax = 0; ax < 3; ++ax)
                        if (ext[ax] > 1) x[ax] = (static_cast<double>(site[ax]) + 0.5) * a;
                    N += init.occupation(x);
                    Theta += init.Theta(x);
                    u += init.velocity(x);
                    ++n;
                }
        const double w = 1.0 / static_cast<double>(n);
        store_primitive(st, c, make_hydro_site(N * w * s.params.rho_max(), u * w, Theta * w,
                                               s.params.potential(g.center(c), 0.0), s.params));
    }
    return st;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bounds and reductions

/// Fitted exponents of B1..B8 over ell in [1e-6, 1e-2] against their claimed orders.
inline ComparisonReport bounds_report(std::size_t points = 13) {
    ComparisonReport r;
    r.name = "bounds";
    r.mode = "bounds";
    const auto grid = log_grid(1e-6, 1e-2, points);
    json table = json::array();
    for (int k = 1; k <= 8; ++k) {
        const auto which = static_cast<BoundKind>(k);
        const ScalingFit fit = bound_scaling_fit(which, grid);
        std::string claim;
        Check c;
        c.name = std::string("bound.") + to_string(which);
        switch (which) {
            case BoundKind::B1:
            case BoundKind::B2:
            case BoundKind::B3:
            case BoundKind::B5:
                claim = "O(l log l)";
                c.value = std::abs(fit.slope_log - 1.0);
                c.tolerance = 0.15;
                c.pass = fit.log_preferred && c.value <= c.tolerance;
                c.note = "|slope - 1| with the log model preferred";
                break;
            case BoundKind::B4:
            case BoundKind::B7:
            case BoundKind::B8:
                claim = "O(l^2)";
                c.value = std::abs(fit.slope_power - 2.0);
                c.tolerance = 0.15;
                c.pass = c.value <= c.tolerance;
                c.note = "|slope - 2|";
                break;
            case BoundKind::B6:
                claim = "O(l) or smaller";
                c.value = 1.0 - fit.slope_power;
                c.tolerance = 0.15;
                c.pass = c.value <= c.tolerance;
                c.note = "1 - slope";
                break;
        }
        r.checks.push_back(c);
        table.push_back({{"bound", to_string(which)},
                         {"claim", claim},
                         {"slope_power", fit.slope_power},
                         {"rss_power", fit.rss_power},
                         {"slope_log", fit.slope_log},
                         {"rss_log", fit.rss_log},
                         {"log_preferred", fit.log_preferred},
                         {"pass", c.pass}});
    }
    r.details["ell_range"] = {grid.front(), grid.back()};
    r.details["table"] = table;
    return r;
}

namespace detail {

inline std::size_t count_differences(const std::vector<double>& a, const std::vector<double>& b) {
    std::size_t n = a.size() == b.size() ? 0 : std::max(a.size(), b.size());
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
        if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) ++n;
    return n;
}

/// A smooth random field: 1 + sum of three small Fourier modes.
struct RandomModes {
    std::array<Vec3, 3> k{};
    std::array<double, 3> amp{}, shift{};

    RandomModes(CounterRng& rng, const Vec3& L, double scale) {
        for (std::size_t m = 0; m < 3; ++m) {
            for (std::size_t ax = 0; ax < 3; ++ax)
                k[m][ax] = L[ax] > 0.0 ? 2.0 * std::numbers::pi * static_cast<double>(rng.below(3)) / L[ax] : 0.0;
            amp[m] = scale * (2.0 * rng.uniform() - 1.0);
            shift[m] = 2.0 * std::numbers::pi * rng.uniform();
        }
    }
    double operator()(const Vec3& x) const {
        double v = 0.0;
        for (std::size_t m = 0; m < 3; ++m) v += amp[m] * std::sin(dot(k[m], x) + shift[m]);
        return v;
    }
};

}  // namespace detail

/// Phi = 0 and u = 0 identities on random smooth fields. Each trial draws a
/// grid (1 or 2 dims, periodic or reflecting), flux and lambda options, then
/// compares rhs with rhs_field_free bit for bit (Phi = 0) and the mass rhs at
/// rest with the Smoluchowski reference (u = 0, random potential).
inline ComparisonReport validate_reductions(std::size_t trials = 50, std::uint64_t seed = 1) {
    ComparisonReport r;
    r.name = "reductions";
    r.mode = "reduce-check";
    std::size_t phi0_diff = 0, u0_diff = 0, phi0_ok = 0, u0_ok = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        CounterRng rng(seed, 0xBEDu, t);
        ModelParams p;
        Grid g;
        g.dims = 1 + rng.below(2);
        for (std::size_t ax = 0; ax < g.dims; ++ax) g.n[ax] = 6 + rng.below(11);
        g.h = p.a * static_cast<double>(2 + rng.below(9));
        g.boundary = rng.below(2) ? Boundary::Periodic : Boundary::Reflecting;
        SolverConfig cfg;
        cfg.flux = rng.below(2) ? FluxScheme::Central : FluxScheme::UpwindAdvective;
        cfg.lambda_mode = rng.below(2) ? LambdaMode::Constant : LambdaMode::MeanFreePath;
        Vec3 L{};
        for (std::size_t ax = 0; ax < g.dims; ++ax) L[ax] = static_cast<double>(g.n[ax]) * g.h;
        const double rho0 = p.rho_max() * (0.05 + 0.55 * rng.uniform());
        const double c = p.sound_speed();
        const detail::RandomModes drho(rng, L, 0.1), dTheta(rng, L, 0.1), ux(rng, L, 0.1),
            uy(rng, L, 0.1), uz(rng, L, 0.1), phi(rng, L, 1.0);
        const auto rho = [&](const Vec3& x) { return rho0 * (1.0 + drho(x)); };
        const auto Theta = [&](const Vec3& x) { return p.Theta0 * (1.0 + dTheta(x)); };
        const auto u = [&](const Vec3& x) { return Vec3{c * ux(x), c * uy(x), c * uz(x)}; };
        const auto rest = [](const Vec3&) { return Vec3{}; };

        const HydroState moving = make_state(g, p, rho, u, Theta);
        const Derivative a = rhs(moving, p, cfg, 0.0);
        const Derivative b = rhs_field_free(moving, p, cfg);
        std::size_t d = detail::count_differences(a.rho, b.rho) + detail::count_differences(a.rhoe, b.rhoe);
        for (std::size_t j = 0; j < 3; ++j) d += detail::count_differences(a.mom[j], b.mom[j]);
        phi0_diff += d;
        phi0_ok += d == 0;

        ModelParams pf = p;
        const double kT = p.k_B * p.Theta0;
        pf.potential = [&](const Vec3& x, double) { return 0.5 * kT * phi(x); };
        const HydroState resting = make_state(g, pf, rho, rest, Theta);
        const auto cell_phi = cell_potential(g, pf, 0.0);
        const auto prim = kinhydro::detail::primitives(resting, cell_phi, pf);
        const Derivative full = rhs(resting, pf, cfg, 0.0);
        const auto smol = smoluchowski_rhs(g, prim.rho, prim.Theta, cell_phi, cfg, pf);
        const std::size_t e = detail::count_differences(full.rho, smol);
        u0_diff += e;
        u0_ok += e == 0;
    }
    r.checks.push_back({"reduction.phi0_field_free", static_cast<double>(phi0_diff), 0.0, phi0_diff == 0,
                        "values differing from the field-free rhs"});
    r.checks.push_back({"reduction.u0_smoluchowski", static_cast<double>(u0_diff), 0.0, u0_diff == 0,
                        "mass rhs values differing from the Smoluchowski reference"});
    r.details = {{"trials", trials},
                 {"seed", seed},
                 {"phi0_exact_trials", phi0_ok},
                 {"u0_exact_trials", u0_ok}};
    return r;
}

// ---------------------------------------------------------------------------
// Experiments

inline void apply(ExperimentSpec& s, const RunOptions& o) {
    if (o.seed) s.seed = o.seed;
    if (o.threads) s.threads = *o.threads;
    if (o.out) s.output = o.out->string();
}

/// Runs one experiment. Writes report.json and snapshots under spec.output
/// unless opts.write_files is false.
inline RunResult run(ExperimentSpec s, const RunOptions& opts = {}) {
    apply(s, opts);
    if ((s.mode == Mode::Micro || s.mode == Mode::Compare) && !s.seed)
        throw ConfigError({"seed: missing (mandatory for micro runs)"});
    detail::Writer w{s.output, s.snapshots, opts.write_files, {}};
    ComparisonReport r;
    r.name = s.name;
    r.mode = to_string(s.mode);
    const auto finish = [&](ComparisonReport rep) {
        w.report(rep);
        return RunResult{std::move(rep), std::move(w.files)};
    };

    switch (s.mode) {
        case Mode::Bounds: {
            ComparisonReport b = bounds_report();
            b.name = s.name;
            return finish(std::move(b));
        }
        case Mode::Micro: {
            auto m = detail::run_micro(s, s.ensemble, s.lattice->cell);
            w.snapshot(m.initial, "micro_initial");
            w.snapshot(m.final, "micro_final");
            r.ledgers = m.ledgers;
            r.details["micro"] = m.details;
            return finish(std::move(r));
        }
        case Mode::Pde: {
            const Grid g = detail::spec_grid(*s.grid);
            auto o = detail::run_pde(s, detail::pde_initial_state(s, g), *s.grid);
            w.snapshot(o.initial, "pde_initial");
            w.snapshot(o.final, "pde_final");
            r.ledgers = o.ledgers;
            r.checks = o.checks;
            r.details["pde"] = o.details;
            return finish(std::move(r));
        }
        case Mode::Compare: {
            const auto& ext = s.lattice->extent;
            const std::size_t dims = detail::active_dims(ext);
            GridSpec gs = s.compare.solver;
            gs.dims = std::max<std::size_t>(1, dims);
            for (std::size_t ax = 0; ax < 3; ++ax) {
                if (ax < dims && ext[ax] <= 1)
                    throw ConfigError({"lattice.extent: active axes must come first"});
                gs.cells[ax] = ax < dims ? ext[ax] / s.compare.cell : 1;
            }
            gs.h = static_cast<double>(s.compare.cell) * s.params.a;
            const Grid g = detail::spec_grid(gs);
            auto o = detail::run_pde(s, detail::compare_initial_state(s, g), gs);
            w.snapshot(o.final, "pde_final");
            r.ledgers = o.ledgers;
            r.details["pde"] = o.details;

            json ladder = json::array();
            std::vector<double> l2;
            for (std::size_t k = s.compare.doublings + 1; k-- > 0;) {
                const std::size_t members = s.ensemble >> k;
                auto m = detail::run_micro(s, members, s.compare.cell);
                const auto e = detail::relative_error("rho", m.final.rho(), o.final.rho());
                l2.push_back(e.l2);
                ladder.push_back({{"members", members}, {"rho_l2", e.l2}, {"rho_linf", e.linf}});
                for (auto c : m.ledgers) {
                    if (k > 0) c.name += "[" + std::to_string(members) + "]";
                    r.ledgers.push_back(c);
                }
                if (k == 0) {
                    w.snapshot(m.initial, "micro_initial");
                    w.snapshot(m.final, "micro_final");
                    const double c = s.params.sound_speed();
                    static constexpr std::array<std::pair<const char*, std::size_t>, 4> scalar{
                        {{"rho", 0}, {"e", 1}, {"Theta", 5}, {"P", 6}}};
                    for (const auto& [name, i] : scalar)
                        r.errors.push_back(detail::relative_error(name, m.final.fields[i], o.final.fields[i]));
                    for (std::size_t j = 0; j < dims; ++j)
                        r.errors.push_back(detail::relative_error(
                            std::string(Snapshot::field_names[2 + j]) + "/c", m.final.fields[2 + j],
                            o.final.fields[2 + j], c));
                    r.details["micro"] = m.details;
                }
            }
            r.checks.push_back(detail::at_most("compare.rho_l2", l2.back(), s.compare.tolerance,
                                               "coarse-grained micro density versus PDE at t_end"));
            if (l2.size() > 1) {
                // A doubling may not raise the error by more than the sampling
                // spread of an L2 estimate over the cells, and the largest
                // ensemble must beat the smallest.
                const double spread = 1.0 / std::sqrt(2.0 * static_cast<double>(g.cells()));
                double worst = 0.0;
                for (std::size_t i = 1; i < l2.size(); ++i) worst = std::max(worst, l2[i] / l2[i - 1]);
                r.checks.push_back(detail::at_most("compare.error_ratio_per_doubling", worst, 1.0 + spread,
                                                   "largest l2(2E) / l2(E)"));
                r.checks.push_back(detail::at_most("compare.error_ratio_overall", l2.back() / l2.front(),
                                                   1.0 - 1e-12, "l2(largest) / l2(smallest)"));
            }
            r.details["ladder"] = ladder;
            return finish(std::move(r));
        }
    }
    return finish(std::move(r));
}

}  // namespace kinhydro::harness
