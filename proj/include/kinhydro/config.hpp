#pragma once
/// @file config.hpp
/// @brief Experiment specifications read from YAML with unit-checked values.
///
/// Every physical value carries a unit suffix checked against the expected
/// dimension at parse time. All problems in a file are collected and thrown
/// together as one ConfigError.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "kinhydro/errors.hpp"
#include "kinhydro/pde.hpp"
#include "kinhydro/thermo.hpp"
#include "kinhydro/units.hpp"
#include "kinhydro/vec3.hpp"

namespace kinhydro {

enum class Mode { Micro, Pde, Compare, Bounds };
enum class ProfileKind { Uniform, GaussianBump, Barometric, Shear };
enum class PotentialKind { Zero, Linear, Harmonic, Sinusoidal, Table };
enum class SnapshotFormat { Csv, Binary, Both };

/// Initial fields. Density is given as the site occupation N = rho / rho_max.
struct ProfileSpec {
    ProfileKind kind = ProfileKind::Uniform;
    double occupation = 0.3;
    double amplitude = 0.0;        ///< bump height relative to the background
    double width = 0.0;            ///< bump standard deviation (cm)
    std::optional<Vec3> center;    ///< bump centre (cm); default box centre
    double Theta = 300.0;          ///< K
    Vec3 velocity{};               ///< cm/s
    double shear_speed = 0.0;      ///< amplitude of u_y(x) = U sin(2 pi x / L) (cm/s)
};

struct PotentialSpec {
    PotentialKind kind = PotentialKind::Zero;
    std::size_t axis = 0;
    double gradient = 0.0;              ///< linear: dPhi/dx (erg/cm)
    double stiffness = 0.0;             ///< harmonic: Phi = k (x - c)^2 / 2 (erg/cm^2)
    std::optional<double> center;       ///< harmonic centre (cm); default box centre
    double amplitude = 0.0;             ///< sinusoidal: Phi = A sin(2 pi x / L) (erg)
    std::optional<double> wavelength;   ///< sinusoidal period (cm); default box length
    std::vector<double> table;          ///< table: Phi at x = (i + 1/2) spacing (erg)
    double table_spacing = 0.0;         ///< cm
};

struct LatticeSpec {
    std::array<std::size_t, 3> extent{1, 1, 1};
    bool exclusion = false;
    std::size_t cell = 1;               ///< coarse-graining block for snapshots
    std::optional<double> dt;           ///< s; default 0.5 / max exit rate
};

struct GridSpec {
    std::size_t dims = 1;
    std::array<std::size_t, 3> cells{1, 1, 1};
    double h = 0.0;                     ///< cm
    Boundary boundary = Boundary::Periodic;
    std::optional<double> dt;           ///< s; default from the CFL bound
    double cfl = 0.4;
    LambdaMode lambda_mode = LambdaMode::Constant;
    FluxScheme flux = FluxScheme::Central;
    TimeScheme time = TimeScheme::RK2;
};

struct CompareSpec {
    std::size_t cell = 8;               ///< lattice sites per PDE cell and axis
    GridSpec solver = [] {              ///< cells and h follow the lattice
        GridSpec g;
        g.lambda_mode = LambdaMode::MeanFreePath;
        return g;
    }();
    double tolerance = 0.05;            ///< L2 relative error of rho at t_end
    std::size_t doublings = 0;          ///< extra runs at ensemble / 2^k, k = 1..doublings
};

struct ExperimentSpec {
    std::string name;
    Mode mode = Mode::Pde;
    ModelParams params;                 ///< potential is installed by the harness
    ProfileSpec initial;
    PotentialSpec potential;
    std::optional<LatticeSpec> lattice;
    std::optional<GridSpec> grid;
    CompareSpec compare;
    std::size_t ensemble = 0;
    std::optional<std::uint64_t> seed;
    double t_end = 0.0;                 ///< s
    std::string output = "out";
    unsigned threads = 1;
    SnapshotFormat snapshots = SnapshotFormat::Both;
    double stationarity_tolerance = 1e-3;  ///< max relative density change of a barometric run
};

inline const char* to_string(Mode m) {
    switch (m) {
        case Mode::Micro: return "micro";
        case Mode::Pde: return "pde";
        case Mode::Compare: return "compare";
        case Mode::Bounds: return "bounds";
    }
    return "?";
}

inline const char* to_string(ProfileKind k) {
    switch (k) {
        case ProfileKind::Uniform: return "uniform";
        case ProfileKind::GaussianBump: return "gaussian-bump";
        case ProfileKind::Barometric: return "barometric";
        case ProfileKind::Shear: return "shear";
    }
    return "?";
}

inline const char* to_string(PotentialKind k) {
    switch (k) {
        case PotentialKind::Zero: return "zero";
        case PotentialKind::Linear: return "linear";
        case PotentialKind::Harmonic: return "harmonic";
        case PotentialKind::Sinusoidal: return "sinusoidal";
        case PotentialKind::Table: return "table";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Geometry shared by the run modes

/// Box side lengths (cm); inactive axes have length 0.
inline Vec3 box_length(const ExperimentSpec& s) {
    Vec3 L{};
    if (s.lattice) {
        for (std::size_t ax = 0; ax < 3; ++ax)
            if (s.lattice->extent[ax] > 1) L[ax] = static_cast<double>(s.lattice->extent[ax]) * s.params.a;
    } else if (s.grid) {
        for (std::size_t ax = 0; ax < s.grid->dims; ++ax)
            L[ax] = static_cast<double>(s.grid->cells[ax]) * s.grid->h;
    }
    return L;
}

/// Phi(x) in erg for the configured potential.
inline PotentialFn make_potential(const PotentialSpec& ps, const Vec3& L) {
    const std::size_t ax = ps.axis;
    switch (ps.kind) {
        case PotentialKind::Zero:
            return [](const Vec3&, double) { return 0.0; };
        case PotentialKind::Linear:
            return [g = ps.gradient, ax](const Vec3& x, double) { return g * x[ax]; };
        case PotentialKind::Harmonic: {
            const double c = ps.center.value_or(0.5 * L[ax]);
            return [k = ps.stiffness, c, ax](const Vec3& x, double) {
                return 0.5 * k * (x[ax] - c) * (x[ax] - c);
            };
        }
        case PotentialKind::Sinusoidal: {
            const double lambda = ps.wavelength.value_or(L[ax]);
            return [A = ps.amplitude, lambda, ax](const Vec3& x, double) {
                return A * std::sin(2.0 * std::numbers::pi * x[ax] / lambda);
            };
        }
        case PotentialKind::Table: {
            // Periodic linear interpolation between nodes at (i + 1/2) spacing.
            return [t = ps.table, dx = ps.table_spacing, ax](const Vec3& x, double) {
                const double n = static_cast<double>(t.size());
                double s = x[ax] / dx - 0.5;
                s -= n * std::floor(s / n);
                const double i0 = std::floor(s);
                const double w = s - i0;
                const auto i = static_cast<std::size_t>(i0) % t.size();
                return (1.0 - w) * t[i] + w * t[(i + 1) % t.size()];
            };
        }
    }
    return [](const Vec3&, double) { return 0.0; };
}

/// Initial occupation N(x), temperature and velocity from the profile.
struct InitialFields {
    ProfileSpec profile;
    Vec3 L{};
    PotentialFn phi;
    double k_B = 1.380649e-16;

    double occupation(const Vec3& x) const {
        const auto& pr = profile;
        switch (pr.kind) {
            case ProfileKind::Uniform:
            case ProfileKind::Shear:
                return pr.occupation;
            case ProfileKind::GaussianBump: {
                const Vec3 c = pr.center.value_or(L * 0.5);
                double r2 = 0.0;
                for (std::size_t ax = 0; ax < 3; ++ax)
                    if (L[ax] > 0.0) r2 += (x[ax] - c[ax]) * (x[ax] - c[ax]);
                return pr.occupation * (1.0 + pr.amplitude * std::exp(-r2 / (2.0 * pr.width * pr.width)));
            }
            case ProfileKind::Barometric:
                return pr.occupation * std::exp(-phi(x, 0.0) / (k_B * pr.Theta));
        }
        return pr.occupation;
    }
    double Theta(const Vec3&) const { return profile.Theta; }
    Vec3 velocity(const Vec3& x) const {
        Vec3 u = profile.velocity;
        if (profile.kind == ProfileKind::Shear && L[0] > 0.0)
            u[1] += profile.shear_speed * std::sin(2.0 * std::numbers::pi * x[0] / L[0]);
        return u;
    }
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

/// Walks a YAML tree, recording every problem with its dotted path.
class SpecReader {
public:
    std::vector<std::string> problems;

    void unknown_keys(const YAML::Node& n, const std::string& path,
                      std::initializer_list<const char*> allowed) {
        if (!n || !n.IsMap()) return;
        const std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& kv : n) {
            const auto key = kv.first.as<std::string>();
            if (!ok.count(key)) problems.push_back(join(path, key) + ": unknown key");
        }
    }

    std::optional<double> quantity(const YAML::Node& parent, const std::string& path,
                                   const char* key, const units::Dim& dim, bool required) {
        const YAML::Node n = parent[key];
        const std::string where = join(path, key);
        if (!n) {
            if (required) problems.push_back(where + ": missing");
            return std::nullopt;
        }
        return quantity_value(n, where, dim);
    }

    std::optional<double> quantity_value(const YAML::Node& n, const std::string& where,
                                         const units::Dim& dim) {
        if (!n.IsScalar()) {
            problems.push_back(where + ": expected a quantity");
            return std::nullopt;
        }
        const auto q = units::parse_quantity(n.Scalar());
        if (!q) {
            problems.push_back(where + ": cannot parse '" + n.Scalar() + "' as <number> <unit>");
            return std::nullopt;
        }
        if (q->dim != dim) {
            problems.push_back(where + ": '" + n.Scalar() + "' has dimension " +
                               units::dim_name(q->dim) + ", expected " + units::dim_name(dim));
            return std::nullopt;
        }
        return q->value;
    }

    std::optional<Vec3> vector(const YAML::Node& parent, const std::string& path,
                               const char* key, const units::Dim& dim) {
        const YAML::Node n = parent[key];
        if (!n) return std::nullopt;
        const std::string where = join(path, key);
        if (!n.IsSequence() || n.size() != 3) {
            problems.push_back(where + ": expected a list of 3 quantities");
            return std::nullopt;
        }
        Vec3 v;
        for (std::size_t i = 0; i < 3; ++i) {
            const auto q = quantity_value(n[i], where + "[" + std::to_string(i) + "]", dim);
            if (!q) return std::nullopt;
            v[i] = *q;
        }
        return v;
    }

    template <class T>
    std::optional<T> scalar(const YAML::Node& parent, const std::string& path, const char* key,
                            bool required) {
        const YAML::Node n = parent[key];
        const std::string where = join(path, key);
        if (!n) {
            if (required) problems.push_back(where + ": missing");
            return std::nullopt;
        }
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            problems.push_back(where + ": invalid value '" + (n.IsScalar() ? n.Scalar() : "") + "'");
            return std::nullopt;
        }
    }

    std::optional<std::size_t> count(const YAML::Node& parent, const std::string& path,
                                     const char* key, bool required, std::size_t min = 1) {
        const auto v = scalar<long long>(parent, path, key, required);
        if (!v) return std::nullopt;
        if (*v < static_cast<long long>(min)) {
            problems.push_back(join(path, key) + ": must be at least " + std::to_string(min));
            return std::nullopt;
        }
        return static_cast<std::size_t>(*v);
    }

    template <class E>
    std::optional<E> choice(const YAML::Node& parent, const std::string& path, const char* key,
                            std::initializer_list<std::pair<const char*, E>> options, bool required) {
        const auto v = scalar<std::string>(parent, path, key, required);
        if (!v) return std::nullopt;
        std::string names;
        for (const auto& [name, value] : options) {
            if (*v == name) return value;
            names += names.empty() ? name : std::string(" | ") + name;
        }
        problems.push_back(join(path, key) + ": '" + *v + "' is not one of " + names);
        return std::nullopt;
    }

    std::optional<std::array<std::size_t, 3>> extent(const YAML::Node& parent,
                                                     const std::string& path, const char* key) {
        const YAML::Node n = parent[key];
        const std::string where = join(path, key);
        if (!n) {
            problems.push_back(where + ": missing");
            return std::nullopt;
        }
        if (!n.IsSequence() || n.size() < 1 || n.size() > 3) {
            problems.push_back(where + ": expected a list of 1 to 3 positive integers");
            return std::nullopt;
        }
        std::array<std::size_t, 3> e{1, 1, 1};
        for (std::size_t i = 0; i < n.size(); ++i) {
            long long v = 0;
            try {
                v = n[i].as<long long>();
            } catch (const YAML::Exception&) {
                v = 0;
            }
            if (v < 1) {
                problems.push_back(where + "[" + std::to_string(i) + "]: expected a positive integer");
                return std::nullopt;
            }
            e[i] = static_cast<std::size_t>(v);
        }
        return e;
    }

    static std::string join(const std::string& path, const std::string& key) {
        return path.empty() ? key : path + "." + key;
    }
};

inline void read_model(SpecReader& r, const YAML::Node& n, ModelParams& p) {
    if (!n) return;
    r.unknown_keys(n, "model", {"m", "a", "eps", "k_B", "Theta0", "cutoff_sigmas", "keep_kinetic_in_e"});
    if (auto v = r.quantity(n, "model", "m", units::mass, false)) p.m = *v;
    if (auto v = r.quantity(n, "model", "a", units::length, false)) p.a = *v;
    if (auto v = r.quantity(n, "model", "eps", units::momentum, false)) p.eps = *v;
    if (auto v = r.quantity(n, "model", "k_B", units::heat_capacity, false)) p.k_B = *v;
    if (auto v = r.quantity(n, "model", "Theta0", units::temperature, false)) p.Theta0 = *v;
    if (auto v = r.quantity(n, "model", "cutoff_sigmas", units::dimensionless, false)) p.cutoff_sigmas = *v;
    if (auto v = r.scalar<bool>(n, "model", "keep_kinetic_in_e", false)) p.keep_kinetic_in_e = *v;
    const auto positive = [&](double v, const char* key) {
        if (!(v > 0.0)) r.problems.push_back(std::string("model.") + key + ": must be positive");
    };
    positive(p.m, "m");
    positive(p.a, "a");
    positive(p.eps, "eps");
    positive(p.k_B, "k_B");
    positive(p.Theta0, "Theta0");
    positive(p.cutoff_sigmas, "cutoff_sigmas");
}

inline void read_initial(SpecReader& r, const YAML::Node& n, ProfileSpec& pr, double Theta0) {
    pr.Theta = Theta0;
    if (!n) return;
    const std::string path = "initial";
    r.unknown_keys(n, path, {"profile", "occupation", "amplitude", "width", "center", "Theta",
                             "velocity", "shear_speed"});
    if (auto k = r.choice<ProfileKind>(n, path, "profile",
                                       {{"uniform", ProfileKind::Uniform},
                                        {"gaussian-bump", ProfileKind::GaussianBump},
                                        {"barometric", ProfileKind::Barometric},
                                        {"shear", ProfileKind::Shear}},
                                       false))
        pr.kind = *k;
    if (auto v = r.quantity(n, path, "occupation", units::dimensionless, false)) pr.occupation = *v;
    if (!(pr.occupation > 0.0 && pr.occupation < 1.0))
        r.problems.push_back("initial.occupation: must lie in (0, 1)");
    if (auto v = r.quantity(n, path, "Theta", units::temperature, false)) pr.Theta = *v;
    if (!(pr.Theta > 0.0)) r.problems.push_back("initial.Theta: must be positive");
    if (auto v = r.vector(n, path, "velocity", units::velocity)) pr.velocity = *v;
    if (pr.kind == ProfileKind::GaussianBump) {
        if (auto v = r.quantity(n, path, "amplitude", units::dimensionless, true)) pr.amplitude = *v;
        if (auto v = r.quantity(n, path, "width", units::length, true)) pr.width = *v;
        if (n["width"] && !(pr.width > 0.0)) r.problems.push_back("initial.width: must be positive");
        if (auto v = r.vector(n, path, "center", units::length)) pr.center = *v;
    }
    if (pr.kind == ProfileKind::Shear)
        if (auto v = r.quantity(n, path, "shear_speed", units::velocity, true)) pr.shear_speed = *v;
}

inline void read_potential(SpecReader& r, const YAML::Node& n, PotentialSpec& ps) {
    if (!n) return;
    const std::string path = "potential";
    r.unknown_keys(n, path, {"kind", "axis", "gradient", "stiffness", "center", "amplitude",
                             "wavelength", "table", "spacing"});
    if (auto k = r.choice<PotentialKind>(n, path, "kind",
                                         {{"zero", PotentialKind::Zero},
                                          {"linear", PotentialKind::Linear},
                                          {"harmonic", PotentialKind::Harmonic},
                                          {"sinusoidal", PotentialKind::Sinusoidal},
                                          {"table", PotentialKind::Table}},
                                         true))
        ps.kind = *k;
    if (n["axis"]) {
        const auto a = r.scalar<long long>(n, path, "axis", false);
        if (a && *a >= 0 && *a < 3) ps.axis = static_cast<std::size_t>(*a);
        else if (a) r.problems.push_back("potential.axis: must be 0, 1 or 2");
    }
    switch (ps.kind) {
        case PotentialKind::Zero:
            break;
        case PotentialKind::Linear:
            if (auto v = r.quantity(n, path, "gradient", units::force, true)) ps.gradient = *v;
            break;
        case PotentialKind::Harmonic:
            if (auto v = r.quantity(n, path, "stiffness", units::stiffness, true)) ps.stiffness = *v;
            if (auto v = r.quantity(n, path, "center", units::length, false)) ps.center = *v;
            break;
        case PotentialKind::Sinusoidal:
            if (auto v = r.quantity(n, path, "amplitude", units::energy, true)) ps.amplitude = *v;
            if (auto v = r.quantity(n, path, "wavelength", units::length, false)) ps.wavelength = *v;
            break;
        case PotentialKind::Table: {
            const YAML::Node t = n["table"];
            if (!t || !t.IsSequence() || t.size() < 2) {
                r.problems.push_back("potential.table: expected a list of at least 2 energies");
            } else {
                for (std::size_t i = 0; i < t.size(); ++i)
                    if (auto v = r.quantity_value(t[i], "potential.table[" + std::to_string(i) + "]",
                                                  units::energy))
                        ps.table.push_back(*v);
            }
            if (auto v = r.quantity(n, path, "spacing", units::length, true)) ps.table_spacing = *v;
            if (n["spacing"] && !(ps.table_spacing > 0.0))
                r.problems.push_back("potential.spacing: must be positive");
            break;
        }
    }
}

inline void read_lattice(SpecReader& r, const YAML::Node& n, LatticeSpec& ls) {
    const std::string path = "lattice";
    r.unknown_keys(n, path, {"extent", "exclusion", "cell", "dt"});
    if (auto e = r.extent(n, path, "extent")) ls.extent = *e;
    if (auto v = r.scalar<bool>(n, path, "exclusion", false)) ls.exclusion = *v;
    if (auto v = r.count(n, path, "cell", false)) ls.cell = *v;
    if (auto v = r.quantity(n, path, "dt", units::time, false)) ls.dt = *v;
    for (std::size_t ax = 0; ax < 3; ++ax)
        if (ls.extent[ax] > 1 && ls.extent[ax] % ls.cell != 0)
            r.problems.push_back("lattice.cell: must divide every active extent");
}

/// Time step and flux options shared by pde grids and compare runs.
inline void read_solver(SpecReader& r, const YAML::Node& n, const std::string& path, GridSpec& gs) {
    if (auto v = r.quantity(n, path, "dt", units::time, false)) gs.dt = *v;
    if (auto v = r.quantity(n, path, "cfl", units::dimensionless, false)) gs.cfl = *v;
    if (!(gs.cfl > 0.0 && gs.cfl <= 1.0)) r.problems.push_back(path + ".cfl: must lie in (0, 1]");
    if (auto v = r.choice<LambdaMode>(n, path, "lambda",
                                      {{"constant", LambdaMode::Constant},
                                       {"mean-free-path", LambdaMode::MeanFreePath}},
                                      false))
        gs.lambda_mode = *v;
    if (auto v = r.choice<FluxScheme>(n, path, "flux",
                                      {{"central", FluxScheme::Central},
                                       {"upwind", FluxScheme::UpwindAdvective}},
                                      false))
        gs.flux = *v;
    if (auto v = r.choice<TimeScheme>(n, path, "time",
                                      {{"euler", TimeScheme::Euler}, {"rk2", TimeScheme::RK2}},
                                      false))
        gs.time = *v;
}

inline void read_grid(SpecReader& r, const YAML::Node& n, GridSpec& gs) {
    const std::string path = "grid";
    r.unknown_keys(n, path, {"cells", "h", "boundary", "dt", "cfl", "lambda", "flux", "time"});
    if (auto e = r.extent(n, path, "cells")) {
        gs.cells = *e;
        gs.dims = n["cells"].size();
        for (std::size_t ax = 0; ax < gs.dims; ++ax)
            if (gs.cells[ax] < 4) r.problems.push_back("grid.cells: at least 4 cells per axis");
    }
    if (auto v = r.quantity(n, path, "h", units::length, true)) gs.h = *v;
    if (n["h"] && !(gs.h > 0.0)) r.problems.push_back("grid.h: must be positive");
    if (auto v = r.choice<Boundary>(n, path, "boundary",
                                    {{"periodic", Boundary::Periodic},
                                     {"reflecting", Boundary::Reflecting}},
                                    false))
        gs.boundary = *v;
    read_solver(r, n, path, gs);
}

}  // namespace detail

/// Reads an experiment from a YAML document. Throws ConfigError listing
/// every offending field.
inline ExperimentSpec parse_spec(const YAML::Node& root) {
    detail::SpecReader r;
    ExperimentSpec s;
    if (!root || !root.IsMap()) throw ConfigError({"document: expected a mapping"});
    r.unknown_keys(root, "", {"name", "mode", "model", "initial", "potential", "lattice", "grid",
                              "compare", "ensemble", "seed", "t_end", "output", "threads",
                              "snapshots", "stationarity_tolerance"});
    if (auto v = r.scalar<std::string>(root, "", "name", true)) s.name = *v;
    if (auto m = r.choice<Mode>(root, "", "mode",
                                {{"micro", Mode::Micro},
                                 {"pde", Mode::Pde},
                                 {"compare", Mode::Compare},
                                 {"bounds", Mode::Bounds}},
                                true))
        s.mode = *m;
    detail::read_model(r, root["model"], s.params);
    detail::read_initial(r, root["initial"], s.initial, s.params.Theta0);
    detail::read_potential(r, root["potential"], s.potential);
    if (auto v = r.scalar<std::string>(root, "", "output", false)) s.output = *v;
    if (auto v = r.count(root, "", "threads", false)) s.threads = static_cast<unsigned>(*v);
    if (auto v = r.choice<SnapshotFormat>(root, "", "snapshots",
                                          {{"csv", SnapshotFormat::Csv},
                                           {"binary", SnapshotFormat::Binary},
                                           {"both", SnapshotFormat::Both}},
                                          false))
        s.snapshots = *v;
    if (auto v = r.quantity(root, "", "stationarity_tolerance", units::dimensionless, false))
        s.stationarity_tolerance = *v;
    if (root["seed"]) {
        if (auto v = r.scalar<std::uint64_t>(root, "", "seed", false)) s.seed = *v;
    }

    const bool micro = s.mode == Mode::Micro || s.mode == Mode::Compare;
    const bool pde = s.mode == Mode::Pde;
    if (s.mode != Mode::Bounds) {
        if (auto v = r.quantity(root, "", "t_end", units::time, true)) s.t_end = *v;
        if (root["t_end"] && !(s.t_end > 0.0)) r.problems.push_back("t_end: must be positive");
    }
    if (micro) {
        if (!s.seed && !root["seed"]) r.problems.push_back("seed: missing (mandatory for micro runs)");
        if (auto v = r.count(root, "", "ensemble", true)) s.ensemble = *v;
        if (root["lattice"]) {
            s.lattice.emplace();
            detail::read_lattice(r, root["lattice"], *s.lattice);
        } else {
            r.problems.push_back("lattice: missing");
        }
    }
    if (pde) {
        if (root["grid"]) {
            s.grid.emplace();
            detail::read_grid(r, root["grid"], *s.grid);
        } else {
            r.problems.push_back("grid: missing");
        }
    }
    if (s.mode == Mode::Compare) {
        const YAML::Node c = root["compare"];
        if (c) {
            r.unknown_keys(c, "compare", {"cell", "tolerance", "doublings", "dt", "lambda", "flux", "time", "cfl"});
            detail::read_solver(r, c, "compare", s.compare.solver);
            if (auto v = r.count(c, "compare", "cell", false)) s.compare.cell = *v;
            if (auto v = r.quantity(c, "compare", "tolerance", units::dimensionless, false)) s.compare.tolerance = *v;
            if (auto v = r.count(c, "compare", "doublings", false, 0)) s.compare.doublings = *v;
        }
        if (s.lattice) {
            for (std::size_t ax = 0; ax < 3; ++ax)
                if (s.lattice->extent[ax] > 1 && s.lattice->extent[ax] % s.compare.cell != 0)
                    r.problems.push_back("compare.cell: must divide every active lattice extent");
            if (s.ensemble >> s.compare.doublings == 0)
                r.problems.push_back("compare.doublings: ensemble too small to halve that often");
        }
    }
    // Linear and harmonic potentials jump across a periodic seam.
    const bool periodic = micro || (s.grid && s.grid->boundary == Boundary::Periodic);
    if (periodic && (s.potential.kind == PotentialKind::Linear ||
                     s.potential.kind == PotentialKind::Harmonic))
        r.problems.push_back(std::string("potential.kind: ") + to_string(s.potential.kind) +
                             " is not periodic; use a reflecting pde grid or a periodic potential");
    if (s.initial.kind == ProfileKind::Shear && s.grid && s.grid->boundary == Boundary::Reflecting)
        r.problems.push_back("initial.profile: shear needs a periodic grid");
    if (s.potential.kind == PotentialKind::Table && !s.potential.table.empty() &&
        s.potential.table_spacing > 0.0) {
        const double L = box_length(s)[s.potential.axis];
        const double span = static_cast<double>(s.potential.table.size()) * s.potential.table_spacing;
        if (L > 0.0 && std::abs(span - L) > 1e-9 * L)
            r.problems.push_back("potential.table: entries times spacing must equal the box length");
    }
    if (s.potential.kind == PotentialKind::Sinusoidal && s.potential.axis < 3 &&
        !s.potential.wavelength && !(box_length(s)[s.potential.axis] > 0.0))
        r.problems.push_back("potential.axis: sinusoidal potential along an inactive axis needs a wavelength");
    if (!r.problems.empty()) throw ConfigError(r.problems);
    s.params.potential = make_potential(s.potential, box_length(s));
    return s;
}

inline ExperimentSpec parse_spec_text(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError({std::string("document: YAML syntax error: ") + e.what()});
    }
    return parse_spec(root);
}

inline ExperimentSpec load_spec(const std::filesystem::path& file) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(file.string());
    } catch (const YAML::BadFile&) {
        throw ConfigError({"file: cannot open " + file.string()});
    } catch (const YAML::Exception& e) {
        throw ConfigError({std::string("document: YAML syntax error: ") + e.what()});
    }
    return parse_spec(root);
}

}  // namespace kinhydro
