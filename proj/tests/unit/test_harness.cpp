#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <gtest/gtest.h>

#include "kinhydro/harness.hpp"

using namespace kinhydro;
namespace kh = kinhydro::harness;
namespace fs = std::filesystem;

namespace {

const char* pde_spec = R"(
name: trap
mode: pde
t_end: 5e-11 s
grid:
  cells: [32]
  h: 2e-7 cm
  boundary: reflecting
initial:
  profile: barometric
  occupation: 0.3
  Theta: 300 K
potential:
  kind: harmonic
  stiffness: 2e-3 erg/cm^2
)";

const char* micro_spec = R"(
name: ring
mode: micro
seed: 11
ensemble: 40
t_end: 2e-13 s
model:
  eps: 1e-21 g*cm/s
lattice:
  extent: [32]
  cell: 4
initial:
  profile: gaussian-bump
  occupation: 0.4
  amplitude: 0.2
  width: 4e-8 cm
potential:
  kind: sinusoidal
  amplitude: 1e-15 erg
)";

std::vector<std::string> problems_of(const std::string& text) {
    try {
        parse_spec_text(text);
    } catch (const ConfigError& e) {
        return e.problems();
    }
    return {};
}

bool mentions(const std::vector<std::string>& v, const std::string& key) {
    return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(key) != std::string::npos; });
}

std::string slurp(const fs::path& f) {
    std::ifstream in(f, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("kinhydro_test_" + name);
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST(Units, ConvertsToCgs) {
    EXPECT_DOUBLE_EQ(units::parse_quantity("300 K")->value, 300.0);
    EXPECT_DOUBLE_EQ(units::parse_quantity("1.5 nm")->value, 1.5e-7);
    EXPECT_DOUBLE_EQ(units::parse_quantity("2 J")->value, 2e7);
    EXPECT_DOUBLE_EQ(units::parse_quantity("25 ps")->value, 25e-12);
    const auto kB = units::parse_quantity("1.380649e-16 erg/K");
    EXPECT_DOUBLE_EQ(kB->value, 1.380649e-16);
    EXPECT_EQ(kB->dim, units::heat_capacity);
    EXPECT_EQ(units::parse_quantity("6.6e-19 g*cm/s")->dim, units::momentum);
    EXPECT_EQ(units::parse_quantity("1 g*cm^-3")->dim, units::density);
    EXPECT_EQ(units::parse_quantity("1 erg/cm^2")->dim, units::stiffness);
    EXPECT_EQ(units::parse_quantity("0.25")->dim, units::dimensionless);
    EXPECT_NEAR(units::parse_quantity("1 kg*m^2/s^2")->value, 1e7, 1e-6);
}

TEST(Units, RejectsMalformedText) {
    EXPECT_FALSE(units::parse_quantity("3 furlongs"));
    EXPECT_FALSE(units::parse_quantity("fast"));
    EXPECT_FALSE(units::parse_quantity("1 cm/"));
    EXPECT_FALSE(units::parse_quantity("1 cm^x"));
    EXPECT_FALSE(units::parse_quantity(""));
}

TEST(Config, ParsesPdeSpec) {
    const auto s = parse_spec_text(pde_spec);
    EXPECT_EQ(s.mode, Mode::Pde);
    EXPECT_EQ(s.name, "trap");
    EXPECT_DOUBLE_EQ(s.t_end, 5e-11);
    ASSERT_TRUE(s.grid);
    EXPECT_EQ(s.grid->dims, 1u);
    EXPECT_EQ(s.grid->cells[0], 32u);
    EXPECT_DOUBLE_EQ(s.grid->h, 2e-7);
    EXPECT_EQ(s.grid->boundary, Boundary::Reflecting);
    EXPECT_EQ(s.initial.kind, ProfileKind::Barometric);
    // Harmonic trap centred in the 6.4e-6 cm box.
    EXPECT_DOUBLE_EQ(s.params.potential({3.2e-6, 0, 0}, 0.0), 0.0);
    EXPECT_NEAR(s.params.potential({4.2e-6, 0, 0}, 0.0), 1e-15, 1e-24);
}

TEST(Config, ListsEveryOffendingField) {
    const auto p = problems_of(R"(
name: broken
mode: pde
grid:
  cells: [32]
  h: 2e-7 s
  boundry: periodic
initial:
  occupation: 1.5
  Theta: 300 cm
)");
    EXPECT_GE(p.size(), 5u);
    EXPECT_TRUE(mentions(p, "t_end: missing"));
    EXPECT_TRUE(mentions(p, "grid.h"));
    EXPECT_TRUE(mentions(p, "grid.boundry: unknown key"));
    EXPECT_TRUE(mentions(p, "initial.occupation"));
    EXPECT_TRUE(mentions(p, "initial.Theta"));
}

TEST(Config, MicroRunsNeedSeedAndLattice) {
    const auto p = problems_of("name: x\nmode: micro\nensemble: 10\nt_end: 1 ps\n");
    EXPECT_TRUE(mentions(p, "seed"));
    EXPECT_TRUE(mentions(p, "lattice: missing"));
}

TEST(Config, RejectsUnknownModeAndBadUnits) {
    EXPECT_TRUE(mentions(problems_of("name: x\nmode: warp\n"), "mode"));
    const auto p = problems_of(std::string(micro_spec) + "\n" + "model_extra: 1\n");
    EXPECT_TRUE(mentions(p, "model_extra: unknown key"));
    EXPECT_TRUE(mentions(problems_of("name: x\nmode: pde\nt_end: 3 furlongs\ngrid: {cells: [8], h: 1 nm}\n"),
                         "t_end: cannot parse"));
}

TEST(Config, NonPeriodicPotentialOnPeriodicBoxIsRejected) {
    const auto p = problems_of(R"(
name: ramp
mode: pde
t_end: 1 ps
grid: {cells: [16], h: 1 nm}
potential: {kind: linear, gradient: 1e-8 erg/cm}
)");
    EXPECT_TRUE(mentions(p, "potential.kind"));
}

TEST(Config, YamlSyntaxErrorIsAConfigError) {
    EXPECT_THROW(parse_spec_text("name: [unclosed\n"), ConfigError);
    EXPECT_THROW(load_spec("/nonexistent/spec.yaml"), ConfigError);
}

TEST(Potential, TableInterpolatesPeriodically) {
    PotentialSpec ps;
    ps.kind = PotentialKind::Table;
    ps.table = {1.0, 3.0, 5.0, 3.0};
    ps.table_spacing = 2.0;
    const auto phi = make_potential(ps, {8.0, 0, 0});
    EXPECT_DOUBLE_EQ(phi({1.0, 0, 0}, 0), 1.0);
    EXPECT_DOUBLE_EQ(phi({5.0, 0, 0}, 0), 5.0);
    EXPECT_DOUBLE_EQ(phi({2.0, 0, 0}, 0), 2.0);
    EXPECT_DOUBLE_EQ(phi({8.0, 0, 0}, 0), 2.0);   // between the last and first node
    EXPECT_DOUBLE_EQ(phi({9.0, 0, 0}, 0), 1.0);   // wraps
    EXPECT_DOUBLE_EQ(phi({-1.0, 0, 0}, 0), phi({7.0, 0, 0}, 0));
}

TEST(Snapshot, BinaryRoundTripAndCsvHeader) {
    Snapshot s;
    s.dims = {3, 2, 1};
    s.h = 1e-7;
    s.time = 4e-12;
    s.resize();
    for (std::size_t c = 0; c < 5; ++c)
        s.set(c, HydroSite{0.1 * c, 2.0, {1, 2, 3}, 300.0 + c, 7.0}, -1e-15);
    const fs::path dir = scratch("snap");
    fs::create_directories(dir);
    write_binary(s, dir / "s.bin");
    const Snapshot t = read_binary(dir / "s.bin");
    EXPECT_EQ(t.dims, s.dims);
    EXPECT_EQ(t.h, s.h);
    EXPECT_EQ(t.time, s.time);
    for (std::size_t f = 0; f < s.fields.size(); ++f)
        for (std::size_t c = 0; c < s.cells(); ++c) {
            if (std::isnan(s.fields[f][c])) EXPECT_TRUE(std::isnan(t.fields[f][c]));
            else EXPECT_EQ(t.fields[f][c], s.fields[f][c]);
        }
    write_csv(s, dir / "s.csv");
    std::ifstream in(dir / "s.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "x,y,z,rho,e,u_x,u_y,u_z,Theta,P,phi");
    std::ofstream(dir / "junk.bin") << "not a snapshot";
    EXPECT_THROW(read_binary(dir / "junk.bin"), Error);
}

TEST(Run, BarometricPdeRunIsStationaryAndConservative) {
    kh::RunOptions o;
    o.write_files = false;
    const auto r = kh::run(parse_spec_text(pde_spec), o).report;
    EXPECT_TRUE(r.pass());
    ASSERT_EQ(r.checks.size(), 1u);
    EXPECT_EQ(r.checks[0].name, "pde.stationarity_residual");
    ASSERT_GE(r.ledgers.size(), 2u);
    EXPECT_LE(r.ledgers[0].value, 1e-12);

    // Halving h on the same box must cut the residual by about four.
    auto fine = YAML::Load(pde_spec);
    fine["grid"]["cells"] = std::vector<int>{64};
    fine["grid"]["h"] = "1e-7 cm";
    const auto rf = kh::run(parse_spec(fine), o).report;
    EXPECT_TRUE(rf.pass());
    EXPECT_GE(r.checks[0].value / rf.checks[0].value, 3.0)
        << r.checks[0].value << " vs " << rf.checks[0].value;
}

TEST(Run, MicroOutputsAreByteIdenticalForFixedSeed) {
    const auto spec = parse_spec_text(micro_spec);
    kh::RunOptions a, b, c;
    a.out = scratch("det_a");
    b.out = scratch("det_b");
    b.threads = 3;
    c.out = scratch("det_c");
    c.seed = 12;
    const auto ra = kh::run(spec, a), rb = kh::run(spec, b), rc = kh::run(spec, c);
    EXPECT_TRUE(ra.report.pass());
    ASSERT_EQ(ra.files.size(), rb.files.size());
    ASSERT_EQ(ra.files.size(), 5u);  // two snapshots in two formats plus the report
    for (std::size_t i = 0; i < ra.files.size(); ++i) {
        EXPECT_EQ(ra.files[i].filename(), rb.files[i].filename());
        EXPECT_EQ(slurp(ra.files[i]), slurp(rb.files[i])) << ra.files[i];
    }
    EXPECT_NE(slurp(*a.out / "micro_final.bin"), slurp(*c.out / "micro_final.bin"));
}

TEST(Run, MicroLedgersHold) {
    kh::RunOptions o;
    o.write_files = false;
    const auto r = kh::run(parse_spec_text(micro_spec), o).report;
    ASSERT_EQ(r.ledgers.size(), 4u);
    EXPECT_EQ(r.ledgers[0].name, "micro.mass_change");
    EXPECT_EQ(r.ledgers[0].value, 0.0);
    for (const auto& l : r.ledgers) EXPECT_TRUE(l.pass) << l.name << " " << l.value;
    EXPECT_GT(r.details["micro"]["hops"].get<std::size_t>(), 0u);
}

TEST(Run, SmallCompareProducesFieldErrors) {
    const auto spec = parse_spec_text(R"(
name: small-compare
mode: compare
seed: 3
ensemble: 200
t_end: 2e-12 s
model: {eps: 1e-21 g*cm/s}
lattice: {extent: [64]}
initial: {profile: gaussian-bump, occupation: 0.5, amplitude: 0.08, width: 8e-8 cm}
compare: {cell: 8, tolerance: 0.05, doublings: 1}
)");
    kh::RunOptions o;
    o.write_files = false;
    const auto r = kh::run(spec, o).report;
    ASSERT_FALSE(r.errors.empty());
    EXPECT_EQ(r.errors[0].field, "rho");
    for (const auto& e : r.errors) {
        EXPECT_GE(e.l2, 0.0);
        EXPECT_GE(e.linf, 0.0);
    }
    EXPECT_EQ(r.details["ladder"].size(), 2u);
    for (const auto& l : r.ledgers) EXPECT_TRUE(l.pass) << l.name;
}

TEST(Run, MissingSeedOverrideIsRejected) {
    auto spec = parse_spec_text(micro_spec);
    spec.seed.reset();
    kh::RunOptions o;
    o.write_files = false;
    EXPECT_THROW(kh::run(spec, o), ConfigError);
}

TEST(Report, AnyLedgerBreachFailsTheRun) {
    kh::ComparisonReport r;
    r.ledgers.push_back({"mass", 0.0, 0.0, true, ""});
    EXPECT_TRUE(r.pass());
    r.ledgers.push_back({"energy", 1.0, 1e-12, false, ""});
    EXPECT_FALSE(r.pass());
    EXPECT_FALSE(r.to_json()["pass"].get<bool>());
}

TEST(Reductions, FiftyRandomTrialsAreExact) {
    const auto r = kh::validate_reductions(50, 2024);
    EXPECT_TRUE(r.pass());
    EXPECT_EQ(r.details["phi0_exact_trials"].get<std::size_t>(), 50u);
    EXPECT_EQ(r.details["u0_exact_trials"].get<std::size_t>(), 50u);
}

TEST(Bounds, EveryBoundHasItsScaling) {
    const auto r = kh::bounds_report();
    ASSERT_EQ(r.checks.size(), 8u);
    for (const auto& c : r.checks) EXPECT_TRUE(c.pass) << c.name << " " << c.value;
    EXPECT_EQ(r.details["table"].size(), 8u);
}
