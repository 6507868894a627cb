// Command-line front end: run experiments, certify bounds, check reductions.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include "kinhydro/harness.hpp"

namespace kh = kinhydro::harness;

namespace {

void print(const kh::ComparisonReport& r) {
    std::printf("%s (%s)\n", r.name.c_str(), r.mode.c_str());
    for (const auto& e : r.errors)
        std::printf("  error  %-16s l2 %.4e  linf %.4e\n", e.field.c_str(), e.l2, e.linf);
    const auto lines = [](const char* kind, const std::vector<kh::Check>& v) {
        for (const auto& c : v)
            std::printf("  %-6s [%s] %-40s %.4e (tolerance %.4e)\n", kind, c.pass ? "PASS" : "FAIL",
                        c.name.c_str(), c.value, c.tolerance);
    };
    lines("ledger", r.ledgers);
    lines("check", r.checks);
    std::printf("%s\n", r.pass() ? "PASS" : "FAIL");
}

void save(const kh::ComparisonReport& r, const std::optional<std::string>& out) {
    if (!out) return;
    std::filesystem::create_directories(*out);
    std::ofstream f(std::filesystem::path(*out) / "report.json");
    f << r.to_json().dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lattice-gas and continuum hydrodynamics experiments"};
    app.require_subcommand(1);
    std::string spec_file;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    const auto common = [&](CLI::App* cmd) {
        cmd->add_option("--out", out, "Output directory");
        cmd->add_option("--seed", seed, "Master seed");
        cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    };
    auto* run = app.add_subcommand("run", "Run the experiment described by a spec file");
    run->add_option("spec", spec_file, "Experiment spec (YAML)")->required()->check(CLI::ExistingFile);
    common(run);
    auto* compare = app.add_subcommand("compare", "Run a spec as a micro versus PDE comparison");
    compare->add_option("spec", spec_file, "Experiment spec (YAML)")->required()->check(CLI::ExistingFile);
    common(compare);
    auto* bounds = app.add_subcommand("bounds", "Fit the remainder-bound exponents");
    common(bounds);
    auto* reduce = app.add_subcommand("reduce-check", "Check the Phi = 0 and u = 0 reductions");
    common(reduce);
    CLI11_PARSE(app, argc, argv);

    try {
        kh::ComparisonReport report;
        if (*bounds) {
            report = kh::bounds_report();
            save(report, out);
        } else if (*reduce) {
            report = kh::validate_reductions(50, seed.value_or(1));
            save(report, out);
        } else {
            YAML::Node root;
            try {
                root = YAML::LoadFile(spec_file);
            } catch (const YAML::Exception& e) {
                throw kinhydro::ConfigError({std::string("document: ") + e.what()});
            }
            if (*compare) root["mode"] = "compare";
            kh::RunOptions opt;
            if (out) opt.out = *out;
            opt.seed = seed;
            opt.threads = threads;
            const auto result = kh::run(kinhydro::parse_spec(root), opt);
            report = result.report;
            for (const auto& f : result.files) std::printf("wrote %s\n", f.string().c_str());
        }
        print(report);
        return report.pass() ? 0 : 1;
    } catch (const kinhydro::ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
