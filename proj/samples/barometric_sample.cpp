// Library usage: load an experiment file, run it, inspect the report and read
// the final snapshot back.
//
//   barometric_sample [spec.yaml] [out-dir]

#include <cstdio>
#include <exception>
#include <filesystem>

#include "kinhydro/harness.hpp"

int main(int argc, char** argv) {
    namespace fs = std::filesystem;
    const fs::path spec_file = argc > 1 ? argv[1] : KINHYDRO_SAMPLE_SPEC;
    const fs::path out = argc > 2 ? argv[2] : fs::temp_directory_path() / "kinhydro-sample";
    try {
        const kinhydro::ExperimentSpec spec = kinhydro::load_spec(spec_file);

        kinhydro::harness::RunOptions opts;
        opts.out = out;
        const auto result = kinhydro::harness::run(spec, opts);

        for (const auto& l : result.report.ledgers)
            std::printf("%-28s %.3e (limit %.1e)\n", l.name.c_str(), l.value, l.tolerance);
        for (const auto& c : result.report.checks)
            std::printf("%-28s %.3e (limit %.1e)\n", c.name.c_str(), c.value, c.tolerance);

        const fs::path final_snapshot = out / "pde_final.bin";
        if (fs::exists(final_snapshot)) {
            const kinhydro::Snapshot s = kinhydro::read_binary(final_snapshot);
            std::printf("final snapshot: %zu cells at t = %.3e s, rho[0] = %.6e g/cm^3\n", s.cells(), s.time,
                        s.rho()[0]);
        }
        std::printf("%s\n", result.report.pass() ? "PASS" : "FAIL");
        return result.report.pass() ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
