#pragma once
/// @file snapshot.hpp
/// @brief Field snapshots as CSV and as a flat binary file with a
/// self-describing header.
///
/// Binary layout: the 8 bytes "KHSNAP01", a little-endian uint64 header
/// length, a JSON header (fields, dims, dtype, spacing, time), then every
/// field as contiguous little-endian float64 values, x fastest.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinhydro/errors.hpp"
#include "kinhydro/pde.hpp"
#include "kinhydro/thermo.hpp"

namespace kinhydro {

/// Cell-centred fields on a box of dims[0] x dims[1] x dims[2] cells.
/// Empty cells (no particles in a micro snapshot) hold NaN.
struct Snapshot {
    static constexpr std::array<const char*, 8> field_names{"rho", "e", "u_x", "u_y", "u_z",
                                                             "Theta", "P", "phi"};

    std::array<std::size_t, 3> dims{1, 1, 1};
    double h = 1.0;     ///< cm
    double time = 0.0;  ///< s
    std::array<std::vector<double>, field_names.size()> fields;

    std::size_t cells() const { return dims[0] * dims[1] * dims[2]; }
    std::vector<double>& field(std::size_t i) { return fields[i]; }
    const std::vector<double>& rho() const { return fields[0]; }

    void resize() {
        for (auto& f : fields) f.assign(cells(), std::numeric_limits<double>::quiet_NaN());
    }
    void set(std::size_t c, const HydroSite& s, double phi_erg) {
        const double v[] = {s.rho, s.e, s.u[0], s.u[1], s.u[2], s.Theta, s.P, phi_erg};
        for (std::size_t i = 0; i < fields.size(); ++i) fields[i][c] = v[i];
    }
    Vec3 center(std::size_t c) const {
        const std::size_t i = c % dims[0], j = (c / dims[0]) % dims[1], k = c / (dims[0] * dims[1]);
        return {(static_cast<double>(i) + 0.5) * h, (static_cast<double>(j) + 0.5) * h,
                (static_cast<double>(k) + 0.5) * h};
    }
};

/// Snapshot of a PDE state; phi is Phi (erg) at the cell centres.
inline Snapshot snapshot_of(const HydroState& s, const ModelParams& p) {
    Snapshot out;
    out.dims = s.grid.n;
    out.h = s.grid.h;
    out.time = s.time;
    out.resize();
    const auto phi = cell_potential(s.grid, p, s.time);
    for (std::size_t c = 0; c < s.grid.cells(); ++c)
        out.set(c, primitive_recovery(s, c, phi[c], p), phi[c]);
    return out;
}

/// Snapshot of coarse-grained micro fields; nullopt cells stay NaN.
inline Snapshot snapshot_of(std::span<const std::optional<HydroSite>> cells,
                            std::array<std::size_t, 3> dims, double h, double time,
                            const ModelParams& p) {
    Snapshot out;
    out.dims = dims;
    out.h = h;
    out.time = time;
    out.resize();
    if (cells.size() != out.cells()) throw DomainError("snapshot: cell count mismatch");
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (!cells[c]) continue;
        const HydroSite& h = *cells[c];
        double internal = 1.5 * p.k_B * h.Theta / p.m;
        if (p.keep_kinetic_in_e) internal += 0.5 * dot(h.u, h.u);
        out.set(c, h, p.m * (h.e - internal));
    }
    return out;
}

/// One row per cell: x, y, z, then every field. Values use 17 significant digits.
inline void write_csv(const Snapshot& s, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw Error("cannot write " + file.string());
    out << "x,y,z";
    for (const char* n : Snapshot::field_names) out << ',' << n;
    out << '\n' << std::setprecision(17);
    for (std::size_t c = 0; c < s.cells(); ++c) {
        const Vec3 x = s.center(c);
        out << x[0] << ',' << x[1] << ',' << x[2];
        for (const auto& f : s.fields) out << ',' << f[c];
        out << '\n';
    }
}

inline constexpr char snapshot_magic[8] = {'K', 'H', 'S', 'N', 'A', 'P', '0', '1'};

inline void write_binary(const Snapshot& s, const std::filesystem::path& file) {
    static_assert(std::endian::native == std::endian::little, "binary snapshots assume little endian");
    nlohmann::ordered_json header;
    header["fields"] = Snapshot::field_names;
    header["dims"] = s.dims;
    header["dtype"] = "float64";
    header["byte_order"] = "little";
    header["layout"] = "field-major, x fastest";
    header["spacing_cm"] = s.h;
    header["time_s"] = s.time;
    const std::string text = header.dump();
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error("cannot write " + file.string());
    out.write(snapshot_magic, sizeof snapshot_magic);
    const std::uint64_t n = text.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& f : s.fields)
        out.write(reinterpret_cast<const char*>(f.data()),
                  static_cast<std::streamsize>(f.size() * sizeof(double)));
}

inline Snapshot read_binary(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot read " + file.string());
    char magic[8];
    std::uint64_t n = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!in || std::memcmp(magic, snapshot_magic, sizeof magic) != 0)
        throw Error(file.string() + " is not a snapshot file");
    std::string text(n, '\0');
    in.read(text.data(), static_cast<std::streamsize>(n));
    const auto header = nlohmann::json::parse(text);
    Snapshot s;
    s.dims = header.at("dims").get<std::array<std::size_t, 3>>();
    s.h = header.at("spacing_cm").get<double>();
    s.time = header.at("time_s").get<double>();
    const auto names = header.at("fields").get<std::vector<std::string>>();
    if (names.size() != Snapshot::field_names.size() || header.at("dtype") != "float64")
        throw Error(file.string() + ": unsupported snapshot layout");
    s.resize();
    for (auto& f : s.fields)
        in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(double)));
    if (!in) throw Error(file.string() + ": truncated snapshot");
    return s;
}

}  // namespace kinhydro
