#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "telepit/errors.hpp"
#include "telepit/grid.hpp"

namespace telepit {

// TPIT field file, bit-exact layout:
//   bytes 0-3   magic "TPIT"
//   bytes 4-7   version = 1, u32 little-endian
//   bytes 8-19  C, H, W as u32 little-endian
//   then C*H*W IEEE-754 f32 little-endian in (variable, latitude, longitude)
//   row-major order, latitudes south to north, longitudes west to east.
// A JSON sidecar <path>.meta.json carries var_names and the lat/lon arrays
// in degrees; the binary file is authoritative for values.

namespace detail {

inline constexpr std::array<char, 4> tpit_magic = {'T', 'P', 'I', 'T'};
inline constexpr std::uint32_t tpit_version = 1;

inline void put_u32(std::ostream& os, std::uint32_t v) {
    std::array<unsigned char, 4> b{static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                   static_cast<unsigned char>(v >> 16),
                                   static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b.data()), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    std::array<unsigned char, 4> b{};
    if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw DataError("TPIT: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

inline double rad_to_deg(double r) { return r * 180.0 / std::numbers::pi; }
inline double deg_to_rad(double d) { return d * std::numbers::pi / 180.0; }

} // namespace detail

inline void write_field(const Field& field, const std::filesystem::path& path) {
    field.check_consistent();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("write_field: cannot open " + path.string());
    os.write(detail::tpit_magic.data(), 4);
    detail::put_u32(os, detail::tpit_version);
    detail::put_u32(os, static_cast<std::uint32_t>(field.n_vars()));
    detail::put_u32(os, static_cast<std::uint32_t>(field.grid.h));
    detail::put_u32(os, static_cast<std::uint32_t>(field.grid.w));
    for (double v : field.values.values()) detail::put_f32(os, static_cast<float>(v));
    if (!os) throw DataError("write_field: write failure on " + path.string());
    os.close();

    nlohmann::json meta;
    meta["var_names"] = field.var_names;
    std::vector<double> lat_deg, lon_deg;
    for (double r : field.grid.latitudes) lat_deg.push_back(detail::rad_to_deg(r));
    for (double r : field.grid.longitudes) lon_deg.push_back(detail::rad_to_deg(r));
    meta["latitudes_deg"] = lat_deg;
    meta["longitudes_deg"] = lon_deg;
    std::ofstream ms(path.string() + ".meta.json", std::ios::trunc);
    ms << meta.dump(2) << "\n";
}

inline Field read_field(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("read_field: cannot open " + path.string());
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), 4) || magic != detail::tpit_magic)
        throw DataError("read_field: not a TPIT file: " + path.string());
    const std::uint32_t version = detail::get_u32(is);
    if (version != detail::tpit_version)
        throw DataError("read_field: unsupported TPIT version " + std::to_string(version));
    const std::uint32_t c = detail::get_u32(is);
    const std::uint32_t h = detail::get_u32(is);
    const std::uint32_t w = detail::get_u32(is);
    if (c == 0 || h < 3 || w < 4) throw DataError("read_field: bad dimensions in " + path.string());
    const std::uint64_t n = static_cast<std::uint64_t>(c) * h * w;
    if (n > (1ull << 32)) throw DataError("read_field: dimension overflow in " + path.string());

    std::vector<unsigned char> payload(n * 4);
    if (!is.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size())))
        throw DataError("read_field: truncated payload in " + path.string());

    Field f;
    f.grid = make_grid(h, w);
    f.values = Tensor({c, h, w});
    for (std::uint64_t i = 0; i < n; ++i) {
        std::uint32_t bits = static_cast<std::uint32_t>(payload[4 * i]) |
                             (static_cast<std::uint32_t>(payload[4 * i + 1]) << 8) |
                             (static_cast<std::uint32_t>(payload[4 * i + 2]) << 16) |
                             (static_cast<std::uint32_t>(payload[4 * i + 3]) << 24);
        float v;
        std::memcpy(&v, &bits, 4);
        f.values[i] = static_cast<double>(v);
    }
    if (!f.values.all_finite()) throw DataError("read_field: non-finite values in " + path.string());

    // Sidecar provides names and (for restricted-span fixtures) coordinates.
    f.var_names.resize(c);
    for (std::uint32_t v = 0; v < c; ++v) f.var_names[v] = "v" + std::to_string(v);
    const std::filesystem::path meta_path = path.string() + ".meta.json";
    if (std::filesystem::exists(meta_path)) {
        std::ifstream ms(meta_path);
        nlohmann::json meta = nlohmann::json::parse(ms, nullptr, true);
        if (meta.contains("var_names")) {
            auto names = meta["var_names"].get<std::vector<std::string>>();
            if (names.size() == c) f.var_names = std::move(names);
        }
        if (meta.contains("latitudes_deg")) {
            auto lat = meta["latitudes_deg"].get<std::vector<double>>();
            if (lat.size() == h) {
                double mean_cos = 0.0;
                for (std::size_t i = 0; i < h; ++i) {
                    f.grid.latitudes[i] = detail::deg_to_rad(lat[i]);
                    f.grid.weights[i] = std::cos(f.grid.latitudes[i]);
                    mean_cos += f.grid.weights[i];
                }
                mean_cos /= static_cast<double>(h);
                for (auto& wt : f.grid.weights) wt /= mean_cos;
            }
        }
        if (meta.contains("longitudes_deg")) {
            auto lon = meta["longitudes_deg"].get<std::vector<double>>();
            if (lon.size() == w)
                for (std::size_t j = 0; j < w; ++j) f.grid.longitudes[j] = detail::deg_to_rad(lon[j]);
        }
    }
    return f;
}

} // namespace telepit
