#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "telepit/errors.hpp"
#include "telepit/field_io.hpp"
#include "telepit/grid.hpp"
#include "telepit/synth.hpp"

namespace telepit {

inline constexpr int dataset_manifest_version = 1;

namespace detail {

inline std::string sample_stem(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "s%05zu", index);
    return buf;
}

inline nlohmann::json box_to_json(const BoxRegion& box, const Grid& grid) {
    return {{"lat_lo_deg", box.lat_lo_deg}, {"lat_hi_deg", box.lat_hi_deg},
            {"lon_lo_deg", box.lon_lo_deg}, {"lon_hi_deg", box.lon_hi_deg},
            {"rows", box.rows(grid)},       {"cols", box.cols(grid)}};
}

inline const char* split_name(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    default: return "test";
    }
}

} // namespace detail

/// Write every sample as TPIT files plus a JSON manifest. Rerunning with
/// the same dataset produces byte-identical files (no timestamps).
inline void write_dataset(const Dataset& ds, const SynthConfig& cfg, std::uint64_t seed,
                          const std::filesystem::path& dir) {
    if (ds.samples.empty()) throw DataError("write_dataset: empty dataset");
    std::filesystem::create_directories(dir / "samples");
    nlohmann::json splits = {{"train", nlohmann::json::array()},
                             {"val", nlohmann::json::array()},
                             {"test", nlohmann::json::array()}};
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const std::string stem = detail::sample_stem(i);
        write_field(ds.samples[i].input, dir / "samples" / (stem + ".input.tpit"));
        write_field(ds.samples[i].target1, dir / "samples" / (stem + ".t1.tpit"));
        write_field(ds.samples[i].target2, dir / "samples" / (stem + ".t2.tpit"));
        splits[detail::split_name(ds.split_of[i])].push_back(i);
    }
    const Grid& grid = ds.samples[0].input.grid;
    nlohmann::json manifest;
    manifest["format_version"] = dataset_manifest_version;
    manifest["seed"] = seed;
    manifest["generator"] = {{"variables", cfg.variables},
                             {"lat", cfg.lat},
                             {"lon", cfg.lon},
                             {"samples", cfg.samples},
                             {"train_frac", cfg.train_frac},
                             {"val_frac", cfg.val_frac},
                             {"test_frac", cfg.test_frac},
                             {"teleconnection_strength", cfg.teleconnection_strength},
                             {"noise_std", cfg.noise_std},
                             {"band_amp", cfg.band_amp},
                             {"wave_amp", cfg.wave_amp},
                             {"mode_amp", cfg.mode_amp}};
    manifest["var_names"] = ds.samples[0].input.var_names;
    manifest["splits"] = splits;
    manifest["boxes"] = {{"tropical", detail::box_to_json(tropical_box(), grid)},
                         {"extratropical", detail::box_to_json(extratropical_box(), grid)}};
    std::ofstream os(dir / "manifest.json", std::ios::trunc);
    if (!os) throw DataError("write_dataset: cannot write manifest");
    os << manifest.dump(2) << "\n";
}

struct LoadedDataset {
    Dataset data;
    nlohmann::json manifest;
};

inline LoadedDataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw DataError("load_dataset: no manifest in " + dir.string());
    nlohmann::json manifest = nlohmann::json::parse(is, nullptr, false);
    if (manifest.is_discarded()) throw DataError("load_dataset: corrupt manifest");
    if (manifest.at("format_version").get<int>() != dataset_manifest_version)
        throw DataError("load_dataset: unsupported manifest version");

    LoadedDataset out;
    out.manifest = manifest;
    const std::size_t total = manifest.at("generator").at("samples").get<std::size_t>();
    out.data.samples.resize(total);
    out.data.split_of.assign(total, Split::train);
    for (const auto& [name, split] :
         {std::pair<const char*, Split>{"train", Split::train}, {"val", Split::val}, {"test", Split::test}}) {
        for (const auto& idx : manifest.at("splits").at(name)) {
            const std::size_t i = idx.get<std::size_t>();
            if (i >= total) throw DataError("load_dataset: split index out of range");
            out.data.split_of[i] = split;
        }
    }
    for (std::size_t i = 0; i < total; ++i) {
        const std::string stem = detail::sample_stem(i);
        out.data.samples[i].input = read_field(dir / "samples" / (stem + ".input.tpit"));
        out.data.samples[i].target1 = read_field(dir / "samples" / (stem + ".t1.tpit"));
        out.data.samples[i].target2 = read_field(dir / "samples" / (stem + ".t2.tpit"));
    }
    return out;
}

/// Region cells as stored in the manifest.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> manifest_box_cells(
    const nlohmann::json& manifest, const std::string& box_name) {
    const auto& box = manifest.at("boxes").at(box_name);
    return {box.at("rows").get<std::vector<std::size_t>>(),
            box.at("cols").get<std::vector<std::size_t>>()};
}

} // namespace telepit
