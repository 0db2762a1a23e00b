#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "telepit/errors.hpp"
#include "telepit/grid.hpp"
#include "telepit/model.hpp"

namespace telepit {

// TPCK checkpoint layout:
//   bytes 0-3  magic "TPCK"
//   bytes 4-7  version = 1, u32 little-endian
//   bytes 8-15 header length, u64 little-endian
//   JSON header: config, fingerprint, normalization stats, ordered list of
//   parameter groups with shapes
//   then the parameter blocks as f64 little-endian in header order.

namespace detail {

inline constexpr std::array<char, 4> tpck_magic = {'T', 'P', 'C', 'K'};
inline constexpr std::uint32_t tpck_version = 1;

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace detail

/// Hash of every shape-determining configuration field. A checkpoint only
/// loads against data and configs with the same fingerprint.
inline std::string config_fingerprint(const ModelConfig& cfg) {
    const std::string key = std::to_string(cfg.n_vars) + "|" + std::to_string(cfg.lat) + "|" +
                            std::to_string(cfg.lon) + "|" + std::to_string(cfg.embed_dim) + "|" +
                            std::to_string(cfg.levels) + "|" + std::to_string(cfg.heads) + "|" +
                            std::to_string(cfg.patterns);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(detail::fnv1a64(key)));
    return buf;
}

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    return {{"n_vars", cfg.n_vars},   {"lat", cfg.lat},
            {"lon", cfg.lon},         {"embed_dim", cfg.embed_dim},
            {"levels", cfg.levels},   {"heads", cfg.heads},
            {"patterns", cfg.patterns}, {"lambda", cfg.lambda},
            {"gamma", cfg.gamma},     {"ode_steps", cfg.ode_steps},
            {"ode_dt", cfg.ode_dt}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.n_vars = j.at("n_vars").get<std::size_t>();
    cfg.lat = j.at("lat").get<std::size_t>();
    cfg.lon = j.at("lon").get<std::size_t>();
    cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
    cfg.levels = j.at("levels").get<std::size_t>();
    cfg.heads = j.at("heads").get<std::size_t>();
    cfg.patterns = j.at("patterns").get<std::size_t>();
    cfg.lambda = j.at("lambda").get<double>();
    cfg.gamma = j.at("gamma").get<double>();
    cfg.ode_steps = j.at("ode_steps").get<std::size_t>();
    cfg.ode_dt = j.at("ode_dt").get<double>();
    return cfg;
}

inline void save_checkpoint(ModelParams& params, const NormStats& stats,
                            const std::filesystem::path& path) {
    nlohmann::json header;
    header["config"] = model_config_to_json(params.cfg);
    header["fingerprint"] = config_fingerprint(params.cfg);
    header["norm_stats"] = {{"mean", stats.mean}, {"std", stats.std_dev}};
    nlohmann::json groups = nlohmann::json::array();
    auto registry = param_registry(params);
    for (auto& [name, tensor] : registry)
        groups.push_back({{"name", name}, {"shape", tensor->shape()}});
    header["params"] = groups;
    const std::string header_str = header.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("save_checkpoint: cannot open " + path.string());
    os.write(detail::tpck_magic.data(), 4);
    const std::uint32_t version = detail::tpck_version;
    os.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint64_t hlen = header_str.size();
    os.write(reinterpret_cast<const char*>(&hlen), 8);
    os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (auto& [name, tensor] : registry)
        os.write(reinterpret_cast<const char*>(tensor->data()),
                 static_cast<std::streamsize>(tensor->size() * sizeof(double)));
    if (!os) throw DataError("save_checkpoint: write failure on " + path.string());
}

struct Checkpoint {
    ModelParams params;
    NormStats stats;
};

/// Load a checkpoint; if `expected` is given, its fingerprint must match.
inline Checkpoint load_checkpoint(const std::filesystem::path& path,
                                  const ModelConfig* expected = nullptr) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("load_checkpoint: cannot open " + path.string());
    std::array<char, 4> magic{};
    if (!is.read(magic.data(), 4) || magic != detail::tpck_magic)
        throw DataError("load_checkpoint: not a TPCK file: " + path.string());
    std::uint32_t version = 0;
    if (!is.read(reinterpret_cast<char*>(&version), 4) || version != detail::tpck_version)
        throw DataError("load_checkpoint: unsupported version");
    std::uint64_t hlen = 0;
    if (!is.read(reinterpret_cast<char*>(&hlen), 8) || hlen > (1ull << 24))
        throw DataError("load_checkpoint: bad header length");
    std::string header_str(hlen, '\0');
    if (!is.read(header_str.data(), static_cast<std::streamsize>(hlen)))
        throw DataError("load_checkpoint: truncated header");
    nlohmann::json header = nlohmann::json::parse(header_str, nullptr, false);
    if (header.is_discarded()) throw DataError("load_checkpoint: corrupt header JSON");

    const ModelConfig cfg = model_config_from_json(header.at("config"));
    if (header.at("fingerprint").get<std::string>() != config_fingerprint(cfg))
        throw DataError("load_checkpoint: fingerprint does not match stored config");
    if (expected && config_fingerprint(*expected) != config_fingerprint(cfg))
        throw DataError("load_checkpoint: checkpoint fingerprint mismatch (expected config differs)");

    Checkpoint out;
    // Rebuild the parameter skeleton, then overwrite every block.
    out.params = make_model(cfg, make_grid(cfg.lat, cfg.lon), Rng(0));
    out.stats.mean = header.at("norm_stats").at("mean").get<std::vector<double>>();
    out.stats.std_dev = header.at("norm_stats").at("std").get<std::vector<double>>();

    auto registry = param_registry(out.params);
    const auto& groups = header.at("params");
    if (groups.size() != registry.size())
        throw DataError("load_checkpoint: parameter group count mismatch");
    for (std::size_t p = 0; p < registry.size(); ++p) {
        const auto& g = groups[p];
        if (g.at("name").get<std::string>() != registry[p].first)
            throw DataError("load_checkpoint: parameter group order mismatch at " +
                            registry[p].first);
        if (g.at("shape").get<std::vector<std::size_t>>() != registry[p].second->shape())
            throw DataError("load_checkpoint: shape mismatch for " + registry[p].first);
        if (!is.read(reinterpret_cast<char*>(registry[p].second->data()),
                     static_cast<std::streamsize>(registry[p].second->size() * sizeof(double))))
            throw DataError("load_checkpoint: truncated checkpoint at " + registry[p].first);
    }
    return out;
}

} // namespace telepit
