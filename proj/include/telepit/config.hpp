#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "telepit/errors.hpp"
#include "telepit/model.hpp"
#include "telepit/synth.hpp"
#include "telepit/train.hpp"

namespace telepit {

/// Run configuration: one JSON document covering data generation, model
/// shape, training and metric options. Every key has a default; unknown
/// keys are a hard error so typos cannot silently fall back.
class RunConfig {
public:
    static nlohmann::json defaults() {
        return nlohmann::json{
            {"seed", 7},
            {"data",
             {{"variables", 3},
              {"lat", 16},
              {"lon", 32},
              {"samples", 640},
              {"train_frac", 0.8},
              {"val_frac", 0.1},
              {"test_frac", 0.1},
              {"teleconnection_strength", 0.8},
              {"noise_std", 0.05},
              {"band_amp", 1.0},
              {"wave_amp", 0.7},
              {"mode_amp", 1.0}}},
            {"model",
             {{"embed_dim", 256},
              {"levels", 2},
              {"heads", 4},
              {"patterns", 8},
              {"lambda", 0.2},
              {"gamma", 0.1},
              {"ode_steps", 2},
              {"ode_dt", 1.0}}},
            {"train",
             {{"batch_size", 16},
              {"learning_rate", 0.01},
              {"epochs", 50},
              {"seed", 7},
              {"beta1", 0.9},
              {"beta2", 0.999},
              {"adam_eps", 1e-8},
              {"threads", 1}}},
            {"metrics", {{"climatology", "train-mean"}}}};
    }

    /// Key descriptions for --help.
    static const std::vector<std::pair<std::string, std::string>>& key_docs() {
        static const std::vector<std::pair<std::string, std::string>> docs{
            {"seed", "dataset generation seed"},
            {"data.variables", "number of variables C"},
            {"data.lat", "latitude count H"},
            {"data.lon", "longitude count W"},
            {"data.samples", "total sample count"},
            {"data.train_frac", "train split fraction"},
            {"data.val_frac", "validation split fraction"},
            {"data.test_frac", "test split fraction"},
            {"data.teleconnection_strength", "planted teleconnection strength rho in [0,1]"},
            {"data.noise_std", "observation noise standard deviation"},
            {"data.band_amp", "zonal band state amplitude"},
            {"data.wave_amp", "traveling wave amplitude"},
            {"data.mode_amp", "teleconnection mode amplitude"},
            {"model.embed_dim", "token width D (divisible by 4 and by heads)"},
            {"model.levels", "decomposition levels L (L+1 bands)"},
            {"model.heads", "attention heads"},
            {"model.patterns", "teleconnection pattern count n_p"},
            {"model.lambda", "teleconnection bias weight lambda"},
            {"model.gamma", "ODE rate clamp gamma"},
            {"model.ode_steps", "Euler steps per band"},
            {"model.ode_dt", "Euler step size"},
            {"train.batch_size", "mini-batch size"},
            {"train.learning_rate", "Adam learning rate"},
            {"train.epochs", "training epochs"},
            {"train.seed", "training seed (init and shuffling)"},
            {"train.beta1", "Adam beta1"},
            {"train.beta2", "Adam beta2"},
            {"train.adam_eps", "Adam epsilon"},
            {"train.threads", "worker threads for batch gradients (bit-stable for any value)"},
            {"metrics.climatology", "climatology source; supported: train-mean"},
        };
        return docs;
    }

    RunConfig() : values_(defaults()) {}

    static RunConfig from_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("config: cannot open " + path);
        nlohmann::json user = nlohmann::json::parse(is, nullptr, false);
        if (user.is_discarded()) throw ConfigError("config: invalid JSON in " + path);
        RunConfig cfg;
        cfg.merge(user, "");
        return cfg;
    }

    /// Apply a dotted override such as "train.learning_rate=0.001".
    void apply_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: override must look like key.path=value: " + assignment);
        const std::string key = assignment.substr(0, eq);
        const std::string raw = assignment.substr(eq + 1);
        nlohmann::json* slot = find(key);
        if (!slot) throw ConfigError("config: unknown key '" + key + "'");
        if (slot->is_string()) {
            *slot = raw;
            return;
        }
        nlohmann::json parsed = nlohmann::json::parse(raw, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_number())
            throw ConfigError("config: cannot parse numeric value for '" + key + "': " + raw);
        if (slot->is_number_integer() && !parsed.is_number_integer())
            throw ConfigError("config: key '" + key + "' expects an integer");
        *slot = parsed;
    }

    const nlohmann::json& json() const { return values_; }

    std::uint64_t data_seed() const { return values_.at("seed").get<std::uint64_t>(); }

    SynthConfig synth_config() const {
        const auto& d = values_.at("data");
        SynthConfig s;
        s.variables = d.at("variables").get<std::size_t>();
        s.lat = d.at("lat").get<std::size_t>();
        s.lon = d.at("lon").get<std::size_t>();
        s.samples = d.at("samples").get<std::size_t>();
        s.train_frac = d.at("train_frac").get<double>();
        s.val_frac = d.at("val_frac").get<double>();
        s.test_frac = d.at("test_frac").get<double>();
        s.teleconnection_strength = d.at("teleconnection_strength").get<double>();
        s.noise_std = d.at("noise_std").get<double>();
        s.band_amp = d.at("band_amp").get<double>();
        s.wave_amp = d.at("wave_amp").get<double>();
        s.mode_amp = d.at("mode_amp").get<double>();
        return s;
    }

    ModelConfig model_config() const {
        const auto& d = values_.at("data");
        const auto& m = values_.at("model");
        ModelConfig c;
        c.n_vars = d.at("variables").get<std::size_t>();
        c.lat = d.at("lat").get<std::size_t>();
        c.lon = d.at("lon").get<std::size_t>();
        c.embed_dim = m.at("embed_dim").get<std::size_t>();
        c.levels = m.at("levels").get<std::size_t>();
        c.heads = m.at("heads").get<std::size_t>();
        c.patterns = m.at("patterns").get<std::size_t>();
        c.lambda = m.at("lambda").get<double>();
        c.gamma = m.at("gamma").get<double>();
        c.ode_steps = m.at("ode_steps").get<std::size_t>();
        c.ode_dt = m.at("ode_dt").get<double>();
        return c;
    }

    TrainConfig train_config() const {
        const auto& t = values_.at("train");
        TrainConfig c;
        c.batch_size = t.at("batch_size").get<std::size_t>();
        c.learning_rate = t.at("learning_rate").get<double>();
        c.epochs = t.at("epochs").get<std::size_t>();
        c.seed = t.at("seed").get<std::uint64_t>();
        c.beta1 = t.at("beta1").get<double>();
        c.beta2 = t.at("beta2").get<double>();
        c.adam_eps = t.at("adam_eps").get<double>();
        c.threads = t.at("threads").get<std::size_t>();
        return c;
    }

    void validate() const {
        synth_config().validate();
        model_config().validate();
        train_config().validate();
        const std::string clim = values_.at("metrics").at("climatology").get<std::string>();
        if (clim != "train-mean")
            throw ConfigError("config: metrics.climatology supports only 'train-mean'");
    }

    static std::string help_text() {
        std::string out = "Configuration keys (JSON file and/or --set key=value):\n";
        const auto defs = defaults();
        for (const auto& [key, doc] : key_docs()) {
            const nlohmann::json* v = find_in(defs, key);
            out += "  " + key + " (default " + v->dump() + "): " + doc + "\n";
        }
        return out;
    }

private:
    static const nlohmann::json* find_in(const nlohmann::json& root, const std::string& key) {
        const nlohmann::json* cur = &root;
        std::size_t pos = 0;
        while (pos <= key.size()) {
            const auto dot = key.find('.', pos);
            const std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
            if (!cur->is_object() || !cur->contains(part)) return nullptr;
            cur = &cur->at(part);
            if (dot == std::string::npos) break;
            pos = dot + 1;
        }
        return cur;
    }

    nlohmann::json* find(const std::string& key) {
        return const_cast<nlohmann::json*>(find_in(values_, key));
    }

    /// Recursive merge of user values over defaults; any path that does not
    /// exist in the defaults is an unknown key.
    void merge(const nlohmann::json& user, const std::string& prefix) {
        if (!user.is_object())
            throw ConfigError("config: expected an object at '" + (prefix.empty() ? "<root>" : prefix) + "'");
        for (auto it = user.begin(); it != user.end(); ++it) {
            const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
            nlohmann::json* slot = find(path);
            if (!slot) throw ConfigError("config: unknown key '" + path + "'");
            if (slot->is_object()) {
                merge(it.value(), path);
            } else {
                if (slot->is_string() != it.value().is_string() ||
                    (slot->is_number() && !it.value().is_number()))
                    throw ConfigError("config: wrong type for key '" + path + "'");
                if (slot->is_number_integer() && !it.value().is_number_integer())
                    throw ConfigError("config: key '" + path + "' expects an integer");
                *slot = it.value();
            }
        }
    }

    nlohmann::json values_;
};

} // namespace telepit
