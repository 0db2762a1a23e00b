// Command-line interface: data generation, training, evaluation, prediction,
// gradient checking and lambda sweeps over one JSON configuration.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "telepit/checkpoint.hpp"
#include "telepit/config.hpp"
#include "telepit/dataset_io.hpp"
#include "telepit/errors.hpp"
#include "telepit/evaluate.hpp"
#include "telepit/gradcheck.hpp"
#include "telepit/train.hpp"

namespace fs = std::filesystem;
using namespace telepit;

namespace {

RunConfig build_config(const std::string& config_path, const std::vector<std::string>& overrides) {
    RunConfig cfg = config_path.empty() ? RunConfig() : RunConfig::from_file(config_path);
    for (const auto& o : overrides) cfg.apply_override(o);
    cfg.validate();
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write " + path.string());
    os << text;
}

void write_resolved_config(const RunConfig& cfg, const fs::path& dir) {
    write_text(dir / "resolved_config.json", cfg.json().dump(2) + "\n");
}

int cmd_gen_data(const RunConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    Dataset ds = synth_dataset(cfg.synth_config(), Rng(cfg.data_seed()));
    write_dataset(ds, cfg.synth_config(), cfg.data_seed(), out_dir);
    write_resolved_config(cfg, out_dir);
    std::cout << "wrote " << ds.samples.size() << " samples to " << out_dir.string() << "\n";
    return exit_code::ok;
}

/// Dataset dimensions always come from the manifest when training against
/// an existing directory.
ModelConfig model_config_for_data(const RunConfig& cfg, const nlohmann::json& manifest) {
    ModelConfig mcfg = cfg.model_config();
    const auto& gen = manifest.at("generator");
    mcfg.n_vars = gen.at("variables").get<std::size_t>();
    mcfg.lat = gen.at("lat").get<std::size_t>();
    mcfg.lon = gen.at("lon").get<std::size_t>();
    mcfg.validate();
    return mcfg;
}

int cmd_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    LoadedDataset loaded = load_dataset(data_dir);
    const ModelConfig mcfg = model_config_for_data(cfg, loaded.manifest);
    TrainOutput result = train(loaded.data, mcfg, cfg.train_config());
    save_checkpoint(result.params, result.stats, out_dir / "checkpoint.tpck");
    write_text(out_dir / "history.csv", history_to_csv(result.history));
    write_resolved_config(cfg, out_dir);
    std::cout << "best epoch " << result.best_epoch << ", val loss "
              << MetricReport::format_value(result.history[result.best_epoch - 1].val_loss) << "\n";
    return exit_code::ok;
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw ConfigError("unknown split '" + name + "'");
}

int cmd_evaluate(const fs::path& checkpoint_path, const fs::path& data_dir,
                 const std::string& split_name, const fs::path& out_dir, bool oracle) {
    fs::create_directories(out_dir);
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    LoadedDataset loaded = load_dataset(data_dir);
    const auto& gen = loaded.manifest.at("generator");
    if (ckpt.params.cfg.n_vars != gen.at("variables").get<std::size_t>() ||
        ckpt.params.cfg.lat != gen.at("lat").get<std::size_t>() ||
        ckpt.params.cfg.lon != gen.at("lon").get<std::size_t>())
        throw DataError("evaluate: checkpoint fingerprint does not match the data manifest grid");

    const Split split = parse_split(split_name);
    const Field clim1 = climatology(loaded.data, 1);
    const Field clim2 = climatology(loaded.data, 2);

    SplitForecasts fc;
    if (oracle) {
        fc.sample_indices = loaded.data.indices(split);
        for (std::size_t idx : fc.sample_indices) {
            fc.preds1.push_back(loaded.data.samples[idx].target1);
            fc.preds2.push_back(loaded.data.samples[idx].target2);
        }
    } else {
        fc = forecast_split(ckpt.params, ckpt.stats, loaded.data, split);
    }
    MetricReport report = report_for_forecasts(fc, loaded.data, clim1, clim2);
    write_text(out_dir / "metrics.csv", report.to_csv());
    write_text(out_dir / "metrics.json", report.to_json().dump(2) + "\n");

    MetricReport pers = persistence_report(loaded.data, split, clim1, clim2);
    MetricReport clim = climatology_report(loaded.data, split, clim1, clim2);
    std::string baselines = "predictor,variable,horizon,metric,value\n";
    for (const auto& e : pers.entries)
        baselines += "persistence," + e.variable + "," + std::to_string(e.horizon) + "," + e.metric +
                     "," + (e.degenerate ? "degenerate" : MetricReport::format_value(e.value)) + "\n";
    for (const auto& e : clim.entries)
        baselines += "climatology," + e.variable + "," + std::to_string(e.horizon) + "," + e.metric +
                     "," + (e.degenerate ? "degenerate" : MetricReport::format_value(e.value)) + "\n";
    write_text(out_dir / "baselines.csv", baselines);
    nlohmann::json bj;
    bj["persistence"] = pers.to_json();
    bj["climatology"] = clim.to_json();
    write_text(out_dir / "baselines.json", bj.dump(2) + "\n");

    std::cout << "evaluated " << fc.sample_indices.size() << " " << split_name << " samples ("
              << report.entries.size() << " metric rows)\n";
    return exit_code::ok;
}

int cmd_predict(const fs::path& checkpoint_path, const fs::path& input_path,
                const std::string& out_prefix) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    Field input = read_field(input_path);
    if (input.n_vars() != ckpt.params.cfg.n_vars || input.grid.h != ckpt.params.cfg.lat ||
        input.grid.w != ckpt.params.cfg.lon)
        throw DataError("predict: input dimensions do not match the checkpoint");
    ForecastPair fp = forward(normalize(input, ckpt.stats), ckpt.params);
    Field h1 = denormalize(fp.horizon1, ckpt.stats);
    Field h2 = denormalize(fp.horizon2, ckpt.stats);
    h1.var_names = input.var_names;
    h2.var_names = input.var_names;
    write_field(h1, out_prefix + ".h1.tpit");
    write_field(h2, out_prefix + ".h2.tpit");
    std::cout << "wrote " << out_prefix << ".h1.tpit and " << out_prefix << ".h2.tpit\n";
    return exit_code::ok;
}

int cmd_grad_check(std::uint64_t seed, const std::string& perturb_group) {
    GradCheckFixture fx = make_grad_check_fixture(seed);
    GradCheckResult result = grad_check(fx.params, fx.sample, 1e-4, 1e-2, 1e-6, perturb_group);
    std::printf("%-24s %-14s %s\n", "parameter group", "worst rel err", "status");
    for (const auto& g : result.groups)
        std::printf("%-24s %-14.3e %s\n", g.name.c_str(), g.worst_rel, g.pass ? "ok" : "FAIL");
    if (!result.all_pass) {
        for (const auto& g : result.groups)
            if (!g.pass) std::printf("gradient check failed for group %s\n", g.name.c_str());
        return exit_code::grad_check;
    }
    std::printf("all %zu parameter groups within tolerance\n", result.groups.size());
    return exit_code::ok;
}

int cmd_sweep_lambda(const RunConfig& cfg, const fs::path& data_dir,
                     const std::vector<double>& values, const fs::path& out_dir) {
    if (values.empty()) throw ConfigError("sweep-lambda: need at least one value");
    fs::create_directories(out_dir);
    LoadedDataset loaded = load_dataset(data_dir);
    auto [rows, cols] = manifest_box_cells(loaded.manifest, "extratropical");

    std::string csv = "lambda,best_epoch,val_loss,val_rmse_weighted,extratropical_box_rmse\n";
    for (double lambda : values) {
        ModelConfig mcfg = model_config_for_data(cfg, loaded.manifest);
        mcfg.lambda = lambda;
        TrainOutput result = train(loaded.data, mcfg, cfg.train_config());
        SplitForecasts fc = forecast_split(result.params, result.stats, loaded.data, Split::val);
        const double box = region_rmse(fc, loaded.data, rows, cols);
        const EpochStats& best = result.history[result.best_epoch - 1];
        csv += MetricReport::format_value(lambda) + "," + std::to_string(result.best_epoch) + "," +
               MetricReport::format_value(best.val_loss) + "," +
               MetricReport::format_value(mean_weighted_rmse(result.params, loaded.data,
                                                                loaded.data.indices(Split::val),
                                                                result.stats)) +
               "," + MetricReport::format_value(box) + "\n";
    }
    write_text(out_dir / "sweep.csv", csv);
    write_resolved_config(cfg, out_dir);
    std::cout << "wrote " << (out_dir / "sweep.csv").string() << " (" << values.size() << " rows)\n";
    return exit_code::ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subseasonal-to-seasonal forecasting toolkit: spherical token embedding, "
                 "multi-scale latent transport, teleconnection-aware attention"};
    app.require_subcommand(1);
    app.footer(RunConfig::help_text());

    std::string config_path;
    std::vector<std::string> overrides;
    std::string data_dir, out_dir, checkpoint_path, input_path, out_prefix;
    std::string split_name = "val";
    std::string lambda_values = "0.0,0.2";
    std::string perturb_group;
    std::uint64_t grad_seed = 7;
    bool oracle = false;

    auto add_config_opts = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--set", overrides, "override a config key, e.g. --set train.epochs=10");
    };

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    add_config_opts(gen);
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* tr = app.add_subcommand("train", "train a model on a generated dataset");
    add_config_opts(tr);
    tr->add_option("--data", data_dir, "dataset directory")->required();
    tr->add_option("--out", out_dir, "output directory")->required();

    auto* ev = app.add_subcommand("evaluate", "compute the metric suite on a split");
    ev->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    ev->add_option("--data", data_dir, "dataset directory")->required();
    ev->add_option("--split", split_name, "train|val|test (default val)");
    ev->add_option("--out", out_dir, "output directory")->required();
    ev->add_flag("--oracle", oracle, "score the true targets as predictions (sanity mode)");

    auto* pr = app.add_subcommand("predict", "run one TPIT input through a checkpoint");
    pr->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    pr->add_option("--input", input_path, "input TPIT field")->required();
    pr->add_option("--out-prefix", out_prefix, "output prefix for .h1/.h2 files")->required();

    auto* gc = app.add_subcommand("grad-check", "full-model finite-difference gradient check");
    gc->add_option("--seed", grad_seed, "fixture seed");
    gc->add_option("--perturb-group", perturb_group,
                   "inject an error into one group's gradient (fault-injection hook)");

    auto* sw = app.add_subcommand("sweep-lambda", "train one model per lambda value");
    add_config_opts(sw);
    sw->add_option("--data", data_dir, "dataset directory")->required();
    sw->add_option("--values", lambda_values, "comma-separated lambda values");
    sw->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_code::ok : exit_code::usage;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(build_config(config_path, overrides), out_dir);
        if (tr->parsed()) return cmd_train(build_config(config_path, overrides), data_dir, out_dir);
        if (ev->parsed()) return cmd_evaluate(checkpoint_path, data_dir, split_name, out_dir, oracle);
        if (pr->parsed()) return cmd_predict(checkpoint_path, input_path, out_prefix);
        if (gc->parsed()) return cmd_grad_check(grad_seed, perturb_group);
        if (sw->parsed()) {
            std::vector<double> values;
            std::string rest = lambda_values;
            while (!rest.empty()) {
                const auto comma = rest.find(',');
                values.push_back(std::stod(rest.substr(0, comma)));
                if (comma == std::string::npos) break;
                rest = rest.substr(comma + 1);
            }
            return cmd_sweep_lambda(build_config(config_path, overrides), data_dir, values, out_dir);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_code::usage;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return exit_code::numeric;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return exit_code::data;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code::data;
    }
    return exit_code::usage;
}
