#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "telepit/errors.hpp"
#include "telepit/grid.hpp"
#include "telepit/metrics.hpp"
#include "telepit/model.hpp"
#include "telepit/rng.hpp"

namespace telepit {

struct TrainConfig {
    std::size_t batch_size = 16;
    double learning_rate = 0.01;
    std::size_t epochs = 50;
    std::uint64_t seed = 7;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t threads = 1;

    void validate() const {
        if (batch_size == 0 || epochs == 0) throw ConfigError("train: counts must be positive");
        if (learning_rate < 0.0) throw ConfigError("train: learning_rate must be >= 0");
        if (threads == 0 || threads > 64) throw ConfigError("train: threads must be in 1..64");
    }
};

/// Adam with standard first/second moments and bias correction. Updates are
/// elementwise and deterministic.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<std::pair<std::string, Tensor*>> registry, const TrainConfig& cfg)
        : registry_(std::move(registry)), cfg_(cfg) {
        for (auto& [name, t] : registry_) {
            m_.emplace_back(t->shape());
            v_.emplace_back(t->shape());
        }
    }

    void step(const std::vector<Tensor>& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t p = 0; p < registry_.size(); ++p) {
            Tensor& param = *registry_[p].second;
            const Tensor& g = grads[p];
            for (std::size_t i = 0; i < param.size(); ++i) {
                m_[p][i] = cfg_.beta1 * m_[p][i] + (1.0 - cfg_.beta1) * g[i];
                v_[p][i] = cfg_.beta2 * v_[p][i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                const double mhat = m_[p][i] / bc1;
                const double vhat = v_[p][i] / bc2;
                param[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
            }
        }
    }

private:
    std::vector<std::pair<std::string, Tensor*>> registry_;
    TrainConfig cfg_;
    std::vector<Tensor> m_, v_;
    std::size_t t_ = 0;
};

/// Precomputed training view of one sample: zonal means of the normalized
/// input and the packed normalized targets.
struct PreparedSample {
    Tensor zonal_u;  ///< H x C
    Tensor targets;  ///< H x 2CW
};

inline PreparedSample prepare_sample(const Sample& s, const NormStats& stats) {
    PreparedSample out;
    out.zonal_u = zonal_average(normalize(s.input, stats));
    out.targets = pack_targets(normalize(s.target1, stats), normalize(s.target2, stats));
    return out;
}

/// Loss and per-parameter-group gradients of one sample. Gradients come
/// back in registry order.
inline double sample_loss_and_grads(const ModelParams& params, const PreparedSample& s,
                                    std::vector<Tensor>* grads, bool use_teleconnection = true) {
    Tape tape;
    ParamBinder binder{tape};
    ModelVars vars = bind_model(binder, params);
    Tape::Id u = tape.leaf(s.zonal_u);
    Tape::Id y = model_forward(tape, u, vars, params.cfg, use_teleconnection);
    Tape::Id l = loss_forward(tape, y, tape.leaf(s.targets), params.cfg);
    const double loss_value = tape.value(l)[0];
    if (grads) {
        tape.backward(l);
        grads->clear();
        grads->reserve(binder.index.size());
        for (const auto& [name, id] : binder.index) grads->push_back(tape.grad(id));
    }
    return loss_value;
}

struct EpochStats {
    std::size_t epoch;
    double train_loss;
    double val_loss;
    double val_rmse;
};

struct TrainOutput {
    ModelParams params; ///< best-validation-loss parameters
    NormStats stats;
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;
};

/// Serialize the per-epoch history; the CSV is byte-stable for identical
/// runs (no timestamps, fixed float formatting).
inline std::string history_to_csv(const std::vector<EpochStats>& history) {
    std::string out = "epoch,train_loss,val_loss,val_rmse_weighted\n";
    for (const auto& e : history) {
        out += std::to_string(e.epoch) + ",";
        out += MetricReport::format_value(e.train_loss) + ",";
        out += MetricReport::format_value(e.val_loss) + ",";
        out += MetricReport::format_value(e.val_rmse) + "\n";
    }
    return out;
}

/// Mean denormalized weighted RMSE of the given parameters over a sample
/// subset (all variables, both horizons).
inline double mean_weighted_rmse(const ModelParams& params, const Dataset& ds,
                                 const std::vector<std::size_t>& idx, const NormStats& stats,
                                 bool use_teleconnection = true) {
    if (idx.empty()) return 0.0;
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t s : idx) {
        const Sample& sample = ds.samples[s];
        ForecastPair fp = forward(normalize(sample.input, stats), params, use_teleconnection);
        Field p1 = denormalize(fp.horizon1, stats);
        Field p2 = denormalize(fp.horizon2, stats);
        for (std::size_t v = 0; v < sample.input.n_vars(); ++v) {
            acc += rmse_weighted(field_plane(p1, v), field_plane(sample.target1, v), sample.input.grid);
            acc += rmse_weighted(field_plane(p2, v), field_plane(sample.target2, v), sample.input.grid);
            count += 2;
        }
    }
    return acc / static_cast<double>(count);
}

namespace detail {

/// Deterministic Fisher-Yates shuffle.
inline void shuffle_indices(std::vector<std::size_t>& idx, Rng rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const std::size_t j = rng.next_u64() % i;
        std::swap(idx[i - 1], idx[j]);
    }
}

} // namespace detail

/// Mini-batch Adam training. Per-sample gradients are independent tapes, so
/// they may be computed on several threads; the batch reduction always runs
/// in sample order, which keeps every run bit-reproducible for a given seed
/// regardless of thread count. Returns the best-validation parameters and
/// the per-epoch history.
inline TrainOutput train(const Dataset& ds, const ModelConfig& mcfg, const TrainConfig& tcfg,
                         bool use_teleconnection = true) {
    tcfg.validate();
    const auto train_idx = ds.indices(Split::train);
    const auto val_idx = ds.indices(Split::val);
    if (train_idx.empty() || val_idx.empty())
        throw DataError("train: train and val splits must be non-empty");

    TrainOutput out;
    out.stats = compute_norm_stats(ds);

    const Grid& grid = ds.samples[0].input.grid;
    Rng rng(tcfg.seed);
    ModelParams params = make_model(mcfg, grid, rng);

    std::vector<PreparedSample> train_prep, val_prep;
    train_prep.reserve(train_idx.size());
    for (std::size_t s : train_idx) train_prep.push_back(prepare_sample(ds.samples[s], out.stats));
    val_prep.reserve(val_idx.size());
    for (std::size_t s : val_idx) val_prep.push_back(prepare_sample(ds.samples[s], out.stats));

    AdamOptimizer adam(param_registry(params), tcfg);
    const std::size_t n_groups = param_registry(params).size();

    double best_val = std::numeric_limits<double>::infinity();
    Rng shuffle_base = rng.stream("shuffle");

    std::vector<std::size_t> order(train_prep.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        detail::shuffle_indices(order, shuffle_base.stream(epoch));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
            const std::size_t count = std::min(tcfg.batch_size, order.size() - start);
            std::vector<double> losses(count);
            std::vector<std::vector<Tensor>> grads(count);
            auto worker = [&](std::size_t lo, std::size_t hi, std::exception_ptr* error) {
                try {
                    for (std::size_t k = lo; k < hi; ++k)
                        losses[k] = sample_loss_and_grads(params, train_prep[order[start + k]],
                                                          &grads[k], use_teleconnection);
                } catch (...) {
                    *error = std::current_exception();
                }
            };
            std::exception_ptr batch_error;
            if (tcfg.threads <= 1 || count == 1) {
                worker(0, count, &batch_error);
            } else {
                const std::size_t n_threads = std::min(tcfg.threads, count);
                std::vector<std::exception_ptr> errors(n_threads);
                std::vector<std::thread> pool;
                for (std::size_t t = 0; t < n_threads; ++t) {
                    const std::size_t lo = t * count / n_threads;
                    const std::size_t hi = (t + 1) * count / n_threads;
                    pool.emplace_back(worker, lo, hi, &errors[t]);
                }
                for (auto& th : pool) th.join();
                for (auto& e : errors)
                    if (e && !batch_error) batch_error = e;
            }
            if (batch_error) {
                try {
                    std::rethrow_exception(batch_error);
                } catch (const NumericError& e) {
                    throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                                       ", batch starting at sample " + std::to_string(start) + ")");
                }
            }
            // Fixed-order reduction over the batch.
            std::vector<Tensor> batch_grads = std::move(grads[0]);
            double batch_loss = losses[0];
            for (std::size_t k = 1; k < count; ++k) {
                batch_loss += losses[k];
                for (std::size_t p = 0; p < n_groups; ++p) add_inplace(batch_grads[p], grads[k][p]);
            }
            const double inv = 1.0 / static_cast<double>(count);
            batch_loss *= inv;
            for (auto& g : batch_grads) scale_inplace(g, inv);
            if (!std::isfinite(batch_loss))
                throw NumericError("train: non-finite loss in epoch " + std::to_string(epoch) +
                                   ", batch starting at sample " + std::to_string(start));
            epoch_loss += batch_loss * static_cast<double>(count);
            adam.step(batch_grads);
        }
        epoch_loss /= static_cast<double>(order.size());

        double val_loss = 0.0;
        for (const auto& s : val_prep) val_loss += sample_loss_and_grads(params, s, nullptr, use_teleconnection);
        val_loss /= static_cast<double>(val_prep.size());
        if (!std::isfinite(val_loss))
            throw NumericError("train: non-finite validation loss in epoch " + std::to_string(epoch));

        const double val_rmse = mean_weighted_rmse(params, ds, val_idx, out.stats, use_teleconnection);
        out.history.push_back({epoch, epoch_loss, val_loss, val_rmse});
        if (val_loss < best_val) {
            best_val = val_loss;
            out.params = params;
            out.best_epoch = epoch;
        }
    }
    return out;
}

} // namespace telepit
