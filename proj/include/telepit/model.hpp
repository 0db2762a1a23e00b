#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "telepit/autodiff.hpp"
#include "telepit/embedding.hpp"
#include "telepit/errors.hpp"
#include "telepit/grid.hpp"
#include "telepit/multiscale.hpp"
#include "telepit/physode.hpp"
#include "telepit/rng.hpp"
#include "telepit/teleattention.hpp"

namespace telepit {

/// Shape-level and dynamics-level model configuration.
struct ModelConfig {
    std::size_t n_vars = 3;    ///< C
    std::size_t lat = 16;      ///< H
    std::size_t lon = 32;      ///< W
    std::size_t embed_dim = 256; ///< D; divisible by 4 and by heads
    std::size_t levels = 2;    ///< L decomposition levels (L+1 bands)
    std::size_t heads = 4;
    std::size_t patterns = 8;  ///< n_p
    double lambda = 0.2;
    double gamma = 0.1;
    std::size_t ode_steps = 2;
    double ode_dt = 1.0;

    std::size_t d_lat() const { return embed_dim / 2; }
    std::size_t d_lon() const { return embed_dim - d_lat(); }
    std::size_t bands() const { return levels + 1; }
    std::size_t head_out() const { return 2 * n_vars * lon; }

    void validate() const {
        if (embed_dim % 4 != 0) throw ConfigError("model: embed_dim must be divisible by 4");
        if (heads == 0 || embed_dim % heads != 0)
            throw ConfigError("model: embed_dim must be divisible by heads");
        if (patterns == 0) throw ConfigError("model: patterns must be >= 1");
        if (lambda < 0.0) throw ConfigError("model: lambda must be >= 0");
        if (gamma <= 0.0) throw ConfigError("model: gamma must be > 0");
        if (ode_dt <= 0.0) throw ConfigError("model: ode_dt must be > 0");
        if (lat < 3 || lon < 4 || n_vars < 1) throw ConfigError("model: bad grid dimensions");
    }
};

/// Dual-horizon prediction head: per latitude token,
/// y_i = W2 GELU(W1 z_i + b1) + b2 in R^{2CW}.
struct HeadParams {
    Tensor w1, b1, w2, b2;

    static HeadParams make(const ModelConfig& cfg, Rng& rng) {
        HeadParams p;
        const std::size_t d = cfg.embed_dim;
        p.w1 = Tensor({2 * d, d});
        p.b1 = Tensor({1, 2 * d});
        p.w2 = Tensor({cfg.head_out(), 2 * d});
        p.b2 = Tensor({1, cfg.head_out()});
        init_linear(p.w1, rng, d);
        init_linear(p.w2, rng, 2 * d);
        return p;
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".w1", w1);
        f(prefix + ".b1", b1);
        f(prefix + ".w2", w2);
        f(prefix + ".b2", b2);
    }
};

/// Every learnable parameter group of the model.
struct ModelParams {
    ModelConfig cfg;
    EmbeddingParams embedding;
    DecompParams decomp;
    std::vector<OdeParams> ode;   ///< one per band
    std::vector<AttnParams> attn; ///< one per band
    FusionParams fusion;
    HeadParams head;

    template <class F>
    void visit(F&& f) {
        embedding.visit("embedding", f);
        decomp.visit("decomp", f);
        for (std::size_t b = 0; b < ode.size(); ++b) ode[b].visit("ode.b" + std::to_string(b), f);
        for (std::size_t b = 0; b < attn.size(); ++b) attn[b].visit("attn.b" + std::to_string(b), f);
        fusion.visit("fusion", f);
        head.visit("head", f);
    }
};

/// Deterministic initialization: every module draws from its own named
/// stream, so adding parameters to one module never shifts another's draws.
inline ModelParams make_model(const ModelConfig& cfg, const Grid& grid, const Rng& rng) {
    cfg.validate();
    if (grid.h != cfg.lat || grid.w != cfg.lon) throw ConfigError("make_model: grid mismatch");
    ModelParams p;
    p.cfg = cfg;
    Rng r = rng.stream("init");
    {
        Rng re = r.stream("embedding");
        p.embedding = make_embedding(grid, cfg.n_vars, cfg.d_lat(), cfg.d_lon(), re);
    }
    {
        Rng rd = r.stream("decomp");
        p.decomp = DecompParams::make(cfg.levels, cfg.embed_dim, rd);
    }
    for (std::size_t b = 0; b < cfg.bands(); ++b) {
        Rng ro = r.stream("ode").stream(static_cast<std::uint64_t>(b));
        p.ode.push_back(OdeParams::make(cfg.embed_dim, cfg.gamma, cfg.ode_dt, cfg.ode_steps, ro));
    }
    for (std::size_t b = 0; b < cfg.bands(); ++b) {
        Rng ra = r.stream("attn").stream(static_cast<std::uint64_t>(b));
        p.attn.push_back(AttnParams::make(cfg.embed_dim, cfg.heads, cfg.patterns, cfg.lambda, ra));
    }
    {
        Rng rf = r.stream("fusion");
        p.fusion = FusionParams::make(cfg.levels, cfg.embed_dim, rf);
    }
    {
        Rng rh = r.stream("head");
        p.head = HeadParams::make(cfg, rh);
    }
    return p;
}

/// Stable names and tensors of all parameter groups, in visit order. The
/// same order defines the checkpoint block layout.
inline std::vector<std::pair<std::string, Tensor*>> param_registry(ModelParams& p) {
    std::vector<std::pair<std::string, Tensor*>> reg;
    p.visit([&](const std::string& name, Tensor& t) { reg.emplace_back(name, &t); });
    return reg;
}

struct HeadVars {
    Tape::Id w1, b1, w2, b2;
};

struct ModelVars {
    EmbeddingVars embedding;
    DecompVars decomp;
    std::vector<OdeVars> ode;
    std::vector<AttnVars> attn;
    FusionVars fusion;
    HeadVars head;
};

inline ModelVars bind_model(ParamBinder& b, const ModelParams& p) {
    ModelVars v;
    v.embedding = bind_embedding(b, "embedding", p.embedding);
    v.decomp = bind_decomp(b, "decomp", p.decomp);
    for (std::size_t i = 0; i < p.ode.size(); ++i)
        v.ode.push_back(bind_ode(b, "ode.b" + std::to_string(i), p.ode[i]));
    for (std::size_t i = 0; i < p.attn.size(); ++i)
        v.attn.push_back(bind_attn(b, "attn.b" + std::to_string(i), p.attn[i]));
    v.fusion = bind_fusion(b, "fusion", p.fusion);
    v.head.w1 = b.bind("head.w1", p.head.w1);
    v.head.b1 = b.bind("head.b1", p.head.b1);
    v.head.w2 = b.bind("head.w2", p.head.w2);
    v.head.b2 = b.bind("head.b2", p.head.b2);
    return v;
}

/// Full pipeline on the tape, from zonal means to the H x 2CW head output.
/// Row i packs [horizon][variable][longitude].
inline Tape::Id model_forward(Tape& t, Tape::Id zonal_u, const ModelVars& v,
                              const ModelConfig& cfg, bool use_teleconnection = true) {
    Tape::Id z = embed_forward(t, zonal_u, v.embedding, cfg.lat);
    std::vector<Tape::Id> bands = decompose_forward(t, z, v.decomp, cfg.embed_dim);
    for (std::size_t b = 0; b < bands.size(); ++b) {
        bands[b] = evolve_forward(t, bands[b], v.ode[b]);
        bands[b] = ta_block_forward(t, bands[b], v.attn[b], use_teleconnection);
    }
    Tape::Id z_final = cross_scale_fuse_forward(t, std::move(bands), v.fusion);
    Tape::Id hidden = t.gelu_op(t.add_rowvec(t.matmul_nt(z_final, v.head.w1), v.head.b1));
    return t.add_rowvec(t.matmul_nt(hidden, v.head.w2), v.head.b2);
}

/// The two horizon-mean output fields.
struct ForecastPair {
    Field horizon1; ///< weeks 3-4
    Field horizon2; ///< weeks 5-6
};

/// Pack the two targets into the head's H x 2CW row layout.
inline Tensor pack_targets(const Field& t1, const Field& t2) {
    const std::size_t c = t1.n_vars(), h = t1.grid.h, w = t1.grid.w;
    Tensor out({h, 2 * c * w});
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t v = 0; v < c; ++v)
            for (std::size_t j = 0; j < w; ++j) {
                out(i, v * w + j) = t1.values(v, i, j);
                out(i, c * w + v * w + j) = t2.values(v, i, j);
            }
    return out;
}

/// Inverse of pack_targets for model output rows.
inline ForecastPair unpack_forecast(const Tensor& y, const Grid& grid,
                                    const std::vector<std::string>& var_names) {
    const std::size_t c = var_names.size(), h = grid.h, w = grid.w;
    if (y.rows() != h || y.cols() != 2 * c * w) throw DataError("unpack_forecast: bad output shape");
    ForecastPair fp;
    fp.horizon1 = Field::zeros(grid, var_names);
    fp.horizon2 = Field::zeros(grid, var_names);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t v = 0; v < c; ++v)
            for (std::size_t j = 0; j < w; ++j) {
                fp.horizon1.values(v, i, j) = y(i, v * w + j);
                fp.horizon2.values(v, i, j) = y(i, c * w + v * w + j);
            }
    return fp;
}

/// Forward pass on a normalized input field.
inline ForecastPair forward(const Field& input, const ModelParams& params,
                            bool use_teleconnection = true) {
    if (input.grid.h != params.cfg.lat || input.grid.w != params.cfg.lon ||
        input.n_vars() != params.cfg.n_vars)
        throw DataError("forward: input dimensions do not match model config");
    Tape tape;
    ParamBinder binder{tape};
    ModelVars vars = bind_model(binder, params);
    Tape::Id u = tape.leaf(zonal_average(input));
    Tape::Id y = model_forward(tape, u, vars, params.cfg, use_teleconnection);
    return unpack_forecast(tape.value(y), input.grid, input.var_names);
}

/// Mean squared error over both horizons, 1/(2CHW) * (|e1|^2 + |e2|^2),
/// with no latitude weighting.
inline double loss(const ForecastPair& pred, const Field& target1, const Field& target2) {
    if (!pred.horizon1.values.same_shape(target1.values) ||
        !pred.horizon2.values.same_shape(target2.values))
        throw DataError("loss: shape mismatch");
    double sse = 0.0;
    for (std::size_t i = 0; i < target1.values.size(); ++i) {
        const double e = pred.horizon1.values[i] - target1.values[i];
        sse += e * e;
    }
    for (std::size_t i = 0; i < target2.values.size(); ++i) {
        const double e = pred.horizon2.values[i] - target2.values[i];
        sse += e * e;
    }
    return sse / (2.0 * static_cast<double>(target1.values.size()));
}

/// Tape-level loss against a packed target matrix.
inline Tape::Id loss_forward(Tape& t, Tape::Id y, Tape::Id packed_targets, const ModelConfig& cfg) {
    Tape::Id diff = t.sub(y, packed_targets);
    const double denom = 2.0 * static_cast<double>(cfg.n_vars) * static_cast<double>(cfg.lat) *
                         static_cast<double>(cfg.lon);
    return t.scale(t.sum_sq(diff), 1.0 / denom);
}

} // namespace telepit
