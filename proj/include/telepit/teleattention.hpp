#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "telepit/autodiff.hpp"
#include "telepit/errors.hpp"
#include "telepit/mlp.hpp"
#include "telepit/rng.hpp"

namespace telepit {

inline constexpr double layer_norm_eps = 1e-5;

struct AttnHeadParams {
    Tensor wq, wk, wv; ///< each D x d_k
};

/// One teleconnection-aware transformer block: multi-head self-attention
/// whose logits carry a global-pattern bias, wrapped pre-norm residual with
/// a GELU feed-forward.
struct AttnParams {
    std::vector<AttnHeadParams> heads;
    Tensor wo;        ///< D x D output projection, applied as X * W^O
    Tensor patterns;  ///< n_p x D learnable teleconnection patterns P_j
    Tensor wp;        ///< D x n_p pattern projection
    Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias; ///< 1 x D
    MlpParams ffn;    ///< D -> 2D -> D
    double lambda = 0.2; ///< teleconnection influence (hyperparameter)

    std::size_t head_dim() const { return heads.empty() ? 0 : heads[0].wq.cols(); }

    static AttnParams make(std::size_t d, std::size_t n_heads, std::size_t n_patterns,
                           double lambda, Rng& rng) {
        if (n_heads == 0 || d % n_heads != 0)
            throw ConfigError("attention: embed dim must be divisible by head count");
        if (n_patterns == 0) throw ConfigError("attention: need at least one pattern");
        AttnParams p;
        const std::size_t dk = d / n_heads;
        for (std::size_t h = 0; h < n_heads; ++h) {
            AttnHeadParams hp{Tensor({d, dk}), Tensor({d, dk}), Tensor({d, dk})};
            init_linear(hp.wq, rng, d);
            init_linear(hp.wk, rng, d);
            init_linear(hp.wv, rng, d);
            p.heads.push_back(std::move(hp));
        }
        p.wo = Tensor({d, d});
        init_linear(p.wo, rng, d);
        // Patterns start as small Gaussian noise and are learned from data.
        p.patterns = Tensor({n_patterns, d});
        for (auto& v : p.patterns.values()) v = rng.normal(0.0, 0.02);
        p.wp = Tensor({d, n_patterns});
        init_linear(p.wp, rng, d);
        p.ln1_gain = Tensor::full({1, d}, 1.0);
        p.ln1_bias = Tensor({1, d});
        p.ln2_gain = Tensor::full({1, d}, 1.0);
        p.ln2_bias = Tensor({1, d});
        p.ffn = MlpParams::make(d, 2 * d, d, rng);
        p.lambda = lambda;
        return p;
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        for (std::size_t h = 0; h < heads.size(); ++h) {
            const std::string hp = prefix + ".h" + std::to_string(h);
            f(hp + ".wq", heads[h].wq);
            f(hp + ".wk", heads[h].wk);
            f(hp + ".wv", heads[h].wv);
        }
        f(prefix + ".wo", wo);
        f(prefix + ".patterns", patterns);
        f(prefix + ".wp", wp);
        f(prefix + ".ln1.gain", ln1_gain);
        f(prefix + ".ln1.bias", ln1_bias);
        f(prefix + ".ln2.gain", ln2_gain);
        f(prefix + ".ln2.bias", ln2_bias);
        ffn.visit(prefix + ".ffn", f);
    }
};

struct AttnHeadVars {
    Tape::Id wq, wk, wv;
};

struct AttnVars {
    std::vector<AttnHeadVars> heads;
    Tape::Id wo, patterns, wp;
    Tape::Id ln1_gain, ln1_bias, ln2_gain, ln2_bias;
    MlpVars ffn;
    double lambda;
};

inline AttnVars bind_attn(ParamBinder& b, const std::string& prefix, const AttnParams& p) {
    AttnVars v;
    for (std::size_t h = 0; h < p.heads.size(); ++h) {
        const std::string hp = prefix + ".h" + std::to_string(h);
        v.heads.push_back({b.bind(hp + ".wq", p.heads[h].wq), b.bind(hp + ".wk", p.heads[h].wk),
                           b.bind(hp + ".wv", p.heads[h].wv)});
    }
    v.wo = b.bind(prefix + ".wo", p.wo);
    v.patterns = b.bind(prefix + ".patterns", p.patterns);
    v.wp = b.bind(prefix + ".wp", p.wp);
    v.ln1_gain = b.bind(prefix + ".ln1.gain", p.ln1_gain);
    v.ln1_bias = b.bind(prefix + ".ln1.bias", p.ln1_bias);
    v.ln2_gain = b.bind(prefix + ".ln2.gain", p.ln2_gain);
    v.ln2_bias = b.bind(prefix + ".ln2.bias", p.ln2_bias);
    v.ffn = bind_mlp(b, prefix + ".ffn", p.ffn);
    v.lambda = p.lambda;
    return v;
}

/// Global teleconnection state: omega = softmax(xbar W^p) over the patterns
/// and c = sum_j omega_j P_j, from the latitude-mean token xbar.
/// Returns (c, omega) as tape nodes.
inline std::pair<Tape::Id, Tape::Id> teleconnection_state_forward(Tape& t, Tape::Id x,
                                                                  const AttnVars& v) {
    Tape::Id xbar = t.mean_rows(x);
    Tape::Id omega = t.softmax_rows(t.matmul(xbar, v.wp));
    Tape::Id c = t.matmul(omega, v.patterns);
    return {c, omega};
}

/// Multi-head self-attention with the teleconnection bias of the pattern
/// query: per head, logits A_ij = (Q_i . K_j)/sqrt(d_k) + lambda * b_j with
/// b_j = (q_tel . K_j)/sqrt(d_k) and q_tel = c W^Q. With `use_teleconnection`
/// false the bias pathway is absent entirely (the lambda = 0 reference).
inline Tape::Id ta_attention_forward(Tape& t, Tape::Id x, const AttnVars& v,
                                     bool use_teleconnection = true) {
    const std::size_t dk = t.value(v.heads[0].wq).cols();
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    Tape::Id c = 0;
    if (use_teleconnection) c = teleconnection_state_forward(t, x, v).first;
    Tape::Id concat = 0;
    for (std::size_t h = 0; h < v.heads.size(); ++h) {
        Tape::Id q = t.matmul(x, v.heads[h].wq);
        Tape::Id k = t.matmul(x, v.heads[h].wk);
        Tape::Id val = t.matmul(x, v.heads[h].wv);
        Tape::Id logits = t.scale(t.matmul_nt(q, k), inv_sqrt_dk);
        if (use_teleconnection) {
            Tape::Id q_tel = t.matmul(c, v.heads[h].wq);
            Tape::Id bias = t.scale(t.matmul_nt(q_tel, k), inv_sqrt_dk);
            logits = t.add_rowvec(logits, t.scale(bias, v.lambda));
        }
        Tape::Id head_out = t.matmul(t.softmax_rows(logits), val);
        concat = h == 0 ? head_out : t.concat_cols(concat, head_out);
    }
    return t.matmul(concat, v.wo);
}

/// Pre-norm residual block: x + Attn(LN(x)), then + FFN(LN(.)).
inline Tape::Id ta_block_forward(Tape& t, Tape::Id x, const AttnVars& v,
                                 bool use_teleconnection = true) {
    Tape::Id xn = t.layer_norm_rows(x, v.ln1_gain, v.ln1_bias, layer_norm_eps);
    Tape::Id x1 = t.add(x, ta_attention_forward(t, xn, v, use_teleconnection));
    Tape::Id xn2 = t.layer_norm_rows(x1, v.ln2_gain, v.ln2_bias, layer_norm_eps);
    return t.add(x1, mlp_forward(t, xn2, v.ffn));
}

// -- cross-scale fusion ------------------------------------------------------

/// Fusion of one adjacent band pair: LayerNorm(MLP([low, high])).
struct FusionPairParams {
    MlpParams mlp; ///< 2D -> D, hidden width 2D
    Tensor ln_gain, ln_bias;

    static FusionPairParams make(std::size_t d, Rng& rng) {
        FusionPairParams p;
        p.mlp = MlpParams::make(2 * d, 2 * d, d, rng);
        p.ln_gain = Tensor::full({1, d}, 1.0);
        p.ln_bias = Tensor({1, d});
        return p;
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        mlp.visit(prefix, f);
        f(prefix + ".ln.gain", ln_gain);
        f(prefix + ".ln.bias", ln_bias);
    }
};

/// Exactly L pairs for a band set of L+1 bands.
struct FusionParams {
    std::vector<FusionPairParams> pairs;

    static FusionParams make(std::size_t levels, std::size_t d, Rng& rng) {
        FusionParams p;
        for (std::size_t l = 0; l < levels; ++l) p.pairs.push_back(FusionPairParams::make(d, rng));
        return p;
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        for (std::size_t l = 0; l < pairs.size(); ++l)
            pairs[l].visit(prefix + ".p" + std::to_string(l), f);
    }
};

struct FusionPairVars {
    MlpVars mlp;
    Tape::Id ln_gain, ln_bias;
};

struct FusionVars {
    std::vector<FusionPairVars> pairs;
};

inline FusionVars bind_fusion(ParamBinder& b, const std::string& prefix, const FusionParams& p) {
    FusionVars v;
    for (std::size_t l = 0; l < p.pairs.size(); ++l) {
        const std::string pp = prefix + ".p" + std::to_string(l);
        v.pairs.push_back({bind_mlp(b, pp, p.pairs[l].mlp), b.bind(pp + ".ln.gain", p.pairs[l].ln_gain),
                           b.bind(pp + ".ln.bias", p.pairs[l].ln_bias)});
    }
    return v;
}

/// Low-to-high cascade over the block outputs: each higher band is rewritten
/// as LayerNorm(MLP([updated lower, higher])) before serving as the next
/// pair's lower input, then Z_final is the mean of the final L+1 bands.
inline Tape::Id cross_scale_fuse_forward(Tape& t, std::vector<Tape::Id> bands,
                                         const FusionVars& v) {
    if (v.pairs.size() + 1 != bands.size())
        throw DataError("cross_scale_fuse: band count does not match fusion pairs");
    for (std::size_t l = 0; l + 1 < bands.size(); ++l) {
        Tape::Id cat = t.concat_cols(bands[l], bands[l + 1]);
        Tape::Id m = mlp_forward(t, cat, v.pairs[l].mlp);
        bands[l + 1] = t.layer_norm_rows(m, v.pairs[l].ln_gain, v.pairs[l].ln_bias, layer_norm_eps);
    }
    Tape::Id acc = bands[0];
    for (std::size_t l = 1; l < bands.size(); ++l) acc = t.add(acc, bands[l]);
    return t.scale(acc, 1.0 / static_cast<double>(bands.size()));
}

// -- value-level wrappers for tests and analysis ------------------------------

inline std::pair<Tensor, Tensor> teleconnection_state(const Tensor& x, const AttnParams& params) {
    Tape tape;
    ParamBinder binder{tape};
    AttnVars vars = bind_attn(binder, "attn", params);
    auto [c, omega] = teleconnection_state_forward(tape, tape.leaf(x), vars);
    return {tape.value(c), tape.value(omega)};
}

inline Tensor ta_attention(const Tensor& x, const AttnParams& params, bool use_teleconnection = true) {
    Tape tape;
    ParamBinder binder{tape};
    AttnVars vars = bind_attn(binder, "attn", params);
    return tape.value(ta_attention_forward(tape, tape.leaf(x), vars, use_teleconnection));
}

inline Tensor ta_block(const Tensor& x, const AttnParams& params, bool use_teleconnection = true) {
    Tape tape;
    ParamBinder binder{tape};
    AttnVars vars = bind_attn(binder, "attn", params);
    return tape.value(ta_block_forward(tape, tape.leaf(x), vars, use_teleconnection));
}

inline Tensor cross_scale_fuse(const std::vector<Tensor>& bands, const FusionParams& params) {
    Tape tape;
    ParamBinder binder{tape};
    FusionVars vars = bind_fusion(binder, "fusion", params);
    std::vector<Tape::Id> ids;
    for (const auto& b : bands) ids.push_back(tape.leaf(b));
    return tape.value(cross_scale_fuse_forward(tape, ids, vars));
}

} // namespace telepit
