#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "telepit/autodiff.hpp"
#include "telepit/rng.hpp"
#include "telepit/tensor.hpp"

namespace telepit {

/// Weights drawn uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)); biases start at
/// zero.
inline void init_linear(Tensor& w, Rng& rng, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : w.values()) v = rng.uniform(-bound, bound);
}

/// Two-layer perceptron with GELU between the layers. Weight matrices are
/// stored (out, in) and applied to row-token matrices as X * W^T.
struct MlpParams {
    Tensor w1, b1, w2, b2;

    static MlpParams make(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
        MlpParams p;
        p.w1 = Tensor({hidden, in});
        p.b1 = Tensor({1, hidden});
        p.w2 = Tensor({out, hidden});
        p.b2 = Tensor({1, out});
        init_linear(p.w1, rng, in);
        init_linear(p.w2, rng, hidden);
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

struct MlpVars {
    Tape::Id w1, b1, w2, b2;
};

/// Binds parameter tensors onto a tape as leaves, keeping a (name, id)
/// index so gradients can be read back per parameter group.
struct ParamBinder {
    Tape& tape;
    std::vector<std::pair<std::string, Tape::Id>> index;

    Tape::Id bind(const std::string& name, const Tensor& t) {
        const Tape::Id id = tape.leaf(t);
        index.emplace_back(name, id);
        return id;
    }
};

inline MlpVars bind_mlp(ParamBinder& b, const std::string& prefix, const MlpParams& p) {
    return {b.bind(prefix + ".w1", p.w1), b.bind(prefix + ".b1", p.b1),
            b.bind(prefix + ".w2", p.w2), b.bind(prefix + ".b2", p.b2)};
}

/// X(H,in) -> gelu(X W1^T + b1) W2^T + b2.
inline Tape::Id mlp_forward(Tape& t, Tape::Id x, const MlpVars& v) {
    Tape::Id h = t.gelu_op(t.add_rowvec(t.matmul_nt(x, v.w1), v.b1));
    return t.add_rowvec(t.matmul_nt(h, v.w2), v.b2);
}

} // namespace telepit
