#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "telepit/autodiff.hpp"
#include "telepit/mlp.hpp"
#include "telepit/rng.hpp"

namespace telepit {

/// Learnable wavelet-style decomposition: L per-level perceptrons, each
/// mapping D -> 2D (hidden width 2D) so the output can be split into an
/// approximation half and a detail half.
struct DecompParams {
    std::vector<MlpParams> levels;

    static DecompParams make(std::size_t levels, std::size_t d, Rng& rng) {
        DecompParams p;
        for (std::size_t l = 0; l < levels; ++l)
            p.levels.push_back(MlpParams::make(d, 2 * d, 2 * d, rng));
        return p;
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        for (std::size_t l = 0; l < levels.size(); ++l)
            levels[l].visit(prefix + ".l" + std::to_string(l + 1), f);
    }
};

struct DecompVars {
    std::vector<MlpVars> levels;
};

inline DecompVars bind_decomp(ParamBinder& b, const std::string& prefix, const DecompParams& p) {
    DecompVars v;
    for (std::size_t l = 0; l < p.levels.size(); ++l)
        v.levels.push_back(bind_mlp(b, prefix + ".l" + std::to_string(l + 1), p.levels[l]));
    return v;
}

/// Split each level's 2D-wide output into equal halves: the first half is
/// the next approximation A_l, the second half the detail D_l. The band
/// list is returned low-to-high frequency: {A_L, D_L, D_{L-1}, ..., D_1}.
/// L = 0 returns the input as the single band.
inline std::vector<Tape::Id> decompose_forward(Tape& t, Tape::Id z, const DecompVars& v,
                                               std::size_t d) {
    Tape::Id approx = z;
    std::vector<Tape::Id> details; // D_1 .. D_L
    for (const MlpVars& level : v.levels) {
        Tape::Id out = mlp_forward(t, approx, level);
        approx = t.slice_cols(out, 0, d);
        details.push_back(t.slice_cols(out, d, 2 * d));
    }
    std::vector<Tape::Id> bands{approx};
    for (std::size_t l = details.size(); l-- > 0;) bands.push_back(details[l]);
    return bands;
}

/// Value-level decomposition for tests.
inline std::vector<Tensor> decompose(const Tensor& z, const DecompParams& params) {
    Tape tape;
    ParamBinder binder{tape};
    DecompVars vars = bind_decomp(binder, "decomp", params);
    auto ids = decompose_forward(tape, tape.leaf(z), vars, z.cols());
    std::vector<Tensor> out;
    for (auto id : ids) out.push_back(tape.value(id));
    return out;
}

} // namespace telepit
