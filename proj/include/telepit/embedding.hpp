#pragma once

#include <cstddef>
#include <string>

#include "telepit/autodiff.hpp"
#include "telepit/errors.hpp"
#include "telepit/grid.hpp"
#include "telepit/mlp.hpp"
#include "telepit/rng.hpp"

namespace telepit {

/// Spherical-harmonic-inspired embedding parameters. The positional tables
/// start at integer-frequency sinusoids of the grid coordinates and are
/// learnable thereafter.
struct EmbeddingParams {
    std::size_t d_lat = 0, d_lon = 0; ///< even, d_lat + d_lon = D
    Tensor e_lat;                     ///< H x d_lat
    Tensor e_lon;                     ///< W x d_lon
    Tensor w_in;                      ///< D x C
    Tensor b_in;                      ///< 1 x D
    Tensor w_proj;                    ///< D x D
    Tensor b_proj;                    ///< 1 x D

    std::size_t embed_dim() const { return d_lat + d_lon; }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".e_lat", e_lat);
        f(prefix + ".e_lon", e_lon);
        f(prefix + ".w_in", w_in);
        f(prefix + ".b_in", b_in);
        f(prefix + ".w_proj", w_proj);
        f(prefix + ".b_proj", b_proj);
    }
};

/// Sinusoidal table rows: entry (i, 2k) = sin((k+1)*coord_i) and
/// (i, 2k+1) = cos((k+1)*coord_i). Integer frequencies keep the longitude
/// table exactly periodic around the globe.
inline Tensor sinusoidal_table(const std::vector<double>& coords, std::size_t dim) {
    if (dim == 0 || dim % 2 != 0) throw ConfigError("positional table dimension must be even and positive");
    Tensor t({coords.size(), dim});
    for (std::size_t i = 0; i < coords.size(); ++i)
        for (std::size_t k = 0; k < dim / 2; ++k) {
            const double freq = static_cast<double>(k + 1);
            t(i, 2 * k) = std::sin(freq * coords[i]);
            t(i, 2 * k + 1) = std::cos(freq * coords[i]);
        }
    return t;
}

inline std::pair<Tensor, Tensor> init_positional_tables(const Grid& grid, std::size_t d_lat,
                                                        std::size_t d_lon) {
    return {sinusoidal_table(grid.latitudes, d_lat), sinusoidal_table(grid.longitudes, d_lon)};
}

inline EmbeddingParams make_embedding(const Grid& grid, std::size_t n_vars, std::size_t d_lat,
                                      std::size_t d_lon, Rng& rng) {
    EmbeddingParams p;
    p.d_lat = d_lat;
    p.d_lon = d_lon;
    auto [e_lat, e_lon] = init_positional_tables(grid, d_lat, d_lon);
    p.e_lat = std::move(e_lat);
    p.e_lon = std::move(e_lon);
    const std::size_t d = d_lat + d_lon;
    p.w_in = Tensor({d, n_vars});
    p.b_in = Tensor({1, d});
    p.w_proj = Tensor({d, d});
    p.b_proj = Tensor({1, d});
    init_linear(p.w_in, rng, n_vars);
    init_linear(p.w_proj, rng, d);
    return p;
}

/// Zonal average: the unweighted longitude mean per latitude per variable,
/// as an H x C matrix. Projects the field onto its zonally symmetric part;
/// rows that are already constant come back without rounding, so the
/// projection is idempotent at the bit level.
inline Tensor zonal_average(const Field& field) {
    const std::size_t c = field.n_vars(), h = field.grid.h, w = field.grid.w;
    Tensor u({h, c});
    for (std::size_t v = 0; v < c; ++v)
        for (std::size_t i = 0; i < h; ++i)
            u(i, v) = row_mean({field.values.data() + (v * h + i) * w, w});
    return u;
}

struct EmbeddingVars {
    Tape::Id e_lat, e_lon, w_in, b_in, w_proj, b_proj;
};

inline EmbeddingVars bind_embedding(ParamBinder& b, const std::string& prefix,
                                    const EmbeddingParams& p) {
    return {b.bind(prefix + ".e_lat", p.e_lat), b.bind(prefix + ".e_lon", p.e_lon),
            b.bind(prefix + ".w_in", p.w_in),   b.bind(prefix + ".b_in", p.b_in),
            b.bind(prefix + ".w_proj", p.w_proj), b.bind(prefix + ".b_proj", p.b_proj)};
}

/// Token sequence from zonal means: z_i = W_proj (W_in u_i + b_in + p_i) +
/// b_proj where p_i concatenates the latitude table row with the longitude
/// table's global mean.
inline Tape::Id embed_forward(Tape& t, Tape::Id zonal_u, const EmbeddingVars& v, std::size_t h) {
    Tape::Id hid = t.add_rowvec(t.matmul_nt(zonal_u, v.w_in), v.b_in);
    Tape::Id p_lon = t.mean_rows(v.e_lon);
    Tape::Id pos = t.concat_cols(v.e_lat, t.repeat_row(p_lon, h));
    return t.add_rowvec(t.matmul_nt(t.add(hid, pos), v.w_proj), v.b_proj);
}

/// Value-level embed for tests and analysis.
inline Tensor embed(const Field& field, const EmbeddingParams& params) {
    if (params.e_lat.rows() != field.grid.h || params.e_lon.rows() != field.grid.w ||
        params.w_in.cols() != field.n_vars())
        throw DataError("embed: field dimensions do not match parameters");
    Tape tape;
    ParamBinder binder{tape};
    EmbeddingVars vars = bind_embedding(binder, "embedding", params);
    Tape::Id u = tape.leaf(zonal_average(field));
    return tape.value(embed_forward(tape, u, vars, field.grid.h));
}

} // namespace telepit
