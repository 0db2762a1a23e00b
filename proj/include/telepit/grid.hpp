#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "telepit/errors.hpp"
#include "telepit/numerics.hpp"
#include "telepit/tensor.hpp"

namespace telepit {

/// Equally spaced lat-lon grid with cosine latitude weights normalized to
/// mean one.
struct Grid {
    std::size_t h = 0;                ///< latitude count
    std::size_t w = 0;                ///< longitude count
    std::vector<double> latitudes;    ///< radians, strictly increasing, south to north
    std::vector<double> longitudes;   ///< radians in [-pi, pi), strictly increasing
    std::vector<double> weights;      ///< cos(lat) / mean(cos(lat))

    bool same_geometry(const Grid& o) const { return h == o.h && w == o.w; }
};

/// Build the grid: latitudes span [-lat_span, +lat_span] inclusive (the full
/// sphere by default, poles included), longitudes span [-pi, pi). The
/// restricted span exists for small analytic fixtures.
inline Grid make_grid(std::size_t h, std::size_t w, double lat_span = std::numbers::pi / 2.0) {
    if (h < 3) throw DataError("make_grid: need at least 3 latitudes");
    if (w < 4) throw DataError("make_grid: need at least 4 longitudes");
    Grid g;
    g.h = h;
    g.w = w;
    g.latitudes.resize(h);
    for (std::size_t i = 0; i < h; ++i)
        g.latitudes[i] = -lat_span + 2.0 * lat_span * static_cast<double>(i) / static_cast<double>(h - 1);
    g.longitudes.resize(w);
    for (std::size_t j = 0; j < w; ++j)
        g.longitudes[j] = -std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(w);
    g.weights.resize(h);
    double mean_cos = 0.0;
    for (std::size_t i = 0; i < h; ++i) {
        g.weights[i] = std::cos(g.latitudes[i]);
        mean_cos += g.weights[i];
    }
    mean_cos /= static_cast<double>(h);
    for (auto& wt : g.weights) wt /= mean_cos;
    return g;
}

/// Multi-variable gridded state: values are (variable, latitude, longitude)
/// with latitudes south to north and longitudes west to east.
struct Field {
    Grid grid;
    std::vector<std::string> var_names;
    Tensor values; // C x H x W

    std::size_t n_vars() const { return var_names.size(); }

    static Field zeros(const Grid& g, std::vector<std::string> names) {
        Field f;
        f.grid = g;
        f.values = Tensor({names.size(), g.h, g.w});
        f.var_names = std::move(names);
        return f;
    }

    void check_consistent() const {
        if (values.ndim() != 3 || values.dim(0) != var_names.size() || values.dim(1) != grid.h ||
            values.dim(2) != grid.w)
            throw DataError("Field: values shape does not match grid/variables");
        values.check_finite("Field values");
    }
};

/// Per-variable standardization statistics from a training split.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> std_dev;
};

/// One forecast sample: the input state and the two horizon-window means.
struct Sample {
    Field input;
    Field target1; ///< mean of days 15-28
    Field target2; ///< mean of days 29-42
};

enum class Split { train, val, test };

/// In-memory dataset; all samples share one grid and one variable list.
struct Dataset {
    std::vector<Sample> samples;
    std::vector<Split> split_of; ///< parallel to samples

    std::vector<std::size_t> indices(Split s) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (split_of[i] == s) out.push_back(i);
        return out;
    }
};

/// Per-variable mean and population standard deviation pooled over every
/// grid cell of every field (input and both targets) in the train split.
inline NormStats compute_norm_stats(const Dataset& ds) {
    const auto train = ds.indices(Split::train);
    if (train.empty()) throw DataError("compute_norm_stats: empty train split");
    const std::size_t c = ds.samples[train[0]].input.n_vars();
    NormStats stats;
    stats.mean.assign(c, 0.0);
    stats.std_dev.assign(c, 0.0);
    std::vector<double> sum(c, 0.0), sum_sq(c, 0.0);
    std::size_t count = 0;
    for (std::size_t idx : train) {
        const Sample& s = ds.samples[idx];
        for (const Field* f : {&s.input, &s.target1, &s.target2}) {
            const std::size_t hw = f->grid.h * f->grid.w;
            for (std::size_t v = 0; v < c; ++v)
                for (std::size_t k = 0; k < hw; ++k) {
                    const double x = f->values[v * hw + k];
                    sum[v] += x;
                    sum_sq[v] += x * x;
                }
        }
        count += 3 * s.input.grid.h * s.input.grid.w;
    }
    for (std::size_t v = 0; v < c; ++v) {
        stats.mean[v] = sum[v] / static_cast<double>(count);
        const double var = sum_sq[v] / static_cast<double>(count) - stats.mean[v] * stats.mean[v];
        if (var <= 0.0)
            throw DataError("compute_norm_stats: zero-variance variable " + std::to_string(v));
        stats.std_dev[v] = std::sqrt(var);
    }
    return stats;
}

inline Field normalize(const Field& f, const NormStats& stats) {
    Field out = f;
    const std::size_t hw = f.grid.h * f.grid.w;
    for (std::size_t v = 0; v < f.n_vars(); ++v)
        for (std::size_t k = 0; k < hw; ++k)
            out.values[v * hw + k] = (f.values[v * hw + k] - stats.mean[v]) / stats.std_dev[v];
    return out;
}

inline Field denormalize(const Field& f, const NormStats& stats) {
    Field out = f;
    const std::size_t hw = f.grid.h * f.grid.w;
    for (std::size_t v = 0; v < f.n_vars(); ++v)
        for (std::size_t k = 0; k < hw; ++k)
            out.values[v * hw + k] = f.values[v * hw + k] * stats.std_dev[v] + stats.mean[v];
    return out;
}

/// Train-split climatology: the per-variable, per-cell mean over all
/// training targets of one horizon (horizon = 1 or 2). Synthetic data has
/// no annual cycle, so a day-of-year climatology would add nothing here.
inline Field climatology(const Dataset& ds, int horizon) {
    const auto train = ds.indices(Split::train);
    if (train.empty()) throw DataError("climatology: empty train split");
    const Field& first = horizon == 1 ? ds.samples[train[0]].target1 : ds.samples[train[0]].target2;
    Field clim = Field::zeros(first.grid, first.var_names);
    for (std::size_t idx : train) {
        const Field& t = horizon == 1 ? ds.samples[idx].target1 : ds.samples[idx].target2;
        add_inplace(clim.values, t.values);
    }
    scale_inplace(clim.values, 1.0 / static_cast<double>(train.size()));
    return clim;
}

} // namespace telepit
