#pragma once

#include <cstddef>
#include <vector>

#include "telepit/checkpoint.hpp"
#include "telepit/grid.hpp"
#include "telepit/metrics.hpp"
#include "telepit/model.hpp"

namespace telepit {

/// Denormalized model forecasts for every sample of one split.
struct SplitForecasts {
    std::vector<std::size_t> sample_indices;
    std::vector<Field> preds1, preds2;
};

inline SplitForecasts forecast_split(const ModelParams& params, const NormStats& stats,
                                     const Dataset& ds, Split split,
                                     bool use_teleconnection = true) {
    SplitForecasts out;
    out.sample_indices = ds.indices(split);
    for (std::size_t idx : out.sample_indices) {
        ForecastPair fp = forward(normalize(ds.samples[idx].input, stats), params, use_teleconnection);
        out.preds1.push_back(denormalize(fp.horizon1, stats));
        out.preds2.push_back(denormalize(fp.horizon2, stats));
    }
    return out;
}

/// Metric table for precomputed forecasts against the split's truths.
inline MetricReport report_for_forecasts(const SplitForecasts& fc, const Dataset& ds,
                                         const Field& clim1, const Field& clim2) {
    std::vector<const Field*> p1, p2, t1, t2;
    for (std::size_t k = 0; k < fc.sample_indices.size(); ++k) {
        p1.push_back(&fc.preds1[k]);
        p2.push_back(&fc.preds2[k]);
        t1.push_back(&ds.samples[fc.sample_indices[k]].target1);
        t2.push_back(&ds.samples[fc.sample_indices[k]].target2);
    }
    return compute_metric_report(p1, p2, t1, t2, clim1, clim2);
}

/// Persistence baseline: the input field repeated for both horizons.
inline MetricReport persistence_report(const Dataset& ds, Split split, const Field& clim1,
                                       const Field& clim2) {
    std::vector<const Field*> p, t1, t2;
    for (std::size_t idx : ds.indices(split)) {
        p.push_back(&ds.samples[idx].input);
        t1.push_back(&ds.samples[idx].target1);
        t2.push_back(&ds.samples[idx].target2);
    }
    return compute_metric_report(p, p, t1, t2, clim1, clim2);
}

/// Climatology baseline: the train-split mean per horizon as the forecast.
inline MetricReport climatology_report(const Dataset& ds, Split split, const Field& clim1,
                                       const Field& clim2) {
    std::vector<const Field*> p1, p2, t1, t2;
    for (std::size_t idx : ds.indices(split)) {
        p1.push_back(&clim1);
        p2.push_back(&clim2);
        t1.push_back(&ds.samples[idx].target1);
        t2.push_back(&ds.samples[idx].target2);
    }
    return compute_metric_report(p1, p2, t1, t2, clim1, clim2);
}

/// Mean weighted RMSE over a cell region, averaged over samples, variables
/// and both horizons.
inline double region_rmse(const SplitForecasts& fc, const Dataset& ds,
                          const std::vector<std::size_t>& rows,
                          const std::vector<std::size_t>& cols) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < fc.sample_indices.size(); ++k) {
        const Sample& s = ds.samples[fc.sample_indices[k]];
        const Grid& grid = s.input.grid;
        for (std::size_t v = 0; v < s.input.n_vars(); ++v) {
            acc += rmse_weighted_region(field_plane(fc.preds1[k], v), field_plane(s.target1, v),
                                        grid, rows, cols);
            acc += rmse_weighted_region(field_plane(fc.preds2[k], v), field_plane(s.target2, v),
                                        grid, rows, cols);
            count += 2;
        }
    }
    return acc / static_cast<double>(count);
}

} // namespace telepit
