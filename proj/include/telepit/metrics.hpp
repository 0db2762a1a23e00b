#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "telepit/errors.hpp"
#include "telepit/fft.hpp"
#include "telepit/grid.hpp"
#include "telepit/tensor.hpp"

namespace telepit {

/// One variable of a Field as an H x W plane.
inline Tensor field_plane(const Field& f, std::size_t var) {
    Tensor out({f.grid.h, f.grid.w});
    const std::size_t hw = f.grid.h * f.grid.w;
    for (std::size_t k = 0; k < hw; ++k) out[k] = f.values[var * hw + k];
    return out;
}

/// Latitude-weighted RMSE: sqrt( (1/(H W)) sum_ij w(lat_i) (pred - truth)^2 ).
inline double rmse_weighted(const Tensor& pred, const Tensor& truth, const Grid& grid) {
    if (!pred.same_shape(truth) || pred.rows() != grid.h || pred.cols() != grid.w)
        throw DataError("rmse_weighted: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < grid.h; ++i)
        for (std::size_t j = 0; j < grid.w; ++j) {
            const double e = pred(i, j) - truth(i, j);
            acc += grid.weights[i] * e * e;
        }
    return std::sqrt(acc / static_cast<double>(grid.h * grid.w));
}

/// Weighted RMSE restricted to a cell subset, normalized by the subset's
/// weight mass so the value stays an RMS of errors.
inline double rmse_weighted_region(const Tensor& pred, const Tensor& truth, const Grid& grid,
                                   const std::vector<std::size_t>& rows,
                                   const std::vector<std::size_t>& cols) {
    if (rows.empty() || cols.empty()) throw DataError("rmse_weighted_region: empty region");
    double acc = 0.0, wsum = 0.0;
    for (std::size_t i : rows)
        for (std::size_t j : cols) {
            const double e = pred(i, j) - truth(i, j);
            acc += grid.weights[i] * e * e;
            wsum += grid.weights[i];
        }
    return std::sqrt(acc / wsum);
}

/// Anomaly correlation coefficient against a climatology field, summed over
/// all grid cells of one (variable, horizon, sample) plane.
inline double acc(const Tensor& pred, const Tensor& truth, const Tensor& clim, const Grid& grid) {
    if (!pred.same_shape(truth) || !pred.same_shape(clim)) throw DataError("acc: shape mismatch");
    double num = 0.0, den_p = 0.0, den_t = 0.0;
    for (std::size_t i = 0; i < grid.h; ++i)
        for (std::size_t j = 0; j < grid.w; ++j) {
            const double ap = pred(i, j) - clim(i, j);
            const double at = truth(i, j) - clim(i, j);
            const double w = grid.weights[i];
            num += w * ap * at;
            den_p += w * ap * ap;
            den_t += w * at * at;
        }
    if (den_p <= 0.0 || den_t <= 0.0)
        throw DegenerateError("acc: zero anomaly norm");
    return num / std::sqrt(den_p * den_t);
}

namespace detail {

inline constexpr double spectrum_floor = 1e-12;

/// Zonal power spectrum averaged over latitude rows, floored and normalized
/// to a distribution over wavenumbers 1..floor(W/2).
inline std::vector<double> normalized_spectrum(const Tensor& plane) {
    const std::size_t h = plane.rows(), w = plane.cols();
    std::vector<double> mean_spec(w / 2, 0.0);
    for (std::size_t i = 0; i < h; ++i) {
        auto spec = power_spectrum_1d({plane.data() + i * w, w});
        for (std::size_t k = 0; k < spec.size(); ++k) mean_spec[k] += spec[k];
    }
    double total = 0.0;
    for (auto& v : mean_spec) {
        v /= static_cast<double>(h);
        total += v;
    }
    if (total <= 0.0) throw DegenerateError("degenerate spectrum: field constant along longitude");
    double floored_total = 0.0;
    for (auto& v : mean_spec) {
        v = std::max(v, spectrum_floor);
        floored_total += v;
    }
    for (auto& v : mean_spec) v /= floored_total;
    return mean_spec;
}

} // namespace detail

/// Spectral divergence: KL(truth || pred) between normalized zonal power
/// spectra.
inline double spec_div(const Tensor& pred, const Tensor& truth) {
    if (!pred.same_shape(truth)) throw DataError("spec_div: shape mismatch");
    if (pred.cols() < 4) throw DataError("spec_div: need at least 4 longitudes");
    const auto sp = detail::normalized_spectrum(pred);
    const auto st = detail::normalized_spectrum(truth);
    double kl = 0.0;
    for (std::size_t k = 0; k < st.size(); ++k) kl += st[k] * std::log(st[k] / sp[k]);
    return kl;
}

/// Spectral residual: RMS difference of the normalized spectra over the
/// high-frequency wavenumbers k > floor(W/4).
inline double spec_res(const Tensor& pred, const Tensor& truth) {
    if (!pred.same_shape(truth)) throw DataError("spec_res: shape mismatch");
    const std::size_t w = pred.cols();
    if (w < 8) throw DataError("spec_res: need at least 8 longitudes");
    const auto sp = detail::normalized_spectrum(pred);
    const auto st = detail::normalized_spectrum(truth);
    const std::size_t k_lo = w / 4; // wavenumbers k_lo+1 .. floor(W/2)
    double acc2 = 0.0;
    std::size_t count = 0;
    for (std::size_t k = k_lo; k < st.size(); ++k) {
        const double d = sp[k] - st[k];
        acc2 += d * d;
        ++count;
    }
    if (count == 0) throw DataError("spec_res: empty high-frequency band");
    return std::sqrt(acc2 / static_cast<double>(count));
}

namespace detail {

inline std::vector<double> gaussian_window_11() {
    std::vector<double> w(11 * 11);
    const double sigma = 1.5;
    double total = 0.0;
    for (int a = 0; a < 11; ++a)
        for (int b = 0; b < 11; ++b) {
            const double dx = static_cast<double>(a) - 5.0;
            const double dy = static_cast<double>(b) - 5.0;
            w[a * 11 + b] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            total += w[a * 11 + b];
        }
    for (auto& v : w) v /= total;
    return w;
}

struct SsimScale {
    double luminance;
    double contrast;
    double structure;
};

/// Gaussian-windowed SSIM component means. Windows slide over every valid
/// latitude offset and wrap around in longitude (the grid is periodic), so
/// the components are invariant under longitudinal rotation.
inline SsimScale ssim_components(const Tensor& x, const Tensor& y) {
    static const std::vector<double> win = gaussian_window_11();
    constexpr double dyn_range = 255.0;
    const double c1 = (0.01 * dyn_range) * (0.01 * dyn_range);
    const double c2 = (0.03 * dyn_range) * (0.03 * dyn_range);
    const double c3 = c2 / 2.0;
    const std::size_t h = x.rows(), w = x.cols();
    double l_acc = 0.0, c_acc = 0.0, s_acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + 11 <= h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
            for (int a = 0; a < 11; ++a)
                for (int b = 0; b < 11; ++b) {
                    const double wv = win[a * 11 + b];
                    const std::size_t col = (j + static_cast<std::size_t>(b)) % w;
                    const double xv = x(i + a, col);
                    const double yv = y(i + a, col);
                    mx += wv * xv;
                    my += wv * yv;
                    mxx += wv * xv * xv;
                    myy += wv * yv * yv;
                    mxy += wv * xv * yv;
                }
            const double vx = std::max(0.0, mxx - mx * mx);
            const double vy = std::max(0.0, myy - my * my);
            const double cov = mxy - mx * my;
            const double sx = std::sqrt(vx);
            const double sy = std::sqrt(vy);
            l_acc += (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            c_acc += (2.0 * sx * sy + c2) / (vx + vy + c2);
            s_acc += (cov + c3) / (sx * sy + c3);
            ++count;
        }
    const double n = static_cast<double>(count);
    return {l_acc / n, c_acc / n, s_acc / n};
}

inline Tensor mean_pool_2x2(const Tensor& x) {
    const std::size_t h = x.rows() / 2, w = x.cols() / 2;
    Tensor out({h, w});
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            out(i, j) = 0.25 * (x(2 * i, 2 * j) + x(2 * i + 1, 2 * j) + x(2 * i, 2 * j + 1) +
                                x(2 * i + 1, 2 * j + 1));
    return out;
}

} // namespace detail

/// Number of dyadic scales an H x W field supports with an 11-tap window.
inline std::size_t ms_ssim_scales(std::size_t h, std::size_t w) {
    const double m = static_cast<double>(std::min(h, w)) / 11.0;
    if (m < 1.0) return 0;
    return std::min<std::size_t>(5, static_cast<std::size_t>(std::floor(std::log2(m))) + 1);
}

/// Multi-scale structural similarity. Both fields are mapped to [0, 255]
/// with the truth field's min/max; contrast/structure means are taken at
/// every scale (2x2 mean pooling in between) and luminance at the coarsest.
/// The standard five-scale exponents are renormalized over the scales the
/// grid supports. Negative component means clamp to zero rather than
/// producing complex powers. Longitudinal rotations leave the value
/// unchanged when the shift is a multiple of 2^(M-1) (any shift when the
/// grid supports a single scale); the pooling pairs columns, so odd shifts
/// regroup cells at deeper scales.
inline double ms_ssim(const Tensor& pred, const Tensor& truth) {
    if (!pred.same_shape(truth)) throw DataError("ms_ssim: shape mismatch");
    const std::size_t scales = ms_ssim_scales(truth.rows(), truth.cols());
    if (scales == 0) throw DataError("ms_ssim: field smaller than the 11x11 window");
    double t_min = truth[0], t_max = truth[0];
    for (std::size_t i = 0; i < truth.size(); ++i) {
        t_min = std::min(t_min, truth[i]);
        t_max = std::max(t_max, truth[i]);
    }
    if (t_max <= t_min) throw DegenerateError("ms_ssim: truth field has zero dynamic range");
    auto remap = [&](const Tensor& t) {
        Tensor out(t.shape());
        for (std::size_t i = 0; i < t.size(); ++i)
            out[i] = 255.0 * (t[i] - t_min) / (t_max - t_min);
        return out;
    };

    static constexpr double base_weights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    double wsum = 0.0;
    for (std::size_t s = 0; s < scales; ++s) wsum += base_weights[s];

    Tensor x = remap(pred), y = remap(truth);
    double result = 1.0;
    for (std::size_t s = 0; s < scales; ++s) {
        const auto comp = detail::ssim_components(x, y);
        const double wexp = base_weights[s] / wsum;
        result *= std::pow(std::max(0.0, comp.contrast), wexp);
        result *= std::pow(std::max(0.0, comp.structure), wexp);
        if (s + 1 == scales) result *= std::pow(std::max(0.0, comp.luminance), wexp);
        if (s + 1 < scales) {
            x = detail::mean_pool_2x2(x);
            y = detail::mean_pool_2x2(y);
        }
    }
    return result;
}

// -- reporting ----------------------------------------------------------------

inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{"rmse", "acc", "spec_div", "spec_res", "ms_ssim"};
    return names;
}

/// Per-variable, per-horizon metric table. Row order is fixed: dataset
/// variable order x horizon {1,2} x metric {rmse, acc, spec_div, spec_res,
/// ms_ssim}; degenerate inputs carry the documented "degenerate" marker
/// instead of a number.
struct MetricReport {
    struct Entry {
        std::string variable;
        int horizon;
        std::string metric;
        double value;
        bool degenerate;
    };
    std::vector<Entry> entries;

    static std::string format_value(double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }

    std::string to_csv() const {
        std::string out = "variable,horizon,metric,value\n";
        for (const auto& e : entries) {
            out += e.variable + "," + std::to_string(e.horizon) + "," + e.metric + ",";
            out += e.degenerate ? "degenerate" : format_value(e.value);
            out += "\n";
        }
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        for (const auto& e : entries) {
            auto& slot = j[e.variable]["horizon" + std::to_string(e.horizon)][e.metric];
            if (e.degenerate)
                slot = nullptr;
            else
                slot = e.value;
        }
        return j;
    }

    double aggregate_mean(const std::string& metric) const {
        double acc2 = 0.0;
        std::size_t n = 0;
        for (const auto& e : entries)
            if (e.metric == metric && !e.degenerate) {
                acc2 += e.value;
                ++n;
            }
        if (n == 0) throw DegenerateError("aggregate_mean: no finite entries for " + metric);
        return acc2 / static_cast<double>(n);
    }
};

/// Build the metric table for a prediction set against its truths,
/// averaging every metric over samples. Climatologies are per horizon.
inline MetricReport compute_metric_report(const std::vector<const Field*>& preds1,
                                          const std::vector<const Field*>& preds2,
                                          const std::vector<const Field*>& truths1,
                                          const std::vector<const Field*>& truths2,
                                          const Field& clim1, const Field& clim2) {
    if (preds1.size() != truths1.size() || preds2.size() != truths2.size() || preds1.empty())
        throw DataError("compute_metric_report: sample count mismatch");
    const Grid& grid = truths1[0]->grid;
    const auto& vars = truths1[0]->var_names;
    MetricReport report;
    for (std::size_t v = 0; v < vars.size(); ++v) {
        for (int horizon = 1; horizon <= 2; ++horizon) {
            const auto& preds = horizon == 1 ? preds1 : preds2;
            const auto& truths = horizon == 1 ? truths1 : truths2;
            const Field& clim = horizon == 1 ? clim1 : clim2;
            const Tensor clim_plane = field_plane(clim, v);
            double sums[5] = {0, 0, 0, 0, 0};
            bool degenerate[5] = {false, false, false, false, false};
            for (std::size_t s = 0; s < preds.size(); ++s) {
                const Tensor p = field_plane(*preds[s], v);
                const Tensor t = field_plane(*truths[s], v);
                sums[0] += rmse_weighted(p, t, grid);
                try {
                    sums[1] += acc(p, t, clim_plane, grid);
                } catch (const DegenerateError&) {
                    degenerate[1] = true;
                }
                try {
                    sums[2] += spec_div(p, t);
                } catch (const DegenerateError&) {
                    degenerate[2] = true;
                }
                try {
                    sums[3] += spec_res(p, t);
                } catch (const DegenerateError&) {
                    degenerate[3] = true;
                }
                try {
                    sums[4] += ms_ssim(p, t);
                } catch (const DegenerateError&) {
                    degenerate[4] = true;
                }
            }
            const double n = static_cast<double>(preds.size());
            for (std::size_t m = 0; m < 5; ++m)
                report.entries.push_back({vars[v], horizon, metric_names()[m],
                                          degenerate[m] ? 0.0 : sums[m] / n, degenerate[m]});
        }
    }
    return report;
}

} // namespace telepit
