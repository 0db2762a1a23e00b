#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "telepit/errors.hpp"

namespace telepit {

/// Compensated (Neumaier) summation. Order-stable and far more accurate than
/// a plain left-to-right loop on long rows.
inline double neumaier_sum(std::span<const double> xs) {
    double sum = 0.0, comp = 0.0;
    for (double x : xs) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    return sum + comp;
}

/// Mean of a row. Exact (no rounding) when every entry is bitwise equal,
/// which makes zonal averaging an exact projection on already-symmetrized
/// fields.
inline double row_mean(std::span<const double> xs) {
    bool constant = true;
    for (double x : xs)
        if (x != xs[0]) {
            constant = false;
            break;
        }
    if (constant) return xs[0];
    return neumaier_sum(xs) / static_cast<double>(xs.size());
}

/// Numerically stable softmax via max-subtraction. Nonnegative outputs
/// summing to one; invariant under adding a constant to all logits.
inline std::vector<double> softmax_stable(std::span<const double> logits) {
    if (logits.empty()) throw NumericError("softmax_stable: empty input");
    double m = logits[0];
    for (double v : logits) {
        if (!std::isfinite(v)) throw NumericError("softmax_stable: non-finite logit");
        m = std::max(m, v);
    }
    std::vector<double> out(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        z += out[i];
    }
    for (double& v : out) v /= z;
    return out;
}

/// Layer normalization of one feature vector: x is standardized with the
/// population variance plus eps, then scaled and shifted.
inline std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain,
                                      std::span<const double> bias, double eps = 1e-5) {
    const std::size_t d = x.size();
    if (d == 0 || gain.size() != d || bias.size() != d)
        throw DataError("layer_norm: dimension mismatch");
    double mean = 0.0;
    for (double v : x) {
        if (!std::isfinite(v)) throw NumericError("layer_norm: non-finite input");
        mean += v;
    }
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = gain[i] * ((x[i] - mean) * inv) + bias[i];
    return out;
}

/// Exact GELU, x * Phi(x) with the Gaussian CDF via erf (not the tanh
/// approximation).
inline double gelu(double x) {
    return x * 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
}

/// d/dx GELU = Phi(x) + x * phi(x).
inline double gelu_grad(double x) {
    const double phi_cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double phi_pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return phi_cdf + x * phi_pdf;
}

/// Central finite differences, (f(p+eps*e_i) - f(p-eps*e_i)) / (2*eps).
/// The gradient oracle every training gradient in this library is checked
/// against.
inline std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                            std::span<const double> p, double eps = 1e-4) {
    if (eps <= 0.0) throw NumericError("finite_diff_grad: eps must be positive");
    std::vector<double> work(p.begin(), p.end());
    std::vector<double> grad(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = work[i];
        work[i] = keep + eps;
        const double fp = f(work);
        work[i] = keep - eps;
        const double fm = f(work);
        work[i] = keep;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_diff_grad: non-finite probe value");
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    return grad;
}

} // namespace telepit
