#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "telepit/errors.hpp"

namespace telepit {

namespace detail {

/// In-place iterative radix-2 Cooley-Tukey. n must be a power of two.
inline void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const auto u = a[i + j];
                const auto v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= static_cast<double>(n);
}

/// Forward DFT of arbitrary length via Bluestein's chirp-z transform.
inline std::vector<std::complex<double>> dft_any(std::span<const double> x) {
    const std::size_t n = x.size();
    if ((n & (n - 1)) == 0) {
        std::vector<std::complex<double>> a(x.begin(), x.end());
        fft_pow2(a, false);
        return a;
    }
    std::size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;
    std::vector<std::complex<double>> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        // Reduce k^2 mod 2n before the trig call to keep angles small.
        const std::size_t k2 = (k * k) % (2 * n);
        const double ang = std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = {std::cos(ang), -std::sin(ang)};
    }
    std::vector<std::complex<double>> a(m), b(m);
    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
    b[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);
    fft_pow2(a, false);
    fft_pow2(b, false);
    for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
    fft_pow2(a, true);
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * chirp[k];
    return out;
}

} // namespace detail

/// Power spectrum of one longitude row: entry k-1 holds |DFT(row)[k]|^2 for
/// k = 1..floor(W/2). The k = 0 (mean) component is excluded; the mean
/// carries no pattern information and would dominate normalized spectra.
inline std::vector<double> power_spectrum_1d(std::span<const double> row) {
    const std::size_t w = row.size();
    if (w < 4) throw DataError("power_spectrum_1d: row length must be >= 4");
    for (double v : row)
        if (!std::isfinite(v)) throw NumericError("power_spectrum_1d: non-finite input");
    const auto spec = detail::dft_any(row);
    std::vector<double> power(w / 2);
    for (std::size_t k = 1; k <= w / 2; ++k) power[k - 1] = std::norm(spec[k]);
    return power;
}

} // namespace telepit
