#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "telepit/errors.hpp"
#include "telepit/grid.hpp"
#include "telepit/rng.hpp"

namespace telepit {

/// Configuration of the synthetic spherical-atmosphere generator.
struct SynthConfig {
    std::size_t variables = 3;
    std::size_t lat = 16;
    std::size_t lon = 32;
    std::size_t samples = 640;
    double train_frac = 0.8;
    double val_frac = 0.1;
    double test_frac = 0.1;
    double teleconnection_strength = 0.8; ///< rho in [0, 1]
    double noise_std = 0.05;
    double band_amp = 1.0; ///< zonally-banded mean state amplitude
    double wave_amp = 0.7; ///< traveling-wave amplitude scale
    double mode_amp = 1.0; ///< planted teleconnection mode amplitude

    void validate() const {
        if (variables < 1) throw ConfigError("synth: variables must be >= 1");
        if (lat < 3) throw ConfigError("synth: lat must be >= 3");
        if (lon < 4) throw ConfigError("synth: lon must be >= 4");
        if (samples < 3) throw ConfigError("synth: need at least 3 samples");
        const double fsum = train_frac + val_frac + test_frac;
        if (train_frac <= 0.0 || val_frac <= 0.0 || test_frac <= 0.0 || std::abs(fsum - 1.0) > 1e-9)
            throw ConfigError("synth: split fractions must be positive and sum to 1");
        if (teleconnection_strength < 0.0 || teleconnection_strength > 1.0)
            throw ConfigError("synth: teleconnection_strength must be in [0, 1]");
        if (noise_std < 0.0) throw ConfigError("synth: noise_std must be >= 0");
    }
};

/// Rectangular lat-lon region in degrees (longitude range may span the
/// whole circle).
struct BoxRegion {
    double lat_lo_deg, lat_hi_deg;
    double lon_lo_deg, lon_hi_deg;

    std::vector<std::size_t> rows(const Grid& g) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < g.h; ++i) {
            const double d = g.latitudes[i] * 180.0 / std::numbers::pi;
            if (d >= lat_lo_deg - 1e-9 && d <= lat_hi_deg + 1e-9) out.push_back(i);
        }
        return out;
    }

    std::vector<std::size_t> cols(const Grid& g) const {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < g.w; ++j) {
            const double d = g.longitudes[j] * 180.0 / std::numbers::pi;
            if (d >= lon_lo_deg - 1e-9 && d <= lon_hi_deg + 1e-9) out.push_back(j);
        }
        return out;
    }
};

/// Where the teleconnection mode enters the input.
inline BoxRegion tropical_box() { return {-15.0, 15.0, 30.0, 90.0}; }

/// Where the (scaled) mode reappears in both targets. The region is a full
/// latitude ring so that traveling waves average out of its mean exactly,
/// leaving the planted mode as the only tropics-to-extratropics signal.
inline BoxRegion extratropical_box() { return {40.0, 65.0, -180.0, 180.0}; }

namespace detail {

inline double bump(double x, double center, double sigma) {
    const double d = (x - center) / sigma;
    return std::exp(-0.5 * d * d);
}

inline double wrapped_lon_dist(double a, double b) {
    double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
    return std::min(d, 2.0 * std::numbers::pi - d);
}

inline double deg(double d) { return d * std::numbers::pi / 180.0; }

/// Smooth tropical pattern, localized in latitude and longitude.
inline double pattern_tropical(double lat, double lon) {
    return bump(lat, 0.0, deg(8.0)) * bump(wrapped_lon_dist(lon, deg(60.0)), 0.0, deg(25.0));
}

/// Smooth extratropical ring pattern, zonally uniform.
inline double pattern_extratropical(double lat) { return bump(lat, deg(52.5), deg(8.0)); }

/// Latitude-band basis for the slowly varying mean state.
inline constexpr double band_centers_deg[] = {-60.0, -30.0, 0.0, 30.0, 60.0};
inline constexpr std::size_t n_bands = 5;
inline constexpr double band_sigma_deg = 12.0;

/// Angular speed (radians/day) of traveling wavenumber m. Fast enough that
/// the 14-day window means damp the waves heavily.
inline double wave_speed(std::size_t m) { return 0.30 + 0.08 * static_cast<double>(m); }

} // namespace detail

/// Generate the synthetic dataset. Each sample combines
///  (a) a zonally-banded mean state (smooth latitude bumps, static in time),
///  (b) longitudinal traveling waves of wavenumbers 1-3 whose phase advances
///      between the input day and the target windows,
///  (c) a planted teleconnection: scalar mode m ~ N(0,1) added as
///      +m*pattern to the tropical input box and +rho*m*pattern to the
///      extratropical ring of both targets,
///  (d) i.i.d. observation noise on every emitted field.
/// Generation is bit-deterministic given the Rng; rho enters only as a
/// multiplier so datasets at different rho share all random draws.
inline Dataset synth_dataset(const SynthConfig& cfg, const Rng& rng) {
    cfg.validate();
    const Grid grid = make_grid(cfg.lat, cfg.lon);
    std::vector<std::string> names;
    for (std::size_t v = 0; v < cfg.variables; ++v) names.push_back("v" + std::to_string(v));

    const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_frac * static_cast<double>(cfg.samples)));
    const auto n_val = static_cast<std::size_t>(std::llround(cfg.val_frac * static_cast<double>(cfg.samples)));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= cfg.samples)
        throw ConfigError("synth: split fractions leave an empty split");

    // Per-variable gain of the teleconnection pattern.
    auto mode_gain = [&](std::size_t v) {
        constexpr double gains[] = {1.0, 0.8, -0.6};
        return gains[v % 3];
    };

    Dataset ds;
    ds.samples.reserve(cfg.samples);
    Rng base = rng.stream("synth");
    for (std::size_t s = 0; s < cfg.samples; ++s) {
        Rng sample_rng = base.stream(static_cast<std::uint64_t>(s));
        Rng band_rng = sample_rng.stream("bands");
        Rng wave_rng = sample_rng.stream("waves");
        Rng mode_rng = sample_rng.stream("mode");

        // Latent coefficients for this sample.
        std::vector<double> alpha(cfg.variables * detail::n_bands);
        for (auto& a : alpha) a = cfg.band_amp * band_rng.next_normal();
        std::vector<double> wamp(cfg.variables * 3), wphase(cfg.variables * 3);
        for (std::size_t k = 0; k < wamp.size(); ++k) {
            wamp[k] = cfg.wave_amp * wave_rng.next_normal();
            wphase[k] = wave_rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
        const double mode = cfg.mode_amp * mode_rng.next_normal();

        // Daily background (bands static, waves advected).
        auto background = [&](std::size_t v, std::size_t i, std::size_t j, double t) {
            const double lat = grid.latitudes[i];
            const double lon = grid.longitudes[j];
            double x = 0.0;
            for (std::size_t b = 0; b < detail::n_bands; ++b)
                x += alpha[v * detail::n_bands + b] *
                     detail::bump(lat, detail::deg(detail::band_centers_deg[b]),
                                  detail::deg(detail::band_sigma_deg));
            for (std::size_t m = 1; m <= 3; ++m) {
                const std::size_t k = v * 3 + (m - 1);
                x += wamp[k] * std::cos(lat) *
                     std::cos(static_cast<double>(m) * lon + wphase[k] - detail::wave_speed(m) * t);
            }
            return x;
        };

        Sample smp;
        smp.input = Field::zeros(grid, names);
        smp.target1 = Field::zeros(grid, names);
        smp.target2 = Field::zeros(grid, names);
        for (std::size_t v = 0; v < cfg.variables; ++v)
            for (std::size_t i = 0; i < cfg.lat; ++i)
                for (std::size_t j = 0; j < cfg.lon; ++j) {
                    smp.input.values(v, i, j) = background(v, i, j, 1.0);
                    double m1 = 0.0, m2 = 0.0;
                    for (int t = 15; t <= 28; ++t) m1 += background(v, i, j, static_cast<double>(t));
                    for (int t = 29; t <= 42; ++t) m2 += background(v, i, j, static_cast<double>(t));
                    smp.target1.values(v, i, j) = m1 / 14.0;
                    smp.target2.values(v, i, j) = m2 / 14.0;
                }

        // Planted teleconnection.
        for (std::size_t v = 0; v < cfg.variables; ++v) {
            const double g = mode_gain(v);
            for (std::size_t i = 0; i < cfg.lat; ++i) {
                const double lat = grid.latitudes[i];
                const double pe = detail::pattern_extratropical(lat);
                for (std::size_t j = 0; j < cfg.lon; ++j) {
                    smp.input.values(v, i, j) +=
                        mode * g * detail::pattern_tropical(lat, grid.longitudes[j]);
                    const double add = cfg.teleconnection_strength * mode * g * pe;
                    smp.target1.values(v, i, j) += add;
                    smp.target2.values(v, i, j) += add;
                }
            }
        }

        // Observation noise, one independent stream per emitted field.
        Field* fields[] = {&smp.input, &smp.target1, &smp.target2};
        const char* noise_names[] = {"noise.in", "noise.t1", "noise.t2"};
        for (int f = 0; f < 3; ++f) {
            Rng noise_rng = sample_rng.stream(noise_names[f]);
            for (auto& x : fields[f]->values.values()) x += cfg.noise_std * noise_rng.next_normal();
        }

        ds.samples.push_back(std::move(smp));
        ds.split_of.push_back(s < n_train ? Split::train
                                          : (s < n_train + n_val ? Split::val : Split::test));
    }
    return ds;
}

} // namespace telepit
