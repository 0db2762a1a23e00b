#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "telepit/field_io.hpp"
#include "telepit/grid.hpp"
#include "telepit/synth.hpp"
#include "test_support.hpp"

using namespace telepit;

namespace {

double box_mean(const Field& f, const BoxRegion& box, std::size_t var) {
    const auto rows = box.rows(f.grid);
    const auto cols = box.cols(f.grid);
    double s = 0.0;
    for (auto i : rows)
        for (auto j : cols) s += f.values(var, i, j);
    return s / static_cast<double>(rows.size() * cols.size());
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

TEST_CASE("make_grid geometry and weights") {
    SECTION("operational resolution") {
        Grid g = make_grid(121, 240);
        REQUIRE(g.latitudes.size() == 121);
        for (std::size_t i = 0; i < 121; ++i)
            CHECK(g.latitudes[i] * 180.0 / std::numbers::pi ==
                  Catch::Approx(-90.0 + 1.5 * static_cast<double>(i)).margin(1e-10));
        CHECK(g.longitudes.front() == Catch::Approx(-std::numbers::pi));
        CHECK(g.longitudes.back() < std::numbers::pi);
    }
    SECTION("restricted-span fixture weights") {
        Grid g = make_grid(3, 4, std::numbers::pi / 3.0); // lats -60, 0, +60
        CHECK(g.weights[0] == Catch::Approx(0.75).margin(1e-12));
        CHECK(g.weights[1] == Catch::Approx(1.5).margin(1e-12));
        CHECK(g.weights[2] == Catch::Approx(0.75).margin(1e-12));
    }
    SECTION("weights always average to one") {
        for (std::size_t h = 3; h <= 121; ++h) {
            Grid g = make_grid(h, 8);
            double mean = 0.0;
            for (double w : g.weights) mean += w;
            mean /= static_cast<double>(h);
            CHECK(std::abs(mean - 1.0) < 1e-12);
        }
    }
    SECTION("extent minima") {
        CHECK_THROWS_AS(make_grid(2, 8), DataError);
        CHECK_THROWS_AS(make_grid(8, 3), DataError);
    }
}

TEST_CASE("TPIT field file round-trips") {
    Rng rng(991);
    const auto dir = std::filesystem::temp_directory_path() / "tpit_test";
    std::filesystem::create_directories(dir);

    SECTION("random fields round-trip at single precision") {
        for (int trial = 0; trial < 10; ++trial) {
            const std::size_t c = 1 + rng.next_u64() % 4;
            const std::size_t h = 3 + rng.next_u64() % 10;
            const std::size_t w = 4 + rng.next_u64() % 12;
            Field f = test_support::random_field(make_grid(h, w), c, rng, 10.0);
            const auto path = dir / ("f" + std::to_string(trial) + ".tpit");
            write_field(f, path);
            Field g = read_field(path);
            REQUIRE(g.values.same_shape(f.values));
            REQUIRE(g.var_names == f.var_names);
            for (std::size_t i = 0; i < f.values.size(); ++i)
                REQUIRE(g.values[i] == static_cast<double>(static_cast<float>(f.values[i])));
        }
    }

    SECTION("wrong magic is rejected") {
        const auto path = dir / "bad_magic.tpit";
        std::ofstream os(path, std::ios::binary);
        os << "NOPExxxxxxxxxxxxxxxxxxxx";
        os.close();
        CHECK_THROWS_WITH(read_field(path), Catch::Matchers::ContainsSubstring("not a TPIT file"));
    }

    SECTION("truncated payload is rejected") {
        Field f = test_support::random_field(make_grid(5, 6), 2, rng);
        const auto path = dir / "trunc.tpit";
        write_field(f, path);
        // Chop off the last 10 bytes.
        const auto size = std::filesystem::file_size(path);
        std::filesystem::resize_file(path, size - 10);
        CHECK_THROWS_WITH(read_field(path), Catch::Matchers::ContainsSubstring("truncated payload"));
    }
}

TEST_CASE("normalization statistics") {
    Grid g = make_grid(4, 5);
    SECTION("two-sample hand-computed stats") {
        // One variable that is 0 everywhere in sample 1 and 2 everywhere in
        // sample 2: population mean 1, std 1.
        Dataset ds;
        for (double v : {0.0, 2.0}) {
            Sample s;
            s.input = Field::zeros(g, {"a"});
            s.target1 = Field::zeros(g, {"a"});
            s.target2 = Field::zeros(g, {"a"});
            for (Field* f : {&s.input, &s.target1, &s.target2})
                for (auto& x : f->values.values()) x = v;
            ds.samples.push_back(std::move(s));
            ds.split_of.push_back(Split::train);
        }
        NormStats st = compute_norm_stats(ds);
        CHECK(st.mean[0] == Catch::Approx(1.0).margin(1e-12));
        CHECK(st.std_dev[0] == Catch::Approx(1.0).margin(1e-12));
        Field n0 = normalize(ds.samples[0].input, st);
        Field n1 = normalize(ds.samples[1].input, st);
        CHECK(n0.values[0] == Catch::Approx(-1.0).margin(1e-12));
        CHECK(n1.values[0] == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("denormalize inverts normalize") {
        Rng rng(5);
        Dataset ds;
        for (int i = 0; i < 3; ++i) {
            Sample s;
            s.input = test_support::random_field(g, 2, rng, 4.0);
            s.target1 = test_support::random_field(g, 2, rng, 4.0);
            s.target2 = test_support::random_field(g, 2, rng, 4.0);
            ds.samples.push_back(std::move(s));
            ds.split_of.push_back(Split::train);
        }
        NormStats st = compute_norm_stats(ds);
        const Field& x = ds.samples[1].target1;
        Field back = denormalize(normalize(x, st), st);
        for (std::size_t i = 0; i < x.values.size(); ++i)
            CHECK(std::abs(back.values[i] - x.values[i]) < 1e-9);
    }
    SECTION("zero-variance variable rejected") {
        Dataset ds;
        Sample s;
        s.input = Field::zeros(g, {"flat"});
        s.target1 = Field::zeros(g, {"flat"});
        s.target2 = Field::zeros(g, {"flat"});
        ds.samples.push_back(std::move(s));
        ds.split_of.push_back(Split::train);
        CHECK_THROWS_AS(compute_norm_stats(ds), DataError);
    }
}

TEST_CASE("climatology") {
    Grid g = make_grid(3, 4);
    Dataset ds;
    for (double v : {1.0, 3.0}) {
        Sample s;
        s.input = Field::zeros(g, {"a"});
        s.target1 = Field::zeros(g, {"a"});
        s.target2 = Field::zeros(g, {"a"});
        for (auto& x : s.target1.values.values()) x = v;
        for (auto& x : s.target2.values.values()) x = -v;
        ds.samples.push_back(std::move(s));
        ds.split_of.push_back(Split::train);
    }
    SECTION("two samples average") {
        Field c1 = climatology(ds, 1);
        Field c2 = climatology(ds, 2);
        CHECK(c1.values[0] == Catch::Approx(2.0));
        CHECK(c2.values[0] == Catch::Approx(-2.0));
    }
    SECTION("single sample equals its target") {
        Dataset one;
        one.samples.push_back(ds.samples[1]);
        one.split_of.push_back(Split::train);
        Field c = climatology(one, 1);
        for (std::size_t i = 0; i < c.values.size(); ++i)
            CHECK(c.values[i] == ds.samples[1].target1.values[i]);
    }
    SECTION("empty split rejected") {
        Dataset none;
        CHECK_THROWS_AS(climatology(none, 1), DataError);
    }
}

TEST_CASE("synthetic dataset generator") {
    SynthConfig cfg;
    cfg.samples = 512;
    cfg.train_frac = 0.8;
    cfg.val_frac = 0.1;
    cfg.test_frac = 0.1;

    SECTION("bit-identical regeneration from one seed") {
        SynthConfig small = cfg;
        small.samples = 8;
        Dataset a = synth_dataset(small, Rng(7));
        Dataset b = synth_dataset(small, Rng(7));
        REQUIRE(a.samples.size() == b.samples.size());
        for (std::size_t s = 0; s < a.samples.size(); ++s) {
            for (std::size_t i = 0; i < a.samples[s].input.values.size(); ++i) {
                REQUIRE(a.samples[s].input.values[i] == b.samples[s].input.values[i]);
                REQUIRE(a.samples[s].target1.values[i] == b.samples[s].target1.values[i]);
                REQUIRE(a.samples[s].target2.values[i] == b.samples[s].target2.values[i]);
            }
        }
    }

    SECTION("planted correlation is monotone in rho and absent at rho=0") {
        double prev = -1.0;
        for (double rho : {0.0, 0.5, 1.0}) {
            SynthConfig c = cfg;
            c.teleconnection_strength = rho;
            Dataset ds = synth_dataset(c, Rng(7));
            std::vector<double> x, y;
            for (const auto& s : ds.samples) {
                x.push_back(box_mean(s.input, tropical_box(), 0));
                y.push_back(box_mean(s.target1, extratropical_box(), 0));
            }
            const double corr = pearson(x, y);
            if (rho == 0.0) CHECK(std::abs(corr) < 0.1);
            CHECK(corr > prev);
            prev = corr;
        }
        // At rho = 1 the mode must carry through the background variance of
        // both box means (bands and waves dilute the correlation).
        CHECK(prev > 0.25);
    }

    SECTION("rho scales the planted component exactly, and only it") {
        SynthConfig c0 = cfg;
        c0.samples = 10;
        c0.noise_std = 0.0;
        SynthConfig c1 = c0;
        c0.teleconnection_strength = 0.0;
        c1.teleconnection_strength = 1.0;
        Dataset d0 = synth_dataset(c0, Rng(3));
        Dataset d1 = synth_dataset(c1, Rng(3));
        const Grid& g = d0.samples[0].input.grid;
        const auto ring_rows = extratropical_box().rows(g);
        REQUIRE(!ring_rows.empty());
        for (std::size_t s = 0; s < d0.samples.size(); ++s) {
            // Inputs do not depend on rho at all.
            for (std::size_t i = 0; i < d0.samples[s].input.values.size(); ++i)
                REQUIRE(d0.samples[s].input.values[i] == d1.samples[s].input.values[i]);
            // The target difference is m * gain * pattern(lat), zonally
            // uniform. Estimate m*gain from the ring row closest to the
            // pattern center and check every cell against it.
            const Field& t1a = d1.samples[s].target1;
            const Field& t1b = d0.samples[s].target1;
            const std::size_t ref_row = ring_rows.back();
            const double ref_pat = std::exp(
                -0.5 * std::pow((g.latitudes[ref_row] * 180.0 / std::numbers::pi - 52.5) / 8.0, 2.0));
            const double m_hat =
                (t1a.values(0, ref_row, 0) - t1b.values(0, ref_row, 0)) / ref_pat;
            for (std::size_t i = 0; i < g.h; ++i) {
                const double pat = std::exp(
                    -0.5 * std::pow((g.latitudes[i] * 180.0 / std::numbers::pi - 52.5) / 8.0, 2.0));
                for (std::size_t j = 0; j < g.w; ++j) {
                    const double diff1 =
                        t1a.values(0, i, j) - t1b.values(0, i, j);
                    const double diff2 =
                        d1.samples[s].target2.values(0, i, j) - d0.samples[s].target2.values(0, i, j);
                    CHECK(std::abs(diff1 - m_hat * pat) < 1e-9);
                    CHECK(std::abs(diff2 - m_hat * pat) < 1e-9);
                }
            }
        }
    }

    SECTION("split counts follow the fractions") {
        SynthConfig c = cfg;
        c.samples = 640;
        Dataset ds = synth_dataset(c, Rng(7));
        CHECK(ds.indices(Split::train).size() == 512);
        CHECK(ds.indices(Split::val).size() == 64);
        CHECK(ds.indices(Split::test).size() == 64);
    }

    SECTION("invalid fractions rejected") {
        SynthConfig c = cfg;
        c.train_frac = 0.9;
        c.val_frac = 0.3;
        c.test_frac = 0.1;
        CHECK_THROWS_AS(synth_dataset(c, Rng(1)), ConfigError);
    }
}
