#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "telepit/fft.hpp"
#include "telepit/numerics.hpp"
#include "telepit/rng.hpp"
#include "test_support.hpp"

using namespace telepit;

TEST_CASE("softmax_stable basic values") {
    SECTION("symmetry") {
        auto p = softmax_stable(std::vector<double>{0.0, 0.0});
        CHECK(p[0] == Catch::Approx(0.5).margin(1e-15));
        CHECK(p[1] == Catch::Approx(0.5).margin(1e-15));
    }
    SECTION("hand-computed two-logit case") {
        // e^{ln 2} / (e^{ln 2} + 1) = 2/3
        auto p = softmax_stable(std::vector<double>{std::log(2.0), 0.0});
        CHECK(p[0] == Catch::Approx(2.0 / 3.0).margin(1e-14));
        CHECK(p[1] == Catch::Approx(1.0 / 3.0).margin(1e-14));
    }
    SECTION("no overflow at large equal logits") {
        auto p = softmax_stable(std::vector<double>{1000.0, 1000.0, 1000.0});
        for (double v : p) CHECK(v == Catch::Approx(1.0 / 3.0).margin(1e-14));
    }
    SECTION("errors") {
        CHECK_THROWS_AS(softmax_stable(std::vector<double>{}), NumericError);
        CHECK_THROWS_AS(softmax_stable(std::vector<double>{1.0, std::nan("")}), NumericError);
    }
}

TEST_CASE("softmax_stable properties over random logits") {
    Rng rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.next_u64() % 12;
        std::vector<double> v(n);
        for (auto& x : v) x = rng.uniform(-1e4, 1e4);
        auto p = softmax_stable(v);
        double sum = 0.0;
        for (double x : p) {
            CHECK(x >= 0.0);
            sum += x;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
    // Constant-shift invariance (moderate magnitudes keep the comparison
    // meaningful at the 1e-12 level; the shift itself is exact only in
    // exact arithmetic).
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.next_u64() % 8;
        std::vector<double> v(n), shifted(n);
        const double c = rng.uniform(-100.0, 100.0);
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = rng.uniform(-100.0, 100.0);
            shifted[i] = v[i] + c;
        }
        auto p = softmax_stable(v);
        auto q = softmax_stable(shifted);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(p[i] - q[i]) < 1e-12);
    }
}

TEST_CASE("layer_norm examples") {
    std::vector<double> ones{1.0, 1.0, 1.0};
    std::vector<double> zeros{0.0, 0.0, 0.0};
    SECTION("constant vector collapses to zero") {
        auto y = layer_norm(std::vector<double>{5.0, 5.0, 5.0}, ones, zeros);
        for (double v : y) CHECK(v == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("already standardized input is (almost) fixed") {
        std::vector<double> g{1.0, 1.0}, b{0.0, 0.0};
        auto y = layer_norm(std::vector<double>{1.0, -1.0}, g, b, 1e-14);
        CHECK(y[0] == Catch::Approx(1.0).margin(1e-9));
        CHECK(y[1] == Catch::Approx(-1.0).margin(1e-9));
    }
    SECTION("affine output") {
        std::vector<double> g{2.0, 2.0}, b{1.0, 1.0};
        auto y = layer_norm(std::vector<double>{3.0, 5.0}, g, b, 1e-5);
        // x-hat = [-1, 1] up to the eps inflation of the denominator.
        CHECK(y[0] == Catch::Approx(-1.0).margin(1e-4));
        CHECK(y[1] == Catch::Approx(3.0).margin(1e-4));
    }
    SECTION("statistics with unit gain") {
        Rng rng(7);
        std::vector<double> x(16), g(16, 1.0), b(16, 0.0);
        for (auto& v : x) v = rng.normal(0.0, 3.0);
        auto y = layer_norm(x, g, b, 1e-10);
        double mean = 0.0;
        for (double v : y) mean += v;
        mean /= 16.0;
        double var = 0.0;
        for (double v : y) var += (v - mean) * (v - mean);
        var /= 16.0;
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(var - 1.0) < 1e-6);
    }
}

TEST_CASE("gelu examples") {
    CHECK(gelu(0.0) == 0.0);
    CHECK(gelu(8.0) == Catch::Approx(8.0).margin(1e-9));
    CHECK(gelu(12.0) == Catch::Approx(12.0).margin(1e-9));
    // 1 * Phi(1), with Phi(1) from the erf oracle.
    const double phi1 = 0.5 * (1.0 + std::erf(1.0 / std::numbers::sqrt2));
    CHECK(gelu(1.0) == Catch::Approx(phi1).margin(1e-15));
    CHECK(phi1 == Catch::Approx(0.8413447460685429).margin(1e-12));
    // Monotone nondecreasing right of the dip (the derivative
    // Phi(x) + x*phi(x) is nonnegative for x >= -0.75).
    double prev = gelu(-0.7);
    for (double x = -0.7 + 0.05; x <= 10.0; x += 0.05) {
        const double cur = gelu(x);
        CHECK(cur >= prev - 1e-12);
        prev = cur;
    }
}

TEST_CASE("power_spectrum_1d") {
    SECTION("constant row has empty spectrum") {
        std::vector<double> row(16, 3.25);
        auto p = power_spectrum_1d(row);
        REQUIRE(p.size() == 8);
        for (double v : p) CHECK(std::abs(v) < 1e-18);
    }
    SECTION("single tone concentrates at k=1") {
        const std::size_t w = 8;
        std::vector<double> row(w);
        for (std::size_t j = 0; j < w; ++j)
            row[j] = std::cos(2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(w));
        auto p = power_spectrum_1d(row);
        auto oracle = test_support::naive_power_spectrum(row);
        REQUIRE(p.size() == 4);
        CHECK(p[0] == Catch::Approx(16.0).margin(1e-9)); // |W/2|^2
        for (std::size_t k = 1; k < p.size(); ++k) CHECK(std::abs(p[k]) < 1e-10);
        for (std::size_t k = 0; k < p.size(); ++k) CHECK(p[k] == Catch::Approx(oracle[k]).margin(1e-9));
    }
    SECTION("matches the naive DFT oracle on random rows") {
        Rng rng(42);
        for (std::size_t w : {4u, 8u, 16u, 240u}) {
            std::vector<double> row(w);
            for (auto& v : row) v = rng.normal(0.0, 2.0);
            auto p = power_spectrum_1d(row);
            auto oracle = test_support::naive_power_spectrum(row);
            REQUIRE(p.size() == oracle.size());
            for (std::size_t k = 0; k < p.size(); ++k) {
                const double denom = std::max(1.0, std::abs(oracle[k]));
                CHECK(std::abs(p[k] - oracle[k]) / denom < 1e-9);
            }
        }
    }
    SECTION("rejects short rows") {
        CHECK_THROWS_AS(power_spectrum_1d(std::vector<double>{1.0, 2.0, 3.0}), DataError);
    }
}

TEST_CASE("finite_diff_grad examples") {
    SECTION("quadratic") {
        auto f = [](std::span<const double> p) { return p[0] * p[0]; };
        auto g = finite_diff_grad(f, std::vector<double>{3.0}, 1e-4);
        CHECK(g[0] == Catch::Approx(6.0).margin(1e-8));
    }
    SECTION("sum of sines") {
        auto f = [](std::span<const double> p) {
            double s = 0.0;
            for (double x : p) s += std::sin(x);
            return s;
        };
        auto g = finite_diff_grad(f, std::vector<double>{0.0, std::numbers::pi / 2.0}, 1e-4);
        CHECK(g[0] == Catch::Approx(1.0).margin(1e-8));
        CHECK(g[1] == Catch::Approx(0.0).margin(1e-8));
    }
    SECTION("constant function") {
        auto f = [](std::span<const double>) { return 4.5; };
        auto g = finite_diff_grad(f, std::vector<double>{1.0, 2.0, 3.0}, 1e-4);
        for (double v : g) CHECK(std::abs(v) < 1e-10);
    }
}

TEST_CASE("rng determinism and stream independence") {
    Rng a(12345);
    Rng b(12345);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    // Named streams are independent of the parent's draw position.
    Rng c(77);
    c.next_u64();
    c.next_u64();
    Rng d(77);
    Rng s1 = c.stream("weights");
    Rng s2 = d.stream("weights");
    for (int i = 0; i < 10; ++i) REQUIRE(s1.next_u64() == s2.next_u64());

    // Distinct streams decorrelate.
    Rng e1 = Rng(5).stream("x");
    Rng e2 = Rng(5).stream("y");
    bool any_diff = false;
    for (int i = 0; i < 10; ++i) any_diff |= (e1.next_u64() != e2.next_u64());
    CHECK(any_diff);

    // Uniform draws live in [0, 1).
    Rng u(9);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.next_uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
}
