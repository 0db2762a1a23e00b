#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "telepit/teleattention.hpp"
#include "test_support.hpp"

using namespace telepit;

namespace {

/// Scalar-by-scalar re-derivation of the single-head teleconnection-aware
/// attention, straight from the formulas and independent of the tape.
Tensor naive_single_head(const Tensor& x, const AttnParams& p) {
    const std::size_t h = x.rows(), d = x.cols(), dk = p.heads[0].wq.cols();
    const std::size_t np = p.patterns.rows();
    // Global state and pattern mixture.
    std::vector<double> xbar(d, 0.0);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t b = 0; b < d; ++b) xbar[b] += x(i, b) / static_cast<double>(h);
    std::vector<double> logits(np, 0.0);
    for (std::size_t j = 0; j < np; ++j)
        for (std::size_t b = 0; b < d; ++b) logits[j] += xbar[b] * p.wp(b, j);
    auto omega = softmax_stable(logits);
    std::vector<double> c(d, 0.0);
    for (std::size_t j = 0; j < np; ++j)
        for (std::size_t b = 0; b < d; ++b) c[b] += omega[j] * p.patterns(j, b);

    auto project = [&](const Tensor& w, const std::vector<double>& v) {
        std::vector<double> out(dk, 0.0);
        for (std::size_t a = 0; a < dk; ++a)
            for (std::size_t b = 0; b < d; ++b) out[a] += v[b] * w(b, a);
        return out;
    };
    std::vector<std::vector<double>> q(h), k(h), val(h);
    for (std::size_t i = 0; i < h; ++i) {
        std::vector<double> row(d);
        for (std::size_t b = 0; b < d; ++b) row[b] = x(i, b);
        q[i] = project(p.heads[0].wq, row);
        k[i] = project(p.heads[0].wk, row);
        val[i] = project(p.heads[0].wv, row);
    }
    auto q_tel = project(p.heads[0].wq, c);
    const double inv = 1.0 / std::sqrt(static_cast<double>(dk));
    std::vector<double> bias(h, 0.0);
    for (std::size_t j = 0; j < h; ++j)
        for (std::size_t a = 0; a < dk; ++a) bias[j] += q_tel[a] * k[j][a] * inv;

    Tensor head({h, dk});
    for (std::size_t i = 0; i < h; ++i) {
        std::vector<double> row(h, 0.0);
        for (std::size_t j = 0; j < h; ++j) {
            for (std::size_t a = 0; a < dk; ++a) row[j] += q[i][a] * k[j][a] * inv;
            row[j] += p.lambda * bias[j];
        }
        auto attn = softmax_stable(row);
        for (std::size_t j = 0; j < h; ++j)
            for (std::size_t a = 0; a < dk; ++a) head(i, a) += attn[j] * val[j][a];
    }
    Tensor out({h, d});
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t b = 0; b < d; ++b)
            for (std::size_t a = 0; a < d; ++a) out(i, b) += (a < dk ? head(i, a) : 0.0) * p.wo(a, b);
    return out;
}

} // namespace

TEST_CASE("teleconnection_state") {
    Rng rng(41);

    SECTION("single pattern forces omega = [1]") {
        AttnParams p = AttnParams::make(4, 2, 1, 0.2, rng);
        Tensor x = test_support::random_tensor({3, 4}, rng);
        auto [c, omega] = teleconnection_state(x, p);
        CHECK(omega[0] == Catch::Approx(1.0).margin(1e-15));
        for (std::size_t b = 0; b < 4; ++b)
            CHECK(c[b] == Catch::Approx(p.patterns(0, b)).margin(1e-15));
    }

    SECTION("zero projection gives the uniform mixture") {
        AttnParams p = AttnParams::make(4, 2, 4, 0.2, rng);
        for (auto& v : p.wp.values()) v = 0.0;
        Tensor x = test_support::random_tensor({3, 4}, rng);
        auto [c, omega] = teleconnection_state(x, p);
        for (std::size_t j = 0; j < 4; ++j) CHECK(omega[j] == Catch::Approx(0.25).margin(1e-14));
        for (std::size_t b = 0; b < 4; ++b) {
            double mean = 0.0;
            for (std::size_t j = 0; j < 4; ++j) mean += p.patterns(j, b) / 4.0;
            CHECK(c[b] == Catch::Approx(mean).margin(1e-14));
        }
    }

    SECTION("hand softmax with logits [ln 3, 0]") {
        AttnParams p = AttnParams::make(2, 1, 2, 0.2, rng);
        // Build x and W^p so that xbar * W^p = [ln 3, 0].
        Tensor x({1, 2});
        x(0, 0) = 1.0;
        x(0, 1) = 0.0;
        p.wp(0, 0) = std::log(3.0);
        p.wp(0, 1) = 0.0;
        p.wp(1, 0) = 0.0;
        p.wp(1, 1) = 0.0;
        auto [c, omega] = teleconnection_state(x, p);
        CHECK(omega[0] == Catch::Approx(0.75).margin(1e-14));
        CHECK(omega[1] == Catch::Approx(0.25).margin(1e-14));
        for (std::size_t b = 0; b < 2; ++b)
            CHECK(c[b] ==
                  Catch::Approx(0.75 * p.patterns(0, b) + 0.25 * p.patterns(1, b)).margin(1e-14));
    }
}

TEST_CASE("ta_attention") {
    Rng rng(43);

    SECTION("lambda = 0 equals plain multi-head attention") {
        AttnParams p = AttnParams::make(8, 2, 3, 0.0, rng);
        Tensor x = test_support::random_tensor({5, 8}, rng);
        Tensor with = ta_attention(x, p, true);
        Tensor without = ta_attention(x, p, false);
        CHECK(test_support::max_abs_diff(with, without) < 1e-12);
    }

    SECTION("identical keys make the bias a no-op for any lambda") {
        AttnParams p = AttnParams::make(8, 2, 3, 1.7, rng);
        for (auto& head : p.heads)
            for (auto& v : head.wk.values()) v = 0.0; // K_j identical (all zero)
        Tensor x = test_support::random_tensor({5, 8}, rng);
        Tensor with = ta_attention(x, p, true);
        Tensor without = ta_attention(x, p, false);
        CHECK(test_support::max_abs_diff(with, without) < 1e-12);
    }

    SECTION("H=2 single head matches the scalar re-derivation") {
        AttnParams p = AttnParams::make(4, 1, 2, 0.3, rng);
        Tensor x = test_support::random_tensor({2, 4}, rng);
        Tensor out = ta_attention(x, p, true);
        Tensor oracle = naive_single_head(x, p);
        CHECK(test_support::max_abs_diff(out, oracle) < 1e-12);
    }

    SECTION("attention rows sum to one") {
        // Exposed indirectly: softmax_rows is covered in the autodiff tests;
        // here check the full op keeps V's row space (uniform V columns pass
        // through untouched because weights sum to one).
        AttnParams p = AttnParams::make(4, 2, 2, 0.5, rng);
        for (auto& head : p.heads) {
            for (auto& v : head.wv.values()) v = 0.0;
            for (std::size_t b = 0; b < 4; ++b) head.wv(b, 0) = 1.0; // V_j = sum of features
        }
        Tensor x({3, 4});
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t b = 0; b < 4; ++b) x(i, b) = 0.25; // all tokens equal -> V constant
        // With constant V rows, output before W^O must equal that constant.
        for (auto& v : p.wo.values()) v = 0.0;
        for (std::size_t a = 0; a < 4; ++a) p.wo(a, a) = 1.0;
        Tensor out = ta_attention(x, p, true);
        for (std::size_t i = 0; i < 3; ++i) CHECK(out(i, 0) == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("ta_block") {
    Rng rng(47);

    SECTION("zero weights reduce to the identity") {
        AttnParams p = AttnParams::make(8, 2, 3, 0.2, rng);
        for (auto& head : p.heads)
            for (auto* t : {&head.wq, &head.wk, &head.wv})
                for (auto& v : t->values()) v = 0.0;
        for (auto* t : {&p.wo, &p.ffn.w1, &p.ffn.b1, &p.ffn.w2, &p.ffn.b2})
            for (auto& v : t->values()) v = 0.0;
        Tensor x = test_support::random_tensor({4, 8}, rng);
        Tensor out = ta_block(x, p);
        CHECK(test_support::max_abs_diff(out, x) < 1e-14);
    }

    SECTION("output shape is H x D") {
        AttnParams p = AttnParams::make(8, 4, 3, 0.2, rng);
        Tensor x = test_support::random_tensor({6, 8}, rng);
        Tensor out = ta_block(x, p);
        CHECK(out.rows() == 6);
        CHECK(out.cols() == 8);
    }

    SECTION("H=1 collapses attention to a residual MLP stack") {
        AttnParams p = AttnParams::make(4, 1, 2, 0.4, rng);
        Tensor x = test_support::random_tensor({1, 4}, rng);
        // With one token the attention weights are [[1]], so the block is
        // x + LN(x)WvWo followed by the FFN residual; compose it by hand.
        std::vector<double> g(4), b(4), row(4);
        for (std::size_t i = 0; i < 4; ++i) {
            g[i] = p.ln1_gain[i];
            b[i] = p.ln1_bias[i];
            row[i] = x(0, i);
        }
        auto xn = layer_norm(row, g, b, layer_norm_eps);
        std::vector<double> v(1 * 4, 0.0);
        const std::size_t dk = 4; // single head keeps the full width
        std::vector<double> vproj(dk, 0.0);
        for (std::size_t a = 0; a < dk; ++a)
            for (std::size_t c = 0; c < 4; ++c) vproj[a] += xn[c] * p.heads[0].wv(c, a);
        std::vector<double> attn_out(4, 0.0);
        for (std::size_t c = 0; c < 4; ++c)
            for (std::size_t a = 0; a < dk; ++a) attn_out[c] += vproj[a] * p.wo(a, c);
        std::vector<double> x1(4);
        for (std::size_t c = 0; c < 4; ++c) x1[c] = row[c] + attn_out[c];
        for (std::size_t i = 0; i < 4; ++i) {
            g[i] = p.ln2_gain[i];
            b[i] = p.ln2_bias[i];
        }
        auto xn2 = layer_norm(x1, g, b, layer_norm_eps);
        std::vector<double> hidden(8);
        for (std::size_t a = 0; a < 8; ++a) {
            double s = p.ffn.b1[a];
            for (std::size_t c = 0; c < 4; ++c) s += p.ffn.w1(a, c) * xn2[c];
            hidden[a] = gelu(s);
        }
        std::vector<double> expect(4);
        for (std::size_t c = 0; c < 4; ++c) {
            double s = p.ffn.b2[c];
            for (std::size_t a = 0; a < 8; ++a) s += p.ffn.w2(c, a) * hidden[a];
            expect[c] = x1[c] + s;
        }
        Tensor out = ta_block(x, p);
        for (std::size_t c = 0; c < 4; ++c) CHECK(out(0, c) == Catch::Approx(expect[c]).margin(1e-12));
    }

    SECTION("gradients of patterns, wp and head projections") {
        AttnParams p = AttnParams::make(4, 2, 2, 0.3, rng);
        Tensor x = test_support::random_tensor({3, 4}, rng);
        test_support::check_tape_gradients(
            {x, p.patterns, p.wp, p.heads[0].wq, p.heads[0].wk, p.heads[0].wv, p.wo},
            [&](Tape& t, const std::vector<Tape::Id>& in) {
                ParamBinder binder{t};
                AttnVars v = bind_attn(binder, "attn", p);
                v.patterns = in[1];
                v.wp = in[2];
                v.heads[0] = {in[3], in[4], in[5]};
                v.wo = in[6];
                return t.sum_sq(ta_block_forward(t, in[0], v, true));
            },
            1e-5, 1e-7);
    }
}

TEST_CASE("cross_scale_fuse") {
    Rng rng(53);

    SECTION("L=0 returns the single band unchanged") {
        FusionParams p = FusionParams::make(0, 4, rng);
        Tensor band = test_support::random_tensor({3, 4}, rng);
        Tensor out = cross_scale_fuse({band}, p);
        for (std::size_t i = 0; i < band.size(); ++i) REQUIRE(out[i] == band[i]);
    }

    SECTION("pass-through fusion yields the band mean") {
        // Arrange the pair MLP to return (approximately) its second input
        // slice: w1 selects the slice with a large positive scale and
        // offset, placing GELU deep in its linear regime, and w2/b2 undo
        // the affine map. LayerNorm then passes rows that are already
        // standardized, up to the eps inflation.
        const std::size_t d = 4;
        FusionParams p = FusionParams::make(1, d, rng);
        const double kappa = 4.0, tau = 40.0;
        for (auto& v : p.pairs[0].mlp.w1.values()) v = 0.0;
        for (auto& v : p.pairs[0].mlp.w2.values()) v = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
            p.pairs[0].mlp.w1(a, d + a) = kappa;   // read the second band
            p.pairs[0].mlp.b1[a] = tau;
            p.pairs[0].mlp.w2(a, a) = 1.0 / kappa;
            p.pairs[0].mlp.b2[a] = -tau / kappa;
        }
        for (std::size_t a = d; a < 2 * d; ++a) p.pairs[0].mlp.b1[a] = tau; // unused half stays saturated
        // Bands: x1 rows standardized (mean 0, population variance 1).
        Tensor x0 = test_support::random_tensor({3, d}, rng);
        Tensor x1({3, d});
        for (std::size_t i = 0; i < 3; ++i) {
            x1(i, 0) = -1.0;
            x1(i, 1) = 1.0;
            x1(i, 2) = -1.0;
            x1(i, 3) = 1.0;
        }
        Tensor out = cross_scale_fuse({x0, x1}, p);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t b = 0; b < d; ++b)
                CHECK(out(i, b) == Catch::Approx(0.5 * (x0(i, b) + x1(i, b))).margin(1e-4));
    }

    SECTION("latitude permutation equivariance") {
        FusionParams p = FusionParams::make(2, 4, rng);
        std::vector<Tensor> bands;
        for (int l = 0; l < 3; ++l) bands.push_back(test_support::random_tensor({5, 4}, rng));
        const std::size_t perm[5] = {4, 2, 0, 3, 1};
        std::vector<Tensor> permuted;
        for (const auto& b : bands) {
            Tensor pb({5, 4});
            for (std::size_t i = 0; i < 5; ++i)
                for (std::size_t c = 0; c < 4; ++c) pb(i, c) = b(perm[i], c);
            permuted.push_back(pb);
        }
        Tensor a = cross_scale_fuse(bands, p);
        Tensor b = cross_scale_fuse(permuted, p);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t c = 0; c < 4; ++c) REQUIRE(b(i, c) == a(perm[i], c));
    }

    SECTION("band count mismatch rejected") {
        FusionParams p = FusionParams::make(2, 4, rng);
        Tensor band = test_support::random_tensor({3, 4}, rng);
        CHECK_THROWS_AS(cross_scale_fuse({band, band}, p), DataError);
    }

    SECTION("fusion parameter gradients") {
        FusionParams p = FusionParams::make(1, 4, rng);
        Tensor x0 = test_support::random_tensor({3, 4}, rng);
        Tensor x1 = test_support::random_tensor({3, 4}, rng);
        test_support::check_tape_gradients(
            {x0, x1, p.pairs[0].mlp.w1, p.pairs[0].mlp.b1, p.pairs[0].mlp.w2, p.pairs[0].mlp.b2,
             p.pairs[0].ln_gain, p.pairs[0].ln_bias},
            [](Tape& t, const std::vector<Tape::Id>& in) {
                FusionVars v{{FusionPairVars{MlpVars{in[2], in[3], in[4], in[5]}, in[6], in[7]}}};
                return t.sum_sq(cross_scale_fuse_forward(t, {in[0], in[1]}, v));
            },
            1e-5, 1e-7);
    }
}
