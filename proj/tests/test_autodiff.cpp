#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "telepit/autodiff.hpp"
#include "telepit/rng.hpp"
#include "test_support.hpp"

using namespace telepit;
using test_support::check_tape_gradients;
using test_support::random_tensor;

// Every tape op gets its adjoint checked against central differences on
// small random instances. The graphs end in sum_sq so the output is scalar.

TEST_CASE("tape op gradients match finite differences") {
    Rng rng(2024);

    SECTION("matmul / matmul_nt") {
        check_tape_gradients({random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)},
                             [](Tape& t, const std::vector<Tape::Id>& in) {
                                 return t.sum_sq(t.matmul(in[0], in[1]));
                             });
        check_tape_gradients({random_tensor({3, 4}, rng), random_tensor({5, 4}, rng)},
                             [](Tape& t, const std::vector<Tape::Id>& in) {
                                 return t.sum_sq(t.matmul_nt(in[0], in[1]));
                             });
    }

    SECTION("add / sub / add_scaled / scale") {
        check_tape_gradients({random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)},
                             [](Tape& t, const std::vector<Tape::Id>& in) {
                                 Tape::Id a = t.add(in[0], in[1]);
                                 Tape::Id b = t.sub(a, in[1]);
                                 Tape::Id c = t.add_scaled(b, in[0], 0.25);
                                 return t.sum_sq(t.scale(c, -1.5));
                             });
    }

    SECTION("rowvec broadcasting") {
        check_tape_gradients({random_tensor({4, 3}, rng), random_tensor({1, 3}, rng)},
                             [](Tape& t, const std::vector<Tape::Id>& in) {
                                 return t.sum_sq(t.add_rowvec(in[0], in[1]));
                             });
        check_tape_gradients({random_tensor({4, 3}, rng), random_tensor({1, 3}, rng)},
                             [](Tape& t, const std::vector<Tape::Id>& in) {
                                 return t.sum_sq(t.mul_rowvec(in[0], in[1]));
                             });
        check_tape_gradients({random_tensor({1, 3}, rng)},
                             [](Tape& t, const std::vector<Tape::Id>& in) {
                                 return t.sum_sq(t.repeat_row(in[0], 5));
                             });
    }

    SECTION("scale_by learnable scalar") {
        check_tape_gradients({random_tensor({3, 3}, rng), random_tensor({1, 1}, rng)},
                             [](Tape& t, const std::vector<Tape::Id>& in) {
                                 return t.sum_sq(t.scale_by(in[0], in[1]));
                             });
    }

    SECTION("tanh / gelu") {
        check_tape_gradients({random_tensor({2, 5}, rng)},
                             [](Tape& t, const std::vector<Tape::Id>& in) {
                                 return t.sum_sq(t.tanh_op(in[0]));
                             });
        check_tape_gradients({random_tensor({2, 5}, rng)},
                             [](Tape& t, const std::vector<Tape::Id>& in) {
                                 return t.sum_sq(t.gelu_op(in[0]));
                             });
    }

    SECTION("shift_rows both directions") {
        for (int off : {+1, -1, +2}) {
            check_tape_gradients({random_tensor({5, 3}, rng)},
                                 [off](Tape& t, const std::vector<Tape::Id>& in) {
                                     return t.sum_sq(t.shift_rows(in[0], off));
                                 });
        }
    }

    SECTION("mean_rows / concat / slice") {
        check_tape_gradients({random_tensor({6, 4}, rng)},
                             [](Tape& t, const std::vector<Tape::Id>& in) {
                                 return t.sum_sq(t.mean_rows(in[0]));
                             });
        check_tape_gradients({random_tensor({3, 2}, rng), random_tensor({3, 4}, rng)},
                             [](Tape& t, const std::vector<Tape::Id>& in) {
                                 Tape::Id c = t.concat_cols(in[0], in[1]);
                                 return t.sum_sq(t.slice_cols(c, 1, 5));
                             });
    }

    SECTION("softmax_rows") {
        check_tape_gradients({random_tensor({3, 5}, rng)},
                             [](Tape& t, const std::vector<Tape::Id>& in) {
                                 Tape::Id y = t.softmax_rows(in[0]);
                                 // Weight the probabilities so the gradient is nontrivial.
                                 return t.sum_sq(t.add_scaled(y, t.tanh_op(y), 0.7));
                             });
    }

    SECTION("layer_norm_rows") {
        check_tape_gradients(
            {random_tensor({3, 6}, rng), random_tensor({1, 6}, rng), random_tensor({1, 6}, rng)},
            [](Tape& t, const std::vector<Tape::Id>& in) {
                return t.sum_sq(t.layer_norm_rows(in[0], in[1], in[2], 1e-5));
            },
            1e-5, 1e-7);
    }

    SECTION("value reused by two consumers accumulates both gradients") {
        check_tape_gradients({random_tensor({3, 3}, rng)},
                             [](Tape& t, const std::vector<Tape::Id>& in) {
                                 Tape::Id a = t.tanh_op(in[0]);
                                 Tape::Id b = t.matmul(a, a);
                                 return t.sum_sq(t.add(b, a));
                             });
    }
}

TEST_CASE("softmax rows sum to one on the tape") {
    Rng rng(3);
    Tape t;
    Tape::Id x = t.leaf(random_tensor({7, 9}, rng, 3.0));
    const Tensor& y = t.value(t.softmax_rows(x));
    for (std::size_t i = 0; i < y.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < y.cols(); ++j) s += y(i, j);
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}
