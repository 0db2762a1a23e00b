#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "telepit/numerics.hpp"
#include "telepit/tensor.hpp"

namespace telepit {

/// Reverse-mode differentiation tape over 2-D tensors.
///
/// Every op computes its value eagerly and records a closure that scatters
/// the output gradient to its parents. backward(root) seeds d(root) = 1 and
/// replays the closures in reverse creation order, which is a valid
/// topological order by construction. Gradients accumulate with +=, so a
/// value used twice receives both contributions.
///
/// A Tape is built per forward pass and discarded; it is neither copyable
/// nor movable because closures capture `this`.
class Tape {
public:
    using Id = std::size_t;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Id leaf(Tensor value) {
        nodes_.push_back({std::move(value), Tensor{}, {}});
        return nodes_.size() - 1;
    }

    const Tensor& value(Id id) const { return nodes_[id].value; }
    const Tensor& grad(Id id) const { return nodes_[id].grad; }

    // -- elementwise -------------------------------------------------------

    Id add(Id a, Id b) {
        Tensor out = value(a);
        add_inplace(out, value(b));
        return record(std::move(out), [this, a, b](const Tensor& g) {
            add_inplace(grad_(a), g);
            add_inplace(grad_(b), g);
        });
    }

    Id sub(Id a, Id b) {
        Tensor out = value(a);
        axpy_inplace(out, -1.0, value(b));
        return record(std::move(out), [this, a, b](const Tensor& g) {
            add_inplace(grad_(a), g);
            axpy_inplace(grad_(b), -1.0, g);
        });
    }

    /// a + c*b for a compile-time-known constant c (Euler steps, residuals).
    Id add_scaled(Id a, Id b, double c) {
        Tensor out = value(a);
        axpy_inplace(out, c, value(b));
        return record(std::move(out), [this, a, b, c](const Tensor& g) {
            add_inplace(grad_(a), g);
            axpy_inplace(grad_(b), c, g);
        });
    }

    Id scale(Id a, double c) {
        Tensor out = value(a);
        scale_inplace(out, c);
        return record(std::move(out), [this, a, c](const Tensor& g) { axpy_inplace(grad_(a), c, g); });
    }

    /// s * A where s is a learnable 1x1 tensor.
    Id scale_by(Id a, Id s) {
        const double sv = value(s)[0];
        Tensor out = value(a);
        scale_inplace(out, sv);
        return record(std::move(out), [this, a, s, sv](const Tensor& g) {
            axpy_inplace(grad_(a), sv, g);
            const Tensor& av = value(a);
            double acc = 0.0;
            for (std::size_t i = 0; i < av.size(); ++i) acc += g[i] * av[i];
            grad_(s)[0] += acc;
        });
    }

    Id tanh_op(Id a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
        Id id = record(std::move(out), {});
        nodes_[id].back = [this, a, id](const Tensor& g) {
            const Tensor& y = value(id);
            Tensor& da = grad_(a);
            for (std::size_t i = 0; i < y.size(); ++i) da[i] += (1.0 - y[i] * y[i]) * g[i];
        };
        return id;
    }

    Id gelu_op(Id a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu(out[i]);
        return record(std::move(out), [this, a](const Tensor& g) {
            const Tensor& x = value(a);
            Tensor& da = grad_(a);
            for (std::size_t i = 0; i < x.size(); ++i) da[i] += gelu_grad(x[i]) * g[i];
        });
    }

    // -- matrix products ----------------------------------------------------

    Id matmul(Id a, Id b) {
        return record(telepit::matmul(value(a), value(b)), [this, a, b](const Tensor& g) {
            add_inplace(grad_(a), telepit::matmul_nt(g, value(b)));
            add_inplace(grad_(b), telepit::matmul_tn(value(a), g));
        });
    }

    /// A * B^T; applies an (out, in)-shaped weight to row tokens.
    Id matmul_nt(Id a, Id b) {
        return record(telepit::matmul_nt(value(a), value(b)), [this, a, b](const Tensor& g) {
            add_inplace(grad_(a), telepit::matmul(g, value(b)));
            add_inplace(grad_(b), telepit::matmul_tn(g, value(a)));
        });
    }

    // -- broadcasting -------------------------------------------------------

    /// A(m,n) + v(1,n) broadcast down the rows.
    Id add_rowvec(Id a, Id v) {
        Tensor out = value(a);
        const Tensor& vv = value(v);
        const std::size_t m = out.rows(), n = out.cols();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out(i, j) += vv[j];
        return record(std::move(out), [this, a, v](const Tensor& g) {
            add_inplace(grad_(a), g);
            Tensor& dv = grad_(v);
            const std::size_t m = g.rows(), n = g.cols();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) dv[j] += g(i, j);
        });
    }

    /// A(m,n) ⊙ v(1,n) broadcast down the rows.
    Id mul_rowvec(Id a, Id v) {
        Tensor out = value(a);
        const Tensor& vv = value(v);
        const std::size_t m = out.rows(), n = out.cols();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out(i, j) *= vv[j];
        return record(std::move(out), [this, a, v](const Tensor& g) {
            const Tensor& av = value(a);
            const Tensor& vv2 = value(v);
            Tensor& da = grad_(a);
            Tensor& dv = grad_(v);
            const std::size_t m = g.rows(), n = g.cols();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    da(i, j) += g(i, j) * vv2[j];
                    dv[j] += g(i, j) * av(i, j);
                }
        });
    }

    /// Broadcast a (1,n) row to (m,n).
    Id repeat_row(Id v, std::size_t m) {
        const Tensor& vv = value(v);
        Tensor out({m, vv.cols()});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < vv.cols(); ++j) out(i, j) = vv[j];
        return record(std::move(out), [this, v](const Tensor& g) {
            Tensor& dv = grad_(v);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) dv[j] += g(i, j);
        });
    }

    // -- row/column structure -----------------------------------------------

    /// out[i] = A[i + offset] where rows outside [0, m) read as zero.
    /// offset +1 is the "next latitude toward the pole" neighbor; the zero
    /// fill is the pole boundary condition.
    Id shift_rows(Id a, int offset) {
        const Tensor& av = value(a);
        const std::size_t m = av.rows(), n = av.cols();
        Tensor out({m, n});
        for (std::size_t i = 0; i < m; ++i) {
            const long long src = static_cast<long long>(i) + offset;
            if (src < 0 || src >= static_cast<long long>(m)) continue;
            for (std::size_t j = 0; j < n; ++j) out(i, j) = av(static_cast<std::size_t>(src), j);
        }
        return record(std::move(out), [this, a, offset](const Tensor& g) {
            Tensor& da = grad_(a);
            const std::size_t m = g.rows(), n = g.cols();
            for (std::size_t i = 0; i < m; ++i) {
                const long long src = static_cast<long long>(i) + offset;
                if (src < 0 || src >= static_cast<long long>(m)) continue;
                for (std::size_t j = 0; j < n; ++j) da(static_cast<std::size_t>(src), j) += g(i, j);
            }
        });
    }

    /// Column mean over rows: (m,n) -> (1,n).
    Id mean_rows(Id a) {
        const Tensor& av = value(a);
        const std::size_t m = av.rows(), n = av.cols();
        Tensor out({1, n});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out[j] += av(i, j);
        for (std::size_t j = 0; j < n; ++j) out[j] /= static_cast<double>(m);
        return record(std::move(out), [this, a, m](const Tensor& g) {
            Tensor& da = grad_(a);
            const double inv = 1.0 / static_cast<double>(m);
            for (std::size_t i = 0; i < da.rows(); ++i)
                for (std::size_t j = 0; j < da.cols(); ++j) da(i, j) += g[j] * inv;
        });
    }

    Id concat_cols(Id a, Id b) {
        const Tensor& av = value(a);
        const Tensor& bv = value(b);
        const std::size_t m = av.rows(), na = av.cols(), nb = bv.cols();
        Tensor out({m, na + nb});
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < na; ++j) out(i, j) = av(i, j);
            for (std::size_t j = 0; j < nb; ++j) out(i, na + j) = bv(i, j);
        }
        return record(std::move(out), [this, a, b, na, nb](const Tensor& g) {
            Tensor& da = grad_(a);
            Tensor& db = grad_(b);
            for (std::size_t i = 0; i < g.rows(); ++i) {
                for (std::size_t j = 0; j < na; ++j) da(i, j) += g(i, j);
                for (std::size_t j = 0; j < nb; ++j) db(i, j) += g(i, na + j);
            }
        });
    }

    /// Columns [c0, c1) of A.
    Id slice_cols(Id a, std::size_t c0, std::size_t c1) {
        const Tensor& av = value(a);
        const std::size_t m = av.rows(), n = c1 - c0;
        Tensor out({m, n});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out(i, j) = av(i, c0 + j);
        return record(std::move(out), [this, a, c0](const Tensor& g) {
            Tensor& da = grad_(a);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) da(i, c0 + j) += g(i, j);
        });
    }

    // -- normalization and attention ----------------------------------------

    Id softmax_rows(Id a) {
        const Tensor& av = value(a);
        Tensor out({av.rows(), av.cols()});
        for (std::size_t i = 0; i < av.rows(); ++i) {
            auto p = softmax_stable({av.data() + i * av.cols(), av.cols()});
            for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) = p[j];
        }
        Id id = record(std::move(out), {});
        nodes_[id].back = [this, a, id](const Tensor& g) {
            const Tensor& y = value(id);
            Tensor& da = grad_(a);
            for (std::size_t i = 0; i < y.rows(); ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
                for (std::size_t j = 0; j < y.cols(); ++j)
                    da(i, j) += y(i, j) * (g(i, j) - dot);
            }
        };
        return id;
    }

    /// Row-wise layer norm with learnable gain/bias vectors (1,n).
    Id layer_norm_rows(Id x, Id gain, Id bias, double eps) {
        const Tensor& xv = value(x);
        const Tensor& gv = value(gain);
        const Tensor& bv = value(bias);
        const std::size_t m = xv.rows(), n = xv.cols();
        Tensor out({m, n});
        // Keep x-hat and inverse stddev for the adjoint.
        auto xhat = std::make_shared<Tensor>(Tensor({m, n}));
        auto inv_sd = std::make_shared<std::vector<double>>(m);
        for (std::size_t i = 0; i < m; ++i) {
            double mu = 0.0;
            for (std::size_t j = 0; j < n; ++j) mu += xv(i, j);
            mu /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t j = 0; j < n; ++j) var += (xv(i, j) - mu) * (xv(i, j) - mu);
            var /= static_cast<double>(n);
            const double inv = 1.0 / std::sqrt(var + eps);
            (*inv_sd)[i] = inv;
            for (std::size_t j = 0; j < n; ++j) {
                (*xhat)(i, j) = (xv(i, j) - mu) * inv;
                out(i, j) = gv[j] * (*xhat)(i, j) + bv[j];
            }
        }
        return record(std::move(out), [this, x, gain, bias, xhat, inv_sd](const Tensor& g) {
            const Tensor& gv2 = value(gain);
            Tensor& dx = grad_(x);
            Tensor& dg = grad_(gain);
            Tensor& db = grad_(bias);
            const std::size_t m = g.rows(), n = g.cols();
            for (std::size_t i = 0; i < m; ++i) {
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double dxh = g(i, j) * gv2[j];
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * (*xhat)(i, j);
                    dg[j] += g(i, j) * (*xhat)(i, j);
                    db[j] += g(i, j);
                }
                mean_dxhat /= static_cast<double>(n);
                mean_dxhat_xhat /= static_cast<double>(n);
                for (std::size_t j = 0; j < n; ++j) {
                    const double dxh = g(i, j) * gv2[j];
                    dx(i, j) += (*inv_sd)[i] * (dxh - mean_dxhat - (*xhat)(i, j) * mean_dxhat_xhat);
                }
            }
        });
    }

    // -- reductions ----------------------------------------------------------

    /// Sum of squared entries -> (1,1).
    Id sum_sq(Id a) {
        const Tensor& av = value(a);
        double s = 0.0;
        for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * av[i];
        return record(Tensor::scalar(s), [this, a](const Tensor& g) {
            const Tensor& av2 = value(a);
            Tensor& da = grad_(a);
            for (std::size_t i = 0; i < av2.size(); ++i) da[i] += 2.0 * av2[i] * g[0];
        });
    }

    // -- backward ------------------------------------------------------------

    /// Seed d(root)=1 and propagate to every reachable node.
    void backward(Id root) {
        for (auto& n : nodes_)
            if (n.grad.empty()) n.grad = Tensor(n.value.shape());
        for (auto& v : nodes_[root].grad.values()) v = 0.0;
        nodes_[root].grad[0] = 1.0;
        for (std::size_t i = nodes_.size(); i-- > 0;)
            if (nodes_[i].back) nodes_[i].back(nodes_[i].grad);
    }

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(const Tensor&)> back;
    };

    Tensor& grad_(Id id) {
        if (nodes_[id].grad.empty()) nodes_[id].grad = Tensor(nodes_[id].value.shape());
        return nodes_[id].grad;
    }

    Id record(Tensor value, std::function<void(const Tensor&)> back) {
        nodes_.push_back({std::move(value), Tensor{}, std::move(back)});
        return nodes_.size() - 1;
    }

    std::vector<Node> nodes_;
};

} // namespace telepit
