#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "sfmt/error.hpp"
#include "sfmt/tensor.hpp"

namespace sfmt {

// Handle for a node on a Tape.
using Val = int;

namespace detail {

// C[m x n] += A[m x k] * B[k x n]
template <typename Real>
void mm_nn_acc(const Real* a, const Real* b, Real* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const Real* arow = a + static_cast<size_t>(i) * k;
        Real* crow = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            Real av = arow[p];
            const Real* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x n] += A[m x k] * B[n x k]^T
template <typename Real>
void mm_nt_acc(const Real* a, const Real* b, Real* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const Real* arow = a + static_cast<size_t>(i) * k;
        Real* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const Real* brow = b + static_cast<size_t>(j) * k;
            Real s = 0;
            for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] += s;
        }
    }
}

// C[k x n] += A[m x k]^T * B[m x n]
template <typename Real>
void mm_tn_acc(const Real* a, const Real* b, Real* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const Real* arow = a + static_cast<size_t>(i) * k;
        const Real* brow = b + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            Real av = arow[p];
            Real* crow = c + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline double gelu_fwd(double x) {
    return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865476));
}

inline double gelu_grad(double x) {
    // d/dx [x * Phi(x)] = Phi(x) + x * phi(x)
    double phi = std::exp(-0.5 * x * x) * 0.3989422804014327;
    return 0.5 * (1.0 + std::erf(x * 0.7071067811865476)) + x * phi;
}

}  // namespace detail

// Reverse-mode tape. One tape records one forward computation; backward() may
// run once, after which the tape is spent. Parents always have smaller ids
// than their consumers, so a single reverse sweep propagates all gradients.
template <typename Real>
class Tape {
public:
    bool check_finite = true;

    const Tensor<Real>& val(Val v) const {
        const Node& n = nodes_[static_cast<size_t>(v)];
        return n.external ? *n.external : n.value;
    }

    // Gradient of a node after backward(); nullptr when the node was never
    // reached (not an ancestor of the loss) or does not require grad.
    const Tensor<Real>* grad_of(Val v) const {
        const Node& n = nodes_[static_cast<size_t>(v)];
        return n.grad.data.empty() ? nullptr : &n.grad;
    }

    size_t size() const { return nodes_.size(); }

    // --- leaves ---------------------------------------------------------

    // Leaf referring to external storage; `t` must outlive the tape.
    Val leaf_ref(const Tensor<Real>* t, bool needs_grad) {
        Node n;
        n.external = t;
        n.needs_grad = needs_grad;
        nodes_.push_back(std::move(n));
        return static_cast<Val>(nodes_.size() - 1);
    }

    Val leaf(Tensor<Real> t, bool needs_grad = false) {
        Node n;
        n.value = std::move(t);
        n.needs_grad = needs_grad;
        nodes_.push_back(std::move(n));
        return static_cast<Val>(nodes_.size() - 1);
    }

    // --- elementwise ----------------------------------------------------

    Val add(Val a, Val b) {
        const auto& ta = val(a);
        const auto& tb = val(b);
        if (ta.shape != tb.shape)
            throw DimError("add: shape mismatch " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
        Tensor<Real> out = ta;
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += tb.data[i];
        return make_node(std::move(out), {a, b}, [](Tape& t, const NodeCtx& c) {
            const auto& g = t.node(c.self).grad;
            t.accum_into(c.parents[0], [&](Tensor<Real>& pg) {
                for (size_t i = 0; i < g.data.size(); ++i) pg.data[i] += g.data[i];
            });
            t.accum_into(c.parents[1], [&](Tensor<Real>& pg) {
                for (size_t i = 0; i < g.data.size(); ++i) pg.data[i] += g.data[i];
            });
        });
    }

    Val scale(Val a, Real s) {
        Tensor<Real> out = val(a);
        for (Real& v : out.data) v *= s;
        return make_node(std::move(out), {a}, [s](Tape& t, const NodeCtx& c) {
            const auto& g = t.node(c.self).grad;
            t.accum_into(c.parents[0], [&](Tensor<Real>& pg) {
                for (size_t i = 0; i < g.data.size(); ++i) pg.data[i] += s * g.data[i];
            });
        });
    }

    Val hadamard(Val a, Val b) {
        const auto& ta = val(a);
        const auto& tb = val(b);
        if (ta.shape != tb.shape) throw DimError("hadamard: shape mismatch");
        Tensor<Real> out = ta;
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= tb.data[i];
        return make_node(std::move(out), {a, b}, [](Tape& t, const NodeCtx& c) {
            const auto& g = t.node(c.self).grad;
            const auto& va = t.val(c.parents[0]);
            const auto& vb = t.val(c.parents[1]);
            t.accum_into(c.parents[0], [&](Tensor<Real>& pg) {
                for (size_t i = 0; i < g.data.size(); ++i) pg.data[i] += g.data[i] * vb.data[i];
            });
            t.accum_into(c.parents[1], [&](Tensor<Real>& pg) {
                for (size_t i = 0; i < g.data.size(); ++i) pg.data[i] += g.data[i] * va.data[i];
            });
        });
    }

    Val gelu(Val a) {
        Tensor<Real> out = val(a);
        for (Real& v : out.data) v = static_cast<Real>(detail::gelu_fwd(static_cast<double>(v)));
        return make_node(std::move(out), {a}, [](Tape& t, const NodeCtx& c) {
            const auto& g = t.node(c.self).grad;
            const auto& x = t.val(c.parents[0]);
            t.accum_into(c.parents[0], [&](Tensor<Real>& pg) {
                for (size_t i = 0; i < g.data.size(); ++i)
                    pg.data[i] += g.data[i] * static_cast<Real>(detail::gelu_grad(static_cast<double>(x.data[i])));
            });
        });
    }

    Val sum_all(Val a) {
        const auto& ta = val(a);
        Real s = 0;
        for (Real v : ta.data) s += v;
        return make_node(Tensor<Real>({1, 1}, {s}), {a}, [](Tape& t, const NodeCtx& c) {
            Real g = t.node(c.self).grad.data[0];
            t.accum_into(c.parents[0], [&](Tensor<Real>& pg) {
                for (Real& v : pg.data) v += g;
            });
        });
    }

    // --- matrix products ------------------------------------------------

    Val matmul(Val a, Val b) {
        const auto& ta = val(a);
        const auto& tb = val(b);
        require_matrix(ta, "matmul lhs");
        require_matrix(tb, "matmul rhs");
        if (ta.cols() != tb.rows())
            throw DimError("matmul: inner extents disagree " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
        check_inputs_finite(ta, tb, "matmul");
        int m = ta.rows(), k = ta.cols(), n = tb.cols();
        Tensor<Real> out = Tensor<Real>::zeros({m, n});
        detail::mm_nn_acc(ta.data.data(), tb.data.data(), out.data.data(), m, k, n);
        return make_node(std::move(out), {a, b}, [m, k, n](Tape& t, const NodeCtx& c) {
            const auto& g = t.node(c.self).grad;
            const auto& va = t.val(c.parents[0]);
            const auto& vb = t.val(c.parents[1]);
            t.accum_into(c.parents[0], [&](Tensor<Real>& pg) {
                // dA += dC * B^T
                detail::mm_nt_acc(g.data.data(), vb.data.data(), pg.data.data(), m, n, k);
            });
            t.accum_into(c.parents[1], [&](Tensor<Real>& pg) {
                // dB += A^T * dC
                detail::mm_tn_acc(va.data.data(), g.data.data(), pg.data.data(), m, k, n);
            });
        });
    }

    // a * b^T with a[m x k], b[n x k].
    Val matmul_nt(Val a, Val b) {
        const auto& ta = val(a);
        const auto& tb = val(b);
        require_matrix(ta, "matmul_nt lhs");
        require_matrix(tb, "matmul_nt rhs");
        if (ta.cols() != tb.cols())
            throw DimError("matmul_nt: inner extents disagree " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
        check_inputs_finite(ta, tb, "matmul_nt");
        int m = ta.rows(), k = ta.cols(), n = tb.rows();
        Tensor<Real> out = Tensor<Real>::zeros({m, n});
        detail::mm_nt_acc(ta.data.data(), tb.data.data(), out.data.data(), m, k, n);
        return make_node(std::move(out), {a, b}, [m, k, n](Tape& t, const NodeCtx& c) {
            const auto& g = t.node(c.self).grad;
            const auto& va = t.val(c.parents[0]);
            const auto& vb = t.val(c.parents[1]);
            t.accum_into(c.parents[0], [&](Tensor<Real>& pg) {
                // dA += dC * B
                detail::mm_nn_acc(g.data.data(), vb.data.data(), pg.data.data(), m, n, k);
            });
            t.accum_into(c.parents[1], [&](Tensor<Real>& pg) {
                // dB += dC^T * A
                detail::mm_tn_acc(g.data.data(), va.data.data(), pg.data.data(), m, n, k);
            });
        });
    }

    // x[L x in] * w[out x in]^T + b[out], b = -1 for no bias.
    Val linear(Val x, Val w, Val b = -1) {
        Val y = matmul_nt(x, w);
        if (b < 0) return y;
        return add_row_bias(y, b);
    }

    Val add_row_bias(Val x, Val b) {
        const auto& tx = val(x);
        const auto& tb = val(b);
        if (static_cast<size_t>(tx.cols()) != tb.data.size())
            throw DimError("add_row_bias: bias length " + std::to_string(tb.data.size()) +
                           " vs cols " + std::to_string(tx.cols()));
        Tensor<Real> out = tx;
        int m = tx.rows(), n = tx.cols();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) out.data[static_cast<size_t>(i) * n + j] += tb.data[static_cast<size_t>(j)];
        return make_node(std::move(out), {x, b}, [m, n](Tape& t, const NodeCtx& c) {
            const auto& g = t.node(c.self).grad;
            t.accum_into(c.parents[0], [&](Tensor<Real>& pg) {
                for (size_t i = 0; i < g.data.size(); ++i) pg.data[i] += g.data[i];
            });
            t.accum_into(c.parents[1], [&](Tensor<Real>& pg) {
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) pg.data[static_cast<size_t>(j)] += g.data[static_cast<size_t>(i) * n + j];
            });
        });
    }

    // --- normalization and softmax --------------------------------------

    Val layer_norm(Val x, Val gain, Val bias, Real eps) {
        const auto& tx = val(x);
        const auto& tg = val(gain);
        const auto& tb = val(bias);
        int m = tx.rows(), d = tx.cols();
        if (d < 1) throw DimError("layer_norm: empty rows");
        if (static_cast<size_t>(d) != tg.data.size() || static_cast<size_t>(d) != tb.data.size())
            throw DimError("layer_norm: gain/bias length mismatch");
        Tensor<Real> out = Tensor<Real>::zeros({m, d});
        // cache normalized rows and inverse stddevs for backward
        auto xhat = std::make_shared<std::vector<Real>>(static_cast<size_t>(m) * d);
        auto istd = std::make_shared<std::vector<Real>>(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) {
            const Real* row = tx.data.data() + static_cast<size_t>(i) * d;
            Real mu = 0;
            for (int j = 0; j < d; ++j) mu += row[j];
            mu /= d;
            Real var = 0;
            for (int j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
            var /= d;
            Real is = Real(1) / std::sqrt(var + eps);
            (*istd)[static_cast<size_t>(i)] = is;
            for (int j = 0; j < d; ++j) {
                Real xh = (row[j] - mu) * is;
                (*xhat)[static_cast<size_t>(i) * d + j] = xh;
                out.data[static_cast<size_t>(i) * d + j] = xh * tg.data[static_cast<size_t>(j)] + tb.data[static_cast<size_t>(j)];
            }
        }
        return make_node(std::move(out), {x, gain, bias}, [m, d, xhat, istd](Tape& t, const NodeCtx& c) {
            const auto& g = t.node(c.self).grad;
            const auto& tg2 = t.val(c.parents[1]);
            t.accum_into(c.parents[1], [&](Tensor<Real>& pg) {
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < d; ++j)
                        pg.data[static_cast<size_t>(j)] += g.data[static_cast<size_t>(i) * d + j] * (*xhat)[static_cast<size_t>(i) * d + j];
            });
            t.accum_into(c.parents[2], [&](Tensor<Real>& pg) {
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < d; ++j) pg.data[static_cast<size_t>(j)] += g.data[static_cast<size_t>(i) * d + j];
            });
            t.accum_into(c.parents[0], [&](Tensor<Real>& pg) {
                for (int i = 0; i < m; ++i) {
                    const Real* grow = g.data.data() + static_cast<size_t>(i) * d;
                    const Real* xh = xhat->data() + static_cast<size_t>(i) * d;
                    Real is = (*istd)[static_cast<size_t>(i)];
                    Real sum_dxh = 0, sum_dxh_xh = 0;
                    for (int j = 0; j < d; ++j) {
                        Real dxh = grow[j] * tg2.data[static_cast<size_t>(j)];
                        sum_dxh += dxh;
                        sum_dxh_xh += dxh * xh[j];
                    }
                    for (int j = 0; j < d; ++j) {
                        Real dxh = grow[j] * tg2.data[static_cast<size_t>(j)];
                        pg.data[static_cast<size_t>(i) * d + j] +=
                            is * (dxh - sum_dxh / d - xh[j] * sum_dxh_xh / d);
                    }
                }
            });
        });
    }

    // Row-wise softmax with max subtraction. When causal is true the input
    // must be square and row i is normalized over columns 0..i only, with
    // zeros elsewhere.
    Val softmax_rows(Val x, bool causal = false) {
        const auto& tx = val(x);
        int m = tx.rows(), n = tx.cols();
        if (n < 1) throw DimError("softmax: empty axis");
        if (causal && m != n) throw DimError("causal softmax requires a square matrix");
        if (check_finite && !tx.all_finite()) throw NumericError("softmax: non-finite input");
        Tensor<Real> out = Tensor<Real>::zeros({m, n});
        for (int i = 0; i < m; ++i) {
            int lim = causal ? i + 1 : n;
            const Real* row = tx.data.data() + static_cast<size_t>(i) * n;
            Real mx = row[0];
            for (int j = 1; j < lim; ++j) mx = std::max(mx, row[j]);
            Real z = 0;
            for (int j = 0; j < lim; ++j) z += std::exp(row[j] - mx);
            Real* orow = out.data.data() + static_cast<size_t>(i) * n;
            for (int j = 0; j < lim; ++j) orow[j] = std::exp(row[j] - mx) / z;
        }
        return make_node(std::move(out), {x}, [m, n, causal](Tape& t, const NodeCtx& c) {
            const auto& g = t.node(c.self).grad;
            const auto& y = t.node(c.self).value;
            t.accum_into(c.parents[0], [&](Tensor<Real>& pg) {
                for (int i = 0; i < m; ++i) {
                    int lim = causal ? i + 1 : n;
                    const Real* grow = g.data.data() + static_cast<size_t>(i) * n;
                    const Real* yrow = y.data.data() + static_cast<size_t>(i) * n;
                    Real dot = 0;
                    for (int j = 0; j < lim; ++j) dot += grow[j] * yrow[j];
                    for (int j = 0; j < lim; ++j)
                        pg.data[static_cast<size_t>(i) * n + j] += yrow[j] * (grow[j] - dot);
                }
            });
        });
    }

    // --- shape surgery --------------------------------------------------

    Val slice_cols(Val x, int c0, int len) {
        const auto& tx = val(x);
        int m = tx.rows(), n = tx.cols();
        if (c0 < 0 || len <= 0 || c0 + len > n) throw DimError("slice_cols: range out of bounds");
        Tensor<Real> out = Tensor<Real>::zeros({m, len});
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < len; ++j)
                out.data[static_cast<size_t>(i) * len + j] = tx.data[static_cast<size_t>(i) * n + c0 + j];
        return make_node(std::move(out), {x}, [m, n, c0, len](Tape& t, const NodeCtx& c) {
            const auto& g = t.node(c.self).grad;
            t.accum_into(c.parents[0], [&](Tensor<Real>& pg) {
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < len; ++j)
                        pg.data[static_cast<size_t>(i) * n + c0 + j] += g.data[static_cast<size_t>(i) * len + j];
            });
        });
    }

    Val take_row(Val x, int r) {
        const auto& tx = val(x);
        int m = tx.rows(), n = tx.cols();
        if (r < 0 || r >= m) throw DimError("take_row: row out of bounds");
        Tensor<Real> out = Tensor<Real>::zeros({1, n});
        for (int j = 0; j < n; ++j) out.data[static_cast<size_t>(j)] = tx.data[static_cast<size_t>(r) * n + j];
        return make_node(std::move(out), {x}, [r, n](Tape& t, const NodeCtx& c) {
            const auto& g = t.node(c.self).grad;
            t.accum_into(c.parents[0], [&](Tensor<Real>& pg) {
                for (int j = 0; j < n; ++j) pg.data[static_cast<size_t>(r) * n + j] += g.data[static_cast<size_t>(j)];
            });
        });
    }

    Val concat_cols(const std::vector<Val>& parts) {
        if (parts.empty()) throw DimError("concat_cols: no parts");
        int m = val(parts[0]).rows();
        int total = 0;
        for (Val p : parts) {
            if (val(p).rows() != m) throw DimError("concat_cols: row mismatch");
            total += val(p).cols();
        }
        Tensor<Real> out = Tensor<Real>::zeros({m, total});
        int off = 0;
        std::vector<int> offs;
        for (Val p : parts) {
            const auto& tp = val(p);
            int n = tp.cols();
            offs.push_back(off);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    out.data[static_cast<size_t>(i) * total + off + j] = tp.data[static_cast<size_t>(i) * n + j];
            off += n;
        }
        return make_node(std::move(out), parts, [m, total, offs](Tape& t, const NodeCtx& c) {
            const auto& g = t.node(c.self).grad;
            for (size_t pi = 0; pi < c.parents.size(); ++pi) {
                int n = t.val(c.parents[pi]).cols();
                int off2 = offs[pi];
                t.accum_into(c.parents[pi], [&](Tensor<Real>& pg) {
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < n; ++j)
                            pg.data[static_cast<size_t>(i) * n + j] += g.data[static_cast<size_t>(i) * total + off2 + j];
                });
            }
        });
    }

    Val concat_rows(const std::vector<Val>& parts) {
        if (parts.empty()) throw DimError("concat_rows: no parts");
        int n = val(parts[0]).cols();
        int total = 0;
        for (Val p : parts) {
            if (val(p).cols() != n) throw DimError("concat_rows: col mismatch");
            total += val(p).rows();
        }
        Tensor<Real> out = Tensor<Real>::zeros({total, n});
        int off = 0;
        std::vector<int> offs;
        for (Val p : parts) {
            const auto& tp = val(p);
            offs.push_back(off);
            std::copy(tp.data.begin(), tp.data.end(), out.data.begin() + static_cast<size_t>(off) * n);
            off += tp.rows();
        }
        return make_node(std::move(out), parts, [n, offs](Tape& t, const NodeCtx& c) {
            const auto& g = t.node(c.self).grad;
            for (size_t pi = 0; pi < c.parents.size(); ++pi) {
                int rows = t.val(c.parents[pi]).rows();
                int off2 = offs[pi];
                t.accum_into(c.parents[pi], [&](Tensor<Real>& pg) {
                    for (size_t i = 0; i < static_cast<size_t>(rows) * n; ++i)
                        pg.data[i] += g.data[static_cast<size_t>(off2) * n + i];
                });
            }
        });
    }

    // Row gather: out[i] = table[ids[i]].
    Val embedding(Val table, std::vector<int> ids) {
        const auto& tt = val(table);
        int v = tt.rows(), d = tt.cols();
        for (int id : ids)
            if (id < 0 || id >= v) throw IndexError("embedding: id " + std::to_string(id) + " out of range");
        int m = static_cast<int>(ids.size());
        Tensor<Real> out = Tensor<Real>::zeros({m, d});
        for (int i = 0; i < m; ++i)
            std::copy(tt.data.begin() + static_cast<size_t>(ids[static_cast<size_t>(i)]) * d,
                      tt.data.begin() + static_cast<size_t>(ids[static_cast<size_t>(i)] + 1) * d,
                      out.data.begin() + static_cast<size_t>(i) * d);
        auto ids_sp = std::make_shared<std::vector<int>>(std::move(ids));
        return make_node(std::move(out), {table}, [d, ids_sp](Tape& t, const NodeCtx& c) {
            const auto& g = t.node(c.self).grad;
            t.accum_into(c.parents[0], [&](Tensor<Real>& pg) {
                for (size_t i = 0; i < ids_sp->size(); ++i) {
                    Real* dst = pg.data.data() + static_cast<size_t>((*ids_sp)[i]) * d;
                    const Real* src = g.data.data() + i * d;
                    for (int j = 0; j < d; ++j) dst[j] += src[j];
                }
            });
        });
    }

    // --- convolutions ---------------------------------------------------

    // x[L x cin], w[cout x cin x k], b[cout]; zero padding `pad` on both ends.
    Val conv1d(Val x, Val w, Val b, int stride, int pad) {
        const auto& tx = val(x);
        const auto& tw = val(w);
        const auto& tb = val(b);
        if (tw.ndim() != 3) throw DimError("conv1d: weight must be [cout x cin x k]");
        int L = tx.rows(), cin = tx.cols();
        int cout = tw.shape[0], wcin = tw.shape[1], k = tw.shape[2];
        if (wcin != cin) throw DimError("conv1d: channel mismatch");
        if (static_cast<size_t>(cout) != tb.data.size()) throw DimError("conv1d: bias length mismatch");
        int lout = (L + 2 * pad - k) / stride + 1;
        if (lout < 1) throw DimError("conv1d: input too short");
        Tensor<Real> out = Tensor<Real>::zeros({lout, cout});
        for (int t0 = 0; t0 < lout; ++t0) {
            Real* orow = out.data.data() + static_cast<size_t>(t0) * cout;
            for (int o = 0; o < cout; ++o) orow[o] = tb.data[static_cast<size_t>(o)];
            for (int dt = 0; dt < k; ++dt) {
                int src = t0 * stride + dt - pad;
                if (src < 0 || src >= L) continue;
                const Real* xrow = tx.data.data() + static_cast<size_t>(src) * cin;
                for (int o = 0; o < cout; ++o) {
                    const Real* wrow = tw.data.data() + (static_cast<size_t>(o) * cin + 0) * k;
                    Real s = 0;
                    for (int ci = 0; ci < cin; ++ci) s += wrow[static_cast<size_t>(ci) * k + dt] * xrow[ci];
                    orow[o] += s;
                }
            }
        }
        return make_node(std::move(out), {x, w, b},
                         [L, cin, cout, k, stride, pad, lout](Tape& t, const NodeCtx& c) {
            const auto& g = t.node(c.self).grad;
            const auto& vx = t.val(c.parents[0]);
            const auto& vw = t.val(c.parents[1]);
            t.accum_into(c.parents[0], [&](Tensor<Real>& pg) {
                for (int t0 = 0; t0 < lout; ++t0)
                    for (int dt = 0; dt < k; ++dt) {
                        int src = t0 * stride + dt - pad;
                        if (src < 0 || src >= L) continue;
                        for (int o = 0; o < cout; ++o) {
                            Real gv = g.data[static_cast<size_t>(t0) * cout + o];
                            for (int ci = 0; ci < cin; ++ci)
                                pg.data[static_cast<size_t>(src) * cin + ci] +=
                                    gv * vw.data[(static_cast<size_t>(o) * cin + ci) * k + dt];
                        }
                    }
            });
            t.accum_into(c.parents[1], [&](Tensor<Real>& pg) {
                for (int t0 = 0; t0 < lout; ++t0)
                    for (int dt = 0; dt < k; ++dt) {
                        int src = t0 * stride + dt - pad;
                        if (src < 0 || src >= L) continue;
                        const Real* xrow = vx.data.data() + static_cast<size_t>(src) * cin;
                        for (int o = 0; o < cout; ++o) {
                            Real gv = g.data[static_cast<size_t>(t0) * cout + o];
                            for (int ci = 0; ci < cin; ++ci)
                                pg.data[(static_cast<size_t>(o) * cin + ci) * k + dt] += gv * xrow[ci];
                        }
                    }
            });
            t.accum_into(c.parents[2], [&](Tensor<Real>& pg) {
                for (int t0 = 0; t0 < lout; ++t0)
                    for (int o = 0; o < cout; ++o) pg.data[static_cast<size_t>(o)] += g.data[static_cast<size_t>(t0) * cout + o];
            });
        });
    }

    // Depthwise conv along time, stride 1, same-length output.
    // x[L x ch], w[ch x k], b[ch]; pad = k/2.
    Val dwconv1d(Val x, Val w, Val b) {
        const auto& tx = val(x);
        const auto& tw = val(w);
        const auto& tb = val(b);
        int L = tx.rows(), ch = tx.cols();
        if (tw.rows() != ch) throw DimError("dwconv1d: channel mismatch");
        int k = tw.cols();
        if (static_cast<size_t>(ch) != tb.data.size()) throw DimError("dwconv1d: bias length mismatch");
        int pad = k / 2;
        Tensor<Real> out = Tensor<Real>::zeros({L, ch});
        for (int t0 = 0; t0 < L; ++t0) {
            Real* orow = out.data.data() + static_cast<size_t>(t0) * ch;
            for (int ci = 0; ci < ch; ++ci) orow[ci] = tb.data[static_cast<size_t>(ci)];
            for (int dt = 0; dt < k; ++dt) {
                int src = t0 + dt - pad;
                if (src < 0 || src >= L) continue;
                const Real* xrow = tx.data.data() + static_cast<size_t>(src) * ch;
                for (int ci = 0; ci < ch; ++ci) orow[ci] += tw.data[static_cast<size_t>(ci) * k + dt] * xrow[ci];
            }
        }
        return make_node(std::move(out), {x, w, b}, [L, ch, k, pad](Tape& t, const NodeCtx& c) {
            const auto& g = t.node(c.self).grad;
            const auto& vx = t.val(c.parents[0]);
            const auto& vw = t.val(c.parents[1]);
            t.accum_into(c.parents[0], [&](Tensor<Real>& pg) {
                for (int t0 = 0; t0 < L; ++t0)
                    for (int dt = 0; dt < k; ++dt) {
                        int src = t0 + dt - pad;
                        if (src < 0 || src >= L) continue;
                        for (int ci = 0; ci < ch; ++ci)
                            pg.data[static_cast<size_t>(src) * ch + ci] +=
                                g.data[static_cast<size_t>(t0) * ch + ci] * vw.data[static_cast<size_t>(ci) * k + dt];
                    }
            });
            t.accum_into(c.parents[1], [&](Tensor<Real>& pg) {
                for (int t0 = 0; t0 < L; ++t0)
                    for (int dt = 0; dt < k; ++dt) {
                        int src = t0 + dt - pad;
                        if (src < 0 || src >= L) continue;
                        for (int ci = 0; ci < ch; ++ci)
                            pg.data[static_cast<size_t>(ci) * k + dt] +=
                                g.data[static_cast<size_t>(t0) * ch + ci] * vx.data[static_cast<size_t>(src) * ch + ci];
                    }
            });
            t.accum_into(c.parents[2], [&](Tensor<Real>& pg) {
                for (int t0 = 0; t0 < L; ++t0)
                    for (int ci = 0; ci < ch; ++ci) pg.data[static_cast<size_t>(ci)] += g.data[static_cast<size_t>(t0) * ch + ci];
            });
        });
    }

    // --- loss -----------------------------------------------------------

    // Mean negative log-softmax probability of the target class per row.
    Val cross_entropy(Val logits, const std::vector<int>& targets) {
        const auto& tl = val(logits);
        int bsz = tl.rows(), vocab = tl.cols();
        if (static_cast<size_t>(bsz) != targets.size()) throw DimError("cross_entropy: batch size mismatch");
        if (check_finite && !tl.all_finite()) throw NumericError("cross_entropy: non-finite logits");
        for (int tgt : targets)
            if (tgt < 0 || tgt >= vocab) throw IndexError("cross_entropy: target " + std::to_string(tgt) + " out of range");
        auto probs = std::make_shared<Tensor<Real>>(Tensor<Real>::zeros({bsz, vocab}));
        Real total = 0;
        for (int i = 0; i < bsz; ++i) {
            const Real* row = tl.data.data() + static_cast<size_t>(i) * vocab;
            Real mx = row[0];
            for (int j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
            Real z = 0;
            for (int j = 0; j < vocab; ++j) z += std::exp(row[j] - mx);
            Real logz = std::log(z) + mx;
            for (int j = 0; j < vocab; ++j)
                probs->data[static_cast<size_t>(i) * vocab + j] = std::exp(row[j] - logz);
            total += logz - row[targets[static_cast<size_t>(i)]];
        }
        total /= bsz;
        auto tgts = std::make_shared<std::vector<int>>(targets);
        return make_node(Tensor<Real>({1, 1}, {total}), {logits},
                         [bsz, vocab, probs, tgts](Tape& t, const NodeCtx& c) {
            Real g = t.node(c.self).grad.data[0] / bsz;
            t.accum_into(c.parents[0], [&](Tensor<Real>& pg) {
                for (int i = 0; i < bsz; ++i) {
                    for (int j = 0; j < vocab; ++j)
                        pg.data[static_cast<size_t>(i) * vocab + j] += g * probs->data[static_cast<size_t>(i) * vocab + j];
                    pg.data[static_cast<size_t>(i) * vocab + (*tgts)[static_cast<size_t>(i)]] -= g;
                }
            });
        });
    }

    // --- reverse sweep --------------------------------------------------

    // Seeds d(loss)/d(loss) = seed and propagates to every leaf that
    // requires grad. A tape supports exactly one backward pass.
    void backward(Val loss, Real seed = Real(1)) {
        if (backward_done_)
            throw StateError("backward called twice on the same tape; record a new forward pass first");
        backward_done_ = true;
        Node& ln = nodes_[static_cast<size_t>(loss)];
        const Tensor<Real>& lv = ln.external ? *ln.external : ln.value;
        if (lv.numel() != 1) throw DimError("backward: loss must be scalar");
        ln.grad = Tensor<Real>({1, 1}, {seed});
        for (int v = loss; v >= 0; --v) {
            Node& n = nodes_[static_cast<size_t>(v)];
            if (n.grad.data.empty() || !n.backprop) continue;
            NodeCtx c{v, n.parents};
            n.backprop(*this, c);
        }
    }

    bool backward_done() const { return backward_done_; }

private:
    struct NodeCtx {
        Val self;
        const std::vector<Val>& parents;
    };

    struct Node {
        Tensor<Real> value;
        const Tensor<Real>* external = nullptr;
        Tensor<Real> grad;
        std::vector<Val> parents;
        std::function<void(Tape&, const NodeCtx&)> backprop;
        bool needs_grad = false;
    };

    Node& node(Val v) { return nodes_[static_cast<size_t>(v)]; }

    Val make_node(Tensor<Real> value, std::vector<Val> parents,
                  std::function<void(Tape&, const NodeCtx&)> backprop) {
        Node n;
        n.value = std::move(value);
        bool ng = false;
        for (Val p : parents) ng = ng || nodes_[static_cast<size_t>(p)].needs_grad;
        n.needs_grad = ng;
        if (ng) {
            n.parents = std::move(parents);
            n.backprop = std::move(backprop);
        }
        nodes_.push_back(std::move(n));
        return static_cast<Val>(nodes_.size() - 1);
    }

    // Run f on the grad buffer of parent p, allocating it on first touch.
    // Parents that do not require grad are skipped entirely.
    template <typename F>
    void accum_into(Val p, F&& f) {
        Node& n = nodes_[static_cast<size_t>(p)];
        if (!n.needs_grad) return;
        if (n.grad.data.empty()) {
            const Tensor<Real>& v = n.external ? *n.external : n.value;
            n.grad = Tensor<Real>::zeros(v.shape);
        }
        f(n.grad);
    }

    static void require_matrix(const Tensor<Real>& t, const char* what) {
        if (t.ndim() != 2) throw DimError(std::string(what) + ": expected a matrix, got " + shape_str(t.shape));
    }

    void check_inputs_finite(const Tensor<Real>& a, const Tensor<Real>& b, const char* what) const {
        if (!check_finite) return;
        if (!a.all_finite() || !b.all_finite())
            throw NumericError(std::string(what) + ": non-finite input");
    }

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

}  // namespace sfmt
