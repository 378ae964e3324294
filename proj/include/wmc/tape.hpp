#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "wmc/gemm.hpp"
#include "wmc/rng.hpp"
#include "wmc/tensor.hpp"

namespace wmc {

// Reverse-mode tape. Ops execute eagerly; backward() walks nodes in reverse
// creation order. Gradients are accumulated only into nodes reachable from
// a differentiable input, so constants cost nothing on the backward pass.
template <class T>
class Tape {
public:
    using Var = int32_t;

    struct Node {
        TensorT<T> value;
        TensorT<T> grad;  // allocated lazily
        bool requires_grad = false;
        std::function<void()> back;  // empty for leaves/constants
        const char* name = "";
    };

    Var input(TensorT<T> value, bool requires_grad, const char* name = "input") {
        nodes_.push_back(Node{std::move(value), {}, requires_grad, {}, name});
        return static_cast<Var>(nodes_.size() - 1);
    }
    Var constant(TensorT<T> value, const char* name = "const") {
        return input(std::move(value), false, name);
    }
    Var constant_scalar(T value) { return constant(TensorT<T>::scalar(value), "scalar"); }

    const TensorT<T>& val(Var v) const { return nodes_[static_cast<size_t>(v)].value; }
    const Shape& shape(Var v) const { return nodes_[static_cast<size_t>(v)].value.shape; }
    bool requires_grad(Var v) const { return nodes_[static_cast<size_t>(v)].requires_grad; }

    TensorT<T>& grad_ref(Var v) {
        Node& n = nodes_[static_cast<size_t>(v)];
        if (n.grad.size() == 0) {
            n.grad = TensorT<T>::zeros(n.value.shape);
        }
        return n.grad;
    }
    bool has_grad(Var v) const { return nodes_[static_cast<size_t>(v)].grad.size() != 0; }
    const TensorT<T>& grad(Var v) const { return nodes_[static_cast<size_t>(v)].grad; }

    size_t num_nodes() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    void backward(Var loss) {
        check(val(loss).size() == 1, "backward requires a scalar loss");
        check(requires_grad(loss), "loss does not depend on any differentiable input");
        grad_ref(loss)[0] = T(1);
        for (int64_t i = loss; i >= 0; --i) {
            Node& n = nodes_[static_cast<size_t>(i)];
            if (n.grad.size() != 0 && n.back) {
                n.back();
            }
        }
    }

    // ---- elementwise ----

    Var add(Var a, Var b) {
        check(shape(a) == shape(b), "add: shape mismatch");
        TensorT<T> out(shape(a));
        const auto &va = val(a), &vb = val(b);
        for (int64_t i = 0; i < out.size(); ++i) {
            out[i] = va[i] + vb[i];
        }
        Var o = make(std::move(out), {a, b}, "add");
        if (requires_grad(o)) {
            node(o).back = [this, a, b, o] {
                const auto& g = grad(o);
                if (requires_grad(a)) {
                    auto& ga = grad_ref(a);
                    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                }
                if (requires_grad(b)) {
                    auto& gb = grad_ref(b);
                    for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                }
            };
        }
        return o;
    }

    Var sub(Var a, Var b) {
        check(shape(a) == shape(b), "sub: shape mismatch");
        TensorT<T> out(shape(a));
        const auto &va = val(a), &vb = val(b);
        for (int64_t i = 0; i < out.size(); ++i) {
            out[i] = va[i] - vb[i];
        }
        Var o = make(std::move(out), {a, b}, "sub");
        if (requires_grad(o)) {
            node(o).back = [this, a, b, o] {
                const auto& g = grad(o);
                if (requires_grad(a)) {
                    auto& ga = grad_ref(a);
                    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                }
                if (requires_grad(b)) {
                    auto& gb = grad_ref(b);
                    for (int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                }
            };
        }
        return o;
    }

    Var mul(Var a, Var b) {
        check(shape(a) == shape(b), "mul: shape mismatch");
        TensorT<T> out(shape(a));
        const auto &va = val(a), &vb = val(b);
        for (int64_t i = 0; i < out.size(); ++i) {
            out[i] = va[i] * vb[i];
        }
        Var o = make(std::move(out), {a, b}, "mul");
        if (requires_grad(o)) {
            node(o).back = [this, a, b, o] {
                const auto& g = grad(o);
                const auto &va = val(a), &vb = val(b);
                if (requires_grad(a)) {
                    auto& ga = grad_ref(a);
                    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
                }
                if (requires_grad(b)) {
                    auto& gb = grad_ref(b);
                    for (int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
                }
            };
        }
        return o;
    }

    // a*x + b with scalar constants.
    Var affine(Var x, T a, T b, const char* name = "affine") {
        TensorT<T> out(shape(x));
        const auto& vx = val(x);
        for (int64_t i = 0; i < out.size(); ++i) {
            out[i] = a * vx[i] + b;
        }
        Var o = make(std::move(out), {x}, name);
        if (requires_grad(o)) {
            node(o).back = [this, x, o, a] {
                const auto& g = grad(o);
                auto& gx = grad_ref(x);
                for (int64_t i = 0; i < g.size(); ++i) gx[i] += a * g[i];
            };
        }
        return o;
    }

    Var scale(Var x, T a) { return affine(x, a, T(0), "scale"); }

    Var clamp_min(Var x, T lo) {
        TensorT<T> out(shape(x));
        const auto& vx = val(x);
        for (int64_t i = 0; i < out.size(); ++i) {
            out[i] = vx[i] > lo ? vx[i] : lo;
        }
        Var o = make(std::move(out), {x}, "clamp_min");
        if (requires_grad(o)) {
            node(o).back = [this, x, o, lo] {
                const auto& g = grad(o);
                const auto& vx = val(x);
                auto& gx = grad_ref(x);
                for (int64_t i = 0; i < g.size(); ++i) {
                    if (vx[i] > lo) gx[i] += g[i];
                }
            };
        }
        return o;
    }

    Var elu(Var x) {
        TensorT<T> out(shape(x));
        const auto& vx = val(x);
        for (int64_t i = 0; i < out.size(); ++i) {
            const T v = vx[i];
            out[i] = v > T(0) ? v : static_cast<T>(std::expm1(static_cast<double>(v)));
        }
        Var o = make(std::move(out), {x}, "elu");
        if (requires_grad(o)) {
            node(o).back = [this, x, o] {
                const auto& g = grad(o);
                const auto &vx = val(x), &vo = val(o);
                auto& gx = grad_ref(x);
                for (int64_t i = 0; i < g.size(); ++i) {
                    gx[i] += g[i] * (vx[i] > T(0) ? T(1) : vo[i] + T(1));
                }
            };
        }
        return o;
    }

    Var tanh_op(Var x) {
        TensorT<T> out(shape(x));
        const auto& vx = val(x);
        for (int64_t i = 0; i < out.size(); ++i) {
            out[i] = static_cast<T>(std::tanh(static_cast<double>(vx[i])));
        }
        Var o = make(std::move(out), {x}, "tanh");
        if (requires_grad(o)) {
            node(o).back = [this, x, o] {
                const auto& g = grad(o);
                const auto& vo = val(o);
                auto& gx = grad_ref(x);
                for (int64_t i = 0; i < g.size(); ++i) {
                    gx[i] += g[i] * (T(1) - vo[i] * vo[i]);
                }
            };
        }
        return o;
    }

    Var sigmoid(Var x) {
        TensorT<T> out(shape(x));
        const auto& vx = val(x);
        for (int64_t i = 0; i < out.size(); ++i) {
            out[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(vx[i]))));
        }
        Var o = make(std::move(out), {x}, "sigmoid");
        if (requires_grad(o)) {
            node(o).back = [this, x, o] {
                const auto& g = grad(o);
                const auto& vo = val(o);
                auto& gx = grad_ref(x);
                for (int64_t i = 0; i < g.size(); ++i) {
                    gx[i] += g[i] * vo[i] * (T(1) - vo[i]);
                }
            };
        }
        return o;
    }

    Var softplus(Var x) {
        TensorT<T> out(shape(x));
        const auto& vx = val(x);
        for (int64_t i = 0; i < out.size(); ++i) {
            const double v = static_cast<double>(vx[i]);
            out[i] = static_cast<T>(v > 30.0 ? v : std::log1p(std::exp(v)));
        }
        Var o = make(std::move(out), {x}, "softplus");
        if (requires_grad(o)) {
            node(o).back = [this, x, o] {
                const auto& g = grad(o);
                const auto& vx = val(x);
                auto& gx = grad_ref(x);
                for (int64_t i = 0; i < g.size(); ++i) {
                    gx[i] += g[i] * static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(vx[i]))));
                }
            };
        }
        return o;
    }

    // Natural log; caller guarantees strictly positive input.
    Var log_op(Var x) {
        TensorT<T> out(shape(x));
        const auto& vx = val(x);
        for (int64_t i = 0; i < out.size(); ++i) {
            out[i] = static_cast<T>(std::log(static_cast<double>(vx[i])));
        }
        Var o = make(std::move(out), {x}, "log");
        if (requires_grad(o)) {
            node(o).back = [this, x, o] {
                const auto& g = grad(o);
                const auto& vx = val(x);
                auto& gx = grad_ref(x);
                for (int64_t i = 0; i < g.size(); ++i) gx[i] += g[i] / vx[i];
            };
        }
        return o;
    }

    Var exp_op(Var x) {
        TensorT<T> out(shape(x));
        const auto& vx = val(x);
        for (int64_t i = 0; i < out.size(); ++i) {
            out[i] = static_cast<T>(std::exp(static_cast<double>(vx[i])));
        }
        Var o = make(std::move(out), {x}, "exp");
        if (requires_grad(o)) {
            node(o).back = [this, x, o] {
                const auto& g = grad(o);
                const auto& vo = val(o);
                auto& gx = grad_ref(x);
                for (int64_t i = 0; i < g.size(); ++i) gx[i] += g[i] * vo[i];
            };
        }
        return o;
    }

    Var stop_grad(Var x) { return constant(val(x), "stop_grad"); }

    // ---- shape ops ----

    Var reshape(Var x, Shape s) {
        check(numel(s) == val(x).size(), "reshape: element count mismatch");
        TensorT<T> out(std::move(s), val(x).v);
        Var o = make(std::move(out), {x}, "reshape");
        if (requires_grad(o)) {
            node(o).back = [this, x, o] {
                const auto& g = grad(o);
                auto& gx = grad_ref(x);
                for (int64_t i = 0; i < g.size(); ++i) gx[i] += g[i];
            };
        }
        return o;
    }

    // Concatenate 2-D tensors [N, Fi] along the last axis.
    Var concat(const std::vector<Var>& parts) {
        check(!parts.empty(), "concat: empty input");
        const int n = shape(parts[0])[0];
        int total = 0;
        for (Var p : parts) {
            check(shape(p).size() == 2 && shape(p)[0] == n, "concat: rank/row mismatch");
            total += shape(p)[1];
        }
        TensorT<T> out({n, total});
        int off = 0;
        for (Var p : parts) {
            const int f = shape(p)[1];
            const auto& vp = val(p);
            for (int i = 0; i < n; ++i) {
                std::copy(vp.data() + static_cast<int64_t>(i) * f,
                          vp.data() + static_cast<int64_t>(i + 1) * f,
                          out.data() + static_cast<int64_t>(i) * total + off);
            }
            off += f;
        }
        Var o = make(std::move(out), parts, "concat");
        if (requires_grad(o)) {
            std::vector<Var> ps = parts;
            node(o).back = [this, ps, o, n, total] {
                const auto& g = grad(o);
                int off = 0;
                for (Var p : ps) {
                    const int f = shape(p)[1];
                    if (requires_grad(p)) {
                        auto& gp = grad_ref(p);
                        for (int i = 0; i < n; ++i) {
                            const T* src = g.data() + static_cast<int64_t>(i) * total + off;
                            T* dst = gp.data() + static_cast<int64_t>(i) * f;
                            for (int j = 0; j < f; ++j) dst[j] += src[j];
                        }
                    }
                    off += f;
                }
            };
        }
        return o;
    }

    // Columns [from, to) of a 2-D tensor.
    Var slice_cols(Var x, int from, int to) {
        check(shape(x).size() == 2, "slice_cols: expects 2-D");
        const int n = shape(x)[0], f = shape(x)[1];
        check(0 <= from && from < to && to <= f, "slice_cols: bad range");
        const int w = to - from;
        TensorT<T> out({n, w});
        const auto& vx = val(x);
        for (int i = 0; i < n; ++i) {
            std::copy(vx.data() + static_cast<int64_t>(i) * f + from,
                      vx.data() + static_cast<int64_t>(i) * f + to,
                      out.data() + static_cast<int64_t>(i) * w);
        }
        Var o = make(std::move(out), {x}, "slice_cols");
        if (requires_grad(o)) {
            node(o).back = [this, x, o, from, w, f, n] {
                const auto& g = grad(o);
                auto& gx = grad_ref(x);
                for (int i = 0; i < n; ++i) {
                    const T* src = g.data() + static_cast<int64_t>(i) * w;
                    T* dst = gx.data() + static_cast<int64_t>(i) * f + from;
                    for (int j = 0; j < w; ++j) dst[j] += src[j];
                }
            };
        }
        return o;
    }

    // Select rows of a 2-D tensor (backward scatter-adds).
    Var gather_rows(Var x, std::vector<int> rows) {
        check(shape(x).size() == 2, "gather_rows: expects 2-D");
        const int f = shape(x)[1];
        TensorT<T> out({static_cast<int>(rows.size()), f});
        const auto& vx = val(x);
        for (size_t i = 0; i < rows.size(); ++i) {
            check(rows[i] >= 0 && rows[i] < shape(x)[0], "gather_rows: index out of range");
            std::copy(vx.data() + static_cast<int64_t>(rows[i]) * f,
                      vx.data() + static_cast<int64_t>(rows[i] + 1) * f,
                      out.data() + static_cast<int64_t>(i) * f);
        }
        Var o = make(std::move(out), {x}, "gather_rows");
        if (requires_grad(o)) {
            auto idx = std::make_shared<std::vector<int>>(std::move(rows));
            node(o).back = [this, x, o, idx, f] {
                const auto& g = grad(o);
                auto& gx = grad_ref(x);
                for (size_t i = 0; i < idx->size(); ++i) {
                    const T* src = g.data() + static_cast<int64_t>(i) * f;
                    T* dst = gx.data() + static_cast<int64_t>((*idx)[i]) * f;
                    for (int j = 0; j < f; ++j) dst[j] += src[j];
                }
            };
        }
        return o;
    }

    // Concatenate 2-D tensors [Ni, F] along axis 0.
    Var stack_rows(const std::vector<Var>& parts) {
        check(!parts.empty(), "stack_rows: empty input");
        const int f = shape(parts[0])[1];
        int total = 0;
        for (Var p : parts) {
            check(shape(p).size() == 2 && shape(p)[1] == f, "stack_rows: width mismatch");
            total += shape(p)[0];
        }
        TensorT<T> out({total, f});
        int64_t off = 0;
        for (Var p : parts) {
            const auto& vp = val(p);
            std::copy(vp.v.begin(), vp.v.end(), out.v.begin() + off);
            off += vp.size();
        }
        Var o = make(std::move(out), parts, "stack_rows");
        if (requires_grad(o)) {
            std::vector<Var> ps = parts;
            node(o).back = [this, ps, o] {
                const auto& g = grad(o);
                int64_t off = 0;
                for (Var p : ps) {
                    const int64_t n = val(p).size();
                    if (requires_grad(p)) {
                        auto& gp = grad_ref(p);
                        for (int64_t i = 0; i < n; ++i) gp[i] += g[off + i];
                    }
                    off += n;
                }
            };
        }
        return o;
    }

    // ---- reductions (double accumulation) ----

    Var sum(Var x) {
        double acc = 0.0;
        const auto& vx = val(x);
        for (int64_t i = 0; i < vx.size(); ++i) acc += static_cast<double>(vx[i]);
        Var o = make(TensorT<T>::scalar(static_cast<T>(acc)), {x}, "sum");
        if (requires_grad(o)) {
            node(o).back = [this, x, o] {
                const T g = grad(o)[0];
                auto& gx = grad_ref(x);
                for (int64_t i = 0; i < gx.size(); ++i) gx[i] += g;
            };
        }
        return o;
    }

    Var mean(Var x) {
        const int64_t n = val(x).size();
        return scale(sum(x), static_cast<T>(1.0 / static_cast<double>(n)));
    }

    // 0.5 * sum(x^2)
    Var half_sum_sq(Var x) {
        double acc = 0.0;
        const auto& vx = val(x);
        for (int64_t i = 0; i < vx.size(); ++i) {
            acc += 0.5 * static_cast<double>(vx[i]) * static_cast<double>(vx[i]);
        }
        Var o = make(TensorT<T>::scalar(static_cast<T>(acc)), {x}, "half_sum_sq");
        if (requires_grad(o)) {
            node(o).back = [this, x, o] {
                const T g = grad(o)[0];
                const auto& vx = val(x);
                auto& gx = grad_ref(x);
                for (int64_t i = 0; i < gx.size(); ++i) gx[i] += g * vx[i];
            };
        }
        return o;
    }

    Var add_n(const std::vector<Var>& xs) {
        check(!xs.empty(), "add_n: empty");
        Var acc = xs[0];
        for (size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
        return acc;
    }

    // ---- linear algebra ----

    Var matmul(Var a, Var b) {
        check(shape(a).size() == 2 && shape(b).size() == 2, "matmul: expects 2-D");
        const int m = shape(a)[0], k = shape(a)[1], n = shape(b)[1];
        check(shape(b)[0] == k, "matmul: inner dim mismatch");
        TensorT<T> out({m, n});
        gemm<T>(false, false, m, n, k, T(1), val(a).data(), k, val(b).data(), n, T(0),
                out.data(), n);
        Var o = make(std::move(out), {a, b}, "matmul");
        if (requires_grad(o)) {
            node(o).back = [this, a, b, o, m, n, k] {
                const auto& g = grad(o);
                if (requires_grad(a)) {
                    gemm<T>(false, true, m, k, n, T(1), g.data(), n, val(b).data(), n, T(1),
                            grad_ref(a).data(), k);
                }
                if (requires_grad(b)) {
                    gemm<T>(true, false, k, n, m, T(1), val(a).data(), k, g.data(), n, T(1),
                            grad_ref(b).data(), n);
                }
            };
        }
        return o;
    }

    // y = x*W + b, x [N,I], W [I,O], b [O]
    Var dense(Var x, Var w, Var b) {
        check(shape(x).size() == 2 && shape(w).size() == 2, "dense: expects 2-D");
        const int n = shape(x)[0], in = shape(x)[1], out_f = shape(w)[1];
        check(shape(w)[0] == in, "dense: weight shape mismatch");
        check(shape(b).size() == 1 && shape(b)[0] == out_f, "dense: bias shape mismatch");
        TensorT<T> out({n, out_f});
        gemm<T>(false, false, n, out_f, in, T(1), val(x).data(), in, val(w).data(), out_f,
                T(0), out.data(), out_f);
        const auto& vb = val(b);
        for (int i = 0; i < n; ++i) {
            T* row = out.data() + static_cast<int64_t>(i) * out_f;
            for (int j = 0; j < out_f; ++j) row[j] += vb[j];
        }
        Var o = make(std::move(out), {x, w, b}, "dense");
        if (requires_grad(o)) {
            node(o).back = [this, x, w, b, o, n, in, out_f] {
                const auto& g = grad(o);
                if (requires_grad(x)) {
                    gemm<T>(false, true, n, in, out_f, T(1), g.data(), out_f, val(w).data(),
                            out_f, T(1), grad_ref(x).data(), in);
                }
                if (requires_grad(w)) {
                    gemm<T>(true, false, in, out_f, n, T(1), val(x).data(), in, g.data(),
                            out_f, T(1), grad_ref(w).data(), out_f);
                }
                if (requires_grad(b)) {
                    auto& gb = grad_ref(b);
                    for (int j = 0; j < out_f; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < n; ++i) {
                            acc += static_cast<double>(g[static_cast<int64_t>(i) * out_f + j]);
                        }
                        gb[j] += static_cast<T>(acc);
                    }
                }
            };
        }
        return o;
    }

    // logits[i,j] = q[i,:] * W * k[j,:]^T ; q [N,E], W [E,E], k [M,E]
    Var bilinear_logits(Var q, Var w, Var k) {
        check(shape(q).size() == 2 && shape(w).size() == 2 && shape(k).size() == 2,
              "bilinear: expects 2-D");
        const int n = shape(q)[0], e = shape(q)[1], m = shape(k)[0];
        check(shape(w)[0] == e && shape(w)[1] == e && shape(k)[1] == e,
              "bilinear: dim mismatch");
        auto proj = std::make_shared<TensorT<T>>(Shape{n, e});  // q*W, reused in backward
        gemm<T>(false, false, n, e, e, T(1), val(q).data(), e, val(w).data(), e, T(0),
                proj->data(), e);
        TensorT<T> out({n, m});
        gemm<T>(false, true, n, m, e, T(1), proj->data(), e, val(k).data(), e, T(0),
                out.data(), m);
        Var o = make(std::move(out), {q, w, k}, "bilinear");
        if (requires_grad(o)) {
            node(o).back = [this, q, w, k, o, proj, n, e, m] {
                const auto& g = grad(o);
                // dproj = g * K
                TensorT<T> dproj({n, e});
                gemm<T>(false, false, n, e, m, T(1), g.data(), m, val(k).data(), e, T(0),
                        dproj.data(), e);
                if (requires_grad(q)) {
                    gemm<T>(false, true, n, e, e, T(1), dproj.data(), e, val(w).data(), e,
                            T(1), grad_ref(q).data(), e);
                }
                if (requires_grad(w)) {
                    gemm<T>(true, false, e, e, n, T(1), val(q).data(), e, dproj.data(), e,
                            T(1), grad_ref(w).data(), e);
                }
                if (requires_grad(k)) {
                    // dK = g^T * proj
                    gemm<T>(true, false, m, e, n, T(1), g.data(), m, proj->data(), e, T(1),
                            grad_ref(k).data(), e);
                }
            };
        }
        return o;
    }

    // ---- softmax family (rows of size c over the last axis) ----

    Var softmax(Var x, int c) {
        const int64_t rows = val(x).size() / c;
        TensorT<T> out(shape(x));
        const auto& vx = val(x);
        for (int64_t r = 0; r < rows; ++r) {
            softmax_row(vx.data() + r * c, out.data() + r * c, c);
        }
        Var o = make(std::move(out), {x}, "softmax");
        if (requires_grad(o)) {
            node(o).back = [this, x, o, c, rows] {
                const auto& g = grad(o);
                const auto& p = val(o);
                auto& gx = grad_ref(x);
                for (int64_t r = 0; r < rows; ++r) {
                    const T* pr = p.data() + r * c;
                    const T* gr = g.data() + r * c;
                    double dot = 0.0;
                    for (int j = 0; j < c; ++j) dot += static_cast<double>(gr[j]) * pr[j];
                    T* dst = gx.data() + r * c;
                    for (int j = 0; j < c; ++j) {
                        dst[j] += pr[j] * (gr[j] - static_cast<T>(dot));
                    }
                }
            };
        }
        return o;
    }

    Var log_softmax(Var x, int c) {
        const int64_t rows = val(x).size() / c;
        TensorT<T> out(shape(x));
        const auto& vx = val(x);
        for (int64_t r = 0; r < rows; ++r) {
            log_softmax_row(vx.data() + r * c, out.data() + r * c, c);
        }
        Var o = make(std::move(out), {x}, "log_softmax");
        if (requires_grad(o)) {
            node(o).back = [this, x, o, c, rows] {
                const auto& g = grad(o);
                const auto& lp = val(o);
                auto& gx = grad_ref(x);
                for (int64_t r = 0; r < rows; ++r) {
                    const T* lr = lp.data() + r * c;
                    const T* gr = g.data() + r * c;
                    double gsum = 0.0;
                    for (int j = 0; j < c; ++j) gsum += static_cast<double>(gr[j]);
                    T* dst = gx.data() + r * c;
                    for (int j = 0; j < c; ++j) {
                        dst[j] += gr[j] - static_cast<T>(std::exp(static_cast<double>(lr[j])) * gsum);
                    }
                }
            };
        }
        return o;
    }

    // One-hot categorical sample per row with a straight-through backward:
    // the gradient w.r.t. logits is the gradient softmax(logits) would get.
    Var categorical_sample_st(Var logits, int c, RngStream& rng) {
        const int64_t rows = val(logits).size() / c;
        auto probs = std::make_shared<TensorT<T>>(shape(logits));
        const auto& vx = val(logits);
        TensorT<T> out(shape(logits));
        for (int64_t r = 0; r < rows; ++r) {
            softmax_row(vx.data() + r * c, probs->data() + r * c, c);
            const T* pr = probs->data() + r * c;
            double u = rng.uniform();
            int pick = c - 1;
            double cdf = 0.0;
            for (int j = 0; j < c; ++j) {
                cdf += static_cast<double>(pr[j]);
                if (u < cdf) {
                    pick = j;
                    break;
                }
            }
            out.data()[r * c + pick] = T(1);
        }
        Var o = make(std::move(out), {logits}, "categorical_st");
        if (requires_grad(o)) {
            node(o).back = [this, logits, o, probs, c, rows] {
                const auto& g = grad(o);
                auto& gx = grad_ref(logits);
                for (int64_t r = 0; r < rows; ++r) {
                    const T* pr = probs->data() + r * c;
                    const T* gr = g.data() + r * c;
                    double dot = 0.0;
                    for (int j = 0; j < c; ++j) dot += static_cast<double>(gr[j]) * pr[j];
                    T* dst = gx.data() + r * c;
                    for (int j = 0; j < c; ++j) {
                        dst[j] += pr[j] * (gr[j] - static_cast<T>(dot));
                    }
                }
            };
        }
        return o;
    }

    // Per-row cross entropy from raw logits with an optional 0/1 mask of valid
    // columns; the positive column must be valid. Returns the mean over rows.
    // mean_positive_prob, when provided, receives the mean softmax probability
    // of the positive column (a diagnostic, not part of the graph).
    Var cross_entropy_rows(Var logits, const std::vector<int>& labels,
                           const std::vector<uint8_t>* mask = nullptr,
                           double* mean_positive_prob = nullptr) {
        check(shape(logits).size() == 2, "cross_entropy: expects 2-D logits");
        const int n = shape(logits)[0], m = shape(logits)[1];
        check(static_cast<int>(labels.size()) == n, "cross_entropy: labels size");
        if (mask != nullptr) {
            check(mask->size() == static_cast<size_t>(n) * static_cast<size_t>(m),
                  "cross_entropy: mask size");
        }
        auto probs = std::make_shared<TensorT<T>>(Shape{n, m});
        const auto& vx = val(logits);
        double total = 0.0;
        double pos_prob = 0.0;
        for (int i = 0; i < n; ++i) {
            const T* row = vx.data() + static_cast<int64_t>(i) * m;
            const uint8_t* mrow = mask ? mask->data() + static_cast<size_t>(i) * m : nullptr;
            check(labels[i] >= 0 && labels[i] < m, "cross_entropy: label out of range");
            check(mrow == nullptr || mrow[labels[i]] != 0, "cross_entropy: positive masked out");
            double mx = -1e300;
            for (int j = 0; j < m; ++j) {
                if (!mrow || mrow[j]) {
                    mx = std::max(mx, static_cast<double>(row[j]));
                }
            }
            double denom = 0.0;
            for (int j = 0; j < m; ++j) {
                if (!mrow || mrow[j]) {
                    denom += std::exp(static_cast<double>(row[j]) - mx);
                }
            }
            const double lse = mx + std::log(denom);
            total += lse - static_cast<double>(row[labels[i]]);
            T* pr = probs->data() + static_cast<int64_t>(i) * m;
            for (int j = 0; j < m; ++j) {
                pr[j] = (!mrow || mrow[j])
                            ? static_cast<T>(std::exp(static_cast<double>(row[j]) - lse))
                            : T(0);
            }
            pos_prob += static_cast<double>(pr[labels[i]]);
        }
        if (mean_positive_prob != nullptr) {
            *mean_positive_prob = pos_prob / std::max(1, n);
        }
        Var o = make(TensorT<T>::scalar(static_cast<T>(total / std::max(1, n))), {logits},
                     "cross_entropy");
        if (requires_grad(o)) {
            auto lab = std::make_shared<std::vector<int>>(labels);
            node(o).back = [this, logits, o, probs, lab, n, m] {
                const T g = grad(o)[0];
                const T inv_n = static_cast<T>(1.0 / std::max(1, n));
                auto& gx = grad_ref(logits);
                for (int i = 0; i < n; ++i) {
                    const T* pr = probs->data() + static_cast<int64_t>(i) * m;
                    T* dst = gx.data() + static_cast<int64_t>(i) * m;
                    for (int j = 0; j < m; ++j) {
                        T delta = pr[j];
                        if (j == (*lab)[i]) delta -= T(1);
                        dst[j] += g * inv_n * delta;
                    }
                }
            };
        }
        return o;
    }

    // Sum over `vars` categorical variables of KL(post || prior), computed from
    // logits laid out [N, vars*classes]. Output [N, vars]. Differentiable in both.
    Var kl_categorical(Var post, Var prior, int vars, int classes) {
        check(shape(post) == shape(prior), "kl: shape mismatch");
        const int64_t rows = val(post).size() / (static_cast<int64_t>(vars) * classes);
        auto p = std::make_shared<TensorT<T>>(shape(post));
        auto lp = std::make_shared<TensorT<T>>(shape(post));
        auto lq = std::make_shared<TensorT<T>>(shape(post));
        const auto &vpost = val(post), &vprior = val(prior);
        const int64_t groups = rows * vars;
        TensorT<T> out({static_cast<int>(rows), vars});
        for (int64_t gidx = 0; gidx < groups; ++gidx) {
            const int64_t off = gidx * classes;
            log_softmax_row(vpost.data() + off, lp->data() + off, classes);
            log_softmax_row(vprior.data() + off, lq->data() + off, classes);
            double kl = 0.0;
            for (int j = 0; j < classes; ++j) {
                const double lpj = static_cast<double>(lp->data()[off + j]);
                const double pj = std::exp(lpj);
                p->data()[off + j] = static_cast<T>(pj);
                kl += pj * (lpj - static_cast<double>(lq->data()[off + j]));
            }
            out.data()[gidx] = static_cast<T>(std::max(0.0, kl));
        }
        Var o = make(std::move(out), {post, prior}, "kl_categorical");
        if (requires_grad(o)) {
            node(o).back = [this, post, prior, o, p, lp, lq, groups, classes] {
                const auto& g = grad(o);
                for (int64_t gidx = 0; gidx < groups; ++gidx) {
                    const T gv = g[gidx];
                    if (gv == T(0)) continue;
                    const int64_t off = gidx * classes;
                    const T kl = val(o)[gidx];
                    if (requires_grad(post)) {
                        auto& gp = grad_ref(post);
                        for (int j = 0; j < classes; ++j) {
                            const T diff = lp->data()[off + j] - lq->data()[off + j];
                            gp[off + j] += gv * p->data()[off + j] * (diff - kl);
                        }
                    }
                    if (requires_grad(prior)) {
                        auto& gq = grad_ref(prior);
                        for (int j = 0; j < classes; ++j) {
                            const T qj = static_cast<T>(
                                std::exp(static_cast<double>(lq->data()[off + j])));
                            gq[off + j] += gv * (qj - p->data()[off + j]);
                        }
                    }
                }
            };
        }
        return o;
    }

    // ---- convolution (NHWC) ----

    // x [N,H,W,Ci], w [kh,kw,Ci,Co], b [Co]; zero padding `pad` on all sides.
    Var conv2d(Var x, Var w, Var b, int stride, int pad) {
        const Shape& xs = shape(x);
        const Shape& ws = shape(w);
        check(xs.size() == 4 && ws.size() == 4, "conv2d: rank");
        const int n = xs[0], h = xs[1], wd = xs[2], ci = xs[3];
        const int kh = ws[0], kw = ws[1], co = ws[3];
        check(ws[2] == ci, "conv2d: channel mismatch");
        const int ho = (h + 2 * pad - kh) / stride + 1;
        const int wo = (wd + 2 * pad - kw) / stride + 1;
        check(ho > 0 && wo > 0, "conv2d: output collapses");
        const int64_t rows = static_cast<int64_t>(n) * ho * wo;
        const int64_t kvol = static_cast<int64_t>(kh) * kw * ci;
        auto im = std::make_shared<TensorT<T>>(Shape{static_cast<int>(rows), static_cast<int>(kvol)});
        im2col(val(x).data(), n, h, wd, ci, kh, kw, stride, pad, ho, wo, im->data());
        TensorT<T> out({n, ho, wo, co});
        gemm<T>(false, false, rows, co, kvol, T(1), im->data(), kvol, val(w).data(), co,
                T(0), out.data(), co);
        const auto& vb = val(b);
        for (int64_t r = 0; r < rows; ++r) {
            T* orow = out.data() + r * co;
            for (int j = 0; j < co; ++j) orow[j] += vb[j];
        }
        Var o = make(std::move(out), {x, w, b}, "conv2d");
        if (requires_grad(o)) {
            node(o).back = [this, x, w, b, o, im, n, h, wd, ci, kh, kw, co, stride, pad, ho,
                            wo, rows, kvol] {
                const auto& g = grad(o);
                if (requires_grad(w)) {
                    gemm<T>(true, false, kvol, co, rows, T(1), im->data(), kvol, g.data(),
                            co, T(1), grad_ref(w).data(), co);
                }
                if (requires_grad(b)) {
                    auto& gb = grad_ref(b);
                    for (int j = 0; j < co; ++j) {
                        double acc = 0.0;
                        for (int64_t r = 0; r < rows; ++r) {
                            acc += static_cast<double>(g[r * co + j]);
                        }
                        gb[j] += static_cast<T>(acc);
                    }
                }
                if (requires_grad(x)) {
                    TensorT<T> dim({static_cast<int>(rows), static_cast<int>(kvol)});
                    gemm<T>(false, true, rows, kvol, co, T(1), g.data(), co, val(w).data(),
                            co, T(0), dim.data(), kvol);
                    col2im(dim.data(), n, h, wd, ci, kh, kw, stride, pad, ho, wo,
                           grad_ref(x).data());
                }
            };
        }
        return o;
    }

    // Transposed conv: x [N,h,w,Ci], w [Ci,kh,kw,Co], b [Co].
    // out spatial = (in-1)*stride + k - (pad_lo + pad_hi).
    Var conv2d_transpose(Var x, Var w, Var b, int stride, int pad_lo, int pad_hi) {
        const Shape& xs = shape(x);
        const Shape& ws = shape(w);
        check(xs.size() == 4 && ws.size() == 4, "conv2d_transpose: rank");
        const int n = xs[0], h = xs[1], wd = xs[2], ci = xs[3];
        const int kh = ws[1], kw = ws[2], co = ws[3];
        check(ws[0] == ci, "conv2d_transpose: channel mismatch");
        const int ho = (h - 1) * stride + kh - pad_lo - pad_hi;
        const int wo = (wd - 1) * stride + kw - pad_lo - pad_hi;
        check(ho > 0 && wo > 0, "conv2d_transpose: output collapses");
        const int64_t rows = static_cast<int64_t>(n) * h * wd;
        const int64_t kvol = static_cast<int64_t>(kh) * kw * co;
        auto col = std::make_shared<TensorT<T>>(Shape{static_cast<int>(rows), static_cast<int>(kvol)});
        gemm<T>(false, false, rows, kvol, ci, T(1), val(x).data(), ci, val(w).data(), kvol,
                T(0), col->data(), kvol);
        TensorT<T> out({n, ho, wo, co});
        const auto& vb = val(b);
        for (int64_t i = 0; i < out.size(); ++i) out[i] = vb[i % co];
        col2im_transpose(col->data(), n, h, wd, kh, kw, co, stride, pad_lo, ho, wo,
                         out.data());
        Var o = make(std::move(out), {x, w, b}, "conv2d_transpose");
        if (requires_grad(o)) {
            node(o).back = [this, x, w, b, o, n, h, wd, ci, kh, kw, co, stride, pad_lo, ho,
                            wo, rows, kvol] {
                const auto& g = grad(o);
                TensorT<T> dcol({static_cast<int>(rows), static_cast<int>(kvol)});
                im2col_transpose(g.data(), n, h, wd, kh, kw, co, stride, pad_lo, ho, wo,
                                 dcol.data());
                if (requires_grad(x)) {
                    gemm<T>(false, true, rows, ci, kvol, T(1), dcol.data(), kvol,
                            val(w).data(), kvol, T(1), grad_ref(x).data(), ci);
                }
                if (requires_grad(w)) {
                    gemm<T>(true, false, ci, kvol, rows, T(1), val(x).data(), ci,
                            dcol.data(), kvol, T(1), grad_ref(w).data(), kvol);
                }
                if (requires_grad(b)) {
                    auto& gb = grad_ref(b);
                    const int64_t opix = static_cast<int64_t>(n) * ho * wo;
                    for (int j = 0; j < co; ++j) {
                        double acc = 0.0;
                        for (int64_t r = 0; r < opix; ++r) {
                            acc += static_cast<double>(g[r * co + j]);
                        }
                        gb[j] += static_cast<T>(acc);
                    }
                }
            };
        }
        return o;
    }

    // Fused GRU cell. x [N,I], hprev [N,H], wx [I,3H], wh [H,3H], b [3H].
    // Gate packing along the 3H axis: reset | update | candidate.
    Var gru_cell(Var x, Var hprev, Var wx, Var wh, Var b) {
        const int n = shape(x)[0], in = shape(x)[1], hn = shape(hprev)[1];
        check(shape(hprev)[0] == n, "gru: batch mismatch");
        check(shape(wx)[0] == in && shape(wx)[1] == 3 * hn, "gru: wx shape");
        check(shape(wh)[0] == hn && shape(wh)[1] == 3 * hn, "gru: wh shape");
        check(shape(b)[0] == 3 * hn, "gru: bias shape");
        const int g3 = 3 * hn;
        auto gx = std::make_shared<TensorT<T>>(Shape{n, g3});
        auto gh = std::make_shared<TensorT<T>>(Shape{n, g3});
        gemm<T>(false, false, n, g3, in, T(1), val(x).data(), in, val(wx).data(), g3, T(0),
                gx->data(), g3);
        gemm<T>(false, false, n, g3, hn, T(1), val(hprev).data(), hn, val(wh).data(), g3,
                T(0), gh->data(), g3);
        const auto& vb = val(b);
        auto r = std::make_shared<TensorT<T>>(Shape{n, hn});
        auto u = std::make_shared<TensorT<T>>(Shape{n, hn});
        auto cand = std::make_shared<TensorT<T>>(Shape{n, hn});
        TensorT<T> out({n, hn});
        const auto& vh = val(hprev);
        for (int i = 0; i < n; ++i) {
            const T* gxr = gx->data() + static_cast<int64_t>(i) * g3;
            const T* ghr = gh->data() + static_cast<int64_t>(i) * g3;
            T* rr = r->data() + static_cast<int64_t>(i) * hn;
            T* ur = u->data() + static_cast<int64_t>(i) * hn;
            T* cr = cand->data() + static_cast<int64_t>(i) * hn;
            T* orow = out.data() + static_cast<int64_t>(i) * hn;
            const T* hrow = vh.data() + static_cast<int64_t>(i) * hn;
            for (int j = 0; j < hn; ++j) {
                rr[j] = sigmoid_scalar(gxr[j] + ghr[j] + vb[j]);
                ur[j] = sigmoid_scalar(gxr[hn + j] + ghr[hn + j] + vb[hn + j]);
                cr[j] = static_cast<T>(std::tanh(static_cast<double>(
                    gxr[2 * hn + j] + rr[j] * ghr[2 * hn + j] + vb[2 * hn + j])));
                orow[j] = ur[j] * hrow[j] + (T(1) - ur[j]) * cr[j];
            }
        }
        Var o = make(std::move(out), {x, hprev, wx, wh, b}, "gru_cell");
        if (requires_grad(o)) {
            node(o).back = [this, x, hprev, wx, wh, b, o, gx, gh, r, u, cand, n, in, hn, g3] {
                const auto& g = grad(o);
                const auto& vh = val(hprev);
                TensorT<T> dgx({n, g3});
                TensorT<T> dgh({n, g3});
                for (int i = 0; i < n; ++i) {
                    const T* grow = g.data() + static_cast<int64_t>(i) * hn;
                    const T* rr = r->data() + static_cast<int64_t>(i) * hn;
                    const T* ur = u->data() + static_cast<int64_t>(i) * hn;
                    const T* cr = cand->data() + static_cast<int64_t>(i) * hn;
                    const T* hrow = vh.data() + static_cast<int64_t>(i) * hn;
                    const T* ghr = gh->data() + static_cast<int64_t>(i) * g3;
                    T* dgxr = dgx.data() + static_cast<int64_t>(i) * g3;
                    T* dghr = dgh.data() + static_cast<int64_t>(i) * g3;
                    for (int j = 0; j < hn; ++j) {
                        const T dh = grow[j];
                        const T du = dh * (hrow[j] - cr[j]);
                        const T dcand = dh * (T(1) - ur[j]);
                        const T da_c = dcand * (T(1) - cr[j] * cr[j]);
                        const T dr = da_c * ghr[2 * hn + j];
                        const T da_u = du * ur[j] * (T(1) - ur[j]);
                        const T da_r = dr * rr[j] * (T(1) - rr[j]);
                        dgxr[j] = da_r;
                        dgxr[hn + j] = da_u;
                        dgxr[2 * hn + j] = da_c;
                        dghr[j] = da_r;
                        dghr[hn + j] = da_u;
                        dghr[2 * hn + j] = da_c * rr[j];
                    }
                }
                if (requires_grad(x)) {
                    gemm<T>(false, true, n, in, g3, T(1), dgx.data(), g3, val(wx).data(), g3,
                            T(1), grad_ref(x).data(), in);
                }
                if (requires_grad(wx)) {
                    gemm<T>(true, false, in, g3, n, T(1), val(x).data(), in, dgx.data(), g3,
                            T(1), grad_ref(wx).data(), g3);
                }
                if (requires_grad(hprev)) {
                    auto& ghp = grad_ref(hprev);
                    for (int i = 0; i < n; ++i) {
                        const T* grow = g.data() + static_cast<int64_t>(i) * hn;
                        const T* ur = u->data() + static_cast<int64_t>(i) * hn;
                        T* dst = ghp.data() + static_cast<int64_t>(i) * hn;
                        for (int j = 0; j < hn; ++j) dst[j] += grow[j] * ur[j];
                    }
                    gemm<T>(false, true, n, hn, g3, T(1), dgh.data(), g3, val(wh).data(), g3,
                            T(1), ghp.data(), hn);
                }
                if (requires_grad(wh)) {
                    gemm<T>(true, false, hn, g3, n, T(1), val(hprev).data(), hn, dgh.data(),
                            g3, T(1), grad_ref(wh).data(), g3);
                }
                if (requires_grad(b)) {
                    // bias enters each pre-activation once, through the dgx path
                    auto& gb = grad_ref(b);
                    for (int j = 0; j < g3; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < n; ++i) {
                            acc += static_cast<double>(dgx[static_cast<int64_t>(i) * g3 + j]);
                        }
                        gb[j] += static_cast<T>(acc);
                    }
                }
            };
        }
        return o;
    }

private:
    std::vector<Node> nodes_;

    Node& node(Var v) { return nodes_[static_cast<size_t>(v)]; }

    Var make(TensorT<T> value, const std::vector<Var>& parents, const char* name) {
        bool rg = false;
        for (Var p : parents) {
            rg = rg || requires_grad(p);
        }
        nodes_.push_back(Node{std::move(value), {}, rg, {}, name});
        return static_cast<Var>(nodes_.size() - 1);
    }

    static T sigmoid_scalar(T v) {
        return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
    }

    static void softmax_row(const T* x, T* out, int c) {
        double mx = -1e300;
        for (int j = 0; j < c; ++j) mx = std::max(mx, static_cast<double>(x[j]));
        double denom = 0.0;
        for (int j = 0; j < c; ++j) {
            const double e = std::exp(static_cast<double>(x[j]) - mx);
            out[j] = static_cast<T>(e);
            denom += e;
        }
        const T inv = static_cast<T>(1.0 / denom);
        for (int j = 0; j < c; ++j) out[j] *= inv;
    }

    static void log_softmax_row(const T* x, T* out, int c) {
        double mx = -1e300;
        for (int j = 0; j < c; ++j) mx = std::max(mx, static_cast<double>(x[j]));
        double denom = 0.0;
        for (int j = 0; j < c; ++j) denom += std::exp(static_cast<double>(x[j]) - mx);
        const double lse = mx + std::log(denom);
        for (int j = 0; j < c; ++j) out[j] = static_cast<T>(static_cast<double>(x[j]) - lse);
    }

    static void im2col(const T* x, int n, int h, int w, int ci, int kh, int kw, int stride,
                       int pad, int ho, int wo, T* im) {
        const int64_t kvol = static_cast<int64_t>(kh) * kw * ci;
#pragma omp parallel for schedule(static)
        for (int ni = 0; ni < n; ++ni) {
            const T* xn = x + static_cast<int64_t>(ni) * h * w * ci;
            T* imn = im + static_cast<int64_t>(ni) * ho * wo * kvol;
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) {
                    T* dst = imn + (static_cast<int64_t>(oy) * wo + ox) * kvol;
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ix = ox * stride + kx - pad;
                            T* cell = dst + (static_cast<int64_t>(ky) * kw + kx) * ci;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
                                for (int c = 0; c < ci; ++c) cell[c] = T(0);
                            } else {
                                const T* src = xn + (static_cast<int64_t>(iy) * w + ix) * ci;
                                for (int c = 0; c < ci; ++c) cell[c] = src[c];
                            }
                        }
                    }
                }
            }
        }
    }

    static void col2im(const T* im, int n, int h, int w, int ci, int kh, int kw, int stride,
                       int pad, int ho, int wo, T* x_grad) {
        const int64_t kvol = static_cast<int64_t>(kh) * kw * ci;
#pragma omp parallel for schedule(static)
        for (int ni = 0; ni < n; ++ni) {
            T* xn = x_grad + static_cast<int64_t>(ni) * h * w * ci;
            const T* imn = im + static_cast<int64_t>(ni) * ho * wo * kvol;
            for (int oy = 0; oy < ho; ++oy) {
                for (int ox = 0; ox < wo; ++ox) {
                    const T* src = imn + (static_cast<int64_t>(oy) * wo + ox) * kvol;
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ix = ox * stride + kx - pad;
                            if (ix < 0 || ix >= w) continue;
                            T* dst = xn + (static_cast<int64_t>(iy) * w + ix) * ci;
                            const T* cell = src + (static_cast<int64_t>(ky) * kw + kx) * ci;
                            for (int c = 0; c < ci; ++c) dst[c] += cell[c];
                        }
                    }
                }
            }
        }
    }

    // Scatter for transposed conv forward: col [(n,iy,ix),(ky,kx,co)] adds into
    // out[n, iy*stride+ky-pad_lo, ix*stride+kx-pad_lo, co].
    static void col2im_transpose(const T* col, int n, int h, int w, int kh, int kw, int co,
                                 int stride, int pad_lo, int ho, int wo, T* out) {
        const int64_t kvol = static_cast<int64_t>(kh) * kw * co;
#pragma omp parallel for schedule(static)
        for (int ni = 0; ni < n; ++ni) {
            T* on = out + static_cast<int64_t>(ni) * ho * wo * co;
            const T* cn = col + static_cast<int64_t>(ni) * h * w * kvol;
            for (int iy = 0; iy < h; ++iy) {
                for (int ix = 0; ix < w; ++ix) {
                    const T* src = cn + (static_cast<int64_t>(iy) * w + ix) * kvol;
                    for (int ky = 0; ky < kh; ++ky) {
                        const int oy = iy * stride + ky - pad_lo;
                        if (oy < 0 || oy >= ho) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ox = ix * stride + kx - pad_lo;
                            if (ox < 0 || ox >= wo) continue;
                            T* dst = on + (static_cast<int64_t>(oy) * wo + ox) * co;
                            const T* cell = src + (static_cast<int64_t>(ky) * kw + kx) * co;
                            for (int c = 0; c < co; ++c) dst[c] += cell[c];
                        }
                    }
                }
            }
        }
    }

    // Gather for transposed conv backward: dcol from dOut.
    static void im2col_transpose(const T* dout, int n, int h, int w, int kh, int kw, int co,
                                 int stride, int pad_lo, int ho, int wo, T* dcol) {
        const int64_t kvol = static_cast<int64_t>(kh) * kw * co;
#pragma omp parallel for schedule(static)
        for (int ni = 0; ni < n; ++ni) {
            const T* gn = dout + static_cast<int64_t>(ni) * ho * wo * co;
            T* cn = dcol + static_cast<int64_t>(ni) * h * w * kvol;
            for (int iy = 0; iy < h; ++iy) {
                for (int ix = 0; ix < w; ++ix) {
                    T* dst = cn + (static_cast<int64_t>(iy) * w + ix) * kvol;
                    for (int ky = 0; ky < kh; ++ky) {
                        const int oy = iy * stride + ky - pad_lo;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ox = ix * stride + kx - pad_lo;
                            T* cell = dst + (static_cast<int64_t>(ky) * kw + kx) * co;
                            if (oy < 0 || oy >= ho || ox < 0 || ox >= wo) {
                                for (int c = 0; c < co; ++c) cell[c] = T(0);
                            } else {
                                const T* src = gn + (static_cast<int64_t>(oy) * wo + ox) * co;
                                for (int c = 0; c < co; ++c) cell[c] = src[c];
                            }
                        }
                    }
                }
            }
        }
    }
};

}  // namespace wmc
