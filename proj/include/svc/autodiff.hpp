#pragma once

// Reverse-mode automatic differentiation over dense row-major tensors.
// Templated on the scalar type: the model trains in float, the gradient
// checks can instantiate the identical code in double.
//
// Conventions:
//   - 2-D tensors are (rows, cols); 1-D tensors behave as (n, 1) columns.
//   - Sequence data is laid out (channels, time).
//   - Reductions accumulate in double regardless of S.

#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "svc/errors.hpp"
#include "svc/fft.hpp"

namespace svc {

template <class S>
struct TensorT {
    std::vector<int> shape;
    std::vector<S> data;

    TensorT() = default;
    explicit TensorT(std::vector<int> sh, S fill = S(0)) : shape(std::move(sh)) {
        data.assign(size_t(numel_of(shape)), fill);
    }

    static int64_t numel_of(const std::vector<int>& sh) {
        int64_t n = 1;
        for (int d : sh) n *= d;
        return n;
    }
    int64_t numel() const { return int64_t(data.size()); }

    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const {
        if (shape.size() >= 2) return shape[1];
        return 1;
    }
    S& at(int r, int c) { return data[size_t(r) * size_t(cols()) + size_t(c)]; }
    S at(int r, int c) const { return data[size_t(r) * size_t(cols()) + size_t(c)]; }
    S scalar_value() const {
        if (data.size() != 1) throw ValidationError("tensor is not a scalar");
        return data[0];
    }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
        return s + ")";
    }
};

template <class S>
struct ParameterT {
    std::string name;
    TensorT<S> value;
    TensorT<S> grad;
    bool trainable = true;

    ParameterT() = default;
    ParameterT(std::string n, TensorT<S> v) : name(std::move(n)), value(std::move(v)) {
        grad = TensorT<S>(value.shape);
    }
    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), S(0)); }
};

template <class S>
class GraphT;

template <class S>
struct NodeT {
    TensorT<S> value;
    TensorT<S> grad;              // allocated iff needs_grad
    bool needs_grad = false;
    ParameterT<S>* param = nullptr;
    std::function<void()> back;   // adds into parents' grads
};

template <class S>
using Ref = std::shared_ptr<NodeT<S>>;

template <class S>
class GraphT {
  public:
    Ref<S> constant(TensorT<S> v) { return make(std::move(v), false); }

    Ref<S> constant_scalar(S v) {
        TensorT<S> t(std::vector<int>{1});
        t.data[0] = v;
        return constant(std::move(t));
    }

    Ref<S> param(ParameterT<S>& p) {
        Ref<S> n = make(p.value, true);
        n->param = &p;
        ParameterT<S>* pp = &p;
        NodeT<S>* raw = n.get();
        n->back = [raw, pp]() {
            for (size_t i = 0; i < raw->grad.data.size(); ++i) pp->grad.data[i] += raw->grad.data[i];
        };
        return n;
    }

    // ---- elementwise ----

    Ref<S> add(Ref<S> a, Ref<S> b) {
        check_same_shape(a, b, "add");
        TensorT<S> v = a->value;
        for (size_t i = 0; i < v.data.size(); ++i) v.data[i] += b->value.data[i];
        return binary_elem(std::move(v), a, b,
                           [](S) { return S(1); }, [](S) { return S(1); });
    }

    Ref<S> sub(Ref<S> a, Ref<S> b) {
        check_same_shape(a, b, "sub");
        TensorT<S> v = a->value;
        for (size_t i = 0; i < v.data.size(); ++i) v.data[i] -= b->value.data[i];
        return binary_elem(std::move(v), a, b,
                           [](S) { return S(1); }, [](S) { return S(-1); });
    }

    Ref<S> mul(Ref<S> a, Ref<S> b) {
        check_same_shape(a, b, "mul");
        TensorT<S> v = a->value;
        for (size_t i = 0; i < v.data.size(); ++i) v.data[i] *= b->value.data[i];
        Ref<S> out = make(std::move(v), a->needs_grad || b->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* pa = a.get();
            NodeT<S>* pb = b.get();
            out->back = [o, pa, pb]() {
                if (pa->needs_grad)
                    for (size_t i = 0; i < o->grad.data.size(); ++i)
                        pa->grad.data[i] += o->grad.data[i] * pb->value.data[i];
                if (pb->needs_grad)
                    for (size_t i = 0; i < o->grad.data.size(); ++i)
                        pb->grad.data[i] += o->grad.data[i] * pa->value.data[i];
            };
        }
        return out;
    }

    Ref<S> scale(Ref<S> a, S c) {
        TensorT<S> v = a->value;
        for (auto& x : v.data) x *= c;
        return unary(std::move(v), a, [c](S, S) { return c; });
    }

    Ref<S> add_scalar(Ref<S> a, S c) {
        TensorT<S> v = a->value;
        for (auto& x : v.data) x += c;
        return unary(std::move(v), a, [](S, S) { return S(1); });
    }

    Ref<S> neg(Ref<S> a) { return scale(a, S(-1)); }

    Ref<S> tanh_(Ref<S> a) {
        TensorT<S> v = a->value;
        for (auto& x : v.data) x = std::tanh(x);
        return unary(std::move(v), a, [](S, S y) { return S(1) - y * y; });
    }

    Ref<S> sigmoid_(Ref<S> a) {
        TensorT<S> v = a->value;
        for (auto& x : v.data) x = S(1) / (S(1) + std::exp(-x));
        return unary(std::move(v), a, [](S, S y) { return y * (S(1) - y); });
    }

    Ref<S> leaky_relu(Ref<S> a, S slope = S(0.1)) {
        TensorT<S> v = a->value;
        for (auto& x : v.data) x = x > S(0) ? x : slope * x;
        return unary(std::move(v), a, [slope](S x, S) { return x > S(0) ? S(1) : slope; });
    }

    Ref<S> exp_(Ref<S> a) {
        TensorT<S> v = a->value;
        for (auto& x : v.data) x = std::exp(x);
        return unary(std::move(v), a, [](S, S y) { return y; });
    }

    Ref<S> log_(Ref<S> a) {
        TensorT<S> v = a->value;
        for (auto& x : v.data) x = std::log(x);
        return unary(std::move(v), a, [](S x, S) { return S(1) / x; });
    }

    Ref<S> sqrt_(Ref<S> a) {
        TensorT<S> v = a->value;
        for (auto& x : v.data) x = std::sqrt(x);
        return unary(std::move(v), a, [](S, S y) { return S(0.5) / y; });
    }

    Ref<S> abs_(Ref<S> a) {
        TensorT<S> v = a->value;
        for (auto& x : v.data) x = std::abs(x);
        return unary(std::move(v), a, [](S x, S) { return x > S(0) ? S(1) : (x < S(0) ? S(-1) : S(0)); });
    }

    Ref<S> clamp_min(Ref<S> a, S lo) {
        TensorT<S> v = a->value;
        for (auto& x : v.data) x = std::max(x, lo);
        return unary(std::move(v), a, [lo](S x, S) { return x > lo ? S(1) : S(0); });
    }

    Ref<S> clamp(Ref<S> a, S lo, S hi) {
        TensorT<S> v = a->value;
        for (auto& x : v.data) x = std::min(std::max(x, lo), hi);
        return unary(std::move(v), a, [lo, hi](S x, S) { return (x > lo && x < hi) ? S(1) : S(0); });
    }

    // ---- broadcast over columns: col has one entry per row of x ----

    Ref<S> add_col(Ref<S> x, Ref<S> col) {
        check_col_compat(x, col, "add_col");
        const int r = x->value.rows(), c = x->value.cols();
        TensorT<S> v = x->value;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) v.at(i, j) += col->value.data[size_t(i)];
        Ref<S> out = make(std::move(v), x->needs_grad || col->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* px = x.get();
            NodeT<S>* pc = col.get();
            out->back = [o, px, pc, r, c]() {
                if (px->needs_grad)
                    for (size_t i = 0; i < o->grad.data.size(); ++i) px->grad.data[i] += o->grad.data[i];
                if (pc->needs_grad)
                    for (int i = 0; i < r; ++i) {
                        double acc = 0.0;
                        for (int j = 0; j < c; ++j) acc += double(o->grad.at(i, j));
                        pc->grad.data[size_t(i)] += S(acc);
                    }
            };
        }
        return out;
    }

    Ref<S> sub_col(Ref<S> x, Ref<S> col) { return add_col(x, neg(col)); }

    // per-row mean over columns -> (rows, 1)
    Ref<S> mean_cols(Ref<S> x) {
        const int r = x->value.rows(), c = x->value.cols();
        TensorT<S> v(std::vector<int>{r, 1});
        for (int i = 0; i < r; ++i) {
            double acc = 0.0;
            for (int j = 0; j < c; ++j) acc += double(x->value.at(i, j));
            v.data[size_t(i)] = S(acc / c);
        }
        Ref<S> out = make(std::move(v), x->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* px = x.get();
            out->back = [o, px, r, c]() {
                for (int i = 0; i < r; ++i) {
                    const S g = o->grad.data[size_t(i)] / S(c);
                    for (int j = 0; j < c; ++j) px->grad.at(i, j) += g;
                }
            };
        }
        return out;
    }

    // ---- reductions (double accumulation) ----

    Ref<S> sum(Ref<S> a) {
        double acc = 0.0;
        for (S x : a->value.data) acc += double(x);
        TensorT<S> v(std::vector<int>{1});
        v.data[0] = S(acc);
        Ref<S> out = make(std::move(v), a->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* pa = a.get();
            out->back = [o, pa]() {
                const S g = o->grad.data[0];
                for (auto& gd : pa->grad.data) gd += g;
            };
        }
        return out;
    }

    Ref<S> mean(Ref<S> a) {
        const S inv = S(1.0 / double(a->value.numel()));
        return scale(sum(a), inv);
    }

    // ---- structure ----

    Ref<S> concat_rows(Ref<S> a, Ref<S> b) {
        const int c = a->value.cols();
        if (b->value.cols() != c)
            throw ValidationError("concat_rows: col mismatch " + a->value.shape_str() + " vs " +
                                  b->value.shape_str());
        const int ra = a->value.rows(), rb = b->value.rows();
        TensorT<S> v(std::vector<int>{ra + rb, c});
        std::copy(a->value.data.begin(), a->value.data.end(), v.data.begin());
        std::copy(b->value.data.begin(), b->value.data.end(), v.data.begin() + ptrdiff_t(a->value.data.size()));
        Ref<S> out = make(std::move(v), a->needs_grad || b->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* pa = a.get();
            NodeT<S>* pb = b.get();
            const size_t na = a->value.data.size();
            out->back = [o, pa, pb, na]() {
                if (pa->needs_grad)
                    for (size_t i = 0; i < na; ++i) pa->grad.data[i] += o->grad.data[i];
                if (pb->needs_grad)
                    for (size_t i = 0; i < pb->grad.data.size(); ++i) pb->grad.data[i] += o->grad.data[na + i];
            };
        }
        return out;
    }

    Ref<S> slice_rows(Ref<S> a, int r0, int r1) {
        const int r = a->value.rows(), c = a->value.cols();
        if (r0 < 0 || r1 > r || r0 >= r1)
            throw ValidationError("slice_rows: bad range [" + std::to_string(r0) + "," + std::to_string(r1) +
                                  ") for " + a->value.shape_str());
        TensorT<S> v(std::vector<int>{r1 - r0, c});
        std::copy(a->value.data.begin() + ptrdiff_t(r0) * c, a->value.data.begin() + ptrdiff_t(r1) * c,
                  v.data.begin());
        Ref<S> out = make(std::move(v), a->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* pa = a.get();
            out->back = [o, pa, r0, c]() {
                for (size_t i = 0; i < o->grad.data.size(); ++i)
                    pa->grad.data[size_t(r0) * size_t(c) + i] += o->grad.data[i];
            };
        }
        return out;
    }

    Ref<S> slice_cols(Ref<S> a, int c0, int c1) {
        const int r = a->value.rows(), c = a->value.cols();
        if (c0 < 0 || c1 > c || c0 >= c1)
            throw ValidationError("slice_cols: bad range for " + a->value.shape_str());
        TensorT<S> v(std::vector<int>{r, c1 - c0});
        for (int i = 0; i < r; ++i)
            for (int j = c0; j < c1; ++j) v.at(i, j - c0) = a->value.at(i, j);
        Ref<S> out = make(std::move(v), a->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* pa = a.get();
            out->back = [o, pa, c0]() {
                for (int i = 0; i < o->grad.rows(); ++i)
                    for (int j = 0; j < o->grad.cols(); ++j) pa->grad.at(i, c0 + j) += o->grad.at(i, j);
            };
        }
        return out;
    }

    // ---- linear algebra ----

    Ref<S> matmul(Ref<S> a, Ref<S> b) {
        const int m = a->value.rows(), k = a->value.cols();
        const int k2 = b->value.rows(), n = b->value.cols();
        if (k != k2)
            throw ValidationError("matmul: inner dims " + a->value.shape_str() + " x " + b->value.shape_str());
        TensorT<S> v(std::vector<int>{m, n});
        for (int i = 0; i < m; ++i) {
            S* vrow = &v.data[size_t(i) * size_t(n)];
            for (int kk = 0; kk < k; ++kk) {
                const S av = a->value.at(i, kk);
                const S* brow = &b->value.data[size_t(kk) * size_t(n)];
                for (int j = 0; j < n; ++j) vrow[j] += av * brow[j];
            }
        }
        Ref<S> out = make(std::move(v), a->needs_grad || b->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* pa = a.get();
            NodeT<S>* pb = b.get();
            out->back = [o, pa, pb, m, k, n]() {
                if (pa->needs_grad)
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < n; ++j) {
                            const S g = o->grad.at(i, j);
                            for (int kk = 0; kk < k; ++kk) pa->grad.at(i, kk) += g * pb->value.at(kk, j);
                        }
                if (pb->needs_grad)
                    for (int i = 0; i < m; ++i)
                        for (int kk = 0; kk < k; ++kk) {
                            const S av = pa->value.at(i, kk);
                            for (int j = 0; j < n; ++j) pb->grad.at(kk, j) += av * o->grad.at(i, j);
                        }
            };
        }
        return out;
    }

    // x (Cin, T), w (Cout, Cin, K) -> (Cout, Tout)
    Ref<S> conv1d(Ref<S> x, Ref<S> w, Ref<S> bias, int stride, int pad, int dil = 1) {
        if (w->value.shape.size() != 3)
            throw ValidationError("conv1d: weight must be 3-D, got " + w->value.shape_str());
        const int cin = x->value.rows(), t_in = x->value.cols();
        const int cout = w->value.shape[0], wcin = w->value.shape[1], k = w->value.shape[2];
        if (cin != wcin)
            throw ValidationError("conv1d: input channels " + x->value.shape_str() + " vs weight " +
                                  w->value.shape_str());
        const int t_out = (t_in + 2 * pad - dil * (k - 1) - 1) / stride + 1;
        if (t_out < 1) throw ValidationError("conv1d: output would be empty");

        TensorT<S> v(std::vector<int>{cout, t_out});
        const S* xd = x->value.data.data();
        const S* wd = w->value.data.data();
        for (int co = 0; co < cout; ++co) {
            S* vrow = &v.data[size_t(co) * size_t(t_out)];
            if (bias) {
                const S b = bias->value.data[size_t(co)];
                for (int t = 0; t < t_out; ++t) vrow[t] = b;
            }
            for (int ci = 0; ci < cin; ++ci) {
                const S* xrow = &xd[size_t(ci) * size_t(t_in)];
                const S* wrow = &wd[(size_t(co) * size_t(cin) + size_t(ci)) * size_t(k)];
                for (int kk = 0; kk < k; ++kk) {
                    const S wv = wrow[kk];
                    const int off = kk * dil - pad;
                    for (int t = 0; t < t_out; ++t) {
                        const int u = t * stride + off;
                        if (u >= 0 && u < t_in) vrow[t] += wv * xrow[u];
                    }
                }
            }
        }
        Ref<S> out = make(std::move(v), x->needs_grad || w->needs_grad || (bias && bias->needs_grad));
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* px = x.get();
            NodeT<S>* pw = w.get();
            NodeT<S>* pb = bias ? bias.get() : nullptr;
            out->back = [o, px, pw, pb, cin, t_in, cout, k, t_out, stride, pad, dil]() {
                for (int co = 0; co < cout; ++co) {
                    const S* grow = &o->grad.data[size_t(co) * size_t(t_out)];
                    if (pb && pb->needs_grad) {
                        double acc = 0.0;
                        for (int t = 0; t < t_out; ++t) acc += double(grow[t]);
                        pb->grad.data[size_t(co)] += S(acc);
                    }
                    for (int ci = 0; ci < cin; ++ci) {
                        const S* xrow = &px->value.data[size_t(ci) * size_t(t_in)];
                        S* xg = px->needs_grad ? &px->grad.data[size_t(ci) * size_t(t_in)] : nullptr;
                        const size_t wbase = (size_t(co) * size_t(cin) + size_t(ci)) * size_t(k);
                        for (int kk = 0; kk < k; ++kk) {
                            const int off = kk * dil - pad;
                            if (pw->needs_grad) {
                                double acc = 0.0;
                                for (int t = 0; t < t_out; ++t) {
                                    const int u = t * stride + off;
                                    if (u >= 0 && u < t_in) acc += double(grow[t]) * double(xrow[u]);
                                }
                                pw->grad.data[wbase + size_t(kk)] += S(acc);
                            }
                            if (xg) {
                                const S wv = pw->value.data[wbase + size_t(kk)];
                                for (int t = 0; t < t_out; ++t) {
                                    const int u = t * stride + off;
                                    if (u >= 0 && u < t_in) xg[u] += wv * grow[t];
                                }
                            }
                        }
                    }
                }
            };
        }
        return out;
    }

    // x (Cin, T), w (Cin, Cout, K) -> (Cout, (T-1)*stride - 2*pad + K)
    Ref<S> tconv1d(Ref<S> x, Ref<S> w, Ref<S> bias, int stride, int pad) {
        if (w->value.shape.size() != 3)
            throw ValidationError("tconv1d: weight must be 3-D, got " + w->value.shape_str());
        const int cin = x->value.rows(), t_in = x->value.cols();
        const int wcin = w->value.shape[0], cout = w->value.shape[1], k = w->value.shape[2];
        if (cin != wcin)
            throw ValidationError("tconv1d: input channels " + x->value.shape_str() + " vs weight " +
                                  w->value.shape_str());
        const int t_out = (t_in - 1) * stride - 2 * pad + k;
        if (t_out < 1) throw ValidationError("tconv1d: output would be empty");

        TensorT<S> v(std::vector<int>{cout, t_out});
        for (int co = 0; co < cout; ++co) {
            S* vrow = &v.data[size_t(co) * size_t(t_out)];
            if (bias) {
                const S b = bias->value.data[size_t(co)];
                for (int t = 0; t < t_out; ++t) vrow[t] = b;
            }
            for (int ci = 0; ci < cin; ++ci) {
                const S* xrow = &x->value.data[size_t(ci) * size_t(t_in)];
                const S* wrow = &w->value.data[(size_t(ci) * size_t(cout) + size_t(co)) * size_t(k)];
                for (int t = 0; t < t_in; ++t) {
                    const S xv = xrow[t];
                    const int base = t * stride - pad;
                    for (int kk = 0; kk < k; ++kk) {
                        const int u = base + kk;
                        if (u >= 0 && u < t_out) vrow[u] += wrow[kk] * xv;
                    }
                }
            }
        }
        Ref<S> out = make(std::move(v), x->needs_grad || w->needs_grad || (bias && bias->needs_grad));
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* px = x.get();
            NodeT<S>* pw = w.get();
            NodeT<S>* pb = bias ? bias.get() : nullptr;
            out->back = [o, px, pw, pb, cin, t_in, cout, k, t_out, stride, pad]() {
                for (int co = 0; co < cout; ++co) {
                    const S* grow = &o->grad.data[size_t(co) * size_t(t_out)];
                    if (pb && pb->needs_grad) {
                        double acc = 0.0;
                        for (int t = 0; t < t_out; ++t) acc += double(grow[t]);
                        pb->grad.data[size_t(co)] += S(acc);
                    }
                    for (int ci = 0; ci < cin; ++ci) {
                        const S* xrow = &px->value.data[size_t(ci) * size_t(t_in)];
                        S* xg = px->needs_grad ? &px->grad.data[size_t(ci) * size_t(t_in)] : nullptr;
                        const size_t wbase = (size_t(ci) * size_t(cout) + size_t(co)) * size_t(k);
                        for (int t = 0; t < t_in; ++t) {
                            const int base = t * stride - pad;
                            for (int kk = 0; kk < k; ++kk) {
                                const int u = base + kk;
                                if (u < 0 || u >= t_out) continue;
                                if (pw->needs_grad)
                                    pw->grad.data[wbase + size_t(kk)] += grow[u] * xrow[t];
                                if (xg) xg[t] += pw->value.data[wbase + size_t(kk)] * grow[u];
                            }
                        }
                    }
                }
            };
        }
        return out;
    }

    // Non-overlapping average pooling over time, (C, T) -> (C, T/k).
    Ref<S> avg_pool1d(Ref<S> x, int k) {
        const int c = x->value.rows(), t_in = x->value.cols();
        const int t_out = t_in / k;
        if (t_out < 1) throw ValidationError("avg_pool1d: output would be empty");
        TensorT<S> v(std::vector<int>{c, t_out});
        for (int i = 0; i < c; ++i)
            for (int t = 0; t < t_out; ++t) {
                double acc = 0.0;
                for (int j = 0; j < k; ++j) acc += double(x->value.at(i, t * k + j));
                v.at(i, t) = S(acc / k);
            }
        Ref<S> out = make(std::move(v), x->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* px = x.get();
            out->back = [o, px, c, t_out, k]() {
                for (int i = 0; i < c; ++i)
                    for (int t = 0; t < t_out; ++t) {
                        const S g = o->grad.at(i, t) / S(k);
                        for (int j = 0; j < k; ++j) px->grad.at(i, t * k + j) += g;
                    }
            };
        }
        return out;
    }

    // table (V, D), indices of length T -> output (D, T), column t = row indices[t].
    Ref<S> embedding(Ref<S> table, const std::vector<int>& indices) {
        const int vocab = table->value.rows(), d = table->value.cols();
        const int t_len = int(indices.size());
        for (int idx : indices)
            if (idx < 0 || idx >= vocab)
                throw ValidationError("embedding: index " + std::to_string(idx) + " out of range [0, " +
                                      std::to_string(vocab) + ")");
        TensorT<S> v(std::vector<int>{d, t_len});
        for (int t = 0; t < t_len; ++t)
            for (int j = 0; j < d; ++j) v.at(j, t) = table->value.at(indices[size_t(t)], j);
        Ref<S> out = make(std::move(v), table->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* pt = table.get();
            std::vector<int> idx = indices;
            out->back = [o, pt, idx, d, t_len]() {
                for (int t = 0; t < t_len; ++t)
                    for (int j = 0; j < d; ++j) pt->grad.at(idx[size_t(t)], j) += o->grad.at(j, t);
            };
        }
        return out;
    }

    // Normalizes each column over the channel axis; gain/bias are per-row.
    Ref<S> layer_norm(Ref<S> x, Ref<S> gain, Ref<S> bias, S eps = S(1e-5)) {
        const int r = x->value.rows(), c = x->value.cols();
        TensorT<S> v(std::vector<int>{r, c});
        std::vector<double> mean_c(size_t(c), 0.0), istd_c(size_t(c), 0.0);
        for (int j = 0; j < c; ++j) {
            double m = 0.0;
            for (int i = 0; i < r; ++i) m += double(x->value.at(i, j));
            m /= r;
            double var = 0.0;
            for (int i = 0; i < r; ++i) {
                const double d = double(x->value.at(i, j)) - m;
                var += d * d;
            }
            var /= r;
            mean_c[size_t(j)] = m;
            istd_c[size_t(j)] = 1.0 / std::sqrt(var + double(eps));
            for (int i = 0; i < r; ++i) {
                const double xhat = (double(x->value.at(i, j)) - m) * istd_c[size_t(j)];
                v.at(i, j) = S(double(gain->value.data[size_t(i)]) * xhat + double(bias->value.data[size_t(i)]));
            }
        }
        Ref<S> out = make(std::move(v), x->needs_grad || gain->needs_grad || bias->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* px = x.get();
            NodeT<S>* pg = gain.get();
            NodeT<S>* pb = bias.get();
            out->back = [o, px, pg, pb, r, c, mean_c, istd_c]() {
                for (int j = 0; j < c; ++j) {
                    const double m = mean_c[size_t(j)], istd = istd_c[size_t(j)];
                    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                    std::vector<double> dxhat(size_t(r), 0.0), xhat(size_t(r), 0.0);
                    for (int i = 0; i < r; ++i) {
                        xhat[size_t(i)] = (double(px->value.at(i, j)) - m) * istd;
                        dxhat[size_t(i)] = double(o->grad.at(i, j)) * double(pg->value.data[size_t(i)]);
                        sum_dxhat += dxhat[size_t(i)];
                        sum_dxhat_xhat += dxhat[size_t(i)] * xhat[size_t(i)];
                        if (pg->needs_grad)
                            pg->grad.data[size_t(i)] += S(double(o->grad.at(i, j)) * xhat[size_t(i)]);
                        if (pb->needs_grad) pb->grad.data[size_t(i)] += o->grad.at(i, j);
                    }
                    if (px->needs_grad)
                        for (int i = 0; i < r; ++i)
                            px->grad.at(i, j) += S(istd * (dxhat[size_t(i)] - sum_dxhat / r -
                                                           xhat[size_t(i)] * sum_dxhat_xhat / r));
                }
            };
        }
        return out;
    }

    // out = a / s, s a scalar node.
    Ref<S> div_by_scalar(Ref<S> a, Ref<S> s) {
        if (s->value.numel() != 1) throw ValidationError("div_by_scalar: divisor must be scalar");
        const S sv = s->value.data[0];
        TensorT<S> v = a->value;
        for (auto& x : v.data) x /= sv;
        Ref<S> out = make(std::move(v), a->needs_grad || s->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* pa = a.get();
            NodeT<S>* ps = s.get();
            out->back = [o, pa, ps, sv]() {
                if (pa->needs_grad)
                    for (size_t i = 0; i < o->grad.data.size(); ++i) pa->grad.data[i] += o->grad.data[i] / sv;
                if (ps->needs_grad) {
                    double acc = 0.0;
                    for (size_t i = 0; i < o->grad.data.size(); ++i)
                        acc -= double(o->grad.data[i]) * double(pa->value.data[i]) / (double(sv) * double(sv));
                    ps->grad.data[0] += S(acc);
                }
            };
        }
        return out;
    }

    // Magnitude STFT of a 1-D signal: reflect padding n_fft/2, Hann-style
    // window passed in, T = 1 + floor(N/hop). Output (n_fft/2+1, T).
    // FFT runs in double internally; backward goes through one inverse FFT
    // per frame.
    Ref<S> stft_mag(Ref<S> x, int n_fft, int hop, const std::vector<double>& win) {
        if (x->value.shape.size() != 1)
            throw ValidationError("stft_mag: signal must be 1-D, got " + x->value.shape_str());
        const int n = int(x->value.data.size());
        if (n < 1) throw ValidationError("stft_mag: empty signal");
        const int t_frames = 1 + n / hop;
        const int pad = n_fft / 2;
        const int wl = int(win.size());
        const int win_off = (n_fft - wl) / 2;
        const int k_bins = n_fft / 2 + 1;
        const double mag_eps = 1e-12;

        auto reflect = [n](int i) {
            if (n == 1) return 0;
            while (i < 0 || i >= n) {
                if (i < 0) i = -i;
                if (i >= n) i = 2 * n - 2 - i;
            }
            return i;
        };

        // Keep the complex spectra for the backward pass.
        auto spectra = std::make_shared<std::vector<std::vector<std::complex<double>>>>(size_t(t_frames));
        TensorT<S> v(std::vector<int>{k_bins, t_frames});
        std::vector<std::complex<double>> buf(size_t(n_fft), 0.0);
        for (int t = 0; t < t_frames; ++t) {
            std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
            const int start = t * hop - pad;
            for (int i = 0; i < wl; ++i)
                buf[size_t(win_off + i)] =
                    double(x->value.data[size_t(reflect(start + win_off + i))]) * win[size_t(i)];
            fft_pow2(buf, false);
            auto& spec = (*spectra)[size_t(t)];
            spec.assign(buf.begin(), buf.begin() + k_bins);
            for (int k = 0; k < k_bins; ++k)
                v.at(k, t) = S(std::sqrt(std::norm(spec[size_t(k)]) + mag_eps));
        }
        Ref<S> out = make(std::move(v), x->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* px = x.get();
            std::vector<double> w = win;
            out->back = [o, px, spectra, w, n, n_fft, hop, t_frames, pad, wl, win_off, k_bins, mag_eps,
                         reflect]() {
                std::vector<std::complex<double>> h(size_t(n_fft), 0.0);
                for (int t = 0; t < t_frames; ++t) {
                    const auto& spec = (*spectra)[size_t(t)];
                    std::fill(h.begin(), h.end(), std::complex<double>(0.0, 0.0));
                    for (int k = 0; k < k_bins; ++k) {
                        const double mag = std::sqrt(std::norm(spec[size_t(k)]) + mag_eps);
                        const double g = double(o->grad.at(k, t));
                        h[size_t(k)] = {g * spec[size_t(k)].real() / mag, g * spec[size_t(k)].imag() / mag};
                    }
                    fft_pow2(h, true);  // e^{+i...}, no 1/N: gives dL/dframe directly
                    const int start = t * hop - pad;
                    for (int i = 0; i < wl; ++i) {
                        const int src = reflect(start + win_off + i);
                        px->grad.data[size_t(src)] += S(h[size_t(win_off + i)].real() * w[size_t(i)]);
                    }
                }
            };
        }
        return out;
    }

    // Picks every period-th sample starting at phase from a 1-D signal,
    // zero-padding the tail: out[i] = x[i*period + phase] or 0.
    Ref<S> downsample_phase(Ref<S> x, int period, int phase) {
        if (x->value.shape.size() != 1) throw ValidationError("downsample_phase: signal must be 1-D");
        const int n = int(x->value.data.size());
        const int len = (n + period - 1) / period;
        TensorT<S> v(std::vector<int>{len});
        for (int i = 0; i < len; ++i) {
            const int u = i * period + phase;
            v.data[size_t(i)] = u < n ? x->value.data[size_t(u)] : S(0);
        }
        Ref<S> out = make(std::move(v), x->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* px = x.get();
            out->back = [o, px, period, phase, n, len]() {
                for (int i = 0; i < len; ++i) {
                    const int u = i * period + phase;
                    if (u < n) px->grad.data[size_t(u)] += o->grad.data[size_t(i)];
                }
            };
        }
        return out;
    }

    // Flattens (R, C) to a 1-D tensor (same storage order).
    Ref<S> flatten(Ref<S> a) {
        TensorT<S> v = a->value;
        v.shape = {int(v.data.size())};
        Ref<S> out = make(std::move(v), a->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* pa = a.get();
            out->back = [o, pa]() {
                for (size_t i = 0; i < o->grad.data.size(); ++i) pa->grad.data[i] += o->grad.data[i];
            };
        }
        return out;
    }

    Ref<S> reshape(Ref<S> a, std::vector<int> shape) {
        if (TensorT<S>::numel_of(shape) != a->value.numel())
            throw ValidationError("reshape: numel mismatch " + a->value.shape_str());
        TensorT<S> v = a->value;
        v.shape = std::move(shape);
        Ref<S> out = make(std::move(v), a->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* pa = a.get();
            out->back = [o, pa]() {
                for (size_t i = 0; i < o->grad.data.size(); ++i) pa->grad.data[i] += o->grad.data[i];
            };
        }
        return out;
    }

    // Accumulates d(loss)/d(p) into every reachable trainable parameter.
    void backward(Ref<S> loss) {
        if (loss->value.numel() != 1) throw ValidationError("backward: loss must be scalar");
        if (!loss->needs_grad) return;
        loss->grad.data[0] = S(1);
        for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
            NodeT<S>* node = it->get();
            if (node->needs_grad && node->back) node->back();
        }
    }

    size_t size() const { return tape_.size(); }

  private:
    std::vector<Ref<S>> tape_;

    Ref<S> make(TensorT<S> v, bool needs_grad) {
        auto n = std::make_shared<NodeT<S>>();
        n->value = std::move(v);
        n->needs_grad = needs_grad;
        if (needs_grad) n->grad = TensorT<S>(n->value.shape);
        tape_.push_back(n);
        return n;
    }

    void check_same_shape(const Ref<S>& a, const Ref<S>& b, const char* op) {
        if (a->value.shape != b->value.shape)
            throw ValidationError(std::string(op) + ": shape mismatch " + a->value.shape_str() + " vs " +
                                  b->value.shape_str());
    }

    void check_col_compat(const Ref<S>& x, const Ref<S>& col, const char* op) {
        if (int64_t(col->value.numel()) != int64_t(x->value.rows()))
            throw ValidationError(std::string(op) + ": column vector " + col->value.shape_str() +
                                  " does not match rows of " + x->value.shape_str());
    }

    // dval(x, y) with x the input value and y the output value.
    template <class F>
    Ref<S> unary(TensorT<S> v, Ref<S> a, F dval) {
        Ref<S> out = make(std::move(v), a->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* pa = a.get();
            out->back = [o, pa, dval]() {
                for (size_t i = 0; i < o->grad.data.size(); ++i)
                    pa->grad.data[i] += o->grad.data[i] * dval(pa->value.data[i], o->value.data[i]);
            };
        }
        return out;
    }

    template <class FA, class FB>
    Ref<S> binary_elem(TensorT<S> v, Ref<S> a, Ref<S> b, FA da, FB db) {
        Ref<S> out = make(std::move(v), a->needs_grad || b->needs_grad);
        if (out->needs_grad) {
            NodeT<S>* o = out.get();
            NodeT<S>* pa = a.get();
            NodeT<S>* pb = b.get();
            out->back = [o, pa, pb, da, db]() {
                if (pa->needs_grad)
                    for (size_t i = 0; i < o->grad.data.size(); ++i)
                        pa->grad.data[i] += o->grad.data[i] * da(pa->value.data[i]);
                if (pb->needs_grad)
                    for (size_t i = 0; i < o->grad.data.size(); ++i)
                        pb->grad.data[i] += o->grad.data[i] * db(pb->value.data[i]);
            };
        }
        return out;
    }
};

using Tensor = TensorT<float>;
using Param = ParameterT<float>;
using Graph = GraphT<float>;
using NodeRef = Ref<float>;

// Central-difference gradient verification.
// fn(true) must run forward + backward and return the loss, leaving gradients
// in the parameters; fn(false) must return the loss only. Relative error is
// |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|), maximized over coordinates.
template <class S>
double grad_check(const std::function<double(bool)>& fn, const std::vector<ParameterT<S>*>& params,
                  double eps = 1e-3) {
    for (auto* p : params) p->zero_grad();
    fn(true);
    std::vector<std::vector<double>> g_ad;
    for (auto* p : params) {
        std::vector<double> g(p->grad.data.begin(), p->grad.data.end());
        g_ad.push_back(std::move(g));
    }
    double max_err = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto* p = params[pi];
        for (size_t i = 0; i < p->value.data.size(); ++i) {
            const S orig = p->value.data[i];
            p->value.data[i] = S(double(orig) + eps);
            const double fp = fn(false);
            p->value.data[i] = S(double(orig) - eps);
            const double fm = fn(false);
            p->value.data[i] = orig;
            const double fd = (fp - fm) / (2.0 * eps);
            const double ad = g_ad[pi][i];
            const double err = std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd));
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

}  // namespace svc
