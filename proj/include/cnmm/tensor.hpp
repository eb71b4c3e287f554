#pragma once

// Reverse-mode autodiff over dense tensors. A Tape records every executed op
// in order; backward() makes a single reverse sweep over that record. Leaves
// (parameters, inputs) keep accumulating gradients across sweeps until the
// caller resets them; intermediate gradients are re-zeroed per sweep.

#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cnmm/errors.hpp"
#include "cnmm/kernels.hpp"
#include "cnmm/rng.hpp"
#include "cnmm/shape.hpp"

namespace cnmm {

template <class T = double>
struct Array {
    Shape shape;
    std::vector<T> v;

    Array() = default;
    explicit Array(const Shape& s, T fill = T(0))
        : shape(s), v(static_cast<size_t>(s.numel()), fill) {}

    static Array from(const Shape& s, std::vector<T> data) {
        if (static_cast<std::int64_t>(data.size()) != s.numel())
            throw ValidationError("Array: data length " + std::to_string(data.size()) +
                                  " does not match shape " + s.str());
        Array a;
        a.shape = s;
        a.v = std::move(data);
        return a;
    }

    std::int64_t numel() const { return shape.numel(); }
    bool empty() const { return v.empty(); }

    void fill_uniform(Rng& rng, double lo, double hi) {
        for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
    }
    void fill_normal(Rng& rng, double stddev) {
        for (auto& x : v) x = static_cast<T>(stddev * rng.normal());
    }

    bool all_finite() const {
        for (T x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }
};

template <class T = double>
struct Node {
    Array<T> value;
    Array<T> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::function<void()> backward;  // empty for leaves
    const char* op = "leaf";

    T* grad_ptr() {
        if (grad.empty()) grad = Array<T>(value.shape);
        return grad.v.data();
    }
};

// Lightweight handle; nodes are owned by a Tape or by a model's ParamStore.
template <class T = double>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Node<T>* n) : n_(n) {}

    bool defined() const { return n_ != nullptr; }
    Node<T>* node() const { return n_; }
    const Shape& shape() const { return n_->value.shape; }
    const Array<T>& value() const { return n_->value; }
    Array<T>& value() { return n_->value; }
    const Array<T>& grad() const { return n_->grad; }
    bool requires_grad() const { return n_->requires_grad; }

    // Convenience for scalar results.
    T item() const {
        if (n_->value.numel() != 1) throw ValidationError("Tensor::item: not a scalar");
        return n_->value.v[0];
    }

private:
    Node<T>* n_ = nullptr;
};

// Named trainable (or frozen) leaf owned by a model.
template <class T = double>
struct Param {
    std::string name;
    Node<T> node;
    bool decay = false;  // participates in weight decay

    Tensor<T> tensor() { return Tensor<T>(&node); }
    void zero_grad() { node.grad.v.clear(); }
};

// Running statistics owned by a batch-norm layer (not differentiated).
template <class T = double>
struct BnState {
    std::vector<T> running_mean;
    std::vector<T> running_var;

    explicit BnState(int channels = 0)
        : running_mean(channels, T(0)), running_var(channels, T(1)) {}
    int channels() const { return static_cast<int>(running_mean.size()); }
};

template <class T = double>
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_(grad_enabled) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool grad_enabled() const { return grad_; }

    Tensor<T> input(Array<T> v, bool requires_grad = false) {
        Node<T>* n = make(std::move(v), requires_grad && grad_, "input");
        return Tensor<T>(n);
    }

    Tensor<T> constant(Array<T> v) { return input(std::move(v), false); }

    // -- convolution ---------------------------------------------------------

    Tensor<T> conv2d(Tensor<T> x, Tensor<T> w, int stride, int pad) {
        const Shape& xs = x.shape();
        const Shape& ws = w.shape();
        if (xs.rank() != 4 || ws.rank() != 4)
            throw ValidationError("conv2d: expected rank-4 input " + xs.str() +
                                  " and weight " + ws.str());
        if (xs.dim(1) != ws.dim(1))
            throw ValidationError("conv2d: input channels " + std::to_string(xs.dim(1)) +
                                  " != weight channels " + std::to_string(ws.dim(1)));
        if (stride != 1 && stride != 2) throw ValidationError("conv2d: stride must be 1 or 2");
        if (pad < 0) throw ValidationError("conv2d: negative padding");
        const int N = xs.dim(0), Ci = xs.dim(1), H = xs.dim(2), W = xs.dim(3);
        const int Co = ws.dim(0), kh = ws.dim(2), kw = ws.dim(3);
        const int Ho = kern::conv_out_extent(H, kh, stride, pad);
        const int Wo = kern::conv_out_extent(W, kw, stride, pad);
        if (Ho <= 0 || Wo <= 0)
            throw ValidationError("conv2d: kernel " + ws.str() + " does not fit input " +
                                  xs.str());
        Array<T> out(Shape{N, Co, Ho, Wo});
        kern::par::conv2d_fwd(x.value().v.data(), w.value().v.data(), out.v.data(), N, Ci,
                              H, W, Co, kh, kw, stride, pad);
        Node<T>* n = make(std::move(out), wants_grad({x, w}), "conv2d");
        if (n->requires_grad) {
            Node<T>*xn = x.node(), *wn = w.node();
            n->backward = [=]() {
                const T* gy = n->grad.v.data();
                if (xn->requires_grad)
                    kern::par::conv2d_bwd_x(gy, wn->value.v.data(), xn->grad_ptr(), N, Ci,
                                            H, W, Co, kh, kw, stride, pad);
                if (wn->requires_grad)
                    kern::par::conv2d_bwd_w(gy, xn->value.v.data(), wn->grad_ptr(), N, Ci,
                                            H, W, Co, kh, kw, stride, pad);
            };
        }
        return Tensor<T>(n);
    }

    // One kernel per input channel; weight shape [C, kh, kw].
    Tensor<T> depthwise_conv2d(Tensor<T> x, Tensor<T> w, int stride, int pad) {
        const Shape& xs = x.shape();
        const Shape& ws = w.shape();
        if (xs.rank() != 4 || ws.rank() != 3)
            throw ValidationError("depthwise_conv2d: expected rank-4 input and rank-3 weight, got " +
                                  xs.str() + " / " + ws.str());
        if (xs.dim(1) != ws.dim(0))
            throw ValidationError("depthwise_conv2d: channel mismatch " +
                                  std::to_string(xs.dim(1)) + " vs " +
                                  std::to_string(ws.dim(0)));
        if (stride != 1 && stride != 2)
            throw ValidationError("depthwise_conv2d: stride must be 1 or 2");
        if (pad < 0) throw ValidationError("depthwise_conv2d: negative padding");
        const int N = xs.dim(0), C = xs.dim(1), H = xs.dim(2), W = xs.dim(3);
        const int kh = ws.dim(1), kw = ws.dim(2);
        const int Ho = kern::conv_out_extent(H, kh, stride, pad);
        const int Wo = kern::conv_out_extent(W, kw, stride, pad);
        if (Ho <= 0 || Wo <= 0)
            throw ValidationError("depthwise_conv2d: kernel does not fit input " + xs.str());
        Array<T> out(Shape{N, C, Ho, Wo});
        kern::par::dwconv_fwd(x.value().v.data(), w.value().v.data(), out.v.data(), N, C, H,
                              W, kh, kw, stride, pad);
        Node<T>* n = make(std::move(out), wants_grad({x, w}), "depthwise_conv2d");
        if (n->requires_grad) {
            Node<T>*xn = x.node(), *wn = w.node();
            n->backward = [=]() {
                const T* gy = n->grad.v.data();
                if (xn->requires_grad)
                    kern::par::dwconv_bwd_x(gy, wn->value.v.data(), xn->grad_ptr(), N, C, H,
                                            W, kh, kw, stride, pad);
                if (wn->requires_grad)
                    kern::par::dwconv_bwd_w(gy, xn->value.v.data(), wn->grad_ptr(), N, C, H,
                                            W, kh, kw, stride, pad);
            };
        }
        return Tensor<T>(n);
    }

    // -- batch normalization -------------------------------------------------
    //
    // Train mode normalizes by biased batch statistics, differentiates through
    // them, and updates `state` in place. Eval mode uses the stored running
    // statistics. Accepts NCHW maps or [N,F] feature vectors.

    Tensor<T> batch_norm(Tensor<T> x, Tensor<T> gamma, Tensor<T> beta, BnState<T>& state,
                         bool train, double momentum, double eps) {
        const Shape& xs = x.shape();
        if (xs.rank() != 4 && xs.rank() != 2)
            throw ValidationError("batch_norm: expected rank 2 or 4 input, got " + xs.str());
        const int N = xs.dim(0), C = xs.dim(1);
        const kern::i64 S = xs.rank() == 4 ? (kern::i64)xs.dim(2) * xs.dim(3) : 1;
        if (gamma.shape() != Shape{C} || beta.shape() != Shape{C})
            throw ValidationError("batch_norm: gamma/beta must have shape [C]");
        if (state.channels() != C)
            throw ValidationError("batch_norm: running stats channel mismatch");
        if (eps < 0) throw ValidationError("batch_norm: negative eps");

        Array<T> out(xs);
        Node<T>* n;
        if (train) {
            std::vector<T> mean(C), invstd(C);
            kern::par::bn_train_fwd(x.value().v.data(), out.v.data(), N, C, S,
                                    gamma.value().v.data(), beta.value().v.data(), eps,
                                    mean.data(), invstd.data());
            const T m = static_cast<T>(momentum);
            for (int c = 0; c < C; ++c) {
                const T var = invstd[c] > T(0)
                                  ? T(1) / (invstd[c] * invstd[c]) - static_cast<T>(eps)
                                  : T(0);
                state.running_mean[c] = m * state.running_mean[c] + (T(1) - m) * mean[c];
                state.running_var[c] = m * state.running_var[c] + (T(1) - m) * var;
            }
            n = make(std::move(out), wants_grad({x, gamma, beta}), "batch_norm");
            if (n->requires_grad) {
                Node<T>*xn = x.node(), *gn = gamma.node(), *bn = beta.node();
                n->backward = [=, mean = std::move(mean), invstd = std::move(invstd)]() {
                    kern::par::bn_train_bwd(n->grad.v.data(), xn->value.v.data(),
                                            xn->grad_ptr(), gn->grad_ptr(), bn->grad_ptr(),
                                            N, C, S, gn->value.v.data(), mean.data(),
                                            invstd.data());
                };
            }
        } else {
            kern::par::bn_eval_fwd(x.value().v.data(), out.v.data(), N, C, S,
                                   gamma.value().v.data(), beta.value().v.data(),
                                   state.running_mean.data(), state.running_var.data(), eps);
            n = make(std::move(out), wants_grad({x, gamma, beta}), "batch_norm");
            if (n->requires_grad) {
                Node<T>*xn = x.node(), *gn = gamma.node(), *bn = beta.node();
                std::vector<T> rm = state.running_mean, rv = state.running_var;
                n->backward = [=, rm = std::move(rm), rv = std::move(rv)]() {
                    kern::par::bn_eval_bwd(n->grad.v.data(), xn->value.v.data(),
                                           xn->grad_ptr(), gn->grad_ptr(), bn->grad_ptr(),
                                           N, C, S, gn->value.v.data(), rm.data(),
                                           rv.data(), eps);
                };
            }
        }
        return Tensor<T>(n);
    }

    // -- pointwise and pooling -----------------------------------------------

    Tensor<T> relu(Tensor<T> x) {
        Array<T> out(x.shape());
        kern::par::relu_fwd(x.value().v.data(), out.v.data(), out.numel());
        Node<T>* n = make(std::move(out), wants_grad({x}), "relu");
        if (n->requires_grad) {
            Node<T>* xn = x.node();
            n->backward = [=]() {
                kern::par::relu_bwd(n->grad.v.data(), xn->value.v.data(), xn->grad_ptr(),
                                    n->value.numel());
            };
        }
        return Tensor<T>(n);
    }

    // 2x2 stride-2 average pooling; odd extents replicate the last row/column.
    Tensor<T> avg_pool2(Tensor<T> x) {
        const Shape& xs = x.shape();
        if (xs.rank() != 4) throw ValidationError("avg_pool2: expected rank-4 input");
        const int N = xs.dim(0), C = xs.dim(1), H = xs.dim(2), W = xs.dim(3);
        const int Ho = kern::pool2_out_extent(H), Wo = kern::pool2_out_extent(W);
        Array<T> out(Shape{N, C, Ho, Wo});
        kern::par::pool2_fwd(x.value().v.data(), out.v.data(), N, C, H, W);
        Node<T>* n = make(std::move(out), wants_grad({x}), "avg_pool2");
        if (n->requires_grad) {
            Node<T>* xn = x.node();
            n->backward = [=]() {
                kern::par::pool2_bwd(n->grad.v.data(), xn->grad_ptr(), N, C, H, W);
            };
        }
        return Tensor<T>(n);
    }

    Tensor<T> global_avg_pool(Tensor<T> x) {
        const Shape& xs = x.shape();
        if (xs.rank() != 4) throw ValidationError("global_avg_pool: expected rank-4 input");
        const int N = xs.dim(0), C = xs.dim(1);
        const kern::i64 S = (kern::i64)xs.dim(2) * xs.dim(3);
        Array<T> out(Shape{N, C});
        kern::par::gap_fwd(x.value().v.data(), out.v.data(), N, C, S);
        Node<T>* n = make(std::move(out), wants_grad({x}), "global_avg_pool");
        if (n->requires_grad) {
            Node<T>* xn = x.node();
            n->backward = [=]() {
                kern::par::gap_bwd(n->grad.v.data(), xn->grad_ptr(), N, C, S);
            };
        }
        return Tensor<T>(n);
    }

    Tensor<T> linear(Tensor<T> x, Tensor<T> w, Tensor<T> b) {
        const Shape& xs = x.shape();
        const Shape& ws = w.shape();
        if (xs.rank() != 2 || ws.rank() != 2)
            throw ValidationError("linear: expected [N,F] input and [O,F] weight, got " +
                                  xs.str() + " / " + ws.str());
        if (xs.dim(1) != ws.dim(1))
            throw ValidationError("linear: feature mismatch " + xs.str() + " vs " + ws.str());
        const int N = xs.dim(0), F = xs.dim(1), O = ws.dim(0);
        if (b.shape() != Shape{O})
            throw ValidationError("linear: bias must have shape [O]");
        Array<T> out(Shape{N, O});
        kern::par::linear_fwd(x.value().v.data(), w.value().v.data(), b.value().v.data(),
                              out.v.data(), N, F, O);
        Node<T>* n = make(std::move(out), wants_grad({x, w, b}), "linear");
        if (n->requires_grad) {
            Node<T>*xn = x.node(), *wn = w.node(), *bn = b.node();
            n->backward = [=]() {
                const T* gy = n->grad.v.data();
                if (xn->requires_grad)
                    kern::par::linear_bwd_x(gy, wn->value.v.data(), xn->grad_ptr(), N, F, O);
                if (wn->requires_grad || bn->requires_grad)
                    kern::par::linear_bwd_wb(gy, xn->value.v.data(),
                                             wn->requires_grad ? wn->grad_ptr() : nullptr,
                                             bn->requires_grad ? bn->grad_ptr() : nullptr, N,
                                             F, O);
            };
        }
        return Tensor<T>(n);
    }

    // -- mixture plumbing ------------------------------------------------------

    // y = g*a + (1-g)*b with g holding one value per sample or a single
    // broadcast value. Gate values outside [0,1] indicate a broken gate.
    Tensor<T> affine_combine(Tensor<T> g, Tensor<T> a, Tensor<T> b) {
        if (a.shape() != b.shape())
            throw ValidationError("affine_combine: operand shapes differ: " +
                                  a.shape().str() + " vs " + b.shape().str());
        const int N = a.shape().rank() == 0 ? 1 : a.shape().dim(0);
        const int m = static_cast<int>(g.value().numel());
        if (m != 1 && m != N)
            throw ValidationError("affine_combine: gate count " + std::to_string(m) +
                                  " does not match batch " + std::to_string(N));
        for (T gv : g.value().v)
            if (!(gv >= T(0) && gv <= T(1)))
                throw ValidationError("affine_combine: gate value outside [0,1]");
        const kern::i64 S = a.value().numel() / N;
        Array<T> out(a.shape());
        kern::par::combine_fwd(a.value().v.data(), b.value().v.data(), g.value().v.data(),
                               m, out.v.data(), N, S);
        Node<T>* n = make(std::move(out), wants_grad({g, a, b}), "affine_combine");
        if (n->requires_grad) {
            Node<T>*gn = g.node(), *an = a.node(), *bn2 = b.node();
            n->backward = [=]() {
                const T* gy = n->grad.v.data();
                if (an->requires_grad || bn2->requires_grad)
                    kern::par::combine_bwd_ab(gy, gn->value.v.data(), m, an->grad_ptr(),
                                              bn2->grad_ptr(), N, S);
                if (gn->requires_grad)
                    kern::par::combine_bwd_g(gy, an->value.v.data(), bn2->value.v.data(), m,
                                             gn->grad_ptr(), N, S);
            };
        }
        return Tensor<T>(n);
    }

    // Gate values from a logit entry. With noise values c_j (logistic noise,
    // log u - log(1-u)) this is a binary-concrete sample per j; with an empty
    // noise vector it is the plain Bernoulli expectation sigmoid(logit).
    Tensor<T> gate_from_logit(Tensor<T> logits, int index,
                              const std::vector<double>& noise, double lambda) {
        if (logits.shape().rank() != 1)
            throw ValidationError("gate_from_logit: logits must be a vector");
        if (index < 0 || index >= logits.shape().dim(0))
            throw ValidationError("gate_from_logit: index out of range");
        if (lambda <= 0) throw ValidationError("gate_from_logit: temperature must be > 0");
        const int m = noise.empty() ? 1 : static_cast<int>(noise.size());
        const double w = static_cast<double>(logits.value().v[index]);
        Array<T> out(Shape{m});
        if (noise.empty()) {
            out.v[0] = static_cast<T>(1.0 / (1.0 + std::exp(-w)));
        } else {
            for (int j = 0; j < m; ++j)
                out.v[j] = static_cast<T>(1.0 / (1.0 + std::exp(-(w + noise[j]) / lambda)));
        }
        Node<T>* n = make(std::move(out), wants_grad({logits}), "gate_from_logit");
        if (n->requires_grad) {
            Node<T>* ln = logits.node();
            const double inv_lambda = noise.empty() ? 1.0 : 1.0 / lambda;
            n->backward = [=]() {
                T acc = T(0);
                for (int j = 0; j < m; ++j) {
                    const T gv = n->value.v[j];
                    acc += n->grad.v[j] * gv * (T(1) - gv) * static_cast<T>(inv_lambda);
                }
                ln->grad_ptr()[index] += acc;
            };
        }
        return Tensor<T>(n);
    }

    // -- elementwise / reductions ---------------------------------------------

    Tensor<T> add(Tensor<T> a, Tensor<T> b) {
        if (a.shape() != b.shape())
            throw ValidationError("add: shape mismatch " + a.shape().str() + " vs " +
                                  b.shape().str());
        Array<T> out(a.shape());
        kern::par::add_fwd(a.value().v.data(), b.value().v.data(), out.v.data(),
                           out.numel());
        Node<T>* n = make(std::move(out), wants_grad({a, b}), "add");
        if (n->requires_grad) {
            Node<T>*an = a.node(), *bn = b.node();
            n->backward = [=]() {
                const auto numel = n->value.numel();
                if (an->requires_grad)
                    kern::par::acc_scaled(n->grad.v.data(), T(1), an->grad_ptr(), numel);
                if (bn->requires_grad)
                    kern::par::acc_scaled(n->grad.v.data(), T(1), bn->grad_ptr(), numel);
            };
        }
        return Tensor<T>(n);
    }

    Tensor<T> mul(Tensor<T> a, Tensor<T> b) {
        if (a.shape() != b.shape())
            throw ValidationError("mul: shape mismatch " + a.shape().str() + " vs " +
                                  b.shape().str());
        Array<T> out(a.shape());
        kern::par::mul_fwd(a.value().v.data(), b.value().v.data(), out.v.data(),
                           out.numel());
        Node<T>* n = make(std::move(out), wants_grad({a, b}), "mul");
        if (n->requires_grad) {
            Node<T>*an = a.node(), *bn = b.node();
            n->backward = [=]() {
                const auto numel = n->value.numel();
                if (an->requires_grad)
                    kern::par::acc_mul(n->grad.v.data(), bn->value.v.data(), an->grad_ptr(),
                                       numel);
                if (bn->requires_grad)
                    kern::par::acc_mul(n->grad.v.data(), an->value.v.data(), bn->grad_ptr(),
                                       numel);
            };
        }
        return Tensor<T>(n);
    }

    Tensor<T> scale(Tensor<T> x, double s) {
        Array<T> out(x.shape());
        kern::par::scale_fwd(x.value().v.data(), static_cast<T>(s), out.v.data(),
                             out.numel());
        Node<T>* n = make(std::move(out), wants_grad({x}), "scale");
        if (n->requires_grad) {
            Node<T>* xn = x.node();
            n->backward = [=]() {
                kern::par::acc_scaled(n->grad.v.data(), static_cast<T>(s), xn->grad_ptr(),
                                      n->value.numel());
            };
        }
        return Tensor<T>(n);
    }

    Tensor<T> sum(Tensor<T> x) {
        T acc = T(0);
        for (T v : x.value().v) acc += v;
        Array<T> out(Shape::scalar());
        out.v[0] = acc;
        Node<T>* n = make(std::move(out), wants_grad({x}), "sum");
        if (n->requires_grad) {
            Node<T>* xn = x.node();
            n->backward = [=]() {
                T* gx = xn->grad_ptr();
                const T g = n->grad.v[0];
                for (std::int64_t i = 0; i < xn->value.numel(); ++i) gx[i] += g;
            };
        }
        return Tensor<T>(n);
    }

    // Mean cross-entropy over the batch, numerically stable via max shift.
    Tensor<T> softmax_cross_entropy(Tensor<T> logits, const std::vector<int>& labels) {
        const Shape& ls = logits.shape();
        if (ls.rank() != 2)
            throw ValidationError("softmax_cross_entropy: expected [N,K] logits");
        const int N = ls.dim(0), K = ls.dim(1);
        if (static_cast<int>(labels.size()) != N)
            throw ValidationError("softmax_cross_entropy: label count mismatch");
        for (int y : labels)
            if (y < 0 || y >= K)
                throw ValidationError("softmax_cross_entropy: label " + std::to_string(y) +
                                      " out of range [0," + std::to_string(K) + ")");
        std::vector<T> per_sample(N);
        kern::par::xent_fwd(logits.value().v.data(), labels.data(), per_sample.data(), N, K);
        T total = T(0);
        for (T v : per_sample) total += v;
        Array<T> out(Shape::scalar());
        out.v[0] = total / T(N);
        Node<T>* n = make(std::move(out), wants_grad({logits}), "softmax_cross_entropy");
        if (n->requires_grad) {
            Node<T>* ln = logits.node();
            n->backward = [=]() {
                const T gscale = n->grad.v[0] / T(N);
                kern::par::xent_bwd(ln->value.v.data(), labels_copy_.at(n).data(), gscale,
                                    ln->grad_ptr(), N, K);
            };
            labels_copy_[n] = labels;
        }
        return Tensor<T>(n);
    }

    // -- reverse sweep ---------------------------------------------------------

    void backward(Tensor<T> loss) {
        if (!grad_) throw ValidationError("backward: gradients disabled on this tape");
        if (loss.value().numel() != 1)
            throw ValidationError("backward: loss must be a scalar, got " +
                                  loss.shape().str());
        // Reset intermediates; leaves keep accumulating across sweeps.
        for (auto& n : nodes_)
            if (n->backward) n->grad.v.clear();
        loss.node()->grad_ptr()[0] += T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            Node<T>* n = it->get();
            if (n->backward && !n->grad.empty()) n->backward();
        }
    }

    size_t size() const { return nodes_.size(); }

private:
    bool wants_grad(std::initializer_list<Tensor<T>> parents) const {
        if (!grad_) return false;
        for (const Tensor<T>& p : parents)
            if (p.requires_grad()) return true;
        return false;
    }

    Node<T>* make(Array<T> value, bool requires_grad, const char* op) {
        auto n = std::make_unique<Node<T>>();
        n->value = std::move(value);
        n->requires_grad = requires_grad;
        n->op = op;
        nodes_.push_back(std::move(n));
        return nodes_.back().get();
    }

    bool grad_;
    std::deque<std::unique_ptr<Node<T>>> nodes_;
    std::map<const Node<T>*, std::vector<int>> labels_copy_;
};

}  // namespace cnmm
