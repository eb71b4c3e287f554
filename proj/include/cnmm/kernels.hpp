#pragma once

// Dense kernels behind the autodiff ops. Every kernel comes in two drivers:
// cnmm::kern::par (OpenMP, the default execution path) and cnmm::kern::ref
// (serial reference, kept for tests and the kernel benchmark). Both drivers
// call the same noinline per-slice workers, so results are identical bit for
// bit: parallelism only distributes disjoint slices across threads and never
// reorders an accumulation.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "cnmm/errors.hpp"

#if defined(__GNUC__) || defined(__clang__)
#define CNMM_NOINLINE __attribute__((noinline))
#else
#define CNMM_NOINLINE
#endif

namespace cnmm::kern {

using i64 = std::int64_t;

inline int conv_out_extent(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// avg_pool2 pools 2x2/stride-2 windows; an odd trailing row/column is
// replicated, so the output extent rounds up.
inline int pool2_out_extent(int in) { return (in + 1) / 2; }

namespace detail {

constexpr i64 kChunk = 1 << 13;  // elementwise work unit

inline i64 num_chunks(i64 n) { return n <= 0 ? 0 : (n + kChunk - 1) / kChunk; }

// ---------------------------------------------------------------------------
// Workers. Each computes one independent slice (an output plane, a channel,
// an elementwise chunk) with a fixed serial accumulation order. Drivers pass
// pointers already offset to the slice.
// ---------------------------------------------------------------------------

// One conv2d output plane: yp[Ho*Wo] from xn[Ci*H*W] and wc[Ci*kh*kw].
template <class T>
CNMM_NOINLINE void conv2d_fwd_plane(const T* xn, const T* wc, T* yp, int Ci, int H, int W,
                                    int kh, int kw, int stride, int pad, int Ho, int Wo) {
    if (kh == 1 && kw == 1 && stride == 1 && pad == 0) {
        const i64 plane = (i64)H * W;
        for (i64 p = 0; p < plane; ++p) yp[p] = T(0);
        for (int ci = 0; ci < Ci; ++ci) {
            const T wv = wc[ci];
            const T* xc = xn + (i64)ci * plane;
            for (i64 p = 0; p < plane; ++p) yp[p] += wv * xc[p];
        }
        return;
    }
    for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
            T acc = T(0);
            for (int ci = 0; ci < Ci; ++ci) {
                const T* xc = xn + (i64)ci * H * W;
                const T* wk = wc + (i64)ci * kh * kw;
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= H) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * stride - pad + kx;
                        if (ix < 0 || ix >= W) continue;
                        acc += xc[(i64)iy * W + ix] * wk[(i64)ky * kw + kx];
                    }
                }
            }
            yp[(i64)oy * Wo + ox] = acc;
        }
    }
}

// Input-gradient plane for one (n, ci): accumulates into gxp[H*W].
// w is the full weight tensor [Co,Ci,kh,kw]; gyn the sample's grad [Co,Ho,Wo].
template <class T>
CNMM_NOINLINE void conv2d_bwd_x_plane(const T* gyn, const T* w, T* gxp, int ci, int Co,
                                      int Ci, int H, int W, int kh, int kw, int stride,
                                      int pad, int Ho, int Wo) {
    if (kh == 1 && kw == 1 && stride == 1 && pad == 0) {
        const i64 plane = (i64)H * W;
        for (int co = 0; co < Co; ++co) {
            const T wv = w[(i64)co * Ci + ci];
            const T* gyc = gyn + (i64)co * plane;
            for (i64 p = 0; p < plane; ++p) gxp[p] += wv * gyc[p];
        }
        return;
    }
    for (int co = 0; co < Co; ++co) {
        const T* gyc = gyn + (i64)co * Ho * Wo;
        const T* wk = w + ((i64)co * Ci + ci) * kh * kw;
        for (int oy = 0; oy < Ho; ++oy) {
            for (int ox = 0; ox < Wo; ++ox) {
                const T g = gyc[(i64)oy * Wo + ox];
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= H) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * stride - pad + kx;
                        if (ix < 0 || ix >= W) continue;
                        gxp[(i64)iy * W + ix] += g * wk[(i64)ky * kw + kx];
                    }
                }
            }
        }
    }
}

// Weight-gradient slice for one co: accumulates into gwc[Ci*kh*kw].
template <class T>
CNMM_NOINLINE void conv2d_bwd_w_plane(const T* gy, const T* x, T* gwc, int co, int N,
                                      int Ci, int H, int W, int kh, int kw, int stride,
                                      int pad, int Ho, int Wo, int Co) {
    if (kh == 1 && kw == 1 && stride == 1 && pad == 0) {
        const i64 plane = (i64)H * W;
        for (int ci = 0; ci < Ci; ++ci) {
            T acc = T(0);
            for (int n = 0; n < N; ++n) {
                const T* gyc = gy + ((i64)n * Co + co) * plane;
                const T* xc = x + ((i64)n * Ci + ci) * plane;
                for (i64 p = 0; p < plane; ++p) acc += gyc[p] * xc[p];
            }
            gwc[ci] += acc;
        }
        return;
    }
    for (int ci = 0; ci < Ci; ++ci) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                T acc = T(0);
                for (int n = 0; n < N; ++n) {
                    const T* gyc = gy + ((i64)n * Co + co) * Ho * Wo;
                    const T* xc = x + ((i64)n * Ci + ci) * H * W;
                    for (int oy = 0; oy < Ho; ++oy) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= H) continue;
                        for (int ox = 0; ox < Wo; ++ox) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= W) continue;
                            acc += gyc[(i64)oy * Wo + ox] * xc[(i64)iy * W + ix];
                        }
                    }
                }
                gwc[((i64)ci * kh + ky) * kw + kx] += acc;
            }
        }
    }
}

// Depthwise conv plane for one (n, c): w is [C,kh,kw].
template <class T>
CNMM_NOINLINE void dwconv_fwd_plane(const T* xp, const T* wc, T* yp, int H, int W, int kh,
                                    int kw, int stride, int pad, int Ho, int Wo) {
    for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
            T acc = T(0);
            for (int ky = 0; ky < kh; ++ky) {
                const int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= H) continue;
                for (int kx = 0; kx < kw; ++kx) {
                    const int ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= W) continue;
                    acc += xp[(i64)iy * W + ix] * wc[(i64)ky * kw + kx];
                }
            }
            yp[(i64)oy * Wo + ox] = acc;
        }
    }
}

template <class T>
CNMM_NOINLINE void dwconv_bwd_x_plane(const T* gyp, const T* wc, T* gxp, int H, int W,
                                      int kh, int kw, int stride, int pad, int Ho, int Wo) {
    for (int oy = 0; oy < Ho; ++oy) {
        for (int ox = 0; ox < Wo; ++ox) {
            const T g = gyp[(i64)oy * Wo + ox];
            for (int ky = 0; ky < kh; ++ky) {
                const int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= H) continue;
                for (int kx = 0; kx < kw; ++kx) {
                    const int ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= W) continue;
                    gxp[(i64)iy * W + ix] += g * wc[(i64)ky * kw + kx];
                }
            }
        }
    }
}

// Depthwise weight-gradient slice for one channel c.
template <class T>
CNMM_NOINLINE void dwconv_bwd_w_plane(const T* gy, const T* x, T* gwc, int c, int N, int C,
                                      int H, int W, int kh, int kw, int stride, int pad,
                                      int Ho, int Wo) {
    for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
            T acc = T(0);
            for (int n = 0; n < N; ++n) {
                const T* gyp = gy + ((i64)n * C + c) * Ho * Wo;
                const T* xp = x + ((i64)n * C + c) * H * W;
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= H) continue;
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix < 0 || ix >= W) continue;
                        acc += gyp[(i64)oy * Wo + ox] * xp[(i64)iy * W + ix];
                    }
                }
            }
            gwc[(i64)ky * kw + kx] += acc;
        }
    }
}

// Batch-norm, one channel. S = spatial size (H*W, or 1 for feature vectors).
// Training forward computes biased batch statistics, normalizes, and reports
// the batch mean/invstd for the backward pass.
template <class T>
CNMM_NOINLINE void bn_train_fwd_chan(const T* x, T* y, int c, int N, int C, i64 S, T gamma,
                                     T beta, double eps, T* mean_out, T* var_out) {
    T mean = T(0);
    for (int n = 0; n < N; ++n) {
        const T* xp = x + ((i64)n * C + c) * S;
        for (i64 s = 0; s < S; ++s) mean += xp[s];
    }
    mean /= T((i64)N * S);
    T var = T(0);
    for (int n = 0; n < N; ++n) {
        const T* xp = x + ((i64)n * C + c) * S;
        for (i64 s = 0; s < S; ++s) {
            const T d = xp[s] - mean;
            var += d * d;
        }
    }
    var /= T((i64)N * S);
    const double denom = static_cast<double>(var) + eps;
    if (denom <= 0.0)
        throw ValidationError("batch_norm: zero variance with eps=0");
    const T invstd = T(1.0 / std::sqrt(denom));
    for (int n = 0; n < N; ++n) {
        const T* xp = x + ((i64)n * C + c) * S;
        T* yp = y + ((i64)n * C + c) * S;
        for (i64 s = 0; s < S; ++s) yp[s] = gamma * (xp[s] - mean) * invstd + beta;
    }
    *mean_out = mean;
    *var_out = var;
}

template <class T>
CNMM_NOINLINE void bn_train_bwd_chan(const T* gy, const T* x, T* gx, T* ggamma, T* gbeta,
                                     int c, int N, int C, i64 S, T gamma, T mean, T invstd) {
    const T count = T((i64)N * S);
    T sum_gy = T(0), sum_gy_xhat = T(0);
    for (int n = 0; n < N; ++n) {
        const T* gp = gy + ((i64)n * C + c) * S;
        const T* xp = x + ((i64)n * C + c) * S;
        for (i64 s = 0; s < S; ++s) {
            const T xhat = (xp[s] - mean) * invstd;
            sum_gy += gp[s];
            sum_gy_xhat += gp[s] * xhat;
        }
    }
    *ggamma += sum_gy_xhat;
    *gbeta += sum_gy;
    const T mg = sum_gy / count;
    const T mgx = sum_gy_xhat / count;
    for (int n = 0; n < N; ++n) {
        const T* gp = gy + ((i64)n * C + c) * S;
        const T* xp = x + ((i64)n * C + c) * S;
        T* op = gx + ((i64)n * C + c) * S;
        for (i64 s = 0; s < S; ++s) {
            const T xhat = (xp[s] - mean) * invstd;
            op[s] += gamma * invstd * (gp[s] - mg - xhat * mgx);
        }
    }
}

template <class T>
CNMM_NOINLINE void bn_eval_fwd_chan(const T* x, T* y, int c, int N, int C, i64 S, T gamma,
                                    T beta, T rmean, T rvar, double eps) {
    const double denom = static_cast<double>(rvar) + eps;
    if (denom <= 0.0)
        throw ValidationError("batch_norm: non-positive running variance with eps=0");
    const T invstd = T(1.0 / std::sqrt(denom));
    for (int n = 0; n < N; ++n) {
        const T* xp = x + ((i64)n * C + c) * S;
        T* yp = y + ((i64)n * C + c) * S;
        for (i64 s = 0; s < S; ++s) yp[s] = gamma * (xp[s] - rmean) * invstd + beta;
    }
}

template <class T>
CNMM_NOINLINE void bn_eval_bwd_chan(const T* gy, const T* x, T* gx, T* ggamma, T* gbeta,
                                    int c, int N, int C, i64 S, T gamma, T rmean, T rvar,
                                    double eps) {
    const T invstd = T(1.0 / std::sqrt(static_cast<double>(rvar) + eps));
    T sum_gy = T(0), sum_gy_xhat = T(0);
    for (int n = 0; n < N; ++n) {
        const T* gp = gy + ((i64)n * C + c) * S;
        const T* xp = x + ((i64)n * C + c) * S;
        T* op = gx + ((i64)n * C + c) * S;
        for (i64 s = 0; s < S; ++s) {
            sum_gy += gp[s];
            sum_gy_xhat += gp[s] * (xp[s] - rmean) * invstd;
            op[s] += gp[s] * gamma * invstd;
        }
    }
    *ggamma += sum_gy_xhat;
    *gbeta += sum_gy;
}

// avg_pool2 plane for one (n, c). Odd extents replicate the last row/column.
template <class T>
CNMM_NOINLINE void pool2_fwd_plane(const T* xp, T* yp, int H, int W, int Ho, int Wo) {
    for (int oy = 0; oy < Ho; ++oy) {
        const int y0 = 2 * oy, y1 = std::min(2 * oy + 1, H - 1);
        for (int ox = 0; ox < Wo; ++ox) {
            const int x0 = 2 * ox, x1 = std::min(2 * ox + 1, W - 1);
            const T acc = xp[(i64)y0 * W + x0] + xp[(i64)y0 * W + x1] +
                          xp[(i64)y1 * W + x0] + xp[(i64)y1 * W + x1];
            yp[(i64)oy * Wo + ox] = acc / T(4);
        }
    }
}

template <class T>
CNMM_NOINLINE void pool2_bwd_plane(const T* gyp, T* gxp, int H, int W, int Ho, int Wo) {
    for (int oy = 0; oy < Ho; ++oy) {
        const int y0 = 2 * oy, y1 = std::min(2 * oy + 1, H - 1);
        for (int ox = 0; ox < Wo; ++ox) {
            const int x0 = 2 * ox, x1 = std::min(2 * ox + 1, W - 1);
            const T g = gyp[(i64)oy * Wo + ox] / T(4);
            gxp[(i64)y0 * W + x0] += g;
            gxp[(i64)y0 * W + x1] += g;
            gxp[(i64)y1 * W + x0] += g;
            gxp[(i64)y1 * W + x1] += g;
        }
    }
}

template <class T>
CNMM_NOINLINE void gap_fwd_plane(const T* xp, T* out, i64 S) {
    T acc = T(0);
    for (i64 s = 0; s < S; ++s) acc += xp[s];
    *out = acc / T(S);
}

template <class T>
CNMM_NOINLINE void gap_bwd_plane(T g, T* gxp, i64 S) {
    const T v = g / T(S);
    for (i64 s = 0; s < S; ++s) gxp[s] += v;
}

// linear: y[n,:] = b + x[n,:] W^t with W stored [O,F].
template <class T>
CNMM_NOINLINE void linear_fwd_row(const T* xn, const T* w, const T* b, T* yn, int F, int O) {
    for (int o = 0; o < O; ++o) {
        const T* wo = w + (i64)o * F;
        T acc = b ? b[o] : T(0);
        for (int f = 0; f < F; ++f) acc += xn[f] * wo[f];
        yn[o] = acc;
    }
}

template <class T>
CNMM_NOINLINE void linear_bwd_x_row(const T* gyn, const T* w, T* gxn, int F, int O) {
    for (int o = 0; o < O; ++o) {
        const T g = gyn[o];
        const T* wo = w + (i64)o * F;
        for (int f = 0; f < F; ++f) gxn[f] += g * wo[f];
    }
}

template <class T>
CNMM_NOINLINE void linear_bwd_w_row(const T* gy, const T* x, T* gwo, T* gbo, int o, int N,
                                    int F, int O) {
    T gb = T(0);
    for (int n = 0; n < N; ++n) {
        const T g = gy[(i64)n * O + o];
        gb += g;
        const T* xn = x + (i64)n * F;
        for (int f = 0; f < F; ++f) gwo[f] += g * xn[f];
    }
    if (gbo) *gbo += gb;
}

template <class T>
CNMM_NOINLINE void relu_fwd_chunk(const T* x, T* y, i64 b, i64 e) {
    for (i64 i = b; i < e; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
CNMM_NOINLINE void relu_bwd_chunk(const T* gy, const T* x, T* gx, i64 b, i64 e) {
    for (i64 i = b; i < e; ++i)
        if (x[i] > T(0)) gx[i] += gy[i];
}

template <class T>
CNMM_NOINLINE void add_fwd_chunk(const T* a, const T* b_, T* y, i64 b, i64 e) {
    for (i64 i = b; i < e; ++i) y[i] = a[i] + b_[i];
}

template <class T>
CNMM_NOINLINE void acc_scaled_chunk(const T* g, T s, T* out, i64 b, i64 e) {
    for (i64 i = b; i < e; ++i) out[i] += s * g[i];
}

template <class T>
CNMM_NOINLINE void mul_fwd_chunk(const T* a, const T* b_, T* y, i64 b, i64 e) {
    for (i64 i = b; i < e; ++i) y[i] = a[i] * b_[i];
}

template <class T>
CNMM_NOINLINE void acc_mul_chunk(const T* g, const T* o, T* out, i64 b, i64 e) {
    for (i64 i = b; i < e; ++i) out[i] += g[i] * o[i];
}

template <class T>
CNMM_NOINLINE void scale_fwd_chunk(const T* x, T s, T* y, i64 b, i64 e) {
    for (i64 i = b; i < e; ++i) y[i] = s * x[i];
}

// affine_combine for one sample: y = g*a + (1-g)*b over the sample's S values.
template <class T>
CNMM_NOINLINE void combine_fwd_sample(const T* a, const T* b, T* y, T g, i64 S) {
    const T h = T(1) - g;
    for (i64 s = 0; s < S; ++s) y[s] = g * a[s] + h * b[s];
}

template <class T>
CNMM_NOINLINE void combine_bwd_ab_sample(const T* gy, T* ga, T* gb, T g, i64 S) {
    const T h = T(1) - g;
    for (i64 s = 0; s < S; ++s) {
        ga[s] += g * gy[s];
        gb[s] += h * gy[s];
    }
}

template <class T>
CNMM_NOINLINE T combine_bwd_g_sample(const T* gy, const T* a, const T* b, i64 S) {
    T acc = T(0);
    for (i64 s = 0; s < S; ++s) acc += gy[s] * (a[s] - b[s]);
    return acc;
}

// Numerically stable per-sample cross-entropy from logits.
template <class T>
CNMM_NOINLINE void xent_fwd_row(const T* logit, int label, int K, T* loss) {
    T mx = logit[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, logit[k]);
    T se = T(0);
    for (int k = 0; k < K; ++k) se += std::exp(logit[k] - mx);
    *loss = std::log(se) - (logit[label] - mx);
}

template <class T>
CNMM_NOINLINE void xent_bwd_row(const T* logit, int label, int K, T gscale, T* glogit) {
    T mx = logit[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, logit[k]);
    T se = T(0);
    for (int k = 0; k < K; ++k) se += std::exp(logit[k] - mx);
    for (int k = 0; k < K; ++k) {
        const T p = std::exp(logit[k] - mx) / se;
        glogit[k] += gscale * (p - (k == label ? T(1) : T(0)));
    }
}

// ---------------------------------------------------------------------------
// Driver bodies, shared by the par/ref front ends through a Par flag.
// ---------------------------------------------------------------------------

// Relies on the template parameter `Par` being in scope at the use site; the
// if-clause turns the parallel region off for the serial reference driver.
#define CNMM_KERN_FOR(total) \
    _Pragma("omp parallel for schedule(static) if(Par)") for (i64 it = 0; it < (total); ++it)

template <class T, bool Par>
void conv2d_fwd_impl(const T* x, const T* w, T* y, int N, int Ci, int H, int W, int Co,
                     int kh, int kw, int stride, int pad) {
    const int Ho = conv_out_extent(H, kh, stride, pad);
    const int Wo = conv_out_extent(W, kw, stride, pad);
    const i64 total = (i64)N * Co;
    CNMM_KERN_FOR(total) {
        const int n = static_cast<int>(it / Co), co = static_cast<int>(it % Co);
        conv2d_fwd_plane(x + (i64)n * Ci * H * W, w + (i64)co * Ci * kh * kw,
                         y + ((i64)n * Co + co) * Ho * Wo, Ci, H, W, kh, kw, stride, pad,
                         Ho, Wo);
    }
}

template <class T, bool Par>
void conv2d_bwd_x_impl(const T* gy, const T* w, T* gx, int N, int Ci, int H, int W, int Co,
                       int kh, int kw, int stride, int pad) {
    const int Ho = conv_out_extent(H, kh, stride, pad);
    const int Wo = conv_out_extent(W, kw, stride, pad);
    const i64 total = (i64)N * Ci;
    CNMM_KERN_FOR(total) {
        const int n = static_cast<int>(it / Ci), ci = static_cast<int>(it % Ci);
        conv2d_bwd_x_plane(gy + (i64)n * Co * Ho * Wo, w, gx + ((i64)n * Ci + ci) * H * W,
                           ci, Co, Ci, H, W, kh, kw, stride, pad, Ho, Wo);
    }
}

template <class T, bool Par>
void conv2d_bwd_w_impl(const T* gy, const T* x, T* gw, int N, int Ci, int H, int W, int Co,
                       int kh, int kw, int stride, int pad) {
    const int Ho = conv_out_extent(H, kh, stride, pad);
    const int Wo = conv_out_extent(W, kw, stride, pad);
    CNMM_KERN_FOR((i64)Co) {
        const int co = static_cast<int>(it);
        conv2d_bwd_w_plane(gy, x, gw + (i64)co * Ci * kh * kw, co, N, Ci, H, W, kh, kw,
                           stride, pad, Ho, Wo, Co);
    }
}

template <class T, bool Par>
void dwconv_fwd_impl(const T* x, const T* w, T* y, int N, int C, int H, int W, int kh,
                     int kw, int stride, int pad) {
    const int Ho = conv_out_extent(H, kh, stride, pad);
    const int Wo = conv_out_extent(W, kw, stride, pad);
    const i64 total = (i64)N * C;
    CNMM_KERN_FOR(total) {
        const int c = static_cast<int>(it % C);
        dwconv_fwd_plane(x + it * H * W, w + (i64)c * kh * kw, y + it * Ho * Wo, H, W, kh,
                         kw, stride, pad, Ho, Wo);
    }
}

template <class T, bool Par>
void dwconv_bwd_x_impl(const T* gy, const T* w, T* gx, int N, int C, int H, int W, int kh,
                       int kw, int stride, int pad) {
    const int Ho = conv_out_extent(H, kh, stride, pad);
    const int Wo = conv_out_extent(W, kw, stride, pad);
    const i64 total = (i64)N * C;
    CNMM_KERN_FOR(total) {
        const int c = static_cast<int>(it % C);
        dwconv_bwd_x_plane(gy + it * Ho * Wo, w + (i64)c * kh * kw, gx + it * H * W, H, W,
                           kh, kw, stride, pad, Ho, Wo);
    }
}

template <class T, bool Par>
void dwconv_bwd_w_impl(const T* gy, const T* x, T* gw, int N, int C, int H, int W, int kh,
                       int kw, int stride, int pad) {
    const int Ho = conv_out_extent(H, kh, stride, pad);
    const int Wo = conv_out_extent(W, kw, stride, pad);
    CNMM_KERN_FOR((i64)C) {
        const int c = static_cast<int>(it);
        dwconv_bwd_w_plane(gy, x, gw + (i64)c * kh * kw, c, N, C, H, W, kh, kw, stride, pad,
                           Ho, Wo);
    }
}

template <class T, bool Par>
void bn_train_fwd_impl(const T* x, T* y, int N, int C, i64 S, const T* gamma, const T* beta,
                       double eps, T* save_mean, T* save_invstd) {
    CNMM_KERN_FOR((i64)C) {
        const int c = static_cast<int>(it);
        bn_train_fwd_chan(x, y, c, N, C, S, gamma[c], beta[c], eps, &save_mean[c],
                          &save_invstd[c]);
    }
}

template <class T, bool Par>
void bn_train_bwd_impl(const T* gy, const T* x, T* gx, T* ggamma, T* gbeta, int N, int C,
                       i64 S, const T* gamma, const T* save_mean, const T* save_invstd) {
    CNMM_KERN_FOR((i64)C) {
        const int c = static_cast<int>(it);
        bn_train_bwd_chan(gy, x, gx, &ggamma[c], &gbeta[c], c, N, C, S, gamma[c],
                          save_mean[c], save_invstd[c]);
    }
}

template <class T, bool Par>
void bn_eval_fwd_impl(const T* x, T* y, int N, int C, i64 S, const T* gamma, const T* beta,
                      const T* rmean, const T* rvar, double eps) {
    CNMM_KERN_FOR((i64)C) {
        const int c = static_cast<int>(it);
        bn_eval_fwd_chan(x, y, c, N, C, S, gamma[c], beta[c], rmean[c], rvar[c], eps);
    }
}

template <class T, bool Par>
void bn_eval_bwd_impl(const T* gy, const T* x, T* gx, T* ggamma, T* gbeta, int N, int C,
                      i64 S, const T* gamma, const T* rmean, const T* rvar, double eps) {
    CNMM_KERN_FOR((i64)C) {
        const int c = static_cast<int>(it);
        bn_eval_bwd_chan(gy, x, gx, &ggamma[c], &gbeta[c], c, N, C, S, gamma[c], rmean[c],
                         rvar[c], eps);
    }
}

template <class T, bool Par>
void pool2_fwd_impl(const T* x, T* y, int N, int C, int H, int W) {
    const int Ho = pool2_out_extent(H), Wo = pool2_out_extent(W);
    const i64 total = (i64)N * C;
    CNMM_KERN_FOR(total) {
        pool2_fwd_plane(x + it * H * W, y + it * Ho * Wo, H, W, Ho, Wo);
    }
}

template <class T, bool Par>
void pool2_bwd_impl(const T* gy, T* gx, int N, int C, int H, int W) {
    const int Ho = pool2_out_extent(H), Wo = pool2_out_extent(W);
    const i64 total = (i64)N * C;
    CNMM_KERN_FOR(total) {
        pool2_bwd_plane(gy + it * Ho * Wo, gx + it * H * W, H, W, Ho, Wo);
    }
}

template <class T, bool Par>
void gap_fwd_impl(const T* x, T* y, int N, int C, i64 S) {
    const i64 total = (i64)N * C;
    CNMM_KERN_FOR(total) { gap_fwd_plane(x + it * S, &y[it], S); }
}

template <class T, bool Par>
void gap_bwd_impl(const T* gy, T* gx, int N, int C, i64 S) {
    const i64 total = (i64)N * C;
    CNMM_KERN_FOR(total) { gap_bwd_plane(gy[it], gx + it * S, S); }
}

template <class T, bool Par>
void linear_fwd_impl(const T* x, const T* w, const T* b, T* y, int N, int F, int O) {
    CNMM_KERN_FOR((i64)N) {
        linear_fwd_row(x + it * F, w, b, y + it * O, F, O);
    }
}

template <class T, bool Par>
void linear_bwd_x_impl(const T* gy, const T* w, T* gx, int N, int F, int O) {
    CNMM_KERN_FOR((i64)N) {
        linear_bwd_x_row(gy + it * O, w, gx + it * F, F, O);
    }
}

template <class T, bool Par>
void linear_bwd_wb_impl(const T* gy, const T* x, T* gw, T* gb, int N, int F, int O) {
    CNMM_KERN_FOR((i64)O) {
        const int o = static_cast<int>(it);
        linear_bwd_w_row(gy, x, gw + (i64)o * F, gb ? &gb[o] : nullptr, o, N, F, O);
    }
}

template <class T, bool Par>
void relu_fwd_impl(const T* x, T* y, i64 numel) {
    const i64 total = num_chunks(numel);
    CNMM_KERN_FOR(total) {
        relu_fwd_chunk(x, y, it * kChunk, std::min(numel, (it + 1) * kChunk));
    }
}

template <class T, bool Par>
void relu_bwd_impl(const T* gy, const T* x, T* gx, i64 numel) {
    const i64 total = num_chunks(numel);
    CNMM_KERN_FOR(total) {
        relu_bwd_chunk(gy, x, gx, it * kChunk, std::min(numel, (it + 1) * kChunk));
    }
}

template <class T, bool Par>
void add_fwd_impl(const T* a, const T* b, T* y, i64 numel) {
    const i64 total = num_chunks(numel);
    CNMM_KERN_FOR(total) {
        add_fwd_chunk(a, b, y, it * kChunk, std::min(numel, (it + 1) * kChunk));
    }
}

template <class T, bool Par>
void acc_scaled_impl(const T* g, T s, T* out, i64 numel) {
    const i64 total = num_chunks(numel);
    CNMM_KERN_FOR(total) {
        acc_scaled_chunk(g, s, out, it * kChunk, std::min(numel, (it + 1) * kChunk));
    }
}

template <class T, bool Par>
void mul_fwd_impl(const T* a, const T* b, T* y, i64 numel) {
    const i64 total = num_chunks(numel);
    CNMM_KERN_FOR(total) {
        mul_fwd_chunk(a, b, y, it * kChunk, std::min(numel, (it + 1) * kChunk));
    }
}

template <class T, bool Par>
void acc_mul_impl(const T* g, const T* o, T* out, i64 numel) {
    const i64 total = num_chunks(numel);
    CNMM_KERN_FOR(total) {
        acc_mul_chunk(g, o, out, it * kChunk, std::min(numel, (it + 1) * kChunk));
    }
}

template <class T, bool Par>
void scale_fwd_impl(const T* x, T s, T* y, i64 numel) {
    const i64 total = num_chunks(numel);
    CNMM_KERN_FOR(total) {
        scale_fwd_chunk(x, s, y, it * kChunk, std::min(numel, (it + 1) * kChunk));
    }
}

// g has either one value per sample (m == N) or a single broadcast value
// (m == 1). S is the per-sample element count.
template <class T, bool Par>
void combine_fwd_impl(const T* a, const T* b, const T* g, int m, T* y, int N, i64 S) {
    CNMM_KERN_FOR((i64)N) {
        combine_fwd_sample(a + it * S, b + it * S, y + it * S, g[m == 1 ? 0 : it], S);
    }
}

template <class T, bool Par>
void combine_bwd_ab_impl(const T* gy, const T* g, int m, T* ga, T* gb, int N, i64 S) {
    CNMM_KERN_FOR((i64)N) {
        combine_bwd_ab_sample(gy + it * S, ga + it * S, gb + it * S, g[m == 1 ? 0 : it], S);
    }
}

// Gate gradient is a per-sample reduction; kept serial so the broadcast case
// accumulates in a fixed order.
template <class T>
void combine_bwd_g_impl(const T* gy, const T* a, const T* b, int m, T* gg, int N, i64 S) {
    for (int n = 0; n < N; ++n) {
        const T v = combine_bwd_g_sample(gy + (i64)n * S, a + (i64)n * S, b + (i64)n * S, S);
        gg[m == 1 ? 0 : n] += v;
    }
}

template <class T, bool Par>
void xent_fwd_impl(const T* logits, const int* labels, T* per_sample, int N, int K) {
    CNMM_KERN_FOR((i64)N) {
        xent_fwd_row(logits + it * K, labels[it], K, &per_sample[it]);
    }
}

template <class T, bool Par>
void xent_bwd_impl(const T* logits, const int* labels, T gscale, T* glogits, int N, int K) {
    CNMM_KERN_FOR((i64)N) {
        xent_bwd_row(logits + it * K, labels[it], K, gscale, glogits + it * K);
    }
}

#undef CNMM_KERN_FOR

}  // namespace detail

// ---------------------------------------------------------------------------
// Public front ends.
// ---------------------------------------------------------------------------

#define CNMM_KERN_FRONT(ns, PAR)                                                             \
    namespace ns {                                                                           \
    template <class T>                                                                       \
    void conv2d_fwd(const T* x, const T* w, T* y, int N, int Ci, int H, int W, int Co,       \
                    int kh, int kw, int stride, int pad) {                                   \
        detail::conv2d_fwd_impl<T, PAR>(x, w, y, N, Ci, H, W, Co, kh, kw, stride, pad);      \
    }                                                                                        \
    template <class T>                                                                       \
    void conv2d_bwd_x(const T* gy, const T* w, T* gx, int N, int Ci, int H, int W, int Co,   \
                      int kh, int kw, int stride, int pad) {                                 \
        detail::conv2d_bwd_x_impl<T, PAR>(gy, w, gx, N, Ci, H, W, Co, kh, kw, stride, pad);  \
    }                                                                                        \
    template <class T>                                                                       \
    void conv2d_bwd_w(const T* gy, const T* x, T* gw, int N, int Ci, int H, int W, int Co,   \
                      int kh, int kw, int stride, int pad) {                                 \
        detail::conv2d_bwd_w_impl<T, PAR>(gy, x, gw, N, Ci, H, W, Co, kh, kw, stride, pad);  \
    }                                                                                        \
    template <class T>                                                                       \
    void dwconv_fwd(const T* x, const T* w, T* y, int N, int C, int H, int W, int kh,        \
                    int kw, int stride, int pad) {                                           \
        detail::dwconv_fwd_impl<T, PAR>(x, w, y, N, C, H, W, kh, kw, stride, pad);           \
    }                                                                                        \
    template <class T>                                                                       \
    void dwconv_bwd_x(const T* gy, const T* w, T* gx, int N, int C, int H, int W, int kh,    \
                      int kw, int stride, int pad) {                                         \
        detail::dwconv_bwd_x_impl<T, PAR>(gy, w, gx, N, C, H, W, kh, kw, stride, pad);       \
    }                                                                                        \
    template <class T>                                                                       \
    void dwconv_bwd_w(const T* gy, const T* x, T* gw, int N, int C, int H, int W, int kh,    \
                      int kw, int stride, int pad) {                                         \
        detail::dwconv_bwd_w_impl<T, PAR>(gy, x, gw, N, C, H, W, kh, kw, stride, pad);       \
    }                                                                                        \
    template <class T>                                                                       \
    void bn_train_fwd(const T* x, T* y, int N, int C, i64 S, const T* gamma, const T* beta, \
                      double eps, T* save_mean, T* save_invstd) {                            \
        detail::bn_train_fwd_impl<T, PAR>(x, y, N, C, S, gamma, beta, eps, save_mean,        \
                                          save_invstd);                                      \
    }                                                                                        \
    template <class T>                                                                       \
    void bn_train_bwd(const T* gy, const T* x, T* gx, T* ggamma, T* gbeta, int N, int C,     \
                      i64 S, const T* gamma, const T* save_mean, const T* save_invstd) {     \
        detail::bn_train_bwd_impl<T, PAR>(gy, x, gx, ggamma, gbeta, N, C, S, gamma,          \
                                          save_mean, save_invstd);                           \
    }                                                                                        \
    template <class T>                                                                       \
    void bn_eval_fwd(const T* x, T* y, int N, int C, i64 S, const T* gamma, const T* beta,   \
                     const T* rmean, const T* rvar, double eps) {                            \
        detail::bn_eval_fwd_impl<T, PAR>(x, y, N, C, S, gamma, beta, rmean, rvar, eps);      \
    }                                                                                        \
    template <class T>                                                                       \
    void bn_eval_bwd(const T* gy, const T* x, T* gx, T* ggamma, T* gbeta, int N, int C,      \
                     i64 S, const T* gamma, const T* rmean, const T* rvar, double eps) {     \
        detail::bn_eval_bwd_impl<T, PAR>(gy, x, gx, ggamma, gbeta, N, C, S, gamma, rmean,    \
                                         rvar, eps);                                         \
    }                                                                                        \
    template <class T>                                                                       \
    void pool2_fwd(const T* x, T* y, int N, int C, int H, int W) {                           \
        detail::pool2_fwd_impl<T, PAR>(x, y, N, C, H, W);                                    \
    }                                                                                        \
    template <class T>                                                                       \
    void pool2_bwd(const T* gy, T* gx, int N, int C, int H, int W) {                         \
        detail::pool2_bwd_impl<T, PAR>(gy, gx, N, C, H, W);                                  \
    }                                                                                        \
    template <class T>                                                                       \
    void gap_fwd(const T* x, T* y, int N, int C, i64 S) {                                    \
        detail::gap_fwd_impl<T, PAR>(x, y, N, C, S);                                         \
    }                                                                                        \
    template <class T>                                                                       \
    void gap_bwd(const T* gy, T* gx, int N, int C, i64 S) {                                  \
        detail::gap_bwd_impl<T, PAR>(gy, gx, N, C, S);                                       \
    }                                                                                        \
    template <class T>                                                                       \
    void linear_fwd(const T* x, const T* w, const T* b, T* y, int N, int F, int O) {         \
        detail::linear_fwd_impl<T, PAR>(x, w, b, y, N, F, O);                                \
    }                                                                                        \
    template <class T>                                                                       \
    void linear_bwd_x(const T* gy, const T* w, T* gx, int N, int F, int O) {                 \
        detail::linear_bwd_x_impl<T, PAR>(gy, w, gx, N, F, O);                               \
    }                                                                                        \
    template <class T>                                                                       \
    void linear_bwd_wb(const T* gy, const T* x, T* gw, T* gb, int N, int F, int O) {         \
        detail::linear_bwd_wb_impl<T, PAR>(gy, x, gw, gb, N, F, O);                          \
    }                                                                                        \
    template <class T>                                                                       \
    void relu_fwd(const T* x, T* y, i64 numel) {                                             \
        detail::relu_fwd_impl<T, PAR>(x, y, numel);                                          \
    }                                                                                        \
    template <class T>                                                                       \
    void relu_bwd(const T* gy, const T* x, T* gx, i64 numel) {                               \
        detail::relu_bwd_impl<T, PAR>(gy, x, gx, numel);                                     \
    }                                                                                        \
    template <class T>                                                                       \
    void add_fwd(const T* a, const T* b, T* y, i64 numel) {                                  \
        detail::add_fwd_impl<T, PAR>(a, b, y, numel);                                        \
    }                                                                                        \
    template <class T>                                                                       \
    void acc_scaled(const T* g, T s, T* out, i64 numel) {                                    \
        detail::acc_scaled_impl<T, PAR>(g, s, out, numel);                                   \
    }                                                                                        \
    template <class T>                                                                       \
    void mul_fwd(const T* a, const T* b, T* y, i64 numel) {                                  \
        detail::mul_fwd_impl<T, PAR>(a, b, y, numel);                                        \
    }                                                                                        \
    template <class T>                                                                       \
    void acc_mul(const T* g, const T* o, T* out, i64 numel) {                                \
        detail::acc_mul_impl<T, PAR>(g, o, out, numel);                                      \
    }                                                                                        \
    template <class T>                                                                       \
    void scale_fwd(const T* x, T s, T* y, i64 numel) {                                       \
        detail::scale_fwd_impl<T, PAR>(x, s, y, numel);                                      \
    }                                                                                        \
    template <class T>                                                                       \
    void combine_fwd(const T* a, const T* b, const T* g, int m, T* y, int N, i64 S) {        \
        detail::combine_fwd_impl<T, PAR>(a, b, g, m, y, N, S);                               \
    }                                                                                        \
    template <class T>                                                                       \
    void combine_bwd_ab(const T* gy, const T* g, int m, T* ga, T* gb, int N, i64 S) {        \
        detail::combine_bwd_ab_impl<T, PAR>(gy, g, m, ga, gb, N, S);                         \
    }                                                                                        \
    template <class T>                                                                       \
    void combine_bwd_g(const T* gy, const T* a, const T* b, int m, T* gg, int N, i64 S) {    \
        detail::combine_bwd_g_impl<T>(gy, a, b, m, gg, N, S);                                \
    }                                                                                        \
    template <class T>                                                                       \
    void xent_fwd(const T* logits, const int* labels, T* per_sample, int N, int K) {         \
        detail::xent_fwd_impl<T, PAR>(logits, labels, per_sample, N, K);                     \
    }                                                                                        \
    template <class T>                                                                       \
    void xent_bwd(const T* logits, const int* labels, T gscale, T* glogits, int N, int K) {  \
        detail::xent_bwd_impl<T, PAR>(logits, labels, gscale, glogits, N, K);                \
    }                                                                                        \
    }

CNMM_KERN_FRONT(par, true)
CNMM_KERN_FRONT(ref, false)

#undef CNMM_KERN_FRONT

}  // namespace cnmm::kern
