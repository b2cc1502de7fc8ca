#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "quanta/parallel.hpp"
#include "quanta/tensor.hpp"

// Forward/backward primitives for the hybrid 3D/2D residual U-Net. All ops
// use stride 1 and zero "same" padding; kernels are (1|3)x3x3 or 1x1x1.
// Parallel loops partition output elements; every element is reduced in a
// fixed order, so results do not depend on the worker count.

namespace quanta {

// per-(n, group) normalization statistics kept for the backward pass
struct NormCache {
    std::vector<double> mean;
    std::vector<double> istd;
};

namespace ops {

template <class T>
void conv3d_forward(const Tensor5T<T>& x, const Tensor5T<T>& w, const std::vector<T>& b,
                    Tensor5T<T>& y) {
    const std::int64_t N = x.n(), IC = x.c(), TT = x.t(), H = x.h(), W = x.w();
    const std::int64_t OC = w.dims[0], KT = w.dims[2], KH = w.dims[3], KW = w.dims[4];
    if (w.dims[1] != IC) throw std::invalid_argument("conv3d: channel mismatch");
    if (y.n() != N || y.c() != OC || y.t() != TT || y.h() != H || y.w() != W)
        throw std::invalid_argument("conv3d: bad output dims");
    const std::int64_t pt = KT / 2, ph = KH / 2, pw = KW / 2;
    const std::int64_t plane = x.plane();

    parallel_for(0, N * OC, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            const std::int64_t n = idx / OC, oc = idx % OC;
            T* ys = y.slab(n, oc);
            for (std::int64_t i = 0; i < plane; ++i) ys[i] = b[static_cast<std::size_t>(oc)];
            for (std::int64_t ic = 0; ic < IC; ++ic) {
                const T* xs = x.slab(n, ic);
                const T* wk = w.data.data() + ((oc * IC + ic) * KT) * KH * KW;
                for (std::int64_t kt = 0; kt < KT; ++kt) {
                    const std::int64_t dt = kt - pt;
                    for (std::int64_t kh = 0; kh < KH; ++kh) {
                        const std::int64_t dy = kh - ph;
                        for (std::int64_t kw = 0; kw < KW; ++kw) {
                            const std::int64_t dx = kw - pw;
                            const T wv = wk[(kt * KH + kh) * KW + kw];
                            const std::int64_t x_lo = dx > 0 ? 0 : -dx;
                            const std::int64_t x_hi = dx > 0 ? W - dx : W;
                            for (std::int64_t t = (dt > 0 ? 0 : -dt);
                                 t < (dt > 0 ? TT - dt : TT); ++t)
                                for (std::int64_t yy = (dy > 0 ? 0 : -dy);
                                     yy < (dy > 0 ? H - dy : H); ++yy) {
                                    const T* xrow = xs + ((t + dt) * H + yy + dy) * W + dx;
                                    T* yrow = ys + (t * H + yy) * W;
                                    for (std::int64_t xx = x_lo; xx < x_hi; ++xx)
                                        yrow[xx] += wv * xrow[xx];
                                }
                        }
                    }
                }
            }
        }
    });
}

template <class T>
void conv3d_backward(const Tensor5T<T>& x, const Tensor5T<T>& w, const Tensor5T<T>& gy,
                     Tensor5T<T>* gx, Tensor5T<T>* gw, std::vector<T>* gb) {
    const std::int64_t N = x.n(), IC = x.c(), TT = x.t(), H = x.h(), W = x.w();
    const std::int64_t OC = w.dims[0], KT = w.dims[2], KH = w.dims[3], KW = w.dims[4];
    const std::int64_t pt = KT / 2, ph = KH / 2, pw = KW / 2;
    const std::int64_t plane = x.plane();

    if (gx) {
        parallel_for(0, N * IC, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t idx = lo; idx < hi; ++idx) {
                const std::int64_t n = idx / IC, ic = idx % IC;
                T* gxs = gx->slab(n, ic);
                for (std::int64_t i = 0; i < plane; ++i) gxs[i] = T(0);
                for (std::int64_t oc = 0; oc < OC; ++oc) {
                    const T* gys = gy.slab(n, oc);
                    const T* wk = w.data.data() + ((oc * IC + ic) * KT) * KH * KW;
                    for (std::int64_t kt = 0; kt < KT; ++kt) {
                        const std::int64_t dt = kt - pt;
                        for (std::int64_t kh = 0; kh < KH; ++kh) {
                            const std::int64_t dy = kh - ph;
                            for (std::int64_t kw = 0; kw < KW; ++kw) {
                                const std::int64_t dx = kw - pw;
                                const T wv = wk[(kt * KH + kh) * KW + kw];
                                const std::int64_t x_lo = dx > 0 ? dx : 0;
                                const std::int64_t x_hi = dx > 0 ? W : W + dx;
                                for (std::int64_t a = (dt > 0 ? dt : 0);
                                     a < (dt > 0 ? TT : TT + dt); ++a)
                                    for (std::int64_t bb = (dy > 0 ? dy : 0);
                                         bb < (dy > 0 ? H : H + dy); ++bb) {
                                        T* gxrow = gxs + (a * H + bb) * W;
                                        const T* gyrow =
                                            gys + ((a - dt) * H + (bb - dy)) * W - dx;
                                        for (std::int64_t c = x_lo; c < x_hi; ++c)
                                            gxrow[c] += wv * gyrow[c];
                                    }
                            }
                        }
                    }
                }
            }
        });
    }

    if (gw) {
        parallel_for(0, OC, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t oc = lo; oc < hi; ++oc) {
                for (std::int64_t ic = 0; ic < IC; ++ic)
                    for (std::int64_t kt = 0; kt < KT; ++kt) {
                        const std::int64_t dt = kt - pt;
                        for (std::int64_t kh = 0; kh < KH; ++kh) {
                            const std::int64_t dy = kh - ph;
                            for (std::int64_t kw = 0; kw < KW; ++kw) {
                                const std::int64_t dx = kw - pw;
                                double acc = 0.0;
                                const std::int64_t x_lo = dx > 0 ? 0 : -dx;
                                const std::int64_t x_hi = dx > 0 ? W - dx : W;
                                for (std::int64_t n = 0; n < N; ++n) {
                                    const T* gys = gy.slab(n, oc);
                                    const T* xs = x.slab(n, ic);
                                    for (std::int64_t t = (dt > 0 ? 0 : -dt);
                                         t < (dt > 0 ? TT - dt : TT); ++t)
                                        for (std::int64_t yy = (dy > 0 ? 0 : -dy);
                                             yy < (dy > 0 ? H - dy : H); ++yy) {
                                            const T* xrow =
                                                xs + ((t + dt) * H + yy + dy) * W + dx;
                                            const T* gyrow = gys + (t * H + yy) * W;
                                            for (std::int64_t xx = x_lo; xx < x_hi; ++xx)
                                                acc += static_cast<double>(gyrow[xx]) *
                                                       static_cast<double>(xrow[xx]);
                                        }
                                }
                                gw->data[static_cast<std::size_t>(
                                    (((oc * IC + ic) * KT + kt) * KH + kh) * KW + kw)] =
                                    static_cast<T>(acc);
                            }
                        }
                    }
                if (gb) {
                    double acc = 0.0;
                    for (std::int64_t n = 0; n < N; ++n) {
                        const T* gys = gy.slab(n, oc);
                        for (std::int64_t i = 0; i < plane; ++i)
                            acc += static_cast<double>(gys[i]);
                    }
                    (*gb)[static_cast<std::size_t>(oc)] = static_cast<T>(acc);
                }
            }
        });
    }
}

// ---------------------------------------------------------------------------

constexpr double kNormEps = 1e-5;

template <class T>
void group_norm_forward(const Tensor5T<T>& x, int groups, const std::vector<T>& gamma,
                        const std::vector<T>& beta, Tensor5T<T>& y, NormCache* cache) {
    const std::int64_t N = x.n(), C = x.c();
    if (groups < 1 || C % groups != 0)
        throw std::invalid_argument("group_norm: channels not divisible by groups");
    const std::int64_t cg = C / groups;
    const std::int64_t plane = x.plane();
    const std::int64_t group_elems = cg * plane;
    if (cache) {
        cache->mean.assign(static_cast<std::size_t>(N * groups), 0.0);
        cache->istd.assign(static_cast<std::size_t>(N * groups), 0.0);
    }
    parallel_for(0, N * groups, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            const std::int64_t n = idx / groups, g = idx % groups;
            const T* base = x.slab(n, g * cg);
            double sum = 0.0, sq = 0.0;
            for (std::int64_t i = 0; i < group_elems; ++i) {
                const double v = static_cast<double>(base[i]);
                sum += v;
                sq += v * v;
            }
            const double mean = sum / static_cast<double>(group_elems);
            double var = sq / static_cast<double>(group_elems) - mean * mean;
            if (var < 0.0) var = 0.0;
            const double istd = 1.0 / std::sqrt(var + kNormEps);
            if (cache) {
                cache->mean[static_cast<std::size_t>(idx)] = mean;
                cache->istd[static_cast<std::size_t>(idx)] = istd;
            }
            T* out = y.slab(n, g * cg);
            for (std::int64_t c = 0; c < cg; ++c) {
                const double ga = static_cast<double>(gamma[static_cast<std::size_t>(g * cg + c)]);
                const double be = static_cast<double>(beta[static_cast<std::size_t>(g * cg + c)]);
                const T* xi = base + c * plane;
                T* yo = out + c * plane;
                for (std::int64_t i = 0; i < plane; ++i)
                    yo[i] = static_cast<T>((static_cast<double>(xi[i]) - mean) * istd * ga + be);
            }
        }
    });
}

template <class T>
void group_norm_backward(const Tensor5T<T>& x, int groups, const std::vector<T>& gamma,
                         const NormCache& cache, const Tensor5T<T>& gy, Tensor5T<T>& gx,
                         std::vector<T>* ggamma, std::vector<T>* gbeta) {
    const std::int64_t N = x.n(), C = x.c();
    const std::int64_t cg = C / groups;
    const std::int64_t plane = x.plane();
    const std::int64_t group_elems = cg * plane;

    parallel_for(0, N * groups, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            const std::int64_t n = idx / groups, g = idx % groups;
            const double mean = cache.mean[static_cast<std::size_t>(idx)];
            const double istd = cache.istd[static_cast<std::size_t>(idx)];
            const T* xs = x.slab(n, g * cg);
            const T* gys = gy.slab(n, g * cg);
            double sum_d = 0.0, sum_dx = 0.0;
            for (std::int64_t c = 0; c < cg; ++c) {
                const double ga = static_cast<double>(gamma[static_cast<std::size_t>(g * cg + c)]);
                const T* xi = xs + c * plane;
                const T* gi = gys + c * plane;
                for (std::int64_t i = 0; i < plane; ++i) {
                    const double dxhat = static_cast<double>(gi[i]) * ga;
                    const double xhat = (static_cast<double>(xi[i]) - mean) * istd;
                    sum_d += dxhat;
                    sum_dx += dxhat * xhat;
                }
            }
            const double inv_m = 1.0 / static_cast<double>(group_elems);
            T* gxs = gx.slab(n, g * cg);
            for (std::int64_t c = 0; c < cg; ++c) {
                const double ga = static_cast<double>(gamma[static_cast<std::size_t>(g * cg + c)]);
                const T* xi = xs + c * plane;
                const T* gi = gys + c * plane;
                T* go = gxs + c * plane;
                for (std::int64_t i = 0; i < plane; ++i) {
                    const double dxhat = static_cast<double>(gi[i]) * ga;
                    const double xhat = (static_cast<double>(xi[i]) - mean) * istd;
                    go[i] = static_cast<T>(istd * (dxhat - inv_m * sum_d - xhat * inv_m * sum_dx));
                }
            }
        }
    });

    if (ggamma && gbeta) {
        parallel_for(0, C, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t c = lo; c < hi; ++c) {
                const std::int64_t g = c / cg;
                double dg = 0.0, db = 0.0;
                for (std::int64_t n = 0; n < N; ++n) {
                    const double mean = cache.mean[static_cast<std::size_t>(n * groups + g)];
                    const double istd = cache.istd[static_cast<std::size_t>(n * groups + g)];
                    const T* xi = x.slab(n, c);
                    const T* gi = gy.slab(n, c);
                    for (std::int64_t i = 0; i < plane; ++i) {
                        const double xhat = (static_cast<double>(xi[i]) - mean) * istd;
                        dg += static_cast<double>(gi[i]) * xhat;
                        db += static_cast<double>(gi[i]);
                    }
                }
                (*ggamma)[static_cast<std::size_t>(c)] = static_cast<T>(dg);
                (*gbeta)[static_cast<std::size_t>(c)] = static_cast<T>(db);
            }
        });
    }
}

// ---------------------------------------------------------------------------

template <class T>
inline T gelu_value(T x) {
    const double xd = static_cast<double>(x);
    return static_cast<T>(0.5 * xd * (1.0 + std::erf(xd * 0.70710678118654752440)));
}

template <class T>
inline T gelu_derivative(T x) {
    const double xd = static_cast<double>(x);
    const double cdf = 0.5 * (1.0 + std::erf(xd * 0.70710678118654752440));
    const double pdf = std::exp(-0.5 * xd * xd) * 0.39894228040143267794;
    return static_cast<T>(cdf + xd * pdf);
}

template <class T>
void gelu_forward(const Tensor5T<T>& x, Tensor5T<T>& y) {
    parallel_for(0, x.numel(), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i)
            y.data[static_cast<std::size_t>(i)] = gelu_value(x.data[static_cast<std::size_t>(i)]);
    });
}

template <class T>
void gelu_backward(const Tensor5T<T>& x, const Tensor5T<T>& gy, Tensor5T<T>& gx) {
    parallel_for(0, x.numel(), [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i)
            gx.data[static_cast<std::size_t>(i)] =
                gy.data[static_cast<std::size_t>(i)] *
                gelu_derivative(x.data[static_cast<std::size_t>(i)]);
    });
}

// ---------------------------------------------------------------------------
// max pooling, kernel == stride == (pt, ph, pw)

template <class T>
void maxpool_forward(const Tensor5T<T>& x, int pt, int ph, int pw, Tensor5T<T>& y,
                     std::vector<std::int64_t>& argmax) {
    const std::int64_t N = x.n(), C = x.c();
    const std::int64_t TT = x.t() / pt, H = x.h() / ph, W = x.w() / pw;
    if (y.t() != TT || y.h() != H || y.w() != W)
        throw std::invalid_argument("maxpool: bad output dims");
    argmax.assign(static_cast<std::size_t>(y.numel()), 0);
    const std::int64_t xh = x.h(), xw = x.w();
    parallel_for(0, N * C, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            const std::int64_t n = idx / C, c = idx % C;
            const T* xs = x.slab(n, c);
            T* ys = y.slab(n, c);
            std::int64_t* am = argmax.data() + idx * y.plane();
            std::int64_t o = 0;
            for (std::int64_t t = 0; t < TT; ++t)
                for (std::int64_t yy = 0; yy < H; ++yy)
                    for (std::int64_t xx = 0; xx < W; ++xx, ++o) {
                        T best = xs[((t * pt) * xh + yy * ph) * xw + xx * pw];
                        std::int64_t best_i = ((t * pt) * xh + yy * ph) * xw + xx * pw;
                        for (int a = 0; a < pt; ++a)
                            for (int b = 0; b < ph; ++b)
                                for (int d = 0; d < pw; ++d) {
                                    const std::int64_t i =
                                        ((t * pt + a) * xh + yy * ph + b) * xw + xx * pw + d;
                                    if (xs[i] > best) {
                                        best = xs[i];
                                        best_i = i;
                                    }
                                }
                        ys[o] = best;
                        am[o] = best_i;
                    }
        }
    });
}

template <class T>
void maxpool_backward(const std::vector<std::int64_t>& argmax, const Tensor5T<T>& gy,
                      Tensor5T<T>& gx) {
    const std::int64_t N = gy.n(), C = gy.c();
    gx.zero();
    parallel_for(0, N * C, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            const std::int64_t n = idx / C, c = idx % C;
            const T* gys = gy.slab(n, c);
            T* gxs = gx.slab(n, c);
            const std::int64_t* am = argmax.data() + idx * gy.plane();
            for (std::int64_t o = 0; o < gy.plane(); ++o) gxs[am[o]] += gys[o];
        }
    });
}

// ---------------------------------------------------------------------------
// pixel shuffle: (n, c*rt*rh*rw, t, h, w) -> (n, c, t*rt, h*rh, w*rw), with
// the sub-pixel offsets packed channel-major: source channel
// c*(rt*rh*rw) + (dt*rh + dy)*rw + dx feeds output voxel offset (dt, dy, dx)

template <class T>
void pixel_shuffle_forward(const Tensor5T<T>& x, int rt, int rh, int rw, Tensor5T<T>& y) {
    const std::int64_t r = static_cast<std::int64_t>(rt) * rh * rw;
    const std::int64_t N = x.n(), C = x.c() / r;
    if (x.c() % r != 0) throw std::invalid_argument("pixel_shuffle: channels not divisible");
    if (y.c() != C || y.t() != x.t() * rt || y.h() != x.h() * rh || y.w() != x.w() * rw)
        throw std::invalid_argument("pixel_shuffle: bad output dims");
    const std::int64_t IT = x.t(), IH = x.h(), IW = x.w();
    parallel_for(0, N * C, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            const std::int64_t n = idx / C, c = idx % C;
            T* ys = y.slab(n, c);
            for (int dt = 0; dt < rt; ++dt)
                for (int dy = 0; dy < rh; ++dy)
                    for (int dx = 0; dx < rw; ++dx) {
                        const T* xs = x.slab(n, c * r + (dt * rh + dy) * rw + dx);
                        for (std::int64_t t = 0; t < IT; ++t)
                            for (std::int64_t yy = 0; yy < IH; ++yy) {
                                const T* xrow = xs + (t * IH + yy) * IW;
                                T* yrow = ys + ((t * rt + dt) * y.h() + yy * rh + dy) * y.w() + dx;
                                for (std::int64_t xx = 0; xx < IW; ++xx)
                                    yrow[xx * rw] = xrow[xx];
                            }
                    }
        }
    });
}

template <class T>
void pixel_shuffle_backward(const Tensor5T<T>& gy, int rt, int rh, int rw, Tensor5T<T>& gx) {
    const std::int64_t r = static_cast<std::int64_t>(rt) * rh * rw;
    const std::int64_t N = gx.n(), C = gx.c() / r;
    const std::int64_t IT = gx.t(), IH = gx.h(), IW = gx.w();
    parallel_for(0, N * C, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            const std::int64_t n = idx / C, c = idx % C;
            const T* gys = gy.slab(n, c);
            for (int dt = 0; dt < rt; ++dt)
                for (int dy = 0; dy < rh; ++dy)
                    for (int dx = 0; dx < rw; ++dx) {
                        T* gxs = gx.slab(n, c * r + (dt * rh + dy) * rw + dx);
                        for (std::int64_t t = 0; t < IT; ++t)
                            for (std::int64_t yy = 0; yy < IH; ++yy) {
                                T* gxrow = gxs + (t * IH + yy) * IW;
                                const T* gyrow =
                                    gys + ((t * rt + dt) * gy.h() + yy * rh + dy) * gy.w() + dx;
                                for (std::int64_t xx = 0; xx < IW; ++xx)
                                    gxrow[xx] = gyrow[xx * rw];
                            }
                    }
        }
    });
}

// ---------------------------------------------------------------------------

template <class T>
void concat_channels(const Tensor5T<T>& a, const Tensor5T<T>& b, Tensor5T<T>& y) {
    if (a.n() != b.n() || a.plane() != b.plane() || y.c() != a.c() + b.c())
        throw std::invalid_argument("concat: dim mismatch");
    const std::int64_t plane = a.plane();
    for (std::int64_t n = 0; n < a.n(); ++n) {
        for (std::int64_t c = 0; c < a.c(); ++c)
            std::copy(a.slab(n, c), a.slab(n, c) + plane, y.slab(n, c));
        for (std::int64_t c = 0; c < b.c(); ++c)
            std::copy(b.slab(n, c), b.slab(n, c) + plane, y.slab(n, a.c() + c));
    }
}

template <class T>
void split_channels(const Tensor5T<T>& gy, Tensor5T<T>& ga, Tensor5T<T>& gb) {
    const std::int64_t plane = ga.plane();
    for (std::int64_t n = 0; n < ga.n(); ++n) {
        for (std::int64_t c = 0; c < ga.c(); ++c)
            std::copy(gy.slab(n, c), gy.slab(n, c) + plane, ga.slab(n, c));
        for (std::int64_t c = 0; c < gb.c(); ++c)
            std::copy(gy.slab(n, ga.c() + c), gy.slab(n, ga.c() + c) + plane, gb.slab(n, c));
    }
}

template <class T>
void add_inplace(Tensor5T<T>& y, const Tensor5T<T>& x) {
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += x.data[i];
}

}  // namespace ops
}  // namespace quanta
