#include "painpair/nn.hpp"

#include <cmath>

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Dense>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace painpair::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::MatrixXd;

/// Gather one sample's patches: column j = output pixel, rows = (ci, ky, kx).
void im2col(const Conv& conv, const double* x, long h, long w, ColMat& m) {
    const long ckk = conv.cin * conv.k * conv.k;
    const long hw = h * w;
    m.resize(ckk, hw);
    for (long oy = 0; oy < h; ++oy) {
        for (long ox = 0; ox < w; ++ox) {
            double* col = m.data() + (oy * w + ox) * ckk;
            long r = 0;
            for (long ci = 0; ci < conv.cin; ++ci) {
                const double* plane = x + ci * h * w;
                for (long ky = 0; ky < conv.k; ++ky) {
                    const long iy = oy + ky - conv.pad;
                    for (long kx = 0; kx < conv.k; ++kx, ++r) {
                        const long ix = ox + kx - conv.pad;
                        col[r] = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? plane[iy * w + ix]
                                                                          : 0.0;
                    }
                }
            }
        }
    }
}

}  // namespace

void conv_forward(const Conv& conv, const Act& x, Act& y) {
    if (x.c != conv.cin) fail("conv: input has " + std::to_string(x.c) + " channels, expected " +
                              std::to_string(conv.cin));
    if (2 * conv.pad + 1 != conv.k) fail("conv: padding is not 'same'");
    y.resize(x.b, conv.cout, x.h, x.w);
    const long ckk = conv.cin * conv.k * conv.k;
    const long hw = x.h * x.w;
    Eigen::Map<const RowMat> wmat(conv.w.data(), conv.cout, ckk);
#pragma omp parallel
    {
        ColMat m;
#pragma omp for schedule(static)
        for (long b = 0; b < x.b; ++b) {
            im2col(conv, x.sample(b), x.h, x.w, m);
            Eigen::Map<RowMat> ymat(y.sample(b), conv.cout, hw);
            ymat.noalias() = wmat * m;
        }
    }
}

void conv_backward(const Conv& conv, const Act& x, const Act& dy, Act* dx,
                   std::vector<double>& dw) {
    const long ckk = conv.cin * conv.k * conv.k;
    const long hw = x.h * x.w;
    Eigen::Map<const RowMat> wmat(conv.w.data(), conv.cout, ckk);

    if (dx) {
        dx->resize(x.b, x.c, x.h, x.w);
#pragma omp parallel
        {
            ColMat colgrad;
#pragma omp for schedule(static)
            for (long b = 0; b < x.b; ++b) {
                Eigen::Map<const RowMat> dymat(dy.sample(b), conv.cout, hw);
                colgrad.noalias() = wmat.transpose() * dymat;
                double* out = dx->sample(b);
                for (long oy = 0; oy < x.h; ++oy) {
                    for (long ox = 0; ox < x.w; ++ox) {
                        const double* col = colgrad.data() + (oy * x.w + ox) * ckk;
                        long r = 0;
                        for (long ci = 0; ci < conv.cin; ++ci) {
                            double* plane = out + ci * hw;
                            for (long ky = 0; ky < conv.k; ++ky) {
                                const long iy = oy + ky - conv.pad;
                                for (long kx = 0; kx < conv.k; ++kx, ++r) {
                                    const long ix = ox + kx - conv.pad;
                                    if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w)
                                        plane[iy * x.w + ix] += col[r];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // Weight gradient: per-chunk accumulators summed in chunk order so the
    // result does not depend on the thread count.
    std::vector<RowMat> acc(kReduceChunks);
    for (auto& a : acc) a = RowMat::Zero(conv.cout, ckk);
#pragma omp parallel
    {
        ColMat m;
#pragma omp for schedule(static)
        for (int chunk = 0; chunk < kReduceChunks; ++chunk) {
            const auto [lo, hi] = chunk_range(x.b, chunk);
            for (long b = lo; b < hi; ++b) {
                im2col(conv, x.sample(b), x.h, x.w, m);
                Eigen::Map<const RowMat> dymat(dy.sample(b), conv.cout, hw);
                acc[size_t(chunk)].noalias() += dymat * m.transpose();
            }
        }
    }
    Eigen::Map<RowMat> dwmat(dw.data(), conv.cout, ckk);
    for (const auto& a : acc) dwmat += a;
}

// ---------------------------------------------------------------------------

void bn_forward(BatchNorm& bn, const Act& x, Act& y, bool train, bool batch_stats,
                bool update_running, BnCache* cache) {
    if (x.c != bn.c) fail("batchnorm: channel mismatch");
    y.resize(x.b, x.c, x.h, x.w);
    const long plane = x.h * x.w;
    const long n = x.b * plane;

    if (!batch_stats) {
        if (cache) {
            cache->batch_stats = false;
            cache->xhat.assign(x.v.begin(), x.v.end());
        }
#pragma omp parallel for schedule(static)
        for (long c = 0; c < x.c; ++c) {
            const double g = bn.gamma[size_t(c)], s = bn.beta[size_t(c)];
            for (long b = 0; b < x.b; ++b) {
                const double* xp = x.sample(b) + c * plane;
                double* yp = y.sample(b) + c * plane;
                for (long i = 0; i < plane; ++i) yp[i] = g * xp[i] + s;
            }
        }
        return;
    }

    std::vector<double> mean(size_t(x.c)), var(size_t(x.c));
    if (train) {
        // Per-channel reduction runs sequentially inside one thread, so sums
        // are bitwise stable.
#pragma omp parallel for schedule(static)
        for (long c = 0; c < x.c; ++c) {
            double s = 0.0;
            for (long b = 0; b < x.b; ++b) {
                const double* xp = x.sample(b) + c * plane;
                for (long i = 0; i < plane; ++i) s += xp[i];
            }
            const double mu = s / double(n);
            double v2 = 0.0;
            for (long b = 0; b < x.b; ++b) {
                const double* xp = x.sample(b) + c * plane;
                for (long i = 0; i < plane; ++i) {
                    const double d = xp[i] - mu;
                    v2 += d * d;
                }
            }
            mean[size_t(c)] = mu;
            var[size_t(c)] = v2 / double(n);
        }
        if (update_running) {
            for (long c = 0; c < x.c; ++c) {
                const double unbiased = n > 1 ? var[size_t(c)] * double(n) / double(n - 1)
                                              : var[size_t(c)];
                bn.run_mean[size_t(c)] =
                    (1.0 - kBnMomentum) * bn.run_mean[size_t(c)] + kBnMomentum * mean[size_t(c)];
                bn.run_var[size_t(c)] =
                    (1.0 - kBnMomentum) * bn.run_var[size_t(c)] + kBnMomentum * unbiased;
            }
        }
    } else {
        for (long c = 0; c < x.c; ++c) {
            mean[size_t(c)] = bn.run_mean[size_t(c)];
            var[size_t(c)] = bn.run_var[size_t(c)];
        }
    }

    if (cache) {
        cache->batch_stats = true;
        cache->xhat.resize(x.v.size());
        cache->inv_std.resize(size_t(x.c));
    }
#pragma omp parallel for schedule(static)
    for (long c = 0; c < x.c; ++c) {
        const double mu = mean[size_t(c)];
        const double is = 1.0 / std::sqrt(var[size_t(c)] + kBnEps);
        if (cache) cache->inv_std[size_t(c)] = is;
        const double g = bn.gamma[size_t(c)], s = bn.beta[size_t(c)];
        for (long b = 0; b < x.b; ++b) {
            const double* xp = x.sample(b) + c * plane;
            double* yp = y.sample(b) + c * plane;
            double* xh = cache ? cache->xhat.data() + (b * x.c + c) * plane : nullptr;
            for (long i = 0; i < plane; ++i) {
                const double z = (xp[i] - mu) * is;
                if (xh) xh[i] = z;
                yp[i] = g * z + s;
            }
        }
    }
}

void bn_backward(const BatchNorm& bn, const BnCache& cache, const Act& dy, Act& dx,
                 std::vector<double>& dgamma, std::vector<double>& dbeta) {
    dx.resize(dy.b, dy.c, dy.h, dy.w);
    const long plane = dy.h * dy.w;
    const long n = dy.b * plane;

#pragma omp parallel for schedule(static)
    for (long c = 0; c < dy.c; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (long b = 0; b < dy.b; ++b) {
            const double* dyp = dy.sample(b) + c * plane;
            const double* xh = cache.xhat.data() + (b * dy.c + c) * plane;
            for (long i = 0; i < plane; ++i) {
                sum_dy += dyp[i];
                sum_dy_xhat += dyp[i] * xh[i];
            }
        }
        dgamma[size_t(c)] += sum_dy_xhat;
        dbeta[size_t(c)] += sum_dy;
        const double g = bn.gamma[size_t(c)];
        if (!cache.batch_stats) {
            // Pure affine: xhat holds the raw input, dgamma uses it directly.
            for (long b = 0; b < dy.b; ++b) {
                const double* dyp = dy.sample(b) + c * plane;
                double* dxp = dx.sample(b) + c * plane;
                for (long i = 0; i < plane; ++i) dxp[i] = g * dyp[i];
            }
            continue;
        }
        const double is = cache.inv_std[size_t(c)];
        const double mean_dy = sum_dy / double(n);
        const double mean_dy_xhat = sum_dy_xhat / double(n);
        for (long b = 0; b < dy.b; ++b) {
            const double* dyp = dy.sample(b) + c * plane;
            const double* xh = cache.xhat.data() + (b * dy.c + c) * plane;
            double* dxp = dx.sample(b) + c * plane;
            for (long i = 0; i < plane; ++i)
                dxp[i] = g * is * (dyp[i] - mean_dy - xh[i] * mean_dy_xhat);
        }
    }
}

// ---------------------------------------------------------------------------

void relu_forward(const Act& x, Act& y) {
    y.resize(x.b, x.c, x.h, x.w);
#pragma omp parallel for schedule(static)
    for (long b = 0; b < x.b; ++b) {
        const double* xp = x.sample(b);
        double* yp = y.sample(b);
        for (long i = 0; i < x.per_sample(); ++i) yp[i] = xp[i] > 0.0 ? xp[i] : 0.0;
    }
}

void relu_backward(const Act& y, const Act& dy, Act& dx) {
    dx.resize(y.b, y.c, y.h, y.w);
#pragma omp parallel for schedule(static)
    for (long b = 0; b < y.b; ++b) {
        const double* yp = y.sample(b);
        const double* dyp = dy.sample(b);
        double* dxp = dx.sample(b);
        for (long i = 0; i < y.per_sample(); ++i) dxp[i] = yp[i] > 0.0 ? dyp[i] : 0.0;
    }
}

void maxpool2_forward(const Act& x, Act& y, PoolCache& cache) {
    if (x.h % 2 || x.w % 2) fail("maxpool: odd spatial size");
    y.resize(x.b, x.c, x.h / 2, x.w / 2);
    cache.argmax.assign(y.v.size(), 0);
#pragma omp parallel for schedule(static)
    for (long b = 0; b < x.b; ++b) {
        const double* xp = x.sample(b);
        double* yp = y.sample(b);
        int32_t* am = cache.argmax.data() + b * y.per_sample();
        for (long c = 0; c < x.c; ++c) {
            for (long oy = 0; oy < y.h; ++oy) {
                for (long ox = 0; ox < y.w; ++ox) {
                    long best = (c * x.h + 2 * oy) * x.w + 2 * ox;
                    double bv = xp[best];
                    const long cand[3] = {best + 1, best + x.w, best + x.w + 1};
                    for (long k = 0; k < 3; ++k)
                        if (xp[cand[k]] > bv) {
                            bv = xp[cand[k]];
                            best = cand[k];
                        }
                    const long o = (c * y.h + oy) * y.w + ox;
                    yp[o] = bv;
                    am[o] = int32_t(best);
                }
            }
        }
    }
}

void maxpool2_backward(const PoolCache& cache, const Act& dy, Act& dx) {
    // dx must be pre-sized to the pooling input shape and zeroed by resize.
#pragma omp parallel for schedule(static)
    for (long b = 0; b < dy.b; ++b) {
        const double* dyp = dy.sample(b);
        const int32_t* am = cache.argmax.data() + b * dy.per_sample();
        double* dxp = dx.sample(b);
        for (long i = 0; i < dy.per_sample(); ++i) dxp[am[i]] += dyp[i];
    }
}

void dropout_forward(const Act& x, Act& y, double p, bool train, uint64_t seed, uint64_t tag,
                     DropCache* cache) {
    y.resize(x.b, x.c, x.h, x.w);
    if (!train || p <= 0.0) {
        y.v = x.v;
        if (cache) cache->mult.assign(x.v.size(), 1.0);
        return;
    }
    if (p >= 1.0) fail("dropout: p must be < 1");
    const double keep_scale = 1.0 / (1.0 - p);
    if (cache) cache->mult.resize(x.v.size());
#pragma omp parallel for schedule(static)
    for (long b = 0; b < x.b; ++b) {
        Rng rng = substream(seed, {0xd20u, tag, uint64_t(b)});
        const double* xp = x.sample(b);
        double* yp = y.sample(b);
        double* mp = cache ? cache->mult.data() + b * x.per_sample() : nullptr;
        for (long i = 0; i < x.per_sample(); ++i) {
            const double m = u01(rng) < p ? 0.0 : keep_scale;
            if (mp) mp[i] = m;
            yp[i] = m * xp[i];
        }
    }
}

void dropout_backward(const DropCache& cache, const Act& dy, Act& dx) {
    dx.resize(dy.b, dy.c, dy.h, dy.w);
#pragma omp parallel for schedule(static)
    for (long b = 0; b < dy.b; ++b) {
        const double* dyp = dy.sample(b);
        const double* mp = cache.mult.data() + b * dy.per_sample();
        double* dxp = dx.sample(b);
        for (long i = 0; i < dy.per_sample(); ++i) dxp[i] = mp[i] * dyp[i];
    }
}

// ---------------------------------------------------------------------------

void linear_forward(const Linear& fc, const double* x, long batch, double* y) {
    Eigen::Map<const RowMat> xm(x, batch, fc.in);
    Eigen::Map<const RowMat> wm(fc.w.data(), fc.in, fc.out);
    Eigen::Map<RowMat> ym(y, batch, fc.out);
    ym.noalias() = xm * wm;
    Eigen::Map<const Eigen::RowVectorXd> bm(fc.b.data(), fc.out);
    ym.rowwise() += bm;
}

void linear_backward(const Linear& fc, const double* x, const double* dy, long batch, double* dx,
                     std::vector<double>& dw, std::vector<double>& db) {
    Eigen::Map<const RowMat> xm(x, batch, fc.in);
    Eigen::Map<const RowMat> dym(dy, batch, fc.out);
    Eigen::Map<const RowMat> wm(fc.w.data(), fc.in, fc.out);
    if (dx) {
        Eigen::Map<RowMat> dxm(dx, batch, fc.in);
        dxm.noalias() = dym * wm.transpose();
    }
    Eigen::Map<RowMat> dwm(dw.data(), fc.in, fc.out);
    dwm.noalias() += xm.transpose() * dym;
    Eigen::Map<Eigen::RowVectorXd> dbm(db.data(), fc.out);
    dbm += dym.colwise().sum();
}

// ---------------------------------------------------------------------------

void init_uniform(std::vector<double>& w, long fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(double(fan_in));
    for (double& x : w) x = uniform(rng, -bound, bound);
}

void adam_step_begin(AdamState& state) { ++state.t; }

void adam_apply(const AdamConfig& cfg, AdamState& state, size_t slot, std::vector<double>& param,
                const std::vector<double>& grad) {
    AdamSlot& s = state.slots.at(slot);
    if (s.m.empty()) {
        s.m.assign(param.size(), 0.0);
        s.v.assign(param.size(), 0.0);
    }
    if (param.size() != grad.size() || param.size() != s.m.size())
        fail("adam: size mismatch on slot " + std::to_string(slot));
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.t));
    for (size_t i = 0; i < param.size(); ++i) {
        s.m[i] = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * grad[i];
        s.v[i] = cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        param[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * param[i]);
    }
}

}  // namespace painpair::nn
