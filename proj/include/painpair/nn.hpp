#pragma once

#include <cstdint>
#include <vector>

#include "painpair/common.hpp"

namespace painpair::nn {

/// Batched activation tensor, [batch][channel][row][col] contiguous.
struct Act {
    long b = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Act() = default;
    Act(long B, long C, long H, long W) { resize(B, C, H, W); }
    void resize(long B, long C, long H, long W) {
        b = B;
        c = C;
        h = H;
        w = W;
        v.assign(size_t(B * C * H * W), 0.0);
    }
    long per_sample() const { return c * h * w; }
    double* sample(long i) { return v.data() + i * per_sample(); }
    const double* sample(long i) const { return v.data() + i * per_sample(); }
    bool same_shape(const Act& o) const { return b == o.b && c == o.c && h == o.h && w == o.w; }
};

// ---------------------------------------------------------------------------
// Convolution, stride 1, square kernel, zero 'same' padding, no bias (a bias
// before the feature-map subtraction would cancel; inside the blocks the
// batchnorm shift plays that role).

struct Conv {
    long cin = 0, cout = 0, k = 0, pad = 0;
    std::vector<double> w;  // [cout][cin][k][k]

    Conv() = default;
    Conv(long ci, long co, long kk, long p) : cin(ci), cout(co), k(kk), pad(p) {
        w.assign(size_t(co * ci * kk * kk), 0.0);
    }
};

void conv_forward(const Conv& conv, const Act& x, Act& y);
/// dx may be null when the input gradient is not needed (network inputs).
/// dw is accumulated (+=) in fixed chunk order, bitwise stable under any
/// thread count.
void conv_backward(const Conv& conv, const Act& x, const Act& dy, Act* dx,
                   std::vector<double>& dw);

// ---------------------------------------------------------------------------
// Affine batch normalization (per channel).

struct BatchNorm {
    long c = 0;
    std::vector<double> gamma, beta;
    std::vector<double> run_mean, run_var;  // inference statistics

    BatchNorm() = default;
    explicit BatchNorm(long C) : c(C) {
        gamma.assign(size_t(C), 1.0);
        beta.assign(size_t(C), 0.0);
        run_mean.assign(size_t(C), 0.0);
        run_var.assign(size_t(C), 1.0);
    }
};

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

struct BnCache {
    bool batch_stats = true;
    std::vector<double> xhat;     // normalized input (or raw input in affine mode)
    std::vector<double> inv_std;  // per channel
};

/// train+batch_stats: normalize by batch statistics (biased variance) and,
/// when update_running is set, fold them into the running averages.
/// eval+batch_stats: normalize by the running averages. batch_stats=false:
/// pure per-channel affine y = gamma*x + beta in both modes.
void bn_forward(BatchNorm& bn, const Act& x, Act& y, bool train, bool batch_stats,
                bool update_running, BnCache* cache);
void bn_backward(const BatchNorm& bn, const BnCache& cache, const Act& dy, Act& dx,
                 std::vector<double>& dgamma, std::vector<double>& dbeta);

// ---------------------------------------------------------------------------
// Pointwise / pooling layers.

void relu_forward(const Act& x, Act& y);
/// Uses the forward output's sign (y > 0 iff x > 0 for ReLU).
void relu_backward(const Act& y, const Act& dy, Act& dx);

struct PoolCache {
    std::vector<int32_t> argmax;  // per output element: flat index into the input sample
};

/// 2x2 max pooling, stride 2; requires even spatial dims. Ties resolve to the
/// first element in row-major scan order.
void maxpool2_forward(const Act& x, Act& y, PoolCache& cache);
void maxpool2_backward(const PoolCache& cache, const Act& dy, Act& dx);

struct DropCache {
    std::vector<double> mult;  // 0 or 1/(1-p) per element
};

/// Inverted dropout. The mask depends only on (seed, tag, sample index), so
/// results are identical under any thread count. Inactive when train is
/// false or p == 0.
void dropout_forward(const Act& x, Act& y, double p, bool train, uint64_t seed, uint64_t tag,
                     DropCache* cache);
void dropout_backward(const DropCache& cache, const Act& dy, Act& dx);

// ---------------------------------------------------------------------------
// Fully connected.

struct Linear {
    long in = 0, out = 0;
    std::vector<double> w;  // [in][out]
    std::vector<double> b;  // [out]

    Linear() = default;
    Linear(long i, long o) : in(i), out(o) {
        w.assign(size_t(i * o), 0.0);
        b.assign(size_t(o), 0.0);
    }
};

/// x: B×in row-major, y: B×out row-major; y = x·w + b.
void linear_forward(const Linear& fc, const double* x, long batch, double* y);
/// dx may be null. dw/db accumulated (+=); single GEMM per matrix.
void linear_backward(const Linear& fc, const double* x, const double* dy, long batch, double* dx,
                     std::vector<double>& dw, std::vector<double>& db);

// ---------------------------------------------------------------------------
// Initialization and optimization.

/// Fan-in-scaled uniform init in (-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_uniform(std::vector<double>& w, long fan_in, Rng& rng);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

/// One decoupled-weight-decay Adam slot per parameter vector.
struct AdamSlot {
    std::vector<double> m, v;
};

struct AdamState {
    long t = 0;
    std::vector<AdamSlot> slots;
};

/// p -= lr*(mhat/(sqrt(vhat)+eps) + weight_decay*p). Call step_begin once per
/// optimizer step, then apply per parameter vector.
void adam_step_begin(AdamState& state);
void adam_apply(const AdamConfig& cfg, AdamState& state, size_t slot, std::vector<double>& param,
                const std::vector<double>& grad);

}  // namespace painpair::nn
