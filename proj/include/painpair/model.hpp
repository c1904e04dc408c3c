#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "painpair/image.hpp"
#include "painpair/nn.hpp"
#include "painpair/pairing.hpp"
#include "painpair/scales.hpp"

namespace painpair::model {

constexpr int kFeatureDim = 200;

/// The pairwise network: a shared first convolution applied to both frames,
/// feature-map subtraction, three conv blocks, then two fully connected
/// layers ending in one output per head.
struct ModelParams {
    int input_size = img::kCanonicalSize;  // divisible by 8
    nn::Conv conv0;                        // 1 -> 8, 5x5
    std::array<nn::Conv, 3> convs;         // 8 -> 16 -> 32 -> 48, 3x3
    std::array<nn::BatchNorm, 3> bns;
    nn::Linear fc1;                        // flattened -> 200
    nn::Linear head;                       // 200 -> 39; w[feat][head], column = head vector

    long flat_dim() const { return 48L * (input_size / 8) * (input_size / 8); }
};

ModelParams make_model(uint64_t seed, int input_size = img::kCanonicalSize);

/// Named view of one learnable parameter vector (checkpointing, Adam,
/// gradient checks all iterate these in a fixed order).
struct ParamView {
    std::string name;
    std::vector<double>* data;
    std::vector<long> shape;
};

std::vector<ParamView> param_views(ModelParams& p);
/// Non-learnable state (batchnorm running statistics).
std::vector<ParamView> state_views(ModelParams& p);

/// Gradient accumulators parallel to param_views order.
struct Grads {
    std::vector<std::vector<double>> g;

    void zero();
};
Grads make_grads(ModelParams& p);

struct ForwardOptions {
    bool train = false;
    bool batch_stats = true;      // false: batchnorm degrades to pure affine
    bool update_running = false;  // fold batch statistics into running averages
    double dropout_p = 0.0;
    uint64_t dropout_seed = 0;
};

struct ForwardCache {
    nn::Act refs, tgts, diff;
    std::array<nn::BnCache, 3> bn;
    std::array<nn::Act, 3> relu_out;
    std::array<nn::PoolCache, 3> pool;
    std::array<nn::DropCache, 3> drop;
    std::array<nn::Act, 3> drop_out;
    std::vector<double> features;  // batch x 200, post ReLU
};

/// refs/tgts: [batch][1][S][S]. outputs: batch x 39 row-major; features:
/// batch x 200. cache may be null when no backward pass will follow.
void forward_batch(ModelParams& p, const nn::Act& refs, const nn::Act& tgts,
                   const ForwardOptions& opt, ForwardCache* cache, std::vector<double>& outputs,
                   std::vector<double>& features);

/// d_outputs: batch x 39. d_features_extra: batch x 200 gradient injected at
/// the feature node in addition to the head backprop (contrastive term), may
/// be empty. Accumulates into grads.
void backward_batch(const ModelParams& p, const ForwardCache& cache,
                    const std::vector<double>& d_outputs,
                    const std::vector<double>& d_features_extra, Grads& grads);

/// Single-pair convenience wrapper (eval mode unless opt says otherwise).
std::vector<double> forward_single(ModelParams& p, const img::Image& ref, const img::Image& tgt,
                                   const ForwardOptions& opt = {});

struct MaskedMse {
    double value = 0.0;
    bool all_masked = false;  // every mask entry was zero
};

/// sum(mask * (out - delta)^2) / max(1, sum(mask)).
MaskedMse masked_mse(const std::vector<double>& outputs, const std::vector<double>& deltas,
                     const std::vector<double>& masks, long batch);
/// Gradient of masked_mse wrt outputs, scaled by `scale`, written (not
/// accumulated) into d_outputs.
void masked_mse_backward(const std::vector<double>& outputs, const std::vector<double>& deltas,
                         const std::vector<double>& masks, long batch, double scale,
                         std::vector<double>& d_outputs);

/// Mean over refs of the eval-mode prediction delta at `head`, i.e. the
/// predicted target value given zero-PSPI references.
double predict_pspi(ModelParams& p, const std::vector<img::Image>& refs, const img::Image& tgt,
                    int head);

}  // namespace painpair::model
