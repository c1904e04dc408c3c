#pragma once

#include <cstdint>
#include <vector>

#include "painpair/dataset.hpp"
#include "painpair/model.hpp"

namespace painpair::train {

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 1e-4;
    int epochs = 70;
    int batch_size = 32;
    double dropout_p = 0.25;
    double contrastive_c = 0.05;
    bool contrastive_enabled = true;
    bool multitask_enabled = true;
    bool per_head_gating = false;
    bool bn_batch_stats = true;
    bool augment = true;
    int crop_pad = 8;
    double hflip_p = 0.5;
    double elastic_alpha = 20.0;
    double elastic_sigma = 3.0;
    bool random_person_pairs = false;
    uint64_t seed = 1;
};

struct EpochStats {
    double mse = 0.0;
    double contrastive = 0.0;
    double total = 0.0;
    long pairs = 0;
    long all_masked_batches = 0;
    long contrast_anomalies = 0;
};

struct TrainResult {
    model::ModelParams params;
    std::vector<EpochStats> history;
    int skipped_records = 0;  // targets without an eligible reference
};

/// Zero-padded random crop plus optional horizontal flip; applied with the
/// same offsets/flip to both frames of a pair.
img::Image augment_frame(const img::Image& in, int pad, int off_x, int off_y, bool flip);

TrainResult run_training(const data::Dataset& ds, const TrainConfig& cfg,
                         const scales::HeadTable& heads);

}  // namespace painpair::train
