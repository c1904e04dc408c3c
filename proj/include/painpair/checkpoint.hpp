#pragma once

#include <cstdint>
#include <string>

#include "painpair/model.hpp"

namespace painpair::ckpt {

struct Checkpoint {
    model::ModelParams params;
    uint64_t seed = 0;
    std::string config_echo;  // key=value lines of the run that produced it
};

/// Binary format "PPCK" v1: header (input size, seed, config echo) followed by
/// one named f64 blob per parameter and batchnorm running statistic, in the
/// param_views/state_views order. Writes are byte-deterministic.
void save_checkpoint(const std::string& path, Checkpoint& ck);

/// Rejects unknown magic/version, unknown blob names, and shape mismatches.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace painpair::ckpt
