#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "painpair/scales.hpp"

namespace painpair::pair {

/// Regression target of one (reference, target) pair: per-head deltas with a
/// {0,1} mask selecting which heads contribute to the loss.
struct DeltaTarget {
    std::array<double, scales::kNumHeads> delta{};
    std::array<double, scales::kNumHeads> mask{};
};

/// delta[h] = tgt value − ref value for heads of the target's dataset where
/// both records carry the annotation; everything else is masked out. The
/// non-negative-delta rule gates the whole sample by default (a negative
/// PSPI delta zeroes every mask); with per_head_gating each head is gated by
/// its own delta instead. Cross-subject pairs are rejected unless
/// allow_cross_subject is set (random-person ablation).
DeltaTarget make_target_delta(const scales::AnnotationRecord& ref,
                              const scales::AnnotationRecord& tgt,
                              const scales::HeadTable& heads, bool per_head_gating = false,
                              bool allow_cross_subject = false);

struct PairList {
    std::vector<std::pair<size_t, size_t>> pairs;  // (ref, tgt) indices into records
    int skipped = 0;                               // targets without an eligible reference
};

/// One pair per record: the record is the target, the reference is a
/// uniformly random other record of the same subject. Records whose subject
/// has a single frame are skipped and counted.
PairList sample_training_pairs(const std::vector<scales::AnnotationRecord>& records,
                               uint64_t epoch_seed);

/// Ablation variant: the reference is a uniformly random other record from
/// the whole dataset, any subject.
PairList sample_random_person_pairs(const std::vector<scales::AnnotationRecord>& records,
                                    uint64_t epoch_seed);

struct ReferenceSelection {
    std::vector<size_t> ids;  // record indices, all with pspi == 0
    bool shortfall = false;   // fewer zero-PSPI frames than requested
};

/// n distinct zero-PSPI frames of the subject, sampled without replacement.
ReferenceSelection select_reference_frames(const std::vector<scales::AnnotationRecord>& records,
                                           const std::string& subject_id, int n,
                                           uint64_t seed = 0);

}  // namespace painpair::pair
