#pragma once

#include <string>
#include <vector>

#include "painpair/image.hpp"
#include "painpair/scales.hpp"

namespace painpair::data {

struct LoadOptions {
    double frontal_threshold = 0.5;  // drop frames scoring below (when scored)
    bool apply_clahe = false;
    double clahe_clip = 2.0;
    int clahe_tiles = 8;
    std::string landmarks;  // landmark table CSV keyed by image_path; enables frontalization
    std::string cache_dir;  // optional cache of processed frames as 8-bit PGM
};

struct Dataset {
    std::vector<scales::AnnotationRecord> records;
    std::vector<img::Image> frames;  // parallel to records, canonical size
    int dropped_low_frontal = 0;
    int degenerate_triangles = 0;
    int cache_hits = 0;
};

/// Loads annotations + frames. image_path entries resolve relative to the
/// CSV's directory. With landmarks set, frames of any size are frontalized
/// to the canonical template; otherwise frames must already be canonical.
/// Processed frames are quantized to the 8-bit grid so cached and uncached
/// loads are bitwise identical.
Dataset load_dataset(const std::string& annotations_csv, const LoadOptions& opt = {});

}  // namespace painpair::data
