#include "painpair/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "painpair/preprocess.hpp"

namespace painpair::data {

namespace fs = std::filesystem;

namespace {

void quantize8(img::Image& im) {
    for (double& v : im.v) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

uint64_t file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("dataset: cannot open frame '" + path + "'");
    char buf[8192];
    uint64_t h = 0xcbf29ce484222325ull;
    while (in.read(buf, sizeof buf) || in.gcount() > 0) h = fnv1a64(buf, size_t(in.gcount()), h);
    return h;
}

}  // namespace

Dataset load_dataset(const std::string& annotations_csv, const LoadOptions& opt) {
    Dataset ds;
    const fs::path root = fs::path(annotations_csv).parent_path();
    auto records = scales::load_annotations(annotations_csv);

    std::map<std::string, prep::LandmarkSet> landmark_table;
    const bool warp = !opt.landmarks.empty();
    if (warp) landmark_table = prep::load_landmark_table(opt.landmarks);
    const bool processed = warp || opt.apply_clahe;
    const prep::LandmarkSet templ = prep::canonical_template();

    if (!opt.cache_dir.empty()) fs::create_directories(opt.cache_dir);

    for (auto& rec : records) {
        if (rec.frontal_score && *rec.frontal_score < opt.frontal_threshold) {
            ++ds.dropped_low_frontal;
            continue;
        }
        const std::string path = (root / rec.image_path).string();

        std::string cache_path;
        if (processed && !opt.cache_dir.empty()) {
            char opts[128];
            std::snprintf(opts, sizeof opts, "w%d c%d %.17g %d", int(warp), int(opt.apply_clahe),
                          opt.clahe_clip, opt.clahe_tiles);
            uint64_t h = file_hash(path);
            h = fnv1a64(opts, std::char_traits<char>::length(opts), h);
            char name[32];
            std::snprintf(name, sizeof name, "%016llx.pgm", (unsigned long long)h);
            cache_path = (fs::path(opt.cache_dir) / name).string();
        }

        img::Image frame;
        if (!cache_path.empty() && fs::exists(cache_path)) {
            frame = img::read_pgm(cache_path);
            ++ds.cache_hits;
        } else {
            frame = img::read_pgm(path);
            if (warp) {
                const auto it = landmark_table.find(rec.image_path);
                if (it == landmark_table.end())
                    fail("dataset: no landmarks for '" + rec.image_path + "'");
                auto res = prep::frontalize(frame, it->second, templ);
                ds.degenerate_triangles += res.degenerate_triangles;
                frame = std::move(res.image);
            }
            if (opt.apply_clahe) frame = prep::clahe(frame, opt.clahe_clip, opt.clahe_tiles);
            if (processed) quantize8(frame);
            if (!cache_path.empty()) img::write_pgm(cache_path, frame);
        }
        img::require_canonical(frame, "dataset: frame '" + rec.image_path + "'");
        ds.records.push_back(std::move(rec));
        ds.frames.push_back(std::move(frame));
    }
    return ds;
}

}  // namespace painpair::data
