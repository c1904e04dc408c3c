#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "painpair/dataset.hpp"
#include "painpair/preprocess.hpp"
#include "painpair/synth.hpp"

using namespace painpair;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

fs::path write_synth(const fs::path& dir, int subjects = 2, int frames = 4,
                     uint64_t seed = 13) {
    synth::write_dataset(dir.string(), synth::gen_dataset(subjects, frames, seed, false));
    return dir / "annotations.csv";
}

void write_identity_landmarks(const fs::path& path, const std::vector<std::string>& keys,
                              double offset = 0.0) {
    const auto templ = prep::canonical_template();
    std::ofstream os(path);
    os << "image_path";
    for (int i = 0; i < prep::kNumLandmarks; ++i) os << ",x" << i << ",y" << i;
    os << "\n";
    for (const auto& key : keys) {
        os << key;
        for (int i = 0; i < prep::kNumLandmarks; ++i)
            os << "," << templ[i].x + offset << "," << templ[i].y + offset;
        os << "\n";
    }
}

long file_count(const fs::path& dir) {
    long n = 0;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) ++n;
    return n;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("loads a generated dataset") {
    TempDir tmp("pp_ds_load");
    const auto csv = write_synth(tmp.path, 3, 5);
    const auto ds = data::load_dataset(csv.string());
    REQUIRE(ds.records.size() == 15);
    REQUIRE(ds.frames.size() == 15);
    CHECK(ds.dropped_low_frontal == 0);
    CHECK(ds.cache_hits == 0);
    for (const auto& f : ds.frames) {
        CHECK(f.h == img::kCanonicalSize);
        CHECK(f.w == img::kCanonicalSize);
    }
    // Frames come back as the stored 8-bit PGMs.
    const img::Image direct = img::read_pgm((tmp.path / ds.records[0].image_path).string());
    CHECK(ds.frames[0].v == direct.v);
}

TEST_CASE("drops frames under the frontal threshold") {
    TempDir tmp("pp_ds_frontal");
    const auto csv = write_synth(tmp.path, 2, 4);
    auto records = scales::load_annotations(csv.string());
    REQUIRE(records.size() == 8);
    records[1].frontal_score = 0.2;
    records[5].frontal_score = 0.49;
    records[6].frontal_score.reset();  // unscored rows are kept
    scales::write_annotations(csv.string(), records);

    const auto ds = data::load_dataset(csv.string());
    CHECK(ds.dropped_low_frontal == 2);
    REQUIRE(ds.records.size() == 6);
    for (const auto& rec : ds.records)
        if (rec.frontal_score) CHECK(*rec.frontal_score >= 0.5);

    data::LoadOptions strict;
    strict.frontal_threshold = 1.5;  // everything scored drops
    const auto none = data::load_dataset(csv.string(), strict);
    CHECK(none.dropped_low_frontal == 7);
    CHECK(none.records.size() == 1);
}

TEST_CASE("clahe loads are cached bitwise") {
    TempDir tmp("pp_ds_cache");
    const auto csv = write_synth(tmp.path, 2, 4);
    data::LoadOptions opt;
    opt.apply_clahe = true;
    opt.cache_dir = (tmp.path / "cache").string();

    const auto first = data::load_dataset(csv.string(), opt);
    CHECK(first.cache_hits == 0);
    CHECK(file_count(tmp.path / "cache") == 8);

    const auto second = data::load_dataset(csv.string(), opt);
    CHECK(second.cache_hits == 8);
    REQUIRE(second.frames.size() == first.frames.size());
    for (size_t i = 0; i < first.frames.size(); ++i)
        CHECK(second.frames[i].v == first.frames[i].v);

    // Uncached load matches too (processing is quantized to the 8-bit grid).
    data::LoadOptions plain = opt;
    plain.cache_dir.clear();
    const auto uncached = data::load_dataset(csv.string(), plain);
    for (size_t i = 0; i < first.frames.size(); ++i)
        CHECK(uncached.frames[i].v == first.frames[i].v);

    // CLAHE output differs from the raw frames.
    const auto raw = data::load_dataset(csv.string());
    bool any_diff = false;
    for (size_t i = 0; i < raw.frames.size(); ++i)
        if (raw.frames[i].v != first.frames[i].v) any_diff = true;
    CHECK(any_diff);

    // Different parameters never reuse stale cache entries.
    data::LoadOptions other = opt;
    other.clahe_clip = 3.5;
    const auto reclipped = data::load_dataset(csv.string(), other);
    CHECK(reclipped.cache_hits == 0);
}

TEST_CASE("raw loads ignore the cache directory") {
    TempDir tmp("pp_ds_rawcache");
    const auto csv = write_synth(tmp.path, 2, 4);
    data::LoadOptions opt;
    opt.cache_dir = (tmp.path / "cache").string();
    const auto ds = data::load_dataset(csv.string(), opt);
    CHECK(ds.cache_hits == 0);
    CHECK(file_count(tmp.path / "cache") == 0);
}

TEST_CASE("frontalizes through a landmark table") {
    TempDir tmp("pp_ds_warp");
    const auto csv = write_synth(tmp.path, 2, 4);
    const auto records = scales::load_annotations(csv.string());
    std::vector<std::string> keys;
    for (const auto& rec : records) keys.push_back(rec.image_path);
    const fs::path lm = tmp.path / "landmarks.csv";
    write_identity_landmarks(lm, keys);

    data::LoadOptions opt;
    opt.landmarks = lm.string();
    const auto ds = data::load_dataset(csv.string(), opt);
    REQUIRE(ds.records.size() == 8);
    CHECK(ds.degenerate_triangles == 0);
    // Identity landmarks keep the face interior but zero the outside of the
    // landmark hull, so frames are canonical yet differ from the raw load.
    const auto raw = data::load_dataset(csv.string());
    bool any_diff = false;
    for (size_t i = 0; i < ds.frames.size(); ++i) {
        CHECK(ds.frames[i].h == img::kCanonicalSize);
        if (ds.frames[i].v != raw.frames[i].v) any_diff = true;
    }
    CHECK(any_diff);

    // A missing landmark row is an error naming the frame.
    write_identity_landmarks(lm, std::vector<std::string>(keys.begin(), keys.end() - 1));
    CHECK_THROWS_WITH_AS(data::load_dataset(csv.string(), opt),
                         doctest::Contains(keys.back().c_str()), Error);
}

TEST_CASE("non-canonical frames need landmarks") {
    TempDir tmp("pp_ds_big");
    fs::create_directories(tmp.path / "frames");
    img::Image big(120, 120, 0.4);
    for (int y = 30; y < 90; ++y)
        for (int x = 30; x < 90; ++x) big.at(y, x) = 0.7;
    img::write_pgm((tmp.path / "frames" / "big.pgm").string(), big);

    scales::AnnotationRecord rec;
    rec.dataset = scales::DatasetId::UNBC;
    rec.subject_id = "S000";
    rec.frame_index = 0;
    rec.fps = 30.0;
    rec.aus = scales::AUVector{};
    rec.pspi = 0.0;
    rec.image_path = "frames/big.pgm";
    const fs::path csv = tmp.path / "annotations.csv";
    scales::write_annotations(csv.string(), {rec});

    CHECK_THROWS_WITH_AS(data::load_dataset(csv.string()), doctest::Contains("96"), Error);

    const fs::path lm = tmp.path / "landmarks.csv";
    write_identity_landmarks(lm, {"frames/big.pgm"}, 12.0);
    data::LoadOptions opt;
    opt.landmarks = lm.string();
    const auto ds = data::load_dataset(csv.string(), opt);
    REQUIRE(ds.frames.size() == 1);
    CHECK(ds.frames[0].h == img::kCanonicalSize);
    CHECK(ds.frames[0].w == img::kCanonicalSize);
}

TEST_CASE("missing frame files are reported") {
    TempDir tmp("pp_ds_missing");
    const auto csv = write_synth(tmp.path, 2, 4);
    fs::remove(tmp.path / "frames" / "S001_0002.pgm");
    CHECK_THROWS_WITH_AS(data::load_dataset(csv.string()), doctest::Contains("S001_0002"),
                         Error);
}

}  // TEST_SUITE
