#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "painpair/scales.hpp"

using namespace painpair;
using scales::AUVector;
using scales::DatasetId;

namespace {

// Independent evaluation used as the oracle: literal transcription of the
// pain-intensity definition, no shared helpers with the library.
double pspi_oracle(double au4, double au6, double au7, double au9, double au10, double au43) {
    const double m67 = au6 > au7 ? au6 : au7;
    const double m910 = au9 > au10 ? au9 : au10;
    return au43 + m67 + m910 + au4;
}

AUVector aus(double a4, double a6, double a7, double a9, double a10, double a43) {
    AUVector v;
    v.au4 = a4;
    v.au6 = a6;
    v.au7 = a7;
    v.au9 = a9;
    v.au10 = a10;
    v.au43 = a43;
    return v;
}

}  // namespace

TEST_SUITE("scales") {

TEST_CASE("pspi zero and extreme cases") {
    CHECK(scales::compute_pspi(AUVector{}) == 0.0);
    CHECK(scales::compute_pspi(aus(5, 5, 5, 5, 5, 1)) == 16.0);
    CHECK(scales::compute_pspi(aus(2, 1, 3, 0, 2, 1)) == 8.0);
}

TEST_CASE("pspi exhaustive integer grid oracle") {
    long cases = 0;
    for (int a4 = 0; a4 <= 5; ++a4)
        for (int a6 = 0; a6 <= 5; ++a6)
            for (int a7 = 0; a7 <= 5; ++a7)
                for (int a9 = 0; a9 <= 5; ++a9)
                    for (int a10 = 0; a10 <= 5; ++a10)
                        for (int a43 = 0; a43 <= 1; ++a43) {
                            const double got =
                                scales::compute_pspi(aus(a4, a6, a7, a9, a10, a43));
                            const double want = pspi_oracle(a4, a6, a7, a9, a10, a43);
                            REQUIRE(got == want);
                            ++cases;
                        }
    CHECK(cases == 15552);
}

TEST_CASE("pspi monotone in every field") {
    Rng rng(99);
    for (int trial = 0; trial < 500; ++trial) {
        AUVector base = aus(uniform(rng, 0, 5), uniform(rng, 0, 5), uniform(rng, 0, 5),
                            uniform(rng, 0, 5), uniform(rng, 0, 5), uniform_index(rng, 2));
        const double before = scales::compute_pspi(base);
        AUVector bumped = base;
        double* fields[6] = {&bumped.au4, &bumped.au6,  &bumped.au7,
                             &bumped.au9, &bumped.au10, &bumped.au43};
        const double caps[6] = {5, 5, 5, 5, 5, 1};
        const size_t f = uniform_index(rng, 6);
        *fields[f] = std::min(caps[f], *fields[f] + u01(rng) * (f == 5 ? 1.0 : 2.0));
        if (f == 5) *fields[f] = 1.0;
        CHECK(scales::compute_pspi(bumped) >= before);
    }
}

TEST_CASE("pspi range validation names the field") {
    AUVector bad;
    bad.au9 = 5.5;
    CHECK_THROWS_WITH_AS(scales::compute_pspi(bad), doctest::Contains("au9"), Error);
    AUVector bin;
    bin.au43 = 0.5;
    CHECK_THROWS_WITH_AS(scales::compute_pspi(bin), doctest::Contains("au43"), Error);
}

TEST_CASE("head table shape and blocks") {
    const auto t = scales::build_head_table();
    REQUIRE(t.entries.size() == scales::kNumHeads);
    CHECK(t.count(DatasetId::Dementia) == 16);
    CHECK(t.count(DatasetId::Control) == 16);
    CHECK(t.count(DatasetId::UNBC) == 7);

    std::set<int> indices;
    for (const auto& e : t.entries) indices.insert(e.index);
    CHECK(indices.size() == 39);
    CHECK(*indices.begin() == 0);
    CHECK(*indices.rbegin() == 38);

    // UNBC block carries the individual AU heads.
    std::set<std::string> unbc;
    for (const auto& e : t.entries)
        if (e.dataset == DatasetId::UNBC) unbc.insert(e.target);
    CHECK(unbc.count("au6") == 1);
    CHECK(unbc.count("au7") == 1);
    CHECK(unbc.count("au9") == 1);
    CHECK(unbc.count("au10") == 1);
    CHECK(unbc.count("p1") == 0);

    // The two cohort blocks carry the checklist items.
    for (auto d : {DatasetId::Dementia, DatasetId::Control}) {
        std::set<std::string> targets;
        for (const auto& e : t.entries)
            if (e.dataset == d) targets.insert(e.target);
        for (int i = 1; i <= 11; ++i) CHECK(targets.count("p" + std::to_string(i)) == 1);
        CHECK(targets.count("max_au6_au7") == 1);
        CHECK(targets.count("max_au9_au10") == 1);
    }

    CHECK(t.is_pspi(t.pspi_head(DatasetId::Dementia)));
    CHECK(t.is_pspi(t.pspi_head(DatasetId::UNBC)));

    // Deterministic and idempotent.
    const auto t2 = scales::build_head_table();
    for (size_t i = 0; i < t.entries.size(); ++i) {
        CHECK(t.entries[i].index == t2.entries[i].index);
        CHECK(t.entries[i].dataset == t2.entries[i].dataset);
        CHECK(t.entries[i].target == t2.entries[i].target);
    }
}

TEST_CASE("head target values follow the record") {
    scales::AnnotationRecord rec;
    rec.dataset = DatasetId::Dementia;
    rec.aus = aus(2, 1, 3, 0, 2, 1);
    rec.pspi = 8.0;
    scales::PacslacItems items{};
    items[4] = 1.0;
    rec.pacslac = items;

    CHECK(scales::head_target_value(rec, "pspi") == 8.0);
    CHECK(scales::head_target_value(rec, "au4") == 2.0);
    CHECK(scales::head_target_value(rec, "max_au6_au7") == 3.0);
    CHECK(scales::head_target_value(rec, "max_au9_au10") == 2.0);
    CHECK(scales::head_target_value(rec, "au43") == 1.0);
    CHECK(scales::head_target_value(rec, "p5") == 1.0);
    CHECK(scales::head_target_value(rec, "p1") == 0.0);

    scales::AnnotationRecord unbc;
    unbc.dataset = DatasetId::UNBC;
    unbc.aus = aus(1, 0, 2, 3, 0, 0);
    unbc.pspi = 6.0;
    CHECK(scales::head_target_value(unbc, "au7") == 2.0);
    CHECK(scales::head_target_value(unbc, "au9") == 3.0);
    CHECK(!scales::head_target_value(unbc, "p3").has_value());

    scales::AnnotationRecord bare;
    bare.dataset = DatasetId::Control;
    bare.pspi = 1.0;
    CHECK(!scales::head_target_value(bare, "au4").has_value());
    CHECK(scales::head_target_value(bare, "pspi") == 1.0);
}

TEST_CASE("annotation csv round trip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "pp_scales_test";
    fs::create_directories(dir);
    const std::string path = (dir / "ann.csv").string();

    std::vector<scales::AnnotationRecord> recs(3);
    recs[0].dataset = DatasetId::Dementia;
    recs[0].subject_id = "D01";
    recs[0].frame_index = 0;
    recs[0].fps = 15;
    recs[0].aus = aus(0, 0, 0, 0, 0, 0);
    recs[0].pspi = 0.0;
    recs[0].pacslac = scales::PacslacItems{};
    recs[0].frontal_score = 0.9;
    recs[0].image_path = "frames/a.pgm";

    recs[1].dataset = DatasetId::UNBC;
    recs[1].subject_id = "U07";
    recs[1].frame_index = 12;
    recs[1].fps = 30;
    recs[1].aus = aus(1.5, 0, 2, 3, 0.25, 1);
    recs[1].pspi = scales::compute_pspi(*recs[1].aus);
    recs[1].image_path = "frames/b.pgm";

    recs[2].dataset = DatasetId::Control;
    recs[2].subject_id = "C02";
    recs[2].frame_index = 3;
    recs[2].fps = 15;
    recs[2].pspi = 2.0;  // no AUs supplied
    recs[2].pacslac = scales::PacslacItems{};
    (*recs[2].pacslac)[4] = 1.0;
    recs[2].image_path = "frames/c.pgm";

    scales::write_annotations(path, recs);
    const auto back = scales::load_annotations(path);
    REQUIRE(back.size() == 3);
    CHECK(back[0].subject_id == "D01");
    CHECK(back[0].pacslac.has_value());
    CHECK(back[1].dataset == DatasetId::UNBC);
    CHECK(back[1].aus->au9 == 3.0);
    CHECK(back[1].pspi == doctest::Approx(*recs[1].pspi).epsilon(1e-12));
    CHECK(!back[1].pacslac.has_value());
    CHECK(!back[2].aus.has_value());
    CHECK(back[2].pspi == 2.0);
    REQUIRE(back[2].pacslac.has_value());
    CHECK((*back[2].pacslac)[4] == 1.0);
    CHECK((*back[2].pacslac)[3] == 0.0);
    CHECK(back[2].image_path == "frames/c.pgm");

    // Empty file with header only.
    const std::string empty_path = (dir / "empty.csv").string();
    {
        std::ofstream os(empty_path);
        os << "dataset_id,subject_id,frame_index,fps,au4,au6,au7,au9,au10,au43,pspi,"
              "p1,p2,p3,p4,p5,p6,p7,p8,p9,p10,p11,frontal_score,image_path\n";
    }
    CHECK(scales::load_annotations(empty_path).empty());

    // Inconsistent stored pspi is rejected with the row number.
    const std::string bad_path = (dir / "bad.csv").string();
    {
        std::ofstream os(bad_path);
        os << "dataset_id,subject_id,frame_index,fps,au4,au6,au7,au9,au10,au43,pspi,"
              "p1,p2,p3,p4,p5,p6,p7,p8,p9,p10,p11,frontal_score,image_path\n";
        os << "UNBC,U1,0,30,1,0,0,0,0,0,5,,,,,,,,,,,,0.8,x.pgm\n";
    }
    CHECK_THROWS_WITH_AS(scales::load_annotations(bad_path), doctest::Contains("row 2"), Error);

    fs::remove_all(dir);
}

}  // TEST_SUITE
