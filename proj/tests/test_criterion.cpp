#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "painpair/common.hpp"
#include "painpair/criterion.hpp"

using namespace painpair;
using criterion::Source;
using criterion::TrialRecord;

namespace {

TrialRecord trial(double pspi, double vas, double observer, bool affected = true,
                  const std::string& name = "t0") {
    TrialRecord t;
    t.test_name = name;
    t.affected = affected;
    t.vas = vas;
    t.observer = observer;
    t.pspi = pspi;
    return t;
}

/// Separable cohort: painful trials at PSPI 4..8 (VAS 6), pain-free at 0..2
/// (VAS 1).
std::vector<TrialRecord> separable_trials() {
    std::vector<TrialRecord> trials;
    for (int p : {4, 5, 6, 7, 8}) trials.push_back(trial(p, 6.0, 4.0));
    for (int p : {0, 1, 2, 0, 1}) trials.push_back(trial(p, 1.0, 0.5, false));
    return trials;
}

}  // namespace

TEST_SUITE("criterion") {

TEST_CASE("trial csv loading and validation") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "pp_criterion_test";
    fs::create_directories(dir);
    const fs::path good = dir / "trials.csv";
    {
        std::ofstream os(good);
        os << "test_name,side,vas,observer,pspi\n";
        os << "flexion,affected,6.5,4,7\n";
        os << "flexion,unaffected,0.5,0,1\n";
    }
    const auto trials = criterion::load_trials(good.string());
    REQUIRE(trials.size() == 2);
    CHECK(trials[0].test_name == "flexion");
    CHECK(trials[0].affected);
    CHECK(trials[0].vas == 6.5);
    CHECK(trials[0].observer == 4.0);
    CHECK(trials[0].pspi == 7.0);
    CHECK(!trials[1].affected);

    const fs::path bad_side = dir / "side.csv";
    {
        std::ofstream os(bad_side);
        os << "test_name,side,vas,observer,pspi\n";
        os << "flexion,left,6.5,4,7\n";
    }
    CHECK_THROWS_WITH_AS(criterion::load_trials(bad_side.string()),
                         doctest::Contains("side"), Error);

    const fs::path bad_range = dir / "range.csv";
    {
        std::ofstream os(bad_range);
        os << "test_name,side,vas,observer,pspi\n";
        os << "flexion,affected,11,4,7\n";
    }
    CHECK_THROWS_WITH_AS(criterion::load_trials(bad_range.string()),
                         doctest::Contains("vas"), Error);

    const fs::path bad_header = dir / "header.csv";
    {
        std::ofstream os(bad_header);
        os << "name,side,vas,observer,pspi\n";
    }
    CHECK_THROWS_AS(criterion::load_trials(bad_header.string()), Error);
    fs::remove_all(dir);
}

TEST_CASE("no-pain confidence interval") {
    const auto zero = criterion::no_pain_interval({0, 0, 0, 0}, 0.99);
    CHECK(zero.mean == 0.0);
    CHECK(zero.lower == 0.0);
    CHECK(zero.upper == 0.0);

    // Frozen against a reference t-distribution implementation.
    const auto a = criterion::no_pain_interval({1, 1, 1, 3}, 0.99);
    CHECK(a.mean == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(a.lower == doctest::Approx(-1.420454654867).epsilon(1e-9));
    CHECK(a.upper == doctest::Approx(4.420454654867).epsilon(1e-9));

    const auto b = criterion::no_pain_interval({2, 3, 5, 4, 6}, 0.95);
    CHECK(b.mean == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(b.lower == doctest::Approx(2.036756838522).epsilon(1e-9));
    CHECK(b.upper == doctest::Approx(5.963243161478).epsilon(1e-9));

    const auto wide = criterion::no_pain_interval({1, 1, 1, 3}, 0.99);
    const auto narrow = criterion::no_pain_interval({1, 1, 1, 3}, 0.95);
    CHECK(wide.upper - wide.lower > narrow.upper - narrow.lower);

    CHECK_THROWS_AS(criterion::no_pain_interval({1}, 0.99), Error);
    CHECK_THROWS_AS(criterion::no_pain_interval({1, 2}, 1.5), Error);
}

TEST_CASE("trial labeling") {
    std::vector<TrialRecord> trials = {trial(3, 5.0, 2.9), trial(2, 4.9, 3.0),
                                       trial(0, 0.0, 0.0)};
    CHECK(criterion::label_trials(trials, Source::Vas) == std::vector<int>{1, 0, 0});
    CHECK(criterion::label_trials(trials, Source::Observer) == std::vector<int>{0, 1, 0});
    CHECK(criterion::label_trials(trials, Source::Vas, 3.0, 3.0) == std::vector<int>{1, 1, 0});

    CHECK(criterion::source_from_name("vas") == Source::Vas);
    CHECK(criterion::source_from_name("observer") == Source::Observer);
    CHECK_THROWS_AS(criterion::source_from_name("self"), Error);
    CHECK_THROWS_AS(criterion::label_trials(trials, Source::Vas, 12.0, 3.0), Error);
}

TEST_CASE("criterion derivation on separable trials") {
    const auto trials = separable_trials();
    const auto res = criterion::derive_criterion(trials, Source::Vas);
    REQUIRE(res.auc.has_value());
    CHECK(*res.auc == doctest::Approx(1.0));
    CHECK(res.cutoff > 2.0);
    CHECK(res.cutoff <= 4.0);
    CHECK(res.r > 0.9);

    // Observer source agrees here by construction.
    const auto obs = criterion::derive_criterion(trials, Source::Observer);
    REQUIRE(obs.auc.has_value());
    CHECK(*obs.auc == doctest::Approx(1.0));
}

TEST_CASE("youden ties break toward the lower threshold") {
    // PSPI 0,1 negative; 5,6 positive. Among observed candidates only t=5
    // separates perfectly.
    std::vector<TrialRecord> trials = {trial(0, 1, 0, false), trial(1, 1, 0, false),
                                       trial(5, 6, 4), trial(6, 6, 4)};
    const auto res = criterion::derive_criterion(trials, Source::Vas);
    CHECK(res.cutoff == 5.0);

    // An exact tie between non-adjacent thresholds: label pattern where
    // t=2 and t=4 give the same J.
    std::vector<TrialRecord> tie = {trial(0, 1, 0, false), trial(2, 6, 4), trial(3, 1, 0, false),
                                    trial(4, 6, 4)};
    // t=2: tp=2 fp=1 -> J = 1 - 0.5 = 0.5; t=4: tp=1 fp=0 -> J = 0.5 - 0 = 0.5.
    const auto r2 = criterion::derive_criterion(tie, Source::Vas);
    CHECK(r2.cutoff == 2.0);
}

TEST_CASE("cutoff follows strictly increasing transforms") {
    const auto trials = separable_trials();
    const auto base = criterion::derive_criterion(trials, Source::Vas);
    auto mapped = trials;
    auto f = [](double x) { return x * x * x / 50.0 + 2.0 * x; };
    for (auto& t : mapped) t.pspi = f(t.pspi);
    const auto res = criterion::derive_criterion(mapped, Source::Vas);
    REQUIRE(res.auc.has_value());
    REQUIRE(base.auc.has_value());
    CHECK(*res.auc == doctest::Approx(*base.auc).epsilon(1e-12));
    CHECK(res.cutoff == doctest::Approx(f(base.cutoff)).epsilon(1e-12));
}

TEST_CASE("single-class labels leave auc empty but keep r") {
    std::vector<TrialRecord> trials = {trial(1, 1, 0), trial(3, 2, 1), trial(5, 3, 2)};
    const auto res = criterion::derive_criterion(trials, Source::Vas);  // all below 5
    CHECK(!res.auc.has_value());
    CHECK(std::isfinite(res.r));
    CHECK(res.r > 0.9);
}

TEST_CASE("shuffled labels give chance-level auc") {
    Rng rng(77);
    double total = 0.0;
    const int resamples = 300;
    for (int i = 0; i < resamples; ++i) {
        std::vector<TrialRecord> trials;
        for (int j = 0; j < 16; ++j) {
            const double pspi = double(uniform_index(rng, 9));
            const bool painful = u01(rng) < 0.5;  // independent of pspi
            trials.push_back(trial(pspi, painful ? 7.0 : 1.0, painful ? 4.0 : 1.0));
        }
        const auto res = criterion::derive_criterion(trials, Source::Vas);
        if (!res.auc.has_value()) {
            --i;  // rare single-class draw; redo
            continue;
        }
        total += *res.auc;
    }
    const double mean_auc = total / resamples;
    CHECK(mean_auc > 0.4);
    CHECK(mean_auc < 0.6);
}

TEST_CASE("criterion csv report") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "pp_criterion_csv";
    fs::create_directories(dir);
    const fs::path path = dir / "criterion.csv";

    std::vector<TrialRecord> trials;
    for (const auto& t : separable_trials()) {
        auto a = t;
        a.test_name = "flexion";
        trials.push_back(a);
        a.test_name = "rotation";
        trials.push_back(a);
    }
    // One test with single-class labels -> NA columns.
    trials.push_back(trial(1, 1, 0, false, "rest"));
    trials.push_back(trial(2, 2, 1, false, "rest"));

    criterion::write_criterion_csv(path.string(), trials, Source::Vas);
    const Csv csv = read_csv(path.string());
    REQUIRE(csv.header == std::vector<std::string>{"test_name", "n", "r", "auc", "criterion"});
    REQUIRE(csv.rows.size() == 4);  // flexion, rotation, rest, overall
    CHECK(csv.rows[0][0] == "flexion");
    CHECK(csv.rows[0][1] == "10");
    CHECK(parse_double(csv.rows[0][3], "auc") == doctest::Approx(1.0));
    CHECK(csv.rows[2][0] == "rest");
    CHECK(csv.rows[2][3] == "NA");
    CHECK(csv.rows[3][0] == "overall");
    CHECK(csv.rows[3][1] == "22");
    fs::remove_all(dir);
}

}  // TEST_SUITE
