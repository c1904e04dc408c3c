#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "painpair/dataset.hpp"
#include "painpair/model.hpp"

namespace painpair::eval {

struct DatasetMetrics {
    // Window name ("frame", "1s", "5s", "20s") -> PCC; absent value means
    // N/A (window longer than every subject sequence, or undefined PCC).
    std::vector<std::pair<std::string, std::optional<double>>> pcc;
    double f1 = 0.0;
    std::optional<double> ap, auc, icc;
    long frames = 0;
    int subjects_skipped = 0;  // no zero-PSPI reference available
};

struct EvalReport {
    std::vector<std::pair<std::string, DatasetMetrics>> datasets;
    // cross[d][h]: PCC on dataset d's frames using dataset h's PSPI head.
    std::array<std::array<std::optional<double>, 3>, 3> cross{};
    std::map<std::string, int> folds;  // optional fold assignment echo
    int n_refs = 5;
    double threshold = 2.0;
    std::vector<int> windows_sec;
};

struct EvalOptions {
    std::vector<int> windows_sec = {1, 5, 20};
    int n_refs = 5;
    double threshold = 2.0;
    uint64_t seed = 0;  // reference-frame sampling
    bool cross_matrix = true;
};

EvalReport evaluate(model::ModelParams& params, const data::Dataset& test,
                    const EvalOptions& opt = {});

std::string report_json(const EvalReport& report);
/// report.json plus pcc_windows.csv / classification.csv / cross_dataset.csv.
void write_report(const std::string& dir, const EvalReport& report);

}  // namespace painpair::eval
