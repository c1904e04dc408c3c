#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace painpair::metrics {

/// Sample Pearson correlation; errors on constant series.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct BinaryMetrics {
    double f1 = 0.0;             // at pred >= threshold vs gt >= threshold
    std::optional<double> ap;    // step-interpolated average precision
    std::optional<double> auc;   // rank statistic, average ranks on ties
    long tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Labels are (value >= threshold) on both sides; predictions double as the
/// ranking scores for AP/AUC. Single-class ground truth leaves AP/AUC empty.
BinaryMetrics binary_metrics(const std::vector<double>& preds, const std::vector<double>& gts,
                             double threshold = 2.0);

/// AUC of scores against binary labels; empty when labels are single-class.
std::optional<double> auc_score(const std::vector<double>& scores, const std::vector<int>& labels);

/// Two-way mixed, consistency, single measure: (BMS - EMS)/(BMS + EMS) for
/// two raters. Errors on zero between-target variance.
double icc31(const std::vector<double>& rater_a, const std::vector<double>& rater_b);

/// out[i] = max(s[i..i+window-1]); errors when window < 1 or > length.
std::vector<double> rolling_window_max(const std::vector<double>& s, long window);

/// Subject -> fold index. subjects_cohorts may repeat subjects (e.g. one row
/// per frame); the first cohort seen for a subject wins. Every cohort's
/// subjects spread across folds with counts differing by at most 1.
std::map<std::string, int> split_folds(
    const std::vector<std::pair<std::string, std::string>>& subject_cohorts, int k,
    uint64_t seed);

}  // namespace painpair::metrics
