#pragma once

#include <optional>
#include <string>
#include <vector>

namespace painpair::criterion {

/// One range-of-motion trial: pain ratings for the affected or unaffected
/// side plus the facial PSPI observed during the movement.
struct TrialRecord {
    std::string test_name;
    bool affected = false;
    double vas = 0.0;       // self report, 0-10 cm
    double observer = 0.0;  // observer rating, 0-5
    double pspi = 0.0;      // 0-16
};

/// CSV columns: test_name,side,vas,observer,pspi with side in
/// {affected, unaffected}.
std::vector<TrialRecord> load_trials(const std::string& path);

struct Interval {
    double mean = 0.0, lower = 0.0, upper = 0.0;
};

/// Two-sided t-distribution confidence interval of the mean.
Interval no_pain_interval(const std::vector<double>& ratings, double level = 0.99);

enum class Source { Vas, Observer };
Source source_from_name(const std::string& name);

/// Label 1 iff the chosen measure meets its cut (VAS >= 5 cm or observer
/// rating >= 3 by default).
std::vector<int> label_trials(const std::vector<TrialRecord>& trials, Source source,
                              double vas_cut = 5.0, double obs_cut = 3.0);

struct CriterionResult {
    double r = 0.0;              // Pearson(PSPI, chosen measure)
    std::optional<double> auc;   // empty when labels are single-class
    double cutoff = 0.0;         // Youden-optimal PSPI threshold (>= rule)
};

CriterionResult derive_criterion(const std::vector<TrialRecord>& trials, Source source,
                                 double vas_cut = 5.0, double obs_cut = 3.0);

/// Per-test rows plus an "overall" row, columns test_name,n,r,auc,criterion.
void write_criterion_csv(const std::string& path, const std::vector<TrialRecord>& trials,
                         Source source, double vas_cut = 5.0, double obs_cut = 3.0);

}  // namespace painpair::criterion
