#include "painpair/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "painpair/common.hpp"

namespace painpair::metrics {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) fail("pearson: length mismatch");
    const size_t n = x.size();
    if (n < 2) fail("pearson: need at least 2 points");
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) fail("pearson: correlation undefined for a constant series");
    return sxy / std::sqrt(sxx * syy);
}

std::optional<double> auc_score(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
    if (scores.size() != labels.size()) fail("auc: length mismatch");
    const size_t n = scores.size();
    long pos = 0;
    for (int l : labels) pos += l ? 1 : 0;
    const long neg = long(n) - pos;
    if (pos == 0 || neg == 0) return std::nullopt;

    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Average ranks over tied scores, then the Mann-Whitney statistic.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        const double avg_rank = (double(i + 1) + double(j)) / 2.0;
        for (size_t t = i; t < j; ++t)
            if (labels[idx[t]]) rank_sum_pos += avg_rank;
        i = j;
    }
    return (rank_sum_pos - double(pos) * double(pos + 1) / 2.0) / (double(pos) * double(neg));
}

namespace {

std::optional<double> average_precision(const std::vector<double>& scores,
                                        const std::vector<int>& labels) {
    const size_t n = scores.size();
    long total_pos = 0;
    for (int l : labels) total_pos += l ? 1 : 0;
    if (total_pos == 0 || total_pos == long(n)) return std::nullopt;

    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    // Step interpolation over distinct thresholds: all samples tied at one
    // score enter together, so the value is order-independent.
    double ap = 0.0;
    double prev_recall = 0.0;
    long tp = 0, fp = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        for (size_t t = i; t < j; ++t) {
            if (labels[idx[t]]) ++tp;
            else ++fp;
        }
        const double precision = double(tp) / double(tp + fp);
        const double recall = double(tp) / double(total_pos);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

}  // namespace

BinaryMetrics binary_metrics(const std::vector<double>& preds, const std::vector<double>& gts,
                             double threshold) {
    if (preds.size() != gts.size()) fail("binary_metrics: length mismatch");
    if (preds.empty()) fail("binary_metrics: empty input");
    BinaryMetrics m;
    std::vector<int> labels(gts.size());
    for (size_t i = 0; i < gts.size(); ++i) {
        labels[i] = gts[i] >= threshold ? 1 : 0;
        const bool pred_pos = preds[i] >= threshold;
        if (pred_pos && labels[i]) ++m.tp;
        else if (pred_pos) ++m.fp;
        else if (labels[i]) ++m.fn;
        else ++m.tn;
    }
    const double denom = double(2 * m.tp + m.fp + m.fn);
    m.f1 = denom > 0.0 ? 2.0 * double(m.tp) / denom : 0.0;
    m.ap = average_precision(preds, labels);
    m.auc = auc_score(preds, labels);
    return m;
}

double icc31(const std::vector<double>& rater_a, const std::vector<double>& rater_b) {
    if (rater_a.size() != rater_b.size()) fail("icc: length mismatch");
    const size_t n = rater_a.size();
    if (n < 3) fail("icc: need at least 3 targets");
    const double k = 2.0;

    double grand = 0.0;
    for (size_t i = 0; i < n; ++i) grand += rater_a[i] + rater_b[i];
    grand /= (k * double(n));

    double ss_targets = 0.0, ss_total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double ti = (rater_a[i] + rater_b[i]) / 2.0;
        ss_targets += (ti - grand) * (ti - grand);
        ss_total += (rater_a[i] - grand) * (rater_a[i] - grand) +
                    (rater_b[i] - grand) * (rater_b[i] - grand);
    }
    ss_targets *= k;
    double mean_a = 0.0, mean_b = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mean_a += rater_a[i];
        mean_b += rater_b[i];
    }
    mean_a /= double(n);
    mean_b /= double(n);
    const double ss_raters =
        double(n) * ((mean_a - grand) * (mean_a - grand) + (mean_b - grand) * (mean_b - grand));

    if (ss_targets == 0.0) fail("icc: zero between-target variance");
    const double bms = ss_targets / double(n - 1);
    const double ems = (ss_total - ss_targets - ss_raters) / double(n - 1);  // (n-1)(k-1), k=2
    return (bms - ems) / (bms + ems);
}

std::vector<double> rolling_window_max(const std::vector<double>& s, long window) {
    if (window < 1) fail("rolling_max: window must be >= 1");
    if (window > long(s.size()))
        fail("rolling_max: window " + std::to_string(window) + " exceeds series length " +
             std::to_string(s.size()));
    std::vector<double> out;
    out.reserve(s.size() - size_t(window) + 1);
    std::deque<size_t> q;  // indices of a decreasing run
    for (size_t i = 0; i < s.size(); ++i) {
        while (!q.empty() && s[q.back()] <= s[i]) q.pop_back();
        q.push_back(i);
        if (q.front() + size_t(window) <= i) q.pop_front();
        if (i + 1 >= size_t(window)) out.push_back(s[q.front()]);
    }
    return out;
}

std::map<std::string, int> split_folds(
    const std::vector<std::pair<std::string, std::string>>& subject_cohorts, int k,
    uint64_t seed) {
    if (k < 2) fail("folds: k must be >= 2");
    std::vector<std::string> cohort_order;
    std::map<std::string, std::vector<std::string>> by_cohort;
    std::map<std::string, bool> seen;
    for (const auto& [subject, cohort] : subject_cohorts) {
        if (seen.count(subject)) continue;
        seen[subject] = true;
        if (!by_cohort.count(cohort)) cohort_order.push_back(cohort);
        by_cohort[cohort].push_back(subject);
    }
    std::map<std::string, int> folds;
    for (const auto& cohort : cohort_order) {
        auto& subjects = by_cohort[cohort];
        if (long(subjects.size()) < k)
            fail("folds: cohort '" + cohort + "' has " + std::to_string(subjects.size()) +
                 " subjects, fewer than k=" + std::to_string(k));
        Rng rng = substream(seed, {0xf01d5u, fnv1a64(cohort.data(), cohort.size())});
        shuffle(subjects, rng);
        for (size_t i = 0; i < subjects.size(); ++i) folds[subjects[i]] = int(i % size_t(k));
    }
    return folds;
}

}  // namespace painpair::metrics
