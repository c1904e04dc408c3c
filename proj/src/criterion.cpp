#include "painpair/criterion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "painpair/common.hpp"
#include "painpair/metrics.hpp"

namespace painpair::criterion {

std::vector<TrialRecord> load_trials(const std::string& path) {
    const Csv csv = read_csv(path);
    const std::vector<std::string> expected = {"test_name", "side", "vas", "observer", "pspi"};
    if (csv.header != expected)
        fail("trials: '" + path + "' must have columns test_name,side,vas,observer,pspi");
    std::vector<TrialRecord> trials;
    for (size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        const std::string ctx = "trials: '" + path + "' row " + std::to_string(r + 2);
        TrialRecord t;
        t.test_name = row[0];
        if (row[1] == "affected") t.affected = true;
        else if (row[1] == "unaffected") t.affected = false;
        else fail(ctx + ": side must be affected or unaffected");
        t.vas = parse_double(row[2], ctx);
        t.observer = parse_double(row[3], ctx);
        t.pspi = parse_double(row[4], ctx);
        if (t.vas < 0 || t.vas > 10) fail(ctx + ": vas out of [0,10]");
        if (t.observer < 0 || t.observer > 5) fail(ctx + ": observer out of [0,5]");
        if (t.pspi < 0 || t.pspi > 16) fail(ctx + ": pspi out of [0,16]");
        trials.push_back(t);
    }
    return trials;
}

Interval no_pain_interval(const std::vector<double>& ratings, double level) {
    if (ratings.size() < 2) fail("criterion: confidence interval needs at least 2 ratings");
    if (!(level > 0.0 && level < 1.0)) fail("criterion: level must be in (0,1)");
    const double n = double(ratings.size());
    double mean = 0.0;
    for (double r : ratings) mean += r;
    mean /= n;
    double ss = 0.0;
    for (double r : ratings) ss += (r - mean) * (r - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    const boost::math::students_t dist(n - 1.0);
    const double tq = boost::math::quantile(dist, 0.5 + level / 2.0);
    const double half = tq * sd / std::sqrt(n);
    return {mean, mean - half, mean + half};
}

Source source_from_name(const std::string& name) {
    if (name == "vas") return Source::Vas;
    if (name == "observer") return Source::Observer;
    fail("criterion: source must be vas or observer, got '" + name + "'");
}

std::vector<int> label_trials(const std::vector<TrialRecord>& trials, Source source,
                              double vas_cut, double obs_cut) {
    if (vas_cut < 0 || vas_cut > 10) fail("criterion: vas cut out of [0,10]");
    if (obs_cut < 0 || obs_cut > 5) fail("criterion: observer cut out of [0,5]");
    std::vector<int> labels(trials.size());
    for (size_t i = 0; i < trials.size(); ++i)
        labels[i] = source == Source::Vas ? (trials[i].vas >= vas_cut ? 1 : 0)
                                          : (trials[i].observer >= obs_cut ? 1 : 0);
    return labels;
}

CriterionResult derive_criterion(const std::vector<TrialRecord>& trials, Source source,
                                 double vas_cut, double obs_cut) {
    if (trials.size() < 2) fail("criterion: need at least 2 trials");
    std::vector<double> pspi(trials.size()), measure(trials.size());
    for (size_t i = 0; i < trials.size(); ++i) {
        pspi[i] = trials[i].pspi;
        measure[i] = source == Source::Vas ? trials[i].vas : trials[i].observer;
    }
    const std::vector<int> labels = label_trials(trials, source, vas_cut, obs_cut);

    CriterionResult res;
    res.r = metrics::pearson(pspi, measure);
    res.auc = metrics::auc_score(pspi, labels);

    // Youden's J over the observed PSPI values as candidate thresholds
    // (positive iff pspi >= t), ties broken toward the lower threshold.
    long total_pos = 0;
    for (int l : labels) total_pos += l;
    const long total_neg = long(labels.size()) - total_pos;
    const std::set<double> candidates(pspi.begin(), pspi.end());
    double best_j = -2.0, best_t = 0.0;
    for (double t : candidates) {
        long tp = 0, fp = 0;
        for (size_t i = 0; i < pspi.size(); ++i)
            if (pspi[i] >= t) {
                if (labels[i]) ++tp;
                else ++fp;
            }
        const double sens = total_pos > 0 ? double(tp) / double(total_pos) : 0.0;
        const double spec = total_neg > 0 ? 1.0 - double(fp) / double(total_neg) : 0.0;
        const double j = sens + spec - 1.0;
        if (j > best_j) {
            best_j = j;
            best_t = t;
        }
    }
    res.cutoff = best_t;
    return res;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_row(std::ofstream& out, const std::string& name,
               const std::vector<TrialRecord>& trials, Source source, double vas_cut,
               double obs_cut) {
    out << name << "," << trials.size();
    try {
        const auto res = derive_criterion(trials, source, vas_cut, obs_cut);
        out << "," << fmt(res.r) << "," << (res.auc ? fmt(*res.auc) : std::string("NA")) << ","
            << fmt(res.cutoff);
    } catch (const Error&) {
        out << ",NA,NA,NA";
    }
    out << "\n";
}

}  // namespace

void write_criterion_csv(const std::string& path, const std::vector<TrialRecord>& trials,
                         Source source, double vas_cut, double obs_cut) {
    std::ofstream out(path);
    if (!out) fail("criterion: cannot write '" + path + "'");
    out << "test_name,n,r,auc,criterion\n";
    std::vector<std::string> order;
    std::map<std::string, std::vector<TrialRecord>> by_test;
    for (const auto& t : trials) {
        if (!by_test.count(t.test_name)) order.push_back(t.test_name);
        by_test[t.test_name].push_back(t);
    }
    for (const auto& name : order) write_row(out, name, by_test[name], source, vas_cut, obs_cut);
    write_row(out, "overall", trials, source, vas_cut, obs_cut);
}

}  // namespace painpair::criterion
