#include "painpair/eval.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "painpair/metrics.hpp"
#include "painpair/pairing.hpp"

namespace painpair::eval {

namespace {

using scales::DatasetId;

std::array<double, scales::kNumHeads> predict_all(model::ModelParams& params,
                                                  const std::vector<img::Image>& refs,
                                                  const img::Image& tgt) {
    const long B = long(refs.size());
    nn::Act r(B, 1, params.input_size, params.input_size);
    nn::Act t(B, 1, params.input_size, params.input_size);
    for (long i = 0; i < B; ++i) {
        std::copy(refs[size_t(i)].v.begin(), refs[size_t(i)].v.end(), r.sample(i));
        std::copy(tgt.v.begin(), tgt.v.end(), t.sample(i));
    }
    std::vector<double> out, feat;
    model::ForwardOptions opt;  // eval mode
    model::forward_batch(params, r, t, opt, nullptr, out, feat);
    std::array<double, scales::kNumHeads> mean{};
    for (long i = 0; i < B; ++i)
        for (int h = 0; h < scales::kNumHeads; ++h)
            mean[size_t(h)] += out[size_t(i) * scales::kNumHeads + size_t(h)];
    for (double& m : mean) m /= double(B);
    return mean;
}

std::optional<double> try_pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2) return std::nullopt;
    try {
        return metrics::pearson(a, b);
    } catch (const Error&) {
        return std::nullopt;
    }
}

}  // namespace

EvalReport evaluate(model::ModelParams& params, const data::Dataset& test,
                    const EvalOptions& opt) {
    if (opt.n_refs < 1) fail("eval: n_refs must be >= 1");
    EvalReport report;
    report.n_refs = opt.n_refs;
    report.threshold = opt.threshold;
    report.windows_sec = opt.windows_sec;

    const scales::HeadTable heads = scales::build_head_table();
    const DatasetId all_ids[3] = {DatasetId::Dementia, DatasetId::Control, DatasetId::UNBC};

    for (int d = 0; d < 3; ++d) {
        const DatasetId did = all_ids[d];
        // Subjects of this dataset in first-appearance order.
        std::vector<std::string> subject_order;
        std::map<std::string, std::vector<size_t>> frames_of;
        for (size_t i = 0; i < test.records.size(); ++i) {
            if (test.records[i].dataset != did || !test.records[i].pspi) continue;
            const std::string& s = test.records[i].subject_id;
            if (!frames_of.count(s)) subject_order.push_back(s);
            frames_of[s].push_back(i);
        }
        if (subject_order.empty()) continue;

        DatasetMetrics dm;
        std::vector<double> gts;                                    // concatenated frame order
        std::array<std::vector<double>, 3> preds_by_head;           // per PSPI head
        std::vector<double> fps_per_subject;
        std::vector<long> subject_lengths;

        for (const auto& subject : subject_order) {
            auto& idxs = frames_of[subject];
            std::sort(idxs.begin(), idxs.end(), [&](size_t a, size_t b) {
                return test.records[a].frame_index < test.records[b].frame_index;
            });
            // Reference pool restricted to this subject AND dataset.
            std::vector<scales::AnnotationRecord> pool_recs;
            std::vector<size_t> pool_idx;
            for (size_t i = 0; i < test.records.size(); ++i)
                if (test.records[i].dataset == did && test.records[i].subject_id == subject) {
                    pool_recs.push_back(test.records[i]);
                    pool_idx.push_back(i);
                }
            const auto sel = pair::select_reference_frames(pool_recs, subject, opt.n_refs,
                                                           opt.seed);
            if (sel.ids.empty()) {
                ++dm.subjects_skipped;
                continue;
            }
            std::vector<img::Image> ref_imgs;
            for (size_t id : sel.ids) ref_imgs.push_back(test.frames[pool_idx[id]]);

            subject_lengths.push_back(long(idxs.size()));
            fps_per_subject.push_back(test.records[idxs.front()].fps);
            for (size_t i : idxs) {
                const auto all = predict_all(params, ref_imgs, test.frames[i]);
                gts.push_back(*test.records[i].pspi);
                for (int h = 0; h < 3; ++h)
                    preds_by_head[size_t(h)].push_back(all[size_t(heads.pspi_head(all_ids[h]))]);
            }
        }
        if (gts.empty()) continue;
        dm.frames = long(gts.size());

        const std::vector<double>& own = preds_by_head[size_t(d)];
        dm.pcc.emplace_back("frame", try_pearson(own, gts));

        for (int sec : opt.windows_sec) {
            std::vector<double> wp, wg;
            size_t off = 0;
            for (size_t s = 0; s < subject_lengths.size(); ++s) {
                const long len = subject_lengths[s];
                const long window = long(std::lround(double(sec) * fps_per_subject[s]));
                if (window >= 1 && window <= len) {
                    const std::vector<double> sp(own.begin() + long(off), own.begin() + long(off) + len);
                    const std::vector<double> sg(gts.begin() + long(off), gts.begin() + long(off) + len);
                    const auto rp = metrics::rolling_window_max(sp, window);
                    const auto rg = metrics::rolling_window_max(sg, window);
                    wp.insert(wp.end(), rp.begin(), rp.end());
                    wg.insert(wg.end(), rg.begin(), rg.end());
                }
                off += size_t(len);
            }
            dm.pcc.emplace_back(std::to_string(sec) + "s",
                                wp.empty() ? std::optional<double>() : try_pearson(wp, wg));
        }

        const auto bm = metrics::binary_metrics(own, gts, opt.threshold);
        dm.f1 = bm.f1;
        dm.ap = bm.ap;
        dm.auc = bm.auc;
        try {
            dm.icc = metrics::icc31(own, gts);
        } catch (const Error&) {
            dm.icc = std::nullopt;
        }

        if (opt.cross_matrix)
            for (int h = 0; h < 3; ++h)
                report.cross[size_t(d)][size_t(h)] = try_pearson(preds_by_head[size_t(h)], gts);

        report.datasets.emplace_back(scales::dataset_name(did), std::move(dm));
    }
    return report;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

std::string fmt(const std::optional<double>& v) {
    if (!v) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return buf;
}

}  // namespace

std::string report_json(const EvalReport& report) {
    nlohmann::json j;
    j["n_refs"] = report.n_refs;
    j["threshold"] = report.threshold;
    j["windows_sec"] = report.windows_sec;
    j["datasets"] = nlohmann::json::object();
    for (const auto& [name, dm] : report.datasets) {
        nlohmann::json d;
        d["frames"] = dm.frames;
        d["subjects_skipped"] = dm.subjects_skipped;
        d["pcc"] = nlohmann::json::object();
        for (const auto& [w, v] : dm.pcc) d["pcc"][w] = opt_json(v);
        d["f1"] = dm.f1;
        d["ap"] = opt_json(dm.ap);
        d["auc"] = opt_json(dm.auc);
        d["icc31"] = opt_json(dm.icc);
        j["datasets"][name] = d;
    }
    j["cross_dataset_pcc"]["heads"] = {"Dementia", "Control", "UNBC"};
    auto rows = nlohmann::json::array();
    for (int d = 0; d < 3; ++d) {
        auto row = nlohmann::json::array();
        for (int h = 0; h < 3; ++h) row.push_back(opt_json(report.cross[size_t(d)][size_t(h)]));
        rows.push_back(row);
    }
    j["cross_dataset_pcc"]["matrix"] = rows;
    j["folds"] = report.folds;
    return j.dump(2) + "\n";
}

void write_report(const std::string& dir, const EvalReport& report) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir + "/report.json");
        if (!out) fail("eval: cannot write report to '" + dir + "'");
        out << report_json(report);
    }
    {
        std::ofstream out(dir + "/pcc_windows.csv");
        out << "dataset";
        if (!report.datasets.empty())
            for (const auto& [w, v] : report.datasets.front().second.pcc) out << "," << w;
        out << "\n";
        for (const auto& [name, dm] : report.datasets) {
            out << name;
            for (const auto& [w, v] : dm.pcc) out << "," << fmt(v);
            out << "\n";
        }
    }
    {
        std::ofstream out(dir + "/classification.csv");
        out << "dataset,f1,ap,auc,icc31,frames\n";
        for (const auto& [name, dm] : report.datasets)
            out << name << "," << fmt(dm.f1) << "," << fmt(dm.ap) << "," << fmt(dm.auc) << ","
                << fmt(dm.icc) << "," << dm.frames << "\n";
    }
    {
        std::ofstream out(dir + "/cross_dataset.csv");
        out << "dataset,pspi_dementia,pspi_control,pspi_unbc\n";
        const char* names[3] = {"Dementia", "Control", "UNBC"};
        for (int d = 0; d < 3; ++d) {
            out << names[d];
            for (int h = 0; h < 3; ++h) out << "," << fmt(report.cross[size_t(d)][size_t(h)]);
            out << "\n";
        }
    }
}

}  // namespace painpair::eval
