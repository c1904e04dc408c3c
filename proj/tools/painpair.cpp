#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "painpair/checkpoint.hpp"
#include "painpair/config.hpp"
#include "painpair/criterion.hpp"
#include "painpair/eval.hpp"
#include "painpair/synth.hpp"
#include "painpair/train.hpp"

namespace fs = std::filesystem;
using namespace painpair;

namespace {

constexpr const char* kUsage =
    "usage: painpair <command> [--key value ...]\n"
    "  train     --config F [--contrastive on|off] [--multitask on|off]\n"
    "            [--pairing same|random] (requires data=, out=)\n"
    "  eval      --checkpoint P --data D [--windows 1,5,20] [--out DIR]\n"
    "  predict   --checkpoint P --ref-dir R --target T\n"
    "  criterion --trials CSV --source vas|observer [--out DIR]\n"
    "  synth     --subjects N --frames M --out DIR [--bias]\n"
    "Any config key works as a --key value flag; flags override the file.\n"
    "PAINPAIR_THREADS caps worker parallelism.\n";

std::string flag_to_key(const std::string& flag) {
    std::string key = flag.substr(2);
    for (char& c : key)
        if (c == '-') c = '_';
    return key;
}

/// --config loads first so that every other flag overrides the file.
cfg::Config resolve_config(const std::vector<std::string>& args) {
    cfg::Config c = cfg::default_config();
    for (size_t i = 0; i + 1 < args.size(); ++i)
        if (args[i] == "--config") c = cfg::parse_config(args[i + 1]);
    for (size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.rfind("--", 0) != 0) fail("unexpected argument '" + a + "' (flags are --key value)");
        if (a == "--config") {
            if (i + 1 >= args.size()) fail("--config needs a file path");
            ++i;
            continue;
        }
        const std::string key = flag_to_key(a);
        if (i + 1 >= args.size() || args[i + 1].rfind("--", 0) == 0) {
            if (key == "bias") {  // the one value-less switch
                cfg::set_value(c, key, "on");
                continue;
            }
            fail("flag " + a + " needs a value");
        }
        cfg::set_value(c, key, args[++i]);
    }
    return c;
}

void require_key(const cfg::Config& c, const std::string& key, const std::string& cmd) {
    if (c.get(key).empty()) fail(cmd + " requires " + key + "= (config file or --" + key + ")");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) fail("write to " + path.string() + " failed");
}

void write_echo(const fs::path& dir, const cfg::Config& c) {
    fs::create_directories(dir);
    write_text(dir / "config.echo", cfg::config_echo(c));
}

data::LoadOptions load_options_from(const cfg::Config& c) {
    data::LoadOptions opt;
    opt.frontal_threshold = c.get_double("frontal_threshold");
    opt.apply_clahe = c.get_bool("clahe");
    opt.clahe_clip = c.get_double("clahe_clip");
    opt.clahe_tiles = int(c.get_long("clahe_tiles"));
    opt.landmarks = c.get("landmarks");
    opt.cache_dir = c.get("cache_dir");
    return opt;
}

std::string annotations_path(const std::string& data) {
    fs::path p(data);
    if (fs::is_directory(p)) p /= "annotations.csv";
    return p.string();
}

int cmd_train(const cfg::Config& c) {
    require_key(c, "data", "train");
    require_key(c, "out", "train");
    const fs::path out(c.get("out"));
    write_echo(out, c);

    const data::Dataset ds = data::load_dataset(annotations_path(c.get("data")), load_options_from(c));
    const scales::HeadTable heads = scales::build_head_table();
    const train::TrainConfig tc = cfg::train_config_from(c);
    train::TrainResult result = train::run_training(ds, tc, heads);

    std::string hist = "epoch,mse,contrastive,total,pairs,all_masked_batches,contrast_anomalies\n";
    char line[256];
    for (size_t e = 0; e < result.history.size(); ++e) {
        const auto& s = result.history[e];
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%ld,%ld,%ld\n", e + 1, s.mse,
                      s.contrastive, s.total, s.pairs, s.all_masked_batches, s.contrast_anomalies);
        hist += line;
    }
    write_text(out / "history.csv", hist);

    ckpt::Checkpoint ck;
    ck.params = std::move(result.params);
    ck.seed = tc.seed;
    ck.config_echo = cfg::config_echo(c);
    ckpt::save_checkpoint((out / "checkpoint.bin").string(), ck);

    const auto& last = result.history.back();
    std::printf("trained %d epochs on %zu frames: total %.6f (mse %.6f, contrastive %.6f), %d skipped records\n",
                tc.epochs, ds.records.size(), last.total, last.mse, last.contrastive,
                result.skipped_records);
    return 0;
}

int cmd_eval(const cfg::Config& c) {
    require_key(c, "checkpoint", "eval");
    require_key(c, "data", "eval");
    std::string out = c.get("out");
    if (out.empty()) out = "eval_out";
    ckpt::Checkpoint ck = ckpt::load_checkpoint(c.get("checkpoint"));
    const data::Dataset ds = data::load_dataset(annotations_path(c.get("data")), load_options_from(c));

    eval::EvalOptions opt;
    opt.windows_sec.clear();
    for (double w : c.get_doubles("windows")) opt.windows_sec.push_back(int(std::lround(w)));
    opt.n_refs = int(c.get_long("refs"));
    opt.threshold = c.get_double("threshold");
    opt.seed = uint64_t(c.get_long("seed"));
    const eval::EvalReport report = eval::evaluate(ck.params, ds, opt);

    write_echo(out, c);
    eval::write_report(out, report);
    for (const auto& [name, m] : report.datasets)
        for (const auto& [win, pcc] : m.pcc)
            if (win == "frame")
                std::printf("%s: frames %ld, PCC %s\n", name.c_str(), m.frames,
                            pcc ? std::to_string(*pcc).c_str() : "NA");
    std::printf("report written to %s\n", out.c_str());
    return 0;
}

int cmd_predict(const cfg::Config& c) {
    require_key(c, "checkpoint", "predict");
    require_key(c, "ref_dir", "predict");
    require_key(c, "target", "predict");
    ckpt::Checkpoint ck = ckpt::load_checkpoint(c.get("checkpoint"));
    const img::Image target = img::read_pgm(c.get("target"));

    std::vector<std::string> ref_paths;
    if (!fs::is_directory(c.get("ref_dir"))) fail("predict: " + c.get("ref_dir") + " is not a directory");
    for (const auto& e : fs::directory_iterator(c.get("ref_dir")))
        if (e.is_regular_file() && e.path().extension() == ".pgm")
            ref_paths.push_back(e.path().string());
    if (ref_paths.empty()) fail("predict: no .pgm reference frames in " + c.get("ref_dir"));
    std::sort(ref_paths.begin(), ref_paths.end());
    std::vector<img::Image> refs;
    for (const auto& p : ref_paths) refs.push_back(img::read_pgm(p));

    const scales::HeadTable heads = scales::build_head_table();
    std::printf("dataset,predicted_pspi\n");
    for (auto d : {scales::DatasetId::Dementia, scales::DatasetId::Control, scales::DatasetId::UNBC}) {
        const double v = model::predict_pspi(ck.params, refs, target, heads.pspi_head(d));
        std::printf("%s,%.17g\n", scales::dataset_name(d), v);
    }
    return 0;
}

int cmd_criterion(const cfg::Config& c) {
    require_key(c, "trials", "criterion");
    std::string out = c.get("out");
    if (out.empty()) out = "criterion_out";
    const auto trials = criterion::load_trials(c.get("trials"));
    const auto source = criterion::source_from_name(c.get("source"));
    const double vas_cut = c.get_double("vas_cut");
    const double obs_cut = c.get_double("obs_cut");

    write_echo(out, c);
    criterion::write_criterion_csv((fs::path(out) / "criterion.csv").string(), trials, source,
                                   vas_cut, obs_cut);
    const auto overall = criterion::derive_criterion(trials, source, vas_cut, obs_cut);
    std::printf("overall: n %zu, r %.6f, auc %s, criterion PSPI >= %.6g\n", trials.size(),
                overall.r, overall.auc ? std::to_string(*overall.auc).c_str() : "NA",
                overall.cutoff);
    std::printf("criterion table written to %s\n", out.c_str());
    return 0;
}

int cmd_synth(const cfg::Config& c) {
    require_key(c, "out", "synth");
    const int subjects = int(c.get_long("subjects"));
    const int frames = int(c.get_long("frames"));
    const synth::SynthDataset ds = synth::gen_dataset(subjects, frames, uint64_t(c.get_long("seed")),
                                                      c.get_bool("bias"));
    synth::write_dataset(c.get("out"), ds);
    write_echo(c.get("out"), c);
    std::printf("wrote %zu frames for %d subjects to %s\n", ds.records.size(), subjects,
                c.get("out").c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef _OPENMP
    omp_set_num_threads(worker_threads());
#endif
    try {
        if (argc < 2) {
            std::fputs(kUsage, stderr);
            return 1;
        }
        const std::string command = argv[1];
        std::vector<std::string> args(argv + 2, argv + argc);
        if (command == "help" || command == "--help" || command == "-h") {
            std::fputs(kUsage, stdout);
            return 0;
        }
        const cfg::Config c = resolve_config(args);
        if (command == "train") return cmd_train(c);
        if (command == "eval") return cmd_eval(c);
        if (command == "predict") return cmd_predict(c);
        if (command == "criterion") return cmd_criterion(c);
        if (command == "synth") return cmd_synth(c);
        fail("unknown command '" + command + "' (train, eval, predict, criterion, synth)");
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (char& ch : msg)
            if (ch == '\n') ch = ' ';
        std::fprintf(stderr, "error: %s\n", msg.c_str());
        return 1;
    }
}
