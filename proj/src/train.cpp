#include "painpair/train.hpp"

#include <cmath>

#include "painpair/contrast.hpp"

namespace painpair::train {

img::Image augment_frame(const img::Image& in, int pad, int off_x, int off_y, bool flip) {
    if (off_x < 0 || off_x > 2 * pad || off_y < 0 || off_y > 2 * pad)
        fail("augment: crop offset out of range");
    img::Image out(in.h, in.w, 0.0);
    for (int y = 0; y < in.h; ++y) {
        const int sy = y + off_y - pad;
        if (sy < 0 || sy >= in.h) continue;
        for (int x = 0; x < in.w; ++x) {
            const int sx = x + off_x - pad;
            if (sx < 0 || sx >= in.w) continue;
            out.at(y, flip ? in.w - 1 - x : x) = in.at(sy, sx);
        }
    }
    return out;
}

namespace {

constexpr uint64_t kTagPairs = 1, kTagOrder = 2, kTagAug = 3, kTagDrop = 4, kTagOod = 5,
                   kTagDropOod = 6;

int find_slot(const std::vector<model::ParamView>& views, const std::string& name) {
    for (size_t i = 0; i < views.size(); ++i)
        if (views[i].name == name) return int(i);
    fail("train: no parameter named '" + name + "'");
}

}  // namespace

TrainResult run_training(const data::Dataset& ds, const TrainConfig& cfg,
                         const scales::HeadTable& heads) {
    if (ds.records.empty()) fail("train: empty dataset");
    if (cfg.batch_size < 1) fail("train: batch_size must be >= 1");
    if (cfg.epochs < 1) fail("train: epochs must be >= 1");
    if (cfg.dropout_p < 0.0 || cfg.dropout_p >= 1.0) fail("train: dropout must be in [0,1)");

    TrainResult result;
    result.params = model::make_model(cfg.seed);
    model::ModelParams& params = result.params;
    auto views = model::param_views(params);
    model::Grads grads = model::make_grads(params);
    const int head_w_slot = find_slot(views, "head.w");

    nn::AdamConfig adam;
    adam.lr = cfg.lr;
    adam.weight_decay = cfg.weight_decay;
    nn::AdamState adam_state;
    adam_state.slots.resize(views.size());

    const int S = params.input_size;
    const long n_heads = scales::kNumHeads;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const uint64_t pair_seed = subseed(cfg.seed, {kTagPairs, uint64_t(epoch)});
        pair::PairList pl = cfg.random_person_pairs
                                ? pair::sample_random_person_pairs(ds.records, pair_seed)
                                : pair::sample_training_pairs(ds.records, pair_seed);
        if (epoch == 0) result.skipped_records = pl.skipped;
        if (pl.pairs.empty()) fail("train: no usable pairs (every subject has a single frame)");
        Rng order_rng = substream(cfg.seed, {kTagOrder, uint64_t(epoch)});
        shuffle(pl.pairs, order_rng);

        EpochStats stats;
        stats.pairs = long(pl.pairs.size());
        double mse_sum = 0.0, contr_sum = 0.0;

        for (size_t start = 0; start < pl.pairs.size(); start += size_t(cfg.batch_size)) {
            const long B = long(std::min(pl.pairs.size() - start, size_t(cfg.batch_size)));
            const long batch_index = long(start) / cfg.batch_size;

            nn::Act refs(B, 1, S, S), tgts(B, 1, S, S);
            std::vector<img::Image> aug_ref(B), aug_tgt(B);
            std::vector<double> deltas(size_t(B) * n_heads), masks(size_t(B) * n_heads);
            for (long i = 0; i < B; ++i) {
                const auto [ref_id, tgt_id] = pl.pairs[start + size_t(i)];
                int off_x = cfg.crop_pad, off_y = cfg.crop_pad;
                bool flip = false;
                if (cfg.augment) {
                    Rng arng = substream(cfg.seed,
                                         {kTagAug, uint64_t(epoch), uint64_t(start + size_t(i))});
                    off_x = int(uniform_index(arng, uint64_t(2 * cfg.crop_pad + 1)));
                    off_y = int(uniform_index(arng, uint64_t(2 * cfg.crop_pad + 1)));
                    flip = u01(arng) < cfg.hflip_p;
                }
                aug_ref[size_t(i)] =
                    augment_frame(ds.frames[ref_id], cfg.crop_pad, off_x, off_y, flip);
                aug_tgt[size_t(i)] =
                    augment_frame(ds.frames[tgt_id], cfg.crop_pad, off_x, off_y, flip);
                std::copy(aug_ref[size_t(i)].v.begin(), aug_ref[size_t(i)].v.end(),
                          refs.sample(i));
                std::copy(aug_tgt[size_t(i)].v.begin(), aug_tgt[size_t(i)].v.end(),
                          tgts.sample(i));

                const auto dt = pair::make_target_delta(ds.records[ref_id], ds.records[tgt_id],
                                                        heads, cfg.per_head_gating,
                                                        cfg.random_person_pairs);
                for (long h = 0; h < n_heads; ++h) {
                    deltas[size_t(i) * n_heads + size_t(h)] = dt.delta[size_t(h)];
                    const bool keep = cfg.multitask_enabled || heads.is_pspi(int(h));
                    masks[size_t(i) * n_heads + size_t(h)] = keep ? dt.mask[size_t(h)] : 0.0;
                }
            }

            model::ForwardOptions opt;
            opt.train = true;
            opt.batch_stats = cfg.bn_batch_stats;
            opt.update_running = true;
            opt.dropout_p = cfg.dropout_p;
            opt.dropout_seed =
                subseed(cfg.seed, {kTagDrop, uint64_t(epoch), uint64_t(batch_index)});

            model::ForwardCache cache;
            std::vector<double> outputs, features;
            model::forward_batch(params, refs, tgts, opt, &cache, outputs, features);

            const model::MaskedMse mse = model::masked_mse(outputs, deltas, masks, B);
            if (mse.all_masked) ++stats.all_masked_batches;
            std::vector<double> d_out;
            model::masked_mse_backward(outputs, deltas, masks, B, 1.0, d_out);

            grads.zero();
            double contr_value = 0.0;
            model::ForwardCache ood_cache;
            std::vector<double> d_feat_id, d_feat_ood, ood_outputs, ood_features;
            if (cfg.contrastive_enabled) {
                nn::Act orefs(B, 1, S, S), otgts(B, 1, S, S);
                for (long i = 0; i < B; ++i) {
                    const uint64_t ood_seed = subseed(
                        cfg.seed, {kTagOod, uint64_t(epoch), uint64_t(start + size_t(i))});
                    auto [oref, otgt] =
                        contrast::make_ood(aug_ref[size_t(i)], aug_tgt[size_t(i)],
                                           cfg.elastic_alpha, cfg.elastic_sigma, ood_seed);
                    std::copy(oref.v.begin(), oref.v.end(), orefs.sample(i));
                    std::copy(otgt.v.begin(), otgt.v.end(), otgts.sample(i));
                }
                model::ForwardOptions ood_opt = opt;
                ood_opt.update_running = false;  // OOD statistics stay out of inference state
                ood_opt.dropout_seed =
                    subseed(cfg.seed, {kTagDropOod, uint64_t(epoch), uint64_t(batch_index)});
                model::forward_batch(params, orefs, otgts, ood_opt, &ood_cache, ood_outputs,
                                     ood_features);

                d_feat_id.assign(features.size(), 0.0);
                d_feat_ood.assign(ood_features.size(), 0.0);
                const auto cres = contrast::contrastive_loss_backward(
                    features, ood_features, B, params.head.w, cfg.contrastive_c, d_feat_id,
                    d_feat_ood, grads.g[size_t(head_w_slot)]);
                contr_value = cres.value;
                stats.contrast_anomalies += cres.anomalies;
            }

            const double total = contrast::total_loss(
                mse.value, contr_value, cfg.contrastive_enabled ? cfg.contrastive_c : 0.0);
            if (!std::isfinite(total))
                fail("train: non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                     std::to_string(batch_index));

            model::backward_batch(params, cache, d_out, d_feat_id, grads);
            if (cfg.contrastive_enabled) {
                const std::vector<double> zero_out(size_t(B) * n_heads, 0.0);
                model::backward_batch(params, ood_cache, zero_out, d_feat_ood, grads);
            }

            nn::adam_step_begin(adam_state);
            for (size_t s = 0; s < views.size(); ++s)
                nn::adam_apply(adam, adam_state, s, *views[s].data, grads.g[s]);

            mse_sum += mse.value * double(B);
            contr_sum += contr_value * double(B);
        }

        stats.mse = mse_sum / double(stats.pairs);
        stats.contrastive = contr_sum / double(stats.pairs);
        stats.total = contrast::total_loss(stats.mse, stats.contrastive,
                                           cfg.contrastive_enabled ? cfg.contrastive_c : 0.0);
        result.history.push_back(stats);
    }
    return result;
}

}  // namespace painpair::train
