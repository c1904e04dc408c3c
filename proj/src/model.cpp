#include "painpair/model.hpp"

#include <cmath>

namespace painpair::model {

ModelParams make_model(uint64_t seed, int input_size) {
    if (input_size < 8 || input_size % 8 != 0) fail("model: input size must be a multiple of 8");
    ModelParams p;
    p.input_size = input_size;
    p.conv0 = nn::Conv(1, 8, 5, 2);
    const long chans[4] = {8, 16, 32, 48};
    for (int i = 0; i < 3; ++i) {
        p.convs[size_t(i)] = nn::Conv(chans[i], chans[i + 1], 3, 1);
        p.bns[size_t(i)] = nn::BatchNorm(chans[i + 1]);
    }
    p.fc1 = nn::Linear(p.flat_dim(), kFeatureDim);
    p.head = nn::Linear(kFeatureDim, scales::kNumHeads);

    uint64_t which = 0;
    const auto init = [&](std::vector<double>& w, long fan_in) {
        Rng rng = substream(seed, {0x1417u, which++});
        nn::init_uniform(w, fan_in, rng);
    };
    init(p.conv0.w, p.conv0.cin * p.conv0.k * p.conv0.k);
    for (auto& c : p.convs) init(c.w, c.cin * c.k * c.k);
    init(p.fc1.w, p.fc1.in);
    init(p.fc1.b, p.fc1.in);
    init(p.head.w, p.head.in);
    init(p.head.b, p.head.in);
    return p;
}

std::vector<ParamView> param_views(ModelParams& p) {
    std::vector<ParamView> v;
    v.push_back({"conv0.w", &p.conv0.w, {p.conv0.cout, p.conv0.cin, p.conv0.k, p.conv0.k}});
    for (int i = 0; i < 3; ++i) {
        const std::string b = "block" + std::to_string(i + 1);
        auto& c = p.convs[size_t(i)];
        v.push_back({b + ".conv.w", &c.w, {c.cout, c.cin, c.k, c.k}});
        v.push_back({b + ".bn.gamma", &p.bns[size_t(i)].gamma, {p.bns[size_t(i)].c}});
        v.push_back({b + ".bn.beta", &p.bns[size_t(i)].beta, {p.bns[size_t(i)].c}});
    }
    v.push_back({"fc1.w", &p.fc1.w, {p.fc1.in, p.fc1.out}});
    v.push_back({"fc1.b", &p.fc1.b, {p.fc1.out}});
    v.push_back({"head.w", &p.head.w, {p.head.in, p.head.out}});
    v.push_back({"head.b", &p.head.b, {p.head.out}});
    return v;
}

std::vector<ParamView> state_views(ModelParams& p) {
    std::vector<ParamView> v;
    for (int i = 0; i < 3; ++i) {
        const std::string b = "block" + std::to_string(i + 1);
        v.push_back({b + ".bn.run_mean", &p.bns[size_t(i)].run_mean, {p.bns[size_t(i)].c}});
        v.push_back({b + ".bn.run_var", &p.bns[size_t(i)].run_var, {p.bns[size_t(i)].c}});
    }
    return v;
}

void Grads::zero() {
    for (auto& gi : g) std::fill(gi.begin(), gi.end(), 0.0);
}

Grads make_grads(ModelParams& p) {
    Grads g;
    for (const auto& view : param_views(p)) g.g.emplace_back(view.data->size(), 0.0);
    return g;
}

void forward_batch(ModelParams& p, const nn::Act& refs, const nn::Act& tgts,
                   const ForwardOptions& opt, ForwardCache* cache, std::vector<double>& outputs,
                   std::vector<double>& features) {
    if (!refs.same_shape(tgts)) fail("model: ref/tgt batch shapes differ");
    if (refs.c != 1 || refs.h != p.input_size || refs.w != p.input_size)
        fail("model: expected [batch][1][" + std::to_string(p.input_size) + "][" +
             std::to_string(p.input_size) + "] input");
    const long B = refs.b;

    nn::Act conv_ref, conv_tgt, diff;
    nn::conv_forward(p.conv0, refs, conv_ref);
    nn::conv_forward(p.conv0, tgts, conv_tgt);
    diff.resize(B, p.conv0.cout, refs.h, refs.w);
    for (size_t i = 0; i < diff.v.size(); ++i) diff.v[i] = conv_tgt.v[i] - conv_ref.v[i];

    if (cache) {
        cache->refs = refs;
        cache->tgts = tgts;
        cache->diff = diff;
    }

    nn::Act cur = std::move(diff);
    for (int blk = 0; blk < 3; ++blk) {
        nn::Act conv_out, bn_out, relu_out, pool_out, drop_out;
        nn::BnCache bn_local;
        nn::PoolCache pool_local;
        nn::DropCache drop_local;
        nn::BnCache* bnc = cache ? &cache->bn[size_t(blk)] : &bn_local;
        nn::PoolCache* plc = cache ? &cache->pool[size_t(blk)] : &pool_local;
        nn::DropCache* drc = cache ? &cache->drop[size_t(blk)] : &drop_local;

        nn::conv_forward(p.convs[size_t(blk)], cur, conv_out);
        nn::bn_forward(p.bns[size_t(blk)], conv_out, bn_out, opt.train, opt.batch_stats,
                       opt.train && opt.update_running, cache ? bnc : nullptr);
        nn::relu_forward(bn_out, relu_out);
        nn::maxpool2_forward(relu_out, pool_out, *plc);
        nn::dropout_forward(pool_out, drop_out, opt.dropout_p, opt.train, opt.dropout_seed,
                            uint64_t(blk), cache ? drc : nullptr);
        if (cache) {
            cache->relu_out[size_t(blk)] = std::move(relu_out);
            cache->drop_out[size_t(blk)] = drop_out;
        }
        cur = std::move(drop_out);
    }

    // cur is [B][48][S/8][S/8]; its per-sample layout is already the flatten
    // order expected by fc1.
    std::vector<double> fc1_out(size_t(B) * kFeatureDim);
    nn::linear_forward(p.fc1, cur.v.data(), B, fc1_out.data());
    features.resize(size_t(B) * kFeatureDim);
    for (size_t i = 0; i < fc1_out.size(); ++i)
        features[i] = fc1_out[i] > 0.0 ? fc1_out[i] : 0.0;
    if (cache) cache->features = features;

    outputs.resize(size_t(B) * scales::kNumHeads);
    nn::linear_forward(p.head, features.data(), B, outputs.data());
}

void backward_batch(const ModelParams& p, const ForwardCache& cache,
                    const std::vector<double>& d_outputs,
                    const std::vector<double>& d_features_extra, Grads& grads) {
    const long B = cache.refs.b;
    auto views = param_views(const_cast<ModelParams&>(p));
    if (grads.g.size() != views.size()) fail("model: gradient slot count mismatch");
    const auto slot = [&](const std::string& name) -> std::vector<double>& {
        for (size_t i = 0; i < views.size(); ++i)
            if (views[i].name == name) return grads.g[i];
        fail("model: no gradient slot '" + name + "'");
    };

    // Head and feature ReLU.
    std::vector<double> d_feat(size_t(B) * kFeatureDim, 0.0);
    nn::linear_backward(p.head, cache.features.data(), d_outputs.data(), B, d_feat.data(),
                        slot("head.w"), slot("head.b"));
    if (!d_features_extra.empty()) {
        if (d_features_extra.size() != d_feat.size()) fail("model: feature gradient size mismatch");
        for (size_t i = 0; i < d_feat.size(); ++i) d_feat[i] += d_features_extra[i];
    }
    for (size_t i = 0; i < d_feat.size(); ++i)
        if (cache.features[i] <= 0.0) d_feat[i] = 0.0;

    // fc1 back to the flattened block-3 output.
    const nn::Act& flat_in = cache.drop_out[2];
    std::vector<double> d_flat(flat_in.v.size(), 0.0);
    nn::linear_backward(p.fc1, flat_in.v.data(), d_feat.data(), B, d_flat.data(), slot("fc1.w"),
                        slot("fc1.b"));

    nn::Act d_cur(flat_in.b, flat_in.c, flat_in.h, flat_in.w);
    d_cur.v = std::move(d_flat);

    for (int blk = 2; blk >= 0; --blk) {
        const std::string b = "block" + std::to_string(blk + 1);
        nn::Act d_pool, d_relu, d_bn, d_conv_in;
        nn::dropout_backward(cache.drop[size_t(blk)], d_cur, d_pool);
        const nn::Act& relu_out = cache.relu_out[size_t(blk)];
        d_relu.resize(relu_out.b, relu_out.c, relu_out.h, relu_out.w);
        nn::maxpool2_backward(cache.pool[size_t(blk)], d_pool, d_relu);
        nn::relu_backward(relu_out, d_relu, d_bn);
        nn::Act d_conv_out;
        nn::bn_backward(p.bns[size_t(blk)], cache.bn[size_t(blk)], d_bn, d_conv_out,
                        slot(b + ".bn.gamma"), slot(b + ".bn.beta"));
        const nn::Act& conv_in = blk == 0 ? cache.diff : cache.drop_out[size_t(blk - 1)];
        nn::conv_backward(p.convs[size_t(blk)], conv_in, d_conv_out, &d_conv_in,
                          slot(b + ".conv.w"));
        d_cur = std::move(d_conv_in);
    }

    // d = conv0(tgt) - conv0(ref): the target branch sees +d_cur, the
    // reference branch -d_cur; input gradients are not needed.
    nn::conv_backward(p.conv0, cache.tgts, d_cur, nullptr, slot("conv0.w"));
    for (double& x : d_cur.v) x = -x;
    nn::conv_backward(p.conv0, cache.refs, d_cur, nullptr, slot("conv0.w"));
}

std::vector<double> forward_single(ModelParams& p, const img::Image& ref, const img::Image& tgt,
                                   const ForwardOptions& opt) {
    if (ref.h != p.input_size || ref.w != p.input_size || tgt.h != ref.h || tgt.w != ref.w)
        fail("model: frame size does not match the model input size");
    nn::Act r(1, 1, ref.h, ref.w), t(1, 1, tgt.h, tgt.w);
    r.v = ref.v;
    t.v = tgt.v;
    std::vector<double> out, feat;
    forward_batch(p, r, t, opt, nullptr, out, feat);
    return out;
}

MaskedMse masked_mse(const std::vector<double>& outputs, const std::vector<double>& deltas,
                     const std::vector<double>& masks, long batch) {
    const size_t n = size_t(batch) * scales::kNumHeads;
    if (outputs.size() != n || deltas.size() != n || masks.size() != n)
        fail("loss: batch shape mismatch");
    MaskedMse r;
    double num = 0.0, denom = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = outputs[i] - deltas[i];
        num += masks[i] * d * d;
        denom += masks[i];
    }
    r.all_masked = denom == 0.0;
    r.value = num / std::max(1.0, denom);
    return r;
}

void masked_mse_backward(const std::vector<double>& outputs, const std::vector<double>& deltas,
                         const std::vector<double>& masks, long batch, double scale,
                         std::vector<double>& d_outputs) {
    const size_t n = size_t(batch) * scales::kNumHeads;
    double denom = 0.0;
    for (size_t i = 0; i < n; ++i) denom += masks[i];
    denom = std::max(1.0, denom);
    d_outputs.assign(n, 0.0);
    for (size_t i = 0; i < n; ++i)
        d_outputs[i] = scale * 2.0 * masks[i] * (outputs[i] - deltas[i]) / denom;
}

double predict_pspi(ModelParams& p, const std::vector<img::Image>& refs, const img::Image& tgt,
                    int head) {
    if (refs.empty()) fail("predict: no reference frames");
    if (head < 0 || head >= scales::kNumHeads) fail("predict: head index out of range");
    const long B = long(refs.size());
    if (tgt.h != p.input_size || tgt.w != p.input_size)
        fail("predict: target frame size does not match the model input size");
    nn::Act r(B, 1, p.input_size, p.input_size), t(B, 1, p.input_size, p.input_size);
    for (long i = 0; i < B; ++i) {
        if (refs[size_t(i)].h != p.input_size || refs[size_t(i)].w != p.input_size)
            fail("predict: reference frame size does not match the model input size");
        std::copy(refs[size_t(i)].v.begin(), refs[size_t(i)].v.end(), r.sample(i));
        std::copy(tgt.v.begin(), tgt.v.end(), t.sample(i));
    }
    std::vector<double> out, feat;
    ForwardOptions opt;  // eval mode
    forward_batch(p, r, t, opt, nullptr, out, feat);
    double sum = 0.0;
    for (long i = 0; i < B; ++i) sum += out[size_t(i) * scales::kNumHeads + head];
    return sum / double(B);
}

}  // namespace painpair::model
