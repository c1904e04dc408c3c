#include <doctest.h>

#include <cmath>
#include <functional>

#include "painpair/contrast.hpp"
#include "painpair/model.hpp"
#include "painpair/nn.hpp"

using namespace painpair;
using nn::Act;

namespace {

constexpr double kStep = 1e-5;
constexpr double kRelTol = 1e-4;

double rel_err(double analytic, double numeric) {
    return std::fabs(analytic - numeric) / std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
}

void fill_random(std::vector<double>& v, Rng& rng, double scale = 1.0) {
    for (double& x : v) x = scale * (2.0 * u01(rng) - 1.0);
}

/// Scalar probe loss: weighted sum of the output, with fixed pseudo-random
/// weights so every output coordinate contributes to the gradient.
std::vector<double> probe_weights(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> w(n);
    for (double& x : w) x = 2.0 * u01(rng) - 1.0;
    return w;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Central-difference check of d loss / d param against `analytic`, where
/// loss(param) is recomputed through `forward`. Checks every coordinate.
void check_grad(std::vector<double>& param, const std::vector<double>& analytic,
                const std::function<double()>& forward, const std::string& what) {
    REQUIRE(param.size() == analytic.size());
    for (size_t i = 0; i < param.size(); ++i) {
        const double keep = param[i];
        param[i] = keep + kStep;
        const double up = forward();
        param[i] = keep - kStep;
        const double down = forward();
        param[i] = keep;
        const double numeric = (up - down) / (2.0 * kStep);
        const double err = rel_err(analytic[i], numeric);
        if (err >= kRelTol) {
            CAPTURE(what);
            CAPTURE(i);
            CAPTURE(analytic[i]);
            CAPTURE(numeric);
        }
        REQUIRE(err < kRelTol);
    }
}

}  // namespace

TEST_SUITE("gradcheck") {

TEST_CASE("conv forward oracle and gradients") {
    Rng rng(21);
    nn::Conv conv(2, 3, 3, 1);
    fill_random(conv.w, rng);
    Act x(2, 2, 6, 6);
    fill_random(x.v, rng);

    // Direct five-loop convolution oracle.
    Act want(2, 3, 6, 6);
    for (long b = 0; b < 2; ++b)
        for (long co = 0; co < 3; ++co)
            for (long oy = 0; oy < 6; ++oy)
                for (long ox = 0; ox < 6; ++ox) {
                    double s = 0;
                    for (long ci = 0; ci < 2; ++ci)
                        for (long ky = 0; ky < 3; ++ky)
                            for (long kx = 0; kx < 3; ++kx) {
                                const long iy = oy + ky - 1, ix = ox + kx - 1;
                                if (iy < 0 || iy >= 6 || ix < 0 || ix >= 6) continue;
                                s += conv.w[size_t(((co * 2 + ci) * 3 + ky) * 3 + kx)] *
                                     x.v[size_t(((b * 2 + ci) * 6 + iy) * 6 + ix)];
                            }
                    want.v[size_t(((b * 3 + co) * 6 + oy) * 6 + ox)] = s;
                }
    Act y;
    nn::conv_forward(conv, x, y);
    REQUIRE(y.same_shape(want));
    for (size_t i = 0; i < y.v.size(); ++i) CHECK(y.v[i] == doctest::Approx(want.v[i]).epsilon(1e-12));

    const auto pw = probe_weights(y.v.size(), 5);
    auto loss = [&] {
        Act out;
        nn::conv_forward(conv, x, out);
        return dot(out.v, pw);
    };
    Act dy = y;
    dy.v = pw;
    Act dx(2, 2, 6, 6);
    std::vector<double> dw(conv.w.size(), 0.0);
    nn::conv_backward(conv, x, dy, &dx, dw);
    check_grad(conv.w, dw, loss, "conv weights");
    check_grad(x.v, dx.v, loss, "conv input");
}

TEST_CASE("batchnorm gradients, batch statistics mode") {
    Rng rng(22);
    nn::BatchNorm bn(3);
    fill_random(bn.gamma, rng);
    for (double& g : bn.gamma) g += 1.5;  // keep scales away from 0
    fill_random(bn.beta, rng);
    Act x(4, 3, 2, 2);
    fill_random(x.v, rng);

    const auto pw = probe_weights(x.v.size(), 6);
    auto loss = [&] {
        Act out;
        nn::BnCache cache;
        nn::bn_forward(bn, x, out, true, true, false, &cache);
        return dot(out.v, pw);
    };
    Act y;
    nn::BnCache cache;
    nn::bn_forward(bn, x, y, true, true, false, &cache);
    Act dy = y;
    dy.v = pw;
    Act dx(4, 3, 2, 2);
    std::vector<double> dgamma(3, 0.0), dbeta(3, 0.0);
    nn::bn_backward(bn, cache, dy, dx, dgamma, dbeta);
    check_grad(bn.gamma, dgamma, loss, "bn gamma");
    check_grad(bn.beta, dbeta, loss, "bn beta");
    check_grad(x.v, dx.v, loss, "bn input");
}

TEST_CASE("batchnorm gradients, pure affine mode") {
    Rng rng(23);
    nn::BatchNorm bn(2);
    fill_random(bn.gamma, rng);
    for (double& g : bn.gamma) g += 1.5;
    fill_random(bn.beta, rng);
    Act x(3, 2, 2, 2);
    fill_random(x.v, rng);

    const auto pw = probe_weights(x.v.size(), 7);
    auto loss = [&] {
        Act out;
        nn::BnCache cache;
        nn::bn_forward(bn, x, out, true, false, false, &cache);
        return dot(out.v, pw);
    };
    Act y;
    nn::BnCache cache;
    nn::bn_forward(bn, x, y, true, false, false, &cache);
    Act dy = y;
    dy.v = pw;
    Act dx(3, 2, 2, 2);
    std::vector<double> dgamma(2, 0.0), dbeta(2, 0.0);
    nn::bn_backward(bn, cache, dy, dx, dgamma, dbeta);
    check_grad(bn.gamma, dgamma, loss, "affine gamma");
    check_grad(bn.beta, dbeta, loss, "affine beta");
    check_grad(x.v, dx.v, loss, "affine input");
}

TEST_CASE("relu gradient") {
    Rng rng(24);
    Act x(2, 2, 3, 3);
    fill_random(x.v, rng);
    for (double& v : x.v)
        if (std::fabs(v) < 0.05) v = 0.2;  // stay off the kink

    const auto pw = probe_weights(x.v.size(), 8);
    auto loss = [&] {
        Act out;
        nn::relu_forward(x, out);
        return dot(out.v, pw);
    };
    Act y;
    nn::relu_forward(x, y);
    Act dy = y;
    dy.v = pw;
    Act dx(2, 2, 3, 3);
    nn::relu_backward(y, dy, dx);
    check_grad(x.v, dx.v, loss, "relu input");
}

TEST_CASE("maxpool gradient") {
    Rng rng(25);
    Act x(2, 2, 4, 4);
    fill_random(x.v, rng);

    const auto pw = probe_weights(size_t(2 * 2 * 2 * 2), 9);
    auto loss = [&] {
        Act out;
        nn::PoolCache cache;
        nn::maxpool2_forward(x, out, cache);
        return dot(out.v, pw);
    };
    Act y;
    nn::PoolCache cache;
    nn::maxpool2_forward(x, y, cache);
    Act dy = y;
    dy.v = pw;
    Act dx;
    dx.resize(2, 2, 4, 4);
    nn::maxpool2_backward(cache, dy, dx);
    check_grad(x.v, dx.v, loss, "maxpool input");
}

TEST_CASE("linear gradient") {
    Rng rng(26);
    nn::Linear fc(5, 4);
    fill_random(fc.w, rng);
    fill_random(fc.b, rng);
    std::vector<double> x(3 * 5);
    fill_random(x, rng);

    const auto pw = probe_weights(3 * 4, 10);
    auto loss = [&] {
        std::vector<double> y(3 * 4);
        nn::linear_forward(fc, x.data(), 3, y.data());
        return dot(y, pw);
    };
    std::vector<double> dx(x.size(), 0.0), dw(fc.w.size(), 0.0), db(fc.b.size(), 0.0);
    nn::linear_backward(fc, x.data(), pw.data(), 3, dx.data(), dw, db);
    check_grad(fc.w, dw, loss, "linear w");
    check_grad(fc.b, db, loss, "linear b");
    check_grad(x, dx, loss, "linear input");
}

TEST_CASE("masked mse gradient") {
    Rng rng(27);
    const long B = 4;
    std::vector<double> out(size_t(B) * scales::kNumHeads), delta(out.size()), mask(out.size());
    fill_random(out, rng);
    fill_random(delta, rng);
    for (double& m : mask) m = u01(rng) < 0.4 ? 1.0 : 0.0;

    auto loss = [&] { return model::masked_mse(out, delta, mask, B).value; };
    std::vector<double> d_out(out.size(), 0.0);
    model::masked_mse_backward(out, delta, mask, B, 1.0, d_out);
    check_grad(out, d_out, loss, "masked mse outputs");

    // Scaled variant.
    model::masked_mse_backward(out, delta, mask, B, 0.37, d_out);
    auto scaled = [&] { return 0.37 * model::masked_mse(out, delta, mask, B).value; };
    check_grad(out, d_out, scaled, "masked mse scaled");
}

TEST_CASE("contrastive loss gradient") {
    Rng rng(28);
    const long B = 3;
    std::vector<double> f_id(size_t(B * model::kFeatureDim)), f_ood(f_id.size());
    std::vector<double> w(size_t(model::kFeatureDim) * scales::kNumHeads);
    fill_random(f_id, rng);
    fill_random(f_ood, rng);
    fill_random(w, rng);

    auto loss = [&] {
        return contrast::contrastive_loss(f_id, f_ood, B, w).value;
    };
    std::vector<double> d_id(f_id.size(), 0.0), d_ood(f_ood.size(), 0.0), dw(w.size(), 0.0);
    contrast::contrastive_loss_backward(f_id, f_ood, B, w, 1.0, d_id, d_ood, dw);

    // Features: full check. Weights: sampled coordinates (7800 params).
    check_grad(f_id, d_id, loss, "contrastive id features");
    check_grad(f_ood, d_ood, loss, "contrastive ood features");
    for (int s = 0; s < 400; ++s) {
        const size_t i = uniform_index(rng, w.size());
        const double keep = w[i];
        w[i] = keep + kStep;
        const double up = loss();
        w[i] = keep - kStep;
        const double down = loss();
        w[i] = keep;
        REQUIRE(rel_err(dw[i], (up - down) / (2.0 * kStep)) < kRelTol);
    }
}

TEST_CASE("whole network gradient, sampled coordinates") {
    // input_size 16 keeps the parameter count small enough for sampling; all
    // layer code paths are identical to the full 96 configuration.
    model::ModelParams p = model::make_model(404, 16);
    Rng rng(29);
    Act refs(2, 1, 16, 16), tgts(2, 1, 16, 16);
    fill_random(refs.v, rng, 0.5);
    for (double& v : refs.v) v += 0.5;
    fill_random(tgts.v, rng, 0.5);
    for (double& v : tgts.v) v += 0.5;

    std::vector<double> delta(size_t(2) * scales::kNumHeads), mask(delta.size());
    fill_random(delta, rng);
    for (double& m : mask) m = u01(rng) < 0.5 ? 1.0 : 0.0;

    model::ForwardOptions opt;
    opt.train = true;
    opt.batch_stats = true;
    opt.update_running = false;
    opt.dropout_p = 0.0;  // off: the kink-free loss surface gradcheck needs

    auto loss = [&] {
        model::ForwardCache cache;
        std::vector<double> outputs, features;
        model::forward_batch(p, refs, tgts, opt, &cache, outputs, features);
        return model::masked_mse(outputs, delta, mask, 2).value;
    };

    model::ForwardCache cache;
    std::vector<double> outputs, features;
    model::forward_batch(p, refs, tgts, opt, &cache, outputs, features);
    std::vector<double> d_outputs(outputs.size(), 0.0);
    model::masked_mse_backward(outputs, delta, mask, 2, 1.0, d_outputs);
    model::Grads grads = model::make_grads(p);
    model::backward_batch(p, cache, d_outputs, {}, grads);

    auto views = model::param_views(p);
    REQUIRE(views.size() == grads.g.size());
    Rng pick(31);
    int skipped = 0;
    for (size_t s = 0; s < views.size(); ++s) {
        auto& param = *views[s].data;
        const auto& g = grads.g[s];
        REQUIRE(param.size() == g.size());
        const int samples = param.size() <= 24 ? int(param.size()) : 24;
        for (int j = 0; j < samples; ++j) {
            const size_t i = param.size() <= 24 ? size_t(j) : uniform_index(pick, param.size());
            const double keep = param[i];
            auto central = [&](double h) {
                param[i] = keep + h;
                const double up = loss();
                param[i] = keep - h;
                const double down = loss();
                param[i] = keep;
                return (up - down) / (2.0 * h);
            };
            const double numeric = central(kStep);
            // A ReLU or pool switch inside the bracket makes the numeric
            // reference itself invalid; the halved step detects that (smooth
            // coordinates agree to ~1e-10, a crossed kink does not).
            if (rel_err(numeric, central(kStep / 2)) >= kRelTol / 2) {
                ++skipped;
                continue;
            }
            const double err = rel_err(g[i], numeric);
            CAPTURE(views[s].name);
            CAPTURE(i);
            CAPTURE(g[i]);
            CAPTURE(numeric);
            REQUIRE(err < kRelTol);
        }
    }
    CHECK(skipped <= 3);
}

TEST_CASE("whole network gradient with contrastive feature injection") {
    model::ModelParams p = model::make_model(405, 16);
    Rng rng(30);
    Act refs(2, 1, 16, 16), tgts(2, 1, 16, 16), oref(2, 1, 16, 16), otgt(2, 1, 16, 16);
    fill_random(refs.v, rng, 0.5);
    fill_random(tgts.v, rng, 0.5);
    fill_random(oref.v, rng, 0.5);
    fill_random(otgt.v, rng, 0.5);

    std::vector<double> delta(size_t(2) * scales::kNumHeads), mask(delta.size());
    fill_random(delta, rng);
    for (double& m : mask) m = u01(rng) < 0.5 ? 1.0 : 0.0;
    const double c = 0.05;

    model::ForwardOptions opt;
    opt.train = true;
    opt.dropout_p = 0.0;

    auto loss = [&] {
        model::ForwardCache ci, co;
        std::vector<double> out_id, f_id, out_ood, f_ood;
        model::forward_batch(p, refs, tgts, opt, &ci, out_id, f_id);
        model::forward_batch(p, oref, otgt, opt, &co, out_ood, f_ood);
        const double mse = model::masked_mse(out_id, delta, mask, 2).value;
        const double con = contrast::contrastive_loss(f_id, f_ood, 2, p.head.w).value;
        return mse + c * con;
    };

    model::ForwardCache ci, co;
    std::vector<double> out_id, f_id, out_ood, f_ood;
    model::forward_batch(p, refs, tgts, opt, &ci, out_id, f_id);
    model::forward_batch(p, oref, otgt, opt, &co, out_ood, f_ood);
    model::Grads grads = model::make_grads(p);

    std::vector<double> d_out(out_id.size(), 0.0);
    model::masked_mse_backward(out_id, delta, mask, 2, 1.0, d_out);
    std::vector<double> d_fid(f_id.size(), 0.0), d_food(f_ood.size(), 0.0);
    const size_t head_slot = grads.g.size() - 2;  // head.w precedes head.b
    contrast::contrastive_loss_backward(f_id, f_ood, 2, p.head.w, c, d_fid, d_food,
                                        grads.g[head_slot]);
    model::backward_batch(p, ci, d_out, d_fid, grads);
    const std::vector<double> zero_out(out_ood.size(), 0.0);
    model::backward_batch(p, co, zero_out, d_food, grads);

    auto views = model::param_views(p);
    REQUIRE(views[head_slot].name == "head.w");
    Rng pick(33);
    int skipped = 0;
    for (size_t s = 0; s < views.size(); ++s) {
        auto& param = *views[s].data;
        const auto& g = grads.g[s];
        const int samples = param.size() <= 16 ? int(param.size()) : 16;
        for (int j = 0; j < samples; ++j) {
            const size_t i = param.size() <= 16 ? size_t(j) : uniform_index(pick, param.size());
            const double keep = param[i];
            auto central = [&](double h) {
                param[i] = keep + h;
                const double up = loss();
                param[i] = keep - h;
                const double down = loss();
                param[i] = keep;
                return (up - down) / (2.0 * h);
            };
            const double numeric = central(kStep);
            if (rel_err(numeric, central(kStep / 2)) >= kRelTol / 2) {
                ++skipped;
                continue;
            }
            const double err = rel_err(g[i], numeric);
            CAPTURE(views[s].name);
            CAPTURE(i);
            REQUIRE(err < kRelTol);
        }
    }
    CHECK(skipped <= 3);
}

}  // TEST_SUITE
