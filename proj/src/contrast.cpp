#include "painpair/contrast.hpp"

#include <cmath>

#include "painpair/common.hpp"
#include "painpair/model.hpp"

namespace painpair::contrast {

img::Image vertical_flip(const img::Image& in) {
    img::Image out(in.h, in.w);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) out.at(y, x) = in.at(in.h - 1 - y, x);
    return out;
}

namespace {

/// Smoothed displacement fields, x first then y, both drawn row-major.
void elastic_fields(int h, int w, double alpha, double sigma, uint64_t seed,
                    std::vector<double>& fx, std::vector<double>& fy) {
    const size_t n = size_t(h) * w;
    std::vector<double> rx(n), ry(n);
    Rng rng = substream(seed, {0xe1a57u});
    for (auto& v : rx) v = uniform(rng, -1.0, 1.0);
    for (auto& v : ry) v = uniform(rng, -1.0, 1.0);

    const int radius = int(std::ceil(3.0 * sigma));
    std::vector<double> kernel(size_t(2 * radius + 1));
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[size_t(i + radius)] = std::exp(-double(i) * i / (2.0 * sigma * sigma));
        ksum += kernel[size_t(i + radius)];
    }
    for (auto& k : kernel) k /= ksum;

    // Separable convolution with zero padding outside the field.
    const auto smooth = [&](std::vector<double>& f) {
        std::vector<double> tmp(n, 0.0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double s = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int xx = x + i;
                    if (xx >= 0 && xx < w) s += kernel[size_t(i + radius)] * f[size_t(y) * w + xx];
                }
                tmp[size_t(y) * w + x] = s;
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double s = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    const int yy = y + i;
                    if (yy >= 0 && yy < h)
                        s += kernel[size_t(i + radius)] * tmp[size_t(yy) * w + x];
                }
                f[size_t(y) * w + x] = alpha * s;
            }
    };
    smooth(rx);
    smooth(ry);
    fx = std::move(rx);
    fy = std::move(ry);
}

}  // namespace

img::Image elastic_transform(const img::Image& in, double alpha, double sigma, uint64_t seed) {
    if (alpha < 0) fail("elastic: alpha must be >= 0");
    if (!(sigma > 0)) fail("elastic: sigma must be > 0");
    if (alpha == 0.0) return in;
    std::vector<double> fx, fy;
    elastic_fields(in.h, in.w, alpha, sigma, seed, fx, fy);
    img::Image out(in.h, in.w);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            const size_t i = size_t(y) * in.w + x;
            out.at(y, x) = img::sample_bilinear(in, x + fx[i], y + fy[i]);
        }
    return out;
}

std::pair<img::Image, img::Image> make_ood(const img::Image& ref, const img::Image& tgt,
                                           double alpha, double sigma, uint64_t seed) {
    return {elastic_transform(vertical_flip(ref), alpha, sigma, seed),
            elastic_transform(vertical_flip(tgt), alpha, sigma, seed)};
}

namespace {

constexpr double kNormFloor = 1e-12;
constexpr long kFeat = model::kFeatureDim;
constexpr long kHeads = scales::kNumHeads;

double floored_norm(const double* v, long n, long stride, long& anomalies) {
    double s = 0.0;
    for (long i = 0; i < n; ++i) s += v[i * stride] * v[i * stride];
    const double norm = std::sqrt(s);
    if (norm < kNormFloor) {
        ++anomalies;
        return kNormFloor;
    }
    return norm;
}

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

ContrastiveResult contrastive_loss(const std::vector<double>& f_id,
                                   const std::vector<double>& f_ood, long batch,
                                   const std::vector<double>& w) {
    ContrastiveResult r;
    if (f_id.size() != size_t(batch) * kFeat || f_ood.size() != f_id.size())
        fail("contrastive: feature batch shape mismatch");
    if (w.size() != size_t(kFeat) * kHeads) fail("contrastive: weight shape mismatch");

    std::vector<double> wnorm(kHeads, 0.0);
    for (long i = 0; i < kHeads; ++i)
        wnorm[size_t(i)] = floored_norm(w.data() + i, kFeat, kHeads, r.anomalies);

    double total = 0.0;
    for (long b = 0; b < batch; ++b) {
        const double* fi = f_id.data() + b * kFeat;
        const double* fo = f_ood.data() + b * kFeat;
        const double ni = floored_norm(fi, kFeat, 1, r.anomalies);
        const double no = floored_norm(fo, kFeat, 1, r.anomalies);
        for (long i = 0; i < kHeads; ++i) {
            double di = 0.0, dox = 0.0;
            for (long f = 0; f < kFeat; ++f) {
                const double wv = w[size_t(f) * kHeads + i];
                di += fi[f] * wv;
                dox += fo[f] * wv;
            }
            total += std::fabs(dox / (no * wnorm[size_t(i)])) -
                     std::fabs(di / (ni * wnorm[size_t(i)]));
        }
    }
    r.value = total / (double(batch) * kHeads);
    return r;
}

ContrastiveResult contrastive_loss_backward(const std::vector<double>& f_id,
                                            const std::vector<double>& f_ood, long batch,
                                            const std::vector<double>& w, double scale,
                                            std::vector<double>& d_id, std::vector<double>& d_ood,
                                            std::vector<double>& dw) {
    ContrastiveResult r;
    if (f_id.size() != size_t(batch) * kFeat || f_ood.size() != f_id.size())
        fail("contrastive: feature batch shape mismatch");
    if (w.size() != size_t(kFeat) * kHeads) fail("contrastive: weight shape mismatch");
    if (d_id.size() != f_id.size() || d_ood.size() != f_ood.size() || dw.size() != w.size())
        fail("contrastive: gradient buffer shape mismatch");

    std::vector<double> wnorm(kHeads, 0.0);
    for (long i = 0; i < kHeads; ++i)
        wnorm[size_t(i)] = floored_norm(w.data() + i, kFeat, kHeads, r.anomalies);

    const double coef = scale / (double(batch) * kHeads);
    double total = 0.0;
    for (long b = 0; b < batch; ++b) {
        const double* fi = f_id.data() + b * kFeat;
        const double* fo = f_ood.data() + b * kFeat;
        double* gi = d_id.data() + b * kFeat;
        double* go = d_ood.data() + b * kFeat;
        const double ni = floored_norm(fi, kFeat, 1, r.anomalies);
        const double no = floored_norm(fo, kFeat, 1, r.anomalies);
        for (long i = 0; i < kHeads; ++i) {
            const double wn = wnorm[size_t(i)];
            double di = 0.0, dox = 0.0;
            for (long f = 0; f < kFeat; ++f) {
                const double wv = w[size_t(f) * kHeads + i];
                di += fi[f] * wv;
                dox += fo[f] * wv;
            }
            const double ci = di / (ni * wn);
            const double co = dox / (no * wn);
            total += std::fabs(co) - std::fabs(ci);
            const double so = sgn(co), si = sgn(ci);
            for (long f = 0; f < kFeat; ++f) {
                const double wv = w[size_t(f) * kHeads + i];
                go[f] += coef * so * (wv / (no * wn) - co * fo[f] / (no * no));
                gi[f] -= coef * si * (wv / (ni * wn) - ci * fi[f] / (ni * ni));
                dw[size_t(f) * kHeads + i] +=
                    coef * (so * (fo[f] / (no * wn) - co * wv / (wn * wn)) -
                            si * (fi[f] / (ni * wn) - ci * wv / (wn * wn)));
            }
        }
    }
    r.value = total / (double(batch) * kHeads);
    return r;
}

}  // namespace painpair::contrast
