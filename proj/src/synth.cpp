#include "painpair/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

namespace painpair::synth {

namespace {

constexpr int S = img::kCanonicalSize;

/// Soft-edged ellipse blend: weight in [0,1] scales the coverage, so shape
/// strength varies continuously with its driving AU.
void ellipse(img::Image& im, double cx, double cy, double rx, double ry, double value,
             double weight, double sharp = 2.5) {
    if (rx <= 0 || ry <= 0 || weight <= 0) return;
    const int x0 = std::max(0, int(cx - rx - 2)), x1 = std::min(S - 1, int(cx + rx + 2));
    const int y0 = std::max(0, int(cy - ry - 2)), y1 = std::min(S - 1, int(cy + ry + 2));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double dx = (x - cx) / rx, dy = (y - cy) / ry;
            const double d = dx * dx + dy * dy;
            const double cov = std::clamp(0.5 + (1.0 - d) * sharp, 0.0, 1.0) * weight;
            if (cov > 0.0) im.at(y, x) += cov * (value - im.at(y, x));
        }
}

/// Soft-edged line segment of a given thickness.
void stroke(img::Image& im, double ax, double ay, double bx, double by, double thickness,
            double value, double weight) {
    if (weight <= 0 || thickness <= 0) return;
    const double half = thickness / 2.0;
    const int x0 = std::max(0, int(std::min(ax, bx) - half - 2));
    const int x1 = std::min(S - 1, int(std::max(ax, bx) + half + 2));
    const int y0 = std::max(0, int(std::min(ay, by) - half - 2));
    const int y1 = std::min(S - 1, int(std::max(ay, by) + half + 2));
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            double t = len2 > 0 ? ((x - ax) * vx + (y - ay) * vy) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double dx = x - (ax + t * vx), dy = y - (ay + t * vy);
            const double dist = std::sqrt(dx * dx + dy * dy);
            const double cov = std::clamp(0.5 + (half - dist) * 2.0, 0.0, 1.0) * weight;
            if (cov > 0.0) im.at(y, x) += cov * (value - im.at(y, x));
        }
}

double urange(Rng& rng, double lo, double hi) { return uniform(rng, lo, hi); }

}  // namespace

SubjectProfile gen_subject(uint64_t seed, int index, bool bias_mode) {
    if (index < 0) fail("synth: subject index must be >= 0");
    Rng rng = substream(seed, {0x50bull, uint64_t(index)});
    SubjectProfile p;
    char buf[16];
    std::snprintf(buf, sizeof buf, "S%03d", index);
    p.subject_id = buf;
    const int c = index % 3;
    p.cohort = c == 0 ? scales::DatasetId::Dementia
                      : (c == 1 ? scales::DatasetId::Control : scales::DatasetId::UNBC);
    p.fps = p.cohort == scales::DatasetId::UNBC ? 30.0 : 15.0;

    const double widen = bias_mode ? 1.6 : 1.0;
    p.face_rx = urange(rng, 0.31, 0.37);
    p.face_ry = urange(rng, 0.39, 0.45);
    p.eye_y = urange(rng, 0.36, 0.40);
    p.eye_dx = urange(rng, 0.16, 0.20);
    p.eye_w = urange(rng, 0.065 - 0.010 * widen, 0.065 + 0.010 * widen);
    p.eye_h = urange(rng, 0.024 - 0.006 * widen, 0.024 + 0.006 * widen);
    p.brow_drop = urange(rng, 0.075, 0.095);
    p.brow_len = urange(rng, 0.10, 0.14);
    p.brow_th = urange(rng, 0.011 - 0.003 * widen, 0.011 + 0.003 * widen);
    p.mouth_y = urange(rng, 0.71, 0.75);
    p.mouth_w = urange(rng, 0.13 - 0.03 * widen, 0.13 + 0.03 * widen);
    p.mouth_h = urange(rng, 0.017 - 0.005 * widen, 0.017 + 0.005 * widen);
    p.nose_y = urange(rng, 0.53, 0.57);
    p.base_intensity = urange(rng, 0.58, 0.72);
    p.bias = bias_mode ? urange(rng, -0.18, 0.18) : urange(rng, -0.03, 0.03);
    return p;
}

img::Image render_frame(const SubjectProfile& p, const scales::AUVector& aus,
                        uint64_t noise_seed) {
    const double pspi_check = scales::compute_pspi(aus);  // validates ranges
    (void)pspi_check;

    const double bg = std::clamp(0.18 + 0.30 * p.bias, 0.02, 0.55);
    img::Image im(S, S, bg);
    const double face_v = std::clamp(p.base_intensity + 0.45 * p.bias, 0.25, 0.95);
    const double cx = 0.5 * S;
    ellipse(im, cx, 0.52 * S, p.face_rx * S, p.face_ry * S, face_v, 1.0);

    // Brows: au4 lowers and thickens them.
    const double brow_y = (p.eye_y - p.brow_drop + 0.0032 * aus.au4) * S;
    const double brow_th = p.brow_th * S * (1.0 + 0.07 * aus.au4);
    for (int side = -1; side <= 1; side += 2) {
        const double bx = cx + side * p.eye_dx * S;
        stroke(im, bx - p.brow_len * S / 2, brow_y, bx + p.brow_len * S / 2, brow_y, brow_th,
               0.10, 1.0);
    }
    // Glabella crease darkens with au4.
    stroke(im, cx, brow_y - 1.0, cx, p.eye_y * S - 1.0, 2.2, 0.12,
           std::clamp(0.20 * aus.au4, 0.0, 1.0));

    // Eyes: aperture narrows with au6/au7 and collapses when closed.
    const double aperture =
        std::exp(-(0.18 * aus.au6 + 0.22 * aus.au7)) * (aus.au43 >= 0.5 ? 0.15 : 1.0);
    for (int side = -1; side <= 1; side += 2) {
        const double ex = cx + side * p.eye_dx * S;
        ellipse(im, ex, p.eye_y * S, p.eye_w * S, std::max(0.4, p.eye_h * S * aperture), 0.08,
                1.0);
        // Closed-lid line.
        stroke(im, ex - p.eye_w * S, p.eye_y * S, ex + p.eye_w * S, p.eye_y * S, 1.4, 0.2,
               aus.au43 >= 0.5 ? 1.0 : 0.0);
        // Cheek raiser: au6 brightens the cheek patch (distinguishes au6 from au7).
        ellipse(im, ex + side * 0.02 * S, (p.eye_y + 0.13) * S, 0.055 * S, 0.045 * S,
                std::min(1.0, face_v + 0.18), std::clamp(0.20 * aus.au6, 0.0, 1.0));
    }

    // Nose ridge (static) and au9 nasal-root wrinkles.
    stroke(im, cx, (p.nose_y - 0.10) * S, cx, p.nose_y * S, 2.0, 0.38, 1.0);
    const double root_y = (p.eye_y + 0.035) * S;
    const double w9 = std::clamp(0.20 * aus.au9, 0.0, 1.0);
    stroke(im, cx - 0.045 * S, root_y, cx + 0.045 * S, root_y, 1.6, 0.10, w9);
    stroke(im, cx - 0.038 * S, root_y + 2.2, cx + 0.038 * S, root_y + 2.2, 1.6, 0.10, w9);

    // Mouth: au10 raises the upper lip and opens the mouth.
    const double mouth_y = (p.mouth_y - 0.0022 * aus.au10) * S;
    const double mouth_ry = p.mouth_h * S * (1.0 + 0.09 * aus.au10);
    ellipse(im, cx, mouth_y, p.mouth_w * S, mouth_ry, 0.10, 1.0);
    // Nasolabial lines deepen with au10.
    const double w10 = std::clamp(0.20 * aus.au10, 0.0, 1.0);
    for (int side = -1; side <= 1; side += 2) {
        stroke(im, cx + side * 0.05 * S, (p.nose_y + 0.02) * S, cx + side * (p.mouth_w + 0.02) * S,
               mouth_y - 1.0, 1.6, 0.12, w10);
    }

    Rng rng = substream(noise_seed, {0x015eull});
    for (double& v : im.v) v = std::clamp(v + 0.02 * gaussian(rng), 0.0, 1.0);
    return im;
}

namespace {

scales::AUVector sample_aus(Rng& rng) {
    // Pain band with P(band) proportional to 2^-band.
    const double u = u01(rng) * 15.0;
    int band;
    if (u < 8.0) band = 0;
    else if (u < 12.0) band = 1;
    else if (u < 14.0) band = 2;
    else band = 3;

    scales::AUVector aus;
    if (band == 0) return aus;
    const double lo[4] = {0.0, 0.5, 3.0, 8.0};
    const double hi[4] = {0.0, 3.0, 8.0, 14.0};
    double target = uniform(rng, lo[band], hi[band]);

    aus.au43 = (band == 3 || (band == 2 && u01(rng) < 0.3)) ? 1.0 : 0.0;
    target = std::max(0.0, target - aus.au43);

    double w[3];
    double wsum = 0.0;
    for (double& wi : w) {
        wi = 0.15 + u01(rng);
        wsum += wi;
    }
    const double a4 = std::min(5.0, target * w[0] / wsum);
    const double m67 = std::min(5.0, target * w[1] / wsum);
    const double m910 = std::min(5.0, target * w[2] / wsum);
    aus.au4 = a4;
    if (u01(rng) < 0.5) {
        aus.au6 = m67;
        aus.au7 = m67 * u01(rng);
    } else {
        aus.au7 = m67;
        aus.au6 = m67 * u01(rng);
    }
    if (u01(rng) < 0.5) {
        aus.au9 = m910;
        aus.au10 = m910 * u01(rng);
    } else {
        aus.au10 = m910;
        aus.au9 = m910 * u01(rng);
    }
    return aus;
}

scales::PacslacItems pacslac_from_aus(const scales::AUVector& a, double pspi) {
    const double m67 = std::max(a.au6, a.au7);
    const double m910 = std::max(a.au9, a.au10);
    scales::PacslacItems p{};
    p[0] = a.au4 >= 0.5 ? 1.0 : 0.0;
    p[1] = a.au4 >= 2.5 ? 1.0 : 0.0;
    p[2] = m67 >= 0.5 ? 1.0 : 0.0;
    p[3] = m67 >= 2.5 ? 1.0 : 0.0;
    p[4] = m910 >= 0.5 ? 1.0 : 0.0;
    p[5] = m910 >= 2.5 ? 1.0 : 0.0;
    p[6] = a.au43 >= 0.5 ? 1.0 : 0.0;
    p[7] = pspi >= 2.0 ? 1.0 : 0.0;
    p[8] = pspi >= 4.0 ? 1.0 : 0.0;
    p[9] = pspi >= 8.0 ? 1.0 : 0.0;
    p[10] = a.au4 + a.au43 >= 1.0 ? 1.0 : 0.0;
    return p;
}

}  // namespace

SynthDataset gen_dataset(int n_subjects, int frames_per_subject, uint64_t seed, bool bias_mode) {
    if (n_subjects < 2) fail("synth: need at least 2 subjects");
    if (frames_per_subject < 4) fail("synth: need at least 4 frames per subject");
    SynthDataset ds;
    const int zero_frames = std::max(1, int(std::ceil(0.28 * frames_per_subject)));

    for (int s = 0; s < n_subjects; ++s) {
        const SubjectProfile profile = gen_subject(seed, s, bias_mode);
        Rng au_rng = substream(seed, {0xa5u, uint64_t(s)});
        for (int f = 0; f < frames_per_subject; ++f) {
            scales::AUVector aus;
            if (f >= zero_frames) aus = sample_aus(au_rng);
            const double pspi = scales::compute_pspi(aus);

            scales::AnnotationRecord rec;
            rec.dataset = profile.cohort;
            rec.subject_id = profile.subject_id;
            rec.frame_index = f;
            rec.fps = profile.fps;
            rec.aus = aus;
            rec.pspi = pspi;
            if (profile.cohort != scales::DatasetId::UNBC)
                rec.pacslac = pacslac_from_aus(aus, pspi);
            rec.frontal_score = 1.0;
            char buf[48];
            std::snprintf(buf, sizeof buf, "frames/%s_%04d.pgm", profile.subject_id.c_str(), f);
            rec.image_path = buf;

            const uint64_t noise_seed = subseed(seed, {0xf4a3eull, uint64_t(s), uint64_t(f)});
            ds.records.push_back(std::move(rec));
            ds.frames.push_back(render_frame(profile, aus, noise_seed));
        }
    }
    return ds;
}

void write_dataset(const std::string& dir, const SynthDataset& ds) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "frames");
    for (size_t i = 0; i < ds.records.size(); ++i)
        img::write_pgm((fs::path(dir) / ds.records[i].image_path).string(), ds.frames[i]);
    scales::write_annotations((fs::path(dir) / "annotations.csv").string(), ds.records);
}

}  // namespace painpair::synth
