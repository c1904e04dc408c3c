#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "painpair/image.hpp"
#include "painpair/scales.hpp"

namespace painpair::synth {

/// Resting geometry and appearance of one synthetic subject. Lengths are
/// fractions of the canonical frame size.
struct SubjectProfile {
    std::string subject_id;
    scales::DatasetId cohort = scales::DatasetId::Dementia;
    double fps = 15.0;
    double face_rx = 0.34, face_ry = 0.42;
    double eye_y = 0.38, eye_dx = 0.18, eye_w = 0.065, eye_h = 0.024;
    double brow_drop = 0.085;  // brow sits this far above the eyes
    double brow_len = 0.12, brow_th = 0.011;
    double mouth_y = 0.73, mouth_w = 0.13, mouth_h = 0.017;
    double nose_y = 0.55;
    double base_intensity = 0.65;
    double bias = 0.0;  // appearance offset; large only in bias mode
};

/// Deterministic profile for subject `index`; cohorts cycle
/// Dementia/Control/UNBC. bias_mode widens the geometry ranges and injects a
/// strong per-subject brightness offset.
SubjectProfile gen_subject(uint64_t seed, int index, bool bias_mode);

/// 96x96 grayscale face proxy. Monotone pixel effects per AU: au4 lowers and
/// thickens the brows and darkens the glabella, au6/au7 narrow the eye
/// aperture (au6 also brightens the cheeks), au9 darkens the nasal root,
/// au10 raises/opens the mouth and darkens the nasolabial lines, au43
/// collapses the eye aperture.
img::Image render_frame(const SubjectProfile& profile, const scales::AUVector& aus,
                        uint64_t noise_seed);

struct SynthDataset {
    std::vector<scales::AnnotationRecord> records;
    std::vector<img::Image> frames;
};

/// Per subject: the leading ~28% of frames rest at PSPI 0, the rest draw a
/// pain band with P(band) proportional to 2^-band, so the PSPI histogram
/// decreases with intensity. Every stored pspi equals compute_pspi of the
/// stored AUs.
SynthDataset gen_dataset(int n_subjects, int frames_per_subject, uint64_t seed, bool bias_mode);

/// Writes frames/<subject>_<frame>.pgm plus annotations.csv under dir; the
/// layout matches what load_dataset ingests. Byte-identical across runs.
void write_dataset(const std::string& dir, const SynthDataset& ds);

}  // namespace painpair::synth
