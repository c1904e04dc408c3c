#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "painpair/image.hpp"

namespace painpair::contrast {

img::Image vertical_flip(const img::Image& in);

/// Simard-style elastic distortion: per-pixel uniform displacements in
/// [-1,1] (x field first, then y, row-major draws), Gaussian-smoothed with
/// std sigma (zero-padded borders), scaled by alpha, resampled bilinearly
/// with border clamping.
img::Image elastic_transform(const img::Image& in, double alpha, double sigma, uint64_t seed);

/// OOD pair: vertical flip then elastic transform with one shared
/// displacement field for both frames, so the pair stays geometrically
/// consistent while no longer resembling an upright face.
std::pair<img::Image, img::Image> make_ood(const img::Image& ref, const img::Image& tgt,
                                           double alpha, double sigma, uint64_t seed);

struct ContrastiveResult {
    double value = 0.0;
    long anomalies = 0;  // norms floored at 1e-12
};

/// Mean over heads and batch of |cos(f_ood, w_col)| - |cos(f_id, w_col)|.
/// f_id/f_ood: batch x 200 row-major; w: 200 x 39 row-major (column = head).
ContrastiveResult contrastive_loss(const std::vector<double>& f_id,
                                   const std::vector<double>& f_ood, long batch,
                                   const std::vector<double>& w);

/// As contrastive_loss, additionally accumulating scale * d(loss)/d(...)
/// into d_id, d_ood (batch x 200) and dw (200 x 39).
ContrastiveResult contrastive_loss_backward(const std::vector<double>& f_id,
                                            const std::vector<double>& f_ood, long batch,
                                            const std::vector<double>& w, double scale,
                                            std::vector<double>& d_id, std::vector<double>& d_ood,
                                            std::vector<double>& dw);

inline double total_loss(double regression, double contrastive, double c) {
    return regression + c * contrastive;
}

}  // namespace painpair::contrast
