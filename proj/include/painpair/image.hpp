#pragma once

#include <string>
#include <vector>

#include "painpair/common.hpp"

namespace painpair::img {

/// Frames are canonical 96x96 grayscale after preprocessing.
constexpr int kCanonicalSize = 96;

/// Grayscale intensity grid, row-major, values in [0,1].
struct Image {
    int h = 0, w = 0;
    std::vector<double> v;

    Image() = default;
    Image(int height, int width, double fill = 0.0)
        : h(height), w(width), v(size_t(height) * width, fill) {}

    double& at(int y, int x) { return v[size_t(y) * w + x]; }
    double at(int y, int x) const { return v[size_t(y) * w + x]; }
    size_t size() const { return v.size(); }
};

inline bool is_canonical(const Image& im) {
    return im.h == kCanonicalSize && im.w == kCanonicalSize;
}

inline void require_canonical(const Image& im, const std::string& what) {
    if (!is_canonical(im))
        fail(what + ": expected " + std::to_string(kCanonicalSize) + "x" +
             std::to_string(kCanonicalSize) + " frame, got " + std::to_string(im.h) + "x" +
             std::to_string(im.w));
}

/// Bilinear sample with border clamp; (x, y) in pixel coordinates where the
/// sample point of pixel (row, col) is (x=col, y=row).
double sample_bilinear(const Image& im, double x, double y);

// 8-bit binary PGM (P5). Values are quantized with round(v * 255).
void write_pgm(const std::string& path, const Image& im);
Image read_pgm(const std::string& path);

}  // namespace painpair::img
