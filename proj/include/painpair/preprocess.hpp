#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "painpair/image.hpp"

namespace painpair::prep {

struct Point {
    double x = 0, y = 0;
};

constexpr int kNumLandmarks = 68;

/// 68 (x, y) points in the standard face topology ordering: jaw 0-16,
/// brows 17-26, nose 27-35, eyes 36-47, mouth 48-67.
struct LandmarkSet {
    std::array<Point, kNumLandmarks> pts{};

    Point& operator[](int i) { return pts[size_t(i)]; }
    const Point& operator[](int i) const { return pts[size_t(i)]; }
};

/// Index of the mirror counterpart of landmark i under a left/right flip.
int mirror_landmark(int i);

/// Fixed upright template spanning the canonical frame with a 10% margin,
/// exactly symmetric about the vertical midline.
LandmarkSet canonical_template();

struct Triangle {
    int a, b, c;  // landmark indices
};

/// Delaunay triangulation (Bowyer-Watson). Deterministic for a fixed input.
std::vector<Triangle> delaunay(const LandmarkSet& pts);

struct FrontalizeResult {
    img::Image image;                // canonical size, zeros outside the hull
    int degenerate_triangles = 0;    // collinear source triangles skipped
};

/// Piecewise affine warp: triangulates the template, maps each source
/// triangle onto its template counterpart, samples bilinearly.
FrontalizeResult frontalize(const img::Image& source, const LandmarkSet& landmarks,
                            const LandmarkSet& templ);

/// Contrast limited adaptive histogram equalization. clip_limit is relative
/// to the uniform bin height; pass infinity to disable clipping. The
/// rightmost/bottom tiles absorb any remainder when the image size is not
/// divisible by the tile count.
img::Image clahe(const img::Image& image, double clip_limit = 2.0, int tiles = 8);

// Landmark sidecars: either one CSV per frame (68 rows of "x,y", no header)
// or a single table keyed by image_path with columns
// image_path,x0,y0,...,x67,y67.
LandmarkSet load_landmarks(const std::string& path);
std::map<std::string, LandmarkSet> load_landmark_table(const std::string& path);

}  // namespace painpair::prep
