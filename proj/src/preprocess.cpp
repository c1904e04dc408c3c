#include "painpair/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "painpair/common.hpp"

namespace painpair::prep {

namespace {
constexpr double kPi = std::numbers::pi;
}

int mirror_landmark(int i) {
    if (i <= 16) return 16 - i;                       // jaw
    if (i <= 26) return 17 + 26 - i;                  // brows
    if (i <= 30) return i;                            // nose bridge
    if (i <= 35) return 31 + 35 - i;                  // nostrils
    if (i <= 39) return 45 - (i - 36);                // eye top: 36..39 <-> 45..42
    if (i <= 41) return 47 - (i - 40);                // eye bottom: 40,41 <-> 47,46
    if (i <= 45) return 39 - (i - 42);
    if (i <= 47) return 41 - (i - 46);
    if (i <= 54) return 48 + 54 - i;                  // outer lip top
    if (i <= 59) return 55 + 59 - i;                  // outer lip bottom
    if (i <= 64) return 60 + 64 - i;                  // inner lip top
    return 65 + 67 - i;                               // inner lip bottom
}

LandmarkSet canonical_template() {
    constexpr double S = img::kCanonicalSize;
    const double cx = S / 2.0;
    LandmarkSet t;

    // Jaw: half ellipse from left temple around the chin to the right temple.
    const double jaw_rx = 0.40 * S, jaw_top = 0.30 * S, chin_y = 0.90 * S;
    const double jaw_ry = chin_y - jaw_top;
    for (int i = 0; i <= 16; ++i) {
        const double a = kPi * i / 16.0;             // 0 -> left temple, pi -> right
        t[i] = {cx - jaw_rx * std::cos(a), jaw_top + jaw_ry * std::sin(a) * 0.92 +
                                               0.08 * jaw_ry * std::sin(a) * std::sin(a)};
    }
    // Brows: gentle arcs.
    for (int k = 0; k < 5; ++k) {
        const double u = k / 4.0;
        const double x = 0.16 * S + u * 0.20 * S;
        const double y = 0.26 * S - 0.035 * S * std::sin(kPi * u);
        t[17 + k] = {x, y};
        t[26 - k] = {S - x, y};
    }
    // Nose bridge 27-30 (on the midline), nostril row 31-35.
    for (int k = 0; k < 4; ++k) t[27 + k] = {cx, 0.34 * S + k * 0.065 * S};
    for (int k = 0; k < 5; ++k) {
        const double x = cx + (k - 2) * 0.045 * S;
        const double y = 0.60 * S + 0.012 * S * (k == 0 || k == 4 ? -1.0 : (k == 2 ? 1.0 : 0.4));
        t[31 + k] = {x, y};
    }
    // Eyes: 36-41 right-side-of-image... index 36 is the outer corner of the
    // subject's right eye (image left). 36..39 upper path, 40..41 lower path.
    const double ey = 0.37 * S, ew = 0.075 * S, eh = 0.030 * S, ecx = 0.29 * S;
    const auto eye = [&](int base, double cxe) {
        t[base + 0] = {cxe - ew, ey + 0.15 * eh};
        t[base + 1] = {cxe - 0.45 * ew, ey - eh};
        t[base + 2] = {cxe + 0.45 * ew, ey - eh};
        t[base + 3] = {cxe + ew, ey + 0.15 * eh};
        t[base + 4] = {cxe + 0.45 * ew, ey + eh};
        t[base + 5] = {cxe - 0.45 * ew, ey + eh};
    };
    eye(36, ecx);
    // Mirror for the left eye block 42-47.
    for (int i = 36; i <= 41; ++i) {
        const Point& p = t[i];
        t[mirror_landmark(i)] = {S - p.x, p.y};
    }
    // Mouth: outer ring 48-59 on an ellipse, inner ring 60-67.
    const double my = 0.74 * S, mw = 0.14 * S, mh = 0.055 * S;
    const double top_xs[] = {-1.0, -0.62, -0.25, 0.0, 0.25, 0.62, 1.0};
    for (int k = 0; k < 7; ++k) {
        const double u = top_xs[k];
        const double lift = (k == 3) ? 0.35 : (k == 2 || k == 4) ? 0.95 : (k == 1 || k == 5) ? 0.8 : 0.0;
        t[48 + k] = {cx + u * mw, my - mh * lift};
    }
    const double bot_xs[] = {0.62, 0.25, 0.0, -0.25, -0.62};
    for (int k = 0; k < 5; ++k)
        t[55 + k] = {cx + bot_xs[k] * mw, my + mh * (k == 2 ? 1.0 : 0.82)};
    const double iw = 0.105 * S, ih = 0.022 * S;
    const double itop[] = {-1.0, -0.45, 0.0, 0.45, 1.0};
    for (int k = 0; k < 5; ++k)
        t[60 + k] = {cx + itop[k] * iw, my - ih * (k == 0 || k == 4 ? 0.0 : 1.0)};
    const double ibot[] = {0.45, 0.0, -0.45};
    for (int k = 0; k < 3; ++k) t[65 + k] = {cx + ibot[k] * iw, my + ih};

    // Enforce exact mirror symmetry (construction is symmetric, but make the
    // left/right halves bit-identical).
    for (int i = 0; i < kNumLandmarks; ++i) {
        const int j = mirror_landmark(i);
        if (j > i) {
            t[j].x = S - t[i].x;
            t[j].y = t[i].y;
        } else if (j == i) {
            t[i].x = cx;
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// Bowyer-Watson Delaunay triangulation.

namespace {

struct TriRec {
    int a, b, c;
    double ccx, ccy, r2;  // circumcircle
    bool alive = true;
};

bool circumcircle(const Point& A, const Point& B, const Point& C, double& cx, double& cy,
                  double& r2) {
    const double d = 2.0 * (A.x * (B.y - C.y) + B.x * (C.y - A.y) + C.x * (A.y - B.y));
    if (std::fabs(d) < 1e-12) return false;
    const double a2 = A.x * A.x + A.y * A.y;
    const double b2 = B.x * B.x + B.y * B.y;
    const double c2 = C.x * C.x + C.y * C.y;
    cx = (a2 * (B.y - C.y) + b2 * (C.y - A.y) + c2 * (A.y - B.y)) / d;
    cy = (a2 * (C.x - B.x) + b2 * (A.x - C.x) + c2 * (B.x - A.x)) / d;
    const double dx = A.x - cx, dy = A.y - cy;
    r2 = dx * dx + dy * dy;
    return true;
}

}  // namespace

std::vector<Triangle> delaunay(const LandmarkSet& pts) {
    std::vector<Point> p(pts.pts.begin(), pts.pts.end());
    double minx = p[0].x, maxx = p[0].x, miny = p[0].y, maxy = p[0].y;
    for (const auto& q : p) {
        minx = std::min(minx, q.x);
        maxx = std::max(maxx, q.x);
        miny = std::min(miny, q.y);
        maxy = std::max(maxy, q.y);
    }
    const double span = std::max(maxx - minx, maxy - miny) * 20.0 + 1.0;
    const double mx = (minx + maxx) / 2.0, my = (miny + maxy) / 2.0;
    // Super-triangle vertices get indices n, n+1, n+2.
    const int n = int(p.size());
    p.push_back({mx - span, my - 0.4 * span});
    p.push_back({mx + span, my - 0.4 * span});
    p.push_back({mx, my + span});

    std::vector<TriRec> tris;
    const auto push_tri = [&](int a, int b, int c) {
        TriRec t{a, b, c, 0, 0, 0, true};
        if (!circumcircle(p[size_t(a)], p[size_t(b)], p[size_t(c)], t.ccx, t.ccy, t.r2))
            return;  // degenerate, drop
        tris.push_back(t);
    };
    push_tri(n, n + 1, n + 2);

    for (int i = 0; i < n; ++i) {
        // Edges of the cavity: boundary edges appear once among bad triangles.
        std::vector<std::pair<int, int>> edges;
        for (auto& t : tris) {
            if (!t.alive) continue;
            const double dx = p[size_t(i)].x - t.ccx, dy = p[size_t(i)].y - t.ccy;
            if (dx * dx + dy * dy < t.r2 * (1.0 - 1e-12)) {
                t.alive = false;
                edges.emplace_back(t.a, t.b);
                edges.emplace_back(t.b, t.c);
                edges.emplace_back(t.c, t.a);
            }
        }
        std::vector<std::pair<int, int>> boundary;
        for (size_t e = 0; e < edges.size(); ++e) {
            bool shared = false;
            for (size_t f = 0; f < edges.size(); ++f) {
                if (e == f) continue;
                if ((edges[e].first == edges[f].second && edges[e].second == edges[f].first) ||
                    (edges[e].first == edges[f].first && edges[e].second == edges[f].second)) {
                    shared = true;
                    break;
                }
            }
            if (!shared) boundary.push_back(edges[e]);
        }
        for (const auto& [a, b] : boundary) push_tri(a, b, i);
        // Compact occasionally to keep the scan cheap.
        if (tris.size() > 4096) {
            std::vector<TriRec> keep;
            keep.reserve(tris.size());
            for (const auto& t : tris)
                if (t.alive) keep.push_back(t);
            tris.swap(keep);
        }
    }

    std::vector<Triangle> out;
    for (const auto& t : tris) {
        if (!t.alive) continue;
        if (t.a >= n || t.b >= n || t.c >= n) continue;  // touches super-triangle
        out.push_back({t.a, t.b, t.c});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Piecewise affine warp.

FrontalizeResult frontalize(const img::Image& source, const LandmarkSet& landmarks,
                            const LandmarkSet& templ) {
    if (source.h < 2 || source.w < 2) fail("frontalize: source image too small");
    FrontalizeResult res;
    res.image = img::Image(img::kCanonicalSize, img::kCanonicalSize, 0.0);

    const std::vector<Triangle> tris = delaunay(templ);

    // Per-triangle affine map from template coords to source coords, solved
    // from the three vertex correspondences.
    struct Affine {
        double m[6];  // sx = m0*x + m1*y + m2 ; sy = m3*x + m4*y + m5
        bool ok;
    };
    std::vector<Affine> maps(tris.size());
    for (size_t t = 0; t < tris.size(); ++t) {
        const Point& A = templ[tris[t].a];
        const Point& B = templ[tris[t].b];
        const Point& C = templ[tris[t].c];
        const Point& a = landmarks[tris[t].a];
        const Point& b = landmarks[tris[t].b];
        const Point& c = landmarks[tris[t].c];
        const double det = (B.x - A.x) * (C.y - A.y) - (C.x - A.x) * (B.y - A.y);
        const double sdet = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
        if (std::fabs(det) < 1e-12 || std::fabs(sdet) < 1e-12) {
            maps[t].ok = false;
            ++res.degenerate_triangles;
            continue;
        }
        // Barycentric basis of the template triangle composed with the source
        // vertex positions gives the affine coefficients directly.
        const double i00 = (C.y - A.y) / det, i01 = (A.x - C.x) / det;
        const double i10 = (A.y - B.y) / det, i11 = (B.x - A.x) / det;
        Affine& f = maps[t];
        f.ok = true;
        f.m[0] = (b.x - a.x) * i00 + (c.x - a.x) * i10;
        f.m[1] = (b.x - a.x) * i01 + (c.x - a.x) * i11;
        f.m[3] = (b.y - a.y) * i00 + (c.y - a.y) * i10;
        f.m[4] = (b.y - a.y) * i01 + (c.y - a.y) * i11;
        f.m[2] = a.x - f.m[0] * A.x - f.m[1] * A.y;
        f.m[5] = a.y - f.m[3] * A.x - f.m[4] * A.y;
    }

    std::vector<uint8_t> assigned(res.image.size(), 0);
    constexpr double kBaryEps = 1e-9;
    for (size_t t = 0; t < tris.size(); ++t) {
        const Point& A = templ[tris[t].a];
        const Point& B = templ[tris[t].b];
        const Point& C = templ[tris[t].c];
        const double det = (B.x - A.x) * (C.y - A.y) - (C.x - A.x) * (B.y - A.y);
        if (std::fabs(det) < 1e-12) continue;
        const int x0 = std::max(0, int(std::floor(std::min({A.x, B.x, C.x}))));
        const int x1 = std::min(img::kCanonicalSize - 1, int(std::ceil(std::max({A.x, B.x, C.x}))));
        const int y0 = std::max(0, int(std::floor(std::min({A.y, B.y, C.y}))));
        const int y1 = std::min(img::kCanonicalSize - 1, int(std::ceil(std::max({A.y, B.y, C.y}))));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const size_t pix = size_t(y) * img::kCanonicalSize + x;
                if (assigned[pix]) continue;
                const double l1 = ((B.x - x) * (C.y - y) - (C.x - x) * (B.y - y)) / det;
                const double l2 = ((C.x - x) * (A.y - y) - (A.x - x) * (C.y - y)) / det;
                const double l3 = 1.0 - l1 - l2;
                if (l1 < -kBaryEps || l2 < -kBaryEps || l3 < -kBaryEps) continue;
                assigned[pix] = 1;
                if (!maps[t].ok) continue;  // degenerate source triangle stays 0
                const double* m = maps[t].m;
                const double sx = m[0] * x + m[1] * y + m[2];
                const double sy = m[3] * x + m[4] * y + m[5];
                res.image.v[pix] = img::sample_bilinear(source, sx, sy);
            }
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// CLAHE.

namespace {

constexpr int kBins = 256;

inline int bin_of(double v) { return std::min(kBins - 1, int(std::clamp(v, 0.0, 1.0) * kBins)); }

}  // namespace

img::Image clahe(const img::Image& image, double clip_limit, int tiles) {
    if (!(clip_limit > 0)) fail("clahe: clip_limit must be positive");
    if (tiles < 1) fail("clahe: tiles must be >= 1");
    if (image.h < tiles || image.w < tiles) fail("clahe: image smaller than tile grid");

    // Tile extents; the last tile absorbs the remainder.
    std::vector<int> ys(size_t(tiles) + 1), xs(size_t(tiles) + 1);
    for (int t = 0; t <= tiles; ++t) {
        ys[size_t(t)] = (t == tiles) ? image.h : t * (image.h / tiles);
        xs[size_t(t)] = (t == tiles) ? image.w : t * (image.w / tiles);
    }

    // Per-tile clipped-histogram transfer functions, mapping bin -> (0,1].
    std::vector<std::vector<double>> transfer(size_t(tiles) * tiles,
                                              std::vector<double>(kBins, 0.0));
    std::vector<double> centers_y(tiles, 0.0), centers_x(tiles, 0.0);
    for (int ty = 0; ty < tiles; ++ty) {
        for (int tx = 0; tx < tiles; ++tx) {
            double hist[kBins] = {0};
            const long npix = long(ys[size_t(ty) + 1] - ys[size_t(ty)]) *
                              (xs[size_t(tx) + 1] - xs[size_t(tx)]);
            for (int y = ys[size_t(ty)]; y < ys[size_t(ty) + 1]; ++y)
                for (int x = xs[size_t(tx)]; x < xs[size_t(tx) + 1]; ++x)
                    hist[bin_of(image.at(y, x))] += 1.0;
            if (std::isfinite(clip_limit)) {
                const double limit = clip_limit * double(npix) / kBins;
                double excess = 0.0;
                for (double& hb : hist)
                    if (hb > limit) {
                        excess += hb - limit;
                        hb = limit;
                    }
                const double add = excess / kBins;
                for (double& hb : hist) hb += add;
            }
            auto& tf = transfer[size_t(ty) * tiles + tx];
            double cum = 0.0;
            for (int b = 0; b < kBins; ++b) {
                cum += hist[b];
                tf[size_t(b)] = cum / double(npix);
            }
        }
    }
    for (int t = 0; t < tiles; ++t) {
        centers_y[size_t(t)] = (ys[size_t(t)] + ys[size_t(t) + 1] - 1) / 2.0;
        centers_x[size_t(t)] = (xs[size_t(t)] + xs[size_t(t) + 1] - 1) / 2.0;
    }

    // Bilinear blend of the four surrounding tile transfer functions.
    img::Image out(image.h, image.w);
    for (int y = 0; y < image.h; ++y) {
        int ty0 = 0;
        while (ty0 + 1 < tiles && centers_y[size_t(ty0) + 1] <= y) ++ty0;
        int ty1 = std::min(ty0 + 1, tiles - 1);
        if (y < centers_y[0]) ty1 = 0;
        double wy = 0.0;
        if (ty1 > ty0 && centers_y[size_t(ty1)] > centers_y[size_t(ty0)])
            wy = std::clamp((y - centers_y[size_t(ty0)]) /
                                (centers_y[size_t(ty1)] - centers_y[size_t(ty0)]),
                            0.0, 1.0);
        for (int x = 0; x < image.w; ++x) {
            int tx0 = 0;
            while (tx0 + 1 < tiles && centers_x[size_t(tx0) + 1] <= x) ++tx0;
            int tx1 = std::min(tx0 + 1, tiles - 1);
            if (x < centers_x[0]) tx1 = 0;
            double wx = 0.0;
            if (tx1 > tx0 && centers_x[size_t(tx1)] > centers_x[size_t(tx0)])
                wx = std::clamp((x - centers_x[size_t(tx0)]) /
                                    (centers_x[size_t(tx1)] - centers_x[size_t(tx0)]),
                                0.0, 1.0);
            const int b = bin_of(image.at(y, x));
            const double v00 = transfer[size_t(ty0) * tiles + tx0][size_t(b)];
            const double v01 = transfer[size_t(ty0) * tiles + tx1][size_t(b)];
            const double v10 = transfer[size_t(ty1) * tiles + tx0][size_t(b)];
            const double v11 = transfer[size_t(ty1) * tiles + tx1][size_t(b)];
            out.at(y, x) = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Landmark sidecars.

LandmarkSet load_landmarks(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("landmarks: cannot open '" + path + "'");
    LandmarkSet set;
    std::string line;
    int i = 0;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        if (i >= kNumLandmarks) fail("landmarks: '" + path + "' has more than 68 rows");
        const auto cells = split(line, ',');
        if (cells.size() != 2)
            fail("landmarks: '" + path + "' row " + std::to_string(lineno) + ": expected x,y");
        const std::string ctx = "landmarks: '" + path + "' row " + std::to_string(lineno);
        set[i].x = parse_double(cells[0], ctx);
        set[i].y = parse_double(cells[1], ctx);
        if (!std::isfinite(set[i].x) || !std::isfinite(set[i].y)) fail(ctx + ": non-finite point");
        ++i;
    }
    if (i != kNumLandmarks)
        fail("landmarks: '" + path + "' has " + std::to_string(i) + " rows, expected 68");
    return set;
}

std::map<std::string, LandmarkSet> load_landmark_table(const std::string& path) {
    const Csv csv = read_csv(path);
    if (csv.header.size() != 1 + 2 * kNumLandmarks || csv.header[0] != "image_path")
        fail("landmarks: '" + path + "' table needs image_path,x0,y0,...,x67,y67");
    std::map<std::string, LandmarkSet> out;
    for (size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        const std::string ctx = "landmarks: '" + path + "' row " + std::to_string(r + 2);
        LandmarkSet set;
        for (int i = 0; i < kNumLandmarks; ++i) {
            set[i].x = parse_double(row[size_t(1 + 2 * i)], ctx);
            set[i].y = parse_double(row[size_t(2 + 2 * i)], ctx);
        }
        out[row[0]] = set;
    }
    return out;
}

}  // namespace painpair::prep
