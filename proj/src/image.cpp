#include "painpair/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace painpair::img {

double sample_bilinear(const Image& im, double x, double y) {
    x = std::clamp(x, 0.0, double(im.w - 1));
    y = std::clamp(y, 0.0, double(im.h - 1));
    const int x0 = std::min(int(x), im.w - 2 >= 0 ? im.w - 2 : 0);
    const int y0 = std::min(int(y), im.h - 2 >= 0 ? im.h - 2 : 0);
    const int x1 = std::min(x0 + 1, im.w - 1);
    const int y1 = std::min(y0 + 1, im.h - 1);
    const double fx = x - x0, fy = y - y0;
    return (1 - fy) * ((1 - fx) * im.at(y0, x0) + fx * im.at(y0, x1)) +
           fy * ((1 - fx) * im.at(y1, x0) + fx * im.at(y1, x1));
}

void write_pgm(const std::string& path, const Image& im) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("pgm: cannot write '" + path + "'");
    out << "P5\n" << im.w << " " << im.h << "\n255\n";
    std::vector<unsigned char> bytes(im.size());
    for (size_t i = 0; i < im.size(); ++i) {
        const double q = std::round(std::clamp(im.v[i], 0.0, 1.0) * 255.0);
        bytes[i] = static_cast<unsigned char>(q);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) fail("pgm: short write on '" + path + "'");
}

namespace {

int next_pgm_int(std::istream& in, const std::string& path) {
    // Skips whitespace and '#' comment lines, per the PGM header grammar.
    int c = in.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#')
            while (c != EOF && c != '\n') c = in.get();
        c = in.get();
    }
    int value = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) fail("pgm: malformed header in '" + path + "'");
    return value;
}

}  // namespace

Image read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("pgm: cannot open '" + path + "'");
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || m1 != '5') fail("pgm: '" + path + "' is not a binary P5 file");
    const int w = next_pgm_int(in, path);
    const int h = next_pgm_int(in, path);
    const int maxval = next_pgm_int(in, path);
    if (maxval != 255) fail("pgm: '" + path + "' maxval " + std::to_string(maxval) + " unsupported");
    Image im(h, w);
    std::vector<unsigned char> bytes(im.size());
    in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size()));
    if (in.gcount() != std::streamsize(bytes.size()))
        fail("pgm: '" + path + "' truncated pixel data");
    for (size_t i = 0; i < im.size(); ++i) im.v[i] = bytes[i] / 255.0;
    return im;
}

}  // namespace painpair::img
