#include "dub/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "dub/errors.hpp"

namespace dub {

double Image::sample(int ch, double y, double x) const {
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    int x1 = std::min(x0 + 1, w - 1);
    int y1 = std::min(y0 + 1, h - 1);
    double fx = x - x0, fy = y - y0;
    double v00 = at(ch, y0, x0), v01 = at(ch, y0, x1);
    double v10 = at(ch, y1, x0), v11 = at(ch, y1, x1);
    return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

static uint8_t to_byte(double v) {
    double s = std::round(v * 255.0);
    return static_cast<uint8_t>(std::clamp(s, 0.0, 255.0));
}

void save_pnm(const Image& img, const std::string& path) {
    if (img.c != 1 && img.c != 3) throw IoError("save_pnm: channel count must be 1 or 3");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_pnm: cannot open " + path);
    f << (img.c == 3 ? "P6" : "P5") << "\n" << img.w << " " << img.h << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(img.w) * img.c);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < img.c; ++ch) row[static_cast<size_t>(x) * img.c + ch] = to_byte(img.at(ch, y, x));
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw IoError("save_pnm: write failed for " + path);
}

Image load_pnm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_pnm: cannot open " + path);
    std::string magic;
    f >> magic;
    int c = 0;
    if (magic == "P6") c = 3;
    else if (magic == "P5") c = 1;
    else throw IoError("load_pnm: unsupported magic '" + magic + "' in " + path);

    auto next_int = [&f, &path]() {
        // skip whitespace and '#' comments
        int ch = f.peek();
        while (ch == ' ' || ch == '\n' || ch == '\r' || ch == '\t' || ch == '#') {
            if (ch == '#') {
                std::string line;
                std::getline(f, line);
            } else {
                f.get();
            }
            ch = f.peek();
        }
        int v = 0;
        f >> v;
        if (!f) throw IoError("load_pnm: truncated header in " + path);
        return v;
    };
    int w = next_int();
    int h = next_int();
    int maxval = next_int();
    if (maxval != 255) throw IoError("load_pnm: only maxval 255 supported");
    f.get(); // single whitespace after header

    Image img(h, w, c);
    std::vector<uint8_t> row(static_cast<size_t>(w) * c);
    for (int y = 0; y < h; ++y) {
        f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!f) throw IoError("load_pnm: truncated pixel data in " + path);
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) img.at(ch, y, x) = row[static_cast<size_t>(x) * c + ch] / 255.0;
    }
    return img;
}

Image crop_bilinear(const Image& src, double x0, double y0, double x1, double y1, int oh, int ow) {
    if (ow <= 0 || oh <= 0 || x1 <= x0 || y1 <= y0) throw ConfigError("crop_bilinear: degenerate box or size");
    Image out(oh, ow, src.c);
    double sx = (x1 - x0) / ow;
    double sy = (y1 - y0) / oh;
    for (int ch = 0; ch < src.c; ++ch)
        for (int i = 0; i < oh; ++i) {
            double srcy = y0 + (i + 0.5) * sy - 0.5;
            for (int j = 0; j < ow; ++j) {
                double srcx = x0 + (j + 0.5) * sx - 0.5;
                out.at(ch, i, j) = src.sample(ch, srcy, srcx);
            }
        }
    return out;
}

Image resize_bilinear(const Image& src, int oh, int ow) {
    return crop_bilinear(src, 0, 0, src.w, src.h, oh, ow);
}

Image image_abs_diff(const Image& a, const Image& b) {
    Image out(a.h, a.w, a.c);
    for (size_t i = 0; i < a.size(); ++i) out.data[i] = std::abs(a.data[i] - b.data[i]);
    return out;
}

double image_mean(const Image& a) {
    if (a.empty()) return 0.0;
    double s = 0;
    for (double v : a.data) s += v;
    return s / static_cast<double>(a.size());
}

double image_max_abs_diff(const Image& a, const Image& b) {
    double m = 0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

} // namespace dub
