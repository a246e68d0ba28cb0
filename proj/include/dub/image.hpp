#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dub {

/// Planar floating-point image, channel-major layout [c][y][x].
/// Pixel values are nominally in [0,1] for color data and {0,1} for masks,
/// but nothing in this type enforces a range.
struct Image {
    int h = 0, w = 0, c = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h_, int w_, int c_, double fill = 0.0)
        : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_, fill) {}

    static Image zeros(int h, int w, int c) { return Image(h, w, c, 0.0); }

    bool empty() const { return data.empty(); }
    size_t plane() const { return static_cast<size_t>(h) * w; }
    size_t size() const { return data.size(); }

    double& at(int ch, int y, int x) { return data[plane() * ch + static_cast<size_t>(y) * w + x]; }
    double at(int ch, int y, int x) const { return data[plane() * ch + static_cast<size_t>(y) * w + x]; }

    bool same_shape(const Image& o) const { return h == o.h && w == o.w && c == o.c; }

    /// Bilinear sample at continuous (x, y) in pixel coordinates, edge-clamped.
    double sample(int ch, double y, double x) const;
};

/// PPM (P6, c==3) / PGM (P5, c==1) round trip at 8 bits.
void save_pnm(const Image& img, const std::string& path);
Image load_pnm(const std::string& path);

/// Resample the source box [x0,x1)×[y0,y1) onto an oh×ow grid, bilinear,
/// pixel-center aligned: output (i,j) reads source (x0+(j+.5)*sx-.5, ...).
Image crop_bilinear(const Image& src, double x0, double y0, double x1, double y1, int oh, int ow);

Image resize_bilinear(const Image& src, int oh, int ow);

/// Elementwise helpers used across the pipeline.
Image image_abs_diff(const Image& a, const Image& b);
double image_mean(const Image& a);
double image_max_abs_diff(const Image& a, const Image& b);

} // namespace dub
