#include "dub/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dub/errors.hpp"

namespace dub {

static inline double edge_fn(double ax, double ay, double bx, double by, double px, double py) {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

RasterResult rasterize_projected(const MeshBundle& mesh, const Projected& proj, const Eigen::MatrixXd& attributes,
                                 int height, int width) {
    if (height <= 0 || width <= 0) throw ConfigError("rasterize: resolution must be positive");
    if (attributes.rows() != mesh.vertices.rows() && mesh.vertices.rows() > 0)
        throw ConfigError("rasterize: attributes must be per-vertex");

    const int A = static_cast<int>(attributes.cols());
    RasterResult out;
    out.h = height;
    out.w = width;
    out.attr = Image(height, width, std::max(A, 1));
    out.coverage = Image(height, width, 1);
    out.uvmap = Image(height, width, 2);
    out.depth = Image(height, width, 1);
    out.tri_id.assign(static_cast<size_t>(height) * width, -1);
    out.bary.assign(static_cast<size_t>(height) * width, Eigen::Vector3d::Zero());

    std::vector<double> zbuf(static_cast<size_t>(height) * width, std::numeric_limits<double>::infinity());

    for (size_t t = 0; t < mesh.faces.size(); ++t) {
        const auto& f = mesh.faces[t];
        if (!proj.valid[static_cast<size_t>(f[0])] || !proj.valid[static_cast<size_t>(f[1])] ||
            !proj.valid[static_cast<size_t>(f[2])])
            continue;
        double x0 = proj.pix(f[0], 0), y0 = proj.pix(f[0], 1);
        double x1 = proj.pix(f[1], 0), y1 = proj.pix(f[1], 1);
        double x2 = proj.pix(f[2], 0), y2 = proj.pix(f[2], 1);
        double area = edge_fn(x0, y0, x1, y1, x2, y2);
        if (std::abs(area) < 1e-14) continue;

        int minx = std::max(0, static_cast<int>(std::floor(std::min({x0, x1, x2}) - 0.5)));
        int maxx = std::min(width - 1, static_cast<int>(std::ceil(std::max({x0, x1, x2}) - 0.5)));
        int miny = std::max(0, static_cast<int>(std::floor(std::min({y0, y1, y2}) - 0.5)));
        int maxy = std::min(height - 1, static_cast<int>(std::ceil(std::max({y0, y1, y2}) - 0.5)));

        for (int py = miny; py <= maxy; ++py) {
            double cy = py + 0.5;
            for (int px = minx; px <= maxx; ++px) {
                double cx = px + 0.5;
                double n0 = edge_fn(x1, y1, x2, y2, cx, cy);
                double n1 = edge_fn(x2, y2, x0, y0, cx, cy);
                double n2 = edge_fn(x0, y0, x1, y1, cx, cy);
                double b0 = n0 / area, b1 = n1 / area, b2 = n2 / area;
                if (b0 < 0 || b1 < 0 || b2 < 0) continue;
                double z = b0 * proj.depth[f[0]] + b1 * proj.depth[f[1]] + b2 * proj.depth[f[2]];
                size_t idx = static_cast<size_t>(py) * width + px;
                if (z <= 0 || z >= zbuf[idx]) continue;
                zbuf[idx] = z;
                out.tri_id[idx] = static_cast<int>(t);
                out.bary[idx] = Eigen::Vector3d(b0, b1, b2);
                out.coverage.at(0, py, px) = 1.0;
                out.depth.at(0, py, px) = z;
                for (int a = 0; a < A; ++a)
                    out.attr.at(a, py, px) =
                        b0 * attributes(f[0], a) + b1 * attributes(f[1], a) + b2 * attributes(f[2], a);
                if (mesh.uv.rows() == mesh.vertices.rows())
                    for (int k = 0; k < 2; ++k)
                        out.uvmap.at(k, py, px) =
                            b0 * mesh.uv(f[0], k) + b1 * mesh.uv(f[1], k) + b2 * mesh.uv(f[2], k);
            }
        }
    }
    return out;
}

RasterResult rasterize(const MeshBundle& mesh, const Camera& camera, const Eigen::MatrixXd& attributes,
                       int height, int width) {
    Projected proj;
    if (mesh.vertices.rows() > 0) proj = project(mesh, camera);
    return rasterize_projected(mesh, proj, attributes, height, width);
}

void rasterize_backward(const RasterResult& raster, const Projected& proj,
                        const std::vector<std::array<int, 3>>& faces, const Eigen::MatrixXd& attributes,
                        const Image& d_attr, Eigen::MatrixXd* d_attributes, Eigen::MatrixXd* d_screen) {
    const int A = static_cast<int>(attributes.cols());
    for (int py = 0; py < raster.h; ++py)
        for (int px = 0; px < raster.w; ++px) {
            size_t idx = static_cast<size_t>(py) * raster.w + px;
            int t = raster.tri_id[idx];
            if (t < 0) continue;
            const auto& f = faces[static_cast<size_t>(t)];
            const Eigen::Vector3d& b = raster.bary[idx];

            // gradient pulled through the interpolated value per barycentric weight
            double gb[3] = {0, 0, 0};
            for (int a = 0; a < A; ++a) {
                double g = d_attr.at(a, py, px);
                if (g == 0.0) continue;
                if (d_attributes)
                    for (int k = 0; k < 3; ++k) (*d_attributes)(f[static_cast<size_t>(k)], a) += b[k] * g;
                for (int k = 0; k < 3; ++k) gb[k] += g * attributes(f[static_cast<size_t>(k)], a);
            }
            if (!d_screen || (gb[0] == 0 && gb[1] == 0 && gb[2] == 0)) continue;

            double x0 = proj.pix(f[0], 0), y0 = proj.pix(f[0], 1);
            double x1 = proj.pix(f[1], 0), y1 = proj.pix(f[1], 1);
            double x2 = proj.pix(f[2], 0), y2 = proj.pix(f[2], 1);
            double cx = px + 0.5, cy = py + 0.5;
            double area = edge_fn(x0, y0, x1, y1, x2, y2);
            double inv_area = 1.0 / area;

            // dA/d(coords)
            double dA[6] = {y1 - y2, x2 - x1, y2 - y0, x0 - x2, y0 - y1, x1 - x0};
            // dN_k/d(coords); N_k independent of vertex k
            double dN0[6] = {0, 0, y2 - cy, cx - x2, cy - y1, x1 - cx};
            double dN1[6] = {cy - y2, x2 - cx, 0, 0, y0 - cy, cx - x0};
            double dN2[6] = {y1 - cy, cx - x1, cy - y0, x0 - cx, 0, 0};
            const double* dN[3] = {dN0, dN1, dN2};

            for (int q = 0; q < 6; ++q) {
                double acc = 0;
                for (int k = 0; k < 3; ++k) acc += gb[k] * (dN[k][q] - b[k] * dA[q]) * inv_area;
                (*d_screen)(f[static_cast<size_t>(q / 2)], q % 2) += acc;
            }
        }
}

} // namespace dub
