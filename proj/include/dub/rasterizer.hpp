#pragma once

#include <Eigen/Core>
#include <vector>

#include "dub/face_model.hpp"
#include "dub/image.hpp"

namespace dub {

/// Output of the hard rasterizer. Coverage is 1 where any front-facing
/// triangle covers the pixel center; attributes and UVs are interpolated
/// with screen-space barycentrics of the nearest covering triangle.
struct RasterResult {
    Image attr;     // A channels
    Image coverage; // 1 channel, {0,1}
    Image uvmap;    // 2 channels
    Image depth;    // 1 channel, camera z (0 where empty)
    std::vector<int> tri_id;            // h*w, -1 where empty
    std::vector<Eigen::Vector3d> bary;  // h*w
    int h = 0, w = 0;
};

/// Rasterize per-vertex attributes (V x A). An empty mesh or a mesh fully
/// behind the camera produces all-background output.
RasterResult rasterize(const MeshBundle& mesh, const Camera& camera, const Eigen::MatrixXd& attributes,
                       int height, int width);

/// Same, with precomputed projection (avoids re-projection inside the fitter).
RasterResult rasterize_projected(const MeshBundle& mesh, const Projected& proj, const Eigen::MatrixXd& attributes,
                                 int height, int width);

/// Backward: pixel-space gradients of the attribute image pulled to the
/// per-vertex attributes and to the screen positions of the covering
/// triangles. Position gradients flow only through covered pixels (hard
/// coverage is treated as constant).
void rasterize_backward(const RasterResult& raster, const Projected& proj,
                        const std::vector<std::array<int, 3>>& faces, const Eigen::MatrixXd& attributes,
                        const Image& d_attr, Eigen::MatrixXd* d_attributes, Eigen::MatrixXd* d_screen);

} // namespace dub
