#pragma once

#include <Eigen/Core>

#include "dub/face_model.hpp"
#include "dub/rasterizer.hpp"

namespace dub {

/// Forward render with every intermediate the backward pass needs.
struct FaceRender {
    Eigen::MatrixXd shaped; // blended, pre-pose
    MeshBundle mesh;
    Eigen::MatrixXd normal_accum;
    Projected proj;
    Eigen::MatrixXd albedo; // V x 3
    Eigen::MatrixXd colors; // V x 3, albedo * SH irradiance
    RasterResult raster;    // attr = interpolated colors
};

struct ParamGrads {
    Eigen::VectorXd shape, expression, pose, texture, lighting, camera;

    static ParamGrads zeros(const FaceModelAssets& assets);
    ParamGrads& operator+=(const ParamGrads& o);
    ParamGrads& operator*=(double s);
};

FaceRender render_face(const FaceParams& params, const FaceModelAssets& assets, int height, int width);

/// Pull an image-space gradient (w.r.t. the rendered RGB) and an optional
/// per-vertex pixel-coordinate gradient (e.g. from a landmark term) back to
/// every parameter block.
ParamGrads render_face_backward(const FaceRender& r, const FaceParams& params, const FaceModelAssets& assets,
                                const Image& d_rgb, const Eigen::MatrixXd* d_pix_extra = nullptr);

} // namespace dub
