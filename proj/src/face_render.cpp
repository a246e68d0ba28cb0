#include "dub/face_render.hpp"

namespace dub {

ParamGrads ParamGrads::zeros(const FaceModelAssets& assets) {
    ParamGrads g;
    g.shape = Eigen::VectorXd::Zero(assets.Ns);
    g.expression = Eigen::VectorXd::Zero(assets.Ne);
    g.pose = Eigen::VectorXd::Zero(Pose::kDims);
    g.texture = Eigen::VectorXd::Zero(assets.Nt);
    g.lighting = Eigen::VectorXd::Zero(9);
    g.camera = Eigen::VectorXd::Zero(Camera::kDims);
    return g;
}

ParamGrads& ParamGrads::operator+=(const ParamGrads& o) {
    shape += o.shape;
    expression += o.expression;
    pose += o.pose;
    texture += o.texture;
    lighting += o.lighting;
    camera += o.camera;
    return *this;
}

ParamGrads& ParamGrads::operator*=(double s) {
    shape *= s;
    expression *= s;
    pose *= s;
    texture *= s;
    lighting *= s;
    camera *= s;
    return *this;
}

FaceRender render_face(const FaceParams& params, const FaceModelAssets& assets, int height, int width) {
    FaceRender r;
    r.shaped = blend_shapes(params, assets);
    r.mesh.vertices = apply_pose(r.shaped, params.pose, assets.joints);
    r.mesh.faces = assets.faces;
    r.mesh.normals = compute_vertex_normals(r.mesh.vertices, r.mesh.faces, &r.normal_accum);
    r.mesh.uv = assets.uv_coords;
    r.proj = project(r.mesh, params.camera);
    r.albedo = albedo_from_coeffs(assets, params.texture);
    r.colors = shade_sh(r.mesh.normals, r.albedo, params.lighting);
    r.raster = rasterize_projected(r.mesh, r.proj, r.colors, height, width);
    return r;
}

ParamGrads render_face_backward(const FaceRender& r, const FaceParams& params, const FaceModelAssets& assets,
                                const Image& d_rgb, const Eigen::MatrixXd* d_pix_extra) {
    ParamGrads g = ParamGrads::zeros(assets);
    const int V = assets.V;

    Eigen::MatrixXd d_colors = Eigen::MatrixXd::Zero(V, 3);
    Eigen::MatrixXd d_screen = Eigen::MatrixXd::Zero(V, 2);
    rasterize_backward(r.raster, r.proj, r.mesh.faces, r.colors, d_rgb, &d_colors, &d_screen);
    if (d_pix_extra) d_screen += *d_pix_extra;

    Eigen::MatrixXd d_normals = Eigen::MatrixXd::Zero(V, 3);
    Eigen::MatrixXd d_albedo = Eigen::MatrixXd::Zero(V, 3);
    shade_sh_backward(r.mesh.normals, r.albedo, params.lighting, d_colors, &d_normals, &d_albedo, &g.lighting);

    // albedo -> texture coefficients
    Eigen::VectorXd d_albedo_flat(3 * V);
    for (int i = 0; i < V; ++i)
        for (int k = 0; k < 3; ++k) d_albedo_flat[3 * i + k] = d_albedo(i, k);
    g.texture = assets.albedo_basis.transpose() * d_albedo_flat;

    // screen + normal paths meet at the posed vertices
    Eigen::MatrixXd d_world = Eigen::MatrixXd::Zero(V, 3);
    project_backward(r.mesh.vertices, params.camera, r.proj, d_screen, &d_world, &g.camera);
    normals_backward(r.mesh.vertices, r.mesh.faces, r.normal_accum, d_normals, d_world);

    Eigen::MatrixXd d_shaped = Eigen::MatrixXd::Zero(V, 3);
    pose_backward(r.shaped, params.pose, assets.joints, d_world, d_shaped, g.pose);

    Eigen::VectorXd d_shaped_flat(3 * V);
    for (int i = 0; i < V; ++i)
        for (int k = 0; k < 3; ++k) d_shaped_flat[3 * i + k] = d_shaped(i, k);
    g.expression = assets.expression_basis.transpose() * d_shaped_flat;
    g.shape = assets.shape_basis.transpose() * d_shaped_flat;
    return g;
}

} // namespace dub
