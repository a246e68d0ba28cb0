#include "dub/face_model.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "dub/errors.hpp"

namespace dub {

void FaceModelAssets::validate() const {
    if (V < 3) throw ConfigError("assets: vertex count too small");
    if (template_vertices.rows() != V || template_vertices.cols() != 3)
        throw ConfigError("assets: template dimensions inconsistent with V");
    if (shape_basis.rows() != 3 * V || shape_basis.cols() != Ns)
        throw ConfigError("assets: shape basis dimensions inconsistent");
    if (expression_basis.rows() != 3 * V || expression_basis.cols() != Ne)
        throw ConfigError("assets: expression basis dimensions inconsistent");
    if (uv_coords.rows() != V || uv_coords.cols() != 2) throw ConfigError("assets: uv dimensions inconsistent");
    if (albedo_mean.size() != 3 * V) throw ConfigError("assets: albedo mean dimensions inconsistent");
    if (albedo_basis.rows() != 3 * V || albedo_basis.cols() != Nt)
        throw ConfigError("assets: albedo basis dimensions inconsistent");
    if (joints.neck_weights.size() != V || joints.jaw_weights.size() != V)
        throw ConfigError("assets: skinning weight dimensions inconsistent");
    if (joints.jaw_max <= joints.jaw_min) throw ConfigError("assets: jaw range empty");
    for (const auto& f : faces)
        for (int k = 0; k < 3; ++k)
            if (f[static_cast<size_t>(k)] < 0 || f[static_cast<size_t>(k)] >= V)
                throw ConfigError("assets: face index out of range");
    for (int i = 0; i < V; ++i) {
        if (uv_coords(i, 0) < 0 || uv_coords(i, 0) > 1 || uv_coords(i, 1) < 0 || uv_coords(i, 1) > 1)
            throw ConfigError("assets: uv coordinate outside [0,1]^2");
        double ws = joints.neck_weights[i] + joints.jaw_weights[i];
        if (joints.neck_weights[i] < -1e-12 || joints.jaw_weights[i] < -1e-12 || ws > 1.0 + 1e-12)
            throw ConfigError("assets: invalid skinning weights");
    }
    for (int idx : landmark_indices)
        if (idx < 0 || idx >= V) throw ConfigError("assets: landmark index out of range");
    if (mask_labels.empty() || mask_labels.c != 1) throw ConfigError("assets: missing mask label texture");
}

Eigen::VectorXd Pose::to_vector() const {
    Eigen::VectorXd v(kDims);
    v[0] = jaw;
    v.segment<3>(1) = neck;
    v.segment<3>(4) = rot;
    v.segment<3>(7) = trans;
    return v;
}

Pose Pose::from_vector(const Eigen::VectorXd& v) {
    Pose p;
    p.jaw = v[0];
    p.neck = v.segment<3>(1);
    p.rot = v.segment<3>(4);
    p.trans = v.segment<3>(7);
    return p;
}

Eigen::VectorXd Camera::to_vector() const {
    Eigen::VectorXd v(kDims);
    v[0] = fx;
    v[1] = fy;
    v[2] = cx;
    v[3] = cy;
    v.segment<3>(4) = ext_rot;
    v.segment<3>(7) = ext_trans;
    return v;
}

Camera Camera::from_vector(const Eigen::VectorXd& v) {
    Camera c;
    c.fx = v[0];
    c.fy = v[1];
    c.cx = v[2];
    c.cy = v[3];
    c.ext_rot = v.segment<3>(4);
    c.ext_trans = v.segment<3>(7);
    return c;
}

FaceParams FaceParams::neutral(const FaceModelAssets& assets, const Camera& cam) {
    FaceParams p;
    p.shape = Eigen::VectorXd::Zero(assets.Ns);
    p.expression = Eigen::VectorXd::Zero(assets.Ne);
    p.texture = Eigen::VectorXd::Zero(assets.Nt);
    p.lighting = Eigen::VectorXd::Zero(9);
    p.lighting[0] = 2.5; // roughly unit diffuse level under the DC band
    p.camera = cam;
    return p;
}

void FaceParams::validate(const FaceModelAssets& assets) const {
    if (shape.size() != assets.Ns || expression.size() != assets.Ne || texture.size() != assets.Nt)
        throw ConfigError("FaceParams: coefficient dimensions do not match assets");
    if (lighting.size() != 9) throw ConfigError("FaceParams: lighting must have exactly 9 coefficients");
    if (pose.jaw < assets.joints.jaw_min - 1e-9 || pose.jaw > assets.joints.jaw_max + 1e-9)
        throw ConfigError("FaceParams: jaw angle outside configured range");
    auto all_finite = [](const Eigen::VectorXd& v) { return v.allFinite(); };
    if (!all_finite(shape) || !all_finite(expression) || !all_finite(texture) || !all_finite(lighting) ||
        !pose.to_vector().allFinite() || !camera.to_vector().allFinite())
        throw ConfigError("FaceParams: non-finite value");
}

// ---- rotations -------------------------------------------------------------

static Eigen::Matrix3d rot_x(double a) {
    Eigen::Matrix3d m;
    m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
    return m;
}
static Eigen::Matrix3d rot_y(double a) {
    Eigen::Matrix3d m;
    m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
    return m;
}
static Eigen::Matrix3d rot_z(double a) {
    Eigen::Matrix3d m;
    m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    return m;
}
static Eigen::Matrix3d drot_x(double a) {
    Eigen::Matrix3d m;
    m << 0, 0, 0, 0, -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a);
    return m;
}
static Eigen::Matrix3d drot_y(double a) {
    Eigen::Matrix3d m;
    m << -std::sin(a), 0, std::cos(a), 0, 0, 0, -std::cos(a), 0, -std::sin(a);
    return m;
}
static Eigen::Matrix3d drot_z(double a) {
    Eigen::Matrix3d m;
    m << -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a), 0, 0, 0, 0;
    return m;
}

Eigen::Matrix3d euler_to_matrix(const Eigen::Vector3d& e) { return rot_z(e[2]) * rot_y(e[1]) * rot_x(e[0]); }

std::array<Eigen::Matrix3d, 3> euler_derivatives(const Eigen::Vector3d& e) {
    return {rot_z(e[2]) * rot_y(e[1]) * drot_x(e[0]), rot_z(e[2]) * drot_y(e[1]) * rot_x(e[0]),
            drot_z(e[2]) * rot_y(e[1]) * rot_x(e[0])};
}

// Rotation about -x so that positive angles push the chin down for geometry
// in front of the pivot.
Eigen::Matrix3d jaw_hinge(double angle) { return rot_x(-angle); }
Eigen::Matrix3d jaw_hinge_derivative(double angle) { return -drot_x(-angle); }

// ---- geometry --------------------------------------------------------------

Eigen::MatrixXd blend_shapes(const FaceParams& params, const FaceModelAssets& assets) {
    Eigen::MatrixXd out = assets.template_vertices;
    Eigen::VectorXd offset = assets.shape_basis * params.shape + assets.expression_basis * params.expression;
    for (int i = 0; i < assets.V; ++i)
        for (int k = 0; k < 3; ++k) out(i, k) += offset[3 * i + k];
    return out;
}

Eigen::MatrixXd apply_pose(const Eigen::MatrixXd& shaped, const Pose& pose, const JointInfo& joints) {
    const Eigen::Matrix3d Rn = euler_to_matrix(pose.neck);
    const Eigen::Matrix3d Rj = jaw_hinge(pose.jaw);
    const Eigen::Matrix3d Rg = euler_to_matrix(pose.rot);
    const Eigen::Vector3d& cn = joints.neck_pivot;
    const Eigen::Vector3d& cj = joints.jaw_pivot;

    Eigen::MatrixXd out(shaped.rows(), 3);
    for (int i = 0; i < shaped.rows(); ++i) {
        Eigen::Vector3d v = shaped.row(i).transpose();
        double wn = joints.neck_weights[i], wj = joints.jaw_weights[i];
        double wr = 1.0 - wn - wj;
        Eigen::Vector3d tn = Rn * (v - cn) + cn;
        Eigen::Vector3d vj = Rj * (v - cj) + cj;
        Eigen::Vector3d tj = Rn * (vj - cn) + cn;
        Eigen::Vector3d p = wr * v + wn * tn + wj * tj;
        out.row(i) = (Rg * p + pose.trans).transpose();
    }
    return out;
}

void pose_backward(const Eigen::MatrixXd& shaped, const Pose& pose, const JointInfo& joints,
                   const Eigen::MatrixXd& d_world, Eigen::MatrixXd& d_shaped, Eigen::VectorXd& d_pose) {
    const Eigen::Matrix3d Rn = euler_to_matrix(pose.neck);
    const Eigen::Matrix3d Rj = jaw_hinge(pose.jaw);
    const Eigen::Matrix3d Rg = euler_to_matrix(pose.rot);
    const Eigen::Matrix3d dRj = jaw_hinge_derivative(pose.jaw);
    const auto dRn = euler_derivatives(pose.neck);
    const auto dRg = euler_derivatives(pose.rot);
    const Eigen::Vector3d& cn = joints.neck_pivot;
    const Eigen::Vector3d& cj = joints.jaw_pivot;

    if (d_shaped.rows() != shaped.rows()) d_shaped = Eigen::MatrixXd::Zero(shaped.rows(), 3);
    if (d_pose.size() != Pose::kDims) d_pose = Eigen::VectorXd::Zero(Pose::kDims);

    for (int i = 0; i < shaped.rows(); ++i) {
        Eigen::Vector3d v = shaped.row(i).transpose();
        Eigen::Vector3d g = d_world.row(i).transpose();
        if (g.isZero(0.0)) continue;
        double wn = joints.neck_weights[i], wj = joints.jaw_weights[i];
        double wr = 1.0 - wn - wj;

        Eigen::Vector3d vj = Rj * (v - cj) + cj;
        Eigen::Vector3d tn = Rn * (v - cn) + cn;
        Eigen::Vector3d tj = Rn * (vj - cn) + cn;
        Eigen::Vector3d p = wr * v + wn * tn + wj * tj;

        // world = Rg * p + t
        Eigen::Vector3d gp = Rg.transpose() * g;
        for (int k = 0; k < 3; ++k) {
            d_pose[4 + k] += g.dot(dRg[static_cast<size_t>(k)] * p);
            d_pose[7 + k] += g[k];
        }
        // p w.r.t. shaped vertex
        Eigen::Matrix3d J = wr * Eigen::Matrix3d::Identity() + wn * Rn + wj * Rn * Rj;
        d_shaped.row(i) += (J.transpose() * gp).transpose();
        // jaw angle
        d_pose[0] += gp.dot(wj * Rn * (dRj * (v - cj)));
        // neck angles
        for (int k = 0; k < 3; ++k)
            d_pose[1 + k] += gp.dot(wn * dRn[static_cast<size_t>(k)] * (v - cn) +
                                    wj * dRn[static_cast<size_t>(k)] * (vj - cn));
    }
}

Eigen::MatrixXd compute_vertex_normals(const Eigen::MatrixXd& vertices, const std::vector<std::array<int, 3>>& faces,
                                       Eigen::MatrixXd* accum) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(vertices.rows(), 3);
    for (const auto& f : faces) {
        Eigen::Vector3d a = vertices.row(f[0]).transpose();
        Eigen::Vector3d b = vertices.row(f[1]).transpose();
        Eigen::Vector3d c = vertices.row(f[2]).transpose();
        Eigen::Vector3d g = (b - a).cross(c - a);
        m.row(f[0]) += g.transpose();
        m.row(f[1]) += g.transpose();
        m.row(f[2]) += g.transpose();
    }
    Eigen::MatrixXd n(vertices.rows(), 3);
    for (int i = 0; i < vertices.rows(); ++i) {
        double len = m.row(i).norm();
        if (len > 1e-14)
            n.row(i) = m.row(i) / len;
        else
            n.row(i) = Eigen::RowVector3d(0, 0, -1);
    }
    if (accum) *accum = std::move(m);
    return n;
}

void normals_backward(const Eigen::MatrixXd& vertices, const std::vector<std::array<int, 3>>& faces,
                      const Eigen::MatrixXd& accum, const Eigen::MatrixXd& d_normals, Eigen::MatrixXd& d_vertices) {
    if (d_vertices.rows() != vertices.rows()) d_vertices = Eigen::MatrixXd::Zero(vertices.rows(), 3);
    // through normalization: dm = (I - n n^T)/|m| * dn
    Eigen::MatrixXd d_m(vertices.rows(), 3);
    for (int i = 0; i < vertices.rows(); ++i) {
        double len = accum.row(i).norm();
        if (len <= 1e-14) {
            d_m.row(i).setZero();
            continue;
        }
        Eigen::Vector3d n = accum.row(i).transpose() / len;
        Eigen::Vector3d dn = d_normals.row(i).transpose();
        d_m.row(i) = ((dn - n * n.dot(dn)) / len).transpose();
    }
    for (const auto& f : faces) {
        Eigen::Vector3d a = vertices.row(f[0]).transpose();
        Eigen::Vector3d b = vertices.row(f[1]).transpose();
        Eigen::Vector3d c = vertices.row(f[2]).transpose();
        Eigen::Vector3d gface = (d_m.row(f[0]) + d_m.row(f[1]) + d_m.row(f[2])).transpose();
        Eigen::Vector3d u = b - a, w = c - a;
        Eigen::Vector3d du = w.cross(gface); // d<g, u x w>/du
        Eigen::Vector3d dw = gface.cross(u);
        d_vertices.row(f[1]) += du.transpose();
        d_vertices.row(f[2]) += dw.transpose();
        d_vertices.row(f[0]) -= (du + dw).transpose();
    }
}

MeshBundle compute_vertices(const FaceParams& params, const FaceModelAssets& assets) {
    params.validate(assets);
    MeshBundle mesh;
    Eigen::MatrixXd shaped = blend_shapes(params, assets);
    mesh.vertices = apply_pose(shaped, params.pose, assets.joints);
    mesh.faces = assets.faces;
    mesh.normals = compute_vertex_normals(mesh.vertices, mesh.faces);
    mesh.uv = assets.uv_coords;
    return mesh;
}

// ---- projection ------------------------------------------------------------

static constexpr double kZEps = 1e-9;

Projected project_points(const Eigen::MatrixXd& world, const Camera& camera) {
    const Eigen::Matrix3d Re = euler_to_matrix(camera.ext_rot);
    Projected out;
    out.pix.resize(world.rows(), 2);
    out.depth.resize(world.rows());
    out.valid.assign(static_cast<size_t>(world.rows()), 0);
    for (int i = 0; i < world.rows(); ++i) {
        Eigen::Vector3d c = Re * world.row(i).transpose() + camera.ext_trans;
        out.depth[i] = c.z();
        if (c.z() > kZEps) {
            out.valid[static_cast<size_t>(i)] = 1;
            out.pix(i, 0) = camera.fx * c.x() / c.z() + camera.cx;
            out.pix(i, 1) = camera.fy * c.y() / c.z() + camera.cy;
        } else {
            out.pix(i, 0) = out.pix(i, 1) = 0.0;
        }
    }
    return out;
}

Projected project(const MeshBundle& mesh, const Camera& camera) { return project_points(mesh.vertices, camera); }

Eigen::Vector3d unproject(const Camera& camera, double px, double py, double depth) {
    Eigen::Vector3d cam((px - camera.cx) / camera.fx * depth, (py - camera.cy) / camera.fy * depth, depth);
    const Eigen::Matrix3d Re = euler_to_matrix(camera.ext_rot);
    return Re.transpose() * (cam - camera.ext_trans);
}

void project_backward(const Eigen::MatrixXd& world, const Camera& camera, const Projected& proj,
                      const Eigen::MatrixXd& d_pix, Eigen::MatrixXd* d_world, Eigen::VectorXd* d_camera) {
    const Eigen::Matrix3d Re = euler_to_matrix(camera.ext_rot);
    const auto dRe = euler_derivatives(camera.ext_rot);
    for (int i = 0; i < world.rows(); ++i) {
        if (!proj.valid[static_cast<size_t>(i)]) continue;
        double gx = d_pix(i, 0), gy = d_pix(i, 1);
        if (gx == 0.0 && gy == 0.0) continue;
        Eigen::Vector3d w = world.row(i).transpose();
        Eigen::Vector3d c = Re * w + camera.ext_trans;
        double z = c.z(), iz = 1.0 / z;
        // d pix / d cam point
        Eigen::Vector3d dc(camera.fx * iz * gx, camera.fy * iz * gy,
                           -(camera.fx * c.x() * iz * iz * gx + camera.fy * c.y() * iz * iz * gy));
        if (d_world) d_world->row(i) += (Re.transpose() * dc).transpose();
        if (d_camera) {
            (*d_camera)[0] += gx * c.x() * iz;
            (*d_camera)[1] += gy * c.y() * iz;
            (*d_camera)[2] += gx;
            (*d_camera)[3] += gy;
            for (int k = 0; k < 3; ++k) (*d_camera)[4 + k] += dc.dot(dRe[static_cast<size_t>(k)] * w);
            (*d_camera).segment<3>(7) += dc;
        }
    }
}

// ---- shading ---------------------------------------------------------------

std::array<double, 9> sh_basis(const Eigen::Vector3d& n) {
    const double x = n.x(), y = n.y(), z = n.z();
    return {0.28209479177387814,
            0.4886025119029199 * y,
            0.4886025119029199 * z,
            0.4886025119029199 * x,
            1.0925484305920792 * x * y,
            1.0925484305920792 * y * z,
            0.31539156525252005 * (3.0 * z * z - 1.0),
            1.0925484305920792 * x * z,
            0.5462742152960396 * (x * x - y * y)};
}

// gradient of each basis entry w.r.t. the (already unit) direction
static std::array<Eigen::Vector3d, 9> sh_basis_grad(const Eigen::Vector3d& n) {
    const double x = n.x(), y = n.y(), z = n.z();
    const double c1 = 0.4886025119029199, c2 = 1.0925484305920792;
    return {Eigen::Vector3d(0, 0, 0),
            Eigen::Vector3d(0, c1, 0),
            Eigen::Vector3d(0, 0, c1),
            Eigen::Vector3d(c1, 0, 0),
            Eigen::Vector3d(c2 * y, c2 * x, 0),
            Eigen::Vector3d(0, c2 * z, c2 * y),
            Eigen::Vector3d(0, 0, 0.31539156525252005 * 6.0 * z),
            Eigen::Vector3d(c2 * z, 0, c2 * x),
            Eigen::Vector3d(2 * 0.5462742152960396 * x, -2 * 0.5462742152960396 * y, 0)};
}

Eigen::MatrixXd shade_sh(const Eigen::MatrixXd& normals, const Eigen::MatrixXd& albedo,
                         const Eigen::VectorXd& gamma) {
    if (gamma.size() != 9) throw ConfigError("shade_sh: lighting must have exactly 9 coefficients");
    Eigen::MatrixXd out(normals.rows(), albedo.cols());
    for (int i = 0; i < normals.rows(); ++i) {
        auto Y = sh_basis(normals.row(i).transpose());
        double s = 0;
        for (int k = 0; k < 9; ++k) s += gamma[k] * Y[static_cast<size_t>(k)];
        out.row(i) = albedo.row(i) * s;
    }
    return out;
}

void shade_sh_backward(const Eigen::MatrixXd& normals, const Eigen::MatrixXd& albedo,
                       const Eigen::VectorXd& gamma, const Eigen::MatrixXd& d_colors,
                       Eigen::MatrixXd* d_normals, Eigen::MatrixXd* d_albedo, Eigen::VectorXd* d_gamma) {
    for (int i = 0; i < normals.rows(); ++i) {
        Eigen::Vector3d n = normals.row(i).transpose();
        auto Y = sh_basis(n);
        double s = 0;
        for (int k = 0; k < 9; ++k) s += gamma[k] * Y[static_cast<size_t>(k)];
        double dshade = d_colors.row(i).dot(albedo.row(i));
        if (d_albedo) d_albedo->row(i) += d_colors.row(i) * s;
        if (d_gamma)
            for (int k = 0; k < 9; ++k) (*d_gamma)[k] += dshade * Y[static_cast<size_t>(k)];
        if (d_normals) {
            auto G = sh_basis_grad(n);
            Eigen::Vector3d dn = Eigen::Vector3d::Zero();
            for (int k = 0; k < 9; ++k) dn += gamma[k] * G[static_cast<size_t>(k)];
            d_normals->row(i) += (dshade * dn).transpose();
        }
    }
}

Eigen::MatrixXd albedo_from_coeffs(const FaceModelAssets& assets, const Eigen::VectorXd& beta) {
    if (beta.size() != assets.Nt) throw ConfigError("albedo_from_coeffs: texture coefficient size mismatch");
    Eigen::VectorXd flat = assets.albedo_mean + assets.albedo_basis * beta;
    Eigen::MatrixXd out(assets.V, 3);
    for (int i = 0; i < assets.V; ++i)
        for (int k = 0; k < 3; ++k) out(i, k) = flat[3 * i + k];
    return out;
}

} // namespace dub
