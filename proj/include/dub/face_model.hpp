#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dub/image.hpp"

namespace dub {

/// Two-joint rig: a neck rotation and a jaw hinge (child of the neck).
/// The hinge is oriented so that a positive angle opens the jaw downward.
struct JointInfo {
    Eigen::Vector3d neck_pivot = Eigen::Vector3d::Zero();
    Eigen::Vector3d jaw_pivot = Eigen::Vector3d::Zero();
    double jaw_min = 0.0;
    double jaw_max = 0.5;
    Eigen::VectorXd neck_weights; // V, in [0,1]
    Eigen::VectorXd jaw_weights;  // V, neck+jaw <= 1 per vertex
};

/// Blendshape model container: template, linear shape/expression bases,
/// PCA albedo, UV atlas, landmark vertex ids, rig, and the UV-space region
/// label texture (0 = other, 1 = lower face, 2 = mouth).
struct FaceModelAssets {
    int V = 0, Ns = 0, Ne = 0, Nt = 0;
    Eigen::MatrixXd template_vertices; // V x 3
    std::vector<std::array<int, 3>> faces;
    Eigen::MatrixXd shape_basis;      // 3V x Ns (xyz interleaved per vertex)
    Eigen::MatrixXd expression_basis; // 3V x Ne
    Eigen::MatrixXd uv_coords;        // V x 2 in [0,1]^2
    Eigen::VectorXd albedo_mean;      // 3V
    Eigen::MatrixXd albedo_basis;     // 3V x Nt
    std::vector<int> landmark_indices;
    JointInfo joints;
    Image mask_labels; // 1-channel UV label grid, values {0,1,2}

    int num_landmarks() const { return static_cast<int>(landmark_indices.size()); }
    void validate() const; // throws ConfigError on inconsistency
};

struct Pose {
    double jaw = 0.0;
    Eigen::Vector3d neck = Eigen::Vector3d::Zero(); // euler xyz
    Eigen::Vector3d rot = Eigen::Vector3d::Zero();  // global euler xyz
    Eigen::Vector3d trans = Eigen::Vector3d::Zero();

    static constexpr int kDims = 10;
    Eigen::VectorXd to_vector() const;
    static Pose from_vector(const Eigen::VectorXd& v);
};

struct Camera {
    double fx = 256, fy = 256, cx = 128, cy = 128;
    Eigen::Vector3d ext_rot = Eigen::Vector3d::Zero(); // euler xyz
    Eigen::Vector3d ext_trans = Eigen::Vector3d::Zero();

    static constexpr int kDims = 10; // fx fy cx cy rot3 trans3
    Eigen::VectorXd to_vector() const;
    static Camera from_vector(const Eigen::VectorXd& v);
};

struct FaceParams {
    Eigen::VectorXd shape;      // Ns
    Eigen::VectorXd expression; // Ne
    Pose pose;
    Eigen::VectorXd texture;  // Nt
    Eigen::VectorXd lighting; // 9 SH coefficients
    Camera camera;

    static FaceParams neutral(const FaceModelAssets& assets, const Camera& cam);
    void validate(const FaceModelAssets& assets) const;
};

struct MeshBundle {
    Eigen::MatrixXd vertices; // V x 3, posed
    std::vector<std::array<int, 3>> faces;
    Eigen::MatrixXd normals; // V x 3, unit length
    Eigen::MatrixXd uv;      // V x 2
};

// ---- rotations -------------------------------------------------------------

Eigen::Matrix3d euler_to_matrix(const Eigen::Vector3d& e); // Rz*Ry*Rx
std::array<Eigen::Matrix3d, 3> euler_derivatives(const Eigen::Vector3d& e);
Eigen::Matrix3d jaw_hinge(double angle); // positive angle opens downward
Eigen::Matrix3d jaw_hinge_derivative(double angle);

// ---- geometry --------------------------------------------------------------

/// template + shape_basis*alpha + expression_basis*psi, before skinning.
Eigen::MatrixXd blend_shapes(const FaceParams& params, const FaceModelAssets& assets);

/// Full posed mesh in scene space with recomputed unit normals.
MeshBundle compute_vertices(const FaceParams& params, const FaceModelAssets& assets);

/// Skinning + global rigid applied to already-blended vertices.
Eigen::MatrixXd apply_pose(const Eigen::MatrixXd& shaped, const Pose& pose, const JointInfo& joints);

/// Pull scene-space vertex gradients back to blended vertices and pose dofs.
/// d_shaped is accumulated; d_pose is accumulated (layout = Pose::to_vector).
void pose_backward(const Eigen::MatrixXd& shaped, const Pose& pose, const JointInfo& joints,
                   const Eigen::MatrixXd& d_world, Eigen::MatrixXd& d_shaped, Eigen::VectorXd& d_pose);

/// Area-weighted vertex normals; `accum` returns the unnormalized sums
/// needed by normals_backward.
Eigen::MatrixXd compute_vertex_normals(const Eigen::MatrixXd& vertices,
                                       const std::vector<std::array<int, 3>>& faces,
                                       Eigen::MatrixXd* accum = nullptr);
void normals_backward(const Eigen::MatrixXd& vertices, const std::vector<std::array<int, 3>>& faces,
                      const Eigen::MatrixXd& accum, const Eigen::MatrixXd& d_normals, Eigen::MatrixXd& d_vertices);

// ---- projection ------------------------------------------------------------

struct Projected {
    Eigen::MatrixXd pix; // V x 2
    Eigen::VectorXd depth; // camera-space z
    std::vector<uint8_t> valid; // z > eps
};

Projected project(const MeshBundle& mesh, const Camera& camera);
Projected project_points(const Eigen::MatrixXd& world, const Camera& camera);

/// Inverse of project at a given camera depth; used for ray checks.
Eigen::Vector3d unproject(const Camera& camera, double px, double py, double depth);

/// Chain pixel-coordinate gradients back to world points and camera dofs.
/// Invalid points contribute nothing. d_world/d_camera accumulated; either
/// may be null.
void project_backward(const Eigen::MatrixXd& world, const Camera& camera, const Projected& proj,
                      const Eigen::MatrixXd& d_pix, Eigen::MatrixXd* d_world, Eigen::VectorXd* d_camera);

// ---- shading ---------------------------------------------------------------

/// Real spherical harmonics basis through degree 2, evaluated at a unit direction.
std::array<double, 9> sh_basis(const Eigen::Vector3d& n);

/// color_i = albedo_i * sum_k gamma_k Y_k(normal_i). Linear in albedo and gamma.
Eigen::MatrixXd shade_sh(const Eigen::MatrixXd& normals, const Eigen::MatrixXd& albedo,
                         const Eigen::VectorXd& gamma);
void shade_sh_backward(const Eigen::MatrixXd& normals, const Eigen::MatrixXd& albedo,
                       const Eigen::VectorXd& gamma, const Eigen::MatrixXd& d_colors,
                       Eigen::MatrixXd* d_normals, Eigen::MatrixXd* d_albedo, Eigen::VectorXd* d_gamma);

/// Per-vertex albedo from the PCA texture model.
Eigen::MatrixXd albedo_from_coeffs(const FaceModelAssets& assets, const Eigen::VectorXd& beta);

// ---- synthetic assets ------------------------------------------------------

/// Deterministic low-poly head with a hinged jaw, smooth random bases and a
/// canonical UV label texture. Same (seed, dims) always produces identical
/// assets; used by every test in place of licensed model files.
FaceModelAssets make_synthetic_assets(uint64_t seed, int V, int Ns, int Ne, int Nt = 8, int L = 16);

// ---- asset container -------------------------------------------------------

void save_assets(const FaceModelAssets& assets, const std::string& path);
FaceModelAssets load_assets(const std::string& path);

} // namespace dub
