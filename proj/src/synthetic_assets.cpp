#include <algorithm>
#include <cmath>

#include "dub/errors.hpp"
#include "dub/face_model.hpp"
#include "dub/rng.hpp"

namespace dub {

namespace {

double smoothstep(double lo, double hi, double x) {
    double t = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// Smooth low-frequency field over the UV chart, used for bases and identity
// variation. Deterministic in the rng stream.
struct SmoothField {
    double fu, fv, phase, amp;
    static SmoothField draw(Rng& rng, double amp) {
        SmoothField f;
        f.fu = rng.uniform(0.3, 2.2);
        f.fv = rng.uniform(0.3, 2.2);
        f.phase = rng.uniform(0.0, 6.28318530717958648);
        f.amp = amp * rng.uniform(0.5, 1.0);
        return f;
    }
    double operator()(double u, double v) const {
        return amp * std::cos(6.28318530717958648 * (fu * u + fv * v) + phase);
    }
};

} // namespace

FaceModelAssets make_synthetic_assets(uint64_t seed, int V, int Ns, int Ne, int Nt, int L) {
    if (V < 8) throw ConfigError("make_synthetic_assets: V must be at least 8");
    Rng rng(seed, 0x5eed);
    Rng geo = rng.fork(1), shape_rng = rng.fork(2), expr_rng = rng.fork(3), alb_rng = rng.fork(4);

    FaceModelAssets a;
    a.V = V;
    a.Ns = Ns;
    a.Ne = Ne;
    a.Nt = Nt;

    // vertex grid over the UV chart; a short centered partial row absorbs the remainder
    int cols = std::max(2, static_cast<int>(std::lround(std::sqrt(static_cast<double>(V)))));
    int full_rows = V / cols;
    int rem = V % cols;
    int rows_total = full_rows + (rem > 0 ? 1 : 0);
    if (full_rows < 2) {
        cols = V / 2;
        full_rows = 2;
        rem = V - cols * 2;
        rows_total = full_rows + (rem > 0 ? 1 : 0);
    }
    int offset = (cols - rem) / 2;

    a.template_vertices.resize(V, 3);
    a.uv_coords.resize(V, 2);

    // identity variation fields
    std::vector<SmoothField> bump_x, bump_y, bump_z;
    for (int k = 0; k < 3; ++k) {
        bump_x.push_back(SmoothField::draw(geo, 0.05));
        bump_y.push_back(SmoothField::draw(geo, 0.05));
        bump_z.push_back(SmoothField::draw(geo, 0.10));
    }

    const double z0 = 4.0, rx = 0.9, ry = 1.1, rz = 0.8;
    auto surface = [&](double u, double v) {
        double th = (u - 0.5) * 1.9;
        double ph = (v - 0.5) * 2.2;
        double x = rx * std::sin(th) * (0.75 + 0.25 * std::cos(ph));
        double y = -ry * std::sin(ph);
        double z = z0 - rz * std::cos(th) * std::cos(ph);
        // nose bump
        double d2 = ((u - 0.5) * (u - 0.5)) / 0.012 + ((v - 0.48) * (v - 0.48)) / 0.012;
        z -= 0.22 * std::exp(-d2);
        for (int k = 0; k < 3; ++k) {
            x += bump_x[static_cast<size_t>(k)](u, v);
            y += bump_y[static_cast<size_t>(k)](u, v);
            z += bump_z[static_cast<size_t>(k)](u, v);
        }
        return Eigen::Vector3d(x, y, z);
    };

    auto uv_of_index = [&](int i) {
        int r = i / cols, c = i % cols;
        if (r >= full_rows) { // partial row
            c = i - full_rows * cols;
            r = full_rows;
            c += offset;
        }
        double u = cols > 1 ? static_cast<double>(c) / (cols - 1) : 0.5;
        double v = rows_total > 1 ? static_cast<double>(r) / (rows_total - 1) : 0.5;
        return Eigen::Vector2d(u, v);
    };

    for (int i = 0; i < V; ++i) {
        Eigen::Vector2d uv = uv_of_index(i);
        a.uv_coords.row(i) = uv.transpose();
        a.template_vertices.row(i) = surface(uv.x(), uv.y()).transpose();
    }

    // triangles over the grid rows, plus the partial-row strip
    auto vid = [&](int r, int c) { return r * cols + c; };
    for (int r = 0; r + 1 < full_rows; ++r)
        for (int c = 0; c + 1 < cols; ++c) {
            a.faces.push_back({vid(r, c), vid(r + 1, c), vid(r, c + 1)});
            a.faces.push_back({vid(r, c + 1), vid(r + 1, c), vid(r + 1, c + 1)});
        }
    if (rem == 1) {
        int p = full_rows * cols;
        if (offset + 1 < cols) a.faces.push_back({vid(full_rows - 1, offset), p, vid(full_rows - 1, offset + 1)});
    } else if (rem >= 2) {
        for (int c = 0; c + 1 < rem; ++c) {
            int p0 = full_rows * cols + c, p1 = p0 + 1;
            int q0 = vid(full_rows - 1, c + offset), q1 = vid(full_rows - 1, c + offset + 1);
            a.faces.push_back({q0, p0, q1});
            a.faces.push_back({q1, p0, p1});
        }
    }

    // smooth random linear bases; expression motion is concentrated in the lower face
    a.shape_basis = Eigen::MatrixXd::Zero(3 * V, Ns);
    for (int k = 0; k < Ns; ++k) {
        double amp = 0.12 / std::sqrt(1.0 + k);
        SmoothField fx = SmoothField::draw(shape_rng, amp);
        SmoothField fy = SmoothField::draw(shape_rng, amp);
        SmoothField fz = SmoothField::draw(shape_rng, amp);
        for (int i = 0; i < V; ++i) {
            Eigen::Vector2d uv = a.uv_coords.row(i).transpose();
            a.shape_basis(3 * i + 0, k) = fx(uv.x(), uv.y());
            a.shape_basis(3 * i + 1, k) = fy(uv.x(), uv.y());
            a.shape_basis(3 * i + 2, k) = fz(uv.x(), uv.y());
        }
    }
    a.expression_basis = Eigen::MatrixXd::Zero(3 * V, Ne);
    for (int k = 0; k < Ne; ++k) {
        double amp = 0.10 / std::sqrt(1.0 + k);
        SmoothField fx = SmoothField::draw(expr_rng, amp * 0.5);
        SmoothField fy = SmoothField::draw(expr_rng, amp);
        SmoothField fz = SmoothField::draw(expr_rng, amp * 0.5);
        for (int i = 0; i < V; ++i) {
            Eigen::Vector2d uv = a.uv_coords.row(i).transpose();
            double m = 0.15 + 0.85 * smoothstep(0.45, 0.72, uv.y());
            a.expression_basis(3 * i + 0, k) = m * fx(uv.x(), uv.y());
            a.expression_basis(3 * i + 1, k) = m * fy(uv.x(), uv.y());
            a.expression_basis(3 * i + 2, k) = m * fz(uv.x(), uv.y());
        }
    }

    // albedo: smooth skin-tone ramp plus smooth principal components
    a.albedo_mean.resize(3 * V);
    double base_r = 0.45 + 0.25 * alb_rng.uniform();
    double base_g = 0.30 + 0.20 * alb_rng.uniform();
    double base_b = 0.22 + 0.18 * alb_rng.uniform();
    SmoothField tone = SmoothField::draw(alb_rng, 0.08);
    for (int i = 0; i < V; ++i) {
        Eigen::Vector2d uv = a.uv_coords.row(i).transpose();
        double t = tone(uv.x(), uv.y());
        a.albedo_mean[3 * i + 0] = std::clamp(base_r + t, 0.05, 0.95);
        a.albedo_mean[3 * i + 1] = std::clamp(base_g + t * 0.8, 0.05, 0.95);
        a.albedo_mean[3 * i + 2] = std::clamp(base_b + t * 0.6, 0.05, 0.95);
    }
    a.albedo_basis = Eigen::MatrixXd::Zero(3 * V, Nt);
    for (int k = 0; k < Nt; ++k) {
        double amp = 0.10 / std::sqrt(1.0 + k);
        SmoothField fr = SmoothField::draw(alb_rng, amp);
        SmoothField fg = SmoothField::draw(alb_rng, amp);
        SmoothField fb = SmoothField::draw(alb_rng, amp);
        for (int i = 0; i < V; ++i) {
            Eigen::Vector2d uv = a.uv_coords.row(i).transpose();
            a.albedo_basis(3 * i + 0, k) = fr(uv.x(), uv.y());
            a.albedo_basis(3 * i + 1, k) = fg(uv.x(), uv.y());
            a.albedo_basis(3 * i + 2, k) = fb(uv.x(), uv.y());
        }
    }

    // rig: jaw owns the chin region, neck the very bottom; pivots sit behind the surface
    a.joints.neck_weights.resize(V);
    a.joints.jaw_weights.resize(V);
    for (int i = 0; i < V; ++i) {
        double v = a.uv_coords(i, 1);
        double nraw = 0.35 * smoothstep(0.90, 1.0, v);
        double jraw = smoothstep(0.60, 0.78, v);
        a.joints.neck_weights[i] = nraw;
        a.joints.jaw_weights[i] = jraw * (1.0 - nraw);
    }
    a.joints.jaw_pivot = Eigen::Vector3d(0.0, -ry * std::sin((0.62 - 0.5) * 2.2), z0 + 0.5);
    a.joints.neck_pivot = Eigen::Vector3d(0.0, -ry * std::sin((0.95 - 0.5) * 2.2), z0 + 0.5);
    a.joints.jaw_min = 0.0;
    a.joints.jaw_max = 0.5;

    // UV label texture: mouth ellipse inside a lower-face band
    const int LT = 64;
    a.mask_labels = Image(LT, LT, 1);
    for (int y = 0; y < LT; ++y)
        for (int x = 0; x < LT; ++x) {
            double u = (x + 0.5) / LT, v = (y + 0.5) / LT;
            double label = 0;
            if (v >= 0.52) label = 1;
            double du = (u - 0.5) / 0.16, dv = (v - 0.62) / 0.075;
            if (du * du + dv * dv <= 1.0) label = 2;
            a.mask_labels.at(0, y, x) = label;
        }

    // landmarks: nearest vertices to canonical feature points, unique
    const double anchor_uv[][2] = {{0.30, 0.33}, {0.70, 0.33}, {0.38, 0.35}, {0.62, 0.35}, {0.50, 0.48},
                                   {0.42, 0.55}, {0.58, 0.55}, {0.34, 0.62}, {0.66, 0.62}, {0.50, 0.57},
                                   {0.50, 0.68}, {0.50, 0.85}, {0.22, 0.55}, {0.78, 0.55}, {0.30, 0.75},
                                   {0.70, 0.75}, {0.25, 0.20}, {0.75, 0.20}, {0.50, 0.10}, {0.50, 0.30}};
    int n_anchor = static_cast<int>(sizeof(anchor_uv) / sizeof(anchor_uv[0]));
    int n_land = std::min({L, n_anchor, V});
    for (int k = 0; k < n_land; ++k) {
        double bu = anchor_uv[k][0], bv = anchor_uv[k][1];
        int best = -1;
        double best_d = 1e30;
        for (int i = 0; i < V; ++i) {
            if (std::find(a.landmark_indices.begin(), a.landmark_indices.end(), i) != a.landmark_indices.end())
                continue;
            double du = a.uv_coords(i, 0) - bu, dv = a.uv_coords(i, 1) - bv;
            double d = du * du + dv * dv;
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        a.landmark_indices.push_back(best);
    }

    a.validate();
    return a;
}

} // namespace dub
