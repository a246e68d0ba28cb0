#include <cstring>
#include <fstream>
#include <map>

#include "dub/errors.hpp"
#include "dub/face_model.hpp"

// Asset container: little-endian binary with named arrays.
//   magic "DUBFACE1", u32 array count, then per array:
//   u16 name length, name bytes, u8 dtype (0=f64, 1=i32), u8 ndim, u64 dims[], payload.
// Matrices are stored row-major. The loader validates mutual consistency and
// fails loudly on anything malformed.

namespace dub {

namespace {

struct ArrayBlob {
    std::vector<uint64_t> dims;
    std::vector<double> f64;
    std::vector<int32_t> i32;
    uint8_t dtype = 0;
};

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f, const std::string& path) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw IoError("asset container truncated: " + path);
    return v;
}

void write_array(std::ofstream& f, const std::string& name, const std::vector<uint64_t>& dims, uint8_t dtype,
                 const void* data, size_t bytes) {
    write_pod<uint16_t>(f, static_cast<uint16_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint8_t>(f, dtype);
    write_pod<uint8_t>(f, static_cast<uint8_t>(dims.size()));
    for (uint64_t d : dims) write_pod<uint64_t>(f, d);
    f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

void write_matrix(std::ofstream& f, const std::string& name, const Eigen::MatrixXd& m) {
    std::vector<double> rm(static_cast<size_t>(m.rows()) * m.cols());
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) rm[static_cast<size_t>(r) * m.cols() + c] = m(r, c);
    write_array(f, name, {static_cast<uint64_t>(m.rows()), static_cast<uint64_t>(m.cols())}, 0, rm.data(),
                rm.size() * sizeof(double));
}

Eigen::MatrixXd as_matrix(const ArrayBlob& b, const std::string& name) {
    if (b.dtype != 0 || b.dims.size() != 2) throw IoError("asset array '" + name + "' has unexpected layout");
    Eigen::MatrixXd m(static_cast<long>(b.dims[0]), static_cast<long>(b.dims[1]));
    for (long r = 0; r < m.rows(); ++r)
        for (long c = 0; c < m.cols(); ++c) m(r, c) = b.f64[static_cast<size_t>(r) * m.cols() + c];
    return m;
}

Eigen::VectorXd as_vector(const ArrayBlob& b, const std::string& name) {
    if (b.dtype != 0 || b.dims.size() != 1) throw IoError("asset array '" + name + "' has unexpected layout");
    Eigen::VectorXd v(static_cast<long>(b.dims[0]));
    for (long i = 0; i < v.size(); ++i) v[i] = b.f64[static_cast<size_t>(i)];
    return v;
}

} // namespace

void save_assets(const FaceModelAssets& a, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_assets: cannot open " + path);
    f.write("DUBFACE1", 8);
    uint32_t count = 14;
    write_pod(f, count);

    write_matrix(f, "template", a.template_vertices);
    {
        std::vector<int32_t> fi;
        fi.reserve(a.faces.size() * 3);
        for (const auto& t : a.faces)
            for (int k = 0; k < 3; ++k) fi.push_back(t[static_cast<size_t>(k)]);
        write_array(f, "faces", {a.faces.size(), 3}, 1, fi.data(), fi.size() * sizeof(int32_t));
    }
    write_matrix(f, "shape_basis", a.shape_basis);
    write_matrix(f, "expression_basis", a.expression_basis);
    write_matrix(f, "uv", a.uv_coords);
    write_array(f, "albedo_mean", {static_cast<uint64_t>(a.albedo_mean.size())}, 0, a.albedo_mean.data(),
                static_cast<size_t>(a.albedo_mean.size()) * sizeof(double));
    write_matrix(f, "albedo_basis", a.albedo_basis);
    {
        std::vector<int32_t> li(a.landmark_indices.begin(), a.landmark_indices.end());
        write_array(f, "landmarks", {li.size()}, 1, li.data(), li.size() * sizeof(int32_t));
    }
    write_array(f, "neck_weights", {static_cast<uint64_t>(a.joints.neck_weights.size())}, 0,
                a.joints.neck_weights.data(), static_cast<size_t>(a.joints.neck_weights.size()) * sizeof(double));
    write_array(f, "jaw_weights", {static_cast<uint64_t>(a.joints.jaw_weights.size())}, 0, a.joints.jaw_weights.data(),
                static_cast<size_t>(a.joints.jaw_weights.size()) * sizeof(double));
    {
        double piv[6] = {a.joints.neck_pivot.x(), a.joints.neck_pivot.y(), a.joints.neck_pivot.z(),
                         a.joints.jaw_pivot.x(),  a.joints.jaw_pivot.y(),  a.joints.jaw_pivot.z()};
        write_array(f, "joint_pivots", {2, 3}, 0, piv, sizeof(piv));
        double range[2] = {a.joints.jaw_min, a.joints.jaw_max};
        write_array(f, "jaw_range", {2}, 0, range, sizeof(range));
    }
    write_array(f, "mask_labels", {static_cast<uint64_t>(a.mask_labels.h), static_cast<uint64_t>(a.mask_labels.w)}, 0,
                a.mask_labels.data.data(), a.mask_labels.data.size() * sizeof(double));
    {
        double dims[4] = {static_cast<double>(a.V), static_cast<double>(a.Ns), static_cast<double>(a.Ne),
                          static_cast<double>(a.Nt)};
        write_array(f, "dims", {4}, 0, dims, sizeof(dims));
    }
    if (!f) throw IoError("save_assets: write failed for " + path);
}

FaceModelAssets load_assets(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_assets: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, "DUBFACE1", 8) != 0) throw IoError("load_assets: bad magic in " + path);
    uint32_t count = read_pod<uint32_t>(f, path);

    std::map<std::string, ArrayBlob> arrays;
    for (uint32_t i = 0; i < count; ++i) {
        uint16_t nlen = read_pod<uint16_t>(f, path);
        std::string name(nlen, '\0');
        f.read(name.data(), nlen);
        ArrayBlob b;
        b.dtype = read_pod<uint8_t>(f, path);
        uint8_t ndim = read_pod<uint8_t>(f, path);
        size_t numel = 1;
        for (uint8_t d = 0; d < ndim; ++d) {
            b.dims.push_back(read_pod<uint64_t>(f, path));
            numel *= static_cast<size_t>(b.dims.back());
        }
        if (b.dtype == 0) {
            b.f64.resize(numel);
            f.read(reinterpret_cast<char*>(b.f64.data()), static_cast<std::streamsize>(numel * sizeof(double)));
        } else if (b.dtype == 1) {
            b.i32.resize(numel);
            f.read(reinterpret_cast<char*>(b.i32.data()), static_cast<std::streamsize>(numel * sizeof(int32_t)));
        } else {
            throw IoError("load_assets: unknown dtype for array '" + name + "'");
        }
        if (!f) throw IoError("load_assets: truncated array '" + name + "' in " + path);
        arrays[name] = std::move(b);
    }

    auto need = [&](const std::string& n) -> ArrayBlob& {
        auto it = arrays.find(n);
        if (it == arrays.end()) throw IoError("load_assets: missing array '" + n + "' in " + path);
        return it->second;
    };

    FaceModelAssets a;
    {
        const auto& d = need("dims");
        a.V = static_cast<int>(d.f64[0]);
        a.Ns = static_cast<int>(d.f64[1]);
        a.Ne = static_cast<int>(d.f64[2]);
        a.Nt = static_cast<int>(d.f64[3]);
    }
    a.template_vertices = as_matrix(need("template"), "template");
    {
        const auto& fb = need("faces");
        if (fb.dtype != 1 || fb.dims.size() != 2 || fb.dims[1] != 3) throw IoError("load_assets: bad faces array");
        for (size_t t = 0; t < fb.dims[0]; ++t)
            a.faces.push_back({fb.i32[3 * t], fb.i32[3 * t + 1], fb.i32[3 * t + 2]});
    }
    a.shape_basis = as_matrix(need("shape_basis"), "shape_basis");
    a.expression_basis = as_matrix(need("expression_basis"), "expression_basis");
    a.uv_coords = as_matrix(need("uv"), "uv");
    a.albedo_mean = as_vector(need("albedo_mean"), "albedo_mean");
    a.albedo_basis = as_matrix(need("albedo_basis"), "albedo_basis");
    {
        const auto& lb = need("landmarks");
        if (lb.dtype != 1) throw IoError("load_assets: bad landmarks array");
        a.landmark_indices.assign(lb.i32.begin(), lb.i32.end());
    }
    a.joints.neck_weights = as_vector(need("neck_weights"), "neck_weights");
    a.joints.jaw_weights = as_vector(need("jaw_weights"), "jaw_weights");
    {
        const auto& p = need("joint_pivots");
        a.joints.neck_pivot = Eigen::Vector3d(p.f64[0], p.f64[1], p.f64[2]);
        a.joints.jaw_pivot = Eigen::Vector3d(p.f64[3], p.f64[4], p.f64[5]);
        const auto& r = need("jaw_range");
        a.joints.jaw_min = r.f64[0];
        a.joints.jaw_max = r.f64[1];
    }
    {
        const auto& m = need("mask_labels");
        a.mask_labels = Image(static_cast<int>(m.dims[0]), static_cast<int>(m.dims[1]), 1);
        std::copy(m.f64.begin(), m.f64.end(), a.mask_labels.data.begin());
    }

    try {
        a.validate();
    } catch (const ConfigError& e) {
        throw IoError("load_assets: container " + path + " failed validation: " + e.what());
    }
    return a;
}

} // namespace dub
