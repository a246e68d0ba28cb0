#include "dub/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "dub/errors.hpp"

namespace dub::ad {

size_t shape_numel(const Shape& s) {
    size_t n = 1;
    for (int d : s) n *= static_cast<size_t>(d);
    return n;
}

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

static std::shared_ptr<Node> make_node(Shape s) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(s);
    n->val.assign(shape_numel(n->shape), 0.0);
    return n;
}

static Tensor op_node(Shape s, std::vector<std::shared_ptr<Node>> parents, std::function<void(Node&)> back) {
    auto n = make_node(std::move(s));
    bool rg = false;
    for (auto& p : parents) rg = rg || p->requires_grad;
    n->requires_grad = rg;
    if (rg) {
        n->parents = std::move(parents);
        n->back = std::move(back);
    }
    return Tensor(n);
}

Tensor Tensor::zeros(const Shape& s, bool requires_grad) {
    auto n = make_node(s);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::full(const Shape& s, double v, bool requires_grad) {
    auto n = make_node(s);
    std::fill(n->val.begin(), n->val.end(), v);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from_data(const Shape& s, std::vector<double> data, bool requires_grad) {
    if (data.size() != shape_numel(s)) throw ConfigError("Tensor::from_data: size mismatch");
    auto n = std::make_shared<Node>();
    n->shape = s;
    n->val = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::randn(const Shape& s, Rng& rng, double stddev, bool requires_grad) {
    auto n = make_node(s);
    for (auto& v : n->val) v = rng.normal(0.0, stddev);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::rand_uniform(const Shape& s, Rng& rng, double lo, double hi, bool requires_grad) {
    auto n = make_node(s);
    for (auto& v : n->val) v = rng.uniform(lo, hi);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

double Tensor::item() const {
    if (numel() != 1) throw ConfigError("Tensor::item: tensor is not scalar");
    return n_->val[0];
}

static void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) throw ConfigError(std::string(op) + ": shape mismatch");
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    auto pa = a.node(), pb = b.node();
    Tensor out = op_node(a.shape(), {pa, pb}, [pa, pb](Node& n) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] += n.grad[i];
        }
    });
    for (size_t i = 0; i < out.numel(); ++i) out.data()[i] = pa->val[i] + pb->val[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    auto pa = a.node(), pb = b.node();
    Tensor out = op_node(a.shape(), {pa, pb}, [pa, pb](Node& n) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] -= n.grad[i];
        }
    });
    for (size_t i = 0; i < out.numel(); ++i) out.data()[i] = pa->val[i] - pb->val[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    auto pa = a.node(), pb = b.node();
    Tensor out = op_node(a.shape(), {pa, pb}, [pa, pb](Node& n) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] * pb->val[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] += n.grad[i] * pa->val[i];
        }
    });
    for (size_t i = 0; i < out.numel(); ++i) out.data()[i] = pa->val[i] * pb->val[i];
    return out;
}

Tensor scale(const Tensor& a, double c) {
    auto pa = a.node();
    Tensor out = op_node(a.shape(), {pa}, [pa, c](Node& n) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += c * n.grad[i];
    });
    for (size_t i = 0; i < out.numel(); ++i) out.data()[i] = c * pa->val[i];
    return out;
}

Tensor add_scalar(const Tensor& a, double c) {
    auto pa = a.node();
    Tensor out = op_node(a.shape(), {pa}, [pa](Node& n) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
    });
    for (size_t i = 0; i < out.numel(); ++i) out.data()[i] = pa->val[i] + c;
    return out;
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0))
        throw ConfigError("matmul: incompatible shapes");
    int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    auto pa = a.node(), pb = b.node();
    Tensor out = op_node({m, n}, {pa, pb}, [pa, pb, m, k, n](Node& nd) {
        CMapRM G(nd.grad.data(), m, n);
        if (pa->requires_grad) {
            pa->ensure_grad();
            MapRM dA(pa->grad.data(), m, k);
            CMapRM B(pb->val.data(), k, n);
            dA.noalias() += G * B.transpose();
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            MapRM dB(pb->grad.data(), k, n);
            CMapRM A(pa->val.data(), m, k);
            dB.noalias() += A.transpose() * G;
        }
    });
    MapRM O(out.data(), m, n);
    CMapRM A(pa->val.data(), m, k);
    CMapRM B(pb->val.data(), k, n);
    O.noalias() = A * B;
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.shape().size() != 2 || w.shape().size() != 2 || x.dim(1) != w.dim(1) || b.dim(0) != w.dim(0))
        throw ConfigError("linear: incompatible shapes");
    int n = x.dim(0), in = x.dim(1), out_dim = w.dim(0);
    auto px = x.node(), pw = w.node(), pb = b.node();
    Tensor out = op_node({n, out_dim}, {px, pw, pb}, [px, pw, pb, n, in, out_dim](Node& nd) {
        CMapRM G(nd.grad.data(), n, out_dim);
        if (px->requires_grad) {
            px->ensure_grad();
            MapRM dX(px->grad.data(), n, in);
            CMapRM W(pw->val.data(), out_dim, in);
            dX.noalias() += G * W;
        }
        if (pw->requires_grad) {
            pw->ensure_grad();
            MapRM dW(pw->grad.data(), out_dim, in);
            CMapRM X(px->val.data(), n, in);
            dW.noalias() += G.transpose() * X;
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < out_dim; ++c) pb->grad[static_cast<size_t>(c)] += G(r, c);
        }
    });
    MapRM O(out.data(), n, out_dim);
    CMapRM X(px->val.data(), n, in);
    CMapRM W(pw->val.data(), out_dim, in);
    O.noalias() = X * W.transpose();
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < out_dim; ++c) O(r, c) += pb->val[static_cast<size_t>(c)];
    return out;
}

// im2col: x [Ci,H,W] -> col [Ci*kh*kw, Ho*Wo]
static void im2col(const double* x, int Ci, int H, int W, int kh, int kw, int stride, int pad, int Ho, int Wo,
                   double* col) {
    for (int ci = 0; ci < Ci; ++ci)
        for (int dy = 0; dy < kh; ++dy)
            for (int dx = 0; dx < kw; ++dx) {
                double* dst = col + ((static_cast<size_t>(ci) * kh + dy) * kw + dx) * (static_cast<size_t>(Ho) * Wo);
                for (int oy = 0; oy < Ho; ++oy) {
                    int iy = oy * stride - pad + dy;
                    for (int ox = 0; ox < Wo; ++ox) {
                        int ix = ox * stride - pad + dx;
                        double v = 0.0;
                        if (iy >= 0 && iy < H && ix >= 0 && ix < W)
                            v = x[(static_cast<size_t>(ci) * H + iy) * W + ix];
                        dst[static_cast<size_t>(oy) * Wo + ox] = v;
                    }
                }
            }
}

static void col2im_add(const double* col, int Ci, int H, int W, int kh, int kw, int stride, int pad, int Ho, int Wo,
                       double* x) {
    for (int ci = 0; ci < Ci; ++ci)
        for (int dy = 0; dy < kh; ++dy)
            for (int dx = 0; dx < kw; ++dx) {
                const double* src = col + ((static_cast<size_t>(ci) * kh + dy) * kw + dx) * (static_cast<size_t>(Ho) * Wo);
                for (int oy = 0; oy < Ho; ++oy) {
                    int iy = oy * stride - pad + dy;
                    if (iy < 0 || iy >= H) continue;
                    for (int ox = 0; ox < Wo; ++ox) {
                        int ix = ox * stride - pad + dx;
                        if (ix < 0 || ix >= W) continue;
                        x[(static_cast<size_t>(ci) * H + iy) * W + ix] += src[static_cast<size_t>(oy) * Wo + ox];
                    }
                }
            }
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    if (x.shape().size() != 4 || w.shape().size() != 4) throw ConfigError("conv2d: expects 4-d input and kernel");
    int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    int Co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != Ci) throw ConfigError("conv2d: channel mismatch");
    if (b.dim(0) != Co) throw ConfigError("conv2d: bias size mismatch");
    int Ho = (H + 2 * pad - kh) / stride + 1;
    int Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho <= 0 || Wo <= 0) throw ConfigError("conv2d: output collapses to zero size");

    auto px = x.node(), pw = w.node(), pb = b.node();
    int K = Ci * kh * kw, P = Ho * Wo;

    Tensor out = op_node({N, Co, Ho, Wo}, {px, pw, pb},
                         [px, pw, pb, N, Ci, H, W, Co, kh, kw, stride, pad, Ho, Wo, K, P](Node& nd) {
        std::vector<double> col(static_cast<size_t>(K) * P);
        std::vector<double> dcol(static_cast<size_t>(K) * P);
        CMapRM Wm(pw->val.data(), Co, K);
        for (int nidx = 0; nidx < N; ++nidx) {
            CMapRM G(nd.grad.data() + static_cast<size_t>(nidx) * Co * P, Co, P);
            if (pw->requires_grad || pb->requires_grad) {
                im2col(px->val.data() + static_cast<size_t>(nidx) * Ci * H * W, Ci, H, W, kh, kw, stride, pad, Ho, Wo,
                       col.data());
                if (pw->requires_grad) {
                    pw->ensure_grad();
                    MapRM dW(pw->grad.data(), Co, K);
                    CMapRM C(col.data(), K, P);
                    dW.noalias() += G * C.transpose();
                }
                if (pb->requires_grad) {
                    pb->ensure_grad();
                    for (int co = 0; co < Co; ++co) pb->grad[static_cast<size_t>(co)] += G.row(co).sum();
                }
            }
            if (px->requires_grad) {
                px->ensure_grad();
                MapRM dC(dcol.data(), K, P);
                dC.noalias() = Wm.transpose() * G;
                col2im_add(dcol.data(), Ci, H, W, kh, kw, stride, pad, Ho, Wo,
                           px->grad.data() + static_cast<size_t>(nidx) * Ci * H * W);
            }
        }
    });

    std::vector<double> col(static_cast<size_t>(K) * P);
    CMapRM Wm(pw->val.data(), Co, K);
    for (int nidx = 0; nidx < N; ++nidx) {
        im2col(px->val.data() + static_cast<size_t>(nidx) * Ci * H * W, Ci, H, W, kh, kw, stride, pad, Ho, Wo,
               col.data());
        MapRM O(out.data() + static_cast<size_t>(nidx) * Co * P, Co, P);
        CMapRM C(col.data(), K, P);
        O.noalias() = Wm * C;
        for (int co = 0; co < Co; ++co) O.row(co).array() += pb->val[static_cast<size_t>(co)];
    }
    return out;
}

Tensor upsample2x(const Tensor& x) {
    if (x.shape().size() != 4) throw ConfigError("upsample2x: expects 4-d input");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    auto px = x.node();
    Tensor out = op_node({N, C, 2 * H, 2 * W}, {px}, [px, N, C, H, W](Node& nd) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        size_t planes = static_cast<size_t>(N) * C;
        for (size_t p = 0; p < planes; ++p) {
            const double* g = nd.grad.data() + p * 4 * H * W;
            double* dx = px->grad.data() + p * H * W;
            for (int y = 0; y < H; ++y)
                for (int x2 = 0; x2 < W; ++x2) {
                    size_t o = (static_cast<size_t>(2 * y) * 2 * W) + 2 * x2;
                    dx[static_cast<size_t>(y) * W + x2] +=
                        g[o] + g[o + 1] + g[o + 2 * W] + g[o + 2 * W + 1];
                }
        }
    });
    size_t planes = static_cast<size_t>(N) * C;
    for (size_t p = 0; p < planes; ++p) {
        const double* src = px->val.data() + p * H * W;
        double* dst = out.data() + p * 4 * H * W;
        for (int y = 0; y < H; ++y)
            for (int x2 = 0; x2 < W; ++x2) {
                double v = src[static_cast<size_t>(y) * W + x2];
                size_t o = (static_cast<size_t>(2 * y) * 2 * W) + 2 * x2;
                dst[o] = dst[o + 1] = dst[o + 2 * W] = dst[o + 2 * W + 1] = v;
            }
    }
    return out;
}

Tensor leaky_relu(const Tensor& x, double slope) {
    auto px = x.node();
    Tensor out = op_node(x.shape(), {px}, [px, slope](Node& nd) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (size_t i = 0; i < nd.grad.size(); ++i)
            px->grad[i] += nd.grad[i] * (px->val[i] > 0 ? 1.0 : slope);
    });
    for (size_t i = 0; i < out.numel(); ++i) {
        double v = px->val[i];
        out.data()[i] = v > 0 ? v : slope * v;
    }
    return out;
}

Tensor tanh_t(const Tensor& x) {
    auto px = x.node();
    auto n = make_node(x.shape());
    for (size_t i = 0; i < n->val.size(); ++i) n->val[i] = std::tanh(px->val[i]);
    n->requires_grad = px->requires_grad;
    if (n->requires_grad) {
        n->parents = {px};
        auto self = n.get();
        n->back = [px, self](Node& nd) {
            px->ensure_grad();
            for (size_t i = 0; i < nd.grad.size(); ++i) {
                double y = self->val[i];
                px->grad[i] += nd.grad[i] * (1.0 - y * y);
            }
        };
    }
    return Tensor(n);
}

Tensor abs_t(const Tensor& x) {
    auto px = x.node();
    Tensor out = op_node(x.shape(), {px}, [px](Node& nd) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (size_t i = 0; i < nd.grad.size(); ++i) {
            double v = px->val[i];
            px->grad[i] += nd.grad[i] * (v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0));
        }
    });
    for (size_t i = 0; i < out.numel(); ++i) out.data()[i] = std::abs(px->val[i]);
    return out;
}

Tensor square_t(const Tensor& x) {
    auto px = x.node();
    Tensor out = op_node(x.shape(), {px}, [px](Node& nd) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (size_t i = 0; i < nd.grad.size(); ++i) px->grad[i] += nd.grad[i] * 2.0 * px->val[i];
    });
    for (size_t i = 0; i < out.numel(); ++i) out.data()[i] = px->val[i] * px->val[i];
    return out;
}

Tensor concat_c(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw ConfigError("concat_c: empty input list");
    int N = xs[0].dim(0), H = xs[0].dim(2), W = xs[0].dim(3);
    int Ctot = 0;
    std::vector<std::shared_ptr<Node>> parents;
    for (const auto& t : xs) {
        if (t.shape().size() != 4 || t.dim(0) != N || t.dim(2) != H || t.dim(3) != W)
            throw ConfigError("concat_c: shape mismatch");
        Ctot += t.dim(1);
        parents.push_back(t.node());
    }
    size_t plane = static_cast<size_t>(H) * W;
    Tensor out = op_node({N, Ctot, H, W}, parents, [parents, N, Ctot, plane](Node& nd) {
        for (int nidx = 0; nidx < N; ++nidx) {
            size_t off = static_cast<size_t>(nidx) * Ctot * plane;
            for (auto& p : parents) {
                int c = p->shape[1];
                size_t sz = static_cast<size_t>(c) * plane;
                if (p->requires_grad) {
                    p->ensure_grad();
                    double* dst = p->grad.data() + static_cast<size_t>(nidx) * sz;
                    const double* src = nd.grad.data() + off;
                    for (size_t i = 0; i < sz; ++i) dst[i] += src[i];
                }
                off += sz;
            }
        }
    });
    for (int nidx = 0; nidx < N; ++nidx) {
        size_t off = static_cast<size_t>(nidx) * Ctot * plane;
        for (auto& p : parents) {
            size_t sz = static_cast<size_t>(p->shape[1]) * plane;
            std::copy(p->val.begin() + static_cast<long>(nidx * sz),
                      p->val.begin() + static_cast<long>((nidx + 1) * sz), out.data() + off);
            off += sz;
        }
    }
    return out;
}

Tensor slice_c(const Tensor& x, int c0, int c1) {
    if (x.shape().size() != 4 || c0 < 0 || c1 > x.dim(1) || c0 >= c1) throw ConfigError("slice_c: bad range");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    int Cs = c1 - c0;
    size_t plane = static_cast<size_t>(H) * W;
    auto px = x.node();
    Tensor out = op_node({N, Cs, H, W}, {px}, [px, N, C, c0, Cs, plane](Node& nd) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (int nidx = 0; nidx < N; ++nidx) {
            double* dst = px->grad.data() + (static_cast<size_t>(nidx) * C + c0) * plane;
            const double* src = nd.grad.data() + static_cast<size_t>(nidx) * Cs * plane;
            for (size_t i = 0; i < static_cast<size_t>(Cs) * plane; ++i) dst[i] += src[i];
        }
    });
    for (int nidx = 0; nidx < N; ++nidx) {
        const double* src = px->val.data() + (static_cast<size_t>(nidx) * C + c0) * plane;
        std::copy(src, src + static_cast<size_t>(Cs) * plane,
                  out.data() + static_cast<size_t>(nidx) * Cs * plane);
    }
    return out;
}

Tensor reshape(const Tensor& x, const Shape& s) {
    if (shape_numel(s) != x.numel()) throw ConfigError("reshape: numel mismatch");
    auto px = x.node();
    Tensor out = op_node(s, {px}, [px](Node& nd) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (size_t i = 0; i < nd.grad.size(); ++i) px->grad[i] += nd.grad[i];
    });
    std::copy(px->val.begin(), px->val.end(), out.data());
    return out;
}

Tensor sum_all(const Tensor& x) {
    auto px = x.node();
    Tensor out = op_node({1}, {px}, [px](Node& nd) {
        if (!px->requires_grad) return;
        px->ensure_grad();
        double g = nd.grad[0];
        for (auto& v : px->grad) v += g;
    });
    double s = 0;
    for (double v : px->val) s += v;
    out.data()[0] = s;
    return out;
}

Tensor mean_all(const Tensor& x) {
    double inv = 1.0 / static_cast<double>(x.numel());
    return scale(sum_all(x), inv);
}

Tensor film(const Tensor& x, const Tensor& s, const Tensor& t) {
    if (x.shape().size() != 4 || s.shape().size() != 2 || t.shape().size() != 2)
        throw ConfigError("film: expects x [N,C,H,W], s/t [N,C]");
    int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (s.dim(0) != N || s.dim(1) != C || t.dim(0) != N || t.dim(1) != C) throw ConfigError("film: shape mismatch");
    size_t plane = static_cast<size_t>(H) * W;
    auto px = x.node(), ps = s.node(), pt = t.node();
    Tensor out = op_node(x.shape(), {px, ps, pt}, [px, ps, pt, N, C, plane](Node& nd) {
        for (int nidx = 0; nidx < N; ++nidx)
            for (int c = 0; c < C; ++c) {
                size_t off = (static_cast<size_t>(nidx) * C + c) * plane;
                double sv = ps->val[static_cast<size_t>(nidx) * C + c];
                if (px->requires_grad) {
                    px->ensure_grad();
                    for (size_t i = 0; i < plane; ++i) px->grad[off + i] += nd.grad[off + i] * (1.0 + sv);
                }
                if (ps->requires_grad) {
                    ps->ensure_grad();
                    double acc = 0;
                    for (size_t i = 0; i < plane; ++i) acc += nd.grad[off + i] * px->val[off + i];
                    ps->grad[static_cast<size_t>(nidx) * C + c] += acc;
                }
                if (pt->requires_grad) {
                    pt->ensure_grad();
                    double acc = 0;
                    for (size_t i = 0; i < plane; ++i) acc += nd.grad[off + i];
                    pt->grad[static_cast<size_t>(nidx) * C + c] += acc;
                }
            }
    });
    for (int nidx = 0; nidx < N; ++nidx)
        for (int c = 0; c < C; ++c) {
            size_t off = (static_cast<size_t>(nidx) * C + c) * plane;
            double sv = ps->val[static_cast<size_t>(nidx) * C + c];
            double tv = pt->val[static_cast<size_t>(nidx) * C + c];
            for (size_t i = 0; i < plane; ++i) out.data()[off + i] = px->val[off + i] * (1.0 + sv) + tv;
        }
    return out;
}

Tensor bilinear_sample(const Tensor& tex, const Image& uv, const Image& coverage) {
    if (tex.shape().size() != 3) throw ConfigError("bilinear_sample: texture must be [C,Ht,Wt]");
    if (uv.c != 2) throw ConfigError("bilinear_sample: uv image must have 2 channels");
    int C = tex.dim(0), Ht = tex.dim(1), Wt = tex.dim(2);
    int H = uv.h, W = uv.w;
    auto ptex = tex.node();

    // Precompute corner indices/weights once; shared by forward and backward.
    struct Tap {
        int i00, i01, i10, i11;
        double w00, w01, w10, w11;
    };
    auto taps = std::make_shared<std::vector<Tap>>();
    auto pix = std::make_shared<std::vector<int>>(); // covered pixel linear index
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (coverage.at(0, y, x) <= 0.5) continue;
            double u = std::clamp(uv.at(0, y, x), 0.0, 1.0);
            double v = std::clamp(uv.at(1, y, x), 0.0, 1.0);
            double tx = u * (Wt - 1), ty = v * (Ht - 1);
            int x0 = std::min(static_cast<int>(tx), Wt - 2 >= 0 ? Wt - 2 : 0);
            int y0 = std::min(static_cast<int>(ty), Ht - 2 >= 0 ? Ht - 2 : 0);
            double fx = tx - x0, fy = ty - y0;
            Tap t;
            t.i00 = y0 * Wt + x0;
            t.i01 = y0 * Wt + std::min(x0 + 1, Wt - 1);
            t.i10 = std::min(y0 + 1, Ht - 1) * Wt + x0;
            t.i11 = std::min(y0 + 1, Ht - 1) * Wt + std::min(x0 + 1, Wt - 1);
            t.w00 = (1 - fy) * (1 - fx);
            t.w01 = (1 - fy) * fx;
            t.w10 = fy * (1 - fx);
            t.w11 = fy * fx;
            taps->push_back(t);
            pix->push_back(y * W + x);
        }

    size_t plane = static_cast<size_t>(H) * W;
    size_t tplane = static_cast<size_t>(Ht) * Wt;
    Tensor out = op_node({1, C, H, W}, {ptex}, [ptex, taps, pix, C, plane, tplane](Node& nd) {
        if (!ptex->requires_grad) return;
        ptex->ensure_grad();
        for (int c = 0; c < C; ++c) {
            double* dtex = ptex->grad.data() + static_cast<size_t>(c) * tplane;
            const double* g = nd.grad.data() + static_cast<size_t>(c) * plane;
            for (size_t k = 0; k < taps->size(); ++k) {
                const Tap& t = (*taps)[k];
                double gv = g[(*pix)[k]];
                dtex[t.i00] += gv * t.w00;
                dtex[t.i01] += gv * t.w01;
                dtex[t.i10] += gv * t.w10;
                dtex[t.i11] += gv * t.w11;
            }
        }
    });
    for (int c = 0; c < C; ++c) {
        const double* tx = ptex->val.data() + static_cast<size_t>(c) * tplane;
        double* o = out.data() + static_cast<size_t>(c) * plane;
        for (size_t k = 0; k < taps->size(); ++k) {
            const Tap& t = (*taps)[k];
            o[(*pix)[k]] = tx[t.i00] * t.w00 + tx[t.i01] * t.w01 + tx[t.i10] * t.w10 + tx[t.i11] * t.w11;
        }
    }
    return out;
}

Tensor detach(const Tensor& x) {
    auto n = make_node(x.shape());
    n->val = x.values();
    return Tensor(n);
}

Tensor from_image(const Image& img) {
    auto n = make_node({1, img.c, img.h, img.w});
    n->val.assign(img.data.begin(), img.data.end());
    return Tensor(n);
}

Tensor from_image_repl(const Image& img, int repl) {
    if (img.c != 1) throw ConfigError("from_image_repl: expects 1-channel image");
    auto n = make_node({1, repl, img.h, img.w});
    size_t plane = img.plane();
    for (int r = 0; r < repl; ++r)
        std::copy(img.data.begin(), img.data.end(), n->val.begin() + static_cast<long>(r * plane));
    return Tensor(n);
}

Image to_image(const Tensor& x, int frame, int channels_per_frame) {
    if (x.shape().size() != 4 || x.dim(0) != 1) throw ConfigError("to_image: expects [1,C,H,W]");
    int H = x.dim(2), W = x.dim(3);
    Image img(H, W, channels_per_frame);
    size_t plane = static_cast<size_t>(H) * W;
    const double* src = x.data() + static_cast<size_t>(frame) * channels_per_frame * plane;
    std::copy(src, src + static_cast<size_t>(channels_per_frame) * plane, img.data.begin());
    return img;
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1) throw ConfigError("backward: root must be scalar");
    if (!loss.requires_grad()) return;

    // iterative post-order DFS
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx].get();
            ++idx;
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    auto root = loss.node();
    root->ensure_grad();
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->back && !n->grad.empty()) n->back(*n);
    }
}

} // namespace dub::ad
