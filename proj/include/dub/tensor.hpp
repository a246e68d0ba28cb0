#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "dub/image.hpp"
#include "dub/rng.hpp"

namespace dub::ad {

using Shape = std::vector<int>;

size_t shape_numel(const Shape& s);

/// One node of the reverse-mode tape. Values and gradients are dense
/// double buffers; `back` pulls this node's gradient and scatters it
/// into the parents. Nodes are created fresh on every forward pass
/// except for parameters, which persist across iterations.
struct Node {
    Shape shape;
    std::vector<double> val;
    std::vector<double> grad; // allocated lazily, same size as val
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> back;

    size_t numel() const { return val.size(); }
    void ensure_grad() {
        if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
    }
};

/// Value-semantic handle to a tape node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

    static Tensor zeros(const Shape& s, bool requires_grad = false);
    static Tensor full(const Shape& s, double v, bool requires_grad = false);
    static Tensor from_data(const Shape& s, std::vector<double> data, bool requires_grad = false);
    static Tensor randn(const Shape& s, Rng& rng, double stddev, bool requires_grad = false);
    static Tensor rand_uniform(const Shape& s, Rng& rng, double lo, double hi, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(n_); }
    const Shape& shape() const { return n_->shape; }
    int dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
    size_t numel() const { return n_->numel(); }

    double* data() { return n_->val.data(); }
    const double* data() const { return n_->val.data(); }
    std::vector<double>& values() { return n_->val; }
    const std::vector<double>& values() const { return n_->val; }

    double* grad() {
        n_->ensure_grad();
        return n_->grad.data();
    }
    bool has_grad() const { return !n_->grad.empty(); }
    void zero_grad() {
        if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
    }

    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool rg) { n_->requires_grad = rg; }

    double item() const; // numel()==1
    std::shared_ptr<Node> node() const { return n_; }

private:
    std::shared_ptr<Node> n_;
};

// ---- graph construction ----------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b); // elementwise
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b); // [m,k]x[k,n]
/// x [n,in], w [out,in], b [out] -> [n,out]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

/// x [N,Ci,H,W], w [Co,Ci,kh,kw], b [Co]; zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
Tensor upsample2x(const Tensor& x); // nearest, [N,C,H,W] -> [N,C,2H,2W]

Tensor leaky_relu(const Tensor& x, double slope = 0.2);
Tensor tanh_t(const Tensor& x);
Tensor abs_t(const Tensor& x);
Tensor square_t(const Tensor& x);

Tensor concat_c(const std::vector<Tensor>& xs);          // along dim 1 of NCHW
Tensor slice_c(const Tensor& x, int c0, int c1);         // channels [c0,c1)
Tensor reshape(const Tensor& x, const Shape& s);

Tensor sum_all(const Tensor& x);  // -> [1]
Tensor mean_all(const Tensor& x); // -> [1]

/// Per-channel modulation: y[n,c,·] = x[n,c,·] * (1 + s[n,c]) + t[n,c].
Tensor film(const Tensor& x, const Tensor& s, const Tensor& t);

/// Bilinear texture lookup. tex [C,Ht,Wt], uv 2-channel image in [0,1]
/// (clamped), coverage 1-channel {0,1}. Output [1,C,H,W], zero outside
/// coverage; gradients flow to the texture only.
Tensor bilinear_sample(const Tensor& tex, const Image& uv, const Image& coverage);

/// Stop-gradient copy of x.
Tensor detach(const Tensor& x);

/// Constant (no-grad) tensor from an image, shape [1,C,H,W].
Tensor from_image(const Image& img);
/// Constant [1,C*repl,H,W] tensor replicating a 1-channel image; used for masks/weights.
Tensor from_image_repl(const Image& img, int repl);
/// First 3*count channels of x (shape [1,3k,H,W]) as k images, values copied.
Image to_image(const Tensor& x, int frame, int channels_per_frame = 3);

/// Reverse pass from a scalar tensor. Gradients accumulate into every
/// requires_grad ancestor; parameter grads persist until zero_grad().
void backward(const Tensor& loss);

} // namespace dub::ad
