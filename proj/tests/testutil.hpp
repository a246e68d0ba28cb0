#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <vector>

#include "dub/tensor.hpp"

namespace testutil {

inline double rel_err(double a, double b, double floor = 1e-12) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Relative L2 error between an analytic gradient and central differences
/// over the entries of a tape parameter. `build` must rebuild the scalar
/// loss from the parameter's current values.
inline double tensor_grad_rel_err(dub::ad::Tensor& param, const std::function<dub::ad::Tensor()>& build,
                                  double h = 1e-5) {
    param.zero_grad();
    dub::ad::Tensor loss = build();
    dub::ad::backward(loss);
    std::vector<double> analytic(param.grad(), param.grad() + param.numel());

    double num = 0, den = 0;
    for (size_t i = 0; i < param.numel(); ++i) {
        double orig = param.data()[i];
        param.data()[i] = orig + h;
        double lp = build().item();
        param.data()[i] = orig - h;
        double lm = build().item();
        param.data()[i] = orig;
        double fd = (lp - lm) / (2 * h);
        num += (analytic[i] - fd) * (analytic[i] - fd);
        den += fd * fd;
    }
    return std::sqrt(num / std::max(den, 1e-30));
}

/// Central-difference gradient of f over an Eigen vector.
inline Eigen::VectorXd fd_grad(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                               double h = 1e-5) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (int i = 0; i < x.size(); ++i) {
        xp[i] = x[i] + h;
        double lp = f(xp);
        xp[i] = x[i] - h;
        double lm = f(xp);
        xp[i] = x[i];
        g[i] = (lp - lm) / (2 * h);
    }
    return g;
}

inline double vec_rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-30);
}

} // namespace testutil
