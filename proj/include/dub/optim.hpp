#pragma once

#include <Eigen/Core>
#include <vector>

#include "dub/tensor.hpp"

namespace dub {

/// Adam over tape parameters, optional per-parameter learning rate.
class AdamTensor {
public:
    struct Hyper {
        double lr = 1e-3;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    AdamTensor() = default;
    explicit AdamTensor(Hyper h) : h_(h) {}

    void add_param(const ad::Tensor& t, double lr_override = -1.0) {
        Slot s;
        s.t = t;
        s.lr = lr_override > 0 ? lr_override : h_.lr;
        s.m.assign(t.numel(), 0.0);
        s.v.assign(t.numel(), 0.0);
        slots_.push_back(std::move(s));
    }

    void step();
    void zero_grad() {
        for (auto& s : slots_) s.t.zero_grad();
    }
    size_t num_params() const {
        size_t n = 0;
        for (const auto& s : slots_) n += s.t.numel();
        return n;
    }

private:
    struct Slot {
        ad::Tensor t;
        double lr = 0;
        std::vector<double> m, v;
    };
    Hyper h_;
    std::vector<Slot> slots_;
    long step_count_ = 0;
};

/// Adam over a flat Eigen vector; used by the monocular fitter.
class AdamVec {
public:
    AdamVec(int dim, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(Eigen::VectorXd::Zero(dim)), v_(Eigen::VectorXd::Zero(dim)) {}

    void step(Eigen::VectorXd& x, const Eigen::VectorXd& g);
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

private:
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
    Eigen::VectorXd m_, v_;
};

} // namespace dub
