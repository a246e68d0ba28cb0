#include "dub/optim.hpp"

#include <cmath>

namespace dub {

void AdamTensor::step() {
    ++step_count_;
    double bc1 = 1.0 - std::pow(h_.beta1, static_cast<double>(step_count_));
    double bc2 = 1.0 - std::pow(h_.beta2, static_cast<double>(step_count_));
    for (auto& s : slots_) {
        if (!s.t.has_grad()) continue;
        double* x = s.t.data();
        double* g = s.t.grad();
        for (size_t i = 0; i < s.t.numel(); ++i) {
            s.m[i] = h_.beta1 * s.m[i] + (1.0 - h_.beta1) * g[i];
            s.v[i] = h_.beta2 * s.v[i] + (1.0 - h_.beta2) * g[i] * g[i];
            double mhat = s.m[i] / bc1;
            double vhat = s.v[i] / bc2;
            x[i] -= s.lr * mhat / (std::sqrt(vhat) + h_.eps);
        }
    }
}

void AdamVec::step(Eigen::VectorXd& x, const Eigen::VectorXd& g) {
    ++t_;
    double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (int i = 0; i < x.size(); ++i) {
        m_[i] = b1_ * m_[i] + (1.0 - b1_) * g[i];
        v_[i] = b2_ * v_[i] + (1.0 - b2_) * g[i] * g[i];
        x[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
    }
}

} // namespace dub
