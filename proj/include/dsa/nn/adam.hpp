#pragma once

#include <cmath>
#include <vector>

#include "dsa/nn/tape.hpp"

namespace dsa::nn {

// Adaptive-moment stochastic gradient method over a ParameterStore. The
// trainers maximize the ELBO by running backward() on its negation, so
// step() always descends the stored gradients.
class AdamOptimizer {
public:
    explicit AdamOptimizer(ParameterStore& store, double lr, double beta1 = 0.9,
                           double beta2 = 0.999, double eps = 1e-8)
        : store_(store), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        m_.resize(store.entries().size());
        v_.resize(store.entries().size());
        for (std::size_t i = 0; i < m_.size(); ++i) {
            m_[i].assign(store.entries()[i].value.size(), 0.0);
            v_[i].assign(store.entries()[i].value.size(), 0.0);
        }
    }

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < m_.size(); ++i) {
            auto& value = store_.entries()[i].value.values();
            const auto& grad = store_.entries()[i].grad.values();
            auto& m = m_[i];
            auto& v = v_[i];
            for (std::size_t j = 0; j < value.size(); ++j) {
                const double g = grad[j];
                m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
                v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                value[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    ParameterStore& store_;
    double lr_;
    double beta1_;
    double beta2_;
    double eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

// Scales gradients so their global L2 norm does not exceed max_norm.
// Returns the pre-clip norm.
inline double clip_gradient_norm(ParameterStore& store, double max_norm) {
    double sq = 0.0;
    for (const auto& e : store.entries())
        for (double g : e.grad.values()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& e : store.entries())
            for (double& g : e.grad.values()) g *= s;
    }
    return norm;
}

}  // namespace dsa::nn
