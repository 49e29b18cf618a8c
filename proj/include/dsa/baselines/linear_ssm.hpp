#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dsa/core/random.hpp"
#include "dsa/data/cohort.hpp"
#include "dsa/dssm/sequence.hpp"
#include "dsa/nn/layers.hpp"

namespace dsa::baselines {

struct LinearSsmConfig {
    int latent_dim = 8;
    int input_dim = 0;
    int summary_dim = 0;  // 0 -> 2 * latent_dim
    double learning_rate = 0.01;
    int epochs = 30;
    int batch_size = 32;
    std::uint64_t seed = 7;
    double grad_clip = 10.0;
    double variance_floor = 1e-6;
    dssm::EncoderDirection encoder_direction = dssm::EncoderDirection::Backward;

    int summary() const { return summary_dim > 0 ? summary_dim : 2 * latent_dim; }

    void validate() const {
        require(latent_dim >= 1 && input_dim >= 1, "LinearSsmConfig: dimensions must be positive");
        require(variance_floor > 0.0, "LinearSsmConfig: variance_floor must be positive");
    }
};

// Linearization of the deep state-space model: every network is replaced by
// a single affine map and every variance by an input-independent learnable
// constant. The inference side keeps a running linear summary of the masked
// observations in place of the LSTM. Trains with the same objective and
// trainer as the deep model.
class LinearSsm {
public:
    explicit LinearSsm(const LinearSsmConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        RandomStream rng(mix_seed(cfg_.seed, 0x11e4a5u));
        const int k = cfg_.latent_dim;
        const int D = cfg_.input_dim;
        const int S = cfg_.summary();
        emission_mean_ =
            nn::DenseLayer::create(store_, "emission.mean", k, D, nn::Activation::Identity, rng);
        raw_emission_var_ = store_.add("emission.rawvar", constant_raw(D));
        transition_mean_ =
            nn::DenseLayer::create(store_, "transition.mean", k, k, nn::Activation::Identity, rng);
        raw_transition_var_ = store_.add("transition.rawvar", constant_raw(k));
        summary_input_ = nn::DenseLayer::create(store_, "summary.input", 2 * D, S,
                                                nn::Activation::Identity, rng);
        summary_recur_ = store_.add("summary.recur", scaled_square(S, 0.5, rng));
        posterior_head_ = nn::DenseLayer::create(store_, "posterior.head", k + S, k,
                                                 nn::Activation::Identity, rng);
        raw_posterior_var_ = store_.add("posterior.rawvar", constant_raw(k));
        initial_context_ = store_.add("posterior.z0", Tensor({k}, 0.0));
    }

    const LinearSsmConfig& config() const { return cfg_; }
    int latent_dim() const { return cfg_.latent_dim; }
    int input_dim() const { return cfg_.input_dim; }
    nn::ParameterStore& params() const { return store_; }

    // Running linear summary s_t = P s_{t-1} + B u_t + b over the masked
    // encoder inputs, in the configured direction.
    std::vector<nn::Var> encode(nn::Tape& t, const ObservationSeries& s) const {
        const int S = cfg_.summary();
        std::vector<nn::Var> out(static_cast<std::size_t>(s.steps));
        nn::Var state = t.input(std::vector<double>(static_cast<std::size_t>(S), 0.0));
        const bool backward = cfg_.encoder_direction == dssm::EncoderDirection::Backward;
        for (int i = 0; i < s.steps; ++i) {
            const int step = backward ? s.steps - 1 - i : i;
            nn::Var u = summary_input_.forward(t, t.input(dssm::masked_encoder_input(s, step)));
            state = t.add(t.matvec(t.param(summary_recur_), S, S, state), u);
            out[static_cast<std::size_t>(step)] = state;
        }
        return out;
    }

    dssm::GaussianNodes posterior(nn::Tape& t, nn::Var h, nn::Var z_prev) const {
        dssm::GaussianNodes g;
        g.mean = posterior_head_.forward(t, t.concat(z_prev, h));
        g.variance = t.softplus_floor(t.param(raw_posterior_var_), cfg_.variance_floor);
        return g;
    }

    dssm::GaussianNodes transition(nn::Tape& t, nn::Var z) const {
        dssm::GaussianNodes g;
        g.mean = transition_mean_.forward(t, z);
        g.variance = t.softplus_floor(t.param(raw_transition_var_), cfg_.variance_floor);
        return g;
    }

    dssm::GaussianNodes emission(nn::Tape& t, nn::Var z, RandomStream&, bool) const {
        dssm::GaussianNodes g;
        g.mean = emission_mean_.forward(t, z);
        g.variance = t.softplus_floor(t.param(raw_emission_var_), cfg_.variance_floor);
        return g;
    }

    nn::Var initial_context(nn::Tape& t) const { return t.param(initial_context_); }

    // Pins the generative side to an explicit linear-Gaussian system (the
    // inference side is untouched). Variances must exceed the floor.
    void set_generative(const Eigen::MatrixXd& emission, const Eigen::VectorXd& emission_bias,
                        const Eigen::VectorXd& emission_var, const Eigen::MatrixXd& transition,
                        const Eigen::VectorXd& transition_bias,
                        const Eigen::VectorXd& transition_var) {
        const int k = cfg_.latent_dim;
        const int D = cfg_.input_dim;
        require_shape(emission.rows() == D && emission.cols() == k &&
                          emission_bias.size() == D && emission_var.size() == D,
                      "LinearSsm::set_generative: emission shape mismatch");
        require_shape(transition.rows() == k && transition.cols() == k &&
                          transition_bias.size() == k && transition_var.size() == k,
                      "LinearSsm::set_generative: transition shape mismatch");
        auto& em_w = store_.at(emission_mean_.weight).value;
        auto& em_b = store_.at(emission_mean_.bias).value;
        for (int i = 0; i < D; ++i) {
            em_b.values()[static_cast<std::size_t>(i)] = emission_bias(i);
            for (int j = 0; j < k; ++j) em_w.at(i, j) = emission(i, j);
        }
        auto& tr_w = store_.at(transition_mean_.weight).value;
        auto& tr_b = store_.at(transition_mean_.bias).value;
        for (int i = 0; i < k; ++i) {
            tr_b.values()[static_cast<std::size_t>(i)] = transition_bias(i);
            for (int j = 0; j < k; ++j) tr_w.at(i, j) = transition(i, j);
        }
        for (int i = 0; i < D; ++i)
            store_.at(raw_emission_var_).value.values()[static_cast<std::size_t>(i)] =
                raw_for_variance(emission_var(i));
        for (int i = 0; i < k; ++i)
            store_.at(raw_transition_var_).value.values()[static_cast<std::size_t>(i)] =
                raw_for_variance(transition_var(i));
    }

    // Analytic evaluation of the objective for this all-affine model. The
    // posterior chain z_t = W_z z_{t-1} + (W_s s_t + b) + sqrt(V_q) eps has
    // Gaussian marginals whose means and full covariances propagate in closed
    // form, so every expectation in the objective is exact. Used by the
    // bound-validity checks against the Kalman log-likelihood.
    dssm::ElboBreakdown analytic_elbo(const ObservationSeries& series) const {
        series.validate();
        require_shape(series.dims == cfg_.input_dim, "analytic_elbo: dimension mismatch");
        const int k = cfg_.latent_dim;
        const int D = cfg_.input_dim;
        const int S = cfg_.summary();

        const Eigen::MatrixXd C = matrix_of(emission_mean_.weight, D, k);
        const Eigen::VectorXd d = vector_of(store_.at(emission_mean_.bias).value);
        const Eigen::VectorXd R = variance_of(raw_emission_var_);
        const Eigen::MatrixXd A = matrix_of(transition_mean_.weight, k, k);
        const Eigen::VectorXd bA = vector_of(store_.at(transition_mean_.bias).value);
        const Eigen::VectorXd Q = variance_of(raw_transition_var_);
        const Eigen::MatrixXd head = matrix_of(posterior_head_.weight, k, k + S);
        const Eigen::MatrixXd Wz = head.leftCols(k);
        const Eigen::MatrixXd Ws = head.rightCols(S);
        const Eigen::VectorXd bq = vector_of(store_.at(posterior_head_.bias).value);
        const Eigen::VectorXd Vq = variance_of(raw_posterior_var_);
        const Eigen::VectorXd z0 = vector_of(store_.at(initial_context_).value);

        // Deterministic summary pass (same arithmetic as encode()).
        const Eigen::MatrixXd P = matrix_of(summary_recur_, S, S);
        const Eigen::MatrixXd B = matrix_of(summary_input_.weight, S, 2 * D);
        const Eigen::VectorXd bs = vector_of(store_.at(summary_input_.bias).value);
        std::vector<Eigen::VectorXd> summary(static_cast<std::size_t>(series.steps));
        {
            Eigen::VectorXd state = Eigen::VectorXd::Zero(S);
            const bool backward = cfg_.encoder_direction == dssm::EncoderDirection::Backward;
            for (int i = 0; i < series.steps; ++i) {
                const int step = backward ? series.steps - 1 - i : i;
                const auto u = dssm::masked_encoder_input(series, step);
                state = P * state + B * Eigen::Map<const Eigen::VectorXd>(u.data(),
                                                                          static_cast<long>(u.size())) +
                        bs;
                summary[static_cast<std::size_t>(step)] = state;
            }
        }

        dssm::ElboBreakdown out;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k, k);
        for (int step = 0; step < series.steps; ++step) {
            const Eigen::VectorXd offset = Ws * summary[static_cast<std::size_t>(step)] + bq;
            if (step == 0) {
                mean = Wz * z0 + offset;
                cov = Vq.asDiagonal();
                for (int i = 0; i < k; ++i)
                    out.initial_kl +=
                        0.5 * (std::log(1.0 / Vq(i)) + Vq(i) + mean(i) * mean(i) - 1.0);
            } else {
                // E over z ~ N(mean, cov) of KL(q(.|z) || p(.|z)) with both
                // means affine in z: quadratic expectation in closed form.
                const Eigen::MatrixXd M = Wz - A;
                const Eigen::VectorXd v = offset - bA;
                const Eigen::VectorXd shift = M * mean + v;
                const Eigen::MatrixXd spread = M * cov * M.transpose();
                for (int i = 0; i < k; ++i) {
                    const double expect_sq = shift(i) * shift(i) + spread(i, i);
                    out.transition_kl +=
                        0.5 * (std::log(Q(i) / Vq(i)) + (Vq(i) + expect_sq) / Q(i) - 1.0);
                }
                mean = Wz * mean + offset;
                cov = Wz * cov * Wz.transpose();
                cov += Eigen::MatrixXd(Vq.asDiagonal());
            }
            // Masked reconstruction: E[log N(x_d | (C z + d)_d, R_d)].
            const Eigen::MatrixXd cscT = C * cov * C.transpose();
            const Eigen::VectorXd xhat = C * mean + d;
            for (int dd = 0; dd < D; ++dd) {
                if (!series.mask_at(step, dd)) continue;
                const double r = series.value_at(step, dd) - xhat(dd);
                out.reconstruction += -0.5 * (nn::kLog2Pi + std::log(R(dd))) -
                                      0.5 * (r * r + cscT(dd, dd)) / R(dd);
            }
        }
        out.total = out.reconstruction - out.initial_kl - out.transition_kl;
        return out;
    }

private:
    Tensor constant_raw(int n) const {
        return Tensor({n}, nn::softplus_inverse(0.5 - cfg_.variance_floor));
    }

    static Tensor scaled_square(int n, double scale, RandomStream& rng) {
        Tensor t = nn::glorot_uniform(n, n, rng);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] *= scale;
        return t;
    }

    double raw_for_variance(double v) const {
        require(v > cfg_.variance_floor, "LinearSsm: variance must exceed the floor");
        return nn::softplus_inverse(v - cfg_.variance_floor);
    }

    Eigen::MatrixXd matrix_of(nn::ParamId id, int rows, int cols) const {
        const auto& v = store_.at(id).value.values();
        Eigen::MatrixXd m(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                m(i, j) = v[static_cast<std::size_t>(i) * cols + static_cast<std::size_t>(j)];
        return m;
    }

    static Eigen::VectorXd vector_of(const Tensor& t) {
        Eigen::VectorXd v(static_cast<long>(t.size()));
        for (std::size_t i = 0; i < t.size(); ++i) v(static_cast<long>(i)) = t.values()[i];
        return v;
    }

    Eigen::VectorXd variance_of(nn::ParamId raw) const {
        const auto& v = store_.at(raw).value.values();
        Eigen::VectorXd out(static_cast<long>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i)
            out(static_cast<long>(i)) = nn::softplus(v[i]) + cfg_.variance_floor;
        return out;
    }

    LinearSsmConfig cfg_;
    mutable nn::ParameterStore store_;
    nn::DenseLayer emission_mean_;
    nn::ParamId raw_emission_var_;
    nn::DenseLayer transition_mean_;
    nn::ParamId raw_transition_var_;
    nn::DenseLayer summary_input_;
    nn::ParamId summary_recur_;
    nn::DenseLayer posterior_head_;
    nn::ParamId raw_posterior_var_;
    nn::ParamId initial_context_;
};

}  // namespace dsa::baselines
