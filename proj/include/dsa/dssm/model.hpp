#pragma once

#include <string>
#include <vector>

#include "dsa/core/random.hpp"
#include "dsa/data/cohort.hpp"
#include "dsa/dssm/config.hpp"
#include "dsa/nn/layers.hpp"
#include "dsa/nn/tape.hpp"

namespace dsa::dssm {

struct GaussianNodes {
    nn::Var mean;
    nn::Var variance;
};

// Per-step encoder input: the concatenation of (value * mask) and the mask
// itself, so values at masked positions can never influence the model.
inline std::vector<double> masked_encoder_input(const ObservationSeries& s, int t) {
    const int D = s.dims;
    std::vector<double> u(static_cast<std::size_t>(2 * D));
    for (int d = 0; d < D; ++d) {
        const double m = s.mask_at(t, d) ? 1.0 : 0.0;
        u[static_cast<std::size_t>(d)] = s.value_at(t, d) * m;
        u[static_cast<std::size_t>(D + d)] = m;
    }
    return u;
}

// Deep state-space model.
//
// Generative side: the emission mean network is two dense layers
// (latent -> hidden -> D), the emission variance head is a dropout layer
// followed by one dense layer (latent -> D, softplus-floored), and the
// transition network is two dense layers producing a diagonal Gaussian over
// the next latent. Inference side: one dense layer embeds the masked
// observation input, an LSTM runs over the sequence (backward by default so
// the posterior can condition on present and future observations), and a
// dense head maps [h_t ; z_{t-1}] to the posterior Gaussian. A learned
// context vector stands in for z_0 at the first step.
class DssmModel {
public:
    explicit DssmModel(const DssmConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        RandomStream rng(mix_seed(cfg_.seed, 0x5eed1e11u));
        const int k = cfg_.latent_dim;
        const int D = cfg_.input_dim;
        const int H = cfg_.hidden_dim;
        const int L = cfg_.lstm_hidden;
        emission_hidden_ = nn::DenseLayer::create(store_, "emission.hidden", k, H,
                                                  nn::Activation::Tanh, rng);
        emission_mean_ = nn::DenseLayer::create(store_, "emission.mean", H, D,
                                                nn::Activation::Identity, rng);
        emission_var_ = nn::DenseLayer::create(store_, "emission.var", k, D,
                                               nn::Activation::Identity, rng);
        transition_hidden_ = nn::DenseLayer::create(store_, "transition.hidden", k, H,
                                                    nn::Activation::Tanh, rng);
        transition_out_ = nn::DenseLayer::create(store_, "transition.out", H, 2 * k,
                                                 nn::Activation::Identity, rng);
        encoder_embed_ = nn::DenseLayer::create(store_, "encoder.embed", 2 * D, L,
                                                nn::Activation::Tanh, rng);
        encoder_lstm_ = nn::LstmCell::create(store_, "encoder.lstm", L, L, rng);
        posterior_head_ = nn::DenseLayer::create(store_, "posterior.head", L + k, 2 * k,
                                                 nn::Activation::Identity, rng);
        initial_context_ = store_.add("posterior.z0", Tensor({k}, 0.0));
    }

    const DssmConfig& config() const { return cfg_; }
    int latent_dim() const { return cfg_.latent_dim; }
    int input_dim() const { return cfg_.input_dim; }

    // Gradient buffers are scratch space, not logical model state; a trained
    // model stays shareable for concurrent inference on separate tapes.
    nn::ParameterStore& params() const { return store_; }

    std::vector<nn::Var> encode(nn::Tape& t, const ObservationSeries& s) const {
        std::vector<nn::Var> h(static_cast<std::size_t>(s.steps));
        nn::Var hs = t.input(std::vector<double>(static_cast<std::size_t>(cfg_.lstm_hidden), 0.0));
        nn::Var cs = t.input(std::vector<double>(static_cast<std::size_t>(cfg_.lstm_hidden), 0.0));
        const bool backward = cfg_.encoder_direction == EncoderDirection::Backward;
        for (int i = 0; i < s.steps; ++i) {
            const int step = backward ? s.steps - 1 - i : i;
            nn::Var e = encoder_embed_.forward(t, t.input(masked_encoder_input(s, step)));
            auto [h2, c2] = encoder_lstm_.step(t, e, hs, cs);
            hs = h2;
            cs = c2;
            h[static_cast<std::size_t>(step)] = hs;
        }
        return h;
    }

    GaussianNodes posterior(nn::Tape& t, nn::Var h, nn::Var z_prev) const {
        nn::Var raw = posterior_head_.forward(t, t.concat(h, z_prev));
        return split_gaussian(t, raw, cfg_.latent_dim);
    }

    GaussianNodes transition(nn::Tape& t, nn::Var z) const {
        nn::Var raw = transition_out_.forward(t, transition_hidden_.forward(t, z));
        return split_gaussian(t, raw, cfg_.latent_dim);
    }

    GaussianNodes emission(nn::Tape& t, nn::Var z, RandomStream& rng, bool train_mode) const {
        GaussianNodes out;
        out.mean = emission_mean_.forward(t, emission_hidden_.forward(t, z));
        nn::DropoutSpec dropout{cfg_.dropout_rate, train_mode};
        nn::Var dropped = dropout.apply(t, z, rng);
        out.variance = t.softplus_floor(emission_var_.forward(t, dropped), cfg_.variance_floor);
        return out;
    }

    nn::Var initial_context(nn::Tape& t) const { return t.param(initial_context_); }

private:
    GaussianNodes split_gaussian(nn::Tape& t, nn::Var raw, int k) const {
        GaussianNodes g;
        g.mean = t.slice(raw, 0, k);
        g.variance = t.softplus_floor(t.slice(raw, k, k), cfg_.variance_floor);
        return g;
    }

    DssmConfig cfg_;
    mutable nn::ParameterStore store_;
    nn::DenseLayer emission_hidden_, emission_mean_, emission_var_;
    nn::DenseLayer transition_hidden_, transition_out_;
    nn::DenseLayer encoder_embed_;
    nn::LstmCell encoder_lstm_;
    nn::DenseLayer posterior_head_;
    nn::ParamId initial_context_;
};

}  // namespace dsa::dssm
