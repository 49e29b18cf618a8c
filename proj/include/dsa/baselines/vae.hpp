#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsa/core/random.hpp"
#include "dsa/data/cohort.hpp"
#include "dsa/dssm/train.hpp"
#include "dsa/nn/layers.hpp"

namespace dsa::baselines {

struct VaeConfig {
    int latent_dim = 8;
    int input_dim = 0;
    int encoder_hidden1 = 128;
    int encoder_hidden2 = 64;
    int decoder_hidden = 64;
    double learning_rate = 0.01;
    int epochs = 50;
    int batch_size = 256;
    std::uint64_t seed = 7;
    double grad_clip = 10.0;
    double variance_floor = 1e-6;

    void validate() const {
        require(latent_dim >= 1 && input_dim >= 1, "VaeConfig: dimensions must be positive");
        require(epochs >= 0, "VaeConfig: negative epochs");
    }
};

// Variational auto-encoder over independent rows: three dense layers for the
// encoder, two for the decoder, trained by the one-step objective (the
// sequence objective with T = 1, so the transition term never appears).
// Time is deliberately ignored; rows are consumed with their imputed values.
class VaeModel {
public:
    explicit VaeModel(const VaeConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        RandomStream rng(mix_seed(cfg_.seed, 0x7ae5eedu));
        const int k = cfg_.latent_dim;
        const int D = cfg_.input_dim;
        enc1_ = nn::DenseLayer::create(store_, "encoder.l1", D, cfg_.encoder_hidden1,
                                       nn::Activation::Tanh, rng);
        enc2_ = nn::DenseLayer::create(store_, "encoder.l2", cfg_.encoder_hidden1,
                                       cfg_.encoder_hidden2, nn::Activation::Tanh, rng);
        enc3_ = nn::DenseLayer::create(store_, "encoder.l3", cfg_.encoder_hidden2, 2 * k,
                                       nn::Activation::Identity, rng);
        dec1_ = nn::DenseLayer::create(store_, "decoder.l1", k, cfg_.decoder_hidden,
                                       nn::Activation::Tanh, rng);
        dec2_ = nn::DenseLayer::create(store_, "decoder.l2", cfg_.decoder_hidden, D,
                                       nn::Activation::Identity, rng);
        raw_obs_var_ = store_.add("decoder.rawvar",
                                  Tensor({D}, nn::softplus_inverse(0.5 - cfg_.variance_floor)));
        dummy_context_ = store_.add("encoder.context", Tensor({k}, 0.0));
    }

    const VaeConfig& config() const { return cfg_; }
    int latent_dim() const { return cfg_.latent_dim; }
    int input_dim() const { return cfg_.input_dim; }
    nn::ParameterStore& params() const { return store_; }

    // Sequence-model surface (rows are wrapped as T = 1 series).
    std::vector<nn::Var> encode(nn::Tape& t, const ObservationSeries& s) const {
        std::vector<nn::Var> h(static_cast<std::size_t>(s.steps));
        for (int step = 0; step < s.steps; ++step) {
            std::vector<double> x(static_cast<std::size_t>(s.dims));
            for (int d = 0; d < s.dims; ++d) x[static_cast<std::size_t>(d)] = s.value_at(step, d);
            h[static_cast<std::size_t>(step)] = enc2_.forward(t, enc1_.forward(t, t.input(x)));
        }
        return h;
    }

    dssm::GaussianNodes posterior(nn::Tape& t, nn::Var h, nn::Var /*z_prev unused*/) const {
        nn::Var raw = enc3_.forward(t, h);
        dssm::GaussianNodes g;
        g.mean = t.slice(raw, 0, cfg_.latent_dim);
        g.variance =
            t.softplus_floor(t.slice(raw, cfg_.latent_dim, cfg_.latent_dim), cfg_.variance_floor);
        return g;
    }

    dssm::GaussianNodes transition(nn::Tape&, nn::Var) const {
        throw DataError("VaeModel has no transition model; rows must be T=1 series");
    }

    dssm::GaussianNodes emission(nn::Tape& t, nn::Var z, RandomStream&, bool) const {
        dssm::GaussianNodes g;
        g.mean = dec2_.forward(t, dec1_.forward(t, z));
        g.variance = t.softplus_floor(t.param(raw_obs_var_), cfg_.variance_floor);
        return g;
    }

    nn::Var initial_context(nn::Tape& t) const { return t.param(dummy_context_); }

private:
    VaeConfig cfg_;
    mutable nn::ParameterStore store_;
    nn::DenseLayer enc1_, enc2_, enc3_;
    nn::DenseLayer dec1_, dec2_;
    nn::ParamId raw_obs_var_;
    nn::ParamId dummy_context_;
};

// Every (patient, step) row as an independent T = 1 series with a full mask.
inline std::vector<ObservationSeries> cohort_rows_as_series(const CohortTensor& cohort) {
    std::vector<ObservationSeries> rows;
    for (const auto& p : cohort.patients)
        for (int t = 0; t < p.steps; ++t) {
            ObservationSeries r;
            r.patient_id = p.patient_id;
            r.steps = 1;
            r.dims = p.dims;
            r.values.assign(p.values.begin() + static_cast<std::ptrdiff_t>(t) * p.dims,
                            p.values.begin() + static_cast<std::ptrdiff_t>(t + 1) * p.dims);
            r.mask.assign(static_cast<std::size_t>(p.dims), 1);
            r.signal.assign(static_cast<std::size_t>(p.dims), kSignalMissing);
            rows.push_back(std::move(r));
        }
    return rows;
}

struct VaeFit {
    VaeModel model;
    std::vector<dssm::ElboBreakdown> trace;
};

inline VaeFit fit_vae(const CohortTensor& cohort, const VaeConfig& cfg) {
    VaeFit fit{VaeModel(cfg), {}};
    const auto rows = cohort_rows_as_series(cohort);
    dssm::TrainOptions opt;
    opt.epochs = cfg.epochs;
    opt.batch_size = cfg.batch_size;
    opt.learning_rate = cfg.learning_rate;
    opt.grad_clip = cfg.grad_clip;
    opt.samples_per_step = 1;
    opt.seed = cfg.seed;
    fit.trace = dssm::train_model(fit.model, rows, opt);
    return fit;
}

// Learning-rate grid sweep; reports the final objective per rate and keeps
// the best fit.
struct VaeGridEntry {
    double learning_rate = 0.0;
    double final_elbo = 0.0;
};

struct VaeGridResult {
    std::vector<VaeGridEntry> entries;
    VaeFit best;
    double best_rate = 0.0;
};

inline VaeGridResult fit_vae_grid(const CohortTensor& cohort, VaeConfig cfg,
                                  const std::vector<double>& rates) {
    require(!rates.empty(), "fit_vae_grid: empty rate grid");
    VaeGridResult out{{}, {VaeModel(cfg), {}}, 0.0};
    double best_elbo = 0.0;
    bool first = true;
    for (double rate : rates) {
        cfg.learning_rate = rate;
        VaeFit fit = fit_vae(cohort, cfg);
        const double final_elbo = fit.trace.empty() ? 0.0 : fit.trace.back().total;
        out.entries.push_back({rate, final_elbo});
        if (first || final_elbo > best_elbo) {
            out.best = std::move(fit);
            out.best_rate = rate;
            best_elbo = final_elbo;
            first = false;
        }
    }
    return out;
}

// Encoder-mean latents per patient.
inline LatentTrajectory vae_project_series(const VaeModel& m, const ObservationSeries& s) {
    nn::Tape t(&m.params());
    const auto h = m.encode(t, s);
    LatentTrajectory traj;
    traj.patient_id = s.patient_id;
    traj.steps = s.steps;
    traj.latent_dim = m.latent_dim();
    for (int step = 0; step < s.steps; ++step) {
        auto g = m.posterior(t, h[static_cast<std::size_t>(step)], nn::Var{});
        const auto& mean = t.value(g.mean);
        const auto& var = t.value(g.variance);
        traj.means.insert(traj.means.end(), mean.begin(), mean.end());
        traj.variances.insert(traj.variances.end(), var.begin(), var.end());
    }
    return traj;
}

}  // namespace dsa::baselines
