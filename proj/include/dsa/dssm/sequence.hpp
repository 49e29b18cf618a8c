#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dsa/core/random.hpp"
#include "dsa/data/cohort.hpp"
#include "dsa/dssm/config.hpp"
#include "dsa/dssm/model.hpp"
#include "dsa/nn/tape.hpp"

namespace dsa::dssm {

// Variational objective terms. total = reconstruction - initial_kl -
// transition_kl by construction.
struct ElboBreakdown {
    double reconstruction = 0.0;
    double initial_kl = 0.0;
    double transition_kl = 0.0;
    double total = 0.0;

    bool finite() const {
        return std::isfinite(reconstruction) && std::isfinite(initial_kl) &&
               std::isfinite(transition_kl) && std::isfinite(total);
    }
};

struct ElboNodes {
    nn::Var reconstruction;
    nn::Var initial_kl;
    nn::Var transition_kl;
    nn::Var total;

    ElboBreakdown values(const nn::Tape& t) const {
        return {t.scalar(reconstruction), t.scalar(initial_kl), t.scalar(transition_kl),
                t.scalar(total)};
    }
};

// Builds the Monte-Carlo objective graph for one series:
//   sum_t E_q[log p(x_t | z_t)]                 (masked reconstruction)
//   - KL(q(z_1 | x) || N(0, I))                 (initial regularizer)
//   - sum_{t>=2} E_q[KL(q(z_t | z_{t-1}, x) || p(z_t | z_{t-1}))]
// Expectations are estimated with `samples` reparameterized chains; the
// encoder pass is shared across chains. With a fixed noise stream the graph
// value is deterministic, which the finite-difference tests rely on.
template <class Model>
ElboNodes build_elbo_graph(const Model& model, nn::Tape& t, const ObservationSeries& series,
                           int samples, RandomStream& noise, bool train_mode) {
    require(samples >= 1, "build_elbo_graph: samples must be >= 1");
    require_shape(series.dims == model.input_dim(), "build_elbo_graph: series dimension mismatch");
    series.validate();
    const int k = model.latent_dim();

    const auto h = model.encode(t, series);
    nn::Var prior_mean = t.input(std::vector<double>(static_cast<std::size_t>(k), 0.0));
    nn::Var prior_var = t.input(std::vector<double>(static_cast<std::size_t>(k), 1.0));

    ElboNodes out;
    out.reconstruction = t.scalar_input(0.0);
    out.initial_kl = t.scalar_input(0.0);
    out.transition_kl = t.scalar_input(0.0);

    for (int chain = 0; chain < samples; ++chain) {
        nn::Var z_prev = model.initial_context(t);
        for (int step = 0; step < series.steps; ++step) {
            GaussianNodes q = model.posterior(t, h[static_cast<std::size_t>(step)], z_prev);
            if (step == 0) {
                out.initial_kl =
                    t.add(out.initial_kl, t.kl_diag(q.mean, q.variance, prior_mean, prior_var));
            } else {
                GaussianNodes p = model.transition(t, z_prev);
                out.transition_kl =
                    t.add(out.transition_kl, t.kl_diag(q.mean, q.variance, p.mean, p.variance));
            }
            nn::Var z = t.reparameterize(q.mean, q.variance,
                                         noise.normal_vector(static_cast<std::size_t>(k)));
            GaussianNodes e = model.emission(t, z, noise, train_mode);
            std::vector<double> x(static_cast<std::size_t>(series.dims));
            std::vector<double> m(static_cast<std::size_t>(series.dims));
            for (int d = 0; d < series.dims; ++d) {
                x[static_cast<std::size_t>(d)] = series.value_at(step, d);
                m[static_cast<std::size_t>(d)] = series.mask_at(step, d) ? 1.0 : 0.0;
            }
            out.reconstruction = t.add(
                out.reconstruction, t.gaussian_logpdf(e.mean, e.variance, std::move(x), std::move(m)));
            z_prev = z;
        }
    }
    if (samples > 1) {
        const double inv = 1.0 / samples;
        out.reconstruction = t.scale(out.reconstruction, inv);
        out.initial_kl = t.scale(out.initial_kl, inv);
        out.transition_kl = t.scale(out.transition_kl, inv);
    }
    out.total = t.sub(out.reconstruction, t.add(out.initial_kl, out.transition_kl));
    return out;
}

// Monte-Carlo ELBO of a batch (mean of per-series objectives). Evaluation
// mode: dropout off, no gradients retained. Deterministic given the seed.
template <class Model>
ElboBreakdown elbo(const Model& model, const std::vector<ObservationSeries>& batch,
                   int samples_per_step, std::uint64_t seed) {
    require(!batch.empty(), "elbo: empty batch");
    ElboBreakdown acc;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        nn::Tape t(&model.params());
        RandomStream noise(mix_seed(seed, 0xe1b0u + i));
        const ElboNodes nodes =
            build_elbo_graph(model, t, batch[i], samples_per_step, noise, false);
        const ElboBreakdown b = nodes.values(t);
        acc.reconstruction += b.reconstruction;
        acc.initial_kl += b.initial_kl;
        acc.transition_kl += b.transition_kl;
        acc.total += b.total;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    acc.reconstruction *= inv;
    acc.initial_kl *= inv;
    acc.transition_kl *= inv;
    acc.total *= inv;
    return acc;
}

// Sequential posterior estimation. Mean mode propagates posterior means (a
// pure function of parameters and input); sample mode propagates
// reparameterized draws from the given seed.
template <class Model>
LatentTrajectory infer_states(const Model& model, const ObservationSeries& series, InferMode mode,
                              std::uint64_t seed = 0) {
    require_shape(series.dims == model.input_dim(), "infer_states: series dimension mismatch");
    series.validate();
    const int k = model.latent_dim();
    nn::Tape t(&model.params());
    RandomStream noise(mix_seed(seed, 0x1f5a7e5u));
    const auto h = model.encode(t, series);

    LatentTrajectory traj;
    traj.patient_id = series.patient_id;
    traj.steps = series.steps;
    traj.latent_dim = k;
    traj.means.reserve(static_cast<std::size_t>(series.steps) * k);
    traj.variances.reserve(static_cast<std::size_t>(series.steps) * k);

    nn::Var z_prev = model.initial_context(t);
    for (int step = 0; step < series.steps; ++step) {
        GaussianNodes q = model.posterior(t, h[static_cast<std::size_t>(step)], z_prev);
        const auto& mean = t.value(q.mean);
        const auto& var = t.value(q.variance);
        traj.means.insert(traj.means.end(), mean.begin(), mean.end());
        traj.variances.insert(traj.variances.end(), var.begin(), var.end());
        if (mode == InferMode::Sample)
            z_prev = t.reparameterize(q.mean, q.variance,
                                      noise.normal_vector(static_cast<std::size_t>(k)));
        else
            z_prev = q.mean;
    }
    return traj;
}

template <class Model>
std::vector<LatentTrajectory> infer_cohort(const Model& model, const CohortTensor& cohort,
                                           InferMode mode, std::uint64_t seed = 0) {
    std::vector<LatentTrajectory> out;
    out.reserve(cohort.patients.size());
    for (std::size_t i = 0; i < cohort.patients.size(); ++i)
        out.push_back(infer_states(model, cohort.patients[i], mode, mix_seed(seed, i)));
    return out;
}

// Ancestral sampling from the generative side: z_1 ~ N(0, I),
// z_t ~ p(z_t | z_{t-1}), x_t ~ p(x_t | z_t). Full mask, no codes.
template <class Model>
ObservationSeries generate(const Model& model, int steps, std::uint64_t seed) {
    if (steps < 1) throw DataError("generate: steps must be >= 1");
    const int k = model.latent_dim();
    const int D = model.input_dim();
    RandomStream rng(mix_seed(seed, 0x9e4e7a7eu));
    nn::Tape t(&model.params());

    ObservationSeries s;
    s.patient_id = "generated";
    s.steps = steps;
    s.dims = D;
    s.values.resize(static_cast<std::size_t>(steps) * D);
    s.mask.assign(static_cast<std::size_t>(steps) * D, 1);
    s.signal.assign(static_cast<std::size_t>(steps) * D, kSignalMissing);

    nn::Var z = t.input(rng.normal_vector(static_cast<std::size_t>(k)));
    for (int step = 0; step < steps; ++step) {
        if (step > 0) {
            GaussianNodes p = model.transition(t, z);
            z = t.reparameterize(p.mean, p.variance,
                                 rng.normal_vector(static_cast<std::size_t>(k)));
        }
        GaussianNodes e = model.emission(t, z, rng, false);
        const auto& mean = t.value(e.mean);
        const auto& var = t.value(e.variance);
        for (int d = 0; d < D; ++d)
            s.values[static_cast<std::size_t>(step) * D + d] =
                mean[static_cast<std::size_t>(d)] +
                std::sqrt(var[static_cast<std::size_t>(d)]) * rng.normal();
    }
    return s;
}

}  // namespace dsa::dssm
