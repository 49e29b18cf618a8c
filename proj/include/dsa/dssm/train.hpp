#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "dsa/core/random.hpp"
#include "dsa/dssm/sequence.hpp"
#include "dsa/nn/adam.hpp"

namespace dsa::dssm {

struct TrainOptions {
    int epochs = 20;
    int batch_size = 32;
    double learning_rate = 0.005;
    double grad_clip = 10.0;
    int samples_per_step = 1;
    std::uint64_t seed = 7;
    // Step-decay schedule; inactive when lr_decay_epoch is 0.
    int lr_decay_epoch = 0;
    double lr_decay_factor = 1.0;
    // Linear KL warmup over the first kl_warmup_epochs epochs: the training
    // loss scales both KL terms by min(1, (epoch+1)/warmup) so the encoder
    // learns informative latents before the prior pressure bites. The
    // reported trace keeps the untempered objective.
    int kl_warmup_epochs = 0;
};

// Stochastic gradient ascent on the ELBO with adaptive moments. Per-series
// graphs are built on separate tapes; gradients accumulate additively in the
// parameter store and the batch reduction is the explicit 1/B scaling of the
// loss. Returns the per-epoch mean objective trace (training-mode estimate).
// A non-finite objective aborts with a diagnostics message.
template <class Model>
std::vector<ElboBreakdown> train_model(Model& model, const std::vector<ObservationSeries>& data,
                                       const TrainOptions& opt) {
    require(!data.empty(), "train_model: empty training set");
    require(opt.epochs >= 0, "train_model: negative epoch count");
    require(opt.batch_size >= 1, "train_model: batch_size must be >= 1");
    for (const auto& s : data)
        require_shape(s.dims == model.input_dim(), "train_model: series dimension mismatch");

    nn::AdamOptimizer adam(model.params(), opt.learning_rate);
    RandomStream shuffle_rng(mix_seed(opt.seed, 0x50ff1eu));
    std::vector<ElboBreakdown> trace;
    const int n = static_cast<int>(data.size());

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        if (opt.lr_decay_epoch > 0 && epoch == opt.lr_decay_epoch)
            adam.set_learning_rate(adam.learning_rate() * opt.lr_decay_factor);
        const std::vector<int> order = shuffle_rng.permutation(n);
        RandomStream noise(mix_seed(opt.seed, 0xab35u + static_cast<std::uint64_t>(epoch)));
        ElboBreakdown epoch_acc;
        for (int start = 0; start < n; start += opt.batch_size) {
            const int end = std::min(n, start + opt.batch_size);
            const int batch = end - start;
            model.params().zero_grad();
            for (int i = start; i < end; ++i) {
                const ObservationSeries& series = data[static_cast<std::size_t>(
                    order[static_cast<std::size_t>(i)])];
                nn::Tape t(&model.params());
                const ElboNodes nodes =
                    build_elbo_graph(model, t, series, opt.samples_per_step, noise, true);
                const ElboBreakdown b = nodes.values(t);
                if (!b.finite())
                    throw NumericError(
                        "train_model: non-finite objective at epoch " + std::to_string(epoch) +
                        ", batch " + std::to_string(start / opt.batch_size) + ", series " +
                        series.patient_id + " (reconstruction=" + std::to_string(b.reconstruction) +
                        ", initial_kl=" + std::to_string(b.initial_kl) +
                        ", transition_kl=" + std::to_string(b.transition_kl) + ")");
                epoch_acc.reconstruction += b.reconstruction;
                epoch_acc.initial_kl += b.initial_kl;
                epoch_acc.transition_kl += b.transition_kl;
                epoch_acc.total += b.total;
                // Ascent on the mean batch objective (tempered during warmup).
                nn::Var objective = nodes.total;
                if (opt.kl_warmup_epochs > 0 && epoch + 1 < opt.kl_warmup_epochs) {
                    const double beta =
                        static_cast<double>(epoch + 1) / opt.kl_warmup_epochs;
                    objective = t.sub(nodes.reconstruction,
                                      t.scale(t.add(nodes.initial_kl, nodes.transition_kl), beta));
                }
                t.backward(t.scale(objective, -1.0 / batch));
            }
            nn::clip_gradient_norm(model.params(), opt.grad_clip);
            adam.step();
        }
        epoch_acc.reconstruction /= n;
        epoch_acc.initial_kl /= n;
        epoch_acc.transition_kl /= n;
        epoch_acc.total /= n;
        trace.push_back(epoch_acc);
    }
    return trace;
}

}  // namespace dsa::dssm
