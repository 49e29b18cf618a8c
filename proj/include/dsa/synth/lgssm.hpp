#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "dsa/core/error.hpp"
#include "dsa/core/random.hpp"
#include "dsa/data/cohort.hpp"

namespace dsa::synth {

// Linear-Gaussian state-space model:
//   z_1 ~ N(initial_mean, diag(initial_var))
//   z_t = A z_{t-1} + w,  w ~ N(0, diag(process_var))
//   x_t = C z_t + v,      v ~ N(0, diag(obs_var))
struct LgssmSpec {
    Eigen::MatrixXd transition;        // A, k x k
    Eigen::MatrixXd emission;          // C, D x k
    Eigen::VectorXd process_var;       // Q diagonal, > 0
    Eigen::VectorXd obs_var;           // R diagonal, > 0
    Eigen::VectorXd initial_mean;      // k
    Eigen::VectorXd initial_var;       // P0 diagonal, > 0

    int latent_dim() const { return static_cast<int>(transition.rows()); }
    int obs_dim() const { return static_cast<int>(emission.rows()); }

    void validate() const {
        const int k = latent_dim();
        const int d = obs_dim();
        require_shape(transition.cols() == k, "LgssmSpec: A must be square");
        require_shape(emission.cols() == k, "LgssmSpec: C column count mismatch");
        require_shape(process_var.size() == k && obs_var.size() == d &&
                          initial_mean.size() == k && initial_var.size() == k,
                      "LgssmSpec: vector length mismatch");
        for (int i = 0; i < k; ++i)
            if (!(process_var(i) > 0.0) || !(initial_var(i) > 0.0))
                throw DomainError("LgssmSpec: nonpositive latent covariance entry");
        for (int i = 0; i < d; ++i)
            if (!(obs_var(i) > 0.0)) throw DomainError("LgssmSpec: nonpositive observation variance");
    }
};

// Draws one trajectory; returns (latents T x k, observations T x D).
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> sample_lgssm(const LgssmSpec& spec, int steps,
                                                                RandomStream& rng) {
    spec.validate();
    require(steps >= 1, "sample_lgssm: steps must be >= 1");
    const int k = spec.latent_dim();
    const int d = spec.obs_dim();
    Eigen::MatrixXd z(steps, k);
    Eigen::MatrixXd x(steps, d);
    Eigen::VectorXd cur(k);
    for (int i = 0; i < k; ++i)
        cur(i) = spec.initial_mean(i) + std::sqrt(spec.initial_var(i)) * rng.normal();
    for (int t = 0; t < steps; ++t) {
        if (t > 0) {
            Eigen::VectorXd next = spec.transition * cur;
            for (int i = 0; i < k; ++i) next(i) += std::sqrt(spec.process_var(i)) * rng.normal();
            cur = next;
        }
        z.row(t) = cur.transpose();
        Eigen::VectorXd obs = spec.emission * cur;
        for (int i = 0; i < d; ++i) obs(i) += std::sqrt(spec.obs_var(i)) * rng.normal();
        x.row(t) = obs.transpose();
    }
    return {z, x};
}

// Packs an observation matrix (with optional missingness) into the
// model-ready series type. Values are used as-is.
inline ObservationSeries series_from_matrix(const std::string& id, const Eigen::MatrixXd& x,
                                            const std::vector<std::uint8_t>& mask_flat = {}) {
    ObservationSeries s;
    s.patient_id = id;
    s.steps = static_cast<int>(x.rows());
    s.dims = static_cast<int>(x.cols());
    const std::size_t n = static_cast<std::size_t>(s.steps) * s.dims;
    s.values.resize(n);
    s.mask.assign(n, 1);
    s.signal.assign(n, kSignalMissing);
    for (int t = 0; t < s.steps; ++t)
        for (int d = 0; d < s.dims; ++d)
            s.values[static_cast<std::size_t>(t) * s.dims + d] = x(t, d);
    if (!mask_flat.empty()) {
        require_shape(mask_flat.size() == n, "series_from_matrix: mask size mismatch");
        s.mask = mask_flat;
    }
    return s;
}

}  // namespace dsa::synth
