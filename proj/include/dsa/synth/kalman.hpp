#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "dsa/nn/gaussian.hpp"
#include "dsa/synth/lgssm.hpp"

namespace dsa::synth {

namespace detail {

// Row-subset of C and R for the observed dimensions at one step.
struct ObservedSlice {
    Eigen::MatrixXd emission;
    Eigen::VectorXd obs_var;
    Eigen::VectorXd x;
    int count = 0;
};

inline ObservedSlice observed_slice(const LgssmSpec& spec, const ObservationSeries& series, int t) {
    ObservedSlice o;
    std::vector<int> idx;
    for (int d = 0; d < series.dims; ++d)
        if (series.mask_at(t, d)) idx.push_back(d);
    o.count = static_cast<int>(idx.size());
    o.emission.resize(o.count, spec.latent_dim());
    o.obs_var.resize(o.count);
    o.x.resize(o.count);
    for (int i = 0; i < o.count; ++i) {
        o.emission.row(i) = spec.emission.row(idx[static_cast<std::size_t>(i)]);
        o.obs_var(i) = spec.obs_var(idx[static_cast<std::size_t>(i)]);
        o.x(i) = series.value_at(t, idx[static_cast<std::size_t>(i)]);
    }
    return o;
}

struct FilterPass {
    std::vector<Eigen::VectorXd> filtered_mean;   // m_t
    std::vector<Eigen::MatrixXd> filtered_cov;    // P_t
    std::vector<Eigen::VectorXd> predicted_mean;  // m_t^-
    std::vector<Eigen::MatrixXd> predicted_cov;   // P_t^-
    double loglik = 0.0;
};

inline FilterPass kalman_filter(const LgssmSpec& spec, const ObservationSeries& series) {
    spec.validate();
    require_shape(series.dims == spec.obs_dim(), "kalman_filter: observation dimension mismatch");
    const int k = spec.latent_dim();
    const int T = series.steps;
    FilterPass out;
    out.filtered_mean.resize(static_cast<std::size_t>(T));
    out.filtered_cov.resize(static_cast<std::size_t>(T));
    out.predicted_mean.resize(static_cast<std::size_t>(T));
    out.predicted_cov.resize(static_cast<std::size_t>(T));

    const Eigen::MatrixXd Q = spec.process_var.asDiagonal();
    Eigen::VectorXd mean_pred = spec.initial_mean;
    Eigen::MatrixXd cov_pred = spec.initial_var.asDiagonal();

    for (int t = 0; t < T; ++t) {
        if (t > 0) {
            mean_pred = spec.transition * out.filtered_mean[static_cast<std::size_t>(t - 1)];
            cov_pred = spec.transition * out.filtered_cov[static_cast<std::size_t>(t - 1)] *
                           spec.transition.transpose() +
                       Q;
        }
        out.predicted_mean[static_cast<std::size_t>(t)] = mean_pred;
        out.predicted_cov[static_cast<std::size_t>(t)] = cov_pred;

        const ObservedSlice o = observed_slice(spec, series, t);
        if (o.count == 0) {
            out.filtered_mean[static_cast<std::size_t>(t)] = mean_pred;
            out.filtered_cov[static_cast<std::size_t>(t)] = cov_pred;
            continue;
        }
        const Eigen::MatrixXd innov_cov =
            o.emission * cov_pred * o.emission.transpose() +
            Eigen::MatrixXd(o.obs_var.asDiagonal());
        const Eigen::LLT<Eigen::MatrixXd> llt(innov_cov);
        if (llt.info() != Eigen::Success)
            throw NumericError("kalman_filter: innovation covariance not PSD at step " +
                               std::to_string(t));
        const Eigen::VectorXd innov = o.x - o.emission * mean_pred;
        const Eigen::VectorXd alpha = llt.solve(innov);
        double logdet = 0.0;
        for (int i = 0; i < o.count; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
        out.loglik += -0.5 * (o.count * nn::kLog2Pi + logdet + innov.dot(alpha));

        const Eigen::MatrixXd gain = llt.solve(o.emission * cov_pred).transpose();
        const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(k, k);
        const Eigen::MatrixXd a = eye - gain * o.emission;
        // Joseph form keeps the covariance symmetric PSD.
        out.filtered_mean[static_cast<std::size_t>(t)] = mean_pred + gain * innov;
        out.filtered_cov[static_cast<std::size_t>(t)] =
            a * cov_pred * a.transpose() +
            gain * Eigen::MatrixXd(o.obs_var.asDiagonal()) * gain.transpose();
    }
    return out;
}

}  // namespace detail

// Exact marginal log-likelihood log p(x_obs) with masked dimensions dropped
// per step. A fully masked series yields 0 (empty product).
inline double kalman_loglik(const LgssmSpec& spec, const ObservationSeries& series) {
    return detail::kalman_filter(spec, series).loglik;
}

struct KalmanFilterResult {
    std::vector<nn::GaussianDiag> marginals;
    double loglik = 0.0;
};

// Filtered per-step marginals (diagonal of the filtered covariance).
inline KalmanFilterResult kalman_filter(const LgssmSpec& spec, const ObservationSeries& series) {
    const detail::FilterPass f = detail::kalman_filter(spec, series);
    KalmanFilterResult out;
    out.loglik = f.loglik;
    const int k = spec.latent_dim();
    out.marginals.resize(static_cast<std::size_t>(series.steps));
    for (int t = 0; t < series.steps; ++t) {
        auto& g = out.marginals[static_cast<std::size_t>(t)];
        g.mean.resize(static_cast<std::size_t>(k));
        g.variance.resize(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) {
            g.mean[static_cast<std::size_t>(i)] = f.filtered_mean[static_cast<std::size_t>(t)](i);
            g.variance[static_cast<std::size_t>(i)] =
                f.filtered_cov[static_cast<std::size_t>(t)](i, i);
        }
    }
    return out;
}

// Forward filter + RTS backward smoother. Returns per-step marginal
// posteriors with diagonal variances extracted from the full covariance.
inline std::vector<nn::GaussianDiag> kalman_smoother(const LgssmSpec& spec,
                                                     const ObservationSeries& series) {
    const detail::FilterPass f = detail::kalman_filter(spec, series);
    const int T = series.steps;
    const int k = spec.latent_dim();
    std::vector<Eigen::VectorXd> mean(static_cast<std::size_t>(T));
    std::vector<Eigen::MatrixXd> cov(static_cast<std::size_t>(T));
    mean[static_cast<std::size_t>(T - 1)] = f.filtered_mean[static_cast<std::size_t>(T - 1)];
    cov[static_cast<std::size_t>(T - 1)] = f.filtered_cov[static_cast<std::size_t>(T - 1)];
    for (int t = T - 2; t >= 0; --t) {
        const auto& fm = f.filtered_mean[static_cast<std::size_t>(t)];
        const auto& fc = f.filtered_cov[static_cast<std::size_t>(t)];
        const auto& pm = f.predicted_mean[static_cast<std::size_t>(t + 1)];
        const auto& pc = f.predicted_cov[static_cast<std::size_t>(t + 1)];
        const Eigen::MatrixXd gain =
            pc.ldlt().solve(spec.transition * fc.transpose()).transpose();
        mean[static_cast<std::size_t>(t)] = fm + gain * (mean[static_cast<std::size_t>(t + 1)] - pm);
        cov[static_cast<std::size_t>(t)] =
            fc + gain * (cov[static_cast<std::size_t>(t + 1)] - pc) * gain.transpose();
    }
    std::vector<nn::GaussianDiag> out(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        auto& g = out[static_cast<std::size_t>(t)];
        g.mean.resize(static_cast<std::size_t>(k));
        g.variance.resize(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) {
            g.mean[static_cast<std::size_t>(i)] = mean[static_cast<std::size_t>(t)](i);
            g.variance[static_cast<std::size_t>(i)] = cov[static_cast<std::size_t>(t)](i, i);
        }
    }
    return out;
}

}  // namespace dsa::synth
