#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "dsa/core/error.hpp"
#include "dsa/data/cohort.hpp"

namespace dsa::baselines {

// Principal components by exact eigendecomposition of the row covariance.
// Component signs are fixed so the largest-magnitude loading is positive.
struct PcaModel {
    Eigen::VectorXd mean;                // D
    Eigen::MatrixXd components;          // D x k, orthonormal columns
    Eigen::VectorXd explained_variance;  // k, nonincreasing

    int input_dim() const { return static_cast<int>(mean.size()); }
    int latent_dim() const { return static_cast<int>(components.cols()); }

    Eigen::VectorXd project(const Eigen::VectorXd& row) const {
        return components.transpose() * (row - mean);
    }

    Eigen::VectorXd reconstruct(const Eigen::VectorXd& latent) const {
        return mean + components * latent;
    }
};

inline PcaModel fit_pca(const Eigen::MatrixXd& rows, int k) {
    const int n = static_cast<int>(rows.rows());
    const int D = static_cast<int>(rows.cols());
    require(k >= 1, "fit_pca: k must be positive");
    require_shape(k <= D, "fit_pca: k exceeds the input dimension");
    require(n >= k, "fit_pca: need at least k rows");

    PcaModel m;
    m.mean = rows.colwise().mean();
    const Eigen::MatrixXd centered = rows.rowwise() - m.mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericError("fit_pca: eigendecomposition failed");

    // Eigenvalues ascend; take the top k in descending order.
    m.components.resize(D, k);
    m.explained_variance.resize(k);
    for (int j = 0; j < k; ++j) {
        const int src = D - 1 - j;
        Eigen::VectorXd v = eig.eigenvectors().col(src);
        int arg = 0;
        for (int i = 1; i < D; ++i)
            if (std::fabs(v(i)) > std::fabs(v(arg))) arg = i;
        if (v(arg) < 0.0) v = -v;
        m.components.col(j) = v;
        m.explained_variance(j) = std::max(0.0, eig.eigenvalues()(src));
    }
    return m;
}

// Pools every (patient, step) row of the cohort into a matrix. Baselines
// consume imputed values directly; masks are ignored by design.
inline Eigen::MatrixXd pooled_rows(const CohortTensor& cohort) {
    std::size_t n = 0;
    for (const auto& p : cohort.patients) n += static_cast<std::size_t>(p.steps);
    require(n > 0, "pooled_rows: empty cohort");
    const int D = cohort.dims();
    Eigen::MatrixXd rows(static_cast<long>(n), D);
    long r = 0;
    for (const auto& p : cohort.patients)
        for (int t = 0; t < p.steps; ++t, ++r)
            for (int d = 0; d < D; ++d) rows(r, d) = p.value_at(t, d);
    return rows;
}

// Per-step independent projection packaged as a trajectory. PCA assigns no
// posterior uncertainty; variances are a unit placeholder.
inline LatentTrajectory project_series(const PcaModel& m, const ObservationSeries& s) {
    LatentTrajectory traj;
    traj.patient_id = s.patient_id;
    traj.steps = s.steps;
    traj.latent_dim = m.latent_dim();
    traj.means.resize(static_cast<std::size_t>(s.steps) * m.latent_dim());
    traj.variances.assign(static_cast<std::size_t>(s.steps) * m.latent_dim(), 1.0);
    Eigen::VectorXd row(s.dims);
    for (int t = 0; t < s.steps; ++t) {
        for (int d = 0; d < s.dims; ++d) row(d) = s.value_at(t, d);
        const Eigen::VectorXd z = m.project(row);
        for (int j = 0; j < m.latent_dim(); ++j)
            traj.means[static_cast<std::size_t>(t) * m.latent_dim() + j] = z(j);
    }
    return traj;
}

}  // namespace dsa::baselines
