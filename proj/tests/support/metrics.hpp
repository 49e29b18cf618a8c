#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace testsupport {

// Canonical correlations between two column-centered data blocks.
// Returned descending; regularized for numerical safety.
inline std::vector<double> canonical_correlations(const Eigen::MatrixXd& x_in,
                                                  const Eigen::MatrixXd& y_in) {
    const long n = x_in.rows();
    Eigen::MatrixXd x = x_in.rowwise() - x_in.colwise().mean();
    Eigen::MatrixXd y = y_in.rowwise() - y_in.colwise().mean();
    const long p = x.cols(), q = y.cols();
    const double reg = 1e-10;
    const Eigen::MatrixXd sxx =
        x.transpose() * x / double(n) + reg * Eigen::MatrixXd::Identity(p, p);
    const Eigen::MatrixXd syy =
        y.transpose() * y / double(n) + reg * Eigen::MatrixXd::Identity(q, q);
    const Eigen::MatrixXd sxy = x.transpose() * y / double(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ex(sxx);
    Eigen::MatrixXd sxx_isqrt = Eigen::MatrixXd::Zero(p, p);
    for (long i = 0; i < p; ++i) {
        const double lam = std::max(ex.eigenvalues()(i), reg);
        sxx_isqrt += ex.eigenvectors().col(i) * ex.eigenvectors().col(i).transpose() /
                     std::sqrt(lam);
    }
    const Eigen::MatrixXd m =
        sxx_isqrt * sxy * syy.ldlt().solve(sxy.transpose()) * sxx_isqrt;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(0.5 * (m + m.transpose()));
    std::vector<double> rho;
    const long k = std::min(p, q);
    for (long i = 0; i < k; ++i) {
        const double lam = em.eigenvalues()(p - 1 - i);
        rho.push_back(std::sqrt(std::clamp(lam, 0.0, 1.0)));
    }
    return rho;
}

inline double mean_canonical_correlation(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    const auto rho = canonical_correlations(x, y);
    double acc = 0.0;
    for (double r : rho) acc += r;
    return rho.empty() ? 0.0 : acc / static_cast<double>(rho.size());
}

// Mann-Whitney AUC with midranks for ties.
inline double auc_score(const std::vector<double>& scores, const std::vector<int>& labels) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t t = i; t <= j; ++t) rank[idx[t]] = mid;
        i = j + 1;
    }
    double rank_pos = 0.0;
    long n_pos = 0, n_neg = 0;
    for (std::size_t t = 0; t < n; ++t) {
        if (labels[t]) {
            rank_pos += rank[t];
            ++n_pos;
        } else {
            ++n_neg;
        }
    }
    if (n_pos == 0 || n_neg == 0) return 0.5;
    return (rank_pos - 0.5 * n_pos * (n_pos + 1)) / (static_cast<double>(n_pos) * n_neg);
}

// L2-regularized logistic regression by Newton iterations; returns the
// linear scores (intercept included). Enough for a separation probe.
inline std::vector<double> logistic_probe_scores(const Eigen::MatrixXd& features,
                                                 const std::vector<int>& labels,
                                                 int iterations = 50, double reg = 1e-6) {
    const long n = features.rows();
    const long d = features.cols() + 1;
    Eigen::MatrixXd x(n, d);
    x.col(0).setOnes();
    x.rightCols(features.cols()) = features;
    Eigen::VectorXd y(n);
    for (long i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    for (int it = 0; it < iterations; ++it) {
        const Eigen::VectorXd eta = x * w;
        Eigen::VectorXd p(n), s(n);
        for (long i = 0; i < n; ++i) {
            const double e = eta(i);
            const double pi = e >= 0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e));
            p(i) = pi;
            s(i) = std::max(pi * (1.0 - pi), 1e-9);
        }
        const Eigen::VectorXd grad = x.transpose() * (p - y) + reg * w;
        const Eigen::MatrixXd hess = x.transpose() * s.asDiagonal() * x +
                                     reg * Eigen::MatrixXd::Identity(d, d);
        const Eigen::VectorXd step = hess.ldlt().solve(grad);
        w -= step;
        if (step.norm() < 1e-10) break;
    }
    const Eigen::VectorXd eta = x * w;
    std::vector<double> out(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = eta(i);
    return out;
}

// Adjusted Rand index between two labelings.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t n = a.size();
    const int ka = *std::max_element(a.begin(), a.end()) + 1;
    const int kb = *std::max_element(b.begin(), b.end()) + 1;
    std::vector<std::vector<long>> table(static_cast<std::size_t>(ka),
                                         std::vector<long>(static_cast<std::size_t>(kb), 0));
    for (std::size_t i = 0; i < n; ++i)
        table[static_cast<std::size_t>(a[i])][static_cast<std::size_t>(b[i])]++;
    auto choose2 = [](long m) { return 0.5 * static_cast<double>(m) * (m - 1); };
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (int i = 0; i < ka; ++i) {
        long row = 0;
        for (int j = 0; j < kb; ++j) {
            sum_ij += choose2(table[i][j]);
            row += table[i][j];
        }
        sum_a += choose2(row);
    }
    for (int j = 0; j < kb; ++j) {
        long col = 0;
        for (int i = 0; i < ka; ++i) col += table[i][j];
        sum_b += choose2(col);
    }
    const double total = choose2(static_cast<long>(n));
    const double expected = sum_a * sum_b / total;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;
    return (sum_ij - expected) / (max_index - expected);
}

}  // namespace testsupport
