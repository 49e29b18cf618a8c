#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "dsa/analyze/points.hpp"
#include "dsa/core/random.hpp"

namespace dsa::analyze {

// Simplified UMAP: exact k-nearest-neighbor graph, per-point smoothed
// distance calibration, fuzzy union symmetrization, and a stochastic
// gradient layout of the cross-entropy objective with negative sampling on a
// fixed epoch schedule. Deterministic given the seed. Trial mode fits the
// graph on a downsampled subset and places the remaining points through it.
struct UmapOptions {
    int n_neighbors = 15;
    int n_components = 2;
    int epochs = 200;
    double learning_rate = 1.0;
    int negative_samples = 5;
    double trial_downsample = 1.0;  // fraction of points the layout is fitted on
    int transform_epochs = 20;
    std::uint64_t seed = 7;
};

namespace umap_detail {

// Curve coefficients for min_dist=0.1, spread=1.0 (the library defaults the
// protocol uses).
inline constexpr double kCurveA = 1.576943460405378;
inline constexpr double kCurveB = 0.8950608781227859;
inline constexpr double kClip = 4.0;

struct Neighbor {
    int index = 0;
    double distance = 0.0;
};

// Exact kNN by linear scan with a running top-k.
inline std::vector<std::vector<Neighbor>> knn_graph(const PointMatrix& points,
                                                    const std::vector<int>& subset, int k) {
    const int n = static_cast<int>(subset.size());
    std::vector<std::vector<Neighbor>> graph(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
        auto& best = graph[static_cast<std::size_t>(a)];
        best.reserve(static_cast<std::size_t>(k) + 1);
        double worst = std::numeric_limits<double>::infinity();
        for (int b = 0; b < n; ++b) {
            if (a == b) continue;
            const double d = squared_distance(points.row(subset[static_cast<std::size_t>(a)]),
                                              points.row(subset[static_cast<std::size_t>(b)]),
                                              points.dim);
            if (static_cast<int>(best.size()) < k || d < worst) {
                best.push_back({b, d});
                std::sort(best.begin(), best.end(), [](const Neighbor& x, const Neighbor& y) {
                    return x.distance < y.distance ||
                           (x.distance == y.distance && x.index < y.index);
                });
                if (static_cast<int>(best.size()) > k) best.pop_back();
                worst = best.back().distance;
            }
        }
        for (auto& nb : best) nb.distance = std::sqrt(nb.distance);
    }
    return graph;
}

struct Calibration {
    double rho = 0.0;
    double sigma = 1.0;
};

// Solves sum_j exp(-max(0, d_j - rho) / sigma) = log2(k) by bisection.
inline Calibration calibrate(const std::vector<Neighbor>& neighbors) {
    Calibration c;
    c.rho = neighbors.front().distance;
    for (const auto& nb : neighbors)
        if (nb.distance > 0.0) {
            c.rho = nb.distance;
            break;
        }
    const double target = std::log2(static_cast<double>(neighbors.size()));
    double lo = 1e-12, hi = 1e4 * (neighbors.back().distance + 1.0);
    for (int iter = 0; iter < 64; ++iter) {
        const double mid = 0.5 * (lo + hi);
        double acc = 0.0;
        for (const auto& nb : neighbors) acc += std::exp(-std::max(0.0, nb.distance - c.rho) / mid);
        if (acc > target)
            hi = mid;
        else
            lo = mid;
    }
    c.sigma = 0.5 * (lo + hi);
    return c;
}

struct Edge {
    int a = 0;
    int b = 0;
    double weight = 0.0;
};

inline double attract_coeff(double d2) {
    const double pow_term = std::pow(d2, kCurveB);
    return -2.0 * kCurveA * kCurveB * (d2 > 0.0 ? std::pow(d2, kCurveB - 1.0) : 1.0) /
           (1.0 + kCurveA * pow_term);
}

inline double repulse_coeff(double d2) {
    return 2.0 * kCurveB / ((0.001 + d2) * (1.0 + kCurveA * std::pow(d2, kCurveB)));
}

inline double clip(double v) { return std::max(-kClip, std::min(kClip, v)); }

// Deterministic PCA initialization scaled into [-10, 10].
inline PointMatrix pca_init(const PointMatrix& points, const std::vector<int>& subset,
                            int components) {
    const int n = static_cast<int>(subset.size());
    const int dim = points.dim;
    Eigen::MatrixXd x(n, dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) x(i, j) = points.at(subset[static_cast<std::size_t>(i)], j);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    PointMatrix init = PointMatrix::zeros(n, components);
    if (dim == 1) {
        for (int i = 0; i < n; ++i) init.at(i, 0) = x(i, 0);
    } else {
        const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(std::max(1, n));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        for (int c = 0; c < components && c < dim; ++c) {
            Eigen::VectorXd v = eig.eigenvectors().col(dim - 1 - c);
            int arg = 0;
            for (int i = 1; i < dim; ++i)
                if (std::fabs(v(i)) > std::fabs(v(arg))) arg = i;
            if (v(arg) < 0.0) v = -v;
            const Eigen::VectorXd proj = x * v;
            for (int i = 0; i < n; ++i) init.at(i, c) = proj(i);
        }
    }
    double max_abs = 0.0;
    for (double v : init.data) max_abs = std::max(max_abs, std::fabs(v));
    const double scale = max_abs > 0.0 ? 10.0 / max_abs : 1.0;
    for (double& v : init.data) v *= scale;
    return init;
}

}  // namespace umap_detail

struct UmapModel {
    UmapOptions options;
    std::vector<int> fit_rows;          // unique-point indices the layout was fitted on
    PointMatrix fit_points;             // their coordinates in latent space
    PointMatrix fit_embedding;          // their layout coordinates
};

// Embeds points.count points into options.n_components dimensions. Exact
// duplicates share one representative and receive identical coordinates.
inline PointMatrix umap_embed_points(const PointMatrix& points, const UmapOptions& options,
                                     UmapModel* fitted = nullptr) {
    using namespace umap_detail;
    points.require_finite();
    require(options.n_neighbors >= 2, "umap: n_neighbors must be >= 2");
    require(options.trial_downsample > 0.0 && options.trial_downsample <= 1.0,
            "umap: trial_downsample must be in (0, 1]");

    // Deduplicate exact clones.
    std::map<std::vector<double>, int> seen;
    std::vector<int> unique_rows;
    std::vector<int> to_unique(static_cast<std::size_t>(points.count));
    for (int i = 0; i < points.count; ++i) {
        std::vector<double> key(points.row(i), points.row(i) + points.dim);
        auto [it, inserted] = seen.emplace(std::move(key), static_cast<int>(unique_rows.size()));
        if (inserted) unique_rows.push_back(i);
        to_unique[static_cast<std::size_t>(i)] = it->second;
    }
    const int n_unique = static_cast<int>(unique_rows.size());
    require(n_unique >= options.n_neighbors + 1,
            "umap: need at least n_neighbors + 1 distinct points");

    PointMatrix unique_points = PointMatrix::zeros(n_unique, points.dim);
    for (int i = 0; i < n_unique; ++i)
        std::copy(points.row(unique_rows[static_cast<std::size_t>(i)]),
                  points.row(unique_rows[static_cast<std::size_t>(i)]) + points.dim,
                  unique_points.row(i));

    RandomStream rng(mix_seed(options.seed, 0x0e3bedu));

    // Fit subset (trial mode downsamples; the rest is placed afterwards).
    std::vector<int> fit;
    if (options.trial_downsample < 1.0) {
        int m = static_cast<int>(std::ceil(options.trial_downsample * n_unique));
        m = std::max(m, std::min(n_unique, options.n_neighbors + 1));
        const auto perm = rng.permutation(n_unique);
        fit.assign(perm.begin(), perm.begin() + m);
        std::sort(fit.begin(), fit.end());
    } else {
        fit.resize(static_cast<std::size_t>(n_unique));
        for (int i = 0; i < n_unique; ++i) fit[static_cast<std::size_t>(i)] = i;
    }
    const int n_fit = static_cast<int>(fit.size());
    const int k = std::min(options.n_neighbors, n_fit - 1);

    // Graph construction and calibration.
    const auto graph = knn_graph(unique_points, fit, k);
    std::vector<Calibration> calib(static_cast<std::size_t>(n_fit));
    for (int i = 0; i < n_fit; ++i) calib[static_cast<std::size_t>(i)] = calibrate(graph[static_cast<std::size_t>(i)]);

    // Directed memberships, then fuzzy union.
    std::map<std::pair<int, int>, double> directed;
    for (int i = 0; i < n_fit; ++i)
        for (const auto& nb : graph[static_cast<std::size_t>(i)]) {
            const auto& c = calib[static_cast<std::size_t>(i)];
            directed[{i, nb.index}] =
                std::exp(-std::max(0.0, nb.distance - c.rho) / c.sigma);
        }
    std::vector<Edge> edges;
    double w_max = 0.0;
    for (const auto& [key, w] : directed) {
        const auto [i, j] = key;
        if (i > j && directed.count({j, i})) continue;  // handled from the other side
        const auto rev = directed.find({j, i});
        const double w2 = rev != directed.end() ? rev->second : 0.0;
        const double w_sym = w + w2 - w * w2;
        edges.push_back({std::min(i, j), std::max(i, j), w_sym});
        w_max = std::max(w_max, w_sym);
    }

    // Layout by SGD on the fitted subset.
    PointMatrix embedding = pca_init(unique_points, fit, options.n_components);
    const int dims = options.n_components;
    std::vector<double> next_due(edges.size());
    std::vector<double> eps(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        if (edges[e].weight <= w_max / options.epochs) {
            eps[e] = -1.0;  // sampled less than once; dropped
            next_due[e] = std::numeric_limits<double>::infinity();
        } else {
            eps[e] = w_max / edges[e].weight;
            next_due[e] = eps[e];
        }
    }
    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        const double alpha =
            options.learning_rate * (1.0 - static_cast<double>(epoch) / options.epochs);
        for (std::size_t e = 0; e < edges.size(); ++e) {
            if (next_due[e] > epoch) continue;
            next_due[e] += eps[e];
            double* ya = embedding.row(edges[e].a);
            double* yb = embedding.row(edges[e].b);
            const double d2 = squared_distance(ya, yb, dims);
            if (d2 > 0.0) {
                const double g = attract_coeff(d2);
                for (int c = 0; c < dims; ++c) {
                    const double move = alpha * clip(g * (ya[c] - yb[c]));
                    ya[c] += move;
                    yb[c] -= move;
                }
            }
            for (int s = 0; s < options.negative_samples; ++s) {
                const int m = rng.uniform_int(n_fit);
                if (m == edges[e].a) continue;
                double* ym = embedding.row(m);
                const double dn = squared_distance(ya, ym, dims);
                if (dn <= 0.0) continue;
                const double g = repulse_coeff(dn);
                for (int c = 0; c < dims; ++c) ya[c] += alpha * clip(g * (ya[c] - ym[c]));
            }
        }
    }

    // Place non-fitted unique points through the fitted graph: smoothed-kernel
    // weights over their nearest fitted neighbors, weighted-mean start, then a
    // few deterministic attraction epochs toward the fixed anchors.
    PointMatrix unique_embedding = PointMatrix::zeros(n_unique, dims);
    std::vector<std::uint8_t> is_fit(static_cast<std::size_t>(n_unique), 0);
    for (int i = 0; i < n_fit; ++i) {
        is_fit[static_cast<std::size_t>(fit[static_cast<std::size_t>(i)])] = 1;
        std::copy(embedding.row(i), embedding.row(i) + dims,
                  unique_embedding.row(fit[static_cast<std::size_t>(i)]));
    }
    for (int u = 0; u < n_unique; ++u) {
        if (is_fit[static_cast<std::size_t>(u)]) continue;
        // kNN against the fitted subset.
        std::vector<Neighbor> nbs;
        nbs.reserve(static_cast<std::size_t>(k) + 1);
        double worst = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n_fit; ++i) {
            const double d = squared_distance(unique_points.row(u),
                                              unique_points.row(fit[static_cast<std::size_t>(i)]),
                                              points.dim);
            if (static_cast<int>(nbs.size()) < k || d < worst) {
                nbs.push_back({i, d});
                std::sort(nbs.begin(), nbs.end(), [](const Neighbor& x, const Neighbor& y) {
                    return x.distance < y.distance || (x.distance == y.distance && x.index < y.index);
                });
                if (static_cast<int>(nbs.size()) > k) nbs.pop_back();
                worst = nbs.back().distance;
            }
        }
        for (auto& nb : nbs) nb.distance = std::sqrt(nb.distance);
        const Calibration c = calibrate(nbs);
        double wsum = 0.0;
        std::vector<double> w(nbs.size());
        for (std::size_t i = 0; i < nbs.size(); ++i) {
            w[i] = std::exp(-std::max(0.0, nbs[i].distance - c.rho) / c.sigma);
            wsum += w[i];
        }
        double* y = unique_embedding.row(u);
        for (std::size_t i = 0; i < nbs.size(); ++i) {
            const double* anchor = embedding.row(nbs[i].index);
            for (int cdim = 0; cdim < dims; ++cdim) y[cdim] += w[i] / wsum * anchor[cdim];
        }
        for (int epoch = 1; epoch <= options.transform_epochs; ++epoch) {
            const double alpha = options.learning_rate *
                                 (1.0 - static_cast<double>(epoch) / options.transform_epochs);
            for (std::size_t i = 0; i < nbs.size(); ++i) {
                const double* anchor = embedding.row(nbs[i].index);
                const double d2 = squared_distance(y, anchor, dims);
                if (d2 <= 0.0) continue;
                const double g = attract_coeff(d2);
                for (int cdim = 0; cdim < dims; ++cdim)
                    y[cdim] += alpha * (w[i] / wsum) * clip(g * (y[cdim] - anchor[cdim]));
            }
        }
    }

    if (fitted) {
        fitted->options = options;
        fitted->fit_rows = fit;
        fitted->fit_points = PointMatrix::zeros(n_fit, points.dim);
        for (int i = 0; i < n_fit; ++i)
            std::copy(unique_points.row(fit[static_cast<std::size_t>(i)]),
                      unique_points.row(fit[static_cast<std::size_t>(i)]) + points.dim,
                      fitted->fit_points.row(i));
        fitted->fit_embedding = embedding;
    }

    PointMatrix out = PointMatrix::zeros(points.count, dims);
    for (int i = 0; i < points.count; ++i)
        std::copy(unique_embedding.row(to_unique[static_cast<std::size_t>(i)]),
                  unique_embedding.row(to_unique[static_cast<std::size_t>(i)]) + dims, out.row(i));
    return out;
}

// 2-D embedding of pooled latents with endpoint bookkeeping.
struct Embedding2D {
    PointMatrix coords;                  // n x 2
    std::vector<int> patient_index;
    std::vector<int> step_index;
    std::vector<std::uint8_t> endpoint;  // exactly one per patient
};

inline Embedding2D umap_embed(const PooledLatents& pooled, const UmapOptions& options,
                              UmapModel* fitted = nullptr) {
    Embedding2D out;
    out.coords = umap_embed_points(pooled.points, options, fitted);
    out.patient_index = pooled.patient_index;
    out.step_index = pooled.step_index;
    out.endpoint = pooled.endpoint;
    return out;
}

}  // namespace dsa::analyze
