#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dsa/analyze/points.hpp"
#include "dsa/core/random.hpp"

namespace dsa::analyze {

struct KmeansResult {
    int k = 0;
    PointMatrix centroids;
    std::vector<int> labels;
    double inertia = 0.0;
    std::vector<double> inertia_trace;  // after each assignment pass
    int iterations = 0;
};

namespace detail {

inline int nearest_centroid(const PointMatrix& centroids, const double* x) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < centroids.count; ++c) {
        const double d = squared_distance(centroids.row(c), x, centroids.dim);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

}  // namespace detail

// One Lloyd run from a k-means++ seeding. Deterministic given the seed;
// an emptied cluster is reseeded at the point farthest from its centroid.
inline KmeansResult kmeans_single(const PointMatrix& points, int k, std::uint64_t seed,
                                  int max_iter = 300) {
    require(k >= 1, "kmeans: k must be positive");
    require(points.count >= k, "kmeans: fewer points than clusters");
    points.require_finite();
    const int n = points.count;
    const int dim = points.dim;
    RandomStream rng(mix_seed(seed, 0x4a3a5cu));

    KmeansResult out;
    out.k = k;
    out.centroids = PointMatrix::zeros(k, dim);

    // k-means++ seeding.
    std::vector<double> min_d(static_cast<std::size_t>(n),
                              std::numeric_limits<double>::infinity());
    int first = rng.uniform_int(n);
    std::copy(points.row(first), points.row(first) + dim, out.centroids.row(0));
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = squared_distance(points.row(i), out.centroids.row(c - 1), dim);
            min_d[static_cast<std::size_t>(i)] = std::min(min_d[static_cast<std::size_t>(i)], d);
            total += min_d[static_cast<std::size_t>(i)];
        }
        int pick = n - 1;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += min_d[static_cast<std::size_t>(i)];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.uniform_int(n);
        }
        std::copy(points.row(pick), points.row(pick) + dim, out.centroids.row(c));
    }

    out.labels.assign(static_cast<std::size_t>(n), 0);
    std::vector<long> sizes(static_cast<std::size_t>(k), 0);
    for (int iter = 0; iter < max_iter; ++iter) {
        // Assignment pass.
        bool changed = iter == 0;
        double inertia = 0.0;
        std::fill(sizes.begin(), sizes.end(), 0);
        for (int i = 0; i < n; ++i) {
            const int c = detail::nearest_centroid(out.centroids, points.row(i));
            inertia += squared_distance(points.row(i), out.centroids.row(c), dim);
            if (out.labels[static_cast<std::size_t>(i)] != c) changed = true;
            out.labels[static_cast<std::size_t>(i)] = c;
            sizes[static_cast<std::size_t>(c)]++;
        }
        out.inertia = inertia;
        out.inertia_trace.push_back(inertia);
        out.iterations = iter + 1;
        if (!changed && iter > 0) break;

        // Update pass.
        PointMatrix sums = PointMatrix::zeros(k, dim);
        for (int i = 0; i < n; ++i) {
            const int c = out.labels[static_cast<std::size_t>(i)];
            for (int j = 0; j < dim; ++j) sums.at(c, j) += points.at(i, j);
        }
        for (int c = 0; c < k; ++c) {
            if (sizes[static_cast<std::size_t>(c)] == 0) {
                // Reseed at the point farthest from its current centroid.
                int far = 0;
                double far_d = -1.0;
                for (int i = 0; i < n; ++i) {
                    const double d = squared_distance(
                        points.row(i), out.centroids.row(out.labels[static_cast<std::size_t>(i)]),
                        dim);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                std::copy(points.row(far), points.row(far) + dim, out.centroids.row(c));
                continue;
            }
            for (int j = 0; j < dim; ++j)
                out.centroids.at(c, j) =
                    sums.at(c, j) / static_cast<double>(sizes[static_cast<std::size_t>(c)]);
        }
    }
    return out;
}

// Mean silhouette over points; singleton clusters score 0. Exact O(n^2) on
// at most subsample_limit points (seeded subsample beyond that).
inline double silhouette_score(const PointMatrix& points, const std::vector<int>& labels, int k,
                               int subsample_limit = 10000, std::uint64_t seed = 7) {
    require(points.count == static_cast<int>(labels.size()), "silhouette: label count mismatch");
    require(k >= 2, "silhouette: needs at least two clusters");
    std::vector<int> idx(static_cast<std::size_t>(points.count));
    for (int i = 0; i < points.count; ++i) idx[static_cast<std::size_t>(i)] = i;
    if (points.count > subsample_limit) {
        RandomStream rng(mix_seed(seed, 0x51100e77u));
        const auto perm = rng.permutation(points.count);
        idx.assign(perm.begin(), perm.begin() + subsample_limit);
        std::sort(idx.begin(), idx.end());
    }
    const int m = static_cast<int>(idx.size());
    std::vector<long> cluster_size(static_cast<std::size_t>(k), 0);
    for (int i : idx) cluster_size[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])]++;

    double acc = 0.0;
    std::vector<double> mean_dist(static_cast<std::size_t>(k));
    for (int a = 0; a < m; ++a) {
        const int i = idx[static_cast<std::size_t>(a)];
        const int ci = labels[static_cast<std::size_t>(i)];
        if (cluster_size[static_cast<std::size_t>(ci)] <= 1) continue;  // s(i) = 0
        std::fill(mean_dist.begin(), mean_dist.end(), 0.0);
        for (int b = 0; b < m; ++b) {
            if (a == b) continue;
            const int j = idx[static_cast<std::size_t>(b)];
            mean_dist[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] +=
                std::sqrt(squared_distance(points.row(i), points.row(j), points.dim));
        }
        const double ai = mean_dist[static_cast<std::size_t>(ci)] /
                          static_cast<double>(cluster_size[static_cast<std::size_t>(ci)] - 1);
        double bi = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c == ci || cluster_size[static_cast<std::size_t>(c)] == 0) continue;
            bi = std::min(bi, mean_dist[static_cast<std::size_t>(c)] /
                                  static_cast<double>(cluster_size[static_cast<std::size_t>(c)]));
        }
        if (!std::isfinite(bi)) continue;
        acc += (bi - ai) / std::max(ai, bi);
    }
    return acc / static_cast<double>(m);
}

// Best of n_init restarts by final inertia, the usual guard against Lloyd
// local optima on elongated clouds.
inline KmeansResult kmeans(const PointMatrix& points, int k, std::uint64_t seed,
                           int max_iter = 300, int n_init = 10) {
    require(n_init >= 1, "kmeans: n_init must be positive");
    KmeansResult best;
    for (int i = 0; i < n_init; ++i) {
        KmeansResult r = kmeans_single(points, k, mix_seed(seed, 0xba5e + static_cast<std::uint64_t>(i)),
                                       max_iter);
        if (i == 0 || r.inertia < best.inertia) best = std::move(r);
    }
    return best;
}

struct KCandidate {
    int k = 0;
    double silhouette = 0.0;
    double size_cv = 0.0;  // coefficient of variation of cluster sizes
    double inertia = 0.0;
};

struct ClusterModel {
    KmeansResult result;
    double silhouette = 0.0;
    double size_cv = 0.0;
    std::vector<KCandidate> candidates;
};

inline double size_coefficient_of_variation(const std::vector<int>& labels, int k) {
    std::vector<double> sizes(static_cast<std::size_t>(k), 0.0);
    for (int c : labels) sizes[static_cast<std::size_t>(c)] += 1.0;
    double mean = 0.0;
    for (double s : sizes) mean += s;
    mean /= static_cast<double>(k);
    double var = 0.0;
    for (double s : sizes) var += (s - mean) * (s - mean);
    var /= static_cast<double>(k);
    return mean > 0.0 ? std::sqrt(var) / mean : 0.0;
}

// Runs k-means per candidate k and selects by silhouette (primary); the
// cluster-size dispersion is reported alongside, ties broken toward the
// smaller dispersion and then the smaller k.
inline ClusterModel kmeans_fit(const PointMatrix& points, std::vector<int> k_candidates,
                               std::uint64_t seed, int silhouette_subsample = 10000) {
    require(!k_candidates.empty(), "kmeans_fit: no candidate k");
    std::sort(k_candidates.begin(), k_candidates.end());
    ClusterModel best;
    bool first = true;
    for (int k : k_candidates) {
        require(points.count >= k, "kmeans_fit: fewer points than clusters");
        KmeansResult r = kmeans(points, k, mix_seed(seed, static_cast<std::uint64_t>(k)));
        KCandidate cand;
        cand.k = k;
        cand.inertia = r.inertia;
        cand.silhouette = k >= 2 ? silhouette_score(points, r.labels, k, silhouette_subsample,
                                                    mix_seed(seed, 0x5e1ecu))
                                 : 0.0;
        cand.size_cv = size_coefficient_of_variation(r.labels, k);
        const bool better =
            first || cand.silhouette > best.silhouette ||
            (cand.silhouette == best.silhouette && cand.size_cv < best.size_cv);
        if (better) {
            best.result = std::move(r);
            best.silhouette = cand.silhouette;
            best.size_cv = cand.size_cv;
        }
        best.candidates.push_back(cand);
        first = false;
    }
    return best;
}

// Labels an out-of-sample point against fitted centroids; clustering lives in
// latent space, so downstream embeddings never change labels.
inline int assign_cluster(const ClusterModel& model, const double* point) {
    return detail::nearest_centroid(model.result.centroids, point);
}

}  // namespace dsa::analyze
