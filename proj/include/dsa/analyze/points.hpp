#pragma once

#include <cstdint>
#include <vector>

#include "dsa/core/error.hpp"
#include "dsa/data/cohort.hpp"

namespace dsa::analyze {

// Flat row-major point set; the working currency of clustering and embedding.
struct PointMatrix {
    int count = 0;
    int dim = 0;
    std::vector<double> data;

    static PointMatrix zeros(int count, int dim) {
        PointMatrix m;
        m.count = count;
        m.dim = dim;
        m.data.assign(static_cast<std::size_t>(count) * dim, 0.0);
        return m;
    }

    const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * dim; }
    double* row(int i) { return data.data() + static_cast<std::size_t>(i) * dim; }

    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * dim + j]; }
    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * dim + j]; }

    void require_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) throw DataError("PointMatrix: non-finite coordinate");
    }
};

inline double squared_distance(const double* a, const double* b, int dim) {
    double acc = 0.0;
    for (int i = 0; i < dim; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

// All (patient, step) latent means pooled into one point set, with the
// bookkeeping needed by endpoint analyses: exactly one endpoint per patient.
struct PooledLatents {
    PointMatrix points;
    std::vector<int> patient_index;   // per point
    std::vector<int> step_index;      // per point
    std::vector<std::uint8_t> endpoint;  // per point; 1 on each patient's last step
    std::vector<int> patient_start;   // offset of each patient's first point
};

inline PooledLatents pool_latents(const std::vector<LatentTrajectory>& trajectories) {
    require(!trajectories.empty(), "pool_latents: no trajectories");
    const int k = trajectories.front().latent_dim;
    std::size_t total = 0;
    for (const auto& t : trajectories) {
        require_shape(t.latent_dim == k, "pool_latents: latent dimension mismatch");
        total += static_cast<std::size_t>(t.steps);
    }
    PooledLatents out;
    out.points.count = static_cast<int>(total);
    out.points.dim = k;
    out.points.data.reserve(total * static_cast<std::size_t>(k));
    out.patient_index.reserve(total);
    out.step_index.reserve(total);
    out.endpoint.reserve(total);
    for (std::size_t p = 0; p < trajectories.size(); ++p) {
        const auto& t = trajectories[p];
        out.patient_start.push_back(static_cast<int>(out.patient_index.size()));
        for (int step = 0; step < t.steps; ++step) {
            out.points.data.insert(out.points.data.end(),
                                   t.means.begin() + static_cast<std::ptrdiff_t>(step) * k,
                                   t.means.begin() + static_cast<std::ptrdiff_t>(step + 1) * k);
            out.patient_index.push_back(static_cast<int>(p));
            out.step_index.push_back(step);
            out.endpoint.push_back(step == t.steps - 1 ? 1 : 0);
        }
    }
    out.points.require_finite();
    return out;
}

}  // namespace dsa::analyze
