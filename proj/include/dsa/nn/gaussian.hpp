#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "dsa/core/error.hpp"

namespace dsa::nn {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Diagonal-covariance Gaussian. The currency of every model head: emission,
// transition and posterior distributions are all of this form.
struct GaussianDiag {
    std::vector<double> mean;
    std::vector<double> variance;

    std::size_t dim() const { return mean.size(); }

    void validate() const {
        require_shape(mean.size() == variance.size(), "GaussianDiag: mean/variance length mismatch");
        for (double v : variance)
            if (!(v > 0.0)) throw DomainError("GaussianDiag: variance must be strictly positive");
    }
};

// log N(x | mean, diag(variance)), summed over dimensions.
inline double gaussian_log_density(const std::vector<double>& x, const GaussianDiag& g) {
    require_shape(x.size() == g.mean.size(), "gaussian_log_density: length mismatch");
    double acc = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double v = g.variance[d];
        if (!(v > 0.0)) throw DomainError("gaussian_log_density: nonpositive variance");
        const double r = x[d] - g.mean[d];
        acc += -0.5 * (kLog2Pi + std::log(v)) - 0.5 * r * r / v;
    }
    return acc;
}

// Closed-form KL(q || p) between diagonal Gaussians; nonnegative, zero iff equal.
inline double kl_diag_gaussians(const GaussianDiag& q, const GaussianDiag& p) {
    require_shape(q.mean.size() == p.mean.size(), "kl_diag_gaussians: dimension mismatch");
    q.validate();
    p.validate();
    double acc = 0.0;
    for (std::size_t d = 0; d < q.mean.size(); ++d) {
        const double vq = q.variance[d];
        const double vp = p.variance[d];
        const double dm = q.mean[d] - p.mean[d];
        acc += 0.5 * (std::log(vp / vq) + (vq + dm * dm) / vp - 1.0);
    }
    return acc;
}

// mean + sqrt(variance) * noise, elementwise.
inline std::vector<double> reparameterize(const GaussianDiag& g, const std::vector<double>& noise) {
    require_shape(noise.size() == g.mean.size(), "reparameterize: noise length mismatch");
    std::vector<double> z(g.mean.size());
    for (std::size_t d = 0; d < z.size(); ++d)
        z[d] = g.mean[d] + std::sqrt(g.variance[d]) * noise[d];
    return z;
}

}  // namespace dsa::nn
