#pragma once

#include <cmath>
#include <stdexcept>

#include "dif/shapes.hpp"

namespace dif {

// Graininess coefficient of the smooth occupancy sigmoid.
struct SmoothOccParams {
    double alpha = 20.0;
};

// Gaussian over the occupancy value at one query point; sigma is a standard
// deviation.
struct OccDistribution {
    double mu = 0.0;
    double sigma = 1.0;
};

// Pseudo ground-truth sigma profile: peak k at the surface, decay rate beta.
struct DesignParams {
    double k = 0.6;
    double beta = 4.0;
};

// Sigmoid of the signed distance. Exponent clamped at +/-60 so extreme
// |alpha * sdf| saturates to 0/1 without overflow.
inline double smooth_occupancy(double sdf, double alpha) {
    double t = alpha * sdf;
    t = std::clamp(t, -60.0, 60.0);
    return 1.0 / (1.0 + std::exp(-t));
}

inline double smooth_occupancy(double sdf, const SmoothOccParams& occ) {
    return smooth_occupancy(sdf, occ.alpha);
}

// sigma_d = k * exp(-beta * (mu - 0.5)^2): maximal on the surface, even
// about mu = 0.5, decaying toward the saturated regions.
inline double designed_sigma(double mu_gt, const DesignParams& dp) {
    double d = mu_gt - 0.5;
    return dp.k * std::exp(-dp.beta * d * d);
}

inline OccDistribution designed_distribution(const Vec3& p, const Shape& shape,
                                             const SmoothOccParams& occ, const DesignParams& dp) {
    double mu = smooth_occupancy(sdf_eval(shape, p), occ.alpha);
    return {mu, designed_sigma(mu, dp)};
}

// KL(pred || target) for two univariate Gaussians:
// ln(sigma_t / sigma_p) + (sigma_p^2 + (mu_p - mu_t)^2) / (2 sigma_t^2) - 1/2.
inline double gaussian_kl(const OccDistribution& pred, const OccDistribution& target) {
    if (!(pred.sigma > 0.0) || !(target.sigma > 0.0))
        throw std::domain_error("gaussian_kl: sigma must be positive");
    double dmu = pred.mu - target.mu;
    double vt = target.sigma * target.sigma;
    return std::log(target.sigma / pred.sigma) +
           (pred.sigma * pred.sigma + dmu * dmu) / (2.0 * vt) - 0.5;
}

// Partial derivatives of gaussian_kl with respect to the prediction.
inline void gaussian_kl_grad(const OccDistribution& pred, const OccDistribution& target,
                             double& d_mu, double& d_sigma) {
    double vt = target.sigma * target.sigma;
    d_mu = (pred.mu - target.mu) / vt;
    d_sigma = pred.sigma / vt - 1.0 / pred.sigma;
}

} // namespace dif
