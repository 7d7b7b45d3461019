#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dif/field.hpp"

namespace dif {

// Training query points with ground truth. designed_mu equals gt_occ; both
// kept so the batch mirrors the supervision targets exactly.
struct SampleBatch {
    std::vector<Vec3> points;
    std::vector<double> gt_sdf;       // scene units, positive inside
    std::vector<double> gt_occ;       // smooth occupancy of gt_sdf
    std::vector<double> designed_mu;  // == gt_occ
    std::vector<double> designed_sigma;

    std::size_t size() const { return points.size(); }
};

inline void validate_batch(const SampleBatch& b, const SmoothOccParams& occ) {
    std::size_t n = b.points.size();
    if (b.gt_sdf.size() != n || b.gt_occ.size() != n || b.designed_mu.size() != n ||
        b.designed_sigma.size() != n)
        throw std::invalid_argument("sample batch: field lengths disagree");
    for (std::size_t i = 0; i < n; ++i) {
        if (b.gt_occ[i] != smooth_occupancy(b.gt_sdf[i], occ.alpha))
            throw std::invalid_argument("sample batch: gt_occ inconsistent with gt_sdf");
        if (b.designed_mu[i] != b.gt_occ[i])
            throw std::invalid_argument("sample batch: designed_mu != gt_occ");
        if (!(b.designed_sigma[i] > 0))
            throw std::invalid_argument("sample batch: designed_sigma must be positive");
    }
}

// mix*n points uniform in bbox, the rest drawn on the surface and perturbed
// by isotropic Gaussian noise. Pure function of (shape, args, seed).
inline SampleBatch sample_training_points(const Shape& shape, std::size_t n, double mix,
                                          double noise_sd, const Box3& bbox, std::uint64_t seed,
                                          const SmoothOccParams& occ, const DesignParams& design) {
    if (n == 0) throw std::invalid_argument("sample_training_points: n must be > 0");
    if (!(mix >= 0.0 && mix <= 1.0))
        throw std::invalid_argument("sample_training_points: mix must be in [0, 1]");
    if (!(noise_sd > 0.0))
        throw std::invalid_argument("sample_training_points: noise_sd must be > 0");

    Rng rng(mix_seed(seed, 0x5a3f9e1dULL));
    std::size_t n_uniform = static_cast<std::size_t>(std::llround(mix * static_cast<double>(n)));
    n_uniform = std::min(n_uniform, n);

    SampleBatch batch;
    batch.points.reserve(n);
    for (std::size_t i = 0; i < n_uniform; ++i) batch.points.push_back(rng.in_box(bbox));
    for (std::size_t i = n_uniform; i < n; ++i) {
        Vec3 p = sample_surface_point(shape, rng) + rng.normal3() * noise_sd;
        batch.points.push_back(p);
    }

    batch.gt_sdf.resize(n);
    batch.gt_occ.resize(n);
    batch.designed_mu.resize(n);
    batch.designed_sigma.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = sdf_eval(shape, batch.points[i]);
        double o = smooth_occupancy(s, occ.alpha);
        batch.gt_sdf[i] = s;
        batch.gt_occ[i] = o;
        batch.designed_mu[i] = o;
        batch.designed_sigma[i] = designed_sigma(o, design);
    }
    return batch;
}

} // namespace dif
