#pragma once

#include <functional>

#include "dif/model.hpp"
#include "dif/parallel.hpp"

namespace dif {

// Dense occupancy evaluation on a regular lattice, nodes at the bbox corners
// inclusive. Values stored x-fastest: index = (k*ny + j)*nx + i.
struct FieldGrid {
    Box3 bbox;
    int nx = 2, ny = 2, nz = 2;
    std::vector<double> values;

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * ny + j) * nx + i;
    }
    double at(int i, int j, int k) const { return values[index(i, j, k)]; }

    Vec3 node(int i, int j, int k) const {
        Vec3 e = bbox.extent();
        return {bbox.lo.x + e.x * i / (nx - 1), bbox.lo.y + e.y * j / (ny - 1),
                bbox.lo.z + e.z * k / (nz - 1)};
    }

    Vec3 cell_size() const {
        Vec3 e = bbox.extent();
        return {e.x / (nx - 1), e.y / (ny - 1), e.z / (nz - 1)};
    }

    void validate() const {
        if (nx < 2 || ny < 2 || nz < 2)
            throw std::invalid_argument("field grid: resolution must be >= 2 per axis");
        if (values.size() != static_cast<std::size_t>(nx) * ny * nz)
            throw std::invalid_argument("field grid: value count mismatch");
        for (double v : values)
            if (!std::isfinite(v)) throw std::invalid_argument("field grid: non-finite value");
    }
};

using FieldFn = std::function<double(const Vec3&)>;

// Evaluates field at every lattice node, clamped to [0, 1].
inline FieldGrid evaluate_grid(const FieldFn& field, const Box3& bbox, int res_x, int res_y,
                               int res_z, int threads = 0) {
    if (res_x < 2 || res_y < 2 || res_z < 2)
        throw std::invalid_argument("evaluate_grid: resolution must be >= 2 per axis");
    FieldGrid g;
    g.bbox = bbox;
    g.nx = res_x;
    g.ny = res_y;
    g.nz = res_z;
    g.values.resize(static_cast<std::size_t>(res_x) * res_y * res_z);
    threads = resolve_threads(threads);
    std::size_t n_nodes = g.values.size();
    parallel_chunks(n_nodes, threads * 8, threads, [&](int, std::size_t b, std::size_t e) {
        for (std::size_t idx = b; idx < e; ++idx) {
            int i = static_cast<int>(idx % g.nx);
            int j = static_cast<int>((idx / g.nx) % g.ny);
            int k = static_cast<int>(idx / (static_cast<std::size_t>(g.nx) * g.ny));
            double v = field(g.node(i, j, k));
            if (!std::isfinite(v)) throw NumericError("evaluate_grid: non-finite field value");
            g.values[idx] = std::clamp(v, 0.0, 1.0);
        }
    });
    return g;
}

inline FieldGrid evaluate_grid(const FieldFn& field, const Box3& bbox, int res, int threads = 0) {
    return evaluate_grid(field, bbox, res, res, res, threads);
}

// Analytic smooth occupancy of a shape, the extraction oracle.
inline FieldFn analytic_occupancy_field(const Shape& shape, const SmoothOccParams& occ) {
    return [shape, occ](const Vec3& p) { return smooth_occupancy(sdf_eval(shape, p), occ.alpha); };
}

inline FieldFn model_field(const TrainedModel& tm, const Shape& target, const Shape& prior,
                           const EvalMode& mode) {
    return [&tm, &target, &prior, mode](const Vec3& p) {
        return evaluate_trained(tm, target, prior, p, mode);
    };
}

inline FieldGrid evaluate_grid(const TrainedModel& tm, const Shape& target, const Shape& prior,
                               const Box3& bbox, int res, const EvalMode& mode, int threads = 0) {
    return evaluate_grid(model_field(tm, target, prior, mode), bbox, res, threads);
}

} // namespace dif
