#pragma once

#include <cstdint>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "dif/mesh_queries.hpp"
#include "dif/model.hpp"

namespace dif {

struct MetricsReport {
    double chamfer = 0.0;            // scene units
    double p2s = 0.0;                // scene units
    double normal_consistency = 0.0; // 1 - mean cosine, in [0, 2]
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const MetricsReport& r) {
    return {{"chamfer", r.chamfer},
            {"p2s", r.p2s},
            {"normal_consistency", r.normal_consistency},
            {"n_samples", r.n_samples},
            {"seed", r.seed}};
}

namespace detail {

inline void require_nonempty(const TriMesh& m, const char* what) {
    if (m.empty() || m.vertices.empty())
        throw std::invalid_argument(std::string(what) + ": empty mesh");
}

// Mean closest-point distance from area-weighted samples on `from` to `to`.
inline double one_sided_distance(const TriMesh& from, const TriangleGrid& to_grid, std::size_t n,
                                 Rng& rng) {
    MeshAreaTable table(from);
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        SurfaceSample s = sample_mesh_surface(from, table, rng);
        acc += to_grid.closest(s.point).dist;
    }
    return acc / static_cast<double>(n);
}

inline Vec3 interpolated_normal(const TriMesh& m, const ClosestHit& hit) {
    const Tri& t = m.triangles[hit.tri];
    if (m.normals.empty()) return normalized(triangle_normal(m, t));
    return normalized(m.normals[t[0]] * hit.bary.u + m.normals[t[1]] * hit.bary.v +
                      m.normals[t[2]] * hit.bary.w);
}

inline double one_sided_cosine(const TriMesh& from, const TriMesh& to, const TriangleGrid& to_grid,
                               std::size_t n, Rng& rng) {
    MeshAreaTable table(from);
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        SurfaceSample s = sample_mesh_surface(from, table, rng);
        ClosestHit hit = to_grid.closest(s.point);
        acc += dot(s.normal, interpolated_normal(to, hit));
    }
    return acc / static_cast<double>(n);
}

} // namespace detail

// Bilateral mean closest-point distance, n area-weighted samples per side.
inline double chamfer(const TriMesh& a, const TriMesh& b, std::size_t n, std::uint64_t seed) {
    detail::require_nonempty(a, "chamfer");
    detail::require_nonempty(b, "chamfer");
    if (n == 0) throw std::invalid_argument("chamfer: n must be > 0");
    TriangleGrid grid_a(a), grid_b(b);
    Rng rng_ab(mix_seed(seed, 0xab01ULL));
    Rng rng_ba(mix_seed(seed, 0xba10ULL));
    double d_ab = detail::one_sided_distance(a, grid_b, n, rng_ab);
    double d_ba = detail::one_sided_distance(b, grid_a, n, rng_ba);
    return 0.5 * (d_ab + d_ba);
}

// Mean distance from ground-truth surface samples to the mesh.
inline double p2s(const std::vector<Vec3>& gt_points, const TriMesh& mesh) {
    if (gt_points.empty()) throw std::invalid_argument("p2s: need at least one point");
    detail::require_nonempty(mesh, "p2s");
    TriangleGrid grid(mesh);
    double acc = 0;
    for (const auto& p : gt_points) acc += grid.closest(p).dist;
    return acc / static_cast<double>(gt_points.size());
}

// 1 - mean cosine between sample normals on one mesh and closest-point
// interpolated normals on the other, symmetrized.
inline double normal_consistency(const TriMesh& a, const TriMesh& b, std::size_t n,
                                 std::uint64_t seed) {
    detail::require_nonempty(a, "normal_consistency");
    detail::require_nonempty(b, "normal_consistency");
    if (a.normals.empty() || b.normals.empty())
        throw std::invalid_argument("normal_consistency: meshes must carry normals");
    if (n == 0) throw std::invalid_argument("normal_consistency: n must be > 0");
    TriangleGrid grid_a(a), grid_b(b);
    Rng rng_ab(mix_seed(seed, 0xcab1ULL));
    Rng rng_ba(mix_seed(seed, 0xcba2ULL));
    double c_ab = detail::one_sided_cosine(a, b, grid_b, n, rng_ab);
    double c_ba = detail::one_sided_cosine(b, a, grid_a, n, rng_ba);
    return 1.0 - 0.5 * (c_ab + c_ba);
}

// ---------------------------------------------------------------------------
// Spearman rank correlation (average ranks for ties)

inline std::vector<double> ranks(const std::vector<double>& x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        double avg = 0.5 * (i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("spearman_rho: need two equal-length series with n >= 2");
    std::vector<double> rx = ranks(x), ry = ranks(y);
    double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
    double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
    double num = 0, dx = 0, dy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        num += (rx[i] - mx) * (ry[i] - my);
        dx += (rx[i] - mx) * (rx[i] - mx);
        dy += (ry[i] - my) * (ry[i] - my);
    }
    if (dx == 0 || dy == 0) return 0.0;
    return num / std::sqrt(dx * dy);
}

// ---------------------------------------------------------------------------
// Uncertainty-vs-distance diagnostic

struct SigmaProfile {
    std::vector<double> bin_edges;  // |sdf| bin boundaries, size bins+1
    std::vector<double> mean_dist;  // per-bin mean |sdf| (populated bins only meaningful)
    std::vector<double> mean_sigma; // per-bin mean predicted sigma
    std::vector<std::size_t> counts;
    double rho = 0.0; // Spearman over populated bin means
    std::uint64_t seed = 0;

    std::size_t populated() const {
        std::size_t n = 0;
        for (auto c : counts) n += c > 0;
        return n;
    }
};

inline nlohmann::json to_json(const SigmaProfile& p) {
    return {{"bin_edges", p.bin_edges}, {"mean_dist", p.mean_dist},
            {"mean_sigma", p.mean_sigma}, {"counts", p.counts},
            {"rho", p.rho},              {"seed", p.seed}};
}

inline void write_profile_csv(const SigmaProfile& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write profile: " + path);
    out << "bin_lo,bin_hi,mean_dist,mean_sigma,count\n";
    for (std::size_t i = 0; i < p.counts.size(); ++i)
        out << p.bin_edges[i] << "," << p.bin_edges[i + 1] << "," << p.mean_dist[i] << ","
            << p.mean_sigma[i] << "," << p.counts[i] << "\n";
}

using SigmaFn = std::function<double(const Vec3&)>;

// Stratifies points over |sdf| in [0, max_dist] by offsetting surface samples
// along the normal, records sigma_fn, and correlates bin means.
inline SigmaProfile sigma_profile_fn(const SigmaFn& sigma_fn, const Shape& target,
                                     std::size_t n_points, int bins, std::uint64_t seed,
                                     double max_dist = 0.5) {
    if (bins < 2 || n_points == 0)
        throw std::invalid_argument("sigma_profile: need bins >= 2 and points > 0");
    SigmaProfile prof;
    prof.seed = seed;
    prof.bin_edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b) prof.bin_edges[b] = max_dist * b / bins;
    std::vector<double> dist_sum(bins, 0.0), sigma_sum(bins, 0.0);
    prof.counts.assign(bins, 0);

    Rng rng(mix_seed(seed, 0x51674aULL));
    const std::size_t per_bin = (n_points + bins - 1) / bins;
    const double w = max_dist / bins;
    std::size_t placed = 0;
    std::size_t attempts = 0;
    const std::size_t max_attempts = n_points * 64;
    while (placed < n_points && attempts < max_attempts) {
        ++attempts;
        int want = static_cast<int>(attempts % bins); // cycle target bins
        Vec3 s = sample_surface_point(target, rng);
        Vec3 n = surface_normal(target, s).value_or(Vec3{1, 0, 0});
        double mag = rng.uniform(want * w, (want + 1) * w);
        double side = rng.uniform() < 0.5 ? 1.0 : -1.0;
        Vec3 p = s + n * (side * mag);
        double d = std::abs(sdf_eval(target, p));
        if (d >= max_dist) continue;
        int bin = std::min(bins - 1, static_cast<int>(d / w));
        if (prof.counts[bin] >= per_bin) continue;
        dist_sum[bin] += d;
        sigma_sum[bin] += sigma_fn(p);
        prof.counts[bin] += 1;
        ++placed;
    }

    prof.mean_dist.assign(bins, 0.0);
    prof.mean_sigma.assign(bins, 0.0);
    std::vector<double> xs, ys;
    for (int b = 0; b < bins; ++b) {
        if (prof.counts[b] == 0) continue;
        prof.mean_dist[b] = dist_sum[b] / prof.counts[b];
        prof.mean_sigma[b] = sigma_sum[b] / prof.counts[b];
        xs.push_back(prof.mean_dist[b]);
        ys.push_back(prof.mean_sigma[b]);
    }
    prof.rho = xs.size() >= 2 ? spearman_rho(xs, ys) : 0.0;
    return prof;
}

// Profile of a trained distribution model; evaluation features (no noise).
inline SigmaProfile sigma_profile(const TrainedModel& tm, const Shape& target, const Shape& prior,
                                  std::size_t n_points, int bins, std::uint64_t seed) {
    if (tm.mode == TrainMode::Baseline)
        throw std::invalid_argument("sigma_profile: baseline model has no predicted sigma");
    SigmaFn fn = [&](const Vec3& p) {
        Rng dummy(0);
        FeatureVec7 f = extract_features(target, prior, p, 0.0, dummy);
        return predict_distribution(tm.dif, f).sigma;
    };
    return sigma_profile_fn(fn, target, n_points, bins, seed);
}

} // namespace dif
