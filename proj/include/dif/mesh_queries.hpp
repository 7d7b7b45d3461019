#pragma once

#include <cstdint>
#include <unordered_map>

#include "dif/mesh.hpp"

namespace dif {

struct TriBary {
    double u = 0, v = 0, w = 0; // weights for vertices 0,1,2
};

// Ericson, Real-Time Collision Detection, 5.1.5.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                                      TriBary* bary = nullptr) {
    auto out = [&](double u, double v, double w, const Vec3& q) {
        if (bary) *bary = {u, v, w};
        return q;
    };
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = dot(ab, ap), d2 = dot(ac, ap);
    if (d1 <= 0 && d2 <= 0) return out(1, 0, 0, a);

    Vec3 bp = p - b;
    double d3 = dot(ab, bp), d4 = dot(ac, bp);
    if (d3 >= 0 && d4 <= d3) return out(0, 1, 0, b);

    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        double v = d1 / (d1 - d3);
        return out(1 - v, v, 0, a + ab * v);
    }

    Vec3 cp = p - c;
    double d5 = dot(ab, cp), d6 = dot(ac, cp);
    if (d6 >= 0 && d5 <= d6) return out(0, 0, 1, c);

    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        double w = d2 / (d2 - d6);
        return out(1 - w, 0, w, a + ac * w);
    }

    double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return out(0, 1 - w, w, b + (c - b) * w);
    }

    double denom = 1.0 / (va + vb + vc);
    double v = vb * denom, w = vc * denom;
    return out(1 - v - w, v, w, a + ab * v + ac * w);
}

struct ClosestHit {
    double dist = 0;
    Vec3 point;
    std::size_t tri = 0;
    TriBary bary;
};

// Uniform grid over triangle bounding boxes; closest-triangle queries expand
// ring by ring until the ring lower bound exceeds the best hit.
class TriangleGrid {
public:
    explicit TriangleGrid(const TriMesh& mesh, int target_cells_per_axis = 0) : mesh_(&mesh) {
        box_ = mesh.bounds();
        Vec3 ext = box_.extent();
        double pad = 1e-6 + 1e-4 * std::max({ext.x, ext.y, ext.z, 1e-9});
        box_.lo -= Vec3{pad, pad, pad};
        box_.hi += Vec3{pad, pad, pad};
        int n = target_cells_per_axis;
        if (n <= 0) {
            n = static_cast<int>(std::cbrt(static_cast<double>(mesh.triangles.size()))) + 1;
            n = std::clamp(n, 1, 96);
        }
        dims_ = {n, n, n};
        ext = box_.extent();
        cell_ = {ext.x / dims_[0], ext.y / dims_[1], ext.z / dims_[2]};
        cells_.assign(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2], {});
        for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
            const Tri& tri = mesh.triangles[t];
            Box3 tb = Box3::empty();
            for (int k = 0; k < 3; ++k) tb.expand(mesh.vertices[tri[k]]);
            auto [i0, j0, k0] = cell_of(tb.lo);
            auto [i1, j1, k1] = cell_of(tb.hi);
            for (int i = i0; i <= i1; ++i)
                for (int j = j0; j <= j1; ++j)
                    for (int k = k0; k <= k1; ++k) cells_[idx(i, j, k)].push_back(static_cast<std::uint32_t>(t));
        }
    }

    ClosestHit closest(const Vec3& p) const {
        ClosestHit best;
        best.dist = std::numeric_limits<double>::infinity();
        auto [ci, cj, ck] = cell_of(p);
        double hmin = std::min({cell_.x, cell_.y, cell_.z});
        int max_ring = dims_[0] + dims_[1] + dims_[2] + 2;
        for (int ring = 0; ring <= max_ring; ++ring) {
            if (best.dist <= (ring - 1) * hmin) break;
            bool any = visit_ring(ci, cj, ck, ring, p, best);
            // Rings exhaust the grid box monotonically; an empty ring means
            // every later ring is empty too.
            if (!any && ring > 0) break;
        }
        return best;
    }

    const TriMesh& mesh() const { return *mesh_; }

private:
    std::tuple<int, int, int> cell_of(const Vec3& p) const {
        auto f = [](double x, double lo, double h, int n) {
            int i = static_cast<int>(std::floor((x - lo) / h));
            return std::clamp(i, 0, n - 1);
        };
        return {f(p.x, box_.lo.x, cell_.x, dims_[0]), f(p.y, box_.lo.y, cell_.y, dims_[1]),
                f(p.z, box_.lo.z, cell_.z, dims_[2])};
    }

    std::size_t idx(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * dims_[1] + j) * dims_[0] + i;
    }

    void scan_cell(int i, int j, int k, const Vec3& p, ClosestHit& best) const {
        if (i < 0 || j < 0 || k < 0 || i >= dims_[0] || j >= dims_[1] || k >= dims_[2]) return;
        for (std::uint32_t t : cells_[idx(i, j, k)]) {
            const Tri& tri = mesh_->triangles[t];
            TriBary bary;
            Vec3 q = closest_point_on_triangle(p, mesh_->vertices[tri[0]], mesh_->vertices[tri[1]],
                                               mesh_->vertices[tri[2]], &bary);
            double d = norm(p - q);
            if (d < best.dist) best = {d, q, t, bary};
        }
    }

    bool visit_ring(int ci, int cj, int ck, int ring, const Vec3& p, ClosestHit& best) const {
        bool any = false;
        int i0 = ci - ring, i1 = ci + ring;
        int j0 = cj - ring, j1 = cj + ring;
        int k0 = ck - ring, k1 = ck + ring;
        for (int i = i0; i <= i1; ++i)
            for (int j = j0; j <= j1; ++j)
                for (int k = k0; k <= k1; ++k) {
                    int cheb = std::max({std::abs(i - ci), std::abs(j - cj), std::abs(k - ck)});
                    if (cheb != ring) continue;
                    if (i < 0 || j < 0 || k < 0 || i >= dims_[0] || j >= dims_[1] || k >= dims_[2])
                        continue;
                    any = true;
                    scan_cell(i, j, k, p, best);
                }
        return any;
    }

    const TriMesh* mesh_;
    Box3 box_;
    std::array<int, 3> dims_{1, 1, 1};
    Vec3 cell_{1, 1, 1};
    std::vector<std::vector<std::uint32_t>> cells_;
};

// Signed distance to a watertight mesh, sign from angle-weighted
// pseudo-normals; positive inside.
class MeshDistanceIndex {
public:
    explicit MeshDistanceIndex(const TriMesh& mesh) : grid_(mesh) {
        const TriMesh& m = mesh;
        face_normals_.resize(m.triangles.size());
        vertex_normals_.assign(m.vertices.size(), Vec3{0, 0, 0});
        for (std::size_t t = 0; t < m.triangles.size(); ++t) {
            const Tri& tri = m.triangles[t];
            Vec3 fn = normalized(triangle_normal(m, tri));
            face_normals_[t] = fn;
            for (int k = 0; k < 3; ++k) {
                Vec3 e1 = normalized(m.vertices[tri[(k + 1) % 3]] - m.vertices[tri[k]]);
                Vec3 e2 = normalized(m.vertices[tri[(k + 2) % 3]] - m.vertices[tri[k]]);
                double ang = std::acos(std::clamp(dot(e1, e2), -1.0, 1.0));
                vertex_normals_[tri[k]] += fn * ang;
                edge_normals_[edge_key(tri[k], tri[(k + 1) % 3])] += fn;
            }
        }
    }

    ClosestHit closest(const Vec3& p) const { return grid_.closest(p); }

    // Positive inside.
    double signed_distance(const Vec3& p) const {
        ClosestHit hit = grid_.closest(p);
        Vec3 n = pseudo_normal(hit);
        double side = dot(p - hit.point, n);
        return side > 0 ? -hit.dist : hit.dist;
    }

    // Outward pseudo-normal of the feature nearest to the hit.
    Vec3 pseudo_normal(const ClosestHit& hit) const {
        constexpr double eps = 1e-9;
        const Tri& tri = grid_.mesh().triangles[hit.tri];
        const TriBary& b = hit.bary;
        int zero_count = (b.u < eps) + (b.v < eps) + (b.w < eps);
        if (zero_count == 0) return face_normals_[hit.tri];
        if (zero_count == 2) {
            int vi = b.u >= eps ? 0 : (b.v >= eps ? 1 : 2);
            return normalized(vertex_normals_[tri[vi]]);
        }
        int skip = b.u < eps ? 0 : (b.v < eps ? 1 : 2);
        int a = (skip + 1) % 3, c = (skip + 2) % 3;
        auto it = edge_normals_.find(edge_key(tri[a], tri[c]));
        if (it != edge_normals_.end()) return normalized(it->second);
        return face_normals_[hit.tri];
    }

    const TriMesh& mesh() const { return grid_.mesh(); }

private:
    static std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
        if (a > b) std::swap(a, b);
        return (static_cast<std::uint64_t>(a) << 32) | b;
    }

    TriangleGrid grid_;
    std::vector<Vec3> face_normals_;
    std::vector<Vec3> vertex_normals_;
    std::unordered_map<std::uint64_t, Vec3> edge_normals_;
};

} // namespace dif
