#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dif/rng.hpp"
#include "dif/vec3.hpp"

namespace dif {

using Tri = std::array<std::uint32_t, 3>;

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Vec3> normals; // per-vertex, unit length
    std::vector<Tri> triangles;

    bool empty() const { return triangles.empty(); }

    Box3 bounds() const {
        Box3 b = Box3::empty();
        for (const auto& v : vertices) b.expand(v);
        return b;
    }
};

inline Vec3 triangle_normal(const TriMesh& m, const Tri& t) {
    return cross(m.vertices[t[1]] - m.vertices[t[0]], m.vertices[t[2]] - m.vertices[t[0]]);
}

inline double triangle_area(const TriMesh& m, const Tri& t) {
    return 0.5 * norm(triangle_normal(m, t));
}

inline double surface_area(const TriMesh& m) {
    double a = 0.0;
    for (const auto& t : m.triangles) a += triangle_area(m, t);
    return a;
}

// Angle-weighted per-vertex normals.
inline void compute_vertex_normals(TriMesh& m) {
    m.normals.assign(m.vertices.size(), Vec3{0, 0, 0});
    for (const auto& t : m.triangles) {
        Vec3 fn = normalized(triangle_normal(m, t));
        for (int k = 0; k < 3; ++k) {
            Vec3 e1 = normalized(m.vertices[t[(k + 1) % 3]] - m.vertices[t[k]]);
            Vec3 e2 = normalized(m.vertices[t[(k + 2) % 3]] - m.vertices[t[k]]);
            double ang = std::acos(std::clamp(dot(e1, e2), -1.0, 1.0));
            m.normals[t[k]] += fn * ang;
        }
    }
    for (auto& n : m.normals) n = normalized(n);
}

// Index range, degenerate triangles, unit normals.
inline void validate_mesh(const TriMesh& m) {
    const std::uint32_t nv = static_cast<std::uint32_t>(m.vertices.size());
    for (const auto& t : m.triangles) {
        if (t[0] >= nv || t[1] >= nv || t[2] >= nv)
            throw std::invalid_argument("mesh: triangle index out of range");
        if (triangle_area(m, t) <= 1e-12)
            throw std::invalid_argument("mesh: degenerate triangle (area <= 1e-12)");
    }
    if (!m.normals.empty()) {
        if (m.normals.size() != m.vertices.size())
            throw std::invalid_argument("mesh: normal count != vertex count");
        for (const auto& n : m.normals)
            if (std::abs(norm(n) - 1.0) > 1e-6)
                throw std::invalid_argument("mesh: non-unit vertex normal");
    }
}

// Drops triangles with area <= 1e-12 (including repeated-index ones).
inline void drop_degenerate_triangles(TriMesh& m) {
    std::vector<Tri> kept;
    kept.reserve(m.triangles.size());
    for (const auto& t : m.triangles) {
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
        if (triangle_area(m, t) <= 1e-12) continue;
        kept.push_back(t);
    }
    m.triangles.swap(kept);
}

// Cumulative-area table for area-weighted surface sampling.
struct MeshAreaTable {
    std::vector<double> cdf; // cumulative triangle areas
    double total = 0.0;

    explicit MeshAreaTable(const TriMesh& m) {
        cdf.reserve(m.triangles.size());
        for (const auto& t : m.triangles) {
            total += triangle_area(m, t);
            cdf.push_back(total);
        }
    }

    std::size_t pick(double u01) const {
        double target = u01 * total;
        auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
        std::size_t i = static_cast<std::size_t>(it - cdf.begin());
        return std::min(i, cdf.size() - 1);
    }
};

struct SurfaceSample {
    Vec3 point;
    Vec3 normal; // interpolated vertex normal if present, else face normal
    std::size_t tri = 0;
};

inline SurfaceSample sample_mesh_surface(const TriMesh& m, const MeshAreaTable& table, Rng& rng) {
    std::size_t ti = table.pick(rng.uniform());
    const Tri& t = m.triangles[ti];
    double r1 = std::sqrt(rng.uniform());
    double r2 = rng.uniform();
    double w0 = 1.0 - r1, w1 = r1 * (1.0 - r2), w2 = r1 * r2;
    SurfaceSample s;
    s.point = m.vertices[t[0]] * w0 + m.vertices[t[1]] * w1 + m.vertices[t[2]] * w2;
    if (!m.normals.empty())
        s.normal = normalized(m.normals[t[0]] * w0 + m.normals[t[1]] * w1 + m.normals[t[2]] * w2);
    else
        s.normal = normalized(triangle_normal(m, t));
    s.tri = ti;
    return s;
}

} // namespace dif
