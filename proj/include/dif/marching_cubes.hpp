#pragma once

#include <array>
#include <cstdint>

#include "dif/grid.hpp"
#include "dif/mesh.hpp"

namespace dif {

namespace mc {

// Corner c sits at offset ((c&1), (c>>1)&1, (c>>2)&1). Edges 0-3 run along
// x, 4-7 along y, 8-11 along z.
inline constexpr int kEdgeCorners[12][2] = {
    {0, 1}, {2, 3}, {4, 5}, {6, 7}, // x
    {0, 2}, {1, 3}, {4, 6}, {5, 7}, // y
    {0, 4}, {1, 5}, {2, 6}, {3, 7}, // z
};

// Cube faces as cyclic corner loops.
inline constexpr int kFaceLoops[6][4] = {
    {0, 2, 6, 4}, // x = 0
    {1, 3, 7, 5}, // x = 1
    {0, 1, 5, 4}, // y = 0
    {2, 3, 7, 6}, // y = 1
    {0, 1, 3, 2}, // z = 0
    {4, 5, 7, 6}, // z = 1
};

inline int edge_between(int a, int b) {
    for (int e = 0; e < 12; ++e) {
        if ((kEdgeCorners[e][0] == a && kEdgeCorners[e][1] == b) ||
            (kEdgeCorners[e][0] == b && kEdgeCorners[e][1] == a))
            return e;
    }
    return -1;
}

inline Vec3 corner_pos(int c) {
    return {static_cast<double>(c & 1), static_cast<double>((c >> 1) & 1),
            static_cast<double>((c >> 2) & 1)};
}

inline Vec3 edge_midpoint(int e) {
    return (corner_pos(kEdgeCorners[e][0]) + corner_pos(kEdgeCorners[e][1])) * 0.5;
}

// 256-entry lookup of triangles as edge-index triples, generated once by
// tracing the marching-squares boundary on each face and fan-triangulating
// the resulting closed polygons. Ambiguous faces (diagonal inside corners)
// always separate the inside corners; the rule depends only on the face's
// values, so adjacent cells produce matching boundaries.
class CaseTable {
public:
    static const CaseTable& get() {
        static CaseTable t;
        return t;
    }

    const std::vector<std::array<int, 3>>& triangles(int mask) const { return cases_[mask]; }

private:
    CaseTable() {
        for (int mask = 0; mask < 256; ++mask) cases_[mask] = build_case(mask);
    }

    static std::vector<std::array<int, 3>> build_case(int mask) {
        auto inside = [&](int c) { return (mask >> c) & 1; };

        // Segment links per crossed edge, via marching squares on each face.
        std::array<std::vector<int>, 12> links;
        for (const auto& loop : kFaceLoops) {
            std::vector<int> crossed;
            for (int k = 0; k < 4; ++k) {
                int a = loop[k], b = loop[(k + 1) % 4];
                if (inside(a) != inside(b)) crossed.push_back(edge_between(a, b));
            }
            if (crossed.empty()) continue;
            if (crossed.size() == 2) {
                links[crossed[0]].push_back(crossed[1]);
                links[crossed[1]].push_back(crossed[0]);
            } else {
                // Ambiguous face: pair the edges around each inside corner of
                // the diagonal.
                for (int k = 0; k < 4; ++k) {
                    int c = loop[k];
                    if (!inside(c)) continue;
                    int prev = loop[(k + 3) % 4], next = loop[(k + 1) % 4];
                    if (inside(prev) || inside(next)) continue; // not the diagonal case
                    int e1 = edge_between(prev, c), e2 = edge_between(c, next);
                    links[e1].push_back(e2);
                    links[e2].push_back(e1);
                }
            }
        }

        // Trace closed polygons.
        std::array<bool, 12> used{};
        std::vector<std::vector<int>> polygons;
        for (int start = 0; start < 12; ++start) {
            if (links[start].empty() || used[start]) continue;
            std::vector<int> poly;
            int prev = -1, cur = start;
            do {
                poly.push_back(cur);
                used[cur] = true;
                int next = links[cur][0] == prev ? links[cur][1] : links[cur][0];
                prev = cur;
                cur = next;
            } while (cur != start);
            polygons.push_back(std::move(poly));
        }

        std::vector<std::array<int, 3>> tris;
        for (auto& poly : polygons) {
            // Orient so normals point toward the outside corners (occupancy
            // decreasing): along any crossed edge, from inside corner to
            // outside corner.
            Vec3 n{0, 0, 0};
            for (std::size_t i = 0; i < poly.size(); ++i) {
                Vec3 a = edge_midpoint(poly[i]);
                Vec3 b = edge_midpoint(poly[(i + 1) % poly.size()]);
                n += cross(a, b); // Newell
            }
            int e0 = poly[0];
            int cin = inside(kEdgeCorners[e0][0]) ? kEdgeCorners[e0][0] : kEdgeCorners[e0][1];
            int cout = inside(kEdgeCorners[e0][0]) ? kEdgeCorners[e0][1] : kEdgeCorners[e0][0];
            Vec3 outward = corner_pos(cout) - corner_pos(cin);
            if (dot(n, outward) < 0) std::reverse(poly.begin(), poly.end());

            for (std::size_t i = 1; i + 1 < poly.size(); ++i)
                tris.push_back({poly[0], poly[i], poly[i + 1]});
        }
        return tris;
    }

    std::array<std::vector<std::array<int, 3>>, 256> cases_;
};

} // namespace mc

// Standard 256-case marching cubes with linear edge interpolation at the
// given iso level. Nodes strictly above iso count as inside. Returns an
// empty mesh when the field never crosses iso.
inline TriMesh marching_cubes(const FieldGrid& grid, double iso = 0.5) {
    grid.validate();
    const mc::CaseTable& table = mc::CaseTable::get();

    const int nx = grid.nx, ny = grid.ny, nz = grid.nz;
    const Vec3 cell = grid.cell_size();

    // Welded vertex per grid edge, -1 when absent; axis-major layout.
    const std::size_t n_xe = static_cast<std::size_t>(nx - 1) * ny * nz;
    const std::size_t n_ye = static_cast<std::size_t>(nx) * (ny - 1) * nz;
    std::vector<std::int32_t> edge_vertex[3];
    edge_vertex[0].assign(n_xe, -1);
    edge_vertex[1].assign(n_ye, -1);
    edge_vertex[2].assign(static_cast<std::size_t>(nx) * ny * (nz - 1), -1);

    auto edge_slot = [&](int axis, int i, int j, int k) -> std::int32_t& {
        switch (axis) {
            case 0: return edge_vertex[0][(static_cast<std::size_t>(k) * ny + j) * (nx - 1) + i];
            case 1: return edge_vertex[1][(static_cast<std::size_t>(k) * (ny - 1) + j) * nx + i];
            default: return edge_vertex[2][(static_cast<std::size_t>(k) * ny + j) * nx + i];
        }
    };

    TriMesh mesh;

    auto vertex_on_edge = [&](int axis, int i, int j, int k) -> std::uint32_t {
        std::int32_t& slot = edge_slot(axis, i, j, k);
        if (slot >= 0) return static_cast<std::uint32_t>(slot);
        double v0 = grid.at(i, j, k);
        int i1 = i + (axis == 0), j1 = j + (axis == 1), k1 = k + (axis == 2);
        double v1 = grid.at(i1, j1, k1);
        double t = (iso - v0) / (v1 - v0);
        t = std::clamp(t, 0.0, 1.0);
        Vec3 p = grid.node(i, j, k);
        p[axis] += t * cell[axis];
        slot = static_cast<std::int32_t>(mesh.vertices.size());
        mesh.vertices.push_back(p);
        return static_cast<std::uint32_t>(slot);
    };

    for (int k = 0; k + 1 < nz; ++k) {
        for (int j = 0; j + 1 < ny; ++j) {
            for (int i = 0; i + 1 < nx; ++i) {
                int mask = 0;
                for (int c = 0; c < 8; ++c) {
                    double v = grid.at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                    if (v > iso) mask |= 1 << c;
                }
                if (mask == 0 || mask == 255) continue;
                for (const auto& tri : table.triangles(mask)) {
                    Tri out;
                    for (int v = 0; v < 3; ++v) {
                        int e = tri[v];
                        int axis = e / 4;
                        int base = mc::kEdgeCorners[e][0];
                        out[v] = vertex_on_edge(axis, i + (base & 1), j + ((base >> 1) & 1),
                                                k + ((base >> 2) & 1));
                    }
                    mesh.triangles.push_back(out);
                }
            }
        }
    }

    drop_degenerate_triangles(mesh);
    if (!mesh.triangles.empty()) compute_vertex_normals(mesh);
    return mesh;
}

} // namespace dif
