#include <map>
#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "dif/marching_cubes.hpp"

using namespace dif;
using Catch::Approx;

namespace {

FieldGrid sphere_grid(int res, double radius = 0.5, double alpha = 20.0) {
    Shape s = make_sphere({0, 0, 0}, radius);
    return evaluate_grid(analytic_occupancy_field(s, {alpha}), {{-1, -1, -1}, {1, 1, 1}}, res, 1);
}

struct EdgeUse {
    int count = 0;
    int orientation = 0; // +1 / -1 per directed use
};

// Watertight + consistently oriented: every undirected edge has exactly two
// incident triangles using it in opposite directions.
void check_closed_oriented(const TriMesh& m) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, EdgeUse> edges;
    for (const auto& t : m.triangles) {
        for (int k = 0; k < 3; ++k) {
            std::uint32_t a = t[k], b = t[(k + 1) % 3];
            auto key = std::minmax(a, b);
            EdgeUse& e = edges[{key.first, key.second}];
            e.count += 1;
            e.orientation += a < b ? 1 : -1;
        }
    }
    std::size_t bad = 0;
    for (const auto& [k, e] : edges)
        if (e.count != 2 || e.orientation != 0) ++bad;
    CHECK(bad == 0);
}

long euler_characteristic(const TriMesh& m) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k) {
            auto key = std::minmax(t[k], t[(k + 1) % 3]);
            edges.insert({key.first, key.second});
        }
    return static_cast<long>(m.vertices.size()) - static_cast<long>(edges.size()) +
           static_cast<long>(m.triangles.size());
}

} // namespace

TEST_CASE("case table covers exactly the crossed edges", "[mc]") {
    const auto& table = mc::CaseTable::get();
    for (int mask = 0; mask < 256; ++mask) {
        std::set<int> crossed;
        for (int e = 0; e < 12; ++e) {
            bool a = (mask >> mc::kEdgeCorners[e][0]) & 1;
            bool b = (mask >> mc::kEdgeCorners[e][1]) & 1;
            if (a != b) crossed.insert(e);
        }
        std::set<int> used;
        for (const auto& t : table.triangles(mask))
            for (int v : t) used.insert(v);
        CHECK(used == crossed);
        if (mask == 0 || mask == 255) CHECK(table.triangles(mask).empty());
    }
}

TEST_CASE("single-corner case produces one triangle, complement flips it", "[mc]") {
    const auto& table = mc::CaseTable::get();
    CHECK(table.triangles(1).size() == 1);
    CHECK(table.triangles(254).size() == 1);
    // same edge set, opposite winding
    std::set<int> a(table.triangles(1)[0].begin(), table.triangles(1)[0].end());
    std::set<int> b(table.triangles(254)[0].begin(), table.triangles(254)[0].end());
    CHECK(a == b);
}

TEST_CASE("sphere extraction: geometry, topology, orientation", "[mc]") {
    TriMesh mesh = marching_cubes(sphere_grid(64), 0.5);
    REQUIRE_FALSE(mesh.empty());
    validate_mesh(mesh);
    check_closed_oriented(mesh);
    CHECK(euler_characteristic(mesh) == 2);

    double mean_radial_err = 0;
    for (const auto& v : mesh.vertices) mean_radial_err += std::abs(norm(v) - 0.5);
    mean_radial_err /= static_cast<double>(mesh.vertices.size());
    CHECK(mean_radial_err < 2.0 / 63.0); // below one cell

    // normals point toward decreasing occupancy (radially out)
    for (const auto& t : mesh.triangles) {
        Vec3 c = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
        CHECK(dot(triangle_normal(mesh, t), c) > 0.0);
    }
}

TEST_CASE("torus extraction has genus-one topology", "[mc]") {
    Shape t = make_torus({0, 0, 0}, 0.5, 0.2);
    FieldGrid grid =
        evaluate_grid(analytic_occupancy_field(t, {20.0}), {{-1, -1, -1}, {1, 1, 1}}, 64, 1);
    TriMesh mesh = marching_cubes(grid, 0.5);
    REQUIRE_FALSE(mesh.empty());
    check_closed_oriented(mesh);
    CHECK(euler_characteristic(mesh) == 0);
}

TEST_CASE("random fields stay crack-free", "[mc]") {
    // Random grids hit every ambiguous configuration; cracks would show up
    // as interior boundary edges.
    Rng rng(31337);
    for (int trial = 0; trial < 20; ++trial) {
        FieldGrid g;
        g.bbox = {{0, 0, 0}, {1, 1, 1}};
        g.nx = g.ny = g.nz = 6;
        g.values.resize(6 * 6 * 6);
        for (auto& v : g.values) v = rng.uniform();
        TriMesh mesh = marching_cubes(g, 0.5);
        if (mesh.empty()) continue;

        std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_count;
        for (const auto& t : mesh.triangles)
            for (int k = 0; k < 3; ++k) {
                auto key = std::minmax(t[k], t[(k + 1) % 3]);
                edge_count[{key.first, key.second}] += 1;
            }
        for (const auto& [key, count] : edge_count) {
            if (count == 2) continue;
            REQUIRE(count == 1);
            // boundary edges may only hug the grid boundary
            const Vec3& a = mesh.vertices[key.first];
            const Vec3& b = mesh.vertices[key.second];
            auto on_boundary = [&](const Vec3& p) {
                double eps = 1e-9;
                return p.x < eps || p.y < eps || p.z < eps || p.x > 1 - eps || p.y > 1 - eps ||
                       p.z > 1 - eps;
            };
            CHECK(on_boundary(a));
            CHECK(on_boundary(b));
        }
    }
}

TEST_CASE("constant field yields an empty flagged mesh", "[mc]") {
    FieldGrid g;
    g.bbox = {{0, 0, 0}, {1, 1, 1}};
    g.nx = g.ny = g.nz = 8;
    g.values.assign(8 * 8 * 8, 0.7);
    TriMesh mesh = marching_cubes(g, 0.5);
    CHECK(mesh.empty());
}

TEST_CASE("symmetric field gives a point-symmetric mesh", "[mc]") {
    // O(-p) = 1 - O(p) holds for a plane field through the origin.
    FieldFn plane = [](const Vec3& p) { return smooth_occupancy(p.z + 0.3 * p.x, 5.0); };
    FieldGrid g = evaluate_grid(plane, {{-1, -1, -1}, {1, 1, 1}}, 33, 1);
    TriMesh mesh = marching_cubes(g, 0.5);
    REQUIRE_FALSE(mesh.empty());
    for (const auto& v : mesh.vertices) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& w : mesh.vertices) best = std::min(best, norm(w + v));
        CHECK(best < 1e-6);
    }
}

TEST_CASE("vertices lie on grid edges", "[mc]") {
    FieldGrid g = sphere_grid(24);
    TriMesh mesh = marching_cubes(g, 0.5);
    Vec3 cell = g.cell_size();
    for (const auto& v : mesh.vertices) {
        int on_lattice = 0;
        for (int ax = 0; ax < 3; ++ax) {
            double t = (v[ax] - g.bbox.lo[ax]) / cell[ax];
            if (std::abs(t - std::round(t)) < 1e-9) ++on_lattice;
        }
        CHECK(on_lattice >= 2); // free only along the crossing axis
    }
}

TEST_CASE("halving the cell size improves the sphere error", "[mc]") {
    auto mean_err = [](int res) {
        TriMesh mesh = marching_cubes(sphere_grid(res), 0.5);
        double acc = 0;
        for (const auto& v : mesh.vertices) acc += std::abs(norm(v) - 0.5);
        return acc / static_cast<double>(mesh.vertices.size());
    };
    double coarse = mean_err(16);
    double fine = mean_err(32);
    CHECK(coarse / fine >= 1.5);
}

TEST_CASE("grid validation", "[mc]") {
    FieldGrid g;
    g.nx = 1;
    g.ny = g.nz = 4;
    g.values.assign(16, 0.0);
    CHECK_THROWS_AS(marching_cubes(g, 0.5), std::invalid_argument);
}
