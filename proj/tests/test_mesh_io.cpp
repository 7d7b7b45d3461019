#include <filesystem>
#include <fstream>

#include <catch2/catch_amalgamated.hpp>

#include "dif/marching_cubes.hpp"
#include "dif/mesh_io.hpp"

using namespace dif;
using Catch::Approx;

namespace {

namespace fs = std::filesystem;

fs::path tmp_dir() {
    fs::path d = fs::temp_directory_path() / "dif_meshio_tests";
    fs::create_directories(d);
    return d;
}

TriMesh sample_mesh() {
    Shape s = make_sphere({0, 0, 0}, 0.5);
    FieldGrid g =
        evaluate_grid(analytic_occupancy_field(s, {20.0}), {{-1, -1, -1}, {1, 1, 1}}, 16, 1);
    return marching_cubes(g, 0.5);
}

double max_vertex_deviation(const TriMesh& a, const TriMesh& b) {
    REQUIRE(a.vertices.size() == b.vertices.size());
    double worst = 0;
    for (std::size_t i = 0; i < a.vertices.size(); ++i)
        worst = std::max(worst, norm(a.vertices[i] - b.vertices[i]));
    return worst;
}

} // namespace

TEST_CASE("obj round trip", "[meshio]") {
    TriMesh m = sample_mesh();
    std::string path = (tmp_dir() / "roundtrip.obj").string();
    write_mesh(m, path);
    TriMesh back = read_mesh(path);
    CHECK(back.triangles.size() == m.triangles.size());
    CHECK(max_vertex_deviation(m, back) < 1e-6);
    for (std::size_t i = 0; i < m.triangles.size(); ++i) CHECK(back.triangles[i] == m.triangles[i]);
}

TEST_CASE("ply round trip", "[meshio]") {
    TriMesh m = sample_mesh();
    std::string path = (tmp_dir() / "roundtrip.ply").string();
    write_mesh(m, path);
    TriMesh back = read_mesh(path);
    CHECK(back.triangles.size() == m.triangles.size());
    CHECK(max_vertex_deviation(m, back) < 1e-6);
    REQUIRE(back.normals.size() == m.normals.size());
    for (std::size_t i = 0; i < m.normals.size(); ++i)
        CHECK(norm(back.normals[i] - m.normals[i]) < 1e-6);
}

TEST_CASE("obj parses 1-based indices into 0-based triangles", "[meshio]") {
    std::string path = (tmp_dir() / "onebased.obj").string();
    {
        std::ofstream out(path);
        out << "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\n";
        out << "f 1 2 3\n";
        out << "f 2/5/9 3/6/10 4/7/11\n"; // texture/normal slots ignored
    }
    TriMesh m = read_obj(path);
    REQUIRE(m.triangles.size() == 2);
    CHECK(m.triangles[0] == Tri{0, 1, 2});
    CHECK(m.triangles[1] == Tri{1, 2, 3});
}

TEST_CASE("obj reports malformed content with line numbers", "[meshio]") {
    std::string path = (tmp_dir() / "bad.obj").string();
    {
        std::ofstream out(path);
        out << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n";
    }
    try {
        read_obj(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
        CHECK(std::string(e.what()).find("out of range") != std::string::npos);
    }
}

TEST_CASE("truncated ply header names the missing element", "[meshio]") {
    std::string path = (tmp_dir() / "trunc.ply").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << "ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty float x\n";
    }
    try {
        read_ply(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("end_header") != std::string::npos);
    }
}

TEST_CASE("ply catches truncated payloads", "[meshio]") {
    TriMesh m = sample_mesh();
    std::string full = (tmp_dir() / "full.ply").string();
    write_ply(m, full);
    std::ifstream in(full, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::string cut = (tmp_dir() / "cut.ply").string();
    {
        std::ofstream out(cut, std::ios::binary);
        out.write(bytes.data(), static_cast<long>(bytes.size() * 2 / 3));
    }
    CHECK_THROWS_AS(read_ply(cut), ParseError);
}

TEST_CASE("unknown extensions are rejected", "[meshio]") {
    TriMesh m = sample_mesh();
    CHECK_THROWS_AS(write_mesh(m, (tmp_dir() / "mesh.stl").string()), std::invalid_argument);
    CHECK_THROWS_AS(read_mesh((tmp_dir() / "mesh.stl").string()), std::invalid_argument);
}

TEST_CASE("missing files surface as errors", "[meshio]") {
    CHECK_THROWS_AS(read_mesh((tmp_dir() / "nope.obj").string()), std::runtime_error);
}
