#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "dif/errors.hpp"
#include "dif/mesh.hpp"

namespace dif {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

// ---------------------------------------------------------------------------
// OBJ (ASCII v/vn/f records, 1-based indices)

inline void write_obj(const TriMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write mesh: " + path);
    out.precision(9);
    for (const auto& v : mesh.vertices) out << "v " << v.x << " " << v.y << " " << v.z << "\n";
    for (const auto& n : mesh.normals) out << "vn " << n.x << " " << n.y << " " << n.z << "\n";
    const bool with_normals = mesh.normals.size() == mesh.vertices.size();
    for (const auto& t : mesh.triangles) {
        out << "f";
        for (int k = 0; k < 3; ++k) {
            std::uint32_t i = t[k] + 1;
            if (with_normals)
                out << " " << i << "//" << i;
            else
                out << " " << i;
        }
        out << "\n";
    }
}

inline TriMesh read_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read mesh: " + path);
    TriMesh mesh;
    std::vector<Vec3> file_normals;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag.empty() || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ss >> v.x >> v.y >> v.z)) throw ParseError("obj: malformed vertex", lineno);
            mesh.vertices.push_back(v);
        } else if (tag == "vn") {
            Vec3 n;
            if (!(ss >> n.x >> n.y >> n.z)) throw ParseError("obj: malformed normal", lineno);
            file_normals.push_back(n);
        } else if (tag == "f") {
            std::vector<std::uint32_t> poly;
            std::string corner;
            while (ss >> corner) {
                // forms: i | i/t | i//n | i/t/n
                std::size_t slash = corner.find('/');
                std::string head = slash == std::string::npos ? corner : corner.substr(0, slash);
                long idx = 0;
                try {
                    idx = std::stol(head);
                } catch (...) {
                    throw ParseError("obj: malformed face corner '" + corner + "'", lineno);
                }
                if (idx < 1 || static_cast<std::size_t>(idx) > mesh.vertices.size())
                    throw ParseError("obj: face index out of range", lineno);
                poly.push_back(static_cast<std::uint32_t>(idx - 1));
            }
            if (poly.size() < 3) throw ParseError("obj: face with fewer than 3 corners", lineno);
            for (std::size_t k = 1; k + 1 < poly.size(); ++k)
                mesh.triangles.push_back({poly[0], poly[k], poly[k + 1]});
        }
        // other records (vt, o, g, s, mtllib, usemtl) ignored
    }
    if (file_normals.size() == mesh.vertices.size())
        mesh.normals = std::move(file_normals);
    else if (!mesh.triangles.empty())
        compute_vertex_normals(mesh);
    return mesh;
}

// ---------------------------------------------------------------------------
// PLY (binary little-endian 1.0, float32 positions/normals, int32 indices)

inline void write_ply(const TriMesh& mesh, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write mesh: " + path);
    const bool with_normals = mesh.normals.size() == mesh.vertices.size();
    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    if (with_normals) out << "property float nx\nproperty float ny\nproperty float nz\n";
    out << "element face " << mesh.triangles.size() << "\n";
    out << "property list uchar int vertex_indices\n";
    out << "end_header\n";
    auto put_f = [&](double v) {
        float f = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    };
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        put_f(mesh.vertices[i].x);
        put_f(mesh.vertices[i].y);
        put_f(mesh.vertices[i].z);
        if (with_normals) {
            put_f(mesh.normals[i].x);
            put_f(mesh.normals[i].y);
            put_f(mesh.normals[i].z);
        }
    }
    for (const auto& t : mesh.triangles) {
        unsigned char n = 3;
        out.write(reinterpret_cast<const char*>(&n), 1);
        for (int k = 0; k < 3; ++k) {
            std::int32_t idx = static_cast<std::int32_t>(t[k]);
            out.write(reinterpret_cast<const char*>(&idx), sizeof(idx));
        }
    }
}

inline TriMesh read_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read mesh: " + path);

    std::string line;
    if (!std::getline(in, line) || line.substr(0, 3) != "ply")
        throw ParseError("ply: missing 'ply' magic", 1);

    std::size_t n_vertices = 0, n_faces = 0;
    std::vector<std::string> vertex_props;
    bool header_done = false, saw_format = false;
    std::string current_element;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "comment") continue;
        if (tag == "format") {
            std::string fmt, ver;
            ss >> fmt >> ver;
            if (fmt != "binary_little_endian")
                throw ParseError("ply: unsupported format '" + fmt + "'", lineno);
            saw_format = true;
        } else if (tag == "element") {
            std::string name;
            std::size_t count = 0;
            if (!(ss >> name >> count)) throw ParseError("ply: malformed element", lineno);
            current_element = name;
            if (name == "vertex") n_vertices = count;
            else if (name == "face") n_faces = count;
            else throw ParseError("ply: unsupported element '" + name + "'", lineno);
        } else if (tag == "property") {
            if (current_element == "vertex") {
                std::string type, name;
                if (!(ss >> type >> name)) throw ParseError("ply: malformed property", lineno);
                if (type != "float" && type != "float32")
                    throw ParseError("ply: unsupported vertex property type '" + type + "'", lineno);
                vertex_props.push_back(name);
            } else if (current_element == "face") {
                std::string list, ctype, itype, name;
                if (!(ss >> list >> ctype >> itype >> name) || list != "list")
                    throw ParseError("ply: malformed face property", lineno);
                if ((ctype != "uchar" && ctype != "uint8") || (itype != "int" && itype != "int32"))
                    throw ParseError("ply: unsupported face list types", lineno);
            } else {
                throw ParseError("ply: property before element", lineno);
            }
        } else if (tag == "end_header") {
            header_done = true;
            break;
        } else if (tag.empty()) {
            continue;
        } else {
            throw ParseError("ply: unexpected header token '" + tag + "'", lineno);
        }
    }
    if (!header_done) throw ParseError("ply: truncated header, missing end_header");
    if (!saw_format) throw ParseError("ply: truncated header, missing format");

    int xi = -1, yi = -1, zi = -1, nxi = -1, nyi = -1, nzi = -1;
    for (std::size_t i = 0; i < vertex_props.size(); ++i) {
        const std::string& p = vertex_props[i];
        if (p == "x") xi = static_cast<int>(i);
        else if (p == "y") yi = static_cast<int>(i);
        else if (p == "z") zi = static_cast<int>(i);
        else if (p == "nx") nxi = static_cast<int>(i);
        else if (p == "ny") nyi = static_cast<int>(i);
        else if (p == "nz") nzi = static_cast<int>(i);
    }
    if (xi < 0 || yi < 0 || zi < 0) throw ParseError("ply: missing x/y/z vertex properties");
    const bool with_normals = nxi >= 0 && nyi >= 0 && nzi >= 0;

    TriMesh mesh;
    mesh.vertices.resize(n_vertices);
    if (with_normals) mesh.normals.resize(n_vertices);
    std::vector<float> row(vertex_props.size());
    for (std::size_t i = 0; i < n_vertices; ++i) {
        in.read(reinterpret_cast<char*>(row.data()), row.size() * sizeof(float));
        if (!in) throw ParseError("ply: unexpected end of file in vertex data");
        mesh.vertices[i] = {row[xi], row[yi], row[zi]};
        if (with_normals) mesh.normals[i] = {row[nxi], row[nyi], row[nzi]};
    }
    for (std::size_t f = 0; f < n_faces; ++f) {
        unsigned char count = 0;
        in.read(reinterpret_cast<char*>(&count), 1);
        if (!in) throw ParseError("ply: unexpected end of file in face data");
        std::vector<std::int32_t> idx(count);
        in.read(reinterpret_cast<char*>(idx.data()), count * sizeof(std::int32_t));
        if (!in) throw ParseError("ply: unexpected end of file in face data");
        for (auto v : idx)
            if (v < 0 || static_cast<std::size_t>(v) >= n_vertices)
                throw ParseError("ply: face index out of range");
        for (int k = 1; k + 1 < count; ++k)
            mesh.triangles.push_back({static_cast<std::uint32_t>(idx[0]),
                                      static_cast<std::uint32_t>(idx[k]),
                                      static_cast<std::uint32_t>(idx[k + 1])});
    }
    if (!with_normals && !mesh.triangles.empty()) compute_vertex_normals(mesh);
    return mesh;
}

// ---------------------------------------------------------------------------
// Extension dispatch

inline bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

inline void write_mesh(const TriMesh& mesh, const std::string& path) {
    if (has_suffix(path, ".obj")) write_obj(mesh, path);
    else if (has_suffix(path, ".ply")) write_ply(mesh, path);
    else throw std::invalid_argument("write_mesh: unknown extension (want .obj or .ply): " + path);
}

inline TriMesh read_mesh(const std::string& path) {
    if (has_suffix(path, ".obj")) return read_obj(path);
    if (has_suffix(path, ".ply")) return read_ply(path);
    throw std::invalid_argument("read_mesh: unknown extension (want .obj or .ply): " + path);
}

} // namespace dif
