#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "dif/mesh.hpp"
#include "dif/mesh_queries.hpp"
#include "dif/rng.hpp"
#include "dif/vec3.hpp"

namespace dif {

// All signed distances are positive inside, negative outside.

struct Sphere {
    Vec3 center;
    double radius = 1.0;
};

// Axis-aligned with z; the ring lies in the plane z = center.z.
struct Torus {
    Vec3 center;
    double major_r = 1.0;
    double minor_r = 0.25;
};

struct BoxShape {
    Vec3 center;
    Vec3 half_extents{1, 1, 1};
};

struct Capsule {
    Vec3 a, b;
    double radius = 0.5;
};

// Gaussian radial bump on a base sphere, angular profile
// amplitude * exp(-angle^2 / (2 width^2)).
struct GaussianBump {
    Vec3 direction{0, 0, 1}; // unit
    double amplitude = 0.1;
    double width = 0.5; // radians
};

struct BumpSphere {
    Sphere base;
    std::vector<GaussianBump> bumps;
};

struct Shape;

struct UnionShape {
    std::vector<Shape> members;
};

struct MeshShape {
    std::shared_ptr<const TriMesh> mesh;
    std::shared_ptr<const MeshDistanceIndex> index;
    std::shared_ptr<const MeshAreaTable> areas;
};

using ShapeVariant = std::variant<Sphere, Torus, BoxShape, Capsule, BumpSphere, UnionShape, MeshShape>;

struct Shape {
    ShapeVariant v;

    Shape() : v(Sphere{}) {}
    Shape(ShapeVariant sv) : v(std::move(sv)) {}
};

inline Shape make_sphere(const Vec3& c, double r) { return Shape{Sphere{c, r}}; }
inline Shape make_torus(const Vec3& c, double R, double r) { return Shape{Torus{c, R, r}}; }
inline Shape make_box(const Vec3& c, const Vec3& he) { return Shape{BoxShape{c, he}}; }
inline Shape make_capsule(const Vec3& a, const Vec3& b, double r) { return Shape{Capsule{a, b, r}}; }
inline Shape make_bump_sphere(const Vec3& c, double r, std::vector<GaussianBump> bumps) {
    for (auto& bp : bumps) bp.direction = normalized(bp.direction);
    return Shape{BumpSphere{Sphere{c, r}, std::move(bumps)}};
}
inline Shape make_union(std::vector<Shape> members) { return Shape{UnionShape{std::move(members)}}; }

inline Shape make_mesh_shape(TriMesh mesh) {
    if (mesh.normals.empty()) compute_vertex_normals(mesh);
    auto m = std::make_shared<const TriMesh>(std::move(mesh));
    auto idx = std::make_shared<const MeshDistanceIndex>(*m);
    auto areas = std::make_shared<const MeshAreaTable>(*m);
    return Shape{MeshShape{m, idx, areas}};
}

void validate_shape(const Shape& s);

inline void validate_shape_impl(const Sphere& s) {
    if (!(s.radius > 0)) throw std::invalid_argument("sphere: radius must be > 0");
}
inline void validate_shape_impl(const Torus& t) {
    if (!(t.major_r > 0) || !(t.minor_r > 0))
        throw std::invalid_argument("torus: radii must be > 0");
}
inline void validate_shape_impl(const BoxShape& b) {
    if (!(b.half_extents.x > 0 && b.half_extents.y > 0 && b.half_extents.z > 0))
        throw std::invalid_argument("box: half extents must be > 0");
}
inline void validate_shape_impl(const Capsule& c) {
    if (!(c.radius > 0)) throw std::invalid_argument("capsule: radius must be > 0");
}
inline void validate_shape_impl(const BumpSphere& b) {
    validate_shape_impl(b.base);
    for (const auto& bp : b.bumps) {
        if (!(bp.amplitude > 0)) throw std::invalid_argument("bump_sphere: amplitude must be > 0");
        if (!(bp.amplitude < b.base.radius))
            throw std::invalid_argument("bump_sphere: amplitude must be < base radius");
        if (!(bp.width > 0)) throw std::invalid_argument("bump_sphere: width must be > 0");
        if (std::abs(norm(bp.direction) - 1.0) > 1e-6)
            throw std::invalid_argument("bump_sphere: direction must be unit length");
    }
}
inline void validate_shape_impl(const UnionShape& u) {
    if (u.members.empty()) throw std::invalid_argument("union: must have at least one member");
    for (const auto& m : u.members) validate_shape(m);
}
inline void validate_shape_impl(const MeshShape& m) {
    if (!m.mesh || m.mesh->empty()) throw std::invalid_argument("mesh shape: empty mesh");
    validate_mesh(*m.mesh);
}

inline void validate_shape(const Shape& s) {
    std::visit([](const auto& sh) { validate_shape_impl(sh); }, s.v);
}

namespace detail {

// Radial profile of a bump sphere along unit direction u.
inline double bump_radius(const BumpSphere& bs, const Vec3& u) {
    double r = bs.base.radius;
    for (const auto& b : bs.bumps) {
        double c = std::clamp(dot(u, b.direction), -1.0, 1.0);
        double phi = std::acos(c);
        r += b.amplitude * std::exp(-phi * phi / (2.0 * b.width * b.width));
    }
    return r;
}

// d(bump_radius)/du before tangential projection.
inline Vec3 bump_radius_grad_u(const BumpSphere& bs, const Vec3& u) {
    Vec3 g{0, 0, 0};
    for (const auto& b : bs.bumps) {
        double c = std::clamp(dot(u, b.direction), -1.0, 1.0);
        double phi = std::acos(c);
        double s = std::sqrt(std::max(1.0 - c * c, 0.0));
        double phi_over_s = s < 1e-8 ? 1.0 + phi * phi / 6.0 : phi / s;
        double e = std::exp(-phi * phi / (2.0 * b.width * b.width));
        g += b.direction * (b.amplitude * e * phi_over_s / (b.width * b.width));
    }
    return g;
}

inline double segment_param(const Vec3& p, const Vec3& a, const Vec3& b) {
    Vec3 ab = b - a;
    double len2 = norm2(ab);
    if (len2 <= 0) return 0.0;
    return std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
}

} // namespace detail

// ---------------------------------------------------------------------------
// sdf_eval

double sdf_eval(const Shape& s, const Vec3& p);

inline double sdf_eval_impl(const Sphere& s, const Vec3& p) { return s.radius - norm(p - s.center); }

inline double sdf_eval_impl(const Torus& t, const Vec3& p) {
    Vec3 l = p - t.center;
    double ring = std::sqrt(l.x * l.x + l.y * l.y) - t.major_r;
    return t.minor_r - std::sqrt(ring * ring + l.z * l.z);
}

inline double sdf_eval_impl(const BoxShape& b, const Vec3& p) {
    Vec3 l = p - b.center;
    Vec3 q{std::abs(l.x) - b.half_extents.x, std::abs(l.y) - b.half_extents.y,
           std::abs(l.z) - b.half_extents.z};
    Vec3 qpos{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
    double outside = norm(qpos);
    double inside = std::min(std::max({q.x, q.y, q.z}), 0.0);
    return -(outside + inside);
}

inline double sdf_eval_impl(const Capsule& c, const Vec3& p) {
    double t = detail::segment_param(p, c.a, c.b);
    return c.radius - norm(p - (c.a + (c.b - c.a) * t));
}

// Radial implicit r(u) - |p - c|: exact zero set and sign; a distance
// surrogate elsewhere (gradient magnitude sqrt(1 + |grad_S r|^2 / rho^2)).
inline double sdf_eval_impl(const BumpSphere& bs, const Vec3& p) {
    Vec3 l = p - bs.base.center;
    double rho = norm(l);
    if (rho < 1e-12) return detail::bump_radius(bs, Vec3{0, 0, 1});
    return detail::bump_radius(bs, l / rho) - rho;
}

inline double sdf_eval_impl(const UnionShape& u, const Vec3& p) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& m : u.members) best = std::max(best, sdf_eval(m, p));
    return best;
}

inline double sdf_eval_impl(const MeshShape& m, const Vec3& p) {
    return m.index->signed_distance(p);
}

inline double sdf_eval(const Shape& s, const Vec3& p) {
    return std::visit([&](const auto& sh) { return sdf_eval_impl(sh, p); }, s.v);
}

// Central-difference gradient of the signed distance, h in scene units.
inline Vec3 fd_sdf_gradient(const Shape& s, const Vec3& p, double h = 1e-4) {
    Vec3 g;
    for (int ax = 0; ax < 3; ++ax) {
        Vec3 dp{0, 0, 0};
        dp[ax] = h;
        g[ax] = (sdf_eval(s, p + dp) - sdf_eval(s, p - dp)) / (2.0 * h);
    }
    return g;
}

// ---------------------------------------------------------------------------
// surface_normal: outward unit normal, i.e. the normalized negative gradient
// of the positive-inside field. nullopt at degenerate (zero-gradient) points;
// callers substitute a fixed axis.

std::optional<Vec3> surface_normal(const Shape& s, const Vec3& p);

inline std::optional<Vec3> surface_normal_impl(const Sphere& s, const Vec3& p) {
    Vec3 d = p - s.center;
    double n = norm(d);
    if (n < 1e-12) return std::nullopt;
    return d / n;
}

inline std::optional<Vec3> surface_normal_impl(const Torus& t, const Vec3& p) {
    Vec3 l = p - t.center;
    double q2 = std::sqrt(l.x * l.x + l.y * l.y);
    double cx = q2 < 1e-12 ? 1.0 : l.x / q2;
    double cy = q2 < 1e-12 ? 0.0 : l.y / q2;
    double ring = q2 - t.major_r;
    double d = std::sqrt(ring * ring + l.z * l.z);
    if (d < 1e-12) return std::nullopt; // on the core circle
    return Vec3{ring / d * cx, ring / d * cy, l.z / d};
}

inline std::optional<Vec3> surface_normal_impl(const BoxShape& b, const Vec3& p) {
    Vec3 l = p - b.center;
    Vec3 q{std::abs(l.x) - b.half_extents.x, std::abs(l.y) - b.half_extents.y,
           std::abs(l.z) - b.half_extents.z};
    auto sgn = [](double x) { return x < 0 ? -1.0 : 1.0; };
    if (q.x > 0 || q.y > 0 || q.z > 0) {
        Vec3 g{std::max(q.x, 0.0) * sgn(l.x), std::max(q.y, 0.0) * sgn(l.y),
               std::max(q.z, 0.0) * sgn(l.z)};
        return normalized(g);
    }
    // Inside: nearest face.
    int ax = 0;
    if (q.y > q[ax]) ax = 1;
    if (q.z > q[ax]) ax = 2;
    if (std::abs(l[ax]) < 1e-12) return std::nullopt;
    Vec3 n{0, 0, 0};
    n[ax] = sgn(l[ax]);
    return n;
}

inline std::optional<Vec3> surface_normal_impl(const Capsule& c, const Vec3& p) {
    double t = detail::segment_param(p, c.a, c.b);
    Vec3 d = p - (c.a + (c.b - c.a) * t);
    double n = norm(d);
    if (n < 1e-12) return std::nullopt;
    return d / n;
}

inline std::optional<Vec3> surface_normal_impl(const BumpSphere& bs, const Vec3& p) {
    Vec3 l = p - bs.base.center;
    double rho = norm(l);
    if (rho < 1e-12) return std::nullopt;
    Vec3 u = l / rho;
    Vec3 gu = detail::bump_radius_grad_u(bs, u);
    Vec3 tangential = (gu - u * dot(u, gu)) / rho; // (I - uu^T) gu / rho
    // grad f = tangential - u; outward normal = -grad f normalized.
    return normalized(u - tangential);
}

inline std::optional<Vec3> surface_normal_impl(const UnionShape& u, const Vec3& p) {
    double best = -std::numeric_limits<double>::infinity();
    const Shape* arg = nullptr;
    for (const auto& m : u.members) {
        double s = sdf_eval(m, p);
        if (s > best) {
            best = s;
            arg = &m;
        }
    }
    return arg ? surface_normal(*arg, p) : std::nullopt;
}

inline std::optional<Vec3> surface_normal_impl(const MeshShape& m, const Vec3& p) {
    ClosestHit hit = m.index->closest(p);
    Vec3 pn = m.index->pseudo_normal(hit);
    if (hit.dist < 1e-9) return pn;
    Vec3 dir = (p - hit.point) / hit.dist;
    return dot(dir, pn) > 0 ? dir : -dir;
}

inline std::optional<Vec3> surface_normal(const Shape& s, const Vec3& p) {
    return std::visit([&](const auto& sh) { return surface_normal_impl(sh, p); }, s.v);
}

// ---------------------------------------------------------------------------
// nearest_surface_point

struct ProjectionResult {
    Vec3 point;
    double residual = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Gradient projection q <- q + sdf(q) * outward_normal(q) until |sdf| < 1e-6
// or 50 iterations.
inline ProjectionResult nearest_surface_point(const Shape& s, const Vec3& p) {
    constexpr double tol = 1e-6;
    constexpr int max_iter = 50;
    Vec3 q = p;
    double f = sdf_eval(s, q);
    int it = 0;
    while (std::abs(f) >= tol && it < max_iter) {
        Vec3 n = surface_normal(s, q).value_or(Vec3{1, 0, 0});
        q += n * f;
        f = sdf_eval(s, q);
        ++it;
    }
    return {q, std::abs(f), std::abs(f) < tol, it};
}

// ---------------------------------------------------------------------------
// Surface sampling (parametric where possible, rejection otherwise)

Vec3 sample_surface_point(const Shape& s, Rng& rng);
double approx_surface_area(const Shape& s);

inline double approx_surface_area_impl(const Sphere& s) { return 4.0 * M_PI * s.radius * s.radius; }
inline double approx_surface_area_impl(const Torus& t) {
    return 4.0 * M_PI * M_PI * t.major_r * t.minor_r;
}
inline double approx_surface_area_impl(const BoxShape& b) {
    const Vec3& h = b.half_extents;
    return 8.0 * (h.x * h.y + h.y * h.z + h.x * h.z);
}
inline double approx_surface_area_impl(const Capsule& c) {
    double L = norm(c.b - c.a);
    return 2.0 * M_PI * c.radius * L + 4.0 * M_PI * c.radius * c.radius;
}
inline double approx_surface_area_impl(const BumpSphere& b) {
    return approx_surface_area_impl(b.base);
}
inline double approx_surface_area_impl(const UnionShape& u) {
    double a = 0;
    for (const auto& m : u.members) a += approx_surface_area(m);
    return a;
}
inline double approx_surface_area_impl(const MeshShape& m) { return m.areas->total; }

inline double approx_surface_area(const Shape& s) {
    return std::visit([](const auto& sh) { return approx_surface_area_impl(sh); }, s.v);
}

namespace detail {

inline Vec3 sample_surface_impl(const Sphere& s, Rng& rng) {
    return s.center + rng.unit_vec() * s.radius;
}

inline Vec3 sample_surface_impl(const Torus& t, Rng& rng) {
    // Tube angle rejection keeps the density area-uniform.
    double theta;
    for (;;) {
        theta = rng.uniform(0.0, 2.0 * M_PI);
        double accept = (t.major_r + t.minor_r * std::cos(theta)) / (t.major_r + t.minor_r);
        if (rng.uniform() < accept) break;
    }
    double psi = rng.uniform(0.0, 2.0 * M_PI);
    double ring = t.major_r + t.minor_r * std::cos(theta);
    return t.center + Vec3{ring * std::cos(psi), ring * std::sin(psi), t.minor_r * std::sin(theta)};
}

inline Vec3 sample_surface_impl(const BoxShape& b, Rng& rng) {
    const Vec3& h = b.half_extents;
    double areas[3] = {h.y * h.z, h.x * h.z, h.x * h.y}; // per axis-pair, x faces first
    double total = areas[0] + areas[1] + areas[2];
    double pick = rng.uniform() * total;
    int ax = pick < areas[0] ? 0 : (pick < areas[0] + areas[1] ? 1 : 2);
    double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
    Vec3 p;
    p[ax] = side * h[ax];
    int a1 = (ax + 1) % 3, a2 = (ax + 2) % 3;
    p[a1] = rng.uniform(-h[a1], h[a1]);
    p[a2] = rng.uniform(-h[a2], h[a2]);
    return b.center + p;
}

inline Vec3 sample_surface_impl(const Capsule& c, Rng& rng) {
    double L = norm(c.b - c.a);
    double cyl_area = 2.0 * M_PI * c.radius * L;
    double cap_area = 4.0 * M_PI * c.radius * c.radius;
    Vec3 axis = L > 0 ? (c.b - c.a) / L : Vec3{0, 0, 1};
    if (rng.uniform() * (cyl_area + cap_area) < cyl_area) {
        Vec3 ref = std::abs(axis.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
        Vec3 e1 = normalized(cross(axis, ref));
        Vec3 e2 = cross(axis, e1);
        double phi = rng.uniform(0.0, 2.0 * M_PI);
        Vec3 radial = e1 * std::cos(phi) + e2 * std::sin(phi);
        return c.a + axis * (rng.uniform() * L) + radial * c.radius;
    }
    Vec3 u = rng.unit_vec();
    if (dot(u, axis) >= 0) return c.b + u * c.radius;
    return c.a + u * c.radius;
}

inline Vec3 sample_surface_impl(const BumpSphere& bs, Rng& rng) {
    Vec3 u = rng.unit_vec();
    return bs.base.center + u * bump_radius(bs, u);
}

Vec3 sample_surface_union(const UnionShape& u, Rng& rng);

inline Vec3 sample_surface_impl(const UnionShape& u, Rng& rng) {
    return sample_surface_union(u, rng);
}

inline Vec3 sample_surface_impl(const MeshShape& m, Rng& rng) {
    return sample_mesh_surface(*m.mesh, *m.areas, rng).point;
}

} // namespace detail

inline Vec3 sample_surface_point(const Shape& s, Rng& rng) {
    return std::visit([&](const auto& sh) { return detail::sample_surface_impl(sh, rng); }, s.v);
}

namespace detail {

inline Vec3 sample_surface_union(const UnionShape& u, Rng& rng) {
    std::vector<double> cdf;
    cdf.reserve(u.members.size());
    double total = 0;
    for (const auto& m : u.members) {
        total += approx_surface_area(m);
        cdf.push_back(total);
    }
    for (int attempt = 0; attempt < 10000; ++attempt) {
        double pick = rng.uniform() * total;
        std::size_t i = std::lower_bound(cdf.begin(), cdf.end(), pick) - cdf.begin();
        i = std::min(i, u.members.size() - 1);
        Vec3 p = sample_surface_point(u.members[i], rng);
        // Keep only points on the union boundary (not swallowed by others).
        if (sdf_eval_impl(u, p) < 1e-7) return p;
    }
    throw std::runtime_error("union surface sampling failed: member surfaces fully enclosed?");
}

} // namespace detail

} // namespace dif
