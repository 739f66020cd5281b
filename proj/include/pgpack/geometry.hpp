#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace pgpack {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator-() const { return {-x, -y}; }
    bool operator==(const Vec2&) const = default;
};

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }

// Reduce an angle into [0, period).
inline double wrap_angle(double angle, double period = kTwoPi) {
    double r = std::fmod(angle, period);
    if (r < 0.0) r += period;
    if (r >= period) r -= period;
    return r;
}

// Row-major 2x2 matrix.
struct Mat2 {
    double m00 = 1.0, m01 = 0.0, m10 = 0.0, m11 = 1.0;

    Vec2 operator*(const Vec2& v) const { return {m00 * v.x + m01 * v.y, m10 * v.x + m11 * v.y}; }
    Mat2 operator*(const Mat2& o) const {
        return {m00 * o.m00 + m01 * o.m10, m00 * o.m01 + m01 * o.m11,
                m10 * o.m00 + m11 * o.m10, m10 * o.m01 + m11 * o.m11};
    }
    double det() const { return m00 * m11 - m01 * m10; }
    Mat2 inverse() const {
        const double d = det();
        return {m11 / d, -m01 / d, -m10 / d, m00 / d};
    }
    Mat2 transpose() const { return {m00, m10, m01, m11}; }

    static Mat2 rotation(double angle) {
        const double c = std::cos(angle), s = std::sin(angle);
        return {c, -s, s, c};
    }
    // Reflection across the line through the origin at angle `line_angle`.
    static Mat2 reflection(double line_angle) {
        const double c = std::cos(2.0 * line_angle), s = std::sin(2.0 * line_angle);
        return {c, s, s, -c};
    }
};

enum class ShapeKind { polygon, disc };

// A regular n-gon or a disc. For a disc `n` is 0 and `rotation` is unused.
struct Shape {
    ShapeKind kind = ShapeKind::polygon;
    int n = 0;
    double circumradius = 1.0;
    Vec2 center{};
    double rotation = 0.0;

    bool is_disc() const { return kind == ShapeKind::disc; }
    // Rotational period of the shape; rotations are stored modulo this value.
    double rotation_period() const { return is_disc() ? kTwoPi : kTwoPi / n; }
};

inline Shape make_regular_ngon(int n, double circumradius, Vec2 center = {}, double rotation = 0.0) {
    if (n < 3) throw std::invalid_argument("regular polygon needs at least 3 vertices");
    if (!(circumradius > 0.0)) throw std::invalid_argument("circumradius must be positive");
    Shape s;
    s.kind = ShapeKind::polygon;
    s.n = n;
    s.circumradius = circumradius;
    s.center = center;
    s.rotation = wrap_angle(rotation, kTwoPi / n);
    // Values within rounding of the period collapse to zero (e.g. pi/3 for a hexagon).
    if (kTwoPi / n - s.rotation < 1e-12) s.rotation = 0.0;
    return s;
}

inline Shape make_disc(double radius, Vec2 center = {}) {
    if (!(radius > 0.0)) throw std::invalid_argument("disc radius must be positive");
    Shape s;
    s.kind = ShapeKind::disc;
    s.n = 0;
    s.circumradius = radius;
    s.center = center;
    return s;
}

inline double area(const Shape& s) {
    const double r = s.circumradius;
    if (s.is_disc()) return kPi * r * r;
    return 0.5 * s.n * r * r * std::sin(kTwoPi / s.n);
}

// Largest distance between two points of the shape.
inline double diameter(const Shape& s) {
    if (s.is_disc() || s.n % 2 == 0) return 2.0 * s.circumradius;
    return 2.0 * s.circumradius * std::cos(kPi / (2.0 * s.n));
}

// Smallest width over all directions; equals the shortest admissible lattice translation.
inline double min_width(const Shape& s) {
    if (s.is_disc()) return 2.0 * s.circumradius;
    const double apothem = s.circumradius * std::cos(kPi / s.n);
    if (s.n % 2 == 0) return 2.0 * apothem;
    return s.circumradius + apothem;
}

inline std::vector<Vec2> vertices(const Shape& s) {
    std::vector<Vec2> out;
    if (s.is_disc()) return out;
    out.reserve(s.n);
    for (int k = 0; k < s.n; ++k) {
        const double t = s.rotation + kTwoPi * k / s.n;
        out.push_back({s.center.x + s.circumradius * std::cos(t), s.center.y + s.circumradius * std::sin(t)});
    }
    return out;
}

// Approximates a disc by a regular polygon with the same circumradius (cross-check mode).
inline Shape polygonize(const Shape& s, int n = 360) {
    if (!s.is_disc()) return s;
    return make_regular_ngon(n, s.circumradius, s.center, 0.0);
}

struct Isometry {
    Mat2 linear{};
    Vec2 translation{};

    Vec2 operator()(const Vec2& p) const { return linear * p + translation; }
    static Isometry translate(Vec2 t) { return {Mat2{}, t}; }
    static Isometry rotate_about(Vec2 pivot, double angle) {
        const Mat2 r = Mat2::rotation(angle);
        return {r, pivot - r * pivot};
    }
};

// Maps a shape through an isometry. Reflections keep the image regular: a regular
// polygon with vertex angles {phi_k} is sent to one with angles {2*beta - phi_k}.
inline Shape apply_isometry(const Shape& s, const Isometry& g) {
    Shape out = s;
    out.center = g(s.center);
    if (s.is_disc()) return out;
    const Mat2& L = g.linear;
    const double turn = std::atan2(L.m10, L.m00);
    const double rot = L.det() > 0.0 ? s.rotation + turn : turn - s.rotation;
    out.rotation = wrap_angle(rot, s.rotation_period());
    if (s.rotation_period() - out.rotation < 1e-12) out.rotation = 0.0;
    return out;
}

// Convex body with cached vertices and unit edge normals; the evaluation kernel
// for penetration queries. Translation is applied at query time.
struct ConvexBody {
    ShapeKind kind = ShapeKind::polygon;
    Vec2 center{};
    double radius = 0.0;  // circumradius or disc radius
    std::vector<Vec2> verts;
    std::vector<Vec2> normals;

    explicit ConvexBody(const Shape& s) : kind(s.kind), center(s.center), radius(s.circumradius) {
        if (s.is_disc()) return;
        verts = vertices(s);
        const int n = s.n;
        // Opposite edges of even polygons share an axis.
        const int axes = n % 2 == 0 ? n / 2 : n;
        normals.reserve(axes);
        for (int k = 0; k < axes; ++k) {
            const double t = s.rotation + kPi / n + kTwoPi * k / n;
            normals.push_back({std::cos(t), std::sin(t)});
        }
    }
    bool is_disc() const { return kind == ShapeKind::disc; }
};

namespace detail {

inline void project(const ConvexBody& b, Vec2 offset, Vec2 axis, double& lo, double& hi) {
    if (b.is_disc()) {
        const double c = dot(b.center + offset, axis);
        lo = c - b.radius;
        hi = c + b.radius;
        return;
    }
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    const double shift = dot(offset, axis);
    for (const Vec2& v : b.verts) {
        const double p = dot(v, axis);
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    lo += shift;
    hi += shift;
}

// Overlap of the two projections on `axis`; <= 0 means a separating axis.
inline double axis_overlap(const ConvexBody& a, const ConvexBody& b, Vec2 b_offset, Vec2 axis) {
    double alo, ahi, blo, bhi;
    project(a, {}, axis, alo, ahi);
    project(b, b_offset, axis, blo, bhi);
    return std::min(ahi - blo, bhi - alo);
}

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return norm(p - (a + ab * t));
}

inline double point_polygon_boundary_distance(Vec2 p, const std::vector<Vec2>& verts, Vec2 offset) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = verts.size();
    for (std::size_t k = 0; k < n; ++k) {
        best = std::min(best, point_segment_distance(p, verts[k] + offset, verts[(k + 1) % n] + offset));
    }
    return best;
}

inline bool inside_convex(Vec2 p, const std::vector<Vec2>& verts, Vec2 offset) {
    const std::size_t n = verts.size();
    for (std::size_t k = 0; k < n; ++k) {
        if (cross(verts[(k + 1) % n] - verts[k], p - (verts[k] + offset)) < 0.0) return false;
    }
    return true;
}

}  // namespace detail

// Minimum translation distance separating `a` from `b + b_offset`; 0 when the
// interiors are disjoint.
inline double penetration_depth(const ConvexBody& a, const ConvexBody& b, Vec2 b_offset = {}) {
    const Vec2 d = (b.center + b_offset) - a.center;
    const double reach = a.radius + b.radius;
    const double dist2 = dot(d, d);
    if (dist2 >= reach * reach) return 0.0;

    if (a.is_disc() && b.is_disc()) return std::max(0.0, reach - std::sqrt(dist2));

    double depth = std::numeric_limits<double>::infinity();
    auto test_axes = [&](const std::vector<Vec2>& axes) {
        for (const Vec2& axis : axes) {
            const double o = detail::axis_overlap(a, b, b_offset, axis);
            if (o <= 0.0) return false;
            depth = std::min(depth, o);
        }
        return true;
    };
    if (!test_axes(a.normals) || !test_axes(b.normals)) return 0.0;

    // Disc against polygon also needs the axis through the polygon vertex nearest the disc center.
    if (a.is_disc() != b.is_disc()) {
        const ConvexBody& poly = a.is_disc() ? b : a;
        const Vec2 poly_shift = a.is_disc() ? b_offset : Vec2{};
        const Vec2 disc_center = a.is_disc() ? a.center : b.center + b_offset;
        Vec2 nearest{};
        double best = std::numeric_limits<double>::infinity();
        for (const Vec2& v : poly.verts) {
            const Vec2 w = v + poly_shift;
            const double dd = dot(w - disc_center, w - disc_center);
            if (dd < best) {
                best = dd;
                nearest = w;
            }
        }
        if (best > 0.0) {
            const Vec2 axis = (disc_center - nearest) * (1.0 / std::sqrt(best));
            const double o = detail::axis_overlap(a, b, b_offset, axis);
            if (o <= 0.0) return 0.0;
            depth = std::min(depth, o);
        }
    }
    return depth;
}

inline double penetration_depth(const Shape& a, const Shape& b) {
    return penetration_depth(ConvexBody(a), ConvexBody(b));
}

// Euclidean distance between the boundaries of two shapes with disjoint interiors;
// 0 when they touch or overlap.
inline double separation(const ConvexBody& a, const ConvexBody& b, Vec2 b_offset = {}) {
    if (penetration_depth(a, b, b_offset) > 0.0) return 0.0;
    const Vec2 bc = b.center + b_offset;
    if (a.is_disc() && b.is_disc()) return std::max(0.0, norm(bc - a.center) - a.radius - b.radius);
    if (a.is_disc() || b.is_disc()) {
        const ConvexBody& poly = a.is_disc() ? b : a;
        const Vec2 poly_shift = a.is_disc() ? b_offset : Vec2{};
        const Vec2 disc_center = a.is_disc() ? a.center : bc;
        const double r = a.is_disc() ? a.radius : b.radius;
        if (detail::inside_convex(disc_center, poly.verts, poly_shift)) return 0.0;
        return std::max(0.0, detail::point_polygon_boundary_distance(disc_center, poly.verts, poly_shift) - r);
    }
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& v : a.verts) best = std::min(best, detail::point_polygon_boundary_distance(v, b.verts, b_offset));
    for (const Vec2& v : b.verts) best = std::min(best, detail::point_polygon_boundary_distance(v + b_offset, a.verts, {}));
    return best;
}

inline double separation(const Shape& a, const Shape& b) { return separation(ConvexBody(a), ConvexBody(b)); }

// Closed-set membership.
inline bool contains(const ConvexBody& b, Vec2 p, Vec2 offset = {}) {
    if (b.is_disc()) {
        const Vec2 d = p - (b.center + offset);
        return dot(d, d) <= b.radius * b.radius;
    }
    return detail::inside_convex(p, b.verts, offset);
}

inline bool contains(const Shape& s, Vec2 p) { return contains(ConvexBody(s), p); }

}  // namespace pgpack
