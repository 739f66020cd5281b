#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pgpack/geometry.hpp"

namespace pgpack {

enum class PlaneGroup {
    p1, p2, pm, pg, cm, p2mm, p2mg, p2gg, c2mm, p4, p4mm, p4gm, p3, p3m1, p31m, p6, p6mm
};

inline constexpr std::array<PlaneGroup, 17> kAllGroups = {
    PlaneGroup::p1,   PlaneGroup::p2,   PlaneGroup::pm,   PlaneGroup::pg,   PlaneGroup::cm,   PlaneGroup::p2mm,
    PlaneGroup::p2mg, PlaneGroup::p2gg, PlaneGroup::c2mm, PlaneGroup::p4,   PlaneGroup::p4mm, PlaneGroup::p4gm,
    PlaneGroup::p3,   PlaneGroup::p3m1, PlaneGroup::p31m, PlaneGroup::p6,   PlaneGroup::p6mm};

enum class CrystalSystem { oblique, rectangular, square, hexagonal };

// Symmetry operation in fractional coordinates: x' = M x + t.
struct SymOp {
    std::array<int, 4> m{1, 0, 0, 1};  // row-major
    Vec2 t{};

    Vec2 apply(Vec2 f) const { return {m[0] * f.x + m[1] * f.y + t.x, m[2] * f.x + m[3] * f.y + t.y}; }
    int det() const { return m[0] * m[3] - m[1] * m[2]; }
    Mat2 matrix() const { return {double(m[0]), double(m[1]), double(m[2]), double(m[3])}; }
};

inline double wrap_unit(double v) { return wrap_angle(v, 1.0); }
inline Vec2 wrap_unit(Vec2 f) { return {wrap_unit(f.x), wrap_unit(f.y)}; }

// Composition a∘b reduced modulo lattice translations.
inline SymOp compose(const SymOp& a, const SymOp& b) {
    SymOp r;
    r.m = {a.m[0] * b.m[0] + a.m[1] * b.m[2], a.m[0] * b.m[1] + a.m[1] * b.m[3],
           a.m[2] * b.m[0] + a.m[3] * b.m[2], a.m[2] * b.m[1] + a.m[3] * b.m[3]};
    const Vec2 at{a.m[0] * b.t.x + a.m[1] * b.t.y, a.m[2] * b.t.x + a.m[3] * b.t.y};
    r.t = wrap_unit(at + a.t);
    return r;
}

inline bool same_op(const SymOp& a, const SymOp& b, double tol = 1e-12) {
    auto close_mod1 = [tol](double x, double y) {
        const double d = wrap_unit(x - y);
        return d < tol || 1.0 - d < tol;
    };
    return a.m == b.m && close_mod1(a.t.x, b.t.x) && close_mod1(a.t.y, b.t.y);
}

struct FracBox {
    Vec2 lo{0.0, 0.0};
    Vec2 hi{1.0, 1.0};
    bool contains(Vec2 f, double tol = 1e-12) const {
        return f.x >= lo.x - tol && f.x <= hi.x + tol && f.y >= lo.y - tol && f.y <= hi.y + tol;
    }
};

struct PlaneGroupSpec {
    PlaneGroup id;
    std::string_view name;
    CrystalSystem system;
    // cm and c2mm live in their primitive rhombic cell (a = b, gamma free).
    bool centered = false;
    std::vector<SymOp> ops;  // ops[0] is the identity
    FracBox asym_unit;

    std::size_t multiplicity() const { return ops.size(); }
};

namespace detail {

inline SymOp op(int m00, int m01, int m10, int m11, double tx = 0.0, double ty = 0.0) {
    return SymOp{{m00, m01, m10, m11}, {tx, ty}};
}

inline std::vector<PlaneGroupSpec> build_catalog() {
    using G = PlaneGroup;
    using S = CrystalSystem;
    const SymOp e = op(1, 0, 0, 1);
    const SymOp two = op(-1, 0, 0, -1);
    const std::vector<SymOp> p4ops = {e, two, op(0, -1, 1, 0), op(0, 1, -1, 0)};
    const std::vector<SymOp> p3ops = {e, op(0, -1, 1, -1), op(-1, 1, -1, 0)};
    auto cat = [](std::vector<SymOp> a, const std::vector<SymOp>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };
    const std::vector<SymOp> p6ops = cat(p3ops, {two, op(0, 1, -1, 1), op(1, -1, 1, 0)});
    const std::vector<SymOp> m3_1 = {op(0, -1, -1, 0), op(-1, 1, 0, 1), op(1, 0, 1, -1)};  // mirrors of p3m1
    const std::vector<SymOp> m31 = {op(0, 1, 1, 0), op(1, -1, 0, -1), op(-1, 0, -1, 1)};   // mirrors of p31m
    const FracBox full{{0, 0}, {1, 1}};
    const FracBox hex{{0, 0}, {2.0 / 3.0, 2.0 / 3.0}};

    return {
        {G::p1, "p1", S::oblique, false, {e}, full},
        {G::p2, "p2", S::oblique, false, {e, two}, {{0, 0}, {0.5, 1}}},
        {G::pm, "pm", S::rectangular, false, {e, op(-1, 0, 0, 1)}, {{0, 0}, {0.5, 1}}},
        {G::pg, "pg", S::rectangular, false, {e, op(-1, 0, 0, 1, 0, 0.5)}, {{0, 0}, {1, 0.5}}},
        {G::cm, "cm", S::rectangular, true, {e, op(0, 1, 1, 0)}, full},
        {G::p2mm, "p2mm", S::rectangular, false, {e, two, op(-1, 0, 0, 1), op(1, 0, 0, -1)}, {{0, 0}, {0.5, 0.5}}},
        {G::p2mg, "p2mg", S::rectangular, false,
         {e, two, op(-1, 0, 0, 1, 0.5, 0), op(1, 0, 0, -1, 0.5, 0)}, {{0, 0}, {0.25, 1}}},
        {G::p2gg, "p2gg", S::rectangular, false,
         {e, two, op(-1, 0, 0, 1, 0.5, 0.5), op(1, 0, 0, -1, 0.5, 0.5)}, {{0, 0}, {0.5, 0.5}}},
        {G::c2mm, "c2mm", S::rectangular, true, {e, two, op(0, 1, 1, 0), op(0, -1, -1, 0)}, {{0, 0}, {0.5, 1}}},
        {G::p4, "p4", S::square, false, p4ops, {{0, 0}, {0.5, 0.5}}},
        {G::p4mm, "p4mm", S::square, false,
         cat(p4ops, {op(-1, 0, 0, 1), op(1, 0, 0, -1), op(0, 1, 1, 0), op(0, -1, -1, 0)}), {{0, 0}, {0.5, 0.5}}},
        {G::p4gm, "p4gm", S::square, false,
         cat(p4ops, {op(-1, 0, 0, 1, 0.5, 0.5), op(1, 0, 0, -1, 0.5, 0.5), op(0, 1, 1, 0, 0.5, 0.5),
                     op(0, -1, -1, 0, 0.5, 0.5)}),
         {{0, 0}, {0.5, 0.5}}},
        {G::p3, "p3", S::hexagonal, false, p3ops, hex},
        {G::p3m1, "p3m1", S::hexagonal, false, cat(p3ops, m3_1), hex},
        {G::p31m, "p31m", S::hexagonal, false, cat(p3ops, m31), hex},
        {G::p6, "p6", S::hexagonal, false, p6ops, hex},
        {G::p6mm, "p6mm", S::hexagonal, false, cat(cat(p6ops, m3_1), m31), hex},
    };
}

}  // namespace detail

inline const std::vector<PlaneGroupSpec>& group_catalog() {
    static const std::vector<PlaneGroupSpec> catalog = detail::build_catalog();
    return catalog;
}

inline const PlaneGroupSpec& group_spec(PlaneGroup g) { return group_catalog()[static_cast<std::size_t>(g)]; }

inline std::string_view group_name(PlaneGroup g) { return group_spec(g).name; }

// Case-insensitive lookup of the IUCr short symbol.
inline std::optional<PlaneGroup> parse_group(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    for (const auto& spec : group_catalog()) {
        if (spec.name == lower) return spec.id;
    }
    return std::nullopt;
}

struct CellParams {
    double a = 1.0;
    double b = 1.0;
    double gamma = kPi / 2.0;

    // Columns are the lattice generators.
    Mat2 basis() const { return {a, b * std::cos(gamma), 0.0, b * std::sin(gamma)}; }
    double area() const { return a * b * std::sin(gamma); }
    Vec2 to_cartesian(Vec2 f) const { return basis() * f; }
};

// Whether a cell obeys the lattice constraints of the group's crystal system.
inline bool cell_compatible(const PlaneGroupSpec& g, const CellParams& c, double tol = 1e-9) {
    const bool equal_ab = std::abs(c.a - c.b) <= tol * std::max(c.a, c.b);
    const auto angle_is = [&](double v) { return std::abs(c.gamma - v) <= tol; };
    switch (g.system) {
        case CrystalSystem::oblique: return true;
        case CrystalSystem::rectangular: return g.centered ? equal_ab : angle_is(kPi / 2.0);
        case CrystalSystem::square: return equal_ab && angle_is(kPi / 2.0);
        case CrystalSystem::hexagonal: return equal_ab && angle_is(2.0 * kPi / 3.0);
    }
    return false;
}

enum class DofKind { frac_x, frac_y, motif_angle, cell_a, cell_b, cell_gamma };

inline std::string_view dof_name(DofKind k) {
    switch (k) {
        case DofKind::frac_x: return "frac_x";
        case DofKind::frac_y: return "frac_y";
        case DofKind::motif_angle: return "motif_angle";
        case DofKind::cell_a: return "cell_a";
        case DofKind::cell_b: return "cell_b";
        case DofKind::cell_gamma: return "cell_gamma";
    }
    return "";
}

// How one torus coordinate maps to a parameter value. Periodic axes wrap linearly
// over [lo, hi); bounded axes use lo + (hi - lo) * (1 - cos theta) / 2 so that both
// endpoints are interior points of the torus.
struct AxisMap {
    DofKind kind = DofKind::frac_x;
    double lo = 0.0;
    double hi = 1.0;
    bool periodic = true;
    // Period used to wrap a bounded box on a periodic parameter (0 when not applicable).
    double wrap = 0.0;

    double value(double theta) const {
        if (periodic) return lo + (hi - lo) * wrap_angle(theta) / kTwoPi;
        double v = lo + (hi - lo) * 0.5 * (1.0 - std::cos(theta));
        if (wrap > 0.0) v = wrap_angle(v, wrap);
        return v;
    }
    double range() const { return hi - lo; }
};

struct Bounds {
    double length_min = 0.0;
    double length_max = 0.0;
    double gamma_min = kPi / 6.0;
    double gamma_max = 5.0 * kPi / 6.0;
};

// Default search box: lattice generators between the minimal width of the motif
// (no translate can come closer) and max(4, 2 sqrt(N)) diameters.
inline Bounds default_bounds(const PlaneGroupSpec& g, const Shape& motif) {
    Bounds b;
    b.length_min = min_width(motif);
    b.length_max = diameter(motif) * std::max(4.0, 2.0 * std::sqrt(double(g.multiplicity())));
    return b;
}

struct DofLayout {
    PlaneGroup group = PlaneGroup::p1;
    Shape motif;  // template centered at the origin
    Bounds bounds;
    std::vector<AxisMap> axes;

    std::size_t count() const { return axes.size(); }
    std::vector<DofKind> kinds() const {
        std::vector<DofKind> k;
        for (const auto& a : axes) k.push_back(a.kind);
        return k;
    }
};

inline int cell_dof(const PlaneGroupSpec& g) {
    switch (g.system) {
        case CrystalSystem::oblique: return 3;
        case CrystalSystem::rectangular: return 2;
        case CrystalSystem::square: return 1;
        case CrystalSystem::hexagonal: return 1;
    }
    return 0;
}

inline DofLayout dof_layout(PlaneGroup group, const Shape& motif, std::optional<Bounds> bounds = std::nullopt) {
    const PlaneGroupSpec& g = group_spec(group);
    DofLayout layout;
    layout.group = group;
    layout.motif = motif;
    layout.motif.center = {};
    layout.motif.rotation = 0.0;
    layout.bounds = bounds.value_or(default_bounds(g, motif));
    const Bounds& b = layout.bounds;
    if (!(b.length_min > 0.0) || !(b.length_max > b.length_min))
        throw std::invalid_argument("length bounds must satisfy 0 < lmin < lmax");
    if (!(b.gamma_min > 0.0) || !(b.gamma_max < kPi) || !(b.gamma_max > b.gamma_min))
        throw std::invalid_argument("gamma bounds must satisfy 0 < gmin < gmax < pi");

    auto& ax = layout.axes;
    ax.push_back({DofKind::frac_x, 0.0, 1.0, true});
    ax.push_back({DofKind::frac_y, 0.0, 1.0, true});
    if (!motif.is_disc()) ax.push_back({DofKind::motif_angle, 0.0, motif.rotation_period(), true});
    const AxisMap length_axis{DofKind::cell_a, b.length_min, b.length_max, false};
    const AxisMap gamma_axis{DofKind::cell_gamma, b.gamma_min, b.gamma_max, false};
    auto with_kind = [](AxisMap m, DofKind k) {
        m.kind = k;
        return m;
    };
    ax.push_back(length_axis);
    switch (g.system) {
        case CrystalSystem::oblique:
            ax.push_back(with_kind(length_axis, DofKind::cell_b));
            ax.push_back(gamma_axis);
            break;
        case CrystalSystem::rectangular:
            ax.push_back(g.centered ? gamma_axis : with_kind(length_axis, DofKind::cell_b));
            break;
        case CrystalSystem::square:
        case CrystalSystem::hexagonal: break;
    }
    return layout;
}

struct Configuration {
    PlaneGroup group = PlaneGroup::p1;
    CellParams cell;
    Vec2 centroid{};          // fractional, in [0,1)^2
    double motif_rotation = 0.0;
    Shape motif = make_regular_ngon(4, 1.0);  // template centered at the origin
};

// Cell completed from the free parameters according to the crystal system.
inline CellParams complete_cell(const PlaneGroupSpec& g, double a, double b, double gamma) {
    switch (g.system) {
        case CrystalSystem::oblique: return {a, b, gamma};
        case CrystalSystem::rectangular: return g.centered ? CellParams{a, a, gamma} : CellParams{a, b, kPi / 2.0};
        case CrystalSystem::square: return {a, a, kPi / 2.0};
        case CrystalSystem::hexagonal: return {a, a, 2.0 * kPi / 3.0};
    }
    return {};
}

// Cartesian linear part B M B^-1 of a fractional operation.
inline Mat2 cartesian_linear(const SymOp& op, const CellParams& cell) {
    const Mat2 B = cell.basis();
    return B * op.matrix() * B.inverse();
}

// Image of the motif pose (fractional centroid, rotation) under one operation.
inline std::pair<Vec2, double> transform_pose(const SymOp& op, const CellParams& cell, Vec2 centroid,
                                              double rotation, const Shape& motif) {
    const Vec2 f = wrap_unit(op.apply(centroid));
    if (motif.is_disc()) return {f, 0.0};
    const Mat2 L = cartesian_linear(op, cell);
    const double turn = std::atan2(L.m10, L.m00);
    const double rot = op.det() > 0 ? rotation + turn : turn - rotation;
    double r = wrap_angle(rot, motif.rotation_period());
    if (motif.rotation_period() - r < 1e-12) r = 0.0;
    return {f, r};
}

inline std::vector<Shape> expand_orbit(const PlaneGroupSpec& g, const CellParams& cell, Vec2 centroid,
                                       double rotation, const Shape& motif) {
    std::vector<Shape> out;
    out.reserve(g.multiplicity());
    for (const SymOp& op : g.ops) {
        const auto [f, r] = transform_pose(op, cell, centroid, rotation, motif);
        Shape s = motif;
        s.center = cell.to_cartesian(f);
        s.rotation = motif.is_disc() ? 0.0 : r;
        out.push_back(s);
    }
    return out;
}

inline std::vector<Shape> expand_orbit(const Configuration& c) {
    return expand_orbit(group_spec(c.group), c.cell, c.centroid, c.motif_rotation, c.motif);
}

// Replaces the motif by the orbit member whose centroid lies in the group's
// asymmetric-unit box (lexicographically smallest when several qualify).
inline Configuration fold_to_asymmetric_unit(const Configuration& c) {
    const PlaneGroupSpec& g = group_spec(c.group);
    Configuration best = c;
    bool have = false;
    bool best_inside = false;
    for (const SymOp& op : g.ops) {
        const auto [f, r] = transform_pose(op, c.cell, c.centroid, c.motif_rotation, c.motif);
        const bool inside = g.asym_unit.contains(f);
        const bool better = !have || (inside && !best_inside) ||
                            (inside == best_inside &&
                             (f.x < best.centroid.x - 1e-12 ||
                              (std::abs(f.x - best.centroid.x) <= 1e-12 && f.y < best.centroid.y)));
        if (better) {
            best.centroid = f;
            best.motif_rotation = r;
            best_inside = inside;
            have = true;
        }
    }
    return best;
}

inline Configuration decode(std::span<const double> theta, const DofLayout& layout) {
    if (theta.size() != layout.count()) throw std::invalid_argument("torus point dimension does not match layout");
    const PlaneGroupSpec& g = group_spec(layout.group);
    Vec2 centroid{};
    double rotation = 0.0, a = 0.0, b = 0.0, gamma = kPi / 2.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const AxisMap& m = layout.axes[k];
        const double v = m.value(theta[k]);
        switch (m.kind) {
            case DofKind::frac_x: centroid.x = wrap_unit(v); break;
            case DofKind::frac_y: centroid.y = wrap_unit(v); break;
            case DofKind::motif_angle: rotation = v; break;
            case DofKind::cell_a: a = v; break;
            case DofKind::cell_b: b = v; break;
            case DofKind::cell_gamma: gamma = v; break;
        }
    }
    Configuration c;
    c.group = layout.group;
    c.cell = complete_cell(g, a, b, gamma);
    c.centroid = centroid;
    c.motif = layout.motif;
    c.motif_rotation = layout.motif.is_disc() ? 0.0 : wrap_angle(rotation, layout.motif.rotation_period());
    return fold_to_asymmetric_unit(c);
}

// Parameter values of a configuration in layout order (inverse of decode up to torus symmetry).
inline std::vector<double> dof_values(const Configuration& c, const DofLayout& layout) {
    std::vector<double> v;
    for (const AxisMap& m : layout.axes) {
        switch (m.kind) {
            case DofKind::frac_x: v.push_back(c.centroid.x); break;
            case DofKind::frac_y: v.push_back(c.centroid.y); break;
            case DofKind::motif_angle: v.push_back(c.motif_rotation); break;
            case DofKind::cell_a: v.push_back(c.cell.a); break;
            case DofKind::cell_b: v.push_back(c.cell.b); break;
            case DofKind::cell_gamma: v.push_back(c.cell.gamma); break;
        }
    }
    return v;
}

// Layout restricted to a box of half-width eps * (full axis range) around `center`.
// Periodic parameters wrap; bounded ones are clipped to the full layout bounds.
inline DofLayout restrict_layout(const DofLayout& full, std::span<const double> center, double eps) {
    DofLayout box = full;
    for (std::size_t k = 0; k < full.axes.size(); ++k) {
        const AxisMap& m = full.axes[k];
        AxisMap& out = box.axes[k];
        const double half = eps * m.range();
        out.periodic = false;
        if (m.periodic) {
            if (half >= 0.5 * m.range()) {
                out = m;
                continue;
            }
            out.lo = center[k] - half;
            out.hi = center[k] + half;
            out.wrap = m.hi - m.lo;
        } else {
            out.lo = std::max(m.lo, center[k] - half);
            out.hi = std::min(m.hi, center[k] + half);
            if (out.hi <= out.lo) out.hi = out.lo + 1e-15;
        }
    }
    return box;
}

}  // namespace pgpack
