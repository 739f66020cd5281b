#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgpack/geometry.hpp"
#include "pgpack/symmetry.hpp"

namespace pgpack {

struct PackingReport {
    double density = 0.0;
    double violation = 0.0;
    bool feasible = false;
    // Touching neighbours summed over the orbit in the central cell.
    int contacts = 0;
};

inline void require_cell(const CellParams& cell) {
    if (!(cell.a > 0.0) || !(cell.b > 0.0) || !(cell.area() > 0.0) || !std::isfinite(cell.area()))
        throw std::invalid_argument("degenerate cell: basis determinant must be positive");
}

inline double density(const Configuration& c) {
    require_cell(c.cell);
    return double(group_spec(c.group).multiplicity()) * area(c.motif) / c.cell.area();
}

// Default contact tolerance: 1e-9 of the motif circumradius.
inline double default_tau(const Shape& motif) { return 1e-9 * motif.circumradius; }

// Half-width of the neighbour block that is guaranteed to contain every copy
// within reach of the central orbit, never less than `min_block / 2`.
inline int neighbour_radius(const CellParams& cell, const Shape& motif, int min_block = 5) {
    const double s = std::sin(cell.gamma);
    const double reach = 2.0 * motif.circumradius;
    const double hx = reach / (cell.a * s);
    const double hy = reach / (cell.b * s);
    const int need = int(std::ceil(std::max(hx, hy) - 1e-12));
    return std::max(min_block / 2, std::min(need, 64));
}

// Orbit copies of one configuration prepared for repeated pair queries.
class PeriodicPacking {
public:
    explicit PeriodicPacking(const Configuration& c, int min_block = 5) : config_(c) {
        require_cell(c.cell);
        for (const Shape& s : expand_orbit(c)) bodies_.emplace_back(s);
        const Mat2 B = c.cell.basis();
        a_vec_ = {B.m00, B.m10};
        b_vec_ = {B.m01, B.m11};
        radius_ = neighbour_radius(c.cell, c.motif, min_block);
    }

    const std::vector<ConvexBody>& bodies() const { return bodies_; }
    int block_radius() const { return radius_; }
    Vec2 lattice(int u, int v) const { return a_vec_ * double(u) + b_vec_ * double(v); }

    // Visits every unordered pair (central body i, body j translated by cell (u,v))
    // exactly once up to lattice translation.
    template <class Fn>
    void for_each_pair(Fn&& fn) const {
        const int n = int(bodies_.size());
        for (int u = 0; u <= radius_; ++u) {
            for (int v = -radius_; v <= radius_; ++v) {
                if (u == 0 && v < 0) continue;
                const bool origin = u == 0 && v == 0;
                const Vec2 t = lattice(u, v);
                for (int i = 0; i < n; ++i) {
                    for (int j = origin ? i + 1 : 0; j < n; ++j) fn(i, j, t);
                }
            }
        }
    }

    double violation() const {
        double total = 0.0;
        for_each_pair([&](int i, int j, Vec2 t) { total += penetration_depth(bodies_[i], bodies_[j], t); });
        return total;
    }

    // Ordered count: each touching unordered pair contributes once per member in the central orbit.
    int contacts(double tau) const {
        int count = 0;
        for_each_pair([&](int i, int j, Vec2 t) {
            if (penetration_depth(bodies_[i], bodies_[j], t) <= tau && separation(bodies_[i], bodies_[j], t) <= tau)
                count += 2;
        });
        return count;
    }

private:
    Configuration config_;
    std::vector<ConvexBody> bodies_;
    Vec2 a_vec_{}, b_vec_{};
    int radius_ = 2;
};

inline double violation(const Configuration& c, int min_block = 5) { return PeriodicPacking(c, min_block).violation(); }

inline PackingReport verify(const Configuration& c, double tau, int min_block = 5) {
    if (tau < 0.0) throw std::invalid_argument("tau must be non-negative");
    PackingReport r;
    r.density = density(c);
    const PeriodicPacking pk(c, min_block);
    r.violation = pk.violation();
    r.feasible = r.violation <= tau;
    r.contacts = pk.contacts(tau);
    return r;
}

inline PackingReport verify(const Configuration& c) { return verify(c, default_tau(c.motif)); }

// Certificate: flat JSON {group, n, circumradius, a, b, gamma_rad, frac_x, frac_y, rotation_rad}; n = 0 is the disc.
inline nlohmann::json to_json(const Configuration& c) {
    return {{"group", std::string(group_name(c.group))},
            {"n", c.motif.is_disc() ? 0 : c.motif.n},
            {"circumradius", c.motif.circumradius},
            {"a", c.cell.a},
            {"b", c.cell.b},
            {"gamma_rad", c.cell.gamma},
            {"frac_x", c.centroid.x},
            {"frac_y", c.centroid.y},
            {"rotation_rad", c.motif_rotation}};
}

inline Configuration configuration_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("certificate must be a JSON object");
    auto num = [&](const char* key) {
        if (!j.contains(key) || !j.at(key).is_number()) throw std::invalid_argument(std::string("missing numeric field '") + key + "'");
        return j.at(key).get<double>();
    };
    if (!j.contains("group") || !j.at("group").is_string()) throw std::invalid_argument("missing field 'group'");
    const auto g = parse_group(j.at("group").get<std::string>());
    if (!g) throw std::invalid_argument("unknown plane group '" + j.at("group").get<std::string>() + "'");

    int n = 0;
    if (j.contains("n") && j.at("n").is_string()) {
        if (j.at("n").get<std::string>() != "disc") throw std::invalid_argument("field 'n' must be an integer or \"disc\"");
    } else {
        n = int(num("n"));
    }
    const double r = num("circumradius");
    Configuration c;
    c.group = *g;
    c.motif = n == 0 ? make_disc(r) : make_regular_ngon(n, r);
    c.cell = {num("a"), num("b"), num("gamma_rad")};
    c.centroid = wrap_unit(Vec2{num("frac_x"), num("frac_y")});
    c.motif_rotation = c.motif.is_disc() ? 0.0 : wrap_angle(num("rotation_rad"), c.motif.rotation_period());
    require_cell(c.cell);
    if (!cell_compatible(group_spec(c.group), c.cell, 1e-6))
        throw std::invalid_argument("cell violates the crystal-system constraints of " + std::string(group_name(c.group)));
    return c;
}

}  // namespace pgpack
