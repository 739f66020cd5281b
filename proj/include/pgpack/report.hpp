#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgpack/optimizer.hpp"
#include "pgpack/packing.hpp"

namespace pgpack {

// Fill colours indexed by symmetry-operation order.
inline constexpr std::array<const char*, 12> kPalette = {
    "#f2c14e", "#5fad56", "#f78154", "#4d9078", "#b4436c", "#8cb8d8",
    "#c49bbb", "#a1a33b", "#e0a458", "#6c7a89", "#d4b483", "#7e6b8f"};
inline constexpr const char* kCellColour = "#1f4fd1";
inline constexpr const char* kOverlapColour = "#e00000";

inline std::string shape_label(const Shape& motif) { return motif.is_disc() ? "disc" : std::to_string(motif.n); }

// Five decimals, truncated towards zero.
inline std::string truncate5(double v) {
    const double t = std::trunc(v * 1e5) / 1e5;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.5f", t);
    std::string s = buf;
    if (s.rfind("0.", 0) == 0) s.erase(0, 1);
    return s;
}

// ---------------------------------------------------------------------------
// JSON / CSV exports

// Search output: the certificate fields plus the verification report and run metadata.
// configuration_from_json accepts it as a certificate.
inline nlohmann::json result_json(const SearchResult& r, const SearchSettings& s) {
    nlohmann::json j = to_json(r.best);
    j["density"] = r.report.density;
    j["violation"] = r.report.violation;
    j["feasible"] = r.report.feasible;
    j["contacts"] = r.report.contacts;
    j["iterations"] = r.iterations_used;
    j["converged"] = r.converged;
    j["refine_shrinks"] = r.refine_shrinks;
    j["seed"] = s.seed;
    return j;
}

inline nlohmann::json report_json(const PackingReport& r) {
    return {{"density", r.density}, {"violation", r.violation}, {"feasible", r.feasible}, {"contacts", r.contacts}};
}

inline std::string trace_csv(const std::vector<TraceRow>& trace) {
    std::ostringstream o;
    o.precision(17);
    o << "iteration,best_density,mean_violation,min_concentration\n";
    for (const TraceRow& t : trace)
        o << t.iteration << ',' << t.best_density << ',' << t.mean_violation << ',' << t.min_concentration << '\n';
    return o.str();
}

inline std::string rank_csv(const RankTable& t) {
    std::ostringstream o;
    o.precision(17);
    o << "n,group,density,rank\n";
    for (const auto& [n, row] : t.by_n)
        for (const RankEntry& e : row)
            o << (n == 0 ? std::string("disc") : std::to_string(n)) << ',' << group_name(e.group) << ',' << e.density
              << ',' << e.rank << '\n';
    return o.str();
}

// Plain-text table: one row per group, one column per n, densities truncated to five decimals.
inline std::string density_table(const std::map<std::pair<PlaneGroup, int>, double>& densities,
                                 const std::vector<int>& n_values, std::span<const PlaneGroup> groups = kAllGroups) {
    std::ostringstream o;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-6s", "group");
    o << buf;
    for (int n : n_values) {
        std::snprintf(buf, sizeof buf, " %8s", n == 0 ? "disc" : std::to_string(n).c_str());
        o << buf;
    }
    o << '\n';
    for (PlaneGroup g : groups) {
        std::snprintf(buf, sizeof buf, "%-6s", std::string(group_name(g)).c_str());
        o << buf;
        for (int n : n_values) {
            const auto it = densities.find({g, n});
            std::snprintf(buf, sizeof buf, " %8s", it == densities.end() ? "-" : truncate5(it->second).c_str());
            o << buf;
        }
        o << '\n';
    }
    return o.str();
}

// ---------------------------------------------------------------------------
// Ratio identities between densest packings of different groups

struct RatioIdentity {
    std::string name;
    int n;
    PlaneGroup numerator;
    PlaneGroup denominator;
    double target;
};

inline std::vector<RatioIdentity> ratio_identities() {
    return {{"hexagon p2/p6", 6, PlaneGroup::p2, PlaneGroup::p6, 7.0 / 6.0},
            {"hexagon p2/p3m1", 6, PlaneGroup::p2, PlaneGroup::p3m1, 1.5},
            {"octagon p4gm/p4mm", 8, PlaneGroup::p4gm, PlaneGroup::p4mm, (3.0 + 2.0 * std::sqrt(2.0)) / 4.0},
            {"dodecagon p2mg/p31m", 12, PlaneGroup::p2mg, PlaneGroup::p31m, 2.0 * std::sqrt(3.0) / 3.0},
            {"dodecagon p2mg/p6mm", 12, PlaneGroup::p2mg, PlaneGroup::p6mm, std::sqrt(3.0)}};
}

struct RatioCheck {
    RatioIdentity identity;
    std::optional<double> measured;  // empty when an input is missing
    double error() const { return measured ? std::abs(*measured - identity.target) : NAN; }
};

inline std::vector<RatioCheck> check_ratios(const std::map<std::pair<PlaneGroup, int>, double>& densities) {
    std::vector<RatioCheck> out;
    for (const RatioIdentity& id : ratio_identities()) {
        RatioCheck c{id, std::nullopt};
        const auto num = densities.find({id.numerator, id.n});
        const auto den = densities.find({id.denominator, id.n});
        if (num != densities.end() && den != densities.end() && den->second > 0.0) c.measured = num->second / den->second;
        out.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// SVG

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", std::abs(v) < 5e-7 ? 0.0 : v);
    return buf;
}

}  // namespace detail

// cells_x * cells_y translated copies of the orbit, filled by operation index.
// The primitive cell at the origin is outlined in blue; for the centred groups the
// conventional rectangular cell is dashed. Shapes taking part in an overlap get a red outline.
inline std::string render_svg(const Configuration& c, int cells_x = 3, int cells_y = 3, double tau = -1.0) {
    if (cells_x < 1 || cells_y < 1) throw std::invalid_argument("cell counts must be positive");
    if (tau < 0.0) tau = default_tau(c.motif);
    const PlaneGroupSpec& g = group_spec(c.group);
    const PeriodicPacking pk(c);
    const auto orbit = expand_orbit(c);
    const std::size_t n_ops = orbit.size();

    std::vector<bool> op_overlaps(n_ops, false);
    pk.for_each_pair([&](int i, int j, Vec2 t) {
        if (penetration_depth(pk.bodies()[std::size_t(i)], pk.bodies()[std::size_t(j)], t) > tau) {
            op_overlaps[std::size_t(i)] = true;
            op_overlaps[std::size_t(j)] = true;
        }
    });

    const Mat2 B = c.cell.basis();
    const Vec2 a{B.m00, B.m10}, b{B.m01, B.m11};
    const double pad = c.motif.circumradius * 1.2;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (int u : {0, cells_x})
        for (int v : {0, cells_y}) {
            const Vec2 p = a * double(u) + b * double(v);
            xmin = std::min(xmin, p.x);
            xmax = std::max(xmax, p.x);
            ymin = std::min(ymin, p.y);
            ymax = std::max(ymax, p.y);
        }
    xmin -= pad;
    ymin -= pad;
    xmax += pad;
    ymax += pad;
    const double w = xmax - xmin, h = ymax - ymin;
    const double stroke = 0.01 * std::max(w, h);
    // Flip y so the picture has the usual mathematical orientation.
    auto X = [&](double x) { return detail::fmt(x - xmin); };
    auto Y = [&](double y) { return detail::fmt(ymax - y); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << detail::fmt(w) << ' ' << detail::fmt(h)
      << "\" width=\"" << detail::fmt(600.0) << "\" height=\"" << detail::fmt(600.0 * h / w) << "\">\n";
    o << "<title>" << group_name(c.group) << " " << shape_label(c.motif) << " density " << truncate5(density(c))
      << "</title>\n";
    o << "<rect x=\"0\" y=\"0\" width=\"" << detail::fmt(w) << "\" height=\"" << detail::fmt(h) << "\" fill=\"white\"/>\n";
    for (int u = 0; u < cells_x; ++u) {
        for (int v = 0; v < cells_y; ++v) {
            const Vec2 t = a * double(u) + b * double(v);
            for (std::size_t k = 0; k < n_ops; ++k) {
                const Shape& s = orbit[k];
                const char* edge = op_overlaps[k] ? kOverlapColour : "black";
                const double sw = op_overlaps[k] ? 2.0 * stroke : 0.5 * stroke;
                if (s.is_disc()) {
                    o << "<circle cx=\"" << X(s.center.x + t.x) << "\" cy=\"" << Y(s.center.y + t.y) << "\" r=\""
                      << detail::fmt(s.circumradius) << "\"";
                } else {
                    o << "<polygon points=\"";
                    bool first = true;
                    for (Vec2 p : vertices(s)) {
                        if (!first) o << ' ';
                        first = false;
                        o << X(p.x + t.x) << ',' << Y(p.y + t.y);
                    }
                    o << "\"";
                }
                o << " fill=\"" << kPalette[k % kPalette.size()] << "\" stroke=\"" << edge << "\" stroke-width=\""
                  << detail::fmt(sw) << "\"/>\n";
            }
        }
    }
    auto outline = [&](Vec2 p0, Vec2 e1, Vec2 e2, const char* colour, bool dashed) {
        const Vec2 pts[4] = {p0, p0 + e1, p0 + e1 + e2, p0 + e2};
        o << "<polygon points=\"";
        for (int k = 0; k < 4; ++k) o << (k ? " " : "") << X(pts[k].x) << ',' << Y(pts[k].y);
        o << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"" << detail::fmt(1.5 * stroke) << "\"";
        if (dashed) o << " stroke-dasharray=\"" << detail::fmt(4 * stroke) << ',' << detail::fmt(3 * stroke) << "\"";
        o << "/>\n";
    };
    if (g.centered) outline({0.0, 0.0}, a + b, b - a, "#555555", true);
    outline({0.0, 0.0}, a, b, kCellColour, false);
    o << "</svg>\n";
    return o.str();
}

}  // namespace pgpack
