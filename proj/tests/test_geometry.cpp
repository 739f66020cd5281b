#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "pgpack/geometry.hpp"

using namespace pgpack;

namespace {

// Independent membership oracle: half-plane tests against the raw vertex formula.
bool inside_shape(const Shape& s, Vec2 p) {
    const Vec2 d = p - s.center;
    if (s.is_disc()) return d.x * d.x + d.y * d.y < s.circumradius * s.circumradius;
    for (int k = 0; k < s.n; ++k) {
        const double t0 = s.rotation + 2.0 * kPi * k / s.n;
        const double t1 = s.rotation + 2.0 * kPi * (k + 1) / s.n;
        const Vec2 a{s.circumradius * std::cos(t0), s.circumradius * std::sin(t0)};
        const Vec2 b{s.circumradius * std::cos(t1), s.circumradius * std::sin(t1)};
        if ((b.x - a.x) * (d.y - a.y) - (b.y - a.y) * (d.x - a.x) <= 0.0) return false;
    }
    return true;
}

Shape random_shape(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> kind(2, 12);
    std::uniform_real_distribution<double> r(0.5, 1.5), c(-1.5, 1.5), ang(0.0, 2.0 * kPi);
    const int n = kind(rng);
    const Vec2 center{c(rng), c(rng)};
    if (n == 2) return make_disc(r(rng), center);
    return make_regular_ngon(n, r(rng), center, ang(rng));
}

std::vector<Vec2> sorted_vertices(const Shape& s) {
    auto v = vertices(s);
    std::sort(v.begin(), v.end(), [](Vec2 a, Vec2 b) { return std::atan2(a.y, a.x) < std::atan2(b.y, b.x); });
    return v;
}

}  // namespace

TEST(Shape, ClosedFormAreas) {
    EXPECT_NEAR(area(make_regular_ngon(3, 1.0)), 3.0 * std::sqrt(3.0) / 4.0, 1e-12);
    EXPECT_NEAR(area(make_regular_ngon(4, 1.0)), 2.0, 1e-12);
    EXPECT_NEAR(area(make_regular_ngon(6, 1.0)), 3.0 * std::sqrt(3.0) / 2.0, 1e-12);
    EXPECT_NEAR(area(make_regular_ngon(12, 1.0)), 3.0, 1e-12);
    EXPECT_NEAR(area(make_disc(1.0)), kPi, 1e-15);
}

TEST(Shape, RotationReducedModuloSymmetry) {
    EXPECT_EQ(make_regular_ngon(6, 1.0, {}, kPi / 3.0).rotation, 0.0);
    EXPECT_NEAR(make_regular_ngon(5, 1.0, {}, 2.0 * kPi / 5.0 + 0.1).rotation, 0.1, 1e-12);
    EXPECT_NEAR(make_regular_ngon(4, 1.0, {}, -0.1).rotation, kPi / 2.0 - 0.1, 1e-12);
}

TEST(Shape, VerticesOnCircumcircle) {
    const Shape s = make_regular_ngon(7, 2.0, {1.0, -1.0}, 0.3);
    const auto v = vertices(s);
    ASSERT_EQ(v.size(), 7u);
    for (int k = 0; k < 7; ++k) {
        EXPECT_NEAR(v[k].x, 1.0 + 2.0 * std::cos(0.3 + 2.0 * kPi * k / 7), 1e-12);
        EXPECT_NEAR(v[k].y, -1.0 + 2.0 * std::sin(0.3 + 2.0 * kPi * k / 7), 1e-12);
    }
}

TEST(Shape, RejectsInvalidInput) {
    EXPECT_THROW(make_regular_ngon(2, 1.0), std::invalid_argument);
    EXPECT_THROW(make_regular_ngon(5, 0.0), std::invalid_argument);
    EXPECT_THROW(make_regular_ngon(5, -1.0), std::invalid_argument);
}

TEST(Shape, WidthAndDiameter) {
    EXPECT_NEAR(min_width(make_regular_ngon(4, 1.0)), std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(diameter(make_regular_ngon(4, 1.0)), 2.0, 1e-12);
    EXPECT_NEAR(min_width(make_regular_ngon(3, 1.0)), 1.5, 1e-12);
    EXPECT_NEAR(diameter(make_regular_ngon(3, 1.0)), std::sqrt(3.0), 1e-12);
    EXPECT_NEAR(min_width(make_disc(0.5)), 1.0, 1e-15);
}

TEST(Isometry, TranslationMovesCenter) {
    const Shape s = apply_isometry(make_regular_ngon(4, 1.0), Isometry::translate({1.0, 0.0}));
    EXPECT_EQ(s.center, (Vec2{1.0, 0.0}));
    EXPECT_EQ(s.rotation, 0.0);
}

TEST(Isometry, TriangleThirdTurnIsIdentity) {
    const Shape t = make_regular_ngon(3, 1.0, {0.5, 0.2}, 0.4);
    const Shape r = apply_isometry(t, Isometry::rotate_about(t.center, 2.0 * kPi / 3.0));
    EXPECT_NEAR(r.center.x, t.center.x, 1e-12);
    EXPECT_NEAR(r.center.y, t.center.y, 1e-12);
    EXPECT_NEAR(r.rotation, t.rotation, 1e-12);
}

TEST(Isometry, PentagonReflectionMatchesReflectedVertices) {
    const Shape p = make_regular_ngon(5, 1.0, {}, 0.3);
    const Shape q = apply_isometry(p, {Mat2::reflection(0.0), {}});
    EXPECT_NEAR(q.rotation, wrap_angle(-0.3, 2.0 * kPi / 5.0), 1e-12);
    // Oracle: reflect each vertex across the x-axis and compare as sets.
    std::vector<Vec2> reflected;
    for (Vec2 v : vertices(p)) reflected.push_back({v.x, -v.y});
    std::sort(reflected.begin(), reflected.end(),
              [](Vec2 a, Vec2 b) { return std::atan2(a.y, a.x) < std::atan2(b.y, b.x); });
    const auto got = sorted_vertices(q);
    for (std::size_t k = 0; k < got.size(); ++k) {
        EXPECT_NEAR(got[k].x, reflected[k].x, 1e-12);
        EXPECT_NEAR(got[k].y, reflected[k].y, 1e-12);
    }
}

TEST(Isometry, AreaPreserved) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int t = 0; t < 200; ++t) {
        const Shape s = random_shape(rng);
        const Isometry g{(t % 2 ? Mat2::reflection(u(rng)) : Mat2::rotation(u(rng))), {u(rng), u(rng)}};
        EXPECT_EQ(area(apply_isometry(s, g)), area(s));
    }
}

TEST(Penetration, Examples) {
    const Shape a = make_regular_ngon(4, 1.0, {0.0, 0.0}, kPi / 4.0);
    const Shape b = make_regular_ngon(4, 1.0, {std::sqrt(2.0), 0.0}, kPi / 4.0);
    EXPECT_NEAR(penetration_depth(a, b), 0.0, 1e-12);
    EXPECT_NEAR(penetration_depth(make_disc(1.0), make_disc(1.0, {1.0, 0.0})), 1.0, 1e-15);
    const double r = std::sqrt(0.5);
    EXPECT_NEAR(penetration_depth(make_regular_ngon(4, r, {}, kPi / 4.0), make_regular_ngon(4, r, {0.6, 0.0}, kPi / 4.0)),
                0.4, 1e-12);
}

TEST(Penetration, DiscAgainstPolygonCorner) {
    // Disc approaching a square corner along the diagonal: depth is radius minus corner distance.
    const Shape sq = make_regular_ngon(4, 1.0);  // vertex at (1, 0)
    const Shape d = make_disc(0.5, {1.3, 0.0});
    EXPECT_NEAR(penetration_depth(sq, d), 0.2, 1e-12);
    EXPECT_NEAR(penetration_depth(d, sq), 0.2, 1e-12);
    EXPECT_EQ(penetration_depth(sq, make_disc(0.5, {1.6, 0.0})), 0.0);
}

TEST(Penetration, SymmetricOnRandomPairs) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 10000; ++t) {
        const Shape a = random_shape(rng), b = random_shape(rng);
        EXPECT_NEAR(penetration_depth(a, b), penetration_depth(b, a), 1e-12);
    }
}

TEST(Penetration, InvariantUnderCommonIsometry) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int t = 0; t < 10000; ++t) {
        const Shape a = random_shape(rng), b = random_shape(rng);
        const Isometry g{(t % 2 ? Mat2::reflection(u(rng)) : Mat2::rotation(u(rng))), {u(rng), u(rng)}};
        EXPECT_NEAR(penetration_depth(apply_isometry(a, g), apply_isometry(b, g)), penetration_depth(a, b), 1e-9);
    }
}

TEST(Penetration, AgreesWithMonteCarloMembership) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int agree = 0;
    const int pairs = 10000;
    for (int t = 0; t < pairs; ++t) {
        const Shape a = random_shape(rng), b = random_shape(rng);
        const double depth = penetration_depth(a, b);
        // Sample the intersection of the circumscribed boxes.
        const double x0 = std::max(a.center.x - a.circumradius, b.center.x - b.circumradius);
        const double x1 = std::min(a.center.x + a.circumradius, b.center.x + b.circumradius);
        const double y0 = std::max(a.center.y - a.circumradius, b.center.y - b.circumradius);
        const double y1 = std::min(a.center.y + a.circumradius, b.center.y + b.circumradius);
        bool hit = false;
        if (x1 > x0 && y1 > y0) {
            for (int k = 0; k < 20000 && !hit; ++k) {
                const Vec2 p{x0 + (x1 - x0) * u(rng), y0 + (y1 - y0) * u(rng)};
                hit = inside_shape(a, p) && inside_shape(b, p);
            }
        }
        if (hit == (depth > 0.0) || (!hit && depth < 1e-9)) ++agree;
    }
    EXPECT_GE(agree, int(0.999 * pairs));
}

TEST(Penetration, DepthSeparatesPolygons) {
    // Translating one body by the reported depth along some direction removes the overlap:
    // check the minimum over a fine set of directions is close to the depth.
    std::mt19937_64 rng(14);
    for (int t = 0; t < 100; ++t) {
        const Shape a = random_shape(rng), b = random_shape(rng);
        const double depth = penetration_depth(a, b);
        if (depth <= 1e-6) continue;
        double best = 1e300;
        for (int k = 0; k < 3600; ++k) {
            const double phi = 2.0 * kPi * k / 3600.0;
            const Vec2 dir{std::cos(phi), std::sin(phi)};
            // Bisection on the distance needed along dir.
            double lo = 0.0, hi = 10.0;
            for (int it = 0; it < 50; ++it) {
                const double mid = 0.5 * (lo + hi);
                Shape moved = b;
                moved.center = b.center + dir * mid;
                (penetration_depth(a, moved) > 0.0 ? lo : hi) = mid;
            }
            best = std::min(best, hi);
        }
        EXPECT_NEAR(best, depth, 1e-3 * std::max(1.0, depth));
    }
}

TEST(Separation, GapBetweenDisjointShapes) {
    EXPECT_NEAR(separation(make_disc(1.0), make_disc(1.0, {3.0, 0.0})), 1.0, 1e-12);
    const double r = std::sqrt(0.5);
    EXPECT_NEAR(separation(make_regular_ngon(4, r, {}, kPi / 4.0), make_regular_ngon(4, r, {1.5, 0.0}, kPi / 4.0)), 0.5,
                1e-12);
    EXPECT_EQ(separation(make_disc(1.0), make_disc(1.0, {1.0, 0.0})), 0.0);
}

TEST(Polygonize, ApproximatesDisc) {
    const Shape p = polygonize(make_disc(1.0), 360);
    EXPECT_EQ(p.n, 360);
    EXPECT_NEAR(area(p), kPi, 2e-4);
}
