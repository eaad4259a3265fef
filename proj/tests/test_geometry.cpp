#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "sievehom/geometry.hpp"

using namespace sievehom;

namespace {

Box box1(double lo, double hi) {
    Box b;
    b.d = 1;
    b.lo[0] = lo;
    b.hi[0] = hi;
    return b;
}

}  // namespace

TEST_CASE("critical hole size") {
    CHECK(critical_hole_size(1e-2, 2, 1.5) ==
          doctest::Approx(std::pow(1e-2, 4.0 / 3.0)).epsilon(1e-14));
    CHECK(critical_hole_size(1.0, 5, 2.0) == doctest::Approx(1.0));
    // the exponent d/(d-p+1) exceeds 1, so a_eps << eps as eps -> 0
    for (double eps : {1e-1, 1e-2, 1e-3})
        CHECK(critical_hole_size(eps, 3, 2.0) / eps ==
              doctest::Approx(std::sqrt(eps)).epsilon(1e-12));
    CHECK_THROWS_AS(critical_hole_size(0.0, 2, 1.5), ValidationError);
    CHECK_THROWS_AS(critical_hole_size(0.1, 2, 1.0), ValidationError);
    CHECK_THROWS_AS(critical_hole_size(0.1, 2, 2.0), ValidationError);
}

TEST_CASE("sieve config invariants") {
    auto sv = SieveConfig::critical(std::pow(2.0, -6), 2, 1.3);
    CHECK(sv.a == doctest::Approx(std::pow(2.0, -6.0 * 2.0 / 1.7)));
    CHECK(sv.a < sv.eps / 2.0);
    // at eps = 2^-4, p = 1.3, the critical size exceeds eps/2: hard reject
    CHECK_THROWS_AS(SieveConfig::critical(std::pow(2.0, -4), 2, 1.3),
                    ValidationError);
    CHECK_THROWS_AS(SieveConfig::with_hole_size(0.1, 0.05, 2, 1.3),
                    ValidationError);
    auto manual = SieveConfig::with_hole_size(0.1, 0.049, 2, 1.3);
    CHECK(manual.a == doctest::Approx(0.049));
}

TEST_CASE("quadratic chart carries exact spectral bounds") {
    Box dom;
    dom.d = 2;
    dom.lo = Pt{-1.0, -1.0};
    dom.hi = Pt{1.0, 1.0};
    auto s = ConvexSurface::quadratic(3, {2.0, 1.0, 1.0, 2.0}, Pt{}, 0.0, dom);
    CHECK(s.c0 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.C0 == doctest::Approx(3.0).epsilon(1e-12));
    s.validate();
    CHECK_THROWS_AS(
        ConvexSurface::quadratic(3, {1.0, 2.0, 2.0, 1.0}, Pt{}, 0.0, dom),
        ValidationError);  // indefinite
}

TEST_CASE("surface point and tangent plane") {
    auto cosh_s = ConvexSurface::cosh_chart(0.0, box1(-2.0, 2.0));
    cosh_s.validate();
    Pt x0{};
    auto tp = tangent_plane(cosh_s, x0);
    CHECK(tp.point[0] == doctest::Approx(0.0));
    CHECK(tp.point[1] == doctest::Approx(1.0));
    CHECK(tp.normal[0] == doctest::Approx(0.0));
    CHECK(tp.normal[1] == doctest::Approx(1.0));

    auto para = ConvexSurface::quadratic(2, {1.0}, Pt{}, 0.0, box1(-4.0, 4.0));
    Pt x1{};
    x1[0] = 1.0;
    auto tp1 = tangent_plane(para, x1);
    CHECK(tp1.point[1] == doctest::Approx(0.5));
    CHECK(tp1.normal[0] == doctest::Approx(-1.0 / std::sqrt(2.0)));
    CHECK(tp1.normal[1] == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(norm2(tp1.normal, 2) == doctest::Approx(1.0));
}

TEST_CASE("hole templates: membership, distance, slices") {
    auto ball = HoleShape::ball(3, 0.5);
    CHECK(ball.circumradius() == doctest::Approx(0.5));
    CHECK(ball.vertical_extent() == doctest::Approx(0.5));
    auto zr = ball.z_range(Pt{0.3, 0.0});
    REQUIRE(zr.has_value());
    CHECK(zr->second == doctest::Approx(0.4));
    CHECK(!ball.z_range(Pt{0.6, 0.0}).has_value());

    auto bx = HoleShape::box(3, Pt{0.4, 0.3, 0.2});
    CHECK(bx.signed_distance(Pt{0.0, 0.0, 0.0}) == doctest::Approx(-0.2));
    CHECK(bx.signed_distance(Pt{0.4, 0.3, 0.2}) == doctest::Approx(0.0));
    CHECK(bx.signed_distance(Pt{0.9, 0.0, 0.0}) == doctest::Approx(0.5));
    CHECK(bx.support(Pt{1.0, 1.0, 1.0}) == doctest::Approx(0.9));
    CHECK(bx.vertical_extent() == doctest::Approx(0.2));

    // square as a polytope: hull faces, slices, support
    std::vector<Pt> sq = {Pt{0.4, 0.4}, Pt{-0.4, 0.4}, Pt{-0.4, -0.4},
                          Pt{0.4, -0.4}};
    auto poly = HoleShape::polytope(2, sq);
    CHECK(poly.membership(Pt{0.0, 0.0}));
    CHECK(poly.membership(Pt{0.4, 0.4}));
    CHECK(!poly.membership(Pt{0.41, 0.0}));
    auto pz = poly.z_range(Pt{0.2});
    REQUIRE(pz.has_value());
    CHECK(pz->first == doctest::Approx(-0.4));
    CHECK(pz->second == doctest::Approx(0.4));
    CHECK(poly.support(Pt{1.0, 0.0}) == doctest::Approx(0.4));
    CHECK(poly.shadow_radius() == doctest::Approx(0.4));

    // tetrahedron in 3d
    std::vector<Pt> tet = {Pt{0.5, 0.0, -0.2}, Pt{-0.5, 0.3, -0.2},
                           Pt{-0.1, -0.5, -0.2}, Pt{0.0, 0.0, 0.6}};
    auto tp = HoleShape::polytope(3, tet);
    Pt centroid{};
    for (const auto& v : tet)
        for (int i = 0; i < 3; ++i) centroid[i] += v[i] / 4.0;
    CHECK(tp.membership(centroid));
    CHECK(!tp.membership(Pt{0.9, 0.9, 0.9}));
    CHECK(tp.vertical_extent() == doctest::Approx(0.6));

    CHECK_THROWS_AS(HoleShape::ball(3, 1.5), ValidationError);
    CHECK_THROWS_AS(HoleShape::box(3, Pt{0.9, 0.9, 0.9}), ValidationError);
}

TEST_CASE("membership is the zero sub-level set of signed distance") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unif(-1.2, 1.2);
    std::vector<Pt> tri = {Pt{0.5, -0.1}, Pt{-0.4, 0.45}, Pt{-0.2, -0.5}};
    auto shapes = {HoleShape::ball(2, 0.7), HoleShape::box(2, Pt{0.5, 0.3}),
                   HoleShape::polytope(2, tri)};
    for (const auto& sh : shapes)
        for (int i = 0; i < 500; ++i) {
            Pt y{unif(rng), unif(rng)};
            CHECK(sh.membership(y) == (sh.signed_distance(y) <= 1e-12));
        }
}

TEST_CASE("lattice ranges are half-open") {
    auto r = LatticeRange::over(box1(1.0, 2.0), 0.0625);
    CHECK(r.kmin[0] == 16);
    CHECK(r.kmax[0] == 31);
    CHECK(r.count() == 16);
    auto e = LatticeRange::over(box1(0.5, 0.5), 0.25);
    CHECK(e.count() == 0);
}

namespace {

// Dense-scan reference for hit detection, d = 2 only: sample the shadow at
// high resolution and test hole membership of the lifted point directly.
bool dense_hit(const ConvexSurface& s, const SieveConfig& sv, const HoleShape& hole,
               std::int64_t k1, std::int64_t kd) {
    const int n = 4001;
    double cx = sv.eps * static_cast<double>(k1);
    double cz = sv.eps * static_cast<double>(kd);
    double r = sv.a * hole.shadow_radius();
    for (int i = 0; i < n; ++i) {
        Pt xp{};
        xp[0] = cx - r + 2.0 * r * i / (n - 1);
        Pt local{};
        local[0] = (xp[0] - cx) / sv.a;
        double gv = s.g(xp);
        local[1] = (gv - cz) / sv.a;
        if (hole.membership(local)) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("hit cells: flat chart with exact expectations") {
    Box dom = box1(-1.0, 2.0);
    double eps = 0.25, a = 0.05;
    auto hole = HoleShape::ball(2, 1.0);
    Box q = box1(0.0, 1.0);

    // surface 0.01 below the k2 = 1 plane: within every hole on that row
    auto near_row = ConvexSurface::flat(2, Pt{}, 0.24, dom);
    auto sv = SieveConfig::with_hole_size(eps, a, 2, 1.3);
    auto hits = enumerate_hit_cells(near_row, sv, hole, q);
    REQUIRE(hits.size() == 4);
    for (std::size_t i = 0; i < hits.size(); ++i) {
        CHECK(hits[i].index.k[0] == static_cast<std::int64_t>(i));
        CHECK(hits[i].index.k[1] == 1);
        CHECK(hits[i].witness[1] == doctest::Approx(0.24));
    }

    // surface between rows, farther than a from both: no hits
    auto far_row = ConvexSurface::flat(2, Pt{}, 0.12, dom);
    CHECK(enumerate_hit_cells(far_row, sv, hole, q).empty());
}

TEST_CASE("hit cells: parabola agrees with dense scan and stores witnesses") {
    auto s = ConvexSurface::quadratic(2, {1.0}, Pt{}, 0.0, box1(-4.0, 4.0));
    double eps = std::pow(2.0, -4);
    double a = 0.5 * std::pow(eps, 2.0 / 1.7);
    auto sv = SieveConfig::with_hole_size(eps, a, 2, 1.3);
    auto hole = HoleShape::ball(2, 1.0);
    Box q = box1(0.0, 1.0);

    auto hits = enumerate_hit_cells(s, sv, hole, q);
    CHECK(!hits.empty());
    std::set<std::pair<std::int64_t, std::int64_t>> got;
    for (const auto& h : hits) {
        got.insert({h.index.k[0], h.index.k[1]});
        // witness lies on the surface and inside the hole
        Pt xp{};
        xp[0] = h.witness[0];
        CHECK(std::abs(s.g(xp) - h.witness[1]) <= 1e-9);
        Pt local{};
        local[0] = (h.witness[0] - eps * h.index.k[0]) / a;
        local[1] = (h.witness[1] - eps * h.index.k[1]) / a;
        CHECK(sv.a * hole.signed_distance(local) <= 1e-9);
    }
    // dense reference over the full candidate window
    for (std::int64_t k1 = 0; k1 <= 15; ++k1)
        for (std::int64_t kd = -1; kd <= 9; ++kd) {
            bool ref = dense_hit(s, sv, hole, k1, kd);
            bool lib = got.count({k1, kd}) > 0;
            CHECK(ref == lib);
        }
    // determinism: identical call, identical output
    auto again = enumerate_hit_cells(s, sv, hole, q);
    REQUIRE(again.size() == hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
        CHECK(again[i].index == hits[i].index);
        CHECK(again[i].witness[0] == hits[i].witness[0]);
    }
}

TEST_CASE("hit cells: box hole on a cosh chart") {
    auto s = ConvexSurface::cosh_chart(0.0, box1(-1.5, 1.5));
    double eps = 0.125, a = 0.03;
    auto sv = SieveConfig::with_hole_size(eps, a, 2, 1.3);
    auto hole = HoleShape::box(2, Pt{0.6, 0.6});
    Box q = box1(-1.0, 1.0);
    auto hits = enumerate_hit_cells(s, sv, hole, q);
    CHECK(!hits.empty());
    for (const auto& h : hits) {
        Pt local{};
        local[0] = (h.witness[0] - eps * h.index.k[0]) / a;
        local[1] = (h.witness[1] - eps * h.index.k[1]) / a;
        CHECK(hole.membership(local));
        CHECK(h.index.k[1] >= 8);  // cosh >= 1 so holes sit at eps*k2 >= 1 - a
    }
}
