#include <doctest.h>

#include <gmpxx.h>

#include "ccr/geometry.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace ccr;
using Edge = std::pair<std::uint32_t, std::uint32_t>;

namespace {

int sign(const mpq_class& v) { return sgn(v); }

int orient_exact(const Point& a, const Point& b, const Point& c) {
    const mpq_class ax(a.x), ay(a.y), bx(b.x), by(b.y), cx(c.x), cy(c.y);
    return sign((bx - ax) * (cy - ay) - (by - ay) * (cx - ax));
}

int incircle_exact(const Point& a, const Point& b, const Point& c, const Point& d) {
    const mpq_class adx = mpq_class(a.x) - d.x, ady = mpq_class(a.y) - d.y;
    const mpq_class bdx = mpq_class(b.x) - d.x, bdy = mpq_class(b.y) - d.y;
    const mpq_class cdx = mpq_class(c.x) - d.x, cdy = mpq_class(c.y) - d.y;
    const mpq_class al = adx * adx + ady * ady, bl = bdx * bdx + bdy * bdy,
                    cl = cdx * cdx + cdy * cdy;
    return sign(adx * (bdy * cl - bl * cdy) - ady * (bdx * cl - bl * cdx) +
                al * (bdx * cdy - bdy * cdx));
}

std::set<Edge> edge_set(const AdjacencyGraph& g) {
    return {g.edges().begin(), g.edges().end()};
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("orient2d and incircle on simple configurations") {
    CHECK(orient2d({0, 0}, {1, 0}, {0, 1}) == 1);
    CHECK(orient2d({0, 0}, {0, 1}, {1, 0}) == -1);
    CHECK(orient2d({0, 0}, {1, 1}, {2, 2}) == 0);
    CHECK(incircle({0, 0}, {1, 0}, {0, 1}, {0.5, 0.5}) == 1);
    CHECK(incircle({0, 0}, {1, 0}, {0, 1}, {1, 1}) == 0);
    CHECK(incircle({0, 0}, {1, 0}, {0, 1}, {2, 2}) == -1);
}

TEST_CASE("predicates match rational arithmetic on near-degenerate input") {
    Rng rng(5);
    for (int i = 0; i < 3000; ++i) {
        // Points nearly on a line / circle, perturbed in the last few ulps.
        const double t = rng.uniform01();
        const Point a{rng.uniform01(), rng.uniform01()};
        const Point b{a.x + 1e-3, a.y + 2e-3};
        Point c{a.x + t * 1e-3 * 7, a.y + t * 2e-3 * 7};
        c.x = std::nextafter(c.x, rng.uniform01() < 0.5 ? 0.0 : 2.0);
        CHECK(orient2d(a, b, c) == orient_exact(a, b, c));

        const double th = rng.uniform(0, 6.28);
        const Point d{0.5 + 0.5 * std::cos(th), 0.5 + 0.5 * std::sin(th)};
        const Point p{0.5 + 0.5, 0.5}, q{0.5, 0.5 + 0.5}, r{0.5 - 0.5, 0.5};
        CHECK(incircle(p, q, r, d) == incircle_exact(p, q, r, d));
    }
}

TEST_CASE("perturbed incircle never returns zero and is orientation consistent") {
    // Four cocircular points: the unit square.
    std::vector<Point> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    CHECK(incircle(sq[0], sq[1], sq[2], sq[3]) == 0);
    const int s = incircle_perturbed(sq, 0, 1, 2, 3);
    CHECK(s != 0);
    // Same triangle, rotated vertex order, same answer.
    CHECK(incircle_perturbed(sq, 1, 2, 0, 3) == s);
    CHECK(incircle_perturbed(sq, 2, 0, 1, 3) == s);
}

TEST_CASE("single triangle and tiny inputs") {
    std::vector<Point> tri{{0, 0}, {4, 0}, {0, 3}};
    const auto ts = delaunay_triangles(tri);
    REQUIRE(ts.size() == 1);
    CHECK(orient2d(tri[ts[0][0]], tri[ts[0][1]], tri[ts[0][2]]) == 1);
    CHECK(edge_set(delaunay_adjacency(tri)) == std::set<Edge>{{0, 1}, {0, 2}, {1, 2}});

    std::vector<Point> two{{0, 0}, {1, 1}};
    CHECK(edge_set(delaunay_adjacency(two)) == std::set<Edge>{{0, 1}});
    std::vector<Point> one{{3, 3}};
    CHECK(delaunay_adjacency(one).edges().empty());
    CHECK(delaunay_adjacency({}).size() == 0);
}

TEST_CASE("collinear input gives the sorted path") {
    std::vector<Point> line{{3, 3}, {0, 0}, {2, 2}, {1, 1}, {4, 4}};
    CHECK(delaunay_triangles(line).empty());
    CHECK(edge_set(delaunay_adjacency(line)) ==
          std::set<Edge>{{1, 3}, {2, 3}, {0, 2}, {0, 4}});
    std::vector<Point> vertical{{0, 5}, {0, 1}, {0, 3}};
    CHECK(edge_set(delaunay_adjacency(vertical)) == std::set<Edge>{{1, 2}, {0, 2}});
}

TEST_CASE("duplicate and non-finite points are errors") {
    std::vector<Point> dup{{0, 0}, {1, 0}, {0, 0}};
    CHECK_THROWS_AS(delaunay_adjacency(dup), Error);
    std::vector<Point> bad{{0, 0}, {1, 0}, {0, std::nan("")}};
    CHECK_THROWS_AS(delaunay_adjacency(bad), Error);
}

TEST_CASE("random sets match the brute-force triangulation") {
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 3 + rng.uniform_index(28);
        const auto pts = ccr::testing::random_points(rng, n);
        CHECK(delaunay_triangles(pts) == oracle::delaunay_triangles(pts));
        CHECK(edge_set(delaunay_adjacency(pts)) == oracle::delaunay_edges(pts));
    }
}

TEST_CASE("integer grids with many cocircular quadruples match the oracle") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Point> pts;
        const int w = 2 + static_cast<int>(rng.uniform_index(4));
        const int h = 2 + static_cast<int>(rng.uniform_index(4));
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                pts.push_back({static_cast<double>(x), static_cast<double>(y)});
            }
        }
        // Shuffle so that index order differs from sweep order.
        for (std::size_t i = pts.size(); i > 1; --i) {
            std::swap(pts[i - 1], pts[rng.uniform_index(i)]);
        }
        const auto tris = delaunay_triangles(pts);
        CHECK(tris == oracle::delaunay_triangles(pts));
        // Euler: a triangulated convex grid has 2*(w-1)*(h-1) triangles.
        CHECK(tris.size() == static_cast<std::size_t>(2 * (w - 1) * (h - 1)));
    }
}

TEST_CASE("every triangle has a closed empty circumcircle") {
    Rng rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        auto pts = ccr::testing::random_points(rng, 40);
        for (auto& p : pts) {
            p = {std::round(p.x / 10), std::round(p.y / 10)};  // force cocircularity
        }
        std::sort(pts.begin(), pts.end(),
                  [](const Point& a, const Point& b) { return std::tie(a.x, a.y) < std::tie(b.x, b.y); });
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        for (const auto& t : delaunay_triangles(pts)) {
            for (std::size_t l = 0; l < pts.size(); ++l) {
                CHECK(incircle(pts[t[0]], pts[t[1]], pts[t[2]], pts[l]) <= 0);
            }
        }
    }
}

TEST_CASE("adjacency is symmetric and sorted") {
    Rng rng(4);
    const auto pts = ccr::testing::random_points(rng, 25);
    const auto g = delaunay_adjacency(pts);
    for (std::uint32_t i = 0; i < g.size(); ++i) {
        const auto nb = g.neighbors(i);
        CHECK(std::is_sorted(nb.begin(), nb.end()));
        for (auto j : nb) {
            CHECK(g.adjacent(j, i));
            const auto back = g.neighbors(j);
            CHECK(std::find(back.begin(), back.end(), i) != back.end());
        }
    }
    CHECK_THROWS_AS(AdjacencyGraph(3, {{1, 1}}), Error);
    CHECK_THROWS_AS(AdjacencyGraph(3, {{1, 3}}), Error);
    CHECK(AdjacencyGraph(3, {{2, 1}, {1, 2}}).edges() == std::vector<Edge>{{1, 2}});
}

}  // TEST_SUITE
