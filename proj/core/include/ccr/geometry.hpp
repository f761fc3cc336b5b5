#pragma once

// Exact 2-D predicates and the Delaunay adjacency over superpixel centers.
//
// Cocircular ties are resolved by symbolic perturbation: point i is lifted
// onto the paraboloid at |p_i|^2 + eps_i with eps_0 >> eps_1 >> ..., so the
// smallest point index dominates. Under this rule every input without four
// collinear points in one test has a unique triangulation, which is also a
// valid (closed empty-circumcircle) Delaunay triangulation of the unperturbed
// points.

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "ccr/common.hpp"

namespace ccr {

/// Sign of det[b-a, c-a]: +1 when a, b, c turn counter-clockwise.
int orient2d(const Point& a, const Point& b, const Point& c);

/// +1 when d lies strictly inside the circle through a, b, c (given in
/// counter-clockwise order), -1 strictly outside, 0 on the circle.
int incircle(const Point& a, const Point& b, const Point& c, const Point& d);

/// incircle() with the index-ordered symbolic perturbation applied; never 0
/// when a, b, c are not collinear.
int incircle_perturbed(std::span<const Point> pts, std::uint32_t a, std::uint32_t b,
                       std::uint32_t c, std::uint32_t d);

/// Undirected simple graph over n nodes.
class AdjacencyGraph {
public:
    AdjacencyGraph() = default;
    /// Edges are normalized to (min, max), sorted and deduplicated. Throws
    /// Error on self-loops or out-of-range endpoints.
    AdjacencyGraph(std::size_t n, std::vector<std::pair<std::uint32_t, std::uint32_t>> edges);

    std::size_t size() const { return n_; }
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges() const { return edges_; }
    std::span<const std::uint32_t> neighbors(std::uint32_t i) const {
        return {nbr_.data() + offset_[i], offset_[i + 1] - offset_[i]};
    }
    bool adjacent(std::uint32_t i, std::uint32_t j) const;

    friend bool operator==(const AdjacencyGraph& a, const AdjacencyGraph& b) {
        return a.n_ == b.n_ && a.edges_ == b.edges_;
    }

private:
    std::size_t n_ = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges_;
    std::vector<std::size_t> offset_{0};
    std::vector<std::uint32_t> nbr_;
};

using Triangle = std::array<std::uint32_t, 3>;

/// Delaunay triangles (counter-clockwise) under the perturbation rule.
/// Empty when fewer than three points or all points are collinear. Throws
/// Error on duplicate or non-finite points.
std::vector<Triangle> delaunay_triangles(std::span<const Point> points);

/// Edge set of the Delaunay triangulation. n <= 2 gives all pairs; fully
/// collinear input gives the path through the points in (x, y) order.
AdjacencyGraph delaunay_adjacency(std::span<const Point> points);

}  // namespace ccr
