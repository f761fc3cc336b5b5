#include "ccr/geometry.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cfloat>
#include <numeric>
#include <unordered_map>

namespace ccr {

namespace {

// Static error bounds for the floating-point filters (Shewchuk 1997); when
// the filter cannot certify the sign the determinant is evaluated exactly.
constexpr double kEps = DBL_EPSILON / 2.0;
constexpr double kOrientBound = (3.0 + 16.0 * kEps) * kEps;
constexpr double kIncircleBound = (10.0 + 96.0 * kEps) * kEps;
// Below this magnitude products may be subnormal and the bounds do not hold.
constexpr double kTinyMagnitude = DBL_MIN * 0x1.0p+64;

int sign_of(const mpq_class& v) { return sgn(v); }

int orient2d_exact(const Point& a, const Point& b, const Point& c) {
    const mpq_class ax(a.x), ay(a.y), bx(b.x), by(b.y), cx(c.x), cy(c.y);
    return sign_of((ax - cx) * (by - cy) - (ay - cy) * (bx - cx));
}

int incircle_exact(const Point& a, const Point& b, const Point& c, const Point& d) {
    const mpq_class dx(d.x), dy(d.y);
    const mpq_class adx = mpq_class(a.x) - dx, ady = mpq_class(a.y) - dy;
    const mpq_class bdx = mpq_class(b.x) - dx, bdy = mpq_class(b.y) - dy;
    const mpq_class cdx = mpq_class(c.x) - dx, cdy = mpq_class(c.y) - dy;
    const mpq_class alift = adx * adx + ady * ady;
    const mpq_class blift = bdx * bdx + bdy * bdy;
    const mpq_class clift = cdx * cdx + cdy * cdy;
    const mpq_class det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                          clift * (adx * bdy - bdx * ady);
    return sign_of(det);
}

}  // namespace

int orient2d(const Point& a, const Point& b, const Point& c) {
    const double detleft = (a.x - c.x) * (b.y - c.y);
    const double detright = (a.y - c.y) * (b.x - c.x);
    const double det = detleft - detright;
    const double detsum = std::abs(detleft) + std::abs(detright);
    if (std::isfinite(detsum) && detsum > kTinyMagnitude &&
        std::abs(det) > kOrientBound * detsum) {
        return det > 0.0 ? 1 : -1;
    }
    return orient2d_exact(a, b, c);
}

int incircle(const Point& a, const Point& b, const Point& c, const Point& d) {
    const double adx = a.x - d.x, ady = a.y - d.y;
    const double bdx = b.x - d.x, bdy = b.y - d.y;
    const double cdx = c.x - d.x, cdy = c.y - d.y;

    const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
    const double cdxady = cdx * ady, adxcdy = adx * cdy;
    const double adxbdy = adx * bdy, bdxady = bdx * ady;
    const double alift = adx * adx + ady * ady;
    const double blift = bdx * bdx + bdy * bdy;
    const double clift = cdx * cdx + cdy * cdy;

    const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) +
                       clift * (adxbdy - bdxady);
    const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                             (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                             (std::abs(adxbdy) + std::abs(bdxady)) * clift;
    if (std::isfinite(permanent) && permanent > kTinyMagnitude &&
        std::abs(det) > kIncircleBound * permanent) {
        return det > 0.0 ? 1 : -1;
    }
    return incircle_exact(a, b, c, d);
}

int incircle_perturbed(std::span<const Point> pts, std::uint32_t a, std::uint32_t b,
                       std::uint32_t c, std::uint32_t d) {
    const int exact = incircle(pts[a], pts[b], pts[c], pts[d]);
    if (exact != 0) {
        return exact;
    }
    // Coefficient of eps_p in the lifted 4x4 determinant, per row.
    struct Term {
        std::uint32_t index;
        int sign;
    };
    std::array<Term, 4> terms{{
        {a, orient2d(pts[b], pts[c], pts[d])},
        {b, -orient2d(pts[a], pts[c], pts[d])},
        {c, orient2d(pts[a], pts[b], pts[d])},
        {d, -orient2d(pts[a], pts[b], pts[c])},
    }};
    std::sort(terms.begin(), terms.end(),
              [](const Term& l, const Term& r) { return l.index < r.index; });
    for (const auto& t : terms) {
        if (t.sign != 0) {
            return t.sign;
        }
    }
    return 0;
}

AdjacencyGraph::AdjacencyGraph(std::size_t n,
                               std::vector<std::pair<std::uint32_t, std::uint32_t>> edges)
    : n_(n), edges_(std::move(edges)) {
    for (auto& [i, j] : edges_) {
        if (i == j) {
            throw Error("adjacency graph cannot contain self-loop at " + std::to_string(i));
        }
        if (i >= n_ || j >= n_) {
            throw Error("adjacency edge (" + std::to_string(i) + ", " + std::to_string(j) +
                        ") out of range for " + std::to_string(n_) + " nodes");
        }
        if (i > j) {
            std::swap(i, j);
        }
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

    std::vector<std::size_t> degree(n_, 0);
    for (const auto& [i, j] : edges_) {
        ++degree[i];
        ++degree[j];
    }
    offset_.assign(n_ + 1, 0);
    for (std::size_t i = 0; i < n_; ++i) {
        offset_[i + 1] = offset_[i] + degree[i];
    }
    nbr_.resize(offset_[n_]);
    std::vector<std::size_t> fill(offset_.begin(), offset_.end() - 1);
    for (const auto& [i, j] : edges_) {
        nbr_[fill[i]++] = j;
        nbr_[fill[j]++] = i;
    }
    for (std::size_t i = 0; i < n_; ++i) {
        std::sort(nbr_.begin() + static_cast<std::ptrdiff_t>(offset_[i]),
                  nbr_.begin() + static_cast<std::ptrdiff_t>(offset_[i + 1]));
    }
}

bool AdjacencyGraph::adjacent(std::uint32_t i, std::uint32_t j) const {
    if (i >= n_ || j >= n_) {
        return false;
    }
    const auto nb = neighbors(i);
    return std::binary_search(nb.begin(), nb.end(), j);
}

namespace {

std::vector<std::uint32_t> sorted_order(std::span<const Point> points) {
    for (const auto& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw Error("triangulation input contains a non-finite point");
        }
    }
    std::vector<std::uint32_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::uint32_t l, std::uint32_t r) {
        const auto& a = points[l];
        const auto& b = points[r];
        return a.x != b.x ? a.x < b.x : (a.y != b.y ? a.y < b.y : l < r);
    });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (points[order[i]] == points[order[i - 1]]) {
            throw Error("duplicate points " + std::to_string(order[i - 1]) + " and " +
                        std::to_string(order[i]) + " at (" + format_double(points[order[i]].x) +
                        ", " + format_double(points[order[i]].y) + ")");
        }
    }
    return order;
}

// Triangle soup with an undirected edge -> incident triangles map.
class Mesh {
public:
    explicit Mesh(std::span<const Point> pts) : pts_(pts) {}

    void add(const Triangle& t) {
        std::uint32_t id;
        if (!free_.empty()) {
            id = free_.back();
            free_.pop_back();
            tris_[id] = t;
        } else {
            id = static_cast<std::uint32_t>(tris_.size());
            tris_.push_back(t);
        }
        for (int e = 0; e < 3; ++e) {
            auto& slot = edges_[key(t[e], t[(e + 1) % 3])];
            slot.push_back(id);
        }
    }

    void remove(std::uint32_t id) {
        const Triangle t = tris_[id];
        for (int e = 0; e < 3; ++e) {
            const auto k = key(t[e], t[(e + 1) % 3]);
            auto& slot = edges_[k];
            slot.erase(std::find(slot.begin(), slot.end(), id));
            if (slot.empty()) {
                edges_.erase(k);
            }
        }
        free_.push_back(id);
    }

    /// Lawson flips until every interior edge is locally Delaunay.
    void legalize() {
        std::vector<std::pair<std::uint32_t, std::uint32_t>> stack;
        for (const auto& [k, slot] : edges_) {
            if (slot.size() == 2) {
                stack.push_back(unkey(k));
            }
        }
        // Deterministic processing order regardless of hash layout.
        std::sort(stack.begin(), stack.end(), std::greater<>());
        while (!stack.empty()) {
            const auto [u, v] = stack.back();
            stack.pop_back();
            const auto it = edges_.find(key(u, v));
            if (it == edges_.end() || it->second.size() != 2) {
                continue;
            }
            const std::uint32_t t1 = it->second[0];
            const std::uint32_t t2 = it->second[1];
            // Rotate t1 to (a, b, c) with edge (a, b); t2 is then (b, a, d).
            const Triangle& tri1 = tris_[t1];
            int r = 0;
            while (!((tri1[r] == u && tri1[(r + 1) % 3] == v) ||
                     (tri1[r] == v && tri1[(r + 1) % 3] == u))) {
                ++r;
            }
            const std::uint32_t a = tri1[r], b = tri1[(r + 1) % 3], c = tri1[(r + 2) % 3];
            const Triangle& tri2 = tris_[t2];
            std::uint32_t d = tri2[0];
            for (std::uint32_t x : tri2) {
                if (x != a && x != b) {
                    d = x;
                }
            }
            if (incircle_perturbed(pts_, a, b, c, d) > 0) {
                remove(t1);
                remove(t2);
                add({a, d, c});
                add({d, b, c});
                stack.push_back({a, d});
                stack.push_back({d, b});
                stack.push_back({b, c});
                stack.push_back({c, a});
            }
        }
    }

    std::vector<Triangle> triangles() const {
        std::vector<bool> dead(tris_.size(), false);
        for (auto id : free_) {
            dead[id] = true;
        }
        std::vector<Triangle> out;
        for (std::size_t i = 0; i < tris_.size(); ++i) {
            if (!dead[i]) {
                out.push_back(canonical(tris_[i]));
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    static std::uint64_t key(std::uint32_t i, std::uint32_t j) {
        if (i > j) {
            std::swap(i, j);
        }
        return (static_cast<std::uint64_t>(i) << 32) | j;
    }
    static std::pair<std::uint32_t, std::uint32_t> unkey(std::uint64_t k) {
        return {static_cast<std::uint32_t>(k >> 32), static_cast<std::uint32_t>(k)};
    }
    // Rotation that starts at the smallest index, orientation preserved.
    static Triangle canonical(const Triangle& t) {
        const auto m = std::min_element(t.begin(), t.end()) - t.begin();
        return {t[m], t[(m + 1) % 3], t[(m + 2) % 3]};
    }

    std::span<const Point> pts_;
    std::vector<Triangle> tris_;
    std::vector<std::uint32_t> free_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> edges_;
};

}  // namespace

std::vector<Triangle> delaunay_triangles(std::span<const Point> points) {
    const auto order = sorted_order(points);
    const std::size_t n = order.size();
    if (n < 3) {
        return {};
    }
    // Points before `m` (in sweep order) are collinear with the first two.
    std::size_t m = 2;
    while (m < n && orient2d(points[order[0]], points[order[1]], points[order[m]]) == 0) {
        ++m;
    }
    if (m == n) {
        return {};
    }

    Mesh mesh(points);
    const std::uint32_t apex = order[m];
    std::vector<std::uint32_t> hull;
    const bool left = orient2d(points[order[0]], points[order[m - 1]], points[apex]) > 0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
        if (left) {
            mesh.add({order[i], order[i + 1], apex});
        } else {
            mesh.add({order[i + 1], order[i], apex});
        }
    }
    if (left) {
        hull.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
        hull.push_back(apex);
    } else {
        hull.push_back(order[0]);
        hull.push_back(apex);
        for (std::size_t i = m - 1; i >= 1; --i) {
            hull.push_back(order[i]);
        }
    }

    // Sweep the remaining points; each lies strictly outside the current hull.
    std::vector<char> visible;
    for (std::size_t s = m + 1; s < n; ++s) {
        const std::uint32_t p = order[s];
        const std::size_t h = hull.size();
        visible.assign(h, 0);
        for (std::size_t i = 0; i < h; ++i) {
            const std::uint32_t u = hull[i], v = hull[(i + 1) % h];
            if (orient2d(points[u], points[v], points[p]) < 0) {
                visible[i] = 1;
                mesh.add({v, u, p});
            }
        }
        // The visible edges form one cyclic run [first, last].
        std::size_t first = 0;
        while (!(visible[first] && !visible[(first + h - 1) % h])) {
            ++first;
        }
        std::size_t last = first;
        while (visible[(last + 1) % h]) {
            last = (last + 1) % h;
        }
        std::vector<std::uint32_t> next;
        next.reserve(h + 1);
        for (std::size_t i = (last + 1) % h;; i = (i + 1) % h) {
            next.push_back(hull[i]);
            if (i == first) {
                break;
            }
        }
        next.push_back(p);
        hull = std::move(next);
    }

    mesh.legalize();
    return mesh.triangles();
}

AdjacencyGraph delaunay_adjacency(std::span<const Point> points) {
    const std::size_t n = points.size();
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    if (n <= 2) {
        sorted_order(points);
        if (n == 2) {
            edges.emplace_back(0, 1);
        }
        return AdjacencyGraph(n, std::move(edges));
    }
    const auto tris = delaunay_triangles(points);
    if (tris.empty()) {
        // All collinear: chain the points along the line.
        const auto order = sorted_order(points);
        for (std::size_t i = 1; i < n; ++i) {
            edges.emplace_back(order[i - 1], order[i]);
        }
    } else {
        for (const auto& t : tris) {
            edges.emplace_back(t[0], t[1]);
            edges.emplace_back(t[1], t[2]);
            edges.emplace_back(t[2], t[0]);
        }
    }
    return AdjacencyGraph(n, std::move(edges));
}

}  // namespace ccr
