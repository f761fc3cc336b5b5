#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "ccr/common.hpp"

namespace ccr::detail {

// Exact nearest-row search over a row-major matrix. Rows are sorted by their
// highest-variance coordinate; the squared gap on that coordinate is one term
// of the distance, so the outward walk stops once it exceeds the incumbent.
// Ties resolve to the smallest row index.
class AxisSearch {
public:
    AxisSearch() = default;
    AxisSearch(const double* data, std::size_t rows, std::size_t dim) { build(data, rows, dim); }

    void build(const double* data, std::size_t rows, std::size_t dim) {
        axis_ = 0;
        double best_var = -1.0;
        for (std::size_t a = 0; a < dim; ++a) {
            double mean = 0.0;
            for (std::size_t r = 0; r < rows; ++r) {
                mean += data[r * dim + a];
            }
            mean /= static_cast<double>(rows);
            double var = 0.0;
            for (std::size_t r = 0; r < rows; ++r) {
                const double d = data[r * dim + a] - mean;
                var += d * d;
            }
            if (var > best_var) {
                best_var = var;
                axis_ = a;
            }
        }
        ids_.resize(rows);
        std::iota(ids_.begin(), ids_.end(), std::size_t{0});
        std::sort(ids_.begin(), ids_.end(), [&](std::size_t a, std::size_t b) {
            const double ka = data[a * dim + axis_], kb = data[b * dim + axis_];
            return ka != kb ? ka < kb : a < b;
        });
        keys_.resize(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            keys_[i] = data[ids_[i] * dim + axis_];
        }
    }

    /// Nearest row to x and its squared distance. `hint` (a row index, or
    /// rows for none) seeds the incumbent and does not affect the result.
    std::pair<std::size_t, double> nearest(std::span<const double> x, const double* data,
                                           std::size_t hint) const {
        const std::size_t dim = x.size(), k = keys_.size();
        auto row = [&](std::size_t r) { return std::span<const double>(data + r * dim, dim); };
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_r = k;
        if (hint < k) {
            best = squared_l2(x, row(hint));
            best_r = hint;
        }
        const double key = x[axis_];
        std::size_t hi = static_cast<std::size_t>(
            std::lower_bound(keys_.begin(), keys_.end(), key) - keys_.begin());
        std::size_t lo = hi;
        const double inf = std::numeric_limits<double>::infinity();
        while (true) {
            const double gap_lo = lo > 0 ? key - keys_[lo - 1] : inf;
            const double gap_hi = hi < k ? keys_[hi] - key : inf;
            const bool lo_open = lo > 0 && gap_lo * gap_lo <= best;
            const bool hi_open = hi < k && gap_hi * gap_hi <= best;
            if (!lo_open && !hi_open) {
                break;
            }
            const std::size_t r = (hi_open && (!lo_open || gap_hi <= gap_lo)) ? ids_[hi++]
                                                                              : ids_[--lo];
            if (r == best_r) {
                continue;
            }
            double d2 = squared_l2_bounded(x, row(r), best);
            if (d2 == best && r < best_r) {
                d2 = squared_l2(x, row(r));
            }
            if (d2 < best || (d2 == best && r < best_r)) {
                best = d2;
                best_r = r;
            }
        }
        return {best_r, best};
    }

    friend bool operator==(const AxisSearch&, const AxisSearch&) = default;

private:
    std::size_t axis_ = 0;
    std::vector<double> keys_;
    std::vector<std::size_t> ids_;
};

}  // namespace ccr::detail
