#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ccr {

inline constexpr std::string_view kEngineVersion = "1.0.0";

/// Raised for every data-level failure (malformed files, violated
/// preconditions, dimension mismatches). The CLI maps it to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using WordId = std::uint32_t;
using SuperpixelId = std::uint32_t;

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned box with inclusive bounds.
struct Box {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    bool contains(const Point& p) const {
        return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
    }
    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }

    friend bool operator==(const Box&, const Box&) = default;
};

inline double squared_l2(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

inline double l2(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_l2(a, b));
}

/// Squared L2 that gives up once the partial sum reaches `bound`. The
/// returned value is exact whenever it is below `bound`.
inline double squared_l2_bounded(std::span<const double> a, std::span<const double> b,
                                 double bound) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
        if (acc >= bound) {
            return acc;
        }
    }
    return acc;
}

/// Returns a copy scaled to unit L2 norm; zero vectors are returned as-is.
std::vector<double> l2_normalized(std::span<const double> v);

bool all_finite(std::span<const double> v);

/// Shortest decimal representation that parses back to the identical double.
std::string format_double(double v);

/// Locale-independent parse of a complete token; throws Error on failure.
double parse_double(std::string_view token);
std::uint64_t parse_uint(std::string_view token);

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);

/// Runs fn(i) for i in [0, n) on up to `threads` workers using contiguous
/// static chunks. fn must only write to slots owned by i.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace ccr
