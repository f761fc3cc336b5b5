#include "ccr/vocabulary.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>

#include "ccr/random.hpp"
#include "axis_search.hpp"
#include "text_reader.hpp"

namespace ccr {

Vocabulary::Vocabulary(std::size_t dim, std::vector<double> exemplars_flat)
    : dim_(dim), data_(std::move(exemplars_flat)) {
    if (dim_ == 0) {
        throw Error("vocabulary dimension must be at least 1");
    }
    if (data_.empty() || data_.size() % dim_ != 0) {
        throw Error("vocabulary needs at least one exemplar of dimension " +
                    std::to_string(dim_));
    }
    if (!all_finite(data_)) {
        throw Error("vocabulary exemplars must be finite");
    }
    search_ = std::make_shared<const detail::AxisSearch>(data_.data(), size(), dim_);
}

std::span<const double> Vocabulary::exemplar(WordId w) const {
    if (w >= size()) {
        throw Error("word id " + std::to_string(w) + " out of range (vocabulary has " +
                    std::to_string(size()) + " words)");
    }
    return row(w);
}

Quantized Vocabulary::quantize(std::span<const double> d) const {
    if (d.size() != dim_) {
        throw Error("descriptor dimension " + std::to_string(d.size()) +
                    " does not match vocabulary dimension " + std::to_string(dim_));
    }
    const auto [w, d2] = search_->nearest(d, data_.data(), size());
    return {static_cast<WordId>(w), std::sqrt(d2)};
}

namespace {

struct Matrix {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<double> data;

    std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
    std::span<double> row(std::size_t i) { return {data.data() + i * dim, dim}; }
};

// Margin that keeps triangle-inequality skips safe under rounding.
constexpr double kSkipMargin = 1.0 + 1e-9;

double assign(const Matrix& points, const Matrix& centers, std::vector<std::size_t>& labels,
              std::vector<double>& dist2, std::size_t threads) {
    // separation[j]: squared distance from center j to its nearest other center.
    std::vector<double> separation(centers.rows, std::numeric_limits<double>::infinity());
    parallel_for(centers.rows, threads, [&](std::size_t j) {
        double best = separation[j];
        for (std::size_t o = 0; o < centers.rows; ++o) {
            if (o != j) {
                best = std::min(best, squared_l2_bounded(centers.row(j), centers.row(o), best));
            }
        }
        separation[j] = best;
    });
    const detail::AxisSearch search(centers.data.data(), centers.rows, centers.dim);
    parallel_for(points.rows, threads, [&](std::size_t i) {
        const double own = squared_l2(points.row(i), centers.row(labels[i]));
        if (4.0 * own * kSkipMargin < separation[labels[i]]) {
            dist2[i] = own;  // strictly nearer to its own center than to any other
            return;
        }
        const auto [j, d2] = search.nearest(points.row(i), centers.data.data(), labels[i]);
        labels[i] = j;
        dist2[i] = d2;
    });
    return std::accumulate(dist2.begin(), dist2.end(), 0.0);
}

// k-means++ seeding. `owner` receives each point's nearest seed.
Matrix seed_plus_plus(const Matrix& points, std::size_t k, Rng& rng,
                      std::vector<std::size_t>& owner) {
    Matrix centers{k, points.dim, std::vector<double>(k * points.dim)};
    const std::size_t n = points.rows;
    auto take = [&](std::size_t c, std::size_t i) {
        std::copy_n(points.row(i).begin(), points.dim, centers.row(c).begin());
    };

    take(0, rng.uniform_index(n));
    std::vector<double> min_d2(n);
    std::vector<double> seed_d2(k);
    owner.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        min_d2[i] = squared_l2(points.row(i), centers.row(0));
    }
    for (std::size_t c = 1; c < k; ++c) {
        const double total = std::accumulate(min_d2.begin(), min_d2.end(), 0.0);
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = rng.uniform01() * total;
            double cum = 0.0;
            std::size_t last_positive = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (min_d2[i] > 0.0) {
                    last_positive = i;
                }
                cum += min_d2[i];
                if (cum > target && min_d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {
                pick = last_positive;
            }
        } else {
            // Every point already coincides with a center.
            pick = rng.uniform_index(n);
        }
        take(c, pick);
        for (std::size_t j = 0; j < c; ++j) {
            seed_d2[j] = squared_l2(centers.row(c), centers.row(j));
        }
        for (std::size_t i = 0; i < n; ++i) {
            // |x - new| >= |new - own| - |x - own| >= |x - own| when the
            // seeds are at least twice as far apart.
            if (seed_d2[owner[i]] > 4.0 * min_d2[i] * kSkipMargin) {
                continue;
            }
            const double d2 = squared_l2_bounded(points.row(i), centers.row(c), min_d2[i]);
            if (d2 < min_d2[i]) {
                min_d2[i] = d2;
                owner[i] = c;
            }
        }
    }
    return centers;
}

}  // namespace

Vocabulary build_vocabulary(std::span<const std::vector<double>> training,
                            const KMeansParams& params, KMeansReport* report) {
    const std::size_t k = params.k;
    if (k == 0) {
        throw Error("vocabulary size k must be at least 1");
    }
    if (training.size() < k) {
        throw Error("need at least k=" + std::to_string(k) + " training descriptors, got " +
                    std::to_string(training.size()));
    }
    const std::size_t dim = training.front().size();
    if (dim == 0) {
        throw Error("training descriptors must have dimension at least 1");
    }
    Matrix points{training.size(), dim, {}};
    points.data.reserve(training.size() * dim);
    for (const auto& d : training) {
        if (d.size() != dim) {
            throw Error("training descriptors have mixed dimensions (" + std::to_string(dim) +
                        " and " + std::to_string(d.size()) + ")");
        }
        if (!all_finite(d)) {
            throw Error("training descriptor contains a non-finite value");
        }
        points.data.insert(points.data.end(), d.begin(), d.end());
    }
    const std::size_t n = points.rows;

    Rng rng(params.seed);
    std::vector<std::size_t> labels;
    Matrix centers = seed_plus_plus(points, k, rng, labels);

    std::vector<double> dist2(n, 0.0);
    double distortion = assign(points, centers, labels, dist2, params.threads);
    KMeansReport local;
    local.distortion.push_back(distortion);

    std::vector<double> sums(k * dim);
    std::vector<std::size_t> counts(k);
    for (std::size_t iter = 0; iter < params.max_iters && distortion > 0.0; ++iter) {
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = points.row(i);
            double* s = sums.data() + labels[i] * dim;
            for (std::size_t d = 0; d < dim; ++d) {
                s[d] += x[d];
            }
            ++counts[labels[i]];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] == 0) {
                continue;
            }
            auto c = centers.row(j);
            const double inv = static_cast<double>(counts[j]);
            for (std::size_t d = 0; d < dim; ++d) {
                c[d] = sums[j * dim + d] / inv;
            }
        }
        // Reseed each empty cluster at the point farthest from its exemplar.
        if (std::find(counts.begin(), counts.end(), 0) != counts.end()) {
            for (std::size_t i = 0; i < n; ++i) {
                dist2[i] = squared_l2(points.row(i), centers.row(labels[i]));
            }
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] != 0) {
                continue;
            }
            std::size_t far = 0;
            for (std::size_t i = 1; i < n; ++i) {
                if (dist2[i] > dist2[far]) {
                    far = i;
                }
            }
            std::copy_n(points.row(far).begin(), dim, centers.row(j).begin());
            dist2[far] = 0.0;
            labels[far] = j;
        }

        const double next = assign(points, centers, labels, dist2, params.threads);
        local.distortion.push_back(next);
        ++local.iterations;
        const bool converged = distortion - next <= params.rel_tol * distortion;
        distortion = next;
        if (converged) {
            break;
        }
    }

    // Canonical order: by the first training index each cluster owns.
    std::vector<std::size_t> first(k, n);
    for (std::size_t i = 0; i < n; ++i) {
        first[labels[i]] = std::min(first[labels[i]], i);
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return first[a] < first[b]; });
    std::vector<double> flat;
    flat.reserve(k * dim);
    for (std::size_t j : order) {
        const auto c = centers.row(j);
        flat.insert(flat.end(), c.begin(), c.end());
    }
    if (report != nullptr) {
        *report = std::move(local);
    }
    return Vocabulary(dim, std::move(flat));
}

Vocabulary parse_vocabulary(std::istream& in, const std::string& source) {
    detail::LineReader r(in, source);
    detail::expect_magic(r, "CCRVOC", kVocabularyFormatVersion);
    r.expect_record("dim", 1);
    const auto dim = r.count(1);
    if (dim == 0) {
        r.fail("dim must be at least 1");
    }
    r.expect_record("count", 1);
    const auto count = r.count(1);
    if (count == 0) {
        r.fail("count must be at least 1");
    }
    std::vector<double> flat;
    flat.reserve(dim * count);
    for (std::size_t w = 0; w < count; ++w) {
        r.expect_record("w", dim);
        for (std::size_t d = 0; d < dim; ++d) {
            flat.push_back(r.finite_number(d + 1));
        }
    }
    if (r.next_nonblank()) {
        r.fail("trailing content after exemplars");
    }
    return Vocabulary(dim, std::move(flat));
}

void format_vocabulary(const Vocabulary& vocab, std::ostream& out) {
    out << "CCRVOC " << kVocabularyFormatVersion << '\n';
    out << "dim " << vocab.dim() << '\n';
    out << "count " << vocab.size() << '\n';
    for (std::size_t w = 0; w < vocab.size(); ++w) {
        out << 'w';
        detail::write_numbers(out, vocab.exemplar(static_cast<WordId>(w)));
        out << '\n';
    }
}

Vocabulary read_vocabulary(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return parse_vocabulary(in, path.string());
}

void write_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
    std::ostringstream buf;
    format_vocabulary(vocab, buf);
    detail::write_file(path, [&](std::ostream& out) { out << buf.str(); });
}

}  // namespace ccr
