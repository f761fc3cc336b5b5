#pragma once

#include <filesystem>
#include <memory>
#include <iosfwd>
#include <span>
#include <vector>

#include "ccr/common.hpp"

namespace ccr {

namespace detail {
class AxisSearch;
}

inline constexpr int kVocabularyFormatVersion = 1;

struct Quantized {
    WordId word = 0;
    double dist = 0.0;
};

/// Visual vocabulary: k exemplar descriptors, word id = list position.
class Vocabulary {
public:
    Vocabulary(std::size_t dim, std::vector<double> exemplars_flat);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return data_.size() / dim_; }

    /// Throws Error when w >= size().
    std::span<const double> exemplar(WordId w) const;

    /// Nearest exemplar by L2, ties toward the smallest word id.
    Quantized quantize(std::span<const double> d) const;

    const std::vector<double>& flat() const { return data_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
        return a.dim_ == b.dim_ && a.data_ == b.data_;
    }

private:
    std::span<const double> row(std::size_t w) const {
        return {data_.data() + w * dim_, dim_};
    }

    std::size_t dim_;
    std::vector<double> data_;
    std::shared_ptr<const detail::AxisSearch> search_;
};

struct KMeansParams {
    std::size_t k = 4096;
    std::uint64_t seed = 0;
    std::size_t max_iters = 25;
    double rel_tol = 1e-4;
    std::size_t threads = 1;
};

struct KMeansReport {
    /// distortion[0] is the k-means++ seeding; one more entry per Lloyd round.
    std::vector<double> distortion;
    std::size_t iterations = 0;
};

/// Lloyd k-means with k-means++ seeding. Exemplars are returned ordered by
/// the smallest training index assigned to each cluster, so the result is a
/// pure function of (training order, k, seed) and independent of `threads`.
Vocabulary build_vocabulary(std::span<const std::vector<double>> training,
                            const KMeansParams& params, KMeansReport* report = nullptr);

Vocabulary parse_vocabulary(std::istream& in, const std::string& source);
void format_vocabulary(const Vocabulary& vocab, std::ostream& out);
Vocabulary read_vocabulary(const std::filesystem::path& path);
void write_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);

}  // namespace ccr
