#pragma once

#include <span>
#include <string>
#include <vector>

#include "ccr/index.hpp"

namespace ccr {

struct RankedImage {
    std::string image_id;
    double similarity = 0.0;

    friend bool operator==(const RankedImage&, const RankedImage&) = default;
};

/// Candidate references, similarity descending, ties by ascending image_id.
struct RetrievalResult {
    std::vector<RankedImage> ranked;
};

/// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Top-n indexed images by cosine similarity of global descriptors.
/// Throws Error on an empty index, n == 0 or a dimension mismatch.
RetrievalResult rank_references(std::span<const double> query_global, const InvertedIndex& idx,
                                std::size_t n = 40);

}  // namespace ccr
