#include "ccr/retrieval.hpp"

#include <algorithm>
#include <cmath>

namespace ccr {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

RetrievalResult rank_references(std::span<const double> query_global, const InvertedIndex& idx,
                                std::size_t n) {
    if (idx.empty()) {
        throw Error("cannot retrieve from an empty index");
    }
    if (n == 0) {
        throw Error("number of references must be at least 1");
    }
    RetrievalResult result;
    result.ranked.reserve(idx.size());
    for (const auto& img : idx.images()) {
        if (img->global_desc.size() != query_global.size()) {
            throw Error("query global descriptor has dimension " +
                        std::to_string(query_global.size()) + " but image '" + img->image_id +
                        "' has " + std::to_string(img->global_desc.size()));
        }
        result.ranked.push_back({img->image_id, cosine_similarity(query_global, img->global_desc)});
    }
    const auto better = [](const RankedImage& a, const RankedImage& b) {
        return a.similarity != b.similarity ? a.similarity > b.similarity : a.image_id < b.image_id;
    };
    const std::size_t keep = std::min(n, result.ranked.size());
    std::partial_sort(result.ranked.begin(), result.ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                      result.ranked.end(), better);
    result.ranked.resize(keep);
    return result;
}

}  // namespace ccr
