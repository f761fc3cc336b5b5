#pragma once

// Per-feature anomalyness of a query against several retrieved references:
// minimum L2 over references of the minimum L2 over each reference's
// candidates. Candidates are raw descriptors (DM) or the exemplars of the
// reference's distinct visual words (CCR, asymmetric distance). Local
// geometry (LG) and visibility analysis (VA) restrict the candidates.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccr/descriptors.hpp"
#include "ccr/index.hpp"

namespace ccr {

enum class Mode { kDirect, kCompressed };

struct DetectOptions {
    Mode mode = Mode::kCompressed;
    bool lg = false;
    bool va = false;
    double ratio = 0.8;
    double delta = 0.1;
    std::size_t k_max = 10;
    std::size_t n_refs = 40;
    bool normalize_descriptors = false;
    std::size_t threads = 1;

    /// Throws Error unless 0 < ratio < 1, 0 <= delta < 0.5, k_max >= 1,
    /// n_refs >= 1 and va implies lg.
    void validate() const;
    /// Row label in the style "CCR+LG+VA".
    std::string label() const;
};

/// Parses "dm" / "ccr" (case-insensitive).
Mode parse_mode(std::string_view s);

/// One neighbour of a query descriptor. `unit` is the word id in CCR mode
/// and the reference feature index in DM mode.
struct Match {
    std::uint32_t unit = 0;
    double dist = 0.0;

    friend bool operator==(const Match&, const Match&) = default;
};
using MatchList = std::vector<Match>;

struct StrongMatch {
    std::size_t k = 0;
    std::vector<std::uint32_t> units;  // first k entries of the match list
};

/// Candidate set of one reference image as seen by the scorer. Units are
/// kept in ascending label order; each owns one or more occurrences.
class ReferenceView {
public:
    static ReferenceView from_index(const IndexedImage& img, const Vocabulary& vocab,
                                    bool normalize = false);
    static ReferenceView from_features(const FeatureSet& fs, const AdjacencyGraph& adjacency,
                                       bool normalize = false);

    const std::string& image_id() const { return image_id_; }
    std::size_t dim() const { return dim_; }
    std::size_t unit_count() const { return labels_.size(); }
    std::uint32_t label(std::size_t u) const { return labels_[u]; }
    std::span<const double> vector(std::size_t u) const { return {vecs_.data() + u * dim_, dim_}; }
    std::span<const std::uint32_t> unit_occurrences(std::size_t u) const {
        return {occ_index_.data() + occ_offset_[u], occ_offset_[u + 1] - occ_offset_[u]};
    }
    SuperpixelId occurrence_superpixel(std::size_t o) const { return occ_sp_[o]; }
    const Point& occurrence_pos(std::size_t o) const { return occ_pos_[o]; }
    const std::vector<Point>& superpixels() const { return centers_; }
    const AdjacencyGraph& adjacency() const { return *adjacency_; }
    /// Position of `label` in unit order, or unit_count() if absent.
    std::size_t unit_of(std::uint32_t label) const;

private:
    ReferenceView() = default;

    std::string image_id_;
    std::size_t dim_ = 0;
    std::vector<std::uint32_t> labels_;
    std::vector<double> vecs_;
    std::vector<std::size_t> occ_offset_{0};
    std::vector<std::uint32_t> occ_index_;
    std::vector<SuperpixelId> occ_sp_;
    std::vector<Point> occ_pos_;
    std::vector<Point> centers_;
    const AdjacencyGraph* adjacency_ = nullptr;
};

/// Nearest k_max + 1 distinct words of `img` to the raw query descriptor,
/// by L2 against the word exemplars; ties by ascending word id.
MatchList knn_words(std::span<const double> qf, const IndexedImage& img, const Vocabulary& vocab,
                    std::size_t k_max);
MatchList knn_units(std::span<const double> qf, const ReferenceView& ref, std::size_t k_max);

/// K is the smallest k >= 1 with dist[k] < ratio * dist[k+1] (1-based), or
/// 0 when no such prefix exists within the list.
StrongMatch strong_matches(std::span<const Match> ml, double ratio);

/// Superpixels holding a strong-match word plus their Delaunay neighbours.
/// Sorted ascending; empty when sm.k == 0.
std::vector<SuperpixelId> lg_candidates(const StrongMatch& sm, const IndexedImage& img);
std::vector<SuperpixelId> lg_candidates(const StrongMatch& sm, const ReferenceView& ref);

/// Quantile box of matched positions: per axis the floor(delta*M)-th and
/// floor((1-delta)*M)-th order statistics (0-based, upper clamped to M-1),
/// then widened about its centre by 1/(1-delta). Throws Error when empty.
Box visibility_box(std::span<const Point> matched, double delta);

struct FeatureScore {
    /// +infinity when evaluated against some reference but no candidate
    /// survived; 0 when VA excluded the feature from every reference.
    double score = 0.0;
    bool evaluated = false;
    std::optional<std::size_t> ref;  // index into the reference list
    std::optional<std::uint32_t> unit;
    std::optional<SuperpixelId> superpixel;  // superpixel of the contributing occurrence
};

/// Scores every query feature against `refs` (in retrieval order).
std::vector<FeatureScore> score_features(const FeatureSet& query,
                                         std::span<const ReferenceView> refs,
                                         const DetectOptions& opts);

/// Anomalyness of one query feature. The whole query is needed because the
/// visibility boxes are estimated from all of its matches.
FeatureScore anomalyness(const FeatureSet& query, std::size_t feature,
                         std::span<const ReferenceView> refs, const DetectOptions& opts);

using FeatureSetStore = std::map<std::string, FeatureSet, std::less<>>;

/// Retrieve top-n_refs references, then score every query feature. DM mode
/// reads raw descriptors from `raw_refs`, which must cover every retrieved id.
ChangeResult detect_changes(const FeatureSet& query, const InvertedIndex& idx,
                            const FeatureSetStore* raw_refs, const DetectOptions& opts);

}  // namespace ccr
