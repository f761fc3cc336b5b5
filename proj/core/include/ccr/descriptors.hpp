#pragma once

// Core records for one image's local features plus the text file formats
// shared by every tool: feature sets (CCRFS), ground truth (CCRGT) and the
// per-feature results CSV.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ccr/common.hpp"

namespace ccr {

inline constexpr int kFeatureSetFormatVersion = 1;
inline constexpr int kGroundTruthFormatVersion = 1;

struct Superpixel {
    SuperpixelId id = 0;
    Point center;

    friend bool operator==(const Superpixel&, const Superpixel&) = default;
};

struct Feature {
    Point pos;
    SuperpixelId superpixel = 0;
    std::vector<double> desc;

    friend bool operator==(const Feature&, const Feature&) = default;
};

struct FeatureSet {
    std::string image_id;
    std::vector<double> global_desc;
    std::size_t desc_dim = 0;
    std::vector<Superpixel> superpixels;
    std::vector<Feature> features;

    std::vector<Point> superpixel_centers() const;

    friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
};

/// Throws Error describing the first violated invariant.
void validate(const FeatureSet& fs);

struct GroundTruthBox {
    std::string query_id;
    Box box;

    friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

struct ChangeEntry {
    std::size_t feature_index = 0;
    Point pos;
    /// Anomalyness; +infinity when no reference offered any candidate.
    double score = 0.0;
    std::optional<std::string> best_ref;

    friend bool operator==(const ChangeEntry&, const ChangeEntry&) = default;
};

struct ChangeResult {
    std::string query_id;
    std::vector<ChangeEntry> entries;

    friend bool operator==(const ChangeResult&, const ChangeResult&) = default;
};

// `source` names the input in error messages ("<source>:<line>: ...").
FeatureSet parse_feature_set(std::istream& in, const std::string& source);
void format_feature_set(const FeatureSet& fs, std::ostream& out);

FeatureSet read_feature_set(const std::filesystem::path& path);
void write_feature_set(const FeatureSet& fs, const std::filesystem::path& path);

std::vector<GroundTruthBox> parse_ground_truth(std::istream& in, const std::string& source);
void format_ground_truth(const std::vector<GroundTruthBox>& boxes, std::ostream& out);
std::vector<GroundTruthBox> read_ground_truth(const std::filesystem::path& path);
void write_ground_truth(const std::vector<GroundTruthBox>& boxes,
                        const std::filesystem::path& path);

/// Results CSV, header `query_id,feature_index,x,y,score,best_ref`. Several
/// results may share one file; rows are grouped back by query_id in order
/// of first appearance.
void format_results_csv(const std::vector<ChangeResult>& results, std::ostream& out);
std::vector<ChangeResult> parse_results_csv(std::istream& in, const std::string& source);
std::vector<ChangeResult> read_results_csv(const std::filesystem::path& path);
void write_results_csv(const std::vector<ChangeResult>& results,
                       const std::filesystem::path& path);

}  // namespace ccr
