#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ccr/descriptors.hpp"

namespace ccr {

struct RankingOutcome {
    std::string query_id;
    std::size_t total_features = 0;
    std::size_t best_gt_rank = 0;  // 1-based
    double percentile = 0.0;       // 100 * best_gt_rank / total_features
};

/// Ranks features by descending score (ties by ascending feature index,
/// +infinity first) and reports the best rank among features inside the
/// ground-truth box. Throws Error when no feature lies inside the box.
RankingOutcome ranking_percentile(const ChangeResult& result, const GroundTruthBox& gt);

inline const std::vector<double> kDefaultThresholds{1, 2, 5, 10, 20, 50};

/// Success rate (percent) of outcomes with percentile <= X, per threshold X.
std::vector<double> topx_table(const std::vector<RankingOutcome>& outcomes,
                               const std::vector<double>& thresholds);

struct TopXRow {
    std::string label;
    std::vector<double> rates;
};

struct TopXTable {
    std::string ref_count;  // "#ref" column; may be empty
    std::vector<double> thresholds;
    std::vector<TopXRow> rows;
};

void render_table_text(const TopXTable& table, std::ostream& out);
void render_table_csv(const TopXTable& table, std::ostream& out);

/// Parameters of the deterministic synthetic scene.
struct SceneSpec {
    std::uint64_t seed = 1;
    std::size_t dim = 16;
    std::size_t world_size = 2000;
    std::size_t n_refs = 40;
    std::size_t features_per_image = 300;
    double obs_noise_sigma = 0.02;
    std::size_t change_count = 10;
    double change_margin = 0.16;
    double width = 1024.0;
    double height = 768.0;
    std::size_t grid_x = 10;
    std::size_t grid_y = 10;
    std::size_t global_dim = 32;
    std::size_t max_attempts = 100000;  // rejection-sampling budget per planted descriptor

    void validate() const;
};

struct SceneAudit {
    /// Smallest distance from a planted descriptor to any reference descriptor.
    double min_planted_nn = 0.0;
    /// Largest distance from an unchanged query descriptor to its nearest
    /// reference descriptor.
    double max_unchanged_nn = 0.0;
    bool separated() const { return min_planted_nn > max_unchanged_nn; }
};

struct Scene {
    std::vector<FeatureSet> refs;
    FeatureSet query;
    GroundTruthBox gt;
    std::vector<std::size_t> planted;  // query feature indices of planted changes
    SceneAudit audit;
};

/// Deterministic in spec.seed. Throws Error when the spec is invalid or the
/// rejection sampler exhausts its budget.
Scene generate_scene(const SceneSpec& spec);

}  // namespace ccr
