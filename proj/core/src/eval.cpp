#include "ccr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "ccr/random.hpp"

namespace ccr {

RankingOutcome ranking_percentile(const ChangeResult& result, const GroundTruthBox& gt) {
    const auto& entries = result.entries;
    std::vector<std::size_t> order(entries.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double sa = entries[a].score, sb = entries[b].score;
        if (sa != sb) {
            return sa > sb;
        }
        return entries[a].feature_index < entries[b].feature_index;
    });
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (gt.box.contains(entries[order[rank]].pos)) {
            RankingOutcome out;
            out.query_id = result.query_id;
            out.total_features = entries.size();
            out.best_gt_rank = rank + 1;
            out.percentile = 100.0 * static_cast<double>(rank + 1) /
                             static_cast<double>(entries.size());
            return out;
        }
    }
    throw Error("query '" + result.query_id + "': no feature lies inside the ground-truth box");
}

std::vector<double> topx_table(const std::vector<RankingOutcome>& outcomes,
                               const std::vector<double>& thresholds) {
    if (outcomes.empty()) {
        throw Error("top-X table needs at least one ranking outcome");
    }
    std::vector<double> rates;
    rates.reserve(thresholds.size());
    for (double x : thresholds) {
        const auto hits = std::count_if(outcomes.begin(), outcomes.end(),
                                        [x](const RankingOutcome& o) { return o.percentile <= x; });
        rates.push_back(100.0 * static_cast<double>(hits) / static_cast<double>(outcomes.size()));
    }
    return rates;
}

namespace {

std::string fixed1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

std::string pad_left(const std::string& s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

}  // namespace

void render_table_text(const TopXTable& table, std::ostream& out) {
    std::size_t ref_w = std::string("#ref").size();
    ref_w = std::max(ref_w, table.ref_count.size());
    std::size_t label_w = std::string("algorithm").size();
    for (const auto& row : table.rows) {
        label_w = std::max(label_w, row.label.size());
    }
    std::vector<std::string> heads;
    std::vector<std::size_t> col_w;
    for (double x : table.thresholds) {
        heads.push_back("top-" + format_double(x));
        col_w.push_back(std::max<std::size_t>(heads.back().size(), 5));
    }
    out << pad_right("#ref", ref_w) << "  " << pad_right("algorithm", label_w);
    for (std::size_t c = 0; c < heads.size(); ++c) {
        out << "  " << pad_left(heads[c], col_w[c]);
    }
    out << '\n';
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        out << pad_right(r == 0 ? table.ref_count : "", ref_w) << "  "
            << pad_right(row.label, label_w);
        for (std::size_t c = 0; c < row.rates.size(); ++c) {
            out << "  " << pad_left(fixed1(row.rates[c]), c < col_w.size() ? col_w[c] : 5);
        }
        out << '\n';
    }
}

void render_table_csv(const TopXTable& table, std::ostream& out) {
    out << "ref,algorithm";
    for (double x : table.thresholds) {
        out << ",top-" << format_double(x);
    }
    out << '\n';
    for (const auto& row : table.rows) {
        out << table.ref_count << ',' << row.label;
        for (double v : row.rates) {
            out << ',' << fixed1(v);
        }
        out << '\n';
    }
}

void SceneSpec::validate() const {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) {
            throw Error("invalid scene spec: " + msg);
        }
    };
    need(dim >= 1, "dim must be at least 1");
    need(world_size >= 1, "world_size must be at least 1");
    need(n_refs >= 1, "n_refs must be at least 1");
    need(features_per_image >= 1, "features_per_image must be at least 1");
    need(features_per_image <= world_size, "features_per_image cannot exceed world_size");
    need(change_count >= 1, "change_count must be at least 1 (the ground-truth box needs planted changes)");
    need(change_count <= features_per_image, "change_count cannot exceed features_per_image");
    need(std::isfinite(obs_noise_sigma) && obs_noise_sigma >= 0.0, "obs_noise_sigma must be >= 0");
    need(std::isfinite(change_margin) && change_margin > 0.0, "change_margin must be > 0");
    need(std::isfinite(width) && width > 0.0 && std::isfinite(height) && height > 0.0,
         "image extent must be positive");
    need(grid_x >= 1 && grid_y >= 1, "superpixel grid must be at least 1x1");
    need(global_dim >= 1, "global_dim must be at least 1");
    need(max_attempts >= 1, "max_attempts must be at least 1");
}

namespace {

std::string padded_id(const std::string& prefix, std::size_t i, std::size_t count) {
    const std::size_t digits = std::to_string(count > 0 ? count - 1 : 0).size();
    std::string n = std::to_string(i);
    return prefix + std::string(digits > n.size() ? digits - n.size() : 0, '0') + n;
}

// Partial Fisher-Yates: `count` distinct entries of `pool`.
std::vector<std::size_t> sample_distinct(std::vector<std::size_t> pool, std::size_t count,
                                         Rng& rng) {
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.uniform_index(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

class Grid {
public:
    Grid(const SceneSpec& s) : spec_(s) {}

    std::vector<Superpixel> superpixels() const {
        std::vector<Superpixel> out;
        for (std::size_t j = 0; j < spec_.grid_y; ++j) {
            for (std::size_t i = 0; i < spec_.grid_x; ++i) {
                const double cx = (static_cast<double>(i) + 0.5) * spec_.width /
                                  static_cast<double>(spec_.grid_x);
                const double cy = (static_cast<double>(j) + 0.5) * spec_.height /
                                  static_cast<double>(spec_.grid_y);
                out.push_back({static_cast<SuperpixelId>(j * spec_.grid_x + i), {cx, cy}});
            }
        }
        return out;
    }

    SuperpixelId cell(const Point& p) const {
        const auto ix = std::min(spec_.grid_x - 1,
                                 static_cast<std::size_t>(p.x / spec_.width *
                                                          static_cast<double>(spec_.grid_x)));
        const auto iy = std::min(spec_.grid_y - 1,
                                 static_cast<std::size_t>(p.y / spec_.height *
                                                          static_cast<double>(spec_.grid_y)));
        return static_cast<SuperpixelId>(iy * spec_.grid_x + ix);
    }

private:
    const SceneSpec& spec_;
};

double nearest_distance(std::span<const double> d, const std::vector<FeatureSet>& refs) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : refs) {
        for (const auto& f : r.features) {
            const double d2 = squared_l2_bounded(d, f.desc, best);
            if (d2 < best) {
                best = d2;
            }
        }
    }
    return std::sqrt(best);
}

}  // namespace

Scene generate_scene(const SceneSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t dim = spec.dim;
    const Grid grid(spec);

    std::vector<double> world(spec.world_size * dim);
    for (double& v : world) {
        v = rng.uniform01();
    }
    std::vector<Point> world_pos(spec.world_size);
    for (auto& p : world_pos) {
        p.x = rng.uniform(0.0, spec.width);
        p.y = rng.uniform(0.0, spec.height);
    }
    auto world_desc = [&](std::size_t w) { return std::span<const double>(world.data() + w * dim, dim); };

    auto observe = [&](std::size_t w) {
        Feature f;
        f.pos = world_pos[w];
        f.superpixel = grid.cell(f.pos);
        f.desc.resize(dim);
        const auto base = world_desc(w);
        for (std::size_t d = 0; d < dim; ++d) {
            f.desc[d] = base[d] + spec.obs_noise_sigma * rng.normal();
        }
        return f;
    };
    auto global_of = [&](const std::vector<std::size_t>& ids) {
        std::vector<double> g(spec.global_dim, 0.0);
        for (std::size_t w : ids) {
            g[w * spec.global_dim / spec.world_size] += 1.0;
        }
        return g;
    };
    auto empty_set = [&](std::string id) {
        FeatureSet fs;
        fs.image_id = std::move(id);
        fs.desc_dim = dim;
        fs.superpixels = grid.superpixels();
        return fs;
    };

    Scene scene;
    std::vector<std::size_t> all(spec.world_size);
    std::iota(all.begin(), all.end(), 0);
    std::vector<char> observed(spec.world_size, 0);
    for (std::size_t r = 0; r < spec.n_refs; ++r) {
        auto fs = empty_set(padded_id("ref", r, spec.n_refs));
        const auto ids = sample_distinct(all, spec.features_per_image, rng);
        for (std::size_t w : ids) {
            fs.features.push_back(observe(w));
            observed[w] = 1;
        }
        fs.global_desc = global_of(ids);
        scene.refs.push_back(std::move(fs));
    }

    // The query revisits the same place: its unchanged features come from
    // world points that some reference observed.
    std::vector<std::size_t> seen;
    for (std::size_t w = 0; w < spec.world_size; ++w) {
        if (observed[w]) {
            seen.push_back(w);
        }
    }
    if (seen.size() < spec.features_per_image) {
        throw Error("scene spec: references observe only " + std::to_string(seen.size()) +
                    " world points, fewer than features_per_image");
    }
    scene.query = empty_set("query");
    const auto qids = sample_distinct(seen, spec.features_per_image, rng);
    for (std::size_t w : qids) {
        scene.query.features.push_back(observe(w));
    }
    std::vector<std::size_t> index_pool(spec.features_per_image);
    std::iota(index_pool.begin(), index_pool.end(), 0);
    scene.planted = sample_distinct(index_pool, spec.change_count, rng);
    std::sort(scene.planted.begin(), scene.planted.end());

    std::vector<char> is_planted(spec.features_per_image, 0);
    for (auto i : scene.planted) {
        is_planted[i] = 1;
    }
    std::vector<std::size_t> kept_ids;
    for (std::size_t i = 0; i < qids.size(); ++i) {
        if (!is_planted[i]) {
            kept_ids.push_back(qids[i]);
            scene.audit.max_unchanged_nn = std::max(
                scene.audit.max_unchanged_nn, nearest_distance(scene.query.features[i].desc, scene.refs));
        }
    }
    scene.query.global_desc = global_of(kept_ids);

    // Planted changes: clustered in a box well inside the frame, descriptors
    // far from every world point and farther from the references than any
    // unchanged query descriptor.
    const double half_w = 0.05 * spec.width, half_h = 0.05 * spec.height;
    const double cx = rng.uniform(0.2 * spec.width, 0.8 * spec.width);
    const double cy = rng.uniform(0.2 * spec.height, 0.8 * spec.height);
    const double margin2 = spec.change_margin * spec.change_margin;
    scene.audit.min_planted_nn = std::numeric_limits<double>::infinity();
    std::vector<double> candidate(dim);
    for (std::size_t i : scene.planted) {
        bool accepted = false;
        double nn = 0.0;
        for (std::size_t attempt = 0; attempt < spec.max_attempts && !accepted; ++attempt) {
            for (double& v : candidate) {
                v = rng.uniform01();
            }
            bool far = true;
            for (std::size_t w = 0; w < spec.world_size && far; ++w) {
                far = squared_l2_bounded(candidate, world_desc(w), margin2) >= margin2;
            }
            if (!far) {
                continue;
            }
            nn = nearest_distance(candidate, scene.refs);
            accepted = nn > scene.audit.max_unchanged_nn;
        }
        if (!accepted) {
            throw Error("scene generation: no planted descriptor found within " +
                        std::to_string(spec.max_attempts) +
                        " attempts; change_margin is too large for the unit cube");
        }
        auto& f = scene.query.features[i];
        f.desc = candidate;
        f.pos = {rng.uniform(cx - half_w, cx + half_w), rng.uniform(cy - half_h, cy + half_h)};
        f.superpixel = grid.cell(f.pos);
        scene.audit.min_planted_nn = std::min(scene.audit.min_planted_nn, nn);
    }

    Box box{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (std::size_t i : scene.planted) {
        const auto& p = scene.query.features[i].pos;
        box.x_min = std::min(box.x_min, p.x);
        box.y_min = std::min(box.y_min, p.y);
        box.x_max = std::max(box.x_max, p.x);
        box.y_max = std::max(box.y_max, p.y);
    }
    scene.gt = {scene.query.image_id, box};
    return scene;
}

}  // namespace ccr
