#include "ccr/change.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "ccr/retrieval.hpp"

namespace ccr {

void DetectOptions::validate() const {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw Error("ratio must lie in (0, 1), got " + format_double(ratio));
    }
    if (!(delta >= 0.0 && delta < 0.5)) {
        throw Error("delta must lie in [0, 0.5), got " + format_double(delta));
    }
    if (k_max == 0) {
        throw Error("kmax must be at least 1");
    }
    if (n_refs == 0) {
        throw Error("number of references must be at least 1");
    }
    if (va && !lg) {
        throw Error("visibility analysis requires local geometry (--va needs --lg)");
    }
}

std::string DetectOptions::label() const {
    std::string s = mode == Mode::kDirect ? "DM" : "CCR";
    if (lg) {
        s += "+LG";
    }
    if (va) {
        s += "+VA";
    }
    return s;
}

Mode parse_mode(std::string_view s) {
    std::string lower(s);
    for (char& c : lower) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (lower == "dm") {
        return Mode::kDirect;
    }
    if (lower == "ccr") {
        return Mode::kCompressed;
    }
    throw Error("unknown mode '" + std::string(s) + "' (expected dm or ccr)");
}

ReferenceView ReferenceView::from_index(const IndexedImage& img, const Vocabulary& vocab,
                                        bool normalize) {
    ReferenceView v;
    v.image_id_ = img.image_id;
    v.dim_ = vocab.dim();
    v.centers_ = img.superpixels;
    v.adjacency_ = &img.adjacency;

    // Occurrences grouped by word; words ascending, occurrences in order.
    std::vector<std::uint32_t> order(img.occurrences.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return img.occurrences[a].word < img.occurrences[b].word;
    });
    v.occ_sp_.reserve(img.occurrences.size());
    v.occ_pos_.reserve(img.occurrences.size());
    for (const auto& occ : img.occurrences) {
        v.occ_sp_.push_back(occ.superpixel);
        v.occ_pos_.push_back(occ.pos);
    }
    for (std::uint32_t o : order) {
        const WordId w = img.occurrences[o].word;
        if (v.labels_.empty() || v.labels_.back() != w) {
            if (!v.labels_.empty()) {
                v.occ_offset_.push_back(v.occ_index_.size());
            }
            v.labels_.push_back(w);
            const auto ex = vocab.exemplar(w);
            if (normalize) {
                const auto n = l2_normalized(ex);
                v.vecs_.insert(v.vecs_.end(), n.begin(), n.end());
            } else {
                v.vecs_.insert(v.vecs_.end(), ex.begin(), ex.end());
            }
        }
        v.occ_index_.push_back(o);
    }
    if (!v.labels_.empty()) {
        v.occ_offset_.push_back(v.occ_index_.size());
    }
    return v;
}

ReferenceView ReferenceView::from_features(const FeatureSet& fs, const AdjacencyGraph& adjacency,
                                           bool normalize) {
    if (adjacency.size() != fs.superpixels.size()) {
        throw Error("reference '" + fs.image_id + "': adjacency covers " +
                    std::to_string(adjacency.size()) + " superpixels, feature set has " +
                    std::to_string(fs.superpixels.size()));
    }
    ReferenceView v;
    v.image_id_ = fs.image_id;
    v.dim_ = fs.desc_dim;
    v.adjacency_ = &adjacency;
    v.centers_ = fs.superpixel_centers();
    for (std::uint32_t i = 0; i < fs.features.size(); ++i) {
        const auto& f = fs.features[i];
        v.labels_.push_back(i);
        if (normalize) {
            const auto n = l2_normalized(f.desc);
            v.vecs_.insert(v.vecs_.end(), n.begin(), n.end());
        } else {
            v.vecs_.insert(v.vecs_.end(), f.desc.begin(), f.desc.end());
        }
        v.occ_index_.push_back(i);
        v.occ_offset_.push_back(v.occ_index_.size());
        v.occ_sp_.push_back(f.superpixel);
        v.occ_pos_.push_back(f.pos);
    }
    return v;
}

std::size_t ReferenceView::unit_of(std::uint32_t label) const {
    const auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
    if (it == labels_.end() || *it != label) {
        return labels_.size();
    }
    return static_cast<std::size_t>(it - labels_.begin());
}

namespace {

bool match_less(const Match& a, const Match& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.unit < b.unit;
}

MatchList top_matches(std::span<const double> dists, const ReferenceView& ref, std::size_t k_max) {
    MatchList all;
    all.reserve(dists.size());
    for (std::size_t u = 0; u < dists.size(); ++u) {
        all.push_back({ref.label(u), dists[u]});
    }
    const std::size_t keep = std::min(all.size(), k_max + 1);
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                      match_less);
    all.resize(keep);
    return all;
}

void check_dim(std::size_t got, std::size_t want) {
    if (got != want) {
        throw Error("query descriptor dimension " + std::to_string(got) +
                    " does not match reference dimension " + std::to_string(want));
    }
}

}  // namespace

MatchList knn_units(std::span<const double> qf, const ReferenceView& ref, std::size_t k_max) {
    check_dim(qf.size(), ref.dim());
    std::vector<double> dists(ref.unit_count());
    for (std::size_t u = 0; u < dists.size(); ++u) {
        dists[u] = l2(qf, ref.vector(u));
    }
    return top_matches(dists, ref, k_max);
}

MatchList knn_words(std::span<const double> qf, const IndexedImage& img, const Vocabulary& vocab,
                    std::size_t k_max) {
    return knn_units(qf, ReferenceView::from_index(img, vocab), k_max);
}

StrongMatch strong_matches(std::span<const Match> ml, double ratio) {
    StrongMatch sm;
    for (std::size_t k = 1; k < ml.size(); ++k) {
        // 1-based dist[k] is ml[k-1].
        if (ml[k - 1].dist < ratio * ml[k].dist) {
            sm.k = k;
            break;
        }
    }
    for (std::size_t i = 0; i < sm.k; ++i) {
        sm.units.push_back(ml[i].unit);
    }
    return sm;
}

namespace {

std::vector<SuperpixelId> expand_neighbors(const std::vector<char>& holds,
                                           const AdjacencyGraph& adjacency) {
    std::vector<char> mark(holds);
    for (std::uint32_t s = 0; s < holds.size(); ++s) {
        if (holds[s]) {
            for (auto nb : adjacency.neighbors(s)) {
                mark[nb] = 1;
            }
        }
    }
    std::vector<SuperpixelId> out;
    for (std::uint32_t s = 0; s < mark.size(); ++s) {
        if (mark[s]) {
            out.push_back(s);
        }
    }
    return out;
}

}  // namespace

std::vector<SuperpixelId> lg_candidates(const StrongMatch& sm, const IndexedImage& img) {
    if (sm.k == 0) {
        return {};
    }
    std::vector<char> holds(img.superpixels.size(), 0);
    for (const auto& occ : img.occurrences) {
        if (std::find(sm.units.begin(), sm.units.end(), occ.word) != sm.units.end()) {
            holds[occ.superpixel] = 1;
        }
    }
    return expand_neighbors(holds, img.adjacency);
}

std::vector<SuperpixelId> lg_candidates(const StrongMatch& sm, const ReferenceView& ref) {
    if (sm.k == 0) {
        return {};
    }
    std::vector<char> holds(ref.adjacency().size(), 0);
    for (auto label : sm.units) {
        const std::size_t u = ref.unit_of(label);
        if (u == ref.unit_count()) {
            continue;
        }
        for (auto o : ref.unit_occurrences(u)) {
            holds[ref.occurrence_superpixel(o)] = 1;
        }
    }
    return expand_neighbors(holds, ref.adjacency());
}

Box visibility_box(std::span<const Point> matched, double delta) {
    if (matched.empty()) {
        throw Error("visibility box needs at least one matched feature");
    }
    const std::size_t m = matched.size();
    const auto lo_index = static_cast<std::size_t>(std::floor(delta * static_cast<double>(m)));
    const auto hi_index = std::min(
        m - 1, static_cast<std::size_t>(std::floor((1.0 - delta) * static_cast<double>(m))));
    std::vector<double> xs, ys;
    xs.reserve(m);
    ys.reserve(m);
    for (const auto& p : matched) {
        xs.push_back(p.x);
        ys.push_back(p.y);
    }
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    const double scale = 1.0 / (1.0 - delta);
    const auto widen = [&](double lo, double hi, double& out_lo, double& out_hi) {
        const double center = 0.5 * (lo + hi);
        const double half = 0.5 * (hi - lo) * scale;
        out_lo = center - half;
        out_hi = center + half;
    };
    Box box;
    widen(xs[lo_index], xs[hi_index], box.x_min, box.x_max);
    widen(ys[lo_index], ys[hi_index], box.y_min, box.y_max);
    return box;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct RefOutcome {
    bool evaluated = false;
    double dist = kInf;
    std::optional<std::uint32_t> unit;
    std::optional<SuperpixelId> superpixel;
};

// Inner minimum of every query feature against a single reference.
std::vector<RefOutcome> score_against(const std::vector<std::vector<double>>& qdesc,
                                      const std::vector<Point>& qpos, const ReferenceView& ref,
                                      const DetectOptions& opts) {
    const std::size_t nf = qdesc.size();
    const std::size_t nu = ref.unit_count();
    if (!opts.lg && !opts.va) {
        // Only the minimum is needed; a bounded scan gives the same bits.
        std::vector<RefOutcome> out(nf);
        parallel_for(nf, opts.threads, [&](std::size_t f) {
            double best = kInf;
            std::size_t best_u = nu;
            for (std::size_t u = 0; u < nu; ++u) {
                const double d2 = squared_l2_bounded(qdesc[f], ref.vector(u), best);
                if (d2 < best) {
                    best = d2;
                    best_u = u;
                }
            }
            RefOutcome& res = out[f];
            res.evaluated = true;
            if (best_u < nu) {
                res.dist = std::sqrt(best);
                res.unit = ref.label(best_u);
                res.superpixel = ref.occurrence_superpixel(ref.unit_occurrences(best_u).front());
            }
        });
        return out;
    }
    std::vector<double> dists(nf * nu);
    parallel_for(nf, opts.threads, [&](std::size_t f) {
        for (std::size_t u = 0; u < nu; ++u) {
            dists[f * nu + u] = l2(qdesc[f], ref.vector(u));
        }
    });
    auto row = [&](std::size_t f) { return std::span<const double>(dists.data() + f * nu, nu); };

    std::vector<StrongMatch> strong(nf);
    if (opts.lg || opts.va) {
        parallel_for(nf, opts.threads, [&](std::size_t f) {
            strong[f] = strong_matches(top_matches(row(f), ref, opts.k_max), opts.ratio);
        });
    }

    std::optional<Box> qbox;
    std::vector<char> sp_in_box;
    if (opts.va) {
        std::vector<Point> mq, mr;
        std::vector<char> unit_used(nu, 0);
        for (std::size_t f = 0; f < nf; ++f) {
            if (strong[f].k == 0) {
                continue;
            }
            mq.push_back(qpos[f]);
            for (auto label : strong[f].units) {
                unit_used[ref.unit_of(label)] = 1;
            }
        }
        for (std::size_t u = 0; u < nu; ++u) {
            if (unit_used[u]) {
                for (auto o : ref.unit_occurrences(u)) {
                    mr.push_back(ref.occurrence_pos(o));
                }
            }
        }
        if (!mq.empty()) {
            qbox = visibility_box(mq, opts.delta);
            const Box rbox = visibility_box(mr, opts.delta);
            const auto& centers = ref.superpixels();
            sp_in_box.resize(centers.size());
            for (std::size_t s = 0; s < centers.size(); ++s) {
                sp_in_box[s] = rbox.contains(centers[s]) ? 1 : 0;
            }
        }
    }

    std::vector<RefOutcome> out(nf);
    const std::size_t ns = ref.adjacency().size();
    parallel_for(nf, opts.threads, [&](std::size_t f) {
        if (qbox && !qbox->contains(qpos[f])) {
            return;
        }
        RefOutcome& res = out[f];
        res.evaluated = true;
        std::vector<char> allowed;
        bool restricted = false;
        if (opts.lg && strong[f].k > 0) {
            allowed.assign(ns, 0);
            for (auto s : lg_candidates(strong[f], ref)) {
                allowed[s] = 1;
            }
            restricted = true;
        }
        if (!sp_in_box.empty()) {
            if (restricted) {
                for (std::size_t s = 0; s < ns; ++s) {
                    allowed[s] = allowed[s] && sp_in_box[s];
                }
            } else {
                allowed = sp_in_box;
                restricted = true;
            }
        }
        const auto d = row(f);
        for (std::size_t u = 0; u < nu; ++u) {
            if (!(d[u] < res.dist)) {
                continue;
            }
            std::optional<SuperpixelId> via;
            for (auto o : ref.unit_occurrences(u)) {
                const auto s = ref.occurrence_superpixel(o);
                if (!restricted || allowed[s]) {
                    via = s;
                    break;
                }
            }
            if (via) {
                res.dist = d[u];
                res.unit = ref.label(u);
                res.superpixel = via;
            }
        }
    });
    return out;
}

}  // namespace

std::vector<FeatureScore> score_features(const FeatureSet& query,
                                         std::span<const ReferenceView> refs,
                                         const DetectOptions& opts) {
    opts.validate();
    if (refs.empty()) {
        throw Error("anomalyness needs at least one reference");
    }
    std::vector<std::vector<double>> qdesc;
    std::vector<Point> qpos;
    qdesc.reserve(query.features.size());
    for (const auto& f : query.features) {
        for (const auto& ref : refs) {
            check_dim(f.desc.size(), ref.dim());
        }
        qdesc.push_back(opts.normalize_descriptors ? l2_normalized(f.desc) : f.desc);
        qpos.push_back(f.pos);
    }

    std::vector<FeatureScore> scores(qdesc.size());
    for (std::size_t r = 0; r < refs.size(); ++r) {
        const auto per_ref = score_against(qdesc, qpos, refs[r], opts);
        for (std::size_t f = 0; f < scores.size(); ++f) {
            const auto& o = per_ref[f];
            if (!o.evaluated) {
                continue;
            }
            auto& s = scores[f];
            if (!s.evaluated) {
                s.evaluated = true;
                s.score = kInf;
            }
            if (o.dist < s.score) {
                s.score = o.dist;
                s.ref = r;
                s.unit = o.unit;
                s.superpixel = o.superpixel;
            }
        }
    }
    return scores;
}

FeatureScore anomalyness(const FeatureSet& query, std::size_t feature,
                         std::span<const ReferenceView> refs, const DetectOptions& opts) {
    if (feature >= query.features.size()) {
        throw Error("query feature index " + std::to_string(feature) + " out of range");
    }
    return score_features(query, refs, opts)[feature];
}

ChangeResult detect_changes(const FeatureSet& query, const InvertedIndex& idx,
                            const FeatureSetStore* raw_refs, const DetectOptions& opts) {
    opts.validate();
    validate(query);
    if (query.desc_dim != idx.vocabulary().dim()) {
        throw Error("query '" + query.image_id + "' has descriptor dimension " +
                    std::to_string(query.desc_dim) + ", index vocabulary has " +
                    std::to_string(idx.vocabulary().dim()));
    }
    const auto retrieved = rank_references(query.global_desc, idx, opts.n_refs);

    std::vector<ReferenceView> views;
    views.reserve(retrieved.ranked.size());
    for (const auto& r : retrieved.ranked) {
        const IndexedImage* img = idx.find(r.image_id);
        if (opts.mode == Mode::kCompressed) {
            views.push_back(ReferenceView::from_index(*img, idx.vocabulary(),
                                                      opts.normalize_descriptors));
            continue;
        }
        if (raw_refs == nullptr) {
            throw Error("DM mode needs the raw reference feature sets");
        }
        const auto it = raw_refs->find(r.image_id);
        if (it == raw_refs->end()) {
            throw Error("missing raw reference feature set for '" + r.image_id + "'");
        }
        if (it->second.superpixels.size() != img->superpixels.size()) {
            throw Error("raw reference '" + r.image_id + "' has " +
                        std::to_string(it->second.superpixels.size()) +
                        " superpixels but the index has " +
                        std::to_string(img->superpixels.size()));
        }
        views.push_back(
            ReferenceView::from_features(it->second, img->adjacency, opts.normalize_descriptors));
    }

    const auto scores = score_features(query, views, opts);
    ChangeResult result;
    result.query_id = query.image_id;
    result.entries.reserve(scores.size());
    for (std::size_t f = 0; f < scores.size(); ++f) {
        ChangeEntry e;
        e.feature_index = f;
        e.pos = query.features[f].pos;
        e.score = scores[f].score;
        if (scores[f].ref) {
            e.best_ref = views[*scores[f].ref].image_id();
        }
        result.entries.push_back(std::move(e));
    }
    return result;
}

}  // namespace ccr
