#include <doctest.h>

#include "ccr/change.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace ccr;

namespace {

std::vector<Match> list_of(std::initializer_list<double> ds) {
    std::vector<Match> out;
    std::uint32_t u = 0;
    for (double d : ds) {
        out.push_back({u++, d});
    }
    return out;
}

// A small world: references and a query that share most descriptors, with a
// vocabulary coarse enough to cause real quantization error.
struct World {
    std::shared_ptr<const Vocabulary> vocab;
    std::vector<FeatureSet> refs;
    std::vector<IndexedImage> indexed;
    FeatureSet query;
};

World make_world(std::uint64_t seed, std::size_t n_refs = 4) {
    Rng rng(seed);
    World w;
    const std::size_t dim = 4;
    std::vector<std::vector<double>> pool;
    for (int i = 0; i < 60; ++i) {
        pool.push_back(ccr::testing::random_vector(rng, dim));
    }
    w.vocab = std::make_shared<const Vocabulary>(ccr::testing::random_vocabulary(rng, dim, 12));
    auto noisy = [&] {
        auto v = pool[rng.uniform_index(pool.size())];
        for (auto& x : v) {
            x += 0.02 * rng.normal();
        }
        return v;
    };
    for (std::size_t r = 0; r < n_refs; ++r) {
        w.refs.push_back(ccr::testing::random_feature_set(rng, "ref" + std::to_string(r), dim,
                                                          3 + rng.uniform_index(8),
                                                          5 + rng.uniform_index(25), noisy));
        w.indexed.push_back(index_image(w.refs.back(), *w.vocab));
    }
    w.query = ccr::testing::random_feature_set(rng, "query", dim, 6, 30, [&] {
        return rng.uniform01() < 0.8 ? noisy() : ccr::testing::random_vector(rng, dim);
    });
    return w;
}

std::vector<ReferenceView> views_of(const World& w, Mode mode) {
    std::vector<ReferenceView> out;
    for (std::size_t r = 0; r < w.refs.size(); ++r) {
        out.push_back(mode == Mode::kCompressed
                          ? ReferenceView::from_index(w.indexed[r], *w.vocab)
                          : ReferenceView::from_features(w.refs[r], w.indexed[r].adjacency));
    }
    return out;
}

std::vector<oracle::OracleRef> oracle_refs_of(const World& w, Mode mode) {
    std::vector<oracle::OracleRef> out;
    for (std::size_t r = 0; r < w.refs.size(); ++r) {
        out.push_back(mode == Mode::kCompressed
                          ? oracle::from_index(w.indexed[r], *w.vocab)
                          : oracle::from_features(w.refs[r], w.indexed[r].adjacency));
    }
    return out;
}

std::vector<DetectOptions> all_flag_combos(Mode mode) {
    std::vector<DetectOptions> out;
    for (int f = 0; f < 3; ++f) {
        DetectOptions o;
        o.mode = mode;
        o.lg = f >= 1;
        o.va = f >= 2;
        o.k_max = 4;
        out.push_back(o);
    }
    return out;
}

}  // namespace

TEST_SUITE("change") {

TEST_CASE("options validation and labels") {
    DetectOptions o;
    CHECK(o.label() == "CCR");
    o.lg = true;
    CHECK(o.label() == "CCR+LG");
    o.va = true;
    CHECK(o.label() == "CCR+LG+VA");
    o.mode = Mode::kDirect;
    CHECK(o.label() == "DM+LG+VA");
    CHECK_NOTHROW(o.validate());
    o.lg = false;
    CHECK_THROWS_AS(o.validate(), Error);
    DetectOptions bad;
    bad.ratio = 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad.ratio = 0.8;
    bad.delta = 0.5;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad.delta = 0.1;
    bad.k_max = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK(parse_mode("DM") == Mode::kDirect);
    CHECK(parse_mode("ccr") == Mode::kCompressed);
    CHECK_THROWS_AS(parse_mode("sift"), Error);
}

TEST_CASE("strong match examples") {
    CHECK(strong_matches(list_of({1.0, 2.0, 2.1}), 0.8).k == 1);
    CHECK(strong_matches(list_of({1.0, 1.1, 3.0}), 0.8).k == 2);
    CHECK(strong_matches(list_of({1.0, 1.0, 1.0}), 0.8).k == 0);
    CHECK(strong_matches(list_of({1.0}), 0.8).k == 0);
    CHECK(strong_matches(list_of({}), 0.8).k == 0);
    CHECK(strong_matches(list_of({0.0, 0.0, 5.0}), 0.8).k == 2);
    const auto sm = strong_matches(list_of({1.0, 1.1, 3.0, 3.1}), 0.8);
    CHECK(sm.units == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("strong match rule agrees with exhaustive search") {
    Rng rng(101);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = rng.uniform_index(12);
        std::vector<double> ds;
        for (std::size_t i = 0; i < n; ++i) {
            ds.push_back(rng.uniform01() < 0.2 ? 1.0 : rng.uniform(0, 2));
        }
        std::sort(ds.begin(), ds.end());
        MatchList ml;
        for (std::size_t i = 0; i < n; ++i) {
            ml.push_back({static_cast<std::uint32_t>(i), ds[i]});
        }
        const double ratio = rng.uniform(0.05, 0.95);
        CHECK(strong_matches(ml, ratio).k == oracle::strong_k(ds, ratio));
    }
}

TEST_CASE("knn over words and features matches the oracle") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto w = make_world(seed);
        Rng rng(seed * 7);
        for (std::size_t r = 0; r < w.refs.size(); ++r) {
            const auto view = ReferenceView::from_features(w.refs[r], w.indexed[r].adjacency);
            for (int q = 0; q < 5; ++q) {
                const auto qf = ccr::testing::random_vector(rng, 4);
                const std::size_t k = 1 + rng.uniform_index(6);
                CHECK(knn_words(qf, w.indexed[r], *w.vocab, k) ==
                      oracle::knn_words(qf, w.indexed[r], *w.vocab, k));
                const auto got = knn_units(qf, view, k);
                const auto want = oracle::knn_features(qf, w.refs[r], k);
                REQUIRE(got.size() == want.size());
                for (std::size_t i = 0; i < got.size(); ++i) {
                    CHECK(got[i].dist == doctest::Approx(want[i].dist).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("local geometry candidates on a known graph") {
    // Superpixels on a line: 0 - 1 - 2 - 3 - 4 (collinear gives a path).
    const auto vocab = std::make_shared<const Vocabulary>(2, std::vector<double>{0, 0, 1, 1, 5, 5});
    FeatureSet fs;
    fs.image_id = "line";
    fs.desc_dim = 2;
    for (std::uint32_t s = 0; s < 5; ++s) {
        fs.superpixels.push_back({s, {static_cast<double>(s) * 10, 0}});
    }
    fs.features.push_back({{0, 0}, 0, {0, 0}});
    fs.features.push_back({{40, 0}, 4, {1, 1}});
    fs.features.push_back({{20, 0}, 2, {5, 5}});
    const auto img = index_image(fs, *vocab);

    StrongMatch none;
    CHECK(lg_candidates(none, img).empty());
    StrongMatch sm{1, {0}};
    CHECK(lg_candidates(sm, img) == std::vector<SuperpixelId>{0, 1});
    sm = {2, {0, 1}};
    CHECK(lg_candidates(sm, img) == std::vector<SuperpixelId>{0, 1, 3, 4});
    sm = {1, {2}};
    CHECK(lg_candidates(sm, img) == std::vector<SuperpixelId>{1, 2, 3});
    const auto view = ReferenceView::from_index(img, *vocab);
    CHECK(lg_candidates(sm, view) == std::vector<SuperpixelId>{1, 2, 3});
}

TEST_CASE("visibility box examples") {
    std::vector<Point> diag;
    for (int i = 0; i <= 10; ++i) {
        diag.push_back({static_cast<double>(i), static_cast<double>(i)});
    }
    const auto b = visibility_box(diag, 0.1);
    CHECK(b.x_min == doctest::Approx(5 - 4 / 0.9));
    CHECK(b.x_max == doctest::Approx(5 + 4 / 0.9));
    CHECK(b.y_min == doctest::Approx(5 - 4 / 0.9));
    CHECK(b.y_max == doctest::Approx(5 + 4 / 0.9));

    const std::vector<Point> one{{3, 7}};
    CHECK(visibility_box(one, 0.1) == Box{3, 7, 3, 7});
    const std::vector<Point> same(6, Point{2, 2});
    CHECK(visibility_box(same, 0.25) == Box{2, 2, 2, 2});
    CHECK_THROWS_AS(visibility_box({}, 0.1), Error);

    const auto full = visibility_box(diag, 0.0);
    CHECK(full == Box{0, 0, 10, 10});
}

TEST_CASE("visibility box matches the quantile formula on random sets") {
    Rng rng(55);
    for (int trial = 0; trial < 300; ++trial) {
        const auto pts = ccr::testing::random_points(rng, 1 + rng.uniform_index(60), 500);
        const double delta = rng.uniform(0, 0.49);
        CHECK(visibility_box(pts, delta) == oracle::visibility_box(pts, delta));
    }
}

TEST_CASE("anomalyness agrees with the double-loop oracle for every flag combination") {
    for (const Mode mode : {Mode::kCompressed, Mode::kDirect}) {
        for (std::uint64_t seed = 1; seed <= 15; ++seed) {
            const auto w = make_world(seed * 13 + (mode == Mode::kDirect));
            const auto views = views_of(w, mode);
            const auto orefs = oracle_refs_of(w, mode);
            for (const auto& opts : all_flag_combos(mode)) {
                CAPTURE(opts.label());
                const auto scores = score_features(w.query, views, opts);
                REQUIRE(scores.size() == w.query.features.size());
                for (std::size_t f = 0; f < scores.size(); ++f) {
                    const double want = oracle::anomalyness(w.query, f, orefs, opts);
                    if (std::isinf(want)) {
                        CHECK(std::isinf(scores[f].score));
                    } else {
                        CHECK(scores[f].score == doctest::Approx(want).epsilon(1e-12));
                    }
                    const auto single = anomalyness(w.query, f, views, opts);
                    CHECK(single.score == scores[f].score);
                }
            }
        }
    }
}

TEST_CASE("scores never increase when references are added") {
    const auto w = make_world(77, 8);
    for (const Mode mode : {Mode::kCompressed, Mode::kDirect}) {
        const auto views = views_of(w, mode);
        for (const bool lg : {false, true}) {
            DetectOptions o;
            o.mode = mode;
            o.lg = lg;
            std::vector<double> prev(w.query.features.size(),
                                     std::numeric_limits<double>::infinity());
            for (std::size_t n = 1; n <= views.size(); ++n) {
                const auto s = score_features(w.query, std::span(views).first(n), o);
                for (std::size_t f = 0; f < s.size(); ++f) {
                    CHECK(s[f].score <= prev[f]);
                    prev[f] = s[f].score;
                }
            }
        }
    }
}

TEST_CASE("compressed scores stay within the quantization error of direct scores") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto w = make_world(seed + 500);
        double max_q = 0.0;
        for (const auto& fs : w.refs) {
            for (const auto& f : fs.features) {
                max_q = std::max(max_q, w.vocab->quantize(f.desc).dist);
            }
        }
        DetectOptions ccr, dm;
        dm.mode = Mode::kDirect;
        const auto a = score_features(w.query, views_of(w, Mode::kCompressed), ccr);
        const auto b = score_features(w.query, views_of(w, Mode::kDirect), dm);
        for (std::size_t f = 0; f < a.size(); ++f) {
            CHECK(std::abs(a[f].score - b[f].score) <= max_q + 1e-12);
        }
    }
}

TEST_CASE("a vanishing ratio makes LG and VA inert") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto w = make_world(seed + 900);
        for (const Mode mode : {Mode::kCompressed, Mode::kDirect}) {
            const auto views = views_of(w, mode);
            DetectOptions plain;
            plain.mode = mode;
            plain.ratio = 1e-300;
            auto lg = plain;
            lg.lg = true;
            auto va = lg;
            va.va = true;
            const auto a = score_features(w.query, views, plain);
            const auto b = score_features(w.query, views, lg);
            const auto c = score_features(w.query, views, va);
            for (std::size_t f = 0; f < a.size(); ++f) {
                CHECK(a[f].score == b[f].score);
                CHECK(a[f].score == c[f].score);
            }
        }
    }
}

TEST_CASE("provenance points at the contributing candidate") {
    const auto w = make_world(4242, 5);
    for (const Mode mode : {Mode::kCompressed, Mode::kDirect}) {
        const auto views = views_of(w, mode);
        for (const auto& opts : all_flag_combos(mode)) {
            const auto scores = score_features(w.query, views, opts);
            for (std::size_t f = 0; f < scores.size(); ++f) {
                const auto& s = scores[f];
                if (!s.evaluated || std::isinf(s.score)) {
                    CHECK_FALSE(s.ref.has_value());
                    continue;
                }
                REQUIRE(s.ref.has_value());
                const auto& v = views[*s.ref];
                const auto u = v.unit_of(*s.unit);
                REQUIRE(u < v.unit_count());
                CHECK(l2(w.query.features[f].desc, v.vector(u)) == s.score);
                bool holds = false;
                for (auto o : v.unit_occurrences(u)) {
                    holds = holds || v.occurrence_superpixel(o) == *s.superpixel;
                }
                CHECK(holds);
            }
        }
    }
}

TEST_CASE("thread count does not change the scores") {
    const auto w = make_world(31337, 6);
    for (const auto& base : all_flag_combos(Mode::kCompressed)) {
        auto many = base;
        many.threads = 5;
        const auto views = views_of(w, Mode::kCompressed);
        const auto a = score_features(w.query, views, base);
        const auto b = score_features(w.query, views, many);
        for (std::size_t f = 0; f < a.size(); ++f) {
            CHECK(a[f].score == b[f].score);
            CHECK(a[f].ref == b[f].ref);
            CHECK(a[f].unit == b[f].unit);
        }
    }
}

TEST_CASE("detecting an indexed image against itself is bounded by quantization error") {
    auto w = make_world(2718, 6);
    w.query.image_id = "self";
    w.query.global_desc = {9, 9, 9, 9};
    auto sets = w.refs;
    sets.push_back(w.query);
    const auto idx = build_index(sets, w.vocab);
    DetectOptions o;
    o.n_refs = 1;
    const auto res = detect_changes(w.query, idx, nullptr, o);
    REQUIRE(res.entries.size() == w.query.features.size());
    for (std::size_t f = 0; f < res.entries.size(); ++f) {
        const auto& e = res.entries[f];
        CHECK(e.feature_index == f);
        CHECK(e.pos == w.query.features[f].pos);
        CHECK(e.best_ref == std::optional<std::string>("self"));
        CHECK(e.score <= w.vocab->quantize(w.query.features[f].desc).dist);
    }

    DetectOptions dm;
    dm.mode = Mode::kDirect;
    CHECK_THROWS_AS(detect_changes(w.query, idx, nullptr, dm), Error);
    FeatureSetStore store;
    for (const auto& fs : sets) {
        store.emplace(fs.image_id, fs);
    }
    dm.n_refs = 1;
    const auto direct = detect_changes(w.query, idx, &store, dm);
    for (const auto& e : direct.entries) {
        CHECK(e.score == 0.0);
    }
    store.erase("self");
    CHECK_THROWS_AS(detect_changes(w.query, idx, &store, dm), Error);
}

}  // TEST_SUITE
