#include <doctest.h>

#include <fstream>

#include "ccr/index.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace ccr;
using ccr::testing::TempDir;

namespace {

std::shared_ptr<const Vocabulary> small_vocab(std::uint64_t seed, std::size_t dim = 4,
                                              std::size_t k = 16) {
    Rng rng(seed);
    return std::make_shared<const Vocabulary>(ccr::testing::random_vocabulary(rng, dim, k));
}

// Feature set whose descriptors are exactly the given exemplars.
FeatureSet exemplar_set(const std::string& id, const Vocabulary& v,
                        const std::vector<WordId>& words) {
    Rng rng(fnv1a64(id));
    std::size_t next = 0;
    return ccr::testing::random_feature_set(rng, id, v.dim(), 5, words.size(), [&] {
        const auto ex = v.exemplar(words[next++]);
        return std::vector<double>(ex.begin(), ex.end());
    });
}

}  // namespace

TEST_SUITE("index") {

TEST_CASE("image with no features indexes to no occurrences") {
    const auto vocab = small_vocab(1);
    Rng rng(2);
    const auto fs = ccr::testing::random_feature_set(rng, "empty", 4, 6, 0);
    const auto img = index_image(fs, *vocab);
    CHECK(img.occurrences.empty());
    CHECK(img.superpixels.size() == 6);
    CHECK(img.adjacency == delaunay_adjacency(img.superpixels));

    InvertedIndex idx(vocab);
    idx.add(img);
    for (WordId w = 0; w < vocab->size(); ++w) {
        CHECK(idx.postings(w).empty());
    }
}

TEST_CASE("exemplar descriptors quantize to their own words") {
    const auto vocab = small_vocab(3);
    const auto fs = exemplar_set("a", *vocab, {5, 5, 9});
    const auto img = index_image(fs, *vocab);
    REQUIRE(img.occurrences.size() == 3);
    CHECK(img.occurrences[0].word == 5);
    CHECK(img.occurrences[1].word == 5);
    CHECK(img.occurrences[2].word == 9);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(img.occurrences[i].superpixel == fs.features[i].superpixel);
        CHECK(img.occurrences[i].pos == fs.features[i].pos);
    }

    InvertedIndex idx(vocab);
    idx.add(img);
    CHECK(idx.postings(5).size() == 2);
    CHECK(idx.postings(9).size() == 1);
    CHECK(idx.postings(9)[0].image_id == "a");
    CHECK(idx.postings(9)[0].occurrence == 2);
    CHECK(idx.postings(0).empty());
    CHECK(idx.postings(1000).empty());
}

TEST_CASE("posting counts equal the oracle quantization counts") {
    const auto vocab = small_vocab(4, 6, 20);
    Rng rng(5);
    std::vector<FeatureSet> sets;
    for (int i = 0; i < 20; ++i) {
        sets.push_back(ccr::testing::random_feature_set(rng, "img" + std::to_string(i), 6, 8,
                                                        rng.uniform_index(30)));
    }
    const auto idx = build_index(sets, vocab, 3);
    std::map<WordId, std::size_t> want;
    for (const auto& fs : sets) {
        for (const auto& f : fs.features) {
            ++want[oracle::quantize(f.desc, *vocab).word];
        }
    }
    for (WordId w = 0; w < vocab->size(); ++w) {
        CHECK(idx.postings(w).size() == (want.count(w) ? want[w] : 0));
    }
    CHECK(idx.size() == 20);
}

TEST_CASE("duplicate ids and inconsistent images are rejected") {
    const auto vocab = small_vocab(6);
    Rng rng(7);
    const auto fs = ccr::testing::random_feature_set(rng, "dup", 4, 3, 4);
    InvertedIndex idx(vocab);
    idx.add(index_image(fs, *vocab));
    CHECK_THROWS_AS(idx.add(index_image(fs, *vocab)), Error);

    auto other = index_image(ccr::testing::random_feature_set(rng, "other", 4, 3, 4), *vocab);
    other.occurrences[0].word = 999;
    CHECK_THROWS_AS(idx.add(other), Error);

    auto wide = ccr::testing::random_feature_set(rng, "wide", 5, 3, 2);
    CHECK_THROWS_AS(index_image(wide, *vocab), Error);
}

TEST_CASE("insertion order does not change the built index") {
    const auto vocab = small_vocab(8);
    Rng rng(9);
    std::vector<FeatureSet> sets;
    for (int i = 0; i < 10; ++i) {
        sets.push_back(ccr::testing::random_feature_set(rng, "r" + std::to_string(i), 4, 6, 12));
    }
    auto shuffled = sets;
    std::reverse(shuffled.begin(), shuffled.end());
    std::swap(shuffled[2], shuffled[7]);
    const auto a = build_index(sets, vocab, 1);
    const auto b = build_index(shuffled, vocab, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(*a.images()[i] == *b.images()[i]);
    }
    for (WordId w = 0; w < vocab->size(); ++w) {
        const auto pa = a.postings(w), pb = b.postings(w);
        REQUIRE(pa.size() == pb.size());
        for (std::size_t i = 0; i < pa.size(); ++i) {
            CHECK(pa[i].image_id == pb[i].image_id);
            CHECK(pa[i].occurrence == pb[i].occurrence);
        }
    }
}

TEST_CASE("index file round trip and vocabulary hash check") {
    const auto vocab = small_vocab(10, 3, 8);
    Rng rng(11);
    std::vector<FeatureSet> sets;
    for (int i = 0; i < 6; ++i) {
        sets.push_back(ccr::testing::random_feature_set(rng, "s" + std::to_string(i), 3, 7, 9));
    }
    const auto idx = build_index(sets, vocab);
    TempDir dir("index_rt");
    std::filesystem::create_directories(dir / "sub");
    write_vocabulary(*vocab, dir / "vocab.ccrvoc");
    write_index(idx, dir / "sub" / "refs.ccridx", dir / "vocab.ccrvoc");
    CHECK(ccr::testing::slurp(dir / "sub" / "refs.ccridx").find("vocab ../vocab.ccrvoc ") !=
          std::string::npos);

    const auto back = read_index(dir / "sub" / "refs.ccridx");
    CHECK(back.vocabulary() == *vocab);
    REQUIRE(back.size() == idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        CHECK(*back.images()[i] == *idx.images()[i]);
    }

    // Rewriting gives identical bytes.
    write_index(back, dir / "again.ccridx", dir / "vocab.ccrvoc");
    auto a = ccr::testing::slurp(dir / "sub" / "refs.ccridx");
    auto b = ccr::testing::slurp(dir / "again.ccridx");
    a.erase(0, a.find('\n', a.find("vocab ")));
    b.erase(0, b.find('\n', b.find("vocab ")));
    CHECK(a == b);

    // A different vocabulary under the same name is detected.
    write_vocabulary(*small_vocab(12, 3, 8), dir / "vocab.ccrvoc");
    CHECK_THROWS_AS(read_index(dir / "sub" / "refs.ccridx"), Error);
    CHECK_THROWS_AS(read_index(dir / "missing.ccridx"), Error);
}

}  // TEST_SUITE
