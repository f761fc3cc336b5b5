#include "ccr/index.hpp"

#include <algorithm>
#include <cstdio>
#include <iterator>
#include <sstream>

#include "text_reader.hpp"

namespace ccr {

IndexedImage index_image(const FeatureSet& fs, const Vocabulary& vocab) {
    validate(fs);
    if (fs.desc_dim != vocab.dim()) {
        throw Error("feature set '" + fs.image_id + "' has descriptor dimension " +
                    std::to_string(fs.desc_dim) + " but the vocabulary has " +
                    std::to_string(vocab.dim()));
    }
    IndexedImage img;
    img.image_id = fs.image_id;
    img.global_desc = fs.global_desc;
    img.superpixels = fs.superpixel_centers();
    try {
        img.adjacency = delaunay_adjacency(img.superpixels);
    } catch (const Error& e) {
        throw Error("feature set '" + fs.image_id + "': superpixel centers: " + e.what());
    }
    img.occurrences.reserve(fs.features.size());
    for (const auto& f : fs.features) {
        img.occurrences.push_back({vocab.quantize(f.desc).word, f.superpixel, f.pos});
    }
    return img;
}

InvertedIndex::InvertedIndex(std::shared_ptr<const Vocabulary> vocab) : vocab_(std::move(vocab)) {
    if (!vocab_) {
        throw Error("inverted index needs a vocabulary");
    }
    postings_.resize(vocab_->size());
}

void InvertedIndex::add(IndexedImage img) {
    if (by_id_.contains(img.image_id)) {
        throw Error("image '" + img.image_id + "' is already indexed");
    }
    if (img.adjacency.size() != img.superpixels.size()) {
        throw Error("image '" + img.image_id + "': adjacency covers " +
                    std::to_string(img.adjacency.size()) + " nodes but there are " +
                    std::to_string(img.superpixels.size()) + " superpixels");
    }
    for (const auto& occ : img.occurrences) {
        if (occ.word >= vocab_->size()) {
            throw Error("image '" + img.image_id + "': word " + std::to_string(occ.word) +
                        " outside the vocabulary");
        }
        if (occ.superpixel >= img.superpixels.size()) {
            throw Error("image '" + img.image_id + "': dangling superpixel " +
                        std::to_string(occ.superpixel));
        }
    }
    if (!images_.empty() && !img.global_desc.empty() &&
        img.global_desc.size() != images_.front()->global_desc.size()) {
        throw Error("image '" + img.image_id + "' has global dimension " +
                    std::to_string(img.global_desc.size()) + ", index uses " +
                    std::to_string(images_.front()->global_desc.size()));
    }
    auto owned = std::make_unique<IndexedImage>(std::move(img));
    const IndexedImage* ptr = owned.get();
    images_.push_back(std::move(owned));
    by_id_.emplace(ptr->image_id, ptr);
    for (std::size_t i = 0; i < ptr->occurrences.size(); ++i) {
        postings_[ptr->occurrences[i].word].push_back({ptr->image_id, i});
    }
}

std::span<const Posting> InvertedIndex::postings(WordId w) const {
    if (w >= postings_.size()) {
        return {};
    }
    return postings_[w];
}

const IndexedImage* InvertedIndex::find(std::string_view image_id) const {
    const auto it = by_id_.find(image_id);
    return it == by_id_.end() ? nullptr : it->second;
}

InvertedIndex build_index(std::span<const FeatureSet> sets,
                          std::shared_ptr<const Vocabulary> vocab, std::size_t threads) {
    InvertedIndex idx(vocab);
    std::vector<IndexedImage> images(sets.size());
    parallel_for(sets.size(), threads,
                 [&](std::size_t i) { images[i] = index_image(sets[i], *vocab); });
    std::sort(images.begin(), images.end(),
              [](const IndexedImage& a, const IndexedImage& b) { return a.image_id < b.image_id; });
    for (auto& img : images) {
        idx.add(std::move(img));
    }
    return idx;
}

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return fnv1a64(buf.str());
}

}  // namespace

void write_index(const InvertedIndex& idx, const std::filesystem::path& path,
                 const std::filesystem::path& vocab_path) {
    const auto base = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
    const std::string rel = std::filesystem::proximate(vocab_path, base).generic_string();
    if (rel.find_first_of(" \t") != std::string::npos) {
        throw Error("vocabulary path '" + rel + "' must not contain whitespace");
    }
    const std::uint64_t hash = file_hash(vocab_path);
    if (read_vocabulary(vocab_path) != idx.vocabulary()) {
        throw Error("vocabulary file '" + vocab_path.string() +
                    "' does not match the index's vocabulary");
    }

    std::vector<const IndexedImage*> images;
    for (const auto& img : idx.images()) {
        images.push_back(img.get());
    }
    std::sort(images.begin(), images.end(),
              [](const IndexedImage* a, const IndexedImage* b) { return a->image_id < b->image_id; });

    std::ostringstream out;
    out << "CCRIDX " << kIndexFormatVersion << '\n';
    out << "vocab " << rel << ' ' << hex64(hash) << '\n';
    out << "num_images " << images.size() << '\n';
    for (const auto* img : images) {
        out << "image " << img->image_id << '\n';
        out << "global_dim " << img->global_desc.size() << '\n';
        out << "global";
        detail::write_numbers(out, img->global_desc);
        out << '\n';
        out << "num_superpixels " << img->superpixels.size() << '\n';
        for (std::size_t s = 0; s < img->superpixels.size(); ++s) {
            out << "sp " << s << ' ' << format_double(img->superpixels[s].x) << ' '
                << format_double(img->superpixels[s].y) << '\n';
        }
        out << "num_edges " << img->adjacency.edges().size() << '\n';
        for (const auto& [i, j] : img->adjacency.edges()) {
            out << "e " << i << ' ' << j << '\n';
        }
        out << "num_occurrences " << img->occurrences.size() << '\n';
        for (const auto& occ : img->occurrences) {
            out << "o " << occ.word << ' ' << occ.superpixel << ' ' << format_double(occ.pos.x)
                << ' ' << format_double(occ.pos.y) << '\n';
        }
    }
    detail::write_file(path, [&](std::ostream& os) { os << out.str(); });
}

InvertedIndex read_index(const std::filesystem::path& path,
                         const std::filesystem::path& vocab_override) {
    auto in = detail::open_input(path);
    detail::LineReader r(in, path.string());
    detail::expect_magic(r, "CCRIDX", kIndexFormatVersion);
    r.expect_record("vocab", 2);
    std::filesystem::path vocab_path = vocab_override;
    if (vocab_path.empty()) {
        vocab_path = std::filesystem::path(std::string(r.tokens()[1]));
        if (vocab_path.is_relative()) {
            vocab_path = path.parent_path() / vocab_path;
        }
    }
    const std::string expected_hash(r.tokens()[2]);
    const std::size_t vocab_line = r.line_no();
    if (!std::filesystem::exists(vocab_path)) {
        r.fail("vocabulary file '" + vocab_path.string() + "' not found");
    }
    const std::string actual_hash = hex64(file_hash(vocab_path));
    if (actual_hash != expected_hash) {
        throw Error(path.string() + ":" + std::to_string(vocab_line) + ": vocabulary '" +
                    vocab_path.string() + "' has hash " + actual_hash + ", index expects " +
                    expected_hash);
    }
    auto vocab = std::make_shared<const Vocabulary>(read_vocabulary(vocab_path));
    InvertedIndex idx(vocab);

    r.expect_record("num_images", 1);
    const auto num_images = r.count(1);
    for (std::size_t n = 0; n < num_images; ++n) {
        IndexedImage img;
        r.expect_record("image", 1);
        img.image_id = std::string(r.tokens()[1]);
        r.expect_record("global_dim", 1);
        const auto g = r.count(1);
        r.expect_record("global", g);
        for (std::size_t i = 0; i < g; ++i) {
            img.global_desc.push_back(r.finite_number(i + 1));
        }
        r.expect_record("num_superpixels", 1);
        const auto s = r.count(1);
        for (std::size_t i = 0; i < s; ++i) {
            r.expect_record("sp", 3);
            if (r.count(1) != i) {
                r.fail("superpixel ids must ascend 0..S-1");
            }
            img.superpixels.push_back({r.finite_number(2), r.finite_number(3)});
        }
        r.expect_record("num_edges", 1);
        const auto e = r.count(1);
        std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
        for (std::size_t i = 0; i < e; ++i) {
            r.expect_record("e", 2);
            edges.emplace_back(static_cast<std::uint32_t>(r.count(1)),
                               static_cast<std::uint32_t>(r.count(2)));
        }
        try {
            img.adjacency = AdjacencyGraph(s, std::move(edges));
        } catch (const Error& err) {
            r.fail(err.what());
        }
        r.expect_record("num_occurrences", 1);
        const auto m = r.count(1);
        img.occurrences.reserve(m);
        for (std::size_t i = 0; i < m; ++i) {
            r.expect_record("o", 4);
            img.occurrences.push_back({static_cast<WordId>(r.count(1)),
                                       static_cast<SuperpixelId>(r.count(2)),
                                       {r.finite_number(3), r.finite_number(4)}});
        }
        try {
            idx.add(std::move(img));
        } catch (const Error& err) {
            r.fail(err.what());
        }
    }
    if (r.next_nonblank()) {
        r.fail("trailing content after images");
    }
    return idx;
}

}  // namespace ccr
