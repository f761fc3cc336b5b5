#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ccr/descriptors.hpp"
#include "ccr/geometry.hpp"
#include "ccr/vocabulary.hpp"

namespace ccr {

inline constexpr int kIndexFormatVersion = 1;

struct Occurrence {
    WordId word = 0;
    SuperpixelId superpixel = 0;
    Point pos;

    friend bool operator==(const Occurrence&, const Occurrence&) = default;
};

/// A reference image reduced to visual words. Raw descriptors are not kept.
struct IndexedImage {
    std::string image_id;
    std::vector<double> global_desc;
    std::vector<Point> superpixels;
    AdjacencyGraph adjacency;
    std::vector<Occurrence> occurrences;

    friend bool operator==(const IndexedImage&, const IndexedImage&) = default;
};

/// Quantizes every feature and triangulates the superpixel centers.
IndexedImage index_image(const FeatureSet& fs, const Vocabulary& vocab);

struct Posting {
    std::string_view image_id;
    std::size_t occurrence = 0;
};

class InvertedIndex {
public:
    explicit InvertedIndex(std::shared_ptr<const Vocabulary> vocab);

    const Vocabulary& vocabulary() const { return *vocab_; }
    std::shared_ptr<const Vocabulary> shared_vocabulary() const { return vocab_; }

    /// Throws Error on a duplicate image_id or inconsistent image.
    void add(IndexedImage img);

    /// Entries in insertion order; empty for words never seen.
    std::span<const Posting> postings(WordId w) const;

    std::size_t size() const { return images_.size(); }
    bool empty() const { return images_.empty(); }
    const IndexedImage* find(std::string_view image_id) const;
    /// Images in insertion order.
    const std::vector<std::unique_ptr<IndexedImage>>& images() const { return images_; }

private:
    std::shared_ptr<const Vocabulary> vocab_;
    std::vector<std::unique_ptr<IndexedImage>> images_;
    std::map<std::string, const IndexedImage*, std::less<>> by_id_;
    std::vector<std::vector<Posting>> postings_;
};

/// Indexes feature sets in parallel and inserts them in image_id order.
InvertedIndex build_index(std::span<const FeatureSet> sets,
                          std::shared_ptr<const Vocabulary> vocab, std::size_t threads = 1);

/// Writes the index. The vocabulary is referenced by `vocab_path`, stored
/// relative to the index file's directory, together with the FNV-1a hash of
/// the vocabulary file bytes.
void write_index(const InvertedIndex& idx, const std::filesystem::path& path,
                 const std::filesystem::path& vocab_path);

/// Reads an index and its vocabulary. `vocab_override`, when non-empty,
/// replaces the embedded vocabulary path; the content hash is checked either way.
InvertedIndex read_index(const std::filesystem::path& path,
                         const std::filesystem::path& vocab_override = {});

}  // namespace ccr
