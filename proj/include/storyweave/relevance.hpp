#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "storyweave/corpus.hpp"

namespace storyweave {

/// Term dictionary with document frequencies. Terms are indexed in
/// lexicographic order so the mapping is independent of corpus order.
class Vocabulary {
public:
    Vocabulary() = default;

    /// Each inner list is one document's tokens. Throws std::invalid_argument
    /// with "empty corpus" when `docs` is empty, or when min_df is 0.
    static Vocabulary from_token_lists(std::span<const std::vector<std::string>> docs,
                                       std::size_t min_df = 1);

    std::size_t size() const { return terms_.size(); }
    std::size_t n_docs() const { return n_docs_; }
    const std::vector<std::string>& terms() const { return terms_; }

    /// Index of `term`, or npos.
    std::size_t index_of(std::string_view term) const;
    std::size_t document_frequency(std::size_t index) const { return df_.at(index); }
    /// Smoothed idf: ln((1 + N) / (1 + df)) + 1.
    double idf(std::size_t index) const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::vector<std::string> terms_;
    std::vector<std::size_t> df_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t n_docs_ = 0;
};

Vocabulary build_vocabulary(const Corpus& corpus, std::size_t min_df = 1);

struct SparseEntry {
    std::size_t index;
    double weight;

    bool operator==(const SparseEntry&) const = default;
};

/// Strictly increasing indices, strictly positive weights.
struct SparseVector {
    std::vector<SparseEntry> entries;

    bool empty() const { return entries.empty(); }
    double norm() const;
    double dot(const SparseVector& other) const;
};

/// Raw-count tf times smoothed idf; tokens outside the vocabulary are ignored.
SparseVector tfidf_vector(std::span<const std::string> tokens, const Vocabulary& vocab);
SparseVector tfidf_vector(std::string_view text, const Vocabulary& vocab);

/// Zero when either side is empty.
double cosine(const SparseVector& a, const SparseVector& b);

struct SimilarityPair {
    std::string id_a;  // id_a < id_b
    std::string id_b;
    double score = 0.0;

    bool operator==(const SimilarityPair&) const = default;
};

/// topic -> document ids in corpus order; std::map keeps topics sorted.
std::map<std::string, std::vector<std::string>> group_by_topic(const Corpus& corpus);

struct RankedDocument {
    std::string id;
    double score;
};

/// Candidates by descending cosine to the seed, ties by ascending id.
/// Throws std::invalid_argument if the seed itself is among the candidates.
std::vector<RankedDocument> topic_relevance(const Document& seed,
                                            std::span<const Document> candidates,
                                            const Vocabulary& vocab);

inline constexpr double kDefaultPairThreshold = 0.15;

/// Every unordered pair in `group` with cosine strictly above `threshold`,
/// ordered by (id_a, id_b).
std::vector<SimilarityPair> candidate_pairs(std::span<const Document> group,
                                            const Vocabulary& vocab,
                                            double threshold = kDefaultPairThreshold);

/// Full cross product segments(id_a) x segments(id_b).
std::vector<std::pair<Segment, Segment>> segment_pairs(const SimilarityPair& pair,
                                                       const Corpus& corpus);

}  // namespace storyweave
