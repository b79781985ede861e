#include "storyweave/relevance.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>
#include <stdexcept>

#include <fmt/core.h>

#include "storyweave/text.hpp"

namespace storyweave {

Vocabulary Vocabulary::from_token_lists(std::span<const std::vector<std::string>> docs,
                                        std::size_t min_df) {
    if (docs.empty()) {
        throw std::invalid_argument("empty corpus");
    }
    if (min_df < 1) {
        throw std::invalid_argument("min_df must be at least 1");
    }
    std::map<std::string, std::size_t> df;
    for (const auto& tokens : docs) {
        std::set<std::string_view> distinct(tokens.begin(), tokens.end());
        for (auto t : distinct) {
            ++df[std::string(t)];
        }
    }
    Vocabulary v;
    v.n_docs_ = docs.size();
    for (auto& [term, count] : df) {
        if (count < min_df) {
            continue;
        }
        v.index_.emplace(term, v.terms_.size());
        v.terms_.push_back(term);
        v.df_.push_back(count);
    }
    return v;
}

std::size_t Vocabulary::index_of(std::string_view term) const {
    auto it = index_.find(std::string(term));
    return it == index_.end() ? npos : it->second;
}

double Vocabulary::idf(std::size_t index) const {
    const double n = static_cast<double>(n_docs_);
    const double df = static_cast<double>(df_.at(index));
    return std::log((1.0 + n) / (1.0 + df)) + 1.0;
}

Vocabulary build_vocabulary(const Corpus& corpus, std::size_t min_df) {
    std::vector<std::vector<std::string>> docs;
    docs.reserve(corpus.documents.size());
    for (const auto& d : corpus.documents) {
        docs.push_back(tokenize(d.body));
    }
    return Vocabulary::from_token_lists(docs, min_df);
}

double SparseVector::norm() const {
    double s = 0.0;
    for (const auto& e : entries) {
        s += e.weight * e.weight;
    }
    return std::sqrt(s);
}

double SparseVector::dot(const SparseVector& other) const {
    double s = 0.0;
    auto a = entries.begin();
    auto b = other.entries.begin();
    while (a != entries.end() && b != other.entries.end()) {
        if (a->index < b->index) {
            ++a;
        } else if (b->index < a->index) {
            ++b;
        } else {
            s += a->weight * b->weight;
            ++a;
            ++b;
        }
    }
    return s;
}

SparseVector tfidf_vector(std::span<const std::string> tokens, const Vocabulary& vocab) {
    std::map<std::size_t, std::size_t> counts;
    for (const auto& t : tokens) {
        if (auto idx = vocab.index_of(t); idx != Vocabulary::npos) {
            ++counts[idx];
        }
    }
    SparseVector v;
    v.entries.reserve(counts.size());
    for (auto [idx, tf] : counts) {
        v.entries.push_back({idx, static_cast<double>(tf) * vocab.idf(idx)});
    }
    return v;
}

SparseVector tfidf_vector(std::string_view text, const Vocabulary& vocab) {
    const auto tokens = tokenize(text);
    return tfidf_vector(std::span<const std::string>(tokens), vocab);
}

double cosine(const SparseVector& a, const SparseVector& b) {
    if (a.empty() || b.empty()) {
        return 0.0;
    }
    const double denom = a.norm() * b.norm();
    if (denom == 0.0) {
        return 0.0;
    }
    // dot/denom can exceed 1 by an ulp for parallel vectors
    return std::clamp(a.dot(b) / denom, 0.0, 1.0);
}

std::map<std::string, std::vector<std::string>> group_by_topic(const Corpus& corpus) {
    std::map<std::string, std::vector<std::string>> groups;
    for (const auto& d : corpus.documents) {
        groups[d.topic].push_back(d.id);
    }
    return groups;
}

std::vector<RankedDocument> topic_relevance(const Document& seed,
                                            std::span<const Document> candidates,
                                            const Vocabulary& vocab) {
    const SparseVector seed_vec = tfidf_vector(seed.body, vocab);
    std::vector<RankedDocument> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        if (c.id == seed.id) {
            throw std::invalid_argument(
                fmt::format("seed document {} must not be among the candidates", seed.id));
        }
        out.push_back({c.id, cosine(seed_vec, tfidf_vector(c.body, vocab))});
    }
    std::sort(out.begin(), out.end(), [](const RankedDocument& x, const RankedDocument& y) {
        if (x.score != y.score) {
            return x.score > y.score;
        }
        return x.id < y.id;
    });
    return out;
}

std::vector<SimilarityPair> candidate_pairs(std::span<const Document> group,
                                            const Vocabulary& vocab, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw std::invalid_argument(fmt::format("threshold {} outside [0, 1]", threshold));
    }
    std::vector<SparseVector> vecs;
    vecs.reserve(group.size());
    for (const auto& d : group) {
        vecs.push_back(tfidf_vector(d.body, vocab));
    }
    std::vector<SimilarityPair> out;
    for (std::size_t i = 0; i < group.size(); ++i) {
        for (std::size_t j = i + 1; j < group.size(); ++j) {
            const double score = cosine(vecs[i], vecs[j]);
            if (score > threshold) {
                const bool ordered = group[i].id < group[j].id;
                out.push_back({ordered ? group[i].id : group[j].id,
                               ordered ? group[j].id : group[i].id, score});
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const SimilarityPair& x, const SimilarityPair& y) {
        return std::tie(x.id_a, x.id_b) < std::tie(y.id_a, y.id_b);
    });
    return out;
}

std::vector<std::pair<Segment, Segment>> segment_pairs(const SimilarityPair& pair,
                                                       const Corpus& corpus) {
    if (!corpus.find_document(pair.id_a) || !corpus.find_document(pair.id_b)) {
        throw std::invalid_argument(
            fmt::format("pair ({}, {}) references an unknown document", pair.id_a, pair.id_b));
    }
    const auto a = corpus.segments_of(pair.id_a);
    const auto b = corpus.segments_of(pair.id_b);
    std::vector<std::pair<Segment, Segment>> out;
    out.reserve(a.size() * b.size());
    for (const Segment* sa : a) {
        for (const Segment* sb : b) {
            out.emplace_back(*sa, *sb);
        }
    }
    return out;
}

}  // namespace storyweave
