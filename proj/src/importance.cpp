#include "storyweave/importance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "storyweave/text.hpp"

namespace storyweave {
namespace {

bool opens_with_connective(std::span<const std::string> tokens, const ImportanceConfig& config) {
    for (const auto& connective : config.satellite_connectives) {
        const auto words = tokenize(connective);
        if (words.empty() || words.size() > tokens.size()) {
            continue;
        }
        if (std::equal(words.begin(), words.end(), tokens.begin())) {
            return true;
        }
    }
    return false;
}

}  // namespace

std::string_view to_string(Nuclearity n) {
    switch (n) {
        case Nuclearity::NS: return "NS";
        case Nuclearity::SN: return "SN";
        case Nuclearity::NN: break;
    }
    return "NN";
}

NuclearityVerdict nuclearity(std::string_view a, std::string_view b,
                             const SparseVector& topic_vec, const Vocabulary& vocab,
                             const ImportanceConfig& config) {
    const auto tokens_a = tokenize(a);
    const auto tokens_b = tokenize(b);

    const bool sat_a = opens_with_connective(tokens_a, config);
    const bool sat_b = opens_with_connective(tokens_b, config);
    if (sat_a != sat_b) {
        return {sat_a ? Nuclearity::SN : Nuclearity::NS, config.connective_confidence};
    }

    const double sim_a = cosine(tfidf_vector(std::span<const std::string>(tokens_a), vocab), topic_vec);
    const double sim_b = cosine(tfidf_vector(std::span<const std::string>(tokens_b), vocab), topic_vec);
    if (std::abs(sim_a - sim_b) > config.topic_gap) {
        return {sim_a > sim_b ? Nuclearity::NS : Nuclearity::SN, config.similarity_confidence};
    }
    return {Nuclearity::NN, config.tie_confidence};
}

NuclearityVerdict nuclearity(const Segment& a, const Segment& b, const SparseVector& topic_vec,
                             const Vocabulary& vocab, const ImportanceConfig& config) {
    return nuclearity(a.text, b.text, topic_vec, vocab, config);
}

std::vector<ImportanceScore> importance_ranking(std::span<const Segment> segments,
                                                const SparseVector& topic_vec,
                                                const Vocabulary& vocab,
                                                const ImportanceConfig& config) {
    if (segments.empty()) {
        throw std::invalid_argument("importance_ranking needs at least one segment");
    }
    std::vector<ImportanceScore> scores(segments.size());
    for (std::size_t i = 0; i < segments.size(); ++i) {
        scores[i].segment_id = segments[i].id();
    }
    for (std::size_t i = 0; i < segments.size(); ++i) {
        for (std::size_t j = i + 1; j < segments.size(); ++j) {
            const auto verdict = nuclearity(segments[i], segments[j], topic_vec, vocab, config);
            ++scores[i].comparisons;
            ++scores[j].comparisons;
            switch (verdict.label) {
                case Nuclearity::NS: ++scores[i].wins; break;
                case Nuclearity::SN: ++scores[j].wins; break;
                case Nuclearity::NN:
                    ++scores[i].ties;
                    ++scores[j].ties;
                    break;
            }
        }
    }
    for (auto& s : scores) {
        if (s.comparisons > 0) {
            s.score = (static_cast<double>(s.wins) + 0.5 * static_cast<double>(s.ties)) /
                      static_cast<double>(s.comparisons);
        }
    }
    std::sort(scores.begin(), scores.end(), [](const ImportanceScore& x, const ImportanceScore& y) {
        if (x.score != y.score) {
            return x.score > y.score;
        }
        return x.segment_id < y.segment_id;
    });
    return scores;
}

}  // namespace storyweave
