#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "storyweave/corpus.hpp"
#include "storyweave/relevance.hpp"

namespace storyweave {

// NS: first segment is the nucleus. SN: second is. NN: both are.
enum class Nuclearity { NS, SN, NN };

std::string_view to_string(Nuclearity n);

struct NuclearityVerdict {
    Nuclearity label = Nuclearity::NN;
    double confidence = 0.5;
};

struct ImportanceConfig {
    // Matched against the first tokens of a segment; multi-word entries allowed.
    std::vector<std::string> satellite_connectives = {"because", "although", "while",
                                                      "after",   "when",     "if"};
    double topic_gap = 0.1;
    double connective_confidence = 0.9;
    double similarity_confidence = 0.6;
    double tie_confidence = 0.5;
};

/// Pairwise nucleus/satellite decision from cues in priority order:
///  1. exactly one segment opens with a satellite connective -> it is the satellite
///  2. topic cosine gap above `topic_gap` -> the closer segment is the nucleus
///  3. otherwise both are nuclei
/// Swapping the arguments mirrors the label and keeps the confidence.
NuclearityVerdict nuclearity(std::string_view a, std::string_view b,
                             const SparseVector& topic_vec, const Vocabulary& vocab,
                             const ImportanceConfig& config = {});

NuclearityVerdict nuclearity(const Segment& a, const Segment& b, const SparseVector& topic_vec,
                             const Vocabulary& vocab, const ImportanceConfig& config = {});

struct ImportanceScore {
    std::string segment_id;
    double score = 0.5;
    std::size_t wins = 0;
    std::size_t ties = 0;
    std::size_t comparisons = 0;
};

/// Round-robin tournament over all unordered pairs: a nucleus verdict is a win,
/// NN a tie for both. score = (wins + ties/2) / comparisons, 0.5 when alone.
/// Sorted by score descending, then segment id.
std::vector<ImportanceScore> importance_ranking(std::span<const Segment> segments,
                                                const SparseVector& topic_vec,
                                                const Vocabulary& vocab,
                                                const ImportanceConfig& config = {});

}  // namespace storyweave
