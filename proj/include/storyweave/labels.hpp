#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace storyweave {

/// Top-level discourse senses plus None, in canonical report order.
enum class RelationLabel : std::size_t {
    Comparison = 0,
    Contingency = 1,
    Expansion = 2,
    Temporal = 3,
    None = 4,
};

inline constexpr std::size_t kNumLabels = 5;

inline constexpr std::array<RelationLabel, kNumLabels> kAllLabels = {
    RelationLabel::Comparison, RelationLabel::Contingency, RelationLabel::Expansion,
    RelationLabel::Temporal, RelationLabel::None,
};

std::string_view label_name(RelationLabel label);
/// Short column heading: Co., Ct., E., T., N.
std::string_view label_abbreviation(RelationLabel label);
std::optional<RelationLabel> parse_label(std::string_view name);

/// Maps a sense string such as "Contingency.Cause.Reason" onto its top-level
/// label. Returns nullopt for anything else.
std::optional<RelationLabel> collapse_sense(std::string_view sense);

constexpr std::size_t label_index(RelationLabel label) { return static_cast<std::size_t>(label); }

/// Probabilities aligned to kAllLabels.
using RelationScores = std::array<double, kNumLabels>;

/// Argmax; ties go to the label that comes first in canonical order.
RelationLabel predict_label(const RelationScores& scores);

}  // namespace storyweave
