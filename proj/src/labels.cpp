#include "storyweave/labels.hpp"

namespace storyweave {
namespace {

constexpr std::array<std::string_view, kNumLabels> kNames = {
    "Comparison", "Contingency", "Expansion", "Temporal", "None",
};
constexpr std::array<std::string_view, kNumLabels> kAbbrev = {"Co.", "Ct.", "E.", "T.", "N."};

}  // namespace

std::string_view label_name(RelationLabel label) { return kNames[label_index(label)]; }

std::string_view label_abbreviation(RelationLabel label) { return kAbbrev[label_index(label)]; }

std::optional<RelationLabel> parse_label(std::string_view name) {
    for (auto label : kAllLabels) {
        if (label_name(label) == name) {
            return label;
        }
    }
    return std::nullopt;
}

std::optional<RelationLabel> collapse_sense(std::string_view sense) {
    const auto dot = sense.find('.');
    return parse_label(sense.substr(0, dot));
}

RelationLabel predict_label(const RelationScores& scores) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < kNumLabels; ++i) {
        if (scores[i] > scores[best]) {
            best = i;
        }
    }
    return kAllLabels[best];
}

}  // namespace storyweave
