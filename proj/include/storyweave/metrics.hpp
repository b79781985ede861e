#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>

#include "storyweave/classifier.hpp"
#include "storyweave/labels.hpp"

namespace storyweave {

struct LabelMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

using ConfusionMatrix = std::array<std::array<std::size_t, kNumLabels>, kNumLabels>;  // [gold][pred]

struct EvalReport {
    std::array<LabelMetrics, kNumLabels> per_label{};
    LabelMetrics micro;
    LabelMetrics macro;
    std::size_t total_support = 0;
    ConfusionMatrix confusion{};
};

/// Per-label P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2TP/(2TP+FP+FN), each 0 on
/// a zero denominator. Micro from summed counts, macro as unweighted means.
EvalReport report_from_confusion(const ConfusionMatrix& confusion);

/// Throws std::invalid_argument if the spans differ in length or are empty.
EvalReport evaluate_predictions(std::span<const RelationLabel> gold,
                                std::span<const RelationLabel> predicted);

EvalReport evaluate(const RelationModel& model, std::span<const LabeledPair> test);

/// Aligned text table: one row per label, then micro and macro averages.
std::string render_report(const EvalReport& report);

}  // namespace storyweave
