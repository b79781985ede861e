#include "storyweave/metrics.hpp"

#include <stdexcept>

#include <fmt/core.h>

namespace storyweave {
namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

LabelMetrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    LabelMetrics m;
    m.precision = ratio(tp, tp + fp);
    m.recall = ratio(tp, tp + fn);
    m.f1 = ratio(2 * tp, 2 * tp + fp + fn);
    m.support = tp + fn;
    return m;
}

std::string row(std::string_view name, const LabelMetrics& m) {
    return fmt::format("{:<15}{:>11.2f}{:>9.2f}{:>11.2f}{:>10}\n", name, m.precision, m.recall,
                       m.f1, m.support);
}

}  // namespace

EvalReport report_from_confusion(const ConfusionMatrix& confusion) {
    EvalReport r;
    r.confusion = confusion;
    std::size_t tp_sum = 0;
    std::size_t fp_sum = 0;
    std::size_t fn_sum = 0;
    double p_sum = 0.0;
    double r_sum = 0.0;
    double f_sum = 0.0;
    for (std::size_t k = 0; k < kNumLabels; ++k) {
        const std::size_t tp = confusion[k][k];
        std::size_t fp = 0;
        std::size_t fn = 0;
        for (std::size_t j = 0; j < kNumLabels; ++j) {
            if (j != k) {
                fn += confusion[k][j];
                fp += confusion[j][k];
            }
        }
        r.per_label[k] = from_counts(tp, fp, fn);
        tp_sum += tp;
        fp_sum += fp;
        fn_sum += fn;
        p_sum += r.per_label[k].precision;
        r_sum += r.per_label[k].recall;
        f_sum += r.per_label[k].f1;
        r.total_support += r.per_label[k].support;
    }
    r.micro = from_counts(tp_sum, fp_sum, fn_sum);
    const auto n = static_cast<double>(kNumLabels);
    r.macro.precision = p_sum / n;
    r.macro.recall = r_sum / n;
    r.macro.f1 = f_sum / n;
    r.macro.support = r.total_support;
    return r;
}

EvalReport evaluate_predictions(std::span<const RelationLabel> gold,
                                std::span<const RelationLabel> predicted) {
    if (gold.size() != predicted.size()) {
        throw std::invalid_argument(fmt::format("{} gold labels but {} predictions", gold.size(),
                                                predicted.size()));
    }
    if (gold.empty()) {
        throw std::invalid_argument("nothing to evaluate");
    }
    ConfusionMatrix confusion{};
    for (std::size_t i = 0; i < gold.size(); ++i) {
        ++confusion[label_index(gold[i])][label_index(predicted[i])];
    }
    return report_from_confusion(confusion);
}

EvalReport evaluate(const RelationModel& model, std::span<const LabeledPair> test) {
    std::vector<RelationLabel> gold;
    std::vector<RelationLabel> predicted;
    gold.reserve(test.size());
    predicted.reserve(test.size());
    for (const auto& ex : test) {
        gold.push_back(ex.label);
        predicted.push_back(predict_label(model.score(ex.arg1, ex.arg2)));
    }
    return evaluate_predictions(gold, predicted);
}

std::string render_report(const EvalReport& report) {
    std::string out = fmt::format("{:<15}{:>11}{:>9}{:>11}{:>10}\n", "PDTB Relation", "Precision",
                                  "Recall", "F1-score", "Support");
    const std::string rule(56, '-');
    out += rule + '\n';
    for (auto label : kAllLabels) {
        out += row(label_name(label), report.per_label[label_index(label)]);
    }
    out += rule + '\n';
    out += row("Micro avg.", report.micro);
    out += row("Macro avg.", report.macro);
    return out;
}

}  // namespace storyweave
