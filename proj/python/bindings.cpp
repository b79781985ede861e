// Python surface of the core library. Structured results cross as JSON text
// and are decoded by the storyweave package.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "storyweave/checkpoint.hpp"
#include "storyweave/importance.hpp"
#include "storyweave/metrics.hpp"
#include "storyweave/pipeline.hpp"
#include "storyweave/text.hpp"

namespace py = pybind11;
using namespace storyweave;

namespace {

py::dict scores_dict(const RelationScores& scores) {
    py::dict out;
    for (auto label : kAllLabels) {
        out[py::str(std::string(label_name(label)))] = scores[label_index(label)];
    }
    return out;
}

RelationLabel label_arg(const std::string& name) {
    const auto label = parse_label(name);
    if (!label) {
        throw std::invalid_argument("unknown label: " + name);
    }
    return *label;
}

std::string run(const std::filesystem::path& corpus, const std::filesystem::path& ckpt,
                double threshold, std::size_t min_words, std::uint64_t seed,
                const std::string& language, std::size_t min_df, bool cross_topic,
                std::size_t max_pairs_per_docpair, bool importance, const std::string& sort,
                std::size_t threads, const std::optional<std::filesystem::path>& out_dir) {
    PipelineConfig config;
    config.threshold = threshold;
    config.min_words = min_words;
    config.seed = seed;
    config.language = language;
    config.min_df = min_df;
    config.cross_topic = cross_topic;
    config.max_pairs_per_docpair = max_pairs_per_docpair;
    config.importance = importance;
    config.order = parse_rank_mode(sort);
    config.threads = threads;

    PipelineResult result;
    {
        py::gil_scoped_release release;
        result = run_pipeline(corpus, ckpt, config);
        if (out_dir) {
            write_pipeline_output(result, *out_dir);
        }
    }
    nlohmann::json candidates = nlohmann::json::array();
    for (const auto& c : result.candidates) {
        candidates.push_back(candidate_to_json(c));
    }
    return nlohmann::json{{"stats", stats_to_json(result.stats)}, {"candidates", candidates}}.dump();
}

std::pair<std::string, double> nuclearity_of(const std::string& a, const std::string& b,
                                             const std::string& topic) {
    const std::vector<std::vector<std::string>> docs = {tokenize(a), tokenize(b), tokenize(topic)};
    const auto vocab = Vocabulary::from_token_lists(docs);
    const auto verdict = nuclearity(a, b, tfidf_vector(topic, vocab), vocab);
    return {std::string(to_string(verdict.label)), verdict.confidence};
}

std::string evaluate_labels(const std::vector<std::string>& gold,
                            const std::vector<std::string>& pred) {
    std::vector<RelationLabel> g, p;
    for (const auto& s : gold) {
        g.push_back(label_arg(s));
    }
    for (const auto& s : pred) {
        p.push_back(label_arg(s));
    }
    const auto report = evaluate_predictions(g, p);
    auto metrics = [](const LabelMetrics& m) {
        return nlohmann::json{{"precision", m.precision},
                              {"recall", m.recall},
                              {"f1", m.f1},
                              {"support", m.support}};
    };
    nlohmann::json per_label;
    for (auto label : kAllLabels) {
        per_label[std::string(label_name(label))] = metrics(report.per_label[label_index(label)]);
    }
    return nlohmann::json{{"per_label", per_label},
                          {"micro", metrics(report.micro)},
                          {"macro", metrics(report.macro)},
                          {"table", render_report(report)}}
        .dump();
}

}  // namespace

PYBIND11_MODULE(_storyweave, m) {
    py::register_exception<PipelineError>(m, "PipelineError", PyExc_RuntimeError);

    m.def("tokenize", &tokenize, py::arg("text"));
    m.def("labels", [] {
        std::vector<std::string> out;
        for (auto label : kAllLabels) {
            out.emplace_back(label_name(label));
        }
        return out;
    });

    py::class_<RelationModel>(m, "Model")
        .def_property_readonly("hidden_dim",
                               [](const RelationModel& r) { return r.encoder_config.hidden_dim; })
        .def_property_readonly("output", [](const RelationModel& r) {
            return r.output == OutputMode::softmax ? "softmax" : "sigmoid";
        })
        .def("score",
             [](const RelationModel& r, const std::string& a, const std::string& b) {
                 RelationScores s;
                 {
                     py::gil_scoped_release release;
                     s = r.score(a, b);
                 }
                 return scores_dict(s);
             },
             py::arg("arg1"), py::arg("arg2"))
        .def("predict",
             [](const RelationModel& r, const std::string& a, const std::string& b) {
                 return std::string(label_name(predict_label(r.score(a, b))));
             },
             py::arg("arg1"), py::arg("arg2"))
        .def("encode", [](const RelationModel& r, const std::string& text) {
            const auto h = r.encode_text(text);
            return std::vector<double>(h.data(), h.data() + h.size());
        });

    m.def("load_model", &load_checkpoint, py::arg("path"));
    m.def("_run_pipeline", &run, py::arg("corpus"), py::arg("checkpoint"), py::arg("threshold"),
          py::arg("min_words"), py::arg("seed"), py::arg("language"), py::arg("min_df"),
          py::arg("cross_topic"), py::arg("max_pairs_per_docpair"), py::arg("importance"),
          py::arg("sort"), py::arg("threads"), py::arg("out_dir"));
    m.def("nuclearity", &nuclearity_of, py::arg("a"), py::arg("b"), py::arg("topic"));
    m.def("_evaluate", &evaluate_labels, py::arg("gold"), py::arg("pred"));
}
