#include "storyweave/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <utility>

#include <fmt/core.h>

#include "storyweave/checkpoint.hpp"
#include "storyweave/importance.hpp"
#include "storyweave/jsonl.hpp"
#include "storyweave/relevance.hpp"
#include "storyweave/text.hpp"

namespace storyweave {
namespace {

using nlohmann::json;

template <typename Fn>
auto run_stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const PipelineError&) {
        throw;
    } catch (const std::exception& e) {
        throw PipelineError(name, e.what());
    }
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string pair_topic(const Document& a, const Document& b) {
    return a.topic == b.topic ? a.topic : fmt::format("{} / {}", a.topic, b.topic);
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                    next = n;
                }
            }
        });
    }
    workers.clear();
    if (error) {
        std::rethrow_exception(error);
    }
}

std::string format_score(double v) {
    auto s = fmt::format("{:.2f}", v);
    if (s.starts_with("0.")) {
        s.erase(0, 1);
    } else if (s.starts_with("-0.")) {
        s.erase(1, 1);
    }
    return s;
}

std::string table_cell(std::string_view text) {
    std::string out;
    for (char c : text) {
        if (c == '|') {
            out += "\\|";
        } else if (c == '\n' || c == '\r') {
            out += ' ';
        } else {
            out += c;
        }
    }
    return out;
}

auto tie_key(const RelationCandidate& c) {
    return std::tie(c.topic, c.segment_a.doc_id, c.segment_a.index, c.segment_b.doc_id,
                    c.segment_b.index);
}

}  // namespace

double RelationCandidate::confidence() const {
    return *std::max_element(scores.begin(), scores.end());
}

PipelineError::PipelineError(std::string stage, const std::string& message)
    : std::runtime_error(fmt::format("{}: {}", stage, message)), stage_(std::move(stage)) {}

Corpus load_corpus_input(const std::filesystem::path& path, IngestReport* report) {
    if (std::filesystem::is_directory(path)) {
        auto corpus = load_corpus(path);
        corpus.segments.clear();
        if (report) {
            *report = {};
            report->lines = report->accepted = corpus.documents.size();
        }
        return corpus;
    }
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot read corpus {}", path.string()));
    }
    return ingest_corpus(in, report);
}

PipelineResult run_pipeline(const Corpus& raw, const RelationModel& model,
                            const PipelineConfig& config) {
    const auto started = std::chrono::steady_clock::now();
    PipelineResult result;
    auto& stats = result.stats;
    stats.documents_ingested = raw.documents.size();

    result.corpus = run_stage("filter_language", [&] {
        auto filtered = filter_language(raw, config.language);
        filtered.segments.clear();
        return filtered;
    });
    auto& corpus = result.corpus;
    stats.documents_retained = corpus.documents.size();

    run_stage("segment_sentences", [&] { segment_corpus(corpus, config.min_words); });
    stats.segments = corpus.segments.size();

    const auto groups = run_stage("group_by_topic", [&] { return group_by_topic(corpus); });
    stats.topic_groups = groups.size();
    std::map<std::string, TopicStats> topic_stats;
    for (const auto& [topic, ids] : groups) {
        topic_stats[topic] = TopicStats{topic, ids.size(), 0, 0};
    }

    if (corpus.documents.empty()) {
        for (auto& [topic, ts] : topic_stats) {
            stats.topics.push_back(std::move(ts));
        }
        stats.duration_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
                .count();
        return result;
    }

    const auto vocab =
        run_stage("build_vocabulary", [&] { return build_vocabulary(corpus, config.min_df); });

    struct DocPair {
        SimilarityPair pair;
        std::string topic;
    };
    std::vector<DocPair> doc_pairs = run_stage("candidate_pairs", [&] {
        std::vector<DocPair> out;
        auto add_group = [&](const std::vector<std::string>& ids) {
            std::vector<Document> docs;
            docs.reserve(ids.size());
            for (const auto& id : ids) {
                docs.push_back(*corpus.find_document(id));
            }
            for (auto& p : candidate_pairs(docs, vocab, config.threshold)) {
                auto topic = pair_topic(*corpus.find_document(p.id_a), *corpus.find_document(p.id_b));
                out.push_back({std::move(p), std::move(topic)});
            }
        };
        if (config.cross_topic) {
            std::vector<std::string> all;
            for (const auto& d : corpus.documents) {
                all.push_back(d.id);
            }
            add_group(all);
        } else {
            for (const auto& [topic, ids] : groups) {
                add_group(ids);
            }
        }
        return out;
    });
    stats.document_pairs = doc_pairs.size();

    struct PendingPair {
        const Segment* a;
        const Segment* b;
        std::size_t doc_pair;
    };
    std::vector<PendingPair> pending = run_stage("segment_pairs", [&] {
        std::unordered_map<std::string, const Segment*> by_id;
        for (const auto& s : corpus.segments) {
            by_id.emplace(s.id(), &s);
        }
        std::vector<PendingPair> out;
        for (std::size_t k = 0; k < doc_pairs.size(); ++k) {
            const auto& dp = doc_pairs[k];
            auto& ts = topic_stats[dp.topic];
            ts.topic = dp.topic;
            ++ts.document_pairs;
            auto pairs = segment_pairs(dp.pair, corpus);
            std::vector<std::size_t> keep(pairs.size());
            std::iota(keep.begin(), keep.end(), 0);
            if (config.max_pairs_per_docpair > 0 && pairs.size() > config.max_pairs_per_docpair) {
                std::mt19937_64 rng(config.seed ^ fnv1a(dp.pair.id_a + '\n' + dp.pair.id_b));
                std::shuffle(keep.begin(), keep.end(), rng);
                keep.resize(config.max_pairs_per_docpair);
                std::sort(keep.begin(), keep.end());
            }
            for (auto i : keep) {
                out.push_back({by_id.at(pairs[i].first.id()), by_id.at(pairs[i].second.id()), k});
            }
        }
        return out;
    });
    stats.segment_pairs = pending.size();

    std::unordered_map<std::string, double> importance;
    if (config.importance) {
        run_stage("importance", [&] {
            for (const auto& [topic, ids] : groups) {
                std::vector<Segment> segs;
                for (const auto& id : ids) {
                    for (const auto* s : corpus.segments_of(id)) {
                        segs.push_back(*s);
                    }
                }
                if (segs.empty()) {
                    continue;
                }
                const auto topic_vec = tfidf_vector(std::string_view(topic), vocab);
                for (const auto& score : importance_ranking(segs, topic_vec, vocab)) {
                    importance[score.segment_id] = score.score;
                }
            }
        });
    }

    run_stage("classify", [&] {
        std::unordered_map<const Segment*, std::size_t> slot;
        std::vector<const Segment*> unique;
        for (const auto& p : pending) {
            for (const auto* s : {p.a, p.b}) {
                if (slot.emplace(s, unique.size()).second) {
                    unique.push_back(s);
                }
            }
        }
        std::vector<HiddenVector> encoded(unique.size());
        std::vector<SparseVector> vectors(unique.size());
        parallel_for(unique.size(), config.threads, [&](std::size_t i) {
            encoded[i] = model.encode_text(unique[i]->text);
            vectors[i] = tfidf_vector(std::string_view(unique[i]->text), vocab);
        });

        std::vector<RelationCandidate> out(pending.size());
        parallel_for(pending.size(), config.threads, [&](std::size_t i) {
            const auto& p = pending[i];
            const auto ia = slot.at(p.a);
            const auto ib = slot.at(p.b);
            auto& c = out[i];
            c.topic = doc_pairs[p.doc_pair].topic;
            c.segment_a = *p.a;
            c.segment_b = *p.b;
            c.doc_similarity = doc_pairs[p.doc_pair].pair.score;
            c.segment_similarity = cosine(vectors[ia], vectors[ib]);
            c.scores = model.score_encoded(encoded[ia], encoded[ib]);
            c.predicted = predict_label(c.scores);
            if (config.importance) {
                c.importance_a = importance.at(p.a->id());
                c.importance_b = importance.at(p.b->id());
            }
        });
        result.candidates = std::move(out);
    });

    for (const auto& c : result.candidates) {
        ++stats.label_counts[label_index(c.predicted)];
        ++topic_stats[c.topic].candidates;
    }
    for (auto& [topic, ts] : topic_stats) {
        stats.topics.push_back(std::move(ts));
    }
    result.candidates = rank_candidates(std::move(result.candidates), config.order);
    stats.duration_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
    return result;
}

PipelineResult run_pipeline(const std::filesystem::path& corpus_path,
                            const std::filesystem::path& checkpoint_path,
                            const PipelineConfig& config) {
    const auto model = run_stage("load_checkpoint", [&] { return load_checkpoint(checkpoint_path); });
    const auto raw = run_stage("ingest", [&] { return load_corpus_input(corpus_path); });
    return run_pipeline(raw, model, config);
}

RankMode parse_rank_mode(std::string_view name) {
    if (name == "confidence") {
        return RankMode::by_confidence;
    }
    if (name == "importance") {
        return RankMode::by_importance;
    }
    if (name == "similarity") {
        return RankMode::by_similarity;
    }
    throw std::invalid_argument(fmt::format("unknown sort mode '{}'", name));
}

std::string_view rank_mode_name(RankMode mode) {
    switch (mode) {
        case RankMode::by_confidence:
            return "confidence";
        case RankMode::by_importance:
            return "importance";
        case RankMode::by_similarity:
            return "similarity";
    }
    return "confidence";
}

std::vector<RelationCandidate> rank_candidates(std::vector<RelationCandidate> candidates,
                                               RankMode mode) {
    auto primary = [mode](const RelationCandidate& c) -> std::pair<double, double> {
        switch (mode) {
            case RankMode::by_confidence:
                return {c.confidence(), 0.0};
            case RankMode::by_importance:
                return {c.importance_a + c.importance_b, 0.0};
            case RankMode::by_similarity:
                return {c.segment_similarity, c.doc_similarity};
        }
        throw std::invalid_argument("unknown rank mode");
    };
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](const RelationCandidate& x, const RelationCandidate& y) {
                         const auto kx = primary(x);
                         const auto ky = primary(y);
                         if (kx != ky) {
                             return kx > ky;
                         }
                         return tie_key(x) < tie_key(y);
                     });
    return candidates;
}

std::string render_candidate_table(std::span<const RelationCandidate> candidates) {
    std::string out = "| Topic | Segment A | Segment B | S.";
    for (auto label : kAllLabels) {
        out += fmt::format(" | {}", label_abbreviation(label));
    }
    out += " |\n|---|---|---|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& c : candidates) {
        out += fmt::format("| {} | {} | {} | {}", table_cell(c.topic), table_cell(c.segment_a.text),
                           table_cell(c.segment_b.text), format_score(c.segment_similarity));
        const auto winner = predict_label(c.scores);
        for (auto label : kAllLabels) {
            const auto cell = format_score(c.scores[label_index(label)]);
            out += label == winner ? fmt::format(" | **{}**", cell) : fmt::format(" | {}", cell);
        }
        out += " |\n";
    }
    return out;
}

std::string render_candidate_records(std::span<const RelationCandidate> candidates) {
    std::string out;
    for (const auto& c : candidates) {
        out += jsonl::dump_line(candidate_to_json(c));
        out += '\n';
    }
    return out;
}

void export_candidates(std::span<const RelationCandidate> candidates,
                       const std::filesystem::path& path, ExportFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    }
    out << (format == ExportFormat::table ? render_candidate_table(candidates)
                                          : render_candidate_records(candidates));
    if (!out) {
        throw std::runtime_error(fmt::format("failed writing {}", path.string()));
    }
}

std::vector<RelationCandidate> load_candidate_records(const std::filesystem::path& path) {
    std::vector<RelationCandidate> out;
    for (const auto& rec : jsonl::read_file(path)) {
        out.push_back(candidate_from_json(rec));
    }
    return out;
}

json candidate_to_json(const RelationCandidate& c) {
    json scores = json::object();
    for (auto label : kAllLabels) {
        scores[std::string(label_name(label))] = c.scores[label_index(label)];
    }
    return json{{"topic", c.topic},
                {"segment_a", segment_to_json(c.segment_a)},
                {"segment_b", segment_to_json(c.segment_b)},
                {"doc_similarity", c.doc_similarity},
                {"segment_similarity", c.segment_similarity},
                {"scores", std::move(scores)},
                {"predicted", label_name(c.predicted)},
                {"importance_a", c.importance_a},
                {"importance_b", c.importance_b}};
}

RelationCandidate candidate_from_json(const json& j) {
    RelationCandidate c;
    c.topic = j.at("topic").get<std::string>();
    c.segment_a = segment_from_json(j.at("segment_a"));
    c.segment_b = segment_from_json(j.at("segment_b"));
    c.doc_similarity = j.at("doc_similarity").get<double>();
    c.segment_similarity = j.at("segment_similarity").get<double>();
    const auto& scores = j.at("scores");
    for (auto label : kAllLabels) {
        c.scores[label_index(label)] = scores.at(std::string(label_name(label))).get<double>();
    }
    const auto predicted = j.at("predicted").get<std::string>();
    const auto label = parse_label(predicted);
    if (!label) {
        throw std::invalid_argument(fmt::format("unknown label '{}'", predicted));
    }
    c.predicted = *label;
    c.importance_a = j.at("importance_a").get<double>();
    c.importance_b = j.at("importance_b").get<double>();
    return c;
}

json stats_to_json(const PipelineStats& s) {
    json labels = json::object();
    for (auto label : kAllLabels) {
        labels[std::string(label_name(label))] = s.label_counts[label_index(label)];
    }
    json topics = json::array();
    for (const auto& t : s.topics) {
        topics.push_back({{"topic", t.topic},
                          {"documents", t.documents},
                          {"document_pairs", t.document_pairs},
                          {"candidates", t.candidates}});
    }
    return json{{"documents_ingested", s.documents_ingested},
                {"documents_retained", s.documents_retained},
                {"segments", s.segments},
                {"topic_groups", s.topic_groups},
                {"document_pairs", s.document_pairs},
                {"segment_pairs", s.segment_pairs},
                {"label_counts", std::move(labels)},
                {"topics", std::move(topics)}};
}

PipelineStats stats_from_json(const json& j) {
    PipelineStats s;
    s.documents_ingested = j.at("documents_ingested").get<std::size_t>();
    s.documents_retained = j.at("documents_retained").get<std::size_t>();
    s.segments = j.at("segments").get<std::size_t>();
    s.topic_groups = j.at("topic_groups").get<std::size_t>();
    s.document_pairs = j.at("document_pairs").get<std::size_t>();
    s.segment_pairs = j.at("segment_pairs").get<std::size_t>();
    const auto& labels = j.at("label_counts");
    for (auto label : kAllLabels) {
        s.label_counts[label_index(label)] =
            labels.at(std::string(label_name(label))).get<std::size_t>();
    }
    for (const auto& t : j.at("topics")) {
        s.topics.push_back({t.at("topic").get<std::string>(), t.at("documents").get<std::size_t>(),
                            t.at("document_pairs").get<std::size_t>(),
                            t.at("candidates").get<std::size_t>()});
    }
    return s;
}

void write_pipeline_output(const PipelineResult& result, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_corpus(result.corpus, dir);
    export_candidates(result.candidates, dir / "candidates.jsonl", ExportFormat::records);
    export_candidates(result.candidates, dir / "candidates.md", ExportFormat::table);
    std::ofstream out(dir / "stats.json", std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot write {}", (dir / "stats.json").string()));
    }
    out << stats_to_json(result.stats).dump(2) << '\n';
}

PipelineOutput load_pipeline_output(const std::filesystem::path& dir) {
    PipelineOutput out;
    out.corpus = load_corpus(dir);
    out.candidates = load_candidate_records(dir / "candidates.jsonl");
    std::ifstream in(dir / "stats.json");
    if (!in) {
        throw std::runtime_error(fmt::format("cannot read {}", (dir / "stats.json").string()));
    }
    out.stats = stats_from_json(json::parse(in));
    return out;
}

}  // namespace storyweave
