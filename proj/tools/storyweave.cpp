#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include "storyweave/checkpoint.hpp"
#include "storyweave/corpus.hpp"
#include "storyweave/importance.hpp"
#include "storyweave/jsonl.hpp"
#include "storyweave/metrics.hpp"
#include "storyweave/pipeline.hpp"
#include "storyweave/relation_data.hpp"
#include "storyweave/relevance.hpp"
#include "storyweave/service.hpp"

using namespace storyweave;
using nlohmann::json;

namespace {

HttpService* g_service = nullptr;

void on_signal(int) {
    if (g_service) {
        g_service->stop();
    }
}

void print_report(const IngestReport& r) {
    fmt::print(stderr, "read {} lines: {} accepted, {} empty, {} malformed, {} duplicate\n",
               r.lines, r.accepted, r.dropped_empty, r.malformed, r.duplicates);
    for (const auto& d : r.diagnostics) {
        fmt::print(stderr, "  {}\n", d);
    }
}

// Saved corpus directories keep their segments; record files are segmented here.
Corpus corpus_with_segments(const std::filesystem::path& path, std::size_t min_words) {
    if (std::filesystem::is_directory(path)) {
        auto corpus = load_corpus(path);
        if (corpus.segments.empty()) {
            segment_corpus(corpus, min_words);
        }
        return corpus;
    }
    auto corpus = load_corpus_input(path);
    segment_corpus(corpus, min_words);
    return corpus;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot read {}", path.string()));
    }
    return json::parse(in);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"storyweave: relation candidates for storyline curation"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Read crawl records into a corpus directory");
    std::string ingest_input, ingest_out, ingest_lang = "en";
    std::size_t ingest_min_words = kDefaultMinWords;
    ingest->add_option("--input", ingest_input, "Line-delimited crawl records")->required();
    ingest->add_option("--lang", ingest_lang, "Language to keep")->capture_default_str();
    ingest->add_option("--min-words", ingest_min_words, "Shortest kept sentence")
        ->capture_default_str();
    ingest->add_option("--out", ingest_out, "Corpus directory")->required();

    // pair
    auto* pair = app.add_subcommand("pair", "Document pairs above a cosine threshold");
    std::string pair_corpus, pair_out;
    double pair_threshold = kDefaultPairThreshold;
    bool pair_cross = false;
    std::size_t pair_min_df = 1;
    pair->add_option("--corpus", pair_corpus, "Corpus directory or record file")->required();
    pair->add_option("--threshold", pair_threshold)->capture_default_str();
    pair->add_flag("--cross-topic", pair_cross, "Also pair documents of different topics");
    pair->add_option("--min-df", pair_min_df)->capture_default_str();
    pair->add_option("--out", pair_out, "Pairs file")->required();

    // rank
    auto* rank = app.add_subcommand("rank", "Segment importance with respect to a topic");
    std::string rank_corpus, rank_topic, rank_out;
    std::size_t rank_min_words = kDefaultMinWords;
    rank->add_option("--corpus", rank_corpus, "Corpus directory or record file")->required();
    rank->add_option("--topic", rank_topic, "Seed text describing the topic")->required();
    rank->add_option("--min-words", rank_min_words)->capture_default_str();
    rank->add_option("--out", rank_out, "Scores file")->required();

    // synth
    auto* synth = app.add_subcommand("synth", "Write the synthetic connective corpus");
    std::size_t synth_n = 500;
    std::uint64_t synth_seed = 7;
    double synth_split = 0.8;
    std::string synth_train, synth_test;
    synth->add_option("--per-label", synth_n)->capture_default_str();
    synth->add_option("--seed", synth_seed)->capture_default_str();
    synth->add_option("--split", synth_split, "Training share")->capture_default_str();
    synth->add_option("--out", synth_train, "Training TSV")->required();
    synth->add_option("--test-out", synth_test, "Held-out TSV");

    // train
    auto* trainer = app.add_subcommand("train", "Train the relation classifier");
    std::string train_data, train_config_path, train_out;
    trainer->add_option("--data", train_data, "TSV: arg1, arg2, sense")->required();
    trainer->add_option("--config", train_config_path,
                        "JSON with optional \"encoder\" and \"train\" objects");
    trainer->add_option("--out", train_out, "Checkpoint path")->required();

    // eval
    auto* evaler = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string eval_ckpt, eval_data, eval_report;
    evaler->add_option("--ckpt", eval_ckpt)->required();
    evaler->add_option("--data", eval_data, "TSV: arg1, arg2, sense")->required();
    evaler->add_option("--report", eval_report, "Write the report here as well as stdout");

    // run
    auto* run = app.add_subcommand("run", "Full pipeline from corpus to ranked candidates");
    std::string run_corpus, run_ckpt, run_out, run_sort = "confidence";
    PipelineConfig run_config;
    bool run_no_importance = false;
    run->add_option("--corpus", run_corpus, "Corpus directory or record file")->required();
    run->add_option("--ckpt", run_ckpt)->required();
    run->add_option("--threshold", run_config.threshold)->capture_default_str();
    run->add_option("--min-words", run_config.min_words)->capture_default_str();
    run->add_option("--seed", run_config.seed)->capture_default_str();
    run->add_option("--lang", run_config.language)->capture_default_str();
    run->add_option("--min-df", run_config.min_df)->capture_default_str();
    run->add_flag("--cross-topic", run_config.cross_topic);
    run->add_option("--max-pairs-per-docpair", run_config.max_pairs_per_docpair,
                    "0 keeps every pair")
        ->capture_default_str();
    run->add_flag("--no-importance", run_no_importance);
    run->add_option("--sort", run_sort, "confidence, importance or similarity")
        ->capture_default_str();
    run->add_option("--threads", run_config.threads, "0 uses every core")->capture_default_str();
    run->add_option("--out", run_out, "Output directory")->required();

    // serve
    auto* serve = app.add_subcommand("serve", "HTTP API over a run directory");
    std::string serve_dir, serve_host = "127.0.0.1", serve_static, serve_store;
    int serve_port = 8080;
    serve->add_option("--data-dir", serve_dir, "Output directory of `run`")->required();
    serve->add_option("--port", serve_port)->capture_default_str();
    serve->add_option("--host", serve_host)->capture_default_str();
    serve->add_option("--static", serve_static, "Built UI bundle served under /");
    serve->add_option("--store", serve_store, "Storyline log (default <data-dir>/storylines.jsonl)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            IngestReport report;
            std::ifstream in(ingest_input);
            if (!in) {
                throw std::runtime_error(fmt::format("cannot read {}", ingest_input));
            }
            auto raw = ingest_corpus(in, &report);
            print_report(report);
            auto corpus = filter_language(raw, ingest_lang);
            segment_corpus(corpus, ingest_min_words);
            save_corpus(corpus, ingest_out);
            fmt::print("{} documents, {} segments -> {}\n", corpus.documents.size(),
                       corpus.segments.size(), ingest_out);
        } else if (*pair) {
            const auto corpus = load_corpus_input(pair_corpus);
            const auto vocab = build_vocabulary(corpus, pair_min_df);
            std::vector<json> records;
            auto emit = [&](const std::vector<Document>& docs) {
                for (const auto& p : candidate_pairs(docs, vocab, pair_threshold)) {
                    records.push_back({{"id_a", p.id_a}, {"id_b", p.id_b}, {"score", p.score}});
                }
            };
            if (pair_cross) {
                emit(corpus.documents);
            } else {
                for (const auto& [topic, ids] : group_by_topic(corpus)) {
                    std::vector<Document> docs;
                    for (const auto& id : ids) {
                        docs.push_back(*corpus.find_document(id));
                    }
                    emit(docs);
                }
            }
            jsonl::write_file(pair_out, records);
            fmt::print("{} pairs -> {}\n", records.size(), pair_out);
        } else if (*rank) {
            const auto corpus = corpus_with_segments(rank_corpus, rank_min_words);
            const auto vocab = build_vocabulary(corpus);
            const auto topic_vec = tfidf_vector(std::string_view(rank_topic), vocab);
            std::vector<json> records;
            for (const auto& s : importance_ranking(corpus.segments, topic_vec, vocab)) {
                records.push_back({{"segment_id", s.segment_id},
                                   {"score", s.score},
                                   {"wins", s.wins},
                                   {"ties", s.ties},
                                   {"comparisons", s.comparisons}});
            }
            jsonl::write_file(rank_out, records);
            fmt::print("{} segments -> {}\n", records.size(), rank_out);
        } else if (*synth) {
            auto pairs = generate_synthetic(synth_n, synth_seed);
            if (synth_test.empty()) {
                write_pdtb_format(synth_train, pairs);
                fmt::print("{} pairs -> {}\n", pairs.size(), synth_train);
            } else {
                const auto [train_set, test_set] =
                    split_pairs(std::move(pairs), synth_split, synth_seed);
                write_pdtb_format(synth_train, train_set);
                write_pdtb_format(synth_test, test_set);
                fmt::print("{} training pairs -> {}, {} held-out pairs -> {}\n", train_set.size(),
                           synth_train, test_set.size(), synth_test);
            }
        } else if (*trainer) {
            std::vector<std::string> diagnostics;
            const auto data = load_pdtb_format(train_data, &diagnostics);
            for (const auto& d : diagnostics) {
                fmt::print(stderr, "{}\n", d);
            }
            EncoderConfig encoder_config;
            TrainConfig train_config;
            if (!train_config_path.empty()) {
                const auto config = read_json_file(train_config_path);
                encoder_config = encoder_config_from_json(config.value("encoder", json::object()));
                train_config = train_config_from_json(config.value("train", json::object()));
            }
            auto result = train(data, encoder_config, train_config, [](std::size_t epoch, double loss) {
                fmt::print("epoch {} loss {:.6f}\n", epoch, loss);
                std::fflush(stdout);
            });
            save_checkpoint(result.model, train_out);
            fmt::print("checkpoint -> {}\n", train_out);
        } else if (*evaler) {
            const auto model = load_checkpoint(eval_ckpt);
            std::vector<std::string> diagnostics;
            const auto data = load_pdtb_format(eval_data, &diagnostics);
            for (const auto& d : diagnostics) {
                fmt::print(stderr, "{}\n", d);
            }
            const auto text = render_report(evaluate(model, data));
            fmt::print("{}", text);
            if (!eval_report.empty()) {
                std::ofstream out(eval_report, std::ios::binary | std::ios::trunc);
                out << text;
                if (!out) {
                    throw std::runtime_error(fmt::format("cannot write {}", eval_report));
                }
            }
        } else if (*run) {
            run_config.importance = !run_no_importance;
            run_config.order = parse_rank_mode(run_sort);
            const auto result = run_pipeline(run_corpus, run_ckpt, run_config);
            write_pipeline_output(result, run_out);
            const auto& s = result.stats;
            fmt::print("{} documents ({} retained), {} topics, {} document pairs, {} candidates "
                       "-> {}\n",
                       s.documents_ingested, s.documents_retained, s.topic_groups,
                       s.document_pairs, s.segment_pairs, run_out);
            fmt::print(stderr, "finished in {:.1f} ms\n", s.duration_ms);
        } else if (*serve) {
            auto api = CurationApi::open(
                serve_dir, serve_store.empty() ? std::nullopt
                                               : std::optional<std::filesystem::path>(serve_store));
            HttpService service(*api, serve_static.empty()
                                          ? std::nullopt
                                          : std::optional<std::filesystem::path>(serve_static));
            const int port = service.bind(serve_host, serve_port);
            if (port < 0) {
                throw std::runtime_error(fmt::format("cannot bind {}:{}", serve_host, serve_port));
            }
            g_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            fmt::print("listening on http://{}:{}\n", serve_host, port);
            std::fflush(stdout);
            service.listen();
            g_service = nullptr;
        }
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
