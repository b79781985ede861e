// One PASS/FAIL line per headline property. Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include <fmt/core.h>

#include "dense_oracle.hpp"
#include "gradient_check.hpp"
#include "metric_oracle.hpp"
#include "storyweave/checkpoint.hpp"
#include "storyweave/importance.hpp"
#include "storyweave/relation_data.hpp"
#include "storyweave/service.hpp"
#include "storyweave/text.hpp"
#include "test_paths.hpp"

using namespace storyweave;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        out.push_back(line);
    }
    return out;
}

int run_command(const std::string& cmd) {
    const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string quote(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

Outcome gradient_correctness() {
    const auto report = gradcheck::run(gradcheck::micro_problem());
    std::size_t entries = 0, failures = 0;
    for (const auto& g : report.groups) {
        entries += g.entries;
        failures += g.failures;
    }
    return {report.passed() && report.max_rel_error() < gradcheck::kRelTol && report.seconds < 60.0,
            fmt::format("{} groups, {} entries, {} failures, max rel err {:.2e}, {:.1f}s",
                        report.groups.size(), entries, failures, report.max_rel_error(),
                        report.seconds)};
}

Outcome feature_shape() {
    const auto wide = combine_features(HiddenVector::Zero(768), HiddenVector::Zero(768)).size();
    const auto desk = combine_features(HiddenVector::Zero(64), HiddenVector::Zero(64)).size();
    const auto head_in = HeadParams::zeros(EncoderConfig{}.hidden_dim).dense_w.rows();
    return {wide == 3840 && desk == 320 && head_in == 320,
            fmt::format("768 -> {}, 64 -> {}, head input {}", wide, desk, head_in)};
}

Outcome softmax_normalization() {
    Rng rng(31);
    const std::size_t d = EncoderConfig{}.hidden_dim;
    auto head = HeadParams::initialize(d, 0.3, rng);
    std::normal_distribution<double> dist(0.0, 2.0);
    std::uniform_real_distribution<double> shift(-50.0, 50.0);
    double worst_sum = 0.0, worst_shift = 0.0;
    for (int i = 0; i < 10000; ++i) {
        HiddenVector h1(static_cast<Eigen::Index>(d)), h2(static_cast<Eigen::Index>(d));
        for (Eigen::Index k = 0; k < h1.size(); ++k) {
            h1(k) = dist(rng);
            h2(k) = dist(rng);
        }
        const auto s = classify(h1, h2, head, OutputMode::softmax, 0.0, Mode::eval);
        double total = 0.0;
        for (double v : s) {
            total += v;
        }
        worst_sum = std::max(worst_sum, std::abs(total - 1.0));
        auto shifted = head;
        shifted.out_b.array() += shift(rng);
        const auto t = classify(h1, h2, shifted, OutputMode::softmax, 0.0, Mode::eval);
        for (std::size_t k = 0; k < kNumLabels; ++k) {
            worst_shift = std::max(worst_shift, std::abs(s[k] - t[k]));
        }
    }
    return {worst_sum <= 1e-6 && worst_shift <= 1e-9,
            fmt::format("10000 calls, max |sum-1| {:.1e}, max shift diff {:.1e}", worst_sum,
                        worst_shift)};
}

Outcome sparse_oracle() {
    static const std::vector<std::string> words = {"moabit", "river", "spree",   "park",
                                                   "market", "hall",  "tenant",  "rent",
                                                   "station", "train", "poet",   "plaque",
                                                   "church", "bridge"};
    std::mt19937_64 rng(77);
    double worst = 0.0;
    std::size_t pair_mismatches = 0, corpora = 0;
    for (; corpora < 200; ++corpora) {
        std::vector<Document> group(2 + rng() % 9);
        std::vector<std::vector<std::string>> docs;
        for (std::size_t i = 0; i < group.size(); ++i) {
            std::string body;
            for (std::size_t w = 0, n = rng() % 13; w < n; ++w) {
                body += (body.empty() ? "" : " ") + words[rng() % words.size()];
            }
            group[i].id = fmt::format("d{:02}", group.size() - 1 - i);
            group[i].body = body;
            group[i].topic = "t";
            docs.push_back(tokenize(body));
        }
        const auto vocab = Vocabulary::from_token_lists(docs);
        const auto model = oracle::dense_model(docs);
        std::vector<std::vector<double>> dense;
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            const auto sparse = tfidf_vector(docs[i], vocab);
            auto expect = oracle::dense_tfidf(model, docs[i]);
            std::vector<double> got(vocab.size(), 0.0);
            for (const auto& e : sparse.entries) {
                got.at(e.index) = e.weight;
            }
            for (std::size_t k = 0; k < got.size(); ++k) {
                worst = std::max(worst, std::abs(got[k] - expect[k]));
            }
            dense.push_back(std::move(expect));
            ids.push_back(group[i].id);
        }
        for (std::size_t i = 0; i < docs.size(); ++i) {
            for (std::size_t j = 0; j < docs.size(); ++j) {
                const double c = cosine(tfidf_vector(docs[i], vocab), tfidf_vector(docs[j], vocab));
                worst = std::max(worst, std::abs(c - oracle::dense_cosine(dense[i], dense[j])));
            }
        }
        for (double threshold : {0.0, 0.15, 0.5}) {
            std::vector<std::pair<std::string, std::string>> got;
            for (const auto& p : candidate_pairs(group, vocab, threshold)) {
                got.emplace_back(p.id_a, p.id_b);
            }
            pair_mismatches += got == oracle::brute_force_pairs(ids, dense, threshold) ? 0 : 1;
        }
    }
    return {worst <= 1e-12 && pair_mismatches == 0,
            fmt::format("{} corpora, max abs diff {:.1e}, {} pair-set mismatches", corpora, worst,
                        pair_mismatches)};
}

Outcome metric_oracle() {
    int bad = 0;
    const auto fixtures = oracle::dyadic_fixtures();
    for (const auto& m : fixtures) {
        const auto [gold, pred] = oracle::expand(m);
        bad += oracle::mismatches(evaluate_predictions(gold, pred), oracle::hand_metrics(m));
    }
    const bool golden = render_report(oracle::published_report()) ==
                        slurp(testing::source_dir() / "tests/golden/published_report.txt");
    return {bad == 0 && fixtures.size() == 20 && golden,
            fmt::format("{} fixtures, {} field mismatches, golden table {}", fixtures.size(), bad,
                        golden ? "identical" : "differs")};
}

Outcome learning_sanity() {
    const auto [train_set, test_set] = split_pairs(generate_synthetic(500, 7), 0.8, 7);
    TrainConfig t;
    t.batch_size = 16;
    t.dropout = 0.1;
    t.epochs = 5;
    t.learning_rate = 1e-3;
    const auto start = std::chrono::steady_clock::now();
    const auto result = train(train_set, EncoderConfig{}, t);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto report = evaluate(result.model, test_set);
    const auto& losses = result.epoch_losses;
    bool decreasing = losses.size() == 5;
    for (std::size_t i = 1; i < losses.size(); ++i) {
        decreasing = decreasing && losses[i] < losses[i - 1];
    }
    std::string trace;
    for (double l : losses) {
        trace += fmt::format("{}{:.4f}", trace.empty() ? "" : " ", l);
    }
    return {report.micro.recall >= 0.90 && decreasing && seconds < 600.0,
            fmt::format("accuracy {:.3f} on {} held out, losses [{}], {:.0f}s", report.micro.recall,
                        test_set.size(), trace, seconds)};
}

struct CliRuns {
    std::filesystem::path first, second;
    bool ok = false;
};

Outcome pipeline_determinism(const testing::TempDir& work, CliRuns& runs) {
    const auto corpus = testing::data_dir() / "mini_corpus.jsonl";
    const auto ckpt = testing::data_dir() / "toy.ckpt";
    runs.first = work.path() / "run1";
    runs.second = work.path() / "run2";
    for (const auto& out : {runs.first, runs.second}) {
        const int rc = run_command(fmt::format("{} run --corpus {} --ckpt {} --seed 42 --out {}",
                                               quote(STORYWEAVE_CLI), quote(corpus), quote(ckpt),
                                               quote(out)));
        if (rc != 0) {
            return {false, fmt::format("storyweave run exited with {}", rc)};
        }
    }
    const bool same_records =
        slurp(runs.first / "candidates.jsonl") == slurp(runs.second / "candidates.jsonl");
    const bool same_stats = slurp(runs.first / "stats.json") == slurp(runs.second / "stats.json");
    runs.ok = same_records && same_stats;

    std::size_t gate_failures = 0;
    const auto records = lines_of(slurp(runs.first / "candidates.jsonl"));
    for (const auto& line : records) {
        const auto c = candidate_from_json(json::parse(line));
        gate_failures += (c.doc_similarity > 0.15 && c.segment_a.token_count >= 5 &&
                          c.segment_b.token_count >= 5)
                             ? 0
                             : 1;
    }
    const int recount = run_command(fmt::format(
        "{} {} --corpus {} --run-dir {}", quote(STORYWEAVE_PYTHON),
        quote(testing::source_dir() / "tests/oracles/recount_pairs.py"), quote(corpus),
        quote(runs.first)));
    return {runs.ok && gate_failures == 0 && recount == 0 && !records.empty(),
            fmt::format("records {}, stats {}, {} candidates, {} gate failures, recount {}",
                        same_records ? "identical" : "differ", same_stats ? "identical" : "differ",
                        records.size(), gate_failures, recount == 0 ? "agrees" : "disagrees")};
}

std::string random_sentence(std::mt19937_64& rng) {
    static const std::vector<std::string> openers = {"because", "Although", "While", "after",
                                                     "When", "if", "The", "Then", "It"};
    static const std::vector<std::string> words = {"river", "park", "market", "rent", "train",
                                                   "poet", "hall", "was", "busy", "quiet"};
    std::string s = (rng() % 2 == 0) ? openers[rng() % openers.size()] : "";
    for (std::size_t i = 0, n = 1 + rng() % 8; i < n; ++i) {
        s += (s.empty() ? "" : " ") + words[rng() % words.size()];
    }
    return s;
}

Outcome importance_properties() {
    std::mt19937_64 rng(101);
    std::size_t mirror_failures = 0;
    auto mirrored = [](Nuclearity n) {
        return n == Nuclearity::NS ? Nuclearity::SN : n == Nuclearity::SN ? Nuclearity::NS : n;
    };
    for (int i = 0; i < 1000; ++i) {
        const auto a = random_sentence(rng);
        const auto b = random_sentence(rng);
        const auto topic = random_sentence(rng);
        const std::vector<std::vector<std::string>> docs = {tokenize(a), tokenize(b), tokenize(topic)};
        const auto vocab = Vocabulary::from_token_lists(docs);
        const auto tv = tfidf_vector(topic, vocab);
        const auto ab = nuclearity(a, b, tv, vocab);
        const auto ba = nuclearity(b, a, tv, vocab);
        mirror_failures += (ba.label == mirrored(ab.label) && ba.confidence == ab.confidence) ? 0 : 1;
    }

    std::vector<Segment> segs;
    std::vector<std::vector<std::string>> docs;
    for (std::size_t i = 0; i < 15; ++i) {
        segs.push_back(Segment{fmt::format("doc{}", i % 3), i, random_sentence(rng), 0});
        docs.push_back(tokenize(segs.back().text));
    }
    docs.push_back(tokenize("river park market"));
    const auto vocab = Vocabulary::from_token_lists(docs);
    const auto tv = tfidf_vector(std::string_view("river park market"), vocab);
    const auto base = importance_ranking(segs, tv, vocab);
    std::size_t shuffle_failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::shuffle(segs.begin(), segs.end(), rng);
        const auto again = importance_ranking(segs, tv, vocab);
        bool same = again.size() == base.size();
        for (std::size_t i = 0; same && i < base.size(); ++i) {
            same = again[i].segment_id == base[i].segment_id && again[i].score == base[i].score;
        }
        shuffle_failures += same ? 0 : 1;
    }
    return {mirror_failures == 0 && shuffle_failures == 0,
            fmt::format("1000 pairs, {} mirror failures; 100 shuffles, {} differing rankings",
                        mirror_failures, shuffle_failures)};
}

Outcome service_persistence(const testing::TempDir& work, const CliRuns& runs) {
    if (!runs.ok) {
        return {false, "needs the CLI run output"};
    }
    const auto store = work.path() / "storylines.jsonl";
    json created;
    {
        const auto api = CurationApi::open(runs.first, store);
        std::vector<std::string> ids;
        for (const auto& s : api->data().corpus.segments) {
            if (api->data().corpus.find_document(s.doc_id)->topic == "Moabit") {
                ids.push_back(s.id());
            }
        }
        const json body = {{"title", "Acceptance walk"},
                           {"topic", "Moabit"},
                           {"segments", {ids.at(2), {{"segment_id", ids.at(0)}, {"note", "end"}}}}};
        const auto r = api->create_storyline(body.dump());
        if (r.status != 201) {
            return {false, "create returned " + std::to_string(r.status)};
        }
        created = r.body;
    }
    const auto api = CurationApi::open(runs.first, store);
    const auto back = api->get_storyline(std::to_string(created["id"].get<std::uint64_t>()));
    const bool round_trip = back.status == 200 && back.body == created;

    const auto exported = lines_of(slurp(runs.first / "candidates.jsonl"));
    std::size_t topics = 0, mismatched = 0;
    const auto listed = api->topics();
    for (const auto& t : listed.body["topics"]) {
        const auto topic = t["topic"].get<std::string>();
        std::vector<std::string> expected;
        for (const auto& line : exported) {
            if (json::parse(line)["topic"] == topic) {
                expected.push_back(line);
            }
        }
        std::vector<std::string> paged;
        for (std::size_t offset = 0;;) {
            const auto page = api->candidates(topic, "", std::to_string(offset), "7");
            if (page.status != 200 || page.body["items"].empty()) {
                break;
            }
            for (const auto& item : page.body["items"]) {
                paged.push_back(item.dump());
            }
            offset += page.body["items"].size();
        }
        mismatched += paged == expected ? 0 : 1;
        ++topics;
    }
    return {round_trip && mismatched == 0 && topics > 0,
            fmt::format("restart round trip {}, {} topics paged, {} differ from the export",
                        round_trip ? "ok" : "broken", topics, mismatched)};
}

}  // namespace

int main() {
    testing::TempDir work("sw-accept");
    CliRuns runs;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"Gradient correctness", gradient_correctness},
        {"Combined feature shape", feature_shape},
        {"Softmax normalization", softmax_normalization},
        {"Sparse-math oracle", sparse_oracle},
        {"Metric oracle", metric_oracle},
        {"Learning sanity", learning_sanity},
        {"Pipeline determinism and gating", [&] { return pipeline_determinism(work, runs); }},
        {"Importance properties", importance_properties},
        {"Service persistence", [&] { return service_persistence(work, runs); }},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, fmt::format("exception: {}", e.what())};
        }
        failures += o.pass ? 0 : 1;
        fmt::print("{} {}: {}\n", o.pass ? "PASS" : "FAIL", name, o.detail);
        std::fflush(stdout);
    }
    return failures;
}
