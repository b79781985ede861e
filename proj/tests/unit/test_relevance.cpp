#include <doctest.h>

#include <cmath>
#include <random>

#include <fmt/core.h>

#include "dense_oracle.hpp"
#include "storyweave/relevance.hpp"
#include "storyweave/text.hpp"

using namespace storyweave;

namespace {

Document make_doc(std::string id, std::string body, std::string topic = "t") {
    Document d;
    d.id = std::move(id);
    d.body = std::move(body);
    d.topic = std::move(topic);
    return d;
}

Corpus make_corpus(const std::vector<std::string>& bodies) {
    Corpus c;
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        c.documents.push_back(make_doc(fmt::format("d{:02}", i), bodies[i]));
    }
    return c;
}

std::vector<double> densify(const SparseVector& v, std::size_t n) {
    std::vector<double> out(n, 0.0);
    for (const auto& e : v.entries) {
        out.at(e.index) = e.weight;
    }
    return out;
}

std::vector<std::string> random_tokens(std::mt19937_64& rng, std::size_t max_len) {
    static const std::vector<std::string> words = {"moabit", "river", "spree", "park",
                                                   "market", "hall",  "tenant", "rent",
                                                   "station", "train", "poet",   "plaque"};
    std::vector<std::string> out(rng() % (max_len + 1));
    for (auto& w : out) {
        w = words[rng() % words.size()];
    }
    return out;
}

}  // namespace

TEST_CASE("vocabulary enumeration") {
    const auto v = build_vocabulary(make_corpus({"a b", "b c"}));
    CHECK(v.terms() == std::vector<std::string>{"a", "b", "c"});
    CHECK(v.document_frequency(v.index_of("a")) == 1);
    CHECK(v.document_frequency(v.index_of("b")) == 2);
    CHECK(v.document_frequency(v.index_of("c")) == 1);
    CHECK(v.n_docs() == 2);
    CHECK(v.index_of("zzz") == Vocabulary::npos);

    const auto single = build_vocabulary(make_corpus({"x x x"}));
    CHECK(single.size() == 1);
    CHECK(single.document_frequency(0) == 1);

    const auto pruned = build_vocabulary(make_corpus({"a b", "b c"}), 2);
    CHECK(pruned.terms() == std::vector<std::string>{"b"});
}

TEST_CASE("empty corpus is rejected") {
    CHECK_THROWS_WITH_AS(build_vocabulary(Corpus{}), "empty corpus", std::invalid_argument);
}

TEST_CASE("document frequencies match a brute-force recount") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<std::string>> docs(10);
        for (auto& d : docs) {
            d = random_tokens(rng, 12);
        }
        const auto vocab = Vocabulary::from_token_lists(docs);
        const auto oracle = oracle::dense_model(docs);
        REQUIRE(vocab.terms() == oracle.terms);
        for (std::size_t i = 0; i < vocab.size(); ++i) {
            CHECK(static_cast<double>(vocab.document_frequency(i)) == oracle.df[i]);
            CHECK(vocab.document_frequency(i) >= 1);
            CHECK(vocab.document_frequency(i) <= vocab.n_docs());
        }
    }
}

TEST_CASE("tf-idf hand values") {
    const auto vocab = build_vocabulary(make_corpus({"a b", "b"}));
    const auto v = tfidf_vector(std::string_view("a a b"), vocab);
    REQUIRE(v.entries.size() == 2);
    CHECK(v.entries[0].weight == doctest::Approx(2.0 * (std::log(1.5) + 1.0)).epsilon(1e-15));
    CHECK(v.entries[0].weight == doctest::Approx(2.8109).epsilon(1e-4));
    CHECK(v.entries[1].weight == 1.0);
    CHECK(vocab.idf(vocab.index_of("b")) == 1.0);
    CHECK(tfidf_vector(std::vector<std::string>{}, vocab).empty());
    CHECK(tfidf_vector(std::string_view("unknown words only"), vocab).empty());
}

TEST_CASE("cosine basics") {
    const auto vocab = build_vocabulary(make_corpus({"a b c", "c d", "e"}));
    const auto v = tfidf_vector(std::string_view("a b c c"), vocab);
    CHECK(cosine(v, v) == doctest::Approx(1.0).epsilon(1e-12));
    const auto w = tfidf_vector(std::string_view("e d"), vocab);
    const auto disjoint = tfidf_vector(std::string_view("e"), vocab);
    CHECK(cosine(v, disjoint) == 0.0);
    CHECK(cosine(v, w) == cosine(w, v));
    CHECK(cosine(v, SparseVector{}) == 0.0);
    CHECK(cosine(SparseVector{}, SparseVector{}) == 0.0);

    SparseVector scaled = v;
    for (auto& e : scaled.entries) {
        e.weight *= 7.25;
    }
    CHECK(std::abs(cosine(scaled, w) - cosine(v, w)) < 1e-12);
}

TEST_CASE("sparse math agrees with the dense oracle") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::vector<std::string>> docs(2 + rng() % 8);
        for (auto& d : docs) {
            d = random_tokens(rng, 10);
        }
        const auto vocab = Vocabulary::from_token_lists(docs);
        const auto oracle = oracle::dense_model(docs);
        std::vector<std::vector<double>> dense;
        for (const auto& d : docs) {
            const auto sparse = tfidf_vector(d, vocab);
            for (std::size_t k = 1; k < sparse.entries.size(); ++k) {
                CHECK(sparse.entries[k - 1].index < sparse.entries[k].index);
            }
            for (const auto& e : sparse.entries) {
                CHECK(e.weight > 0.0);
            }
            const auto expect = oracle::dense_tfidf(oracle, d);
            const auto got = densify(sparse, vocab.size());
            for (std::size_t k = 0; k < got.size(); ++k) {
                CHECK(std::abs(got[k] - expect[k]) <= 1e-12);
            }
            dense.push_back(expect);
        }
        for (std::size_t i = 0; i < docs.size(); ++i) {
            for (std::size_t j = 0; j < docs.size(); ++j) {
                const double c = cosine(tfidf_vector(docs[i], vocab), tfidf_vector(docs[j], vocab));
                CHECK(std::abs(c - oracle::dense_cosine(dense[i], dense[j])) <= 1e-12);
                CHECK(c >= 0.0);
                CHECK(c <= 1.0);
            }
        }
    }
}

TEST_CASE("group_by_topic partitions the corpus") {
    Corpus c;
    c.documents = {make_doc("d0", "x", "A"), make_doc("d1", "x", "B"), make_doc("d2", "x", "A")};
    const auto groups = group_by_topic(c);
    REQUIRE(groups.size() == 2);
    CHECK(groups.at("A") == std::vector<std::string>{"d0", "d2"});
    CHECK(groups.at("B") == std::vector<std::string>{"d1"});

    Corpus same;
    same.documents = {make_doc("d0", "x", "A"), make_doc("d1", "y", "A")};
    CHECK(group_by_topic(same).size() == 1);
}

TEST_CASE("topic relevance ranking") {
    const auto corpus = make_corpus({"spree river park", "spree river park", "train station",
                                     "river park hall", "spree market", "tenant rent river"});
    const auto vocab = build_vocabulary(corpus);
    const auto seed = corpus.documents[0];
    const std::vector<Document> candidates(corpus.documents.begin() + 1, corpus.documents.end());
    const auto ranked = topic_relevance(seed, candidates, vocab);
    REQUIRE(ranked.size() == 5);
    CHECK(ranked.front().id == "d01");
    CHECK(ranked.front().score == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ranked.back().id == "d02");
    CHECK(ranked.back().score == 0.0);

    std::vector<std::vector<std::string>> docs;
    for (const auto& d : corpus.documents) {
        docs.push_back(tokenize(d.body));
    }
    const auto oracle = oracle::dense_model(docs);
    const auto seed_vec = oracle::dense_tfidf(oracle, docs[0]);
    std::vector<std::pair<double, std::string>> expect;
    for (std::size_t i = 1; i < docs.size(); ++i) {
        expect.emplace_back(-oracle::dense_cosine(seed_vec, oracle::dense_tfidf(oracle, docs[i])),
                            corpus.documents[i].id);
    }
    std::sort(expect.begin(), expect.end());
    for (std::size_t i = 0; i < expect.size(); ++i) {
        CHECK(ranked[i].id == expect[i].second);
    }

    CHECK(topic_relevance(seed, {}, vocab).empty());
    CHECK_THROWS_AS(topic_relevance(seed, corpus.documents, vocab), std::invalid_argument);
}

TEST_CASE("candidate pairs: strict threshold, monotonicity and brute force") {
    const auto corpus = make_corpus({"spree river park", "river park hall", "train station",
                                     "spree market hall", "tenant rent river", "station train rent"});
    const auto vocab = build_vocabulary(corpus);
    const auto& docs = corpus.documents;

    const auto all = candidate_pairs(docs, vocab, 0.0);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        for (std::size_t j = i + 1; j < docs.size(); ++j) {
            const auto ti = tokenize(docs[i].body);
            const auto tj = tokenize(docs[j].body);
            const bool shares = std::any_of(ti.begin(), ti.end(), [&](const std::string& t) {
                return std::find(tj.begin(), tj.end(), t) != tj.end();
            });
            const bool listed = std::any_of(all.begin(), all.end(), [&](const SimilarityPair& p) {
                return p.id_a == docs[i].id && p.id_b == docs[j].id;
            });
            CHECK(shares == listed);
        }
    }

    // A pair whose cosine equals the threshold is excluded.
    REQUIRE(!all.empty());
    const double exact = all.front().score;
    const auto at = candidate_pairs(docs, vocab, exact);
    CHECK(std::none_of(at.begin(), at.end(), [&](const SimilarityPair& p) {
        return p.id_a == all.front().id_a && p.id_b == all.front().id_b;
    }));
    const auto below = candidate_pairs(docs, vocab, std::nextafter(exact, 0.0));
    CHECK(std::any_of(below.begin(), below.end(), [&](const SimilarityPair& p) {
        return p.id_a == all.front().id_a && p.id_b == all.front().id_b;
    }));

    std::vector<std::pair<std::string, std::string>> previous;
    for (double t = 1.0; t >= 0.0; t -= 0.05) {
        std::vector<std::pair<std::string, std::string>> current;
        for (const auto& p : candidate_pairs(docs, vocab, std::max(t, 0.0))) {
            CHECK(p.id_a < p.id_b);
            CHECK(p.score > t);
            current.emplace_back(p.id_a, p.id_b);
        }
        CHECK(std::includes(current.begin(), current.end(), previous.begin(), previous.end()));
        previous = current;
    }
    CHECK(candidate_pairs(docs, vocab, 1.0).empty());

    std::vector<std::string> ids;
    std::vector<std::vector<std::string>> toks;
    for (const auto& d : docs) {
        ids.push_back(d.id);
        toks.push_back(tokenize(d.body));
    }
    const auto model = oracle::dense_model(toks);
    std::vector<std::vector<double>> dense;
    for (const auto& t : toks) {
        dense.push_back(oracle::dense_tfidf(model, t));
    }
    std::vector<std::pair<std::string, std::string>> got;
    for (const auto& p : candidate_pairs(docs, vocab, 0.15)) {
        got.emplace_back(p.id_a, p.id_b);
    }
    CHECK(got == oracle::brute_force_pairs(ids, dense, 0.15));

    CHECK_THROWS_AS(candidate_pairs(docs, vocab, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(candidate_pairs(docs, vocab, 1.5), std::invalid_argument);
}

TEST_CASE("candidate pair ids are canonical regardless of group order") {
    auto corpus = make_corpus({"spree river park", "river park hall"});
    std::swap(corpus.documents[0], corpus.documents[1]);
    const auto pairs = candidate_pairs(corpus.documents, build_vocabulary(corpus), 0.0);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].id_a == "d00");
    CHECK(pairs[0].id_b == "d01");
}

TEST_CASE("segment pairs are the full cross product") {
    Corpus c;
    c.documents = {make_doc("a", "x"), make_doc("b", "y"), make_doc("e", "z")};
    for (std::size_t i = 0; i < 3; ++i) {
        c.segments.push_back(Segment{"a", i, fmt::format("a{}", i), 5});
    }
    for (std::size_t i = 0; i < 4; ++i) {
        c.segments.push_back(Segment{"b", i * 2, fmt::format("b{}", i), 5});
    }
    const auto pairs = segment_pairs(SimilarityPair{"a", "b", 0.5}, c);
    REQUIRE(pairs.size() == 12);
    CHECK(pairs.front().first.doc_id == "a");
    CHECK(pairs.front().second.doc_id == "b");
    CHECK(segment_pairs(SimilarityPair{"a", "e", 0.5}, c).empty());
    CHECK_THROWS_AS(segment_pairs(SimilarityPair{"a", "missing", 0.5}, c), std::invalid_argument);
}
