#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace storyweave {

struct Document {
    std::string id;
    std::string url;
    std::string title;
    std::string body;
    std::string topic;
    std::string language;  // ISO-639-1, empty when the crawler did not tag it

    bool operator==(const Document&) const = default;
};

/// A filtered sentence. `index` is the position within the source document
/// before length filtering, so gaps are expected after filter_short.
struct Segment {
    std::string doc_id;
    std::size_t index = 0;
    std::string text;
    std::size_t token_count = 0;

    /// "<doc_id>:<index>", unique within a corpus.
    std::string id() const;

    bool operator==(const Segment&) const = default;
};

struct Corpus {
    std::vector<Document> documents;
    std::vector<Segment> segments;

    const Document* find_document(std::string_view id) const;
    const Segment* find_segment(std::string_view segment_id) const;
    std::vector<const Segment*> segments_of(std::string_view doc_id) const;
};

struct IngestReport {
    std::size_t lines = 0;
    std::size_t accepted = 0;
    std::size_t dropped_empty = 0;
    std::size_t malformed = 0;
    std::size_t duplicates = 0;
    std::vector<std::string> diagnostics;
};

inline constexpr std::string_view kUntaggedTopic = "untagged";
inline constexpr std::size_t kDefaultMinWords = 5;

/// Reads one JSON record per line (url, title, text, query_term, language).
/// Bad lines are skipped and reported, never fatal.
Corpus ingest_corpus(std::istream& in, IngestReport* report = nullptr);

/// Deterministic document id: FNV-1a of the url, or the 1-based line number
/// when the record carries no url.
std::string document_id(std::string_view url, std::size_t line_number);

enum class Language { english, german, unknown };

struct LanguageGuess {
    Language language = Language::unknown;
    double english_ratio = 0.0;
    double german_ratio = 0.0;
};

/// The shipped stopword list, sorted; empty for Language::unknown.
std::vector<std::string_view> stopword_list(Language lang);

/// Stopword-ratio heuristic over the shipped en/de lists.
LanguageGuess detect_language(std::string_view text);
std::string_view language_code(Language lang);

/// Keeps documents tagged `lang`; untagged documents are kept when the
/// stopword heuristic agrees. Segments of dropped documents go too.
/// Throws std::invalid_argument unless `lang` is a two-letter code.
Corpus filter_language(const Corpus& corpus, std::string_view lang);

/// Sentence boundary at . ! ? followed by whitespace and an uppercase letter
/// or digit, unless the token ending in '.' is a known abbreviation or a
/// single capital letter.
std::vector<Segment> segment_sentences(const Document& doc);

bool is_abbreviation(std::string_view token_before_period);

std::vector<Segment> filter_short(std::span<const Segment> segments,
                                  std::size_t min_words = kDefaultMinWords);

/// segment_sentences + filter_short over every document, in document order.
void segment_corpus(Corpus& corpus, std::size_t min_words = kDefaultMinWords);

nlohmann::json document_to_json(const Document& doc);
Document document_from_json(const nlohmann::json& j);
nlohmann::json segment_to_json(const Segment& segment);
Segment segment_from_json(const nlohmann::json& j);

// Corpus directory: documents.jsonl + segments.jsonl.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

}  // namespace storyweave
