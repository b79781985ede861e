#include "storyweave/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <istream>
#include <stdexcept>
#include <unordered_set>

#include <fmt/core.h>

#include "storyweave/jsonl.hpp"
#include "storyweave/text.hpp"

namespace storyweave {
namespace {

using nlohmann::json;

// clang-format off
constexpr std::array<std::string_view, 150> kEnglishStopwords = {
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and",
    "any", "are", "as", "at", "be", "because", "been", "before", "being", "below",
    "between", "both", "but", "by", "can", "could", "did", "do", "does", "doing",
    "down", "during", "each", "few", "for", "from", "further", "had", "has", "have",
    "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how",
    "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me",
    "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off",
    "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over",
    "own", "same", "she", "should", "so", "some", "such", "than", "that", "the",
    "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
    "through", "to", "too", "under", "until", "up", "very", "was", "we", "were",
    "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with",
    "would", "you", "your", "yours", "yourself", "yourselves", "also", "many", "much", "may",
    "might", "must", "shall", "upon", "yet", "since", "though", "although", "however", "whose",
    "every", "another", "around", "among", "within", "without", "across", "along", "onto", "via",
};

constexpr std::array<std::string_view, 150> kGermanStopwords = {
    "aber", "alle", "allem", "allen", "aller", "alles", "als", "also", "am", "an",
    "ander", "andere", "anderem", "anderen", "anderer", "anderes", "auch", "auf", "aus", "bei",
    "bin", "bis", "bist", "da", "damit", "dann", "der", "den", "des", "dem",
    "die", "das", "dass", "daß", "derselbe", "dich", "dir", "du", "dies", "diese",
    "diesem", "diesen", "dieser", "dieses", "doch", "dort", "durch", "ein", "eine", "einem",
    "einen", "einer", "eines", "einig", "einige", "er", "ihn", "ihm", "es", "etwas",
    "euer", "eure", "für", "gegen", "gewesen", "hab", "habe", "haben", "hat", "hatte",
    "hatten", "hier", "hin", "hinter", "ich", "mich", "mir", "ihr", "ihre", "ihrem",
    "ihren", "ihrer", "ihres", "im", "in", "indem", "ins", "ist", "jede", "jedem",
    "jeden", "jeder", "jedes", "jene", "jetzt", "kann", "kein", "keine", "können", "könnte",
    "machen", "man", "manche", "mein", "meine", "mit", "muss", "musste", "nach", "nicht",
    "nichts", "noch", "nun", "nur", "ob", "oder", "ohne", "sehr", "sein", "seine",
    "selbst", "sich", "sie", "sind", "so", "solche", "sondern", "sonst", "über", "um",
    "und", "uns", "unser", "unter", "viel", "vom", "von", "vor", "während", "war",
    "waren", "warst", "was", "weg", "weil", "weiter", "welche", "wenn", "werde", "werden",
};
// clang-format on

constexpr std::array<std::string_view, 11> kAbbreviations = {
    "dr", "mr", "mrs", "ms", "prof", "st", "no", "vs", "etc", "e.g", "i.e",
};

const std::unordered_set<std::string_view>& english_stopwords() {
    static const std::unordered_set<std::string_view> set(kEnglishStopwords.begin(),
                                                          kEnglishStopwords.end());
    return set;
}

const std::unordered_set<std::string_view>& german_stopwords() {
    static const std::unordered_set<std::string_view> set(kGermanStopwords.begin(),
                                                          kGermanStopwords.end());
    return set;
}

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// ASCII A-Z, digits, and the Latin-1 uppercase block (U+00C0..U+00DE minus ×).
bool starts_upper_or_digit(std::string_view s, std::size_t pos) {
    auto c = static_cast<unsigned char>(s[pos]);
    if (std::isupper(c) || std::isdigit(c)) {
        return true;
    }
    if (c == 0xC3 && pos + 1 < s.size()) {
        auto n = static_cast<unsigned char>(s[pos + 1]);
        return n >= 0x80 && n <= 0x9E && n != 0x97;
    }
    return false;
}

std::string optional_string(const json& rec, const char* key) {
    auto it = rec.find(key);
    if (it == rec.end() || it->is_null()) {
        return {};
    }
    if (!it->is_string()) {
        throw std::invalid_argument(fmt::format("field '{}' is not a string", key));
    }
    return it->get<std::string>();
}

}  // namespace

std::string Segment::id() const { return fmt::format("{}:{}", doc_id, index); }

json document_to_json(const Document& d) {
    return json{{"id", d.id},       {"url", d.url},     {"title", d.title},
                {"body", d.body},   {"topic", d.topic}, {"language", d.language}};
}

Document document_from_json(const json& rec) {
    Document d;
    d.id = rec.at("id").get<std::string>();
    d.url = rec.value("url", "");
    d.title = rec.value("title", "");
    d.body = rec.at("body").get<std::string>();
    d.topic = rec.at("topic").get<std::string>();
    d.language = rec.value("language", "");
    return d;
}

json segment_to_json(const Segment& s) {
    return json{{"id", s.id()},
                {"doc_id", s.doc_id},
                {"index", s.index},
                {"text", s.text},
                {"token_count", s.token_count}};
}

Segment segment_from_json(const json& rec) {
    Segment s;
    s.doc_id = rec.at("doc_id").get<std::string>();
    s.index = rec.at("index").get<std::size_t>();
    s.text = rec.at("text").get<std::string>();
    s.token_count = rec.at("token_count").get<std::size_t>();
    return s;
}

const Document* Corpus::find_document(std::string_view id) const {
    auto it = std::find_if(documents.begin(), documents.end(),
                           [&](const Document& d) { return d.id == id; });
    return it == documents.end() ? nullptr : &*it;
}

const Segment* Corpus::find_segment(std::string_view segment_id) const {
    auto it = std::find_if(segments.begin(), segments.end(),
                           [&](const Segment& s) { return s.id() == segment_id; });
    return it == segments.end() ? nullptr : &*it;
}

std::vector<const Segment*> Corpus::segments_of(std::string_view doc_id) const {
    std::vector<const Segment*> out;
    for (const auto& s : segments) {
        if (s.doc_id == doc_id) {
            out.push_back(&s);
        }
    }
    return out;
}

std::string document_id(std::string_view url, std::size_t line_number) {
    if (url.empty()) {
        return fmt::format("line-{}", line_number);
    }
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : url) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return fmt::format("doc-{:016x}", h);
}

Corpus ingest_corpus(std::istream& in, IngestReport* report) {
    IngestReport local;
    IngestReport& rep = report ? *report : local;
    Corpus corpus;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        ++rep.lines;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            json rec = json::parse(line);
            if (!rec.is_object()) {
                throw std::invalid_argument("record is not an object");
            }
            Document doc;
            doc.url = optional_string(rec, "url");
            doc.title = optional_string(rec, "title");
            doc.body = trim(optional_string(rec, "text"));
            doc.topic = trim(optional_string(rec, "query_term"));
            doc.language = to_lower_ascii(trim(optional_string(rec, "language")));
            if (doc.body.empty()) {
                ++rep.dropped_empty;
                continue;
            }
            if (doc.topic.empty()) {
                doc.topic = std::string(kUntaggedTopic);
            }
            doc.id = document_id(doc.url, line_no);
            if (!seen.insert(doc.id).second) {
                ++rep.duplicates;
                rep.diagnostics.push_back(
                    fmt::format("line {}: duplicate url '{}' skipped", line_no, doc.url));
                continue;
            }
            corpus.documents.push_back(std::move(doc));
            ++rep.accepted;
        } catch (const std::exception& e) {
            ++rep.malformed;
            rep.diagnostics.push_back(fmt::format("line {}: {}", line_no, e.what()));
        }
    }
    return corpus;
}

std::string_view language_code(Language lang) {
    switch (lang) {
        case Language::english: return "en";
        case Language::german: return "de";
        case Language::unknown: break;
    }
    return "";
}

std::vector<std::string_view> stopword_list(Language lang) {
    std::vector<std::string_view> out;
    if (lang == Language::english) {
        out.assign(english_stopwords().begin(), english_stopwords().end());
    } else if (lang == Language::german) {
        out.assign(german_stopwords().begin(), german_stopwords().end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

LanguageGuess detect_language(std::string_view text) {
    const auto tokens = tokenize(text);
    LanguageGuess guess;
    if (tokens.empty()) {
        return guess;
    }
    const auto& en = english_stopwords();
    const auto& de = german_stopwords();
    std::size_t en_hits = 0;
    std::size_t de_hits = 0;
    for (const auto& t : tokens) {
        en_hits += en.count(t);
        de_hits += de.count(t);
    }
    const auto n = static_cast<double>(tokens.size());
    guess.english_ratio = static_cast<double>(en_hits) / n;
    guess.german_ratio = static_cast<double>(de_hits) / n;
    if (en_hits > de_hits) {
        guess.language = Language::english;
    } else if (de_hits > en_hits) {
        guess.language = Language::german;
    }
    return guess;
}

Corpus filter_language(const Corpus& corpus, std::string_view lang) {
    if (lang.size() != 2 || !std::isalpha(static_cast<unsigned char>(lang[0])) ||
        !std::isalpha(static_cast<unsigned char>(lang[1]))) {
        throw std::invalid_argument(fmt::format("language must be a 2-letter code, got '{}'", lang));
    }
    const std::string want = to_lower_ascii(lang);
    Corpus out;
    std::unordered_set<std::string_view> kept;
    for (const auto& doc : corpus.documents) {
        bool keep = doc.language.empty()
                        ? language_code(detect_language(doc.body).language) == want
                        : doc.language == want;
        if (keep) {
            out.documents.push_back(doc);
        }
    }
    for (const auto& d : out.documents) {
        kept.insert(d.id);
    }
    for (const auto& s : corpus.segments) {
        if (kept.count(s.doc_id)) {
            out.segments.push_back(s);
        }
    }
    return out;
}

bool is_abbreviation(std::string_view token) {
    while (!token.empty() && std::ispunct(static_cast<unsigned char>(token.front()))) {
        token.remove_prefix(1);
    }
    if (token.size() == 1 && std::isupper(static_cast<unsigned char>(token[0]))) {
        return true;
    }
    const std::string lower = to_lower_ascii(token);
    return std::find(kAbbreviations.begin(), kAbbreviations.end(), lower) != kAbbreviations.end();
}

std::vector<Segment> segment_sentences(const Document& doc) {
    std::vector<Segment> out;
    const std::string_view body = doc.body;
    auto emit = [&](std::size_t from, std::size_t to) {
        std::string text = collapse_whitespace(body.substr(from, to - from));
        if (text.empty()) {
            return;
        }
        Segment s;
        s.doc_id = doc.id;
        s.index = out.size();
        s.token_count = whitespace_token_count(text);
        s.text = std::move(text);
        out.push_back(std::move(s));
    };

    std::size_t start = 0;
    for (std::size_t i = 0; i + 1 < body.size(); ++i) {
        const char c = body[i];
        if ((c != '.' && c != '!' && c != '?') || !is_space(body[i + 1])) {
            continue;
        }
        std::size_t next = i + 1;
        while (next < body.size() && is_space(body[next])) {
            ++next;
        }
        if (next >= body.size() || !starts_upper_or_digit(body, next)) {
            continue;
        }
        if (c == '.') {
            std::size_t tok_begin = i;
            while (tok_begin > start && !is_space(body[tok_begin - 1])) {
                --tok_begin;
            }
            if (is_abbreviation(body.substr(tok_begin, i - tok_begin))) {
                continue;
            }
        }
        emit(start, i + 1);
        start = next;
    }
    emit(start, body.size());
    return out;
}

std::vector<Segment> filter_short(std::span<const Segment> segments, std::size_t min_words) {
    if (min_words < 1) {
        throw std::invalid_argument("min_words must be at least 1");
    }
    std::vector<Segment> out;
    std::copy_if(segments.begin(), segments.end(), std::back_inserter(out),
                 [&](const Segment& s) { return s.token_count >= min_words; });
    return out;
}

void segment_corpus(Corpus& corpus, std::size_t min_words) {
    corpus.segments.clear();
    for (const auto& doc : corpus.documents) {
        auto kept = filter_short(segment_sentences(doc), min_words);
        std::move(kept.begin(), kept.end(), std::back_inserter(corpus.segments));
    }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<json> docs;
    docs.reserve(corpus.documents.size());
    for (const auto& d : corpus.documents) {
        docs.push_back(document_to_json(d));
    }
    std::vector<json> segs;
    segs.reserve(corpus.segments.size());
    for (const auto& s : corpus.segments) {
        segs.push_back(segment_to_json(s));
    }
    jsonl::write_file(dir / "documents.jsonl", docs);
    jsonl::write_file(dir / "segments.jsonl", segs);
}

Corpus load_corpus(const std::filesystem::path& dir) {
    Corpus corpus;
    for (const auto& rec : jsonl::read_file(dir / "documents.jsonl")) {
        corpus.documents.push_back(document_from_json(rec));
    }
    const auto seg_path = dir / "segments.jsonl";
    if (std::filesystem::exists(seg_path)) {
        for (const auto& rec : jsonl::read_file(seg_path)) {
            auto s = segment_from_json(rec);
            if (!corpus.find_document(s.doc_id)) {
                throw std::runtime_error(
                    fmt::format("segment {} references unknown document", s.id()));
            }
            corpus.segments.push_back(std::move(s));
        }
    }
    return corpus;
}

}  // namespace storyweave
