#include "storyweave/text.hpp"

#include <array>
#include <cctype>

namespace storyweave {
namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Multi-byte UTF-8 punctuation that commonly surrounds words in crawled text.
constexpr std::array<std::string_view, 12> kUtf8Punct = {
    "“", "”", "‘", "’", "„", "–",
    "—", "…", "«", "»", "¿", "¡",
};

std::size_t leading_punct(std::string_view s) {
    if (s.empty()) {
        return 0;
    }
    if (std::ispunct(static_cast<unsigned char>(s.front()))) {
        return 1;
    }
    for (auto p : kUtf8Punct) {
        if (s.starts_with(p)) {
            return p.size();
        }
    }
    return 0;
}

std::size_t trailing_punct(std::string_view s) {
    if (s.empty()) {
        return 0;
    }
    if (std::ispunct(static_cast<unsigned char>(s.back()))) {
        return 1;
    }
    for (auto p : kUtf8Punct) {
        if (s.ends_with(p)) {
            return p.size();
        }
    }
    return 0;
}

}  // namespace

std::vector<std::string_view> whitespace_split(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) {
            ++i;
        }
        std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) {
            ++i;
        }
        if (i > start) {
            out.push_back(text.substr(start, i - start));
        }
    }
    return out;
}

std::size_t whitespace_token_count(std::string_view text) {
    return whitespace_split(text).size();
}

std::string to_lower_ascii(std::string_view text) {
    std::string out(text);
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    for (std::string_view piece : whitespace_split(text)) {
        while (std::size_t n = leading_punct(piece)) {
            piece.remove_prefix(n);
        }
        while (std::size_t n = trailing_punct(piece)) {
            piece.remove_suffix(n);
        }
        if (!piece.empty()) {
            out.push_back(to_lower_ascii(piece));
        }
    }
    return out;
}

std::string trim(std::string_view text) {
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && is_space(text[b])) {
        ++b;
    }
    while (e > b && is_space(text[e - 1])) {
        --e;
    }
    return std::string(text.substr(b, e - b));
}

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (auto piece : whitespace_split(text)) {
        if (!out.empty()) {
            out.push_back(' ');
        }
        out.append(piece);
    }
    return out;
}

}  // namespace storyweave
