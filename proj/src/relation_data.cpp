#include "storyweave/relation_data.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <random>
#include <stdexcept>

#include <fmt/core.h>

namespace storyweave {
namespace {

// clang-format off
constexpr std::array<std::string_view, 3> kTemporal = {"Then", "Afterwards,", "In {year},"};
constexpr std::array<std::string_view, 2> kContingency = {"Because of this,", "As a result,"};
constexpr std::array<std::string_view, 3> kComparison = {"However,", "But", "While"};
constexpr std::array<std::string_view, 2> kExpansion = {"In addition,", "For example,"};

constexpr std::array<std::string_view, 16> kSubjects = {
    "architect", "brewer", "poet", "journalist", "teacher", "painter", "engineer", "mayor",
    "musician", "gardener", "student", "priest", "merchant", "doctor", "baker", "actress"};
constexpr std::array<std::string_view, 14> kVerbs = {
    "visited", "described", "painted", "restored", "photographed", "praised", "criticized",
    "rebuilt", "sold", "bought", "explored", "documented", "opened", "closed"};
constexpr std::array<std::string_view, 16> kObjects = {
    "factory", "church", "bridge", "brewery", "station", "park", "library", "market",
    "prison", "school", "theatre", "harbour", "hospital", "tower", "garden", "museum"};
constexpr std::array<std::string_view, 10> kPlaces = {
    "near the river", "in the district", "on the main street", "behind the old wall",
    "next to the canal", "in the north", "by the square", "across the tracks",
    "at the corner", "outside the city"};
constexpr std::array<std::string_view, 6> kAdjectives = {
    "old", "famous", "small", "large", "quiet", "busy"};
constexpr std::array<std::string_view, 8> kUnrelatedSubjects = {
    "weather", "river", "train", "crowd", "choir", "council", "harvest", "newspaper"};
constexpr std::array<std::string_view, 8> kUnrelatedPredicates = {
    "was unusually cold that winter", "flooded the lower streets",
    "arrived late every morning", "gathered in the square",
    "sang on Sunday evenings", "met twice a month",
    "was poor in the east", "printed a special edition"};
// clang-format on

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& items, Rng& rng) {
    return items[std::uniform_int_distribution<std::size_t>(0, N - 1)(rng)];
}

std::string clause(Rng& rng) {
    return fmt::format("the {} {} the {} {} {}", pick(kSubjects, rng), pick(kVerbs, rng),
                       pick(kAdjectives, rng), pick(kObjects, rng), pick(kPlaces, rng));
}

std::string capitalize(std::string s) {
    if (!s.empty()) {
        s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    }
    return s;
}

std::string opener(RelationLabel label, Rng& rng) {
    const auto options = synthetic_connectives(label);
    std::string_view chosen =
        options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
    if (chosen.find("{year}") != std::string_view::npos) {
        const int year = std::uniform_int_distribution<int>(1850, 1990)(rng);
        return fmt::format("In {},", year);
    }
    return std::string(chosen);
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        cols.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos) {
            break;
        }
        start = tab + 1;
    }
    return cols;
}

}  // namespace

std::span<const std::string_view> synthetic_connectives(RelationLabel label) {
    switch (label) {
        case RelationLabel::Temporal: return kTemporal;
        case RelationLabel::Contingency: return kContingency;
        case RelationLabel::Comparison: return kComparison;
        case RelationLabel::Expansion: return kExpansion;
        case RelationLabel::None: break;
    }
    return {};
}

std::vector<LabeledPair> generate_synthetic(std::size_t n_per_label, std::uint64_t seed) {
    if (n_per_label < 1) {
        throw std::invalid_argument("n_per_label must be at least 1");
    }
    Rng rng(seed);
    std::vector<LabeledPair> out;
    out.reserve(n_per_label * kNumLabels);
    for (auto label : kAllLabels) {
        for (std::size_t i = 0; i < n_per_label; ++i) {
            LabeledPair p;
            p.label = label;
            p.arg1 = capitalize(clause(rng)) + ".";
            if (label == RelationLabel::None) {
                p.arg2 = fmt::format("The {} {}.", pick(kUnrelatedSubjects, rng),
                                     pick(kUnrelatedPredicates, rng));
            } else {
                p.arg2 = fmt::format("{} {}.", opener(label, rng), clause(rng));
            }
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::pair<std::vector<LabeledPair>, std::vector<LabeledPair>> split_pairs(
    std::vector<LabeledPair> pairs, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("train_fraction must lie in (0, 1)");
    }
    Rng rng(seed);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const auto cut = static_cast<std::size_t>(train_fraction * static_cast<double>(pairs.size()));
    std::vector<LabeledPair> test(std::make_move_iterator(pairs.begin() + static_cast<std::ptrdiff_t>(cut)),
                                  std::make_move_iterator(pairs.end()));
    pairs.resize(cut);
    return {std::move(pairs), std::move(test)};
}

std::vector<LabeledPair> load_pdtb_format(const std::filesystem::path& path,
                                          std::vector<std::string>* diagnostics) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot read {}", path.string()));
    }
    std::vector<LabeledPair> out;
    std::string line;
    std::size_t line_no = 0;
    auto report = [&](std::string msg) {
        if (diagnostics) {
            diagnostics->push_back(fmt::format("{}:{}: {}", path.string(), line_no, msg));
        }
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto cols = split_tabs(line);
        if (cols.size() != 3) {
            report(fmt::format("expected 3 tab-separated columns, found {}", cols.size()));
            continue;
        }
        const auto label = collapse_sense(cols[2]);
        if (!label) {
            report(fmt::format("unknown sense '{}'", cols[2]));
            continue;
        }
        if (cols[0].empty() || cols[1].empty()) {
            report("empty argument");
            continue;
        }
        out.push_back({cols[0], cols[1], *label});
    }
    return out;
}

void write_pdtb_format(const std::filesystem::path& path, std::span<const LabeledPair> pairs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    }
    for (const auto& p : pairs) {
        for (const auto* text : {&p.arg1, &p.arg2}) {
            if (text->find_first_of("\t\n\r") != std::string::npos) {
                throw std::invalid_argument("argument text contains a tab or line break");
            }
        }
        out << p.arg1 << '\t' << p.arg2 << '\t' << label_name(p.label) << '\n';
    }
}

}  // namespace storyweave
