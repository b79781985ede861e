#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "storyweave/classifier.hpp"

namespace storyweave {

/// Openers that mark each label in the synthetic corpus. None has no opener.
std::span<const std::string_view> synthetic_connectives(RelationLabel label);

/// Template pairs whose second argument opens with a label-characteristic
/// connective over random slot fillers; `n_per_label` per label, labels in
/// canonical order, deterministic for a seed.
std::vector<LabeledPair> generate_synthetic(std::size_t n_per_label, std::uint64_t seed);

/// Deterministic shuffled split; the first `train_fraction` goes to training.
std::pair<std::vector<LabeledPair>, std::vector<LabeledPair>> split_pairs(
    std::vector<LabeledPair> pairs, double train_fraction, std::uint64_t seed);

/// Tab-separated arg1, arg2, sense. Senses collapse to their top-level class;
/// unknown senses and malformed lines are skipped and reported.
/// Throws std::runtime_error when the file cannot be read.
std::vector<LabeledPair> load_pdtb_format(const std::filesystem::path& path,
                                          std::vector<std::string>* diagnostics = nullptr);

/// Throws std::invalid_argument if a text contains a tab or newline.
void write_pdtb_format(const std::filesystem::path& path, std::span<const LabeledPair> pairs);

}  // namespace storyweave
