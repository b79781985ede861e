#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "storyweave/classifier.hpp"
#include "storyweave/corpus.hpp"
#include "storyweave/labels.hpp"

namespace storyweave {

/// A classified segment pair, the unit an editor curates.
/// segment_a always comes from the lexicographically smaller document id.
struct RelationCandidate {
    std::string topic;
    Segment segment_a;
    Segment segment_b;
    double doc_similarity = 0.0;
    double segment_similarity = 0.0;
    RelationScores scores{};
    RelationLabel predicted = RelationLabel::None;
    double importance_a = 0.5;
    double importance_b = 0.5;

    double confidence() const;

    bool operator==(const RelationCandidate&) const = default;
};

struct TopicStats {
    std::string topic;
    std::size_t documents = 0;
    std::size_t document_pairs = 0;
    std::size_t candidates = 0;

    bool operator==(const TopicStats&) const = default;
};

struct PipelineStats {
    std::size_t documents_ingested = 0;
    std::size_t documents_retained = 0;
    std::size_t segments = 0;
    std::size_t topic_groups = 0;
    std::size_t document_pairs = 0;
    std::size_t segment_pairs = 0;
    std::array<std::size_t, kNumLabels> label_counts{};
    std::vector<TopicStats> topics;
    double duration_ms = 0.0;  // not serialized by stats_to_json

    bool operator==(const PipelineStats&) const = default;
};

enum class RankMode { by_confidence, by_importance, by_similarity };

struct PipelineConfig {
    std::string language = "en";
    std::size_t min_words = kDefaultMinWords;
    double threshold = 0.15;
    std::uint64_t seed = 42;
    std::size_t min_df = 1;
    /// Pair documents across topic groups too; such candidates get topic "a / b".
    bool cross_topic = false;
    /// Cap on classified segment pairs per document pair, 0 for none.
    std::size_t max_pairs_per_docpair = 0;
    bool importance = true;
    RankMode order = RankMode::by_confidence;
    /// Worker threads for encoding; 0 picks the hardware concurrency.
    std::size_t threads = 0;
};

/// Raised when a stage fails; what() starts with the stage name.
class PipelineError : public std::runtime_error {
public:
    PipelineError(std::string stage, const std::string& message);
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct PipelineResult {
    Corpus corpus;  // language-filtered and segmented
    std::vector<RelationCandidate> candidates;  // ranked by config.order
    PipelineStats stats;
};

/// filter_language, segmentation, filter_short, group_by_topic,
/// candidate_pairs, segment_pairs, importance and classification.
/// `raw` is re-segmented from document bodies.
PipelineResult run_pipeline(const Corpus& raw, const RelationModel& model,
                            const PipelineConfig& config);

/// `corpus_path` is a crawl record file or a saved corpus directory.
PipelineResult run_pipeline(const std::filesystem::path& corpus_path,
                            const std::filesystem::path& checkpoint_path,
                            const PipelineConfig& config);

/// Record file or corpus directory, documents only.
Corpus load_corpus_input(const std::filesystem::path& path, IngestReport* report = nullptr);

/// Stable sort by the mode's key descending, ties by topic then segment ids.
/// by_confidence: max score; by_importance: importance_a + importance_b;
/// by_similarity: segment similarity, then document similarity.
std::vector<RelationCandidate> rank_candidates(std::vector<RelationCandidate> candidates,
                                               RankMode mode);

/// "confidence", "importance" or "similarity"; throws std::invalid_argument otherwise.
RankMode parse_rank_mode(std::string_view name);
std::string_view rank_mode_name(RankMode mode);

enum class ExportFormat { table, records };

/// Markdown table with columns Topic, Segment A, Segment B, S., Co., Ct., E.,
/// T., N.; two decimals, leading zero dropped, winning score in bold.
std::string render_candidate_table(std::span<const RelationCandidate> candidates);

/// One JSON record per line, full precision.
std::string render_candidate_records(std::span<const RelationCandidate> candidates);

/// Throws std::runtime_error when the file cannot be written.
void export_candidates(std::span<const RelationCandidate> candidates,
                       const std::filesystem::path& path, ExportFormat format);

std::vector<RelationCandidate> load_candidate_records(const std::filesystem::path& path);

nlohmann::json candidate_to_json(const RelationCandidate& candidate);
RelationCandidate candidate_from_json(const nlohmann::json& j);
nlohmann::json stats_to_json(const PipelineStats& stats);
PipelineStats stats_from_json(const nlohmann::json& j);

/// Writes documents.jsonl, segments.jsonl, candidates.jsonl, candidates.md and
/// stats.json into `dir`, creating it if needed.
void write_pipeline_output(const PipelineResult& result, const std::filesystem::path& dir);

struct PipelineOutput {
    Corpus corpus;
    std::vector<RelationCandidate> candidates;
    PipelineStats stats;
};

PipelineOutput load_pipeline_output(const std::filesystem::path& dir);

}  // namespace storyweave
