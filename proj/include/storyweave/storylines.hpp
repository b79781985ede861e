#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace storyweave {

struct StorylineEntry {
    std::string segment_id;
    std::string note;

    bool operator==(const StorylineEntry&) const = default;
};

/// An editor-assembled ordered sequence of segments. Order indices are the
/// positions in `entries`.
struct Storyline {
    std::uint64_t id = 0;
    std::string title;
    std::string topic;
    std::vector<StorylineEntry> entries;
    std::int64_t created_ms = 0;
    std::int64_t modified_ms = 0;
    std::uint64_t version = 1;

    bool operator==(const Storyline&) const = default;
};

nlohmann::json storyline_to_json(const Storyline& storyline);
Storyline storyline_from_json(const nlohmann::json& j);

struct StorylineDraft {
    std::string title;
    std::string topic;
    std::vector<StorylineEntry> entries;
};

/// Append-only log of storyline versions, one JSON record per line. Every
/// write is flushed to disk before returning; on open the log is replayed
/// with the latest version of each id winning, and rewritten without
/// superseded versions. Writes are serialized, reads run concurrently.
class StorylineStore {
public:
    using Clock = std::function<std::int64_t()>;

    /// Throws std::runtime_error when the log cannot be opened.
    explicit StorylineStore(std::filesystem::path path, Clock clock = {});
    ~StorylineStore();

    StorylineStore(const StorylineStore&) = delete;
    StorylineStore& operator=(const StorylineStore&) = delete;

    /// Modified timestamp descending, then id descending.
    std::vector<Storyline> list() const;
    std::optional<Storyline> get(std::uint64_t id) const;

    /// ApiError 400 for an empty title or segment list, 409 when the title is
    /// already used within the topic.
    Storyline create(const StorylineDraft& draft);
    /// Full replacement, last writer wins. ApiError 404 for an unknown id.
    Storyline replace(std::uint64_t id, const StorylineDraft& draft);

    const std::filesystem::path& path() const { return path_; }
    /// Lines that could not be parsed during replay (a torn final write).
    std::size_t skipped_records() const { return skipped_; }

private:
    void validate(const StorylineDraft& draft, std::optional<std::uint64_t> self) const;
    void append(const Storyline& storyline);
    std::int64_t next_timestamp();

    std::filesystem::path path_;
    Clock clock_;
    int fd_ = -1;
    mutable std::shared_mutex mutex_;
    std::map<std::uint64_t, Storyline> storylines_;
    std::uint64_t next_id_ = 1;
    std::int64_t last_ms_ = 0;
    std::size_t skipped_ = 0;
};

}  // namespace storyweave
