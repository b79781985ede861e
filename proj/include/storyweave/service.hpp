#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "storyweave/api_error.hpp"
#include "storyweave/pipeline.hpp"
#include "storyweave/storylines.hpp"

namespace storyweave {

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

inline constexpr std::size_t kDefaultPageSize = 50;
inline constexpr std::size_t kMaxPageSize = 1000;

/// The HTTP handlers as plain functions over loaded pipeline output and a
/// storyline store. Analysis data is read-only; only storylines change.
class CurationApi {
public:
    CurationApi(PipelineOutput data, const std::filesystem::path& store_path,
                StorylineStore::Clock clock = {});

    /// Loads `data_dir` written by write_pipeline_output; the store defaults
    /// to <data_dir>/storylines.jsonl.
    static std::unique_ptr<CurationApi> open(const std::filesystem::path& data_dir,
                                             std::optional<std::filesystem::path> store_path = {});

    ApiResponse topics() const;
    /// Empty strings take the defaults (confidence, 0, kDefaultPageSize).
    ApiResponse candidates(std::string_view topic, std::string_view sort = {},
                           std::string_view offset = {}, std::string_view limit = {}) const;
    ApiResponse list_storylines() const;
    ApiResponse get_storyline(std::string_view id) const;
    ApiResponse create_storyline(std::string_view body);
    ApiResponse update_storyline(std::string_view id, std::string_view body);

    const PipelineOutput& data() const { return data_; }
    StorylineStore& store() { return store_; }

private:
    StorylineDraft parse_draft(std::string_view body, const Storyline* base) const;

    PipelineOutput data_;
    StorylineStore store_;
    std::unordered_map<std::string, std::vector<RelationCandidate>> by_topic_;
};

/// cpp-httplib server exposing CurationApi under /api and, when given, a
/// static directory under /.
class HttpService {
public:
    HttpService(CurationApi& api, std::optional<std::filesystem::path> static_dir = {});
    ~HttpService();

    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Returns the bound port; pass 0 for any free port.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    bool listen();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace storyweave
