#include "storyweave/service.hpp"

#include <charconv>
#include <set>

#include <fmt/core.h>
#include <httplib.h>

namespace storyweave {
namespace {

using nlohmann::json;

std::optional<std::size_t> parse_count(std::string_view text) {
    std::size_t value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end) {
        return std::nullopt;
    }
    return value;
}

ApiResponse error_response(const ApiError& e) { return {e.status(), e.to_json()}; }

std::uint64_t parse_storyline_id(std::string_view text) {
    const auto id = parse_count(text);
    if (!id) {
        throw ApiError(404, "not_found", fmt::format("no storyline with id '{}'", text));
    }
    return *id;
}

std::string require_string(const json& body, const char* key) {
    const auto it = body.find(key);
    if (it == body.end() || !it->is_string()) {
        throw ApiError(400, "invalid_body", fmt::format("'{}' must be a string", key));
    }
    return it->get<std::string>();
}

std::vector<StorylineEntry> parse_entries(const json& body) {
    std::vector<StorylineEntry> entries;
    if (const auto it = body.find("segments"); it != body.end()) {
        if (!it->is_array()) {
            throw ApiError(400, "invalid_body", "'segments' must be an array");
        }
        for (const auto& e : *it) {
            if (e.is_string()) {
                entries.push_back({e.get<std::string>(), ""});
            } else if (e.is_object() && e.contains("segment_id") && e["segment_id"].is_string()) {
                const auto note = e.value("note", json(""));
                if (!note.is_string()) {
                    throw ApiError(400, "invalid_body", "'note' must be a string");
                }
                entries.push_back({e["segment_id"].get<std::string>(), note.get<std::string>()});
            } else {
                throw ApiError(400, "invalid_body",
                               "each segment is an id string or {segment_id, note}");
            }
        }
        return entries;
    }
    const auto& ids = body.at("segment_ids");
    if (!ids.is_array()) {
        throw ApiError(400, "invalid_body", "'segment_ids' must be an array");
    }
    json notes = body.value("notes", json::array());
    if (!notes.is_array() || (!notes.empty() && notes.size() != ids.size())) {
        throw ApiError(400, "invalid_body", "'notes' must align with 'segment_ids'");
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!ids[i].is_string() || (!notes.empty() && !notes[i].is_string())) {
            throw ApiError(400, "invalid_body", "segment ids and notes must be strings");
        }
        entries.push_back({ids[i].get<std::string>(),
                           notes.empty() ? std::string() : notes[i].get<std::string>()});
    }
    return entries;
}

template <typename Fn>
ApiResponse guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const ApiError& e) {
        return error_response(e);
    } catch (const std::exception& e) {
        return error_response(ApiError(500, "internal", e.what()));
    }
}

}  // namespace

CurationApi::CurationApi(PipelineOutput data, const std::filesystem::path& store_path,
                         StorylineStore::Clock clock)
    : data_(std::move(data)), store_(store_path, std::move(clock)) {
    for (const auto& t : data_.stats.topics) {
        by_topic_[t.topic];
    }
    for (const auto& c : data_.candidates) {
        by_topic_[c.topic].push_back(c);
    }
}

std::unique_ptr<CurationApi> CurationApi::open(const std::filesystem::path& data_dir,
                                               std::optional<std::filesystem::path> store_path) {
    return std::make_unique<CurationApi>(load_pipeline_output(data_dir),
                                         store_path.value_or(data_dir / "storylines.jsonl"));
}

ApiResponse CurationApi::topics() const {
    json out = json::array();
    for (const auto& t : data_.stats.topics) {
        out.push_back({{"topic", t.topic},
                       {"documents", t.documents},
                       {"document_pairs", t.document_pairs},
                       {"candidates", t.candidates}});
    }
    return {200, json{{"topics", std::move(out)}}};
}

ApiResponse CurationApi::candidates(std::string_view topic, std::string_view sort,
                                    std::string_view offset, std::string_view limit) const {
    return guarded([&]() -> ApiResponse {
        const auto it = by_topic_.find(std::string(topic));
        if (it == by_topic_.end()) {
            throw ApiError(404, "unknown_topic", fmt::format("no topic '{}'", topic));
        }
        RankMode mode = RankMode::by_confidence;
        if (!sort.empty()) {
            try {
                mode = parse_rank_mode(sort);
            } catch (const std::invalid_argument& e) {
                throw ApiError(400, "invalid_sort", e.what());
            }
        }
        const auto off = offset.empty() ? std::optional<std::size_t>(0) : parse_count(offset);
        const auto lim =
            limit.empty() ? std::optional<std::size_t>(kDefaultPageSize) : parse_count(limit);
        if (!off) {
            throw ApiError(400, "invalid_pagination", "offset must be a non-negative integer");
        }
        if (!lim || *lim == 0 || *lim > kMaxPageSize) {
            throw ApiError(400, "invalid_pagination",
                           fmt::format("limit must be between 1 and {}", kMaxPageSize));
        }
        const auto ranked = rank_candidates(it->second, mode);
        json items = json::array();
        for (std::size_t i = *off; i < ranked.size() && i < *off + *lim; ++i) {
            items.push_back(candidate_to_json(ranked[i]));
        }
        return {200, json{{"topic", it->first},
                          {"sort", rank_mode_name(mode)},
                          {"offset", *off},
                          {"limit", *lim},
                          {"total", ranked.size()},
                          {"items", std::move(items)}}};
    });
}

StorylineDraft CurationApi::parse_draft(std::string_view text, const Storyline* base) const {
    const auto body = json::parse(text, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
        throw ApiError(400, "invalid_body", "body must be a JSON object");
    }
    StorylineDraft draft;
    if (base && !body.contains("title")) {
        draft.title = base->title;
    } else {
        draft.title = require_string(body, "title");
    }
    if (base && !body.contains("topic")) {
        draft.topic = base->topic;
    } else {
        draft.topic = require_string(body, "topic");
    }
    if (base && !body.contains("segments") && !body.contains("segment_ids")) {
        draft.entries = base->entries;
    } else if (!body.contains("segments") && !body.contains("segment_ids")) {
        throw ApiError(400, "invalid_body", "'segments' is required");
    } else {
        draft.entries = parse_entries(body);
    }
    if (!by_topic_.contains(draft.topic)) {
        throw ApiError(400, "unknown_topic", fmt::format("no topic '{}'", draft.topic));
    }
    for (const auto& e : draft.entries) {
        if (!data_.corpus.find_segment(e.segment_id)) {
            throw ApiError(400, "unknown_segment", fmt::format("no segment '{}'", e.segment_id));
        }
    }
    return draft;
}

ApiResponse CurationApi::list_storylines() const {
    json out = json::array();
    for (const auto& s : store_.list()) {
        out.push_back(storyline_to_json(s));
    }
    return {200, json{{"storylines", std::move(out)}}};
}

ApiResponse CurationApi::get_storyline(std::string_view id) const {
    return guarded([&]() -> ApiResponse {
        const auto s = store_.get(parse_storyline_id(id));
        if (!s) {
            throw ApiError(404, "not_found", fmt::format("no storyline with id {}", id));
        }
        return {200, storyline_to_json(*s)};
    });
}

ApiResponse CurationApi::create_storyline(std::string_view body) {
    return guarded([&]() -> ApiResponse {
        return {201, storyline_to_json(store_.create(parse_draft(body, nullptr)))};
    });
}

ApiResponse CurationApi::update_storyline(std::string_view id, std::string_view body) {
    return guarded([&]() -> ApiResponse {
        const auto key = parse_storyline_id(id);
        const auto existing = store_.get(key);
        if (!existing) {
            throw ApiError(404, "not_found", fmt::format("no storyline with id {}", id));
        }
        return {200, storyline_to_json(store_.replace(key, parse_draft(body, &*existing)))};
    });
}

struct HttpService::Impl {
    CurationApi& api;
    httplib::Server server;

    explicit Impl(CurationApi& a) : api(a) {}

    static void send(httplib::Response& res, const ApiResponse& r) {
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    }
};

HttpService::HttpService(CurationApi& api, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(api)) {
    auto& server = impl_->server;
    auto* impl = impl_.get();

    server.Get("/api/topics", [impl](const httplib::Request&, httplib::Response& res) {
        Impl::send(res, impl->api.topics());
    });
    server.Get(R"(/api/topics/(.+)/candidates)",
               [impl](const httplib::Request& req, httplib::Response& res) {
                   Impl::send(res, impl->api.candidates(req.matches[1].str(),
                                                        req.get_param_value("sort"),
                                                        req.get_param_value("offset"),
                                                        req.get_param_value("limit")));
               });
    server.Get("/api/storylines", [impl](const httplib::Request&, httplib::Response& res) {
        Impl::send(res, impl->api.list_storylines());
    });
    server.Post("/api/storylines", [impl](const httplib::Request& req, httplib::Response& res) {
        Impl::send(res, impl->api.create_storyline(req.body));
    });
    server.Get(R"(/api/storylines/([^/]+))",
               [impl](const httplib::Request& req, httplib::Response& res) {
                   Impl::send(res, impl->api.get_storyline(req.matches[1].str()));
               });
    server.Put(R"(/api/storylines/([^/]+))",
               [impl](const httplib::Request& req, httplib::Response& res) {
                   Impl::send(res, impl->api.update_storyline(req.matches[1].str(), req.body));
               });
    server.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            std::string message = "unknown error";
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                message = e.what();
            } catch (...) {
            }
            Impl::send(res, {500, ApiError(500, "internal", message).to_json()});
        });
    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (req.path.starts_with("/api/") && res.body.empty()) {
            Impl::send(res, {res.status, ApiError(res.status, "not_found",
                                                  fmt::format("no route for {} {}", req.method,
                                                              req.path))
                                             .to_json()});
        }
    });
    if (static_dir) {
        if (!server.set_mount_point("/", static_dir->string())) {
            throw std::runtime_error(
                fmt::format("static directory {} does not exist", static_dir->string()));
        }
    }
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
    if (port == 0) {
        return impl_->server.bind_to_any_port(host);
    }
    return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpService::listen() { return impl_->server.listen_after_bind(); }

void HttpService::stop() {
    if (impl_ && impl_->server.is_running()) {
        impl_->server.stop();
    }
}

void HttpService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace storyweave
