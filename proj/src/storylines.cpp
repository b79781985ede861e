#include "storyweave/storylines.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>

#include <fcntl.h>
#include <unistd.h>

#include <fmt/core.h>

#include "storyweave/api_error.hpp"
#include "storyweave/jsonl.hpp"

namespace storyweave {
namespace {

using nlohmann::json;

std::int64_t wall_clock_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void write_all(int fd, std::string_view data, const std::filesystem::path& path) {
    while (!data.empty()) {
        const auto n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw std::runtime_error(
                fmt::format("write to {} failed: {}", path.string(), std::strerror(errno)));
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

int open_log(const std::filesystem::path& path) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) {
        throw std::runtime_error(
            fmt::format("cannot open storyline log {}: {}", path.string(), std::strerror(errno)));
    }
    return fd;
}

}  // namespace

json storyline_to_json(const Storyline& s) {
    json segments = json::array();
    for (std::size_t i = 0; i < s.entries.size(); ++i) {
        segments.push_back(
            {{"order", i}, {"segment_id", s.entries[i].segment_id}, {"note", s.entries[i].note}});
    }
    return json{{"id", s.id},
                {"title", s.title},
                {"topic", s.topic},
                {"segments", std::move(segments)},
                {"created_ms", s.created_ms},
                {"modified_ms", s.modified_ms},
                {"version", s.version}};
}

Storyline storyline_from_json(const json& j) {
    Storyline s;
    s.id = j.at("id").get<std::uint64_t>();
    s.title = j.at("title").get<std::string>();
    s.topic = j.at("topic").get<std::string>();
    const auto& segments = j.at("segments");
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& e = segments[i];
        if (e.at("order").get<std::size_t>() != i) {
            throw std::invalid_argument(fmt::format("storyline {} has non-dense order", s.id));
        }
        s.entries.push_back({e.at("segment_id").get<std::string>(), e.value("note", "")});
    }
    s.created_ms = j.at("created_ms").get<std::int64_t>();
    s.modified_ms = j.at("modified_ms").get<std::int64_t>();
    s.version = j.at("version").get<std::uint64_t>();
    return s;
}

StorylineStore::StorylineStore(std::filesystem::path path, Clock clock)
    : path_(std::move(path)), clock_(clock ? std::move(clock) : Clock(wall_clock_ms)) {
    if (path_.has_parent_path()) {
        std::filesystem::create_directories(path_.parent_path());
    }
    std::size_t lines = 0;
    if (std::ifstream in(path_); in) {
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) {
                continue;
            }
            ++lines;
            try {
                auto s = storyline_from_json(json::parse(line));
                next_id_ = std::max(next_id_, s.id + 1);
                last_ms_ = std::max({last_ms_, s.modified_ms, s.created_ms});
                storylines_[s.id] = std::move(s);
            } catch (const std::exception&) {
                ++skipped_;
            }
        }
    }
    if (lines != storylines_.size()) {
        // Drop superseded versions: write the survivors next to the log and rename.
        auto tmp = path_;
        tmp += ".compact";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            for (const auto& [id, s] : storylines_) {
                out << jsonl::dump_line(storyline_to_json(s)) << '\n';
            }
            out.flush();
            if (!out) {
                throw std::runtime_error(fmt::format("cannot compact {}", path_.string()));
            }
        }
        const int tfd = ::open(tmp.c_str(), O_RDONLY | O_CLOEXEC);
        if (tfd >= 0) {
            ::fsync(tfd);
            ::close(tfd);
        }
        std::filesystem::rename(tmp, path_);
    }
    fd_ = open_log(path_);
}

StorylineStore::~StorylineStore() {
    if (fd_ >= 0) {
        ::close(fd_);
    }
}

std::vector<Storyline> StorylineStore::list() const {
    std::shared_lock lock(mutex_);
    std::vector<Storyline> out;
    out.reserve(storylines_.size());
    for (const auto& [id, s] : storylines_) {
        out.push_back(s);
    }
    std::sort(out.begin(), out.end(), [](const Storyline& a, const Storyline& b) {
        if (a.modified_ms != b.modified_ms) {
            return a.modified_ms > b.modified_ms;
        }
        return a.id > b.id;
    });
    return out;
}

std::optional<Storyline> StorylineStore::get(std::uint64_t id) const {
    std::shared_lock lock(mutex_);
    if (auto it = storylines_.find(id); it != storylines_.end()) {
        return it->second;
    }
    return std::nullopt;
}

void StorylineStore::validate(const StorylineDraft& draft,
                              std::optional<std::uint64_t> self) const {
    if (draft.title.empty()) {
        throw ApiError(400, "invalid_body", "title must not be empty");
    }
    if (draft.topic.empty()) {
        throw ApiError(400, "invalid_body", "topic must not be empty");
    }
    if (draft.entries.empty()) {
        throw ApiError(400, "empty_storyline", "a storyline needs at least one segment");
    }
    for (const auto& [id, s] : storylines_) {
        if (id != self && s.topic == draft.topic && s.title == draft.title) {
            throw ApiError(409, "duplicate_title",
                           fmt::format("topic '{}' already has a storyline titled '{}'",
                                       draft.topic, draft.title));
        }
    }
}

std::int64_t StorylineStore::next_timestamp() {
    last_ms_ = std::max(last_ms_ + 1, clock_());
    return last_ms_;
}

void StorylineStore::append(const Storyline& s) {
    const auto line = jsonl::dump_line(storyline_to_json(s)) + '\n';
    write_all(fd_, line, path_);
    if (::fsync(fd_) != 0) {
        throw std::runtime_error(
            fmt::format("fsync of {} failed: {}", path_.string(), std::strerror(errno)));
    }
}

Storyline StorylineStore::create(const StorylineDraft& draft) {
    std::unique_lock lock(mutex_);
    validate(draft, std::nullopt);
    Storyline s;
    s.id = next_id_;
    s.title = draft.title;
    s.topic = draft.topic;
    s.entries = draft.entries;
    s.created_ms = s.modified_ms = next_timestamp();
    append(s);
    ++next_id_;
    storylines_[s.id] = s;
    return s;
}

Storyline StorylineStore::replace(std::uint64_t id, const StorylineDraft& draft) {
    std::unique_lock lock(mutex_);
    auto it = storylines_.find(id);
    if (it == storylines_.end()) {
        throw ApiError(404, "not_found", fmt::format("no storyline with id {}", id));
    }
    validate(draft, id);
    Storyline s = it->second;
    s.title = draft.title;
    s.topic = draft.topic;
    s.entries = draft.entries;
    s.modified_ms = next_timestamp();
    ++s.version;
    append(s);
    it->second = s;
    return s;
}

}  // namespace storyweave
