#include "storyweave/jsonl.hpp"

#include <fstream>
#include <stdexcept>

#include <fmt/core.h>

namespace storyweave::jsonl {

std::vector<json> read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open {}", path.string()));
    }
    std::vector<json> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw std::runtime_error(
                fmt::format("{}:{}: malformed record: {}", path.string(), line_no, e.what()));
        }
    }
    return out;
}

std::string dump_line(const json& record) {
    return record.dump(-1, ' ', false, json::error_handler_t::replace);
}

void write_file(const std::filesystem::path& path, const std::vector<json>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    }
    for (const auto& r : records) {
        out << dump_line(r) << '\n';
    }
    if (!out) {
        throw std::runtime_error(fmt::format("write failed: {}", path.string()));
    }
}

}  // namespace storyweave::jsonl
