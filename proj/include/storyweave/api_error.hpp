#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <json.hpp>

namespace storyweave {

/// An error with an HTTP status (400, 404, 409 or 500) and a machine-readable code.
class ApiError : public std::runtime_error {
public:
    ApiError(int status, std::string code, const std::string& message)
        : std::runtime_error(message), status_(status), code_(std::move(code)) {}

    int status() const { return status_; }
    const std::string& code() const { return code_; }

    /// {"error": {"status", "code", "message"}}
    nlohmann::json to_json() const {
        return {{"error", {{"status", status_}, {"code", code_}, {"message", what()}}}};
    }

private:
    int status_;
    std::string code_;
};

}  // namespace storyweave
