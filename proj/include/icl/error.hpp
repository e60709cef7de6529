#pragma once

#include <stdexcept>
#include <string>

namespace icl {

/// Error with a stable machine-readable code; the CLI prints "error: <code>: <message>".
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

}  // namespace icl
