#pragma once

#include <stdexcept>
#include <string>

namespace mtr {

/// Base error for all library failures caused by bad input or configuration.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Failure of a remote service (embedding endpoint, chat-completion endpoint)
/// after retries were exhausted. Mapped to a distinct process exit code.
class RemoteError : public Error {
public:
    explicit RemoteError(const std::string& what) : Error(what) {}
};

} // namespace mtr
