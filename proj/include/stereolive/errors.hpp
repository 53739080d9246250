#pragma once

#include <stdexcept>
#include <string>

namespace stereolive {

/// Raised when an operation receives arguments outside its contract.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by the binary/text decoders. `offset()` is the byte position at
/// which decoding gave up.
class DecodeError : public std::runtime_error {
public:
    DecodeError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure inside an EmbeddingProvider. Never mapped onto an AuthDecision.
class ProviderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ArgumentError(msg);
}

}  // namespace detail
}  // namespace stereolive
