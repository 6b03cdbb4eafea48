#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace avp {

// Broken precondition: wrong shapes, out-of-range arguments, mode mismatch.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Non-finite values, zero norms, divergence after an optimizer step.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed binary container. Carries the byte offset where parsing stopped.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

}  // namespace avp
