#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace leakscan {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto exit codes (config 2, input format 3, I/O 4).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Operation requires data the index does not carry (e.g. occurrence counts).
class CapabilityError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& what, std::uint64_t offset = npos)
        : Error(offset == npos ? what : what + " (at offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    static constexpr std::uint64_t npos = ~std::uint64_t{0};

    // Byte offset (or line number for text formats) where the problem was found.
    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

class DecodeError : public FormatError {
public:
    using FormatError::FormatError;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace leakscan
