#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace svrl {

// Error categories; they map 1:1 onto C API status codes and CLI exit codes.
enum class ErrorCode {
    Usage = 1,     // bad arguments or configuration
    Data = 2,      // malformed input data
    Numeric = 3,   // non-finite loss or probability
    Io = 4,        // filesystem failure
    Internal = 5,  // broken invariant
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

// Raised by text-format parsing; carries the byte offset of the first
// grammar violation.
class ParseError : public Error {
public:
    ParseError(std::size_t byte_offset, const std::string& message)
        : Error(ErrorCode::Data,
                message + " (byte offset " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

}  // namespace svrl
