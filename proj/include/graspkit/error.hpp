#ifndef GRASPKIT_ERROR_HPP
#define GRASPKIT_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace graspkit {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// File-level parse failure; `line` is 1-based.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line(line) {}
    std::size_t line;
};

// Structurally valid input that violates a schema constraint.
class SchemaError : public Error {
public:
    using Error::Error;
};

// Malformed token stream; `token_index` is the 0-based position of the
// offending token within the stream.
class StreamError : public Error {
public:
    StreamError(const std::string& what, std::size_t token_index)
        : Error(what + " (token " + std::to_string(token_index) + ")"),
          token_index(token_index) {}
    std::size_t token_index;
};

}  // namespace graspkit

#endif
