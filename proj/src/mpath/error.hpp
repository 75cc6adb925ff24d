#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mpath {

enum class ErrorKind {
  dimension,   // shape disagreement between operands
  numeric,     // NaN/Inf where finite values are required
  index,       // out-of-range index
  contract,    // violated precondition
  parse,       // malformed input text
  format,      // well-formed input of the wrong layout
  config,      // invalid configuration
  lookup,      // unknown key / node / column
  degenerate,  // input without enough structure for the computation
  schema,      // dataset and schema disagree
  io,          // file could not be read or written
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Parse errors keep the 1-based line they were raised on.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace mpath
