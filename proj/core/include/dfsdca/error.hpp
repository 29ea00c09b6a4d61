#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dfsdca {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed LibSVM input. `line()` is 1-based; 0 when the error is not tied
/// to a particular line (e.g. an empty file).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Raised by the solver when an update or the optimality gap stops being
/// finite or exceeds the divergence threshold.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t iteration, std::size_t index)
      : Error(what), iteration_(iteration), index_(index) {}
  std::size_t iteration() const noexcept { return iteration_; }
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t iteration_;
  std::size_t index_;
};

}  // namespace dfsdca
