#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ltlrl {

/// Malformed input text (formula, automaton, world, lasso word or config).
/// `position()` is a character offset for formulas and a 1-based line
/// number for line-oriented files.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Well-formed input that violates a semantic constraint (unknown atom,
/// non-total guards, inconsistent configuration, ...).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ltlrl
