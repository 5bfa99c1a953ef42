#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ltlrl/error.hpp"

namespace ltlrl {

/// A set of atomic propositions, one bit per alphabet index.
using LabelSet = std::uint32_t;

inline constexpr std::size_t kMaxPropositions = 16;

/// Ordered set of proposition names. The position of a name is its bit in a
/// LabelSet.
class Alphabet {
 public:
  Alphabet() = default;

  explicit Alphabet(std::vector<std::string> names) {
    for (auto& n : names) add(n);
  }

  /// Adds `name` if absent and returns its index.
  std::size_t add(const std::string& name) {
    if (auto i = index_of(name)) return *i;
    if (names_.size() >= kMaxPropositions)
      throw ValidationError("alphabet exceeds " + std::to_string(kMaxPropositions) + " propositions");
    names_.push_back(name);
    return names_.size() - 1;
  }

  std::optional<std::size_t> index_of(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
  }

  bool contains(std::string_view name) const { return index_of(name).has_value(); }

  LabelSet bit(std::string_view name) const {
    auto i = index_of(name);
    if (!i) throw ValidationError("unknown proposition '" + std::string(name) + "'");
    return LabelSet{1} << *i;
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  /// Number of distinct label sets, 2^|AP|.
  std::size_t letter_count() const { return std::size_t{1} << names_.size(); }

  /// Renders a label set as `{a,b}`.
  std::string format(LabelSet label) const {
    std::string out = "{";
    bool first = true;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (label & (LabelSet{1} << i)) {
        if (!first) out += ',';
        out += names_[i];
        first = false;
      }
    }
    return out + "}";
  }

  bool operator==(const Alphabet&) const = default;

 private:
  std::vector<std::string> names_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

inline bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

}  // namespace detail

}  // namespace ltlrl
