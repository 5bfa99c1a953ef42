#pragma once

// Reference implementations used only by tests. They follow the definitions
// directly and share no code path with the library routines they check.

#include <cstddef>
#include <map>
#include <tuple>

#include "ltlrl/ltl.hpp"

namespace oracle {

/// Direct recursive satisfaction on absolute positions of prefix·loop^ω.
/// Positions i and i+|loop| (i >= |prefix|) start identical suffixes, so an
/// Until witness, if any, occurs within |prefix|+|loop| steps of i.
class BoundedLtl {
 public:
  explicit BoundedLtl(const ltlrl::ltl::LassoWord& w) : w_(w) {}

  bool holds(const ltlrl::ltl::Formula& f, std::size_t i = 0) const {
    using ltlrl::ltl::Kind;
    i = canonical(i);
    switch (f.kind()) {
      case Kind::True: return true;
      case Kind::Atom: {
        auto bit = w_.alphabet.bit(f.name());
        return (w_.at(i) & bit) != 0;
      }
      case Kind::Not: return !holds(f.child(), i);
      case Kind::And: return holds(f.left(), i) && holds(f.right(), i);
      case Kind::Next: return holds(f.child(), i + 1);
      case Kind::Until: {
        const std::size_t horizon = w_.prefix.size() + w_.loop.size() + 1;
        for (std::size_t j = i; j <= i + horizon; ++j) {
          if (holds(f.right(), j)) return true;
          if (!holds(f.left(), j)) return false;
        }
        return false;
      }
    }
    return false;
  }

 private:
  std::size_t canonical(std::size_t i) const {
    const auto p = w_.prefix.size();
    if (i < p) return i;
    return p + (i - p) % w_.loop.size();
  }

  const ltlrl::ltl::LassoWord& w_;
};

}  // namespace oracle
