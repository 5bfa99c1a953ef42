#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ltlrl/error.hpp"
#include "ltlrl/labels.hpp"
#include "ltlrl/ltl.hpp"

namespace ltlrl {

using StateId = std::uint32_t;

/// Family of accepting sets, bit j standing for F_j.
using AcceptingFamily = std::uint64_t;

inline constexpr std::size_t kMaxAcceptingSets = 64;

/// Evaluates a Boolean guard on a label set. Temporal operators are rejected
/// when the guard is attached to an edge, so they never reach here.
inline bool eval_guard(const ltl::Formula& g, const Alphabet& alphabet, LabelSet label) {
  switch (g.kind()) {
    case ltl::Kind::True: return true;
    case ltl::Kind::Atom: return (label & alphabet.bit(g.name())) != 0;
    case ltl::Kind::Not: return !eval_guard(g.child(), alphabet, label);
    case ltl::Kind::And: return eval_guard(g.left(), alphabet, label) && eval_guard(g.right(), alphabet, label);
    default: throw ValidationError("guard '" + ltl::to_string(g) + "' is not propositional");
  }
}

struct Edge {
  ltl::Formula guard;
  StateId target;
};

/// Limit-deterministic generalized Büchi automaton with deterministic, total
/// transitions. Construction validates guards by enumerating every label set
/// and caches the resulting transition table and the non-accepting sink set.
class Ldba {
 public:
  Ldba(Alphabet alphabet, std::vector<std::string> states, StateId initial, std::vector<std::vector<Edge>> edges,
       std::vector<std::vector<StateId>> accepting, std::optional<std::vector<StateId>> deterministic = std::nullopt)
      : alphabet_(std::move(alphabet)),
        states_(std::move(states)),
        initial_(initial),
        edges_(std::move(edges)),
        accepting_(std::move(accepting)),
        deterministic_(std::move(deterministic)) {
    validate();
    build_table();
    compute_sink();
  }

  const Alphabet& alphabet() const { return alphabet_; }
  std::size_t state_count() const { return states_.size(); }
  const std::string& state_name(StateId q) const { return states_.at(q); }
  const std::vector<std::string>& state_names() const { return states_; }
  StateId initial() const { return initial_; }
  const std::vector<Edge>& edges(StateId q) const { return edges_.at(q); }
  const std::vector<std::vector<StateId>>& accepting_sets() const { return accepting_; }
  const std::optional<std::vector<StateId>>& deterministic_part() const { return deterministic_; }

  std::optional<StateId> state_index(std::string_view name) const {
    auto it = std::find(states_.begin(), states_.end(), name);
    if (it == states_.end()) return std::nullopt;
    return static_cast<StateId>(it - states_.begin());
  }

  /// f, the number of accepting sets.
  std::size_t accepting_count() const { return accepting_.size(); }

  /// The whole family {F_1..F_f}.
  AcceptingFamily full_family() const {
    return accepting_.size() == 64 ? ~AcceptingFamily{0} : ((AcceptingFamily{1} << accepting_.size()) - 1);
  }

  /// Accepting sets containing q.
  AcceptingFamily membership(StateId q) const { return membership_.at(q); }
  bool is_accepting(StateId q) const { return membership_.at(q) != 0; }

  /// The unique successor of q on `label`.
  StateId step(StateId q, LabelSet label) const { return table_[q * letters_ + label]; }

  /// Union of non-accepting bottom SCCs.
  bool in_sink(StateId q) const { return sink_.at(q); }
  std::vector<StateId> sink_states() const {
    std::vector<StateId> out;
    for (StateId q = 0; q < sink_.size(); ++q)
      if (sink_[q]) out.push_back(q);
    return out;
  }

  /// Successors of q over all labels, deduplicated.
  std::vector<StateId> successors(StateId q) const {
    std::vector<StateId> out;
    for (std::size_t l = 0; l < letters_; ++l) out.push_back(table_[q * letters_ + l]);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Structural equality: same names, alphabet, edges (guards compared as
  /// trees), accepting family and partition.
  friend bool operator==(const Ldba& a, const Ldba& b) {
    if (a.alphabet_ != b.alphabet_ || a.states_ != b.states_ || a.initial_ != b.initial_ ||
        a.accepting_ != b.accepting_ || a.deterministic_ != b.deterministic_ || a.edges_.size() != b.edges_.size())
      return false;
    for (std::size_t q = 0; q < a.edges_.size(); ++q) {
      if (a.edges_[q].size() != b.edges_[q].size()) return false;
      for (std::size_t e = 0; e < a.edges_[q].size(); ++e) {
        if (a.edges_[q][e].target != b.edges_[q][e].target || !(a.edges_[q][e].guard == b.edges_[q][e].guard))
          return false;
      }
    }
    return true;
  }

 private:
  void validate() {
    if (states_.empty()) throw ValidationError("automaton has no states");
    if (initial_ >= states_.size()) throw ValidationError("initial state out of range");
    if (edges_.size() != states_.size()) throw ValidationError("edge lists do not match state count");
    if (accepting_.empty()) throw ValidationError("automaton needs at least one accepting set");
    if (accepting_.size() > kMaxAcceptingSets) throw ValidationError("too many accepting sets");
    {
      auto sorted = states_;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ValidationError("duplicate state name");
    }
    membership_.assign(states_.size(), 0);
    for (std::size_t j = 0; j < accepting_.size(); ++j) {
      for (auto q : accepting_[j]) {
        if (q >= states_.size()) throw ValidationError("accepting state out of range");
        membership_[q] |= AcceptingFamily{1} << j;
      }
    }
    if (deterministic_) {
      std::vector<bool> in_d(states_.size(), false);
      for (auto q : *deterministic_) {
        if (q >= states_.size()) throw ValidationError("deterministic-part state out of range");
        in_d[q] = true;
      }
      for (std::size_t j = 0; j < accepting_.size(); ++j)
        for (auto q : accepting_[j])
          if (!in_d[q])
            throw ValidationError("accepting state " + states_[q] + " of F_" + std::to_string(j + 1) +
                                  " lies outside the deterministic part");
    }
    for (std::size_t q = 0; q < edges_.size(); ++q) {
      for (const auto& e : edges_[q]) {
        if (e.target >= states_.size()) throw ValidationError("edge target out of range at " + states_[q]);
        if (!e.guard.is_propositional())
          throw ValidationError("guard '" + ltl::to_string(e.guard) + "' at " + states_[q] + " is not propositional");
        for (const auto& a : e.guard.atoms())
          if (!alphabet_.contains(a))
            throw ValidationError("guard at " + states_[q] + " uses unknown proposition '" + a + "'");
      }
    }
  }

  void build_table() {
    letters_ = alphabet_.letter_count();
    table_.assign(states_.size() * letters_, 0);
    for (std::size_t q = 0; q < states_.size(); ++q) {
      for (std::size_t l = 0; l < letters_; ++l) {
        const auto label = static_cast<LabelSet>(l);
        std::optional<StateId> hit;
        for (const auto& e : edges_[q]) {
          if (!eval_guard(e.guard, alphabet_, label)) continue;
          if (hit)
            throw ValidationError("overlapping guards at " + states_[q] + " on label " + alphabet_.format(label));
          hit = e.target;
        }
        if (!hit) throw ValidationError("non-total guards at " + states_[q] + " on label " + alphabet_.format(label));
        table_[q * letters_ + l] = *hit;
      }
    }
  }

  // Tarjan's SCC algorithm; a bottom SCC that misses some F_k joins the sink.
  void compute_sink() {
    const std::size_t n = states_.size();
    std::vector<std::vector<StateId>> succ(n);
    for (StateId q = 0; q < n; ++q) succ[q] = successors(q);

    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<bool> on_stack(n, false);
    std::vector<StateId> stack;
    int counter = 0, comps = 0;
    std::function<void(StateId)> visit = [&](StateId v) {
      index[v] = low[v] = counter++;
      stack.push_back(v);
      on_stack[v] = true;
      for (auto w : succ[v]) {
        if (index[w] < 0) {
          visit(w);
          low[v] = std::min(low[v], low[w]);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
      }
      if (low[v] == index[v]) {
        StateId w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = comps;
        } while (w != v);
        ++comps;
      }
    };
    for (StateId q = 0; q < n; ++q)
      if (index[q] < 0) visit(q);

    std::vector<bool> bottom(comps, true);
    std::vector<AcceptingFamily> touched(comps, 0);
    for (StateId q = 0; q < n; ++q) {
      touched[comp[q]] |= membership_[q];
      for (auto w : succ[q])
        if (comp[w] != comp[q]) bottom[comp[q]] = false;
    }
    sink_.assign(n, false);
    for (StateId q = 0; q < n; ++q) {
      const auto c = comp[q];
      sink_[q] = bottom[c] && touched[c] != full_family();
    }
  }

  Alphabet alphabet_;
  std::vector<std::string> states_;
  StateId initial_;
  std::vector<std::vector<Edge>> edges_;
  std::vector<std::vector<StateId>> accepting_;
  std::optional<std::vector<StateId>> deterministic_;

  std::vector<AcceptingFamily> membership_;
  std::size_t letters_ = 0;
  std::vector<StateId> table_;
  std::vector<bool> sink_;
};

// ---------------------------------------------------------------------------
// Text format
//
//   alphabet: t1 t2 u
//   states: q1 q2 q3 q4
//   initial: q1
//   accepting: {q3}
//   deterministic: q3 q4          (optional)
//   edge: q1 -> q2 on t1 & !u
//
// Blank lines and lines starting with '#' are ignored.

inline Ldba load_ldba(std::string_view text) {
  std::optional<Alphabet> alphabet;
  std::vector<std::string> states;
  std::optional<std::string> initial;
  std::vector<std::vector<std::string>> accepting;
  bool have_accepting = false;
  std::optional<std::vector<std::string>> deterministic;
  struct RawEdge {
    std::string from, to, guard;
    std::size_t line;
  };
  std::vector<RawEdge> raw;

  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto colon = body.find(':');
    if (colon == std::string_view::npos)
      throw ParseError("line " + std::to_string(lineno) + ": expected 'key: value'", lineno);
    auto key = detail::trim(body.substr(0, colon));
    auto value = detail::trim(body.substr(colon + 1));
    if (key == "alphabet") {
      alphabet = Alphabet(detail::split_ws(value));
    } else if (key == "states") {
      states = detail::split_ws(value);
    } else if (key == "initial") {
      initial = std::string(value);
    } else if (key == "accepting") {
      have_accepting = true;
      std::size_t i = 0;
      while (i < value.size()) {
        if (value[i] == ' ' || value[i] == '\t') {
          ++i;
          continue;
        }
        if (value[i] != '{') throw ParseError("line " + std::to_string(lineno) + ": expected '{'", lineno);
        auto close = value.find('}', i);
        if (close == std::string_view::npos)
          throw ParseError("line " + std::to_string(lineno) + ": unterminated '{'", lineno);
        std::string inner(value.substr(i + 1, close - i - 1));
        std::replace(inner.begin(), inner.end(), ',', ' ');
        accepting.push_back(detail::split_ws(inner));
        i = close + 1;
      }
    } else if (key == "deterministic") {
      deterministic = detail::split_ws(value);
    } else if (key == "edge") {
      auto arrow = value.find("->");
      auto on = value.find(" on ");
      if (arrow == std::string_view::npos || on == std::string_view::npos || on < arrow)
        throw ParseError("line " + std::to_string(lineno) + ": expected 'edge: FROM -> TO on GUARD'", lineno);
      raw.push_back({std::string(detail::trim(value.substr(0, arrow))),
                     std::string(detail::trim(value.substr(arrow + 2, on - arrow - 2))),
                     std::string(detail::trim(value.substr(on + 4))), lineno});
    } else {
      throw ParseError("line " + std::to_string(lineno) + ": unknown key '" + std::string(key) + "'", lineno);
    }
  }
  if (!alphabet) throw ParseError("missing 'alphabet:' line", 0);
  if (states.empty()) throw ParseError("missing 'states:' line", 0);
  if (!initial) throw ParseError("missing 'initial:' line", 0);
  if (!have_accepting) throw ParseError("missing 'accepting:' line", 0);

  auto index = [&](const std::string& name, std::size_t at) -> StateId {
    auto it = std::find(states.begin(), states.end(), name);
    if (it == states.end())
      throw ValidationError("line " + std::to_string(at) + ": undeclared state '" + name + "'");
    return static_cast<StateId>(it - states.begin());
  };

  std::vector<std::vector<Edge>> edges(states.size());
  for (const auto& r : raw) {
    ltl::Formula g = [&] {
      try {
        return ltl::parse(r.guard, *alphabet);
      } catch (const ParseError& e) {
        throw ParseError("line " + std::to_string(r.line) + ": " + e.what(), r.line);
      }
    }();
    edges[index(r.from, r.line)].push_back({g, index(r.to, r.line)});
  }
  std::vector<std::vector<StateId>> acc;
  for (const auto& set : accepting) {
    std::vector<StateId> ids;
    for (const auto& s : set) ids.push_back(index(s, 0));
    acc.push_back(std::move(ids));
  }
  std::optional<std::vector<StateId>> det;
  if (deterministic) {
    det.emplace();
    for (const auto& s : *deterministic) det->push_back(index(s, 0));
  }
  return Ldba(std::move(*alphabet), std::move(states), index(*initial, 0), std::move(edges), std::move(acc),
              std::move(det));
}

inline std::string print_ldba(const Ldba& a) {
  std::ostringstream out;
  auto join = [](const std::vector<std::string>& v, const char* sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
    return s;
  };
  out << "alphabet: " << join(a.alphabet().names(), " ") << '\n';
  out << "states: " << join(a.state_names(), " ") << '\n';
  out << "initial: " << a.state_name(a.initial()) << '\n';
  out << "accepting:";
  for (const auto& set : a.accepting_sets()) {
    std::vector<std::string> names;
    for (auto q : set) names.push_back(a.state_name(q));
    out << " {" << join(names, ",") << '}';
  }
  out << '\n';
  if (const auto& d = a.deterministic_part()) {
    std::vector<std::string> names;
    for (auto q : *d) names.push_back(a.state_name(q));
    out << "deterministic: " << join(names, " ") << '\n';
  }
  for (StateId q = 0; q < a.state_count(); ++q)
    for (const auto& e : a.edges(q))
      out << "edge: " << a.state_name(q) << " -> " << a.state_name(e.target) << " on " << ltl::to_string(e.guard)
          << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Accepting frontier

/// Frontier update on visiting a state whose accepting-set membership is
/// `member`. Sets of the frontier containing the state are removed; if that
/// would empty the frontier, it restarts from the full family minus the sets
/// just visited, or from the full family when nothing would remain (f = 1).
inline AcceptingFamily accepting_frontier(AcceptingFamily member, AcceptingFamily frontier, AcceptingFamily full) {
  const AcceptingFamily hit = member & frontier;
  if (!hit) return frontier;
  const AcceptingFamily rest = frontier & ~hit;
  if (rest) return rest;
  const AcceptingFamily restart = full & ~hit;
  return restart ? restart : full;
}

inline AcceptingFamily accepting_frontier(const Ldba& a, StateId q, AcceptingFamily frontier) {
  return accepting_frontier(a.membership(q), frontier, a.full_family());
}

// ---------------------------------------------------------------------------
// Lasso acceptance

/// Maps a label over `from` into the bit layout of `to`.
inline LabelSet remap_label(LabelSet label, const Alphabet& from, const Alphabet& to) {
  LabelSet out = 0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (!(label & (LabelSet{1} << i))) continue;
    auto j = to.index_of(from.name(i));
    if (!j) throw ValidationError("proposition '" + from.name(i) + "' is not in the automaton alphabet");
    out |= LabelSet{1} << *j;
  }
  return out;
}

/// Runs the prefix, then the loop until the state at the loop boundary
/// repeats; accepts iff the states of one period meet every F_j.
inline bool accepts_lasso(const Ldba& a, const ltl::LassoWord& w) {
  w.validate();
  std::vector<LabelSet> prefix, loop;
  for (auto l : w.prefix) prefix.push_back(remap_label(l, w.alphabet, a.alphabet()));
  for (auto l : w.loop) loop.push_back(remap_label(l, w.alphabet, a.alphabet()));

  StateId q = a.initial();
  for (auto l : prefix) q = a.step(q, l);

  std::vector<int> seen_at(a.state_count(), -1);
  std::vector<StateId> boundary;
  while (seen_at[q] < 0) {
    seen_at[q] = static_cast<int>(boundary.size());
    boundary.push_back(q);
    for (auto l : loop) q = a.step(q, l);
  }
  // One period starts at boundary state q.
  AcceptingFamily visited = 0;
  const std::size_t periods = boundary.size() - static_cast<std::size_t>(seen_at[q]);
  for (std::size_t p = 0; p < periods; ++p) {
    for (auto l : loop) {
      q = a.step(q, l);
      visited |= a.membership(q);
    }
  }
  return visited == a.full_family();
}

// ---------------------------------------------------------------------------
// Sequential reach-avoid fragment
//
//   F (t1 & F (t2 & ... F tn))  [& G (tn -> G tn)]  [& G (u -> G u)]

class FragmentError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Decomposition of a fragment formula.
struct SequentialTask {
  std::vector<std::string> targets;
  bool hold_last = false;
  std::optional<std::string> avoid;
};

namespace detail {

inline void flatten_conjunction(const ltl::Formula& f, std::vector<ltl::Formula>& out) {
  if (f.is(ltl::Kind::And)) {
    flatten_conjunction(f.left(), out);
    flatten_conjunction(f.right(), out);
  } else {
    out.push_back(f);
  }
}

inline std::optional<std::vector<std::string>> match_reach(const ltl::Formula& f) {
  if (!f.is(ltl::Kind::Until) || !f.left().is(ltl::Kind::True)) return std::nullopt;
  auto body = f.right();
  if (body.is(ltl::Kind::Atom)) return std::vector<std::string>{body.name()};
  if (body.is(ltl::Kind::And) && body.left().is(ltl::Kind::Atom)) {
    auto rest = match_reach(body.right());
    if (!rest) return std::nullopt;
    rest->insert(rest->begin(), body.left().name());
    return rest;
  }
  return std::nullopt;
}

// G (x -> G x)
inline std::optional<std::string> match_absorbing(const ltl::Formula& f) {
  for (const auto& name : f.atoms()) {
    using ltl::Formula;
    auto x = Formula::atom(name);
    if (f == Formula::always(Formula::implication(x, Formula::always(x)))) return name;
  }
  return std::nullopt;
}

}  // namespace detail

inline SequentialTask match_sequential(const ltl::Formula& f) {
  std::vector<ltl::Formula> parts;
  detail::flatten_conjunction(f, parts);
  SequentialTask task;
  std::vector<std::string> absorbing;
  bool have_reach = false;
  for (const auto& p : parts) {
    if (auto r = detail::match_reach(p)) {
      if (have_reach) throw FragmentError("more than one reachability chain");
      task.targets = *r;
      have_reach = true;
    } else if (auto x = detail::match_absorbing(p)) {
      absorbing.push_back(*x);
    } else {
      throw FragmentError("conjunct '" + ltl::to_string(p) + "' is outside the sequential fragment");
    }
  }
  if (!have_reach) throw FragmentError("no reachability chain F (t1 & F (... F tn))");
  {
    auto sorted = task.targets;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw FragmentError("sequential targets must be distinct");
  }
  for (const auto& x : absorbing) {
    if (x == task.targets.back() && !task.hold_last) {
      task.hold_last = true;
    } else if (!task.avoid && std::find(task.targets.begin(), task.targets.end(), x) == task.targets.end()) {
      task.avoid = x;
    } else {
      throw FragmentError("clause 'G (" + x + " -> G " + x + ")' does not fit the fragment");
    }
  }
  return task;
}

/// Chain automaton for the sequential fragment: states q1..q{n+1} track how
/// many targets have been reached, plus a trap q{n+2} when a hold or avoid
/// clause is present. A label carrying several consecutive targets advances
/// past all of them.
inline Ldba translate_sequential(const SequentialTask& task) {
  using ltl::Formula;
  const std::size_t n = task.targets.size();
  if (n == 0) throw FragmentError("empty target list");
  Alphabet alphabet;
  for (const auto& t : task.targets) alphabet.add(t);
  if (task.avoid) alphabet.add(*task.avoid);

  const bool has_trap = task.hold_last || task.avoid.has_value();
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n + 1 + (has_trap ? 1 : 0); ++i) names.push_back("q" + std::to_string(i + 1));
  const auto final_state = static_cast<StateId>(n);
  const auto trap = static_cast<StateId>(n + 1);

  auto conj = [](std::optional<Formula> acc, Formula f) {
    return acc ? Formula::conjunction(*acc, std::move(f)) : f;
  };
  auto atom = [&](std::size_t i) { return Formula::atom(task.targets[i]); };
  auto safe = [&](std::optional<Formula> g) -> Formula {
    if (task.avoid) return conj(std::move(g), Formula::negation(Formula::atom(*task.avoid)));
    return g ? *g : Formula::truth();
  };

  std::vector<std::vector<Edge>> edges(names.size());
  for (std::size_t i = 0; i < n; ++i) {
    // From state i, reading targets i..k-1 but not k moves to state k.
    std::optional<Formula> seen;
    for (std::size_t k = i; k <= n; ++k) {
      std::optional<Formula> g = seen;
      if (k < n) g = conj(g, Formula::negation(atom(k)));
      edges[i].push_back({safe(g), static_cast<StateId>(k)});
      if (k < n) seen = conj(seen, atom(k));
    }
    if (task.avoid) edges[i].push_back({Formula::atom(*task.avoid), trap});
  }
  if (task.hold_last) {
    edges[final_state].push_back({safe(atom(n - 1)), final_state});
    auto leave = Formula::negation(atom(n - 1));
    if (task.avoid) leave = Formula::disjunction(Formula::atom(*task.avoid), leave);
    edges[final_state].push_back({leave, trap});
  } else {
    edges[final_state].push_back({safe(std::nullopt), final_state});
    if (task.avoid) edges[final_state].push_back({Formula::atom(*task.avoid), trap});
  }
  if (has_trap) edges[trap].push_back({Formula::truth(), trap});

  std::vector<StateId> det{final_state};
  if (has_trap) det.push_back(trap);
  return Ldba(std::move(alphabet), std::move(names), 0, std::move(edges), {{final_state}}, std::move(det));
}

inline Ldba translate_sequential(const ltl::Formula& f) { return translate_sequential(match_sequential(f)); }

}  // namespace ltlrl
