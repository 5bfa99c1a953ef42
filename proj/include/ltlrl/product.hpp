#pragma once

#include <bit>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "ltlrl/automaton.hpp"
#include "ltlrl/world.hpp"

namespace ltlrl {

struct ProductState {
  WorldState s;
  StateId q = 0;
  bool operator==(const ProductState&) const = default;
};

struct RewardParams {
  double r_p = 1.0;
  double r_n = -1.0;
  double gamma = 0.99;

  /// r_n = 0 is accepted so that the effect of the negative reward can be
  /// measured; positive r_n is not.
  void validate() const {
    if (!(r_p > 0)) throw ValidationError("r_p must be positive");
    if (!(r_n <= 0)) throw ValidationError("r_n must not be positive");
    if (!(gamma >= 0 && gamma <= 1)) throw ValidationError("gamma must lie in [0,1]");
  }
};

struct StepResult {
  ProductState next;
  double reward = 0;
  AcceptingFamily frontier = 0;
  bool frontier_reset = false;
  bool done = false;
};

enum class Outcome { Success, Trapped, Timeout };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Success: return "success";
    case Outcome::Trapped: return "trapped";
    case Outcome::Timeout: return "timeout";
  }
  return "?";
}

struct TraceRow {
  std::size_t t = 0;
  ProductState ps;
  double reward = 0;
  std::size_t frontier_size = 0;
};

struct Episode {
  std::vector<TraceRow> trace;
  double total_reward = 0;
  std::size_t steps = 0;
  std::size_t frontier_resets = 0;
  Outcome outcome = Outcome::Timeout;
};

inline std::size_t popcount(AcceptingFamily f) { return static_cast<std::size_t>(std::popcount(f)); }

/// World and automaton run in lockstep. Only the pair (s, q) and the frontier
/// are tracked; nothing of size |S×Q| is ever built.
class Product {
 public:
  Product(LabeledWorld world, Ldba ldba) : world_(std::move(world)), ldba_(std::move(ldba)) {
    const auto& from = world_.alphabet();
    bits_.resize(from.size(), 0);
    for (std::size_t i = 0; i < from.size(); ++i)
      if (auto j = ldba_.alphabet().index_of(from.name(i))) bits_[i] = LabelSet{1} << *j;
  }

  const LabeledWorld& world() const { return world_; }
  const Ldba& ldba() const { return ldba_; }

  /// Label of `s` in the automaton's bit layout. World propositions the
  /// automaton does not mention are dropped.
  LabelSet label(const WorldState& s) const {
    const LabelSet l = world_.label(s);
    LabelSet out = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (l & (LabelSet{1} << i)) out |= bits_[i];
    return out;
  }

  ProductState initial(Rng& rng) const { return {world_.reset(rng), ldba_.initial()}; }
  AcceptingFamily initial_frontier() const { return ldba_.full_family(); }

  /// Successor for a world move that has already been realised.
  StepResult advance(const ProductState& ps, const WorldState& s_next, AcceptingFamily frontier,
                     const RewardParams& params) const {
    StepResult r;
    r.next = {s_next, ldba_.step(ps.q, label(s_next))};
    const AcceptingFamily member = ldba_.membership(r.next.q);
    if (member & frontier) {
      r.reward = params.r_p;
    } else if (ldba_.in_sink(r.next.q)) {
      r.reward = params.r_n;
    }
    r.frontier = accepting_frontier(member, frontier, ldba_.full_family());
    r.frontier_reset = (member & frontier) && !(frontier & ~member);
    r.done = ldba_.in_sink(r.next.q);
    return r;
  }

  StepResult step(const ProductState& ps, AcceptingFamily frontier, double angle, const RewardParams& params,
                  Rng& rng) const {
    return advance(ps, world_.step(ps.s, angle, rng), frontier, params);
  }

  /// Success: not trapped, and either a full round of accepting sets was
  /// completed or the run rests in an accepting state that keeps itself
  /// under the current label.
  Outcome classify(const ProductState& last, std::size_t resets) const {
    if (ldba_.in_sink(last.q)) return Outcome::Trapped;
    if (resets > 0) return Outcome::Success;
    if (ldba_.is_accepting(last.q) && ldba_.step(last.q, label(last.s)) == last.q) return Outcome::Success;
    return Outcome::Timeout;
  }

  using Policy = std::function<double(const ProductState&)>;

  Episode run_episode(const Policy& policy, const RewardParams& params, std::size_t max_steps, Rng& rng,
                      std::optional<WorldState> start = std::nullopt) const {
    Episode ep;
    ProductState ps = start ? ProductState{*start, ldba_.initial()} : initial(rng);
    AcceptingFamily frontier = initial_frontier();
    ep.trace.push_back({0, ps, 0.0, popcount(frontier)});
    for (std::size_t t = 1; t <= max_steps; ++t) {
      auto r = step(ps, frontier, policy(ps), params, rng);
      ps = r.next;
      frontier = r.frontier;
      ep.total_reward += r.reward;
      ep.frontier_resets += r.frontier_reset ? 1 : 0;
      ep.steps = t;
      ep.trace.push_back({t, ps, r.reward, popcount(frontier)});
      if (r.done) break;
    }
    ep.outcome = classify(ps, ep.frontier_resets);
    return ep;
  }

 private:
  LabeledWorld world_;
  Ldba ldba_;
  std::vector<LabelSet> bits_;
};

// ---------------------------------------------------------------------------
// Trace CSV

inline std::string trace_csv(const Episode& ep, const Ldba& ldba) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "t,x,y,q,reward,frontier_size\n";
  for (const auto& row : ep.trace)
    out << row.t << ',' << row.ps.s.x << ',' << row.ps.s.y << ',' << ldba.state_name(row.ps.q) << ','
        << row.reward << ',' << row.frontier_size << '\n';
  return out.str();
}

struct TracePoint {
  double x = 0, y = 0;
  std::string q;
};

inline std::vector<TracePoint> parse_trace_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<TracePoint> out;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> cols;
    std::istringstream row(line);
    std::string c;
    while (std::getline(row, c, ',')) cols.emplace_back(detail::trim(c));
    if (lineno == 1) {
      if (cols.size() < 4 || cols[0] != "t" || cols[1] != "x" || cols[2] != "y" || cols[3] != "q")
        throw ParseError("trace header must start with t,x,y,q", 1);
      continue;
    }
    if (cols.size() != 6) throw ParseError("line " + std::to_string(lineno) + ": expected 6 columns", lineno);
    try {
      out.push_back({std::stod(cols[1]), std::stod(cols[2]), cols[3]});
    } catch (const std::logic_error&) {
      throw ParseError("line " + std::to_string(lineno) + ": bad coordinate", lineno);
    }
  }
  return out;
}

}  // namespace ltlrl
