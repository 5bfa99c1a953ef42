#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ltlrl/error.hpp"
#include "ltlrl/labels.hpp"

namespace ltlrl::ltl {

/// Core connectives. Derived operators (|, ->, F, G) are rewritten into these
/// at construction time and never appear in a tree.
enum class Kind : std::uint8_t { True, Atom, Not, And, Next, Until };

/// Immutable LTL formula. Copies share structure.
class Formula {
 public:
  static Formula truth() { return Formula(std::make_shared<Node>(Node{Kind::True, {}, nullptr, nullptr})); }
  static Formula atom(std::string name) {
    return Formula(std::make_shared<Node>(Node{Kind::Atom, std::move(name), nullptr, nullptr}));
  }
  static Formula negation(Formula f) { return unary(Kind::Not, std::move(f)); }
  static Formula next(Formula f) { return unary(Kind::Next, std::move(f)); }
  static Formula conjunction(Formula l, Formula r) { return binary(Kind::And, std::move(l), std::move(r)); }
  static Formula until(Formula l, Formula r) { return binary(Kind::Until, std::move(l), std::move(r)); }

  // Derived forms.
  static Formula disjunction(Formula l, Formula r) {
    return negation(conjunction(negation(std::move(l)), negation(std::move(r))));
  }
  static Formula implication(Formula l, Formula r) { return disjunction(negation(std::move(l)), std::move(r)); }
  static Formula eventually(Formula f) { return until(truth(), std::move(f)); }
  static Formula always(Formula f) { return negation(eventually(negation(std::move(f)))); }

  Kind kind() const { return node_->kind; }
  const std::string& name() const { return node_->name; }
  Formula left() const { return Formula(node_->left); }
  Formula right() const { return Formula(node_->right); }
  /// Operand of Not / Next.
  Formula child() const { return Formula(node_->left); }

  bool is(Kind k) const { return node_->kind == k; }

  /// Structural equality.
  friend bool operator==(const Formula& a, const Formula& b) { return equal(a.node_.get(), b.node_.get()); }

  /// Atom names in order of first occurrence.
  std::vector<std::string> atoms() const {
    std::vector<std::string> out;
    collect_atoms(node_.get(), out);
    return out;
  }

  /// True when no temporal operator occurs.
  bool is_propositional() const { return propositional(node_.get()); }

  std::size_t size() const { return count(node_.get()); }

 private:
  struct Node {
    Kind kind;
    std::string name;
    std::shared_ptr<const Node> left;
    std::shared_ptr<const Node> right;
  };
  using NodePtr = std::shared_ptr<const Node>;

  explicit Formula(NodePtr n) : node_(std::move(n)) {}

  static Formula unary(Kind k, Formula f) {
    return Formula(std::make_shared<Node>(Node{k, {}, std::move(f.node_), nullptr}));
  }
  static Formula binary(Kind k, Formula l, Formula r) {
    return Formula(std::make_shared<Node>(Node{k, {}, std::move(l.node_), std::move(r.node_)}));
  }

  static bool equal(const Node* a, const Node* b) {
    if (a == b) return true;
    if (!a || !b || a->kind != b->kind) return false;
    switch (a->kind) {
      case Kind::True: return true;
      case Kind::Atom: return a->name == b->name;
      case Kind::Not:
      case Kind::Next: return equal(a->left.get(), b->left.get());
      default: return equal(a->left.get(), b->left.get()) && equal(a->right.get(), b->right.get());
    }
  }

  static void collect_atoms(const Node* n, std::vector<std::string>& out) {
    if (!n) return;
    if (n->kind == Kind::Atom) {
      if (std::find(out.begin(), out.end(), n->name) == out.end()) out.push_back(n->name);
      return;
    }
    collect_atoms(n->left.get(), out);
    collect_atoms(n->right.get(), out);
  }

  static bool propositional(const Node* n) {
    if (!n) return true;
    if (n->kind == Kind::Next || n->kind == Kind::Until) return false;
    return propositional(n->left.get()) && propositional(n->right.get());
  }

  static std::size_t count(const Node* n) { return n ? 1 + count(n->left.get()) + count(n->right.get()) : 0; }

  NodePtr node_;
};

// ---------------------------------------------------------------------------
// Printing

namespace detail {

// Sugar is recognised structurally so that printed text parses back to the
// identical core tree.
inline std::optional<std::pair<Formula, Formula>> as_or(const Formula& f) {
  if (!f.is(Kind::Not) || !f.child().is(Kind::And)) return std::nullopt;
  auto conj = f.child();
  if (!conj.left().is(Kind::Not) || !conj.right().is(Kind::Not)) return std::nullopt;
  return std::make_pair(conj.left().child(), conj.right().child());
}

inline std::optional<Formula> as_eventually(const Formula& f) {
  if (f.is(Kind::Until) && f.left().is(Kind::True)) return f.right();
  return std::nullopt;
}

inline std::optional<Formula> as_always(const Formula& f) {
  if (!f.is(Kind::Not)) return std::nullopt;
  auto ev = as_eventually(f.child());
  if (!ev || !ev->is(Kind::Not)) return std::nullopt;
  return ev->child();
}

inline void print(std::string& out, const Formula& f) {
  if (auto g = as_always(f)) {
    out += "G ";
    print(out, *g);
    return;
  }
  if (auto o = as_or(f)) {
    out += '(';
    print(out, o->first);
    out += " | ";
    print(out, o->second);
    out += ')';
    return;
  }
  if (auto e = as_eventually(f)) {
    out += "F ";
    print(out, *e);
    return;
  }
  switch (f.kind()) {
    case Kind::True: out += "true"; return;
    case Kind::Atom: out += f.name(); return;
    case Kind::Not: out += '!'; print(out, f.child()); return;
    case Kind::Next: out += "X "; print(out, f.child()); return;
    case Kind::And:
      out += '(';
      print(out, f.left());
      out += " & ";
      print(out, f.right());
      out += ')';
      return;
    case Kind::Until:
      out += '(';
      print(out, f.left());
      out += " U ";
      print(out, f.right());
      out += ')';
      return;
  }
}

}  // namespace detail

inline std::string to_string(const Formula& f) {
  std::string out;
  detail::print(out, f);
  return out;
}

inline std::ostream& operator<<(std::ostream& os, const Formula& f) { return os << to_string(f); }

// ---------------------------------------------------------------------------
// Parsing
//
//   impl   := or ('->' impl)?
//   or     := and ('|' and)*
//   and    := until ('&' until)*
//   until  := unary ('U' until)?
//   unary  := ('!' | 'X' | 'F' | 'G') unary | primary
//   primary:= 'true' | identifier | '(' impl ')'

class Parser {
 public:
  /// `alphabet == nullptr` accepts any identifier as an atom.
  Parser(std::string_view text, const Alphabet* alphabet) : text_(text), alphabet_(alphabet) { advance(); }

  Formula parse() {
    auto f = implication();
    if (tok_.type != Tok::End) fail("unexpected '" + std::string(tok_.text) + "'");
    return f;
  }

 private:
  enum class Tok { End, Ident, True, Not, And, Or, Implies, Next, Until, Eventually, Always, LParen, RParen };
  struct Token {
    Tok type;
    std::string_view text;
    std::size_t pos;
  };

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("syntax error at position " + std::to_string(tok_.pos) + ": " + msg, tok_.pos);
  }

  void advance() {
    while (pos_ < text_.size() && std::string_view(" \t\r\n").find(text_[pos_]) != std::string_view::npos) ++pos_;
    const std::size_t start = pos_;
    if (pos_ >= text_.size()) {
      tok_ = {Tok::End, "end of input", start};
      return;
    }
    const char c = text_[pos_];
    auto single = [&](Tok t) {
      ++pos_;
      tok_ = {t, text_.substr(start, 1), start};
    };
    switch (c) {
      case '!': return single(Tok::Not);
      case '&': return single(Tok::And);
      case '|': return single(Tok::Or);
      case '(': return single(Tok::LParen);
      case ')': return single(Tok::RParen);
      case '-':
        if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '>') {
          pos_ += 2;
          tok_ = {Tok::Implies, text_.substr(start, 2), start};
          return;
        }
        break;
      default: break;
    }
    if (ltlrl::detail::is_ident_start(c)) {
      while (pos_ < text_.size() && ltlrl::detail::is_ident_char(text_[pos_])) ++pos_;
      auto word = text_.substr(start, pos_ - start);
      Tok t = Tok::Ident;
      if (word == "true") t = Tok::True;
      else if (word == "X") t = Tok::Next;
      else if (word == "U") t = Tok::Until;
      else if (word == "F") t = Tok::Eventually;
      else if (word == "G") t = Tok::Always;
      tok_ = {t, word, start};
      return;
    }
    tok_ = {Tok::End, text_.substr(start, 1), start};
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  Formula implication() {
    auto lhs = disjunction();
    if (tok_.type == Tok::Implies) {
      advance();
      return Formula::implication(std::move(lhs), implication());
    }
    return lhs;
  }

  Formula disjunction() {
    auto lhs = conjunction();
    while (tok_.type == Tok::Or) {
      advance();
      lhs = Formula::disjunction(std::move(lhs), conjunction());
    }
    return lhs;
  }

  Formula conjunction() {
    auto lhs = until();
    while (tok_.type == Tok::And) {
      advance();
      lhs = Formula::conjunction(std::move(lhs), until());
    }
    return lhs;
  }

  Formula until() {
    auto lhs = unary();
    if (tok_.type == Tok::Until) {
      advance();
      return Formula::until(std::move(lhs), until());
    }
    return lhs;
  }

  Formula unary() {
    switch (tok_.type) {
      case Tok::Not: advance(); return Formula::negation(unary());
      case Tok::Next: advance(); return Formula::next(unary());
      case Tok::Eventually: advance(); return Formula::eventually(unary());
      case Tok::Always: advance(); return Formula::always(unary());
      default: return primary();
    }
  }

  Formula primary() {
    switch (tok_.type) {
      case Tok::True: advance(); return Formula::truth();
      case Tok::Ident: {
        std::string name(tok_.text);
        if (alphabet_ && !alphabet_->contains(name)) {
          throw ValidationError("unknown atom '" + name + "' at position " + std::to_string(tok_.pos));
        }
        advance();
        return Formula::atom(std::move(name));
      }
      case Tok::LParen: {
        advance();
        auto f = implication();
        if (tok_.type != Tok::RParen) fail("expected ')'");
        advance();
        return f;
      }
      default: fail("expected formula, found '" + std::string(tok_.text) + "'");
    }
  }

  std::string_view text_;
  const Alphabet* alphabet_;
  std::size_t pos_ = 0;
  Token tok_{Tok::End, {}, 0};
};

/// Parses `text`, rejecting atoms outside `alphabet`.
inline Formula parse(std::string_view text, const Alphabet& alphabet) { return Parser(text, &alphabet).parse(); }

/// Parses `text`, accepting any identifier as an atom.
inline Formula parse(std::string_view text) { return Parser(text, nullptr).parse(); }

// ---------------------------------------------------------------------------
// Lasso words

/// The infinite word prefix · loop^ω over an explicit alphabet.
struct LassoWord {
  Alphabet alphabet;
  std::vector<LabelSet> prefix;
  std::vector<LabelSet> loop;

  std::size_t length() const { return prefix.size() + loop.size(); }

  /// Symbol at absolute position i of the infinite word.
  LabelSet at(std::size_t i) const {
    if (i < prefix.size()) return prefix[i];
    return loop[(i - prefix.size()) % loop.size()];
  }

  void validate() const {
    if (loop.empty()) throw ValidationError("lasso loop must be non-empty");
    const LabelSet mask = static_cast<LabelSet>(alphabet.letter_count() - 1);
    for (auto l : prefix)
      if (l & ~mask) throw ValidationError("lasso symbol outside alphabet");
    for (auto l : loop)
      if (l & ~mask) throw ValidationError("lasso symbol outside alphabet");
  }

  std::string to_string() const {
    std::string out = "prefix: ";
    for (auto l : prefix) out += alphabet.format(l);
    out += " loop: ";
    for (auto l : loop) out += alphabet.format(l);
    return out;
  }
};

namespace detail {

inline std::vector<LabelSet> parse_symbols(std::string_view s, Alphabet& alphabet, bool grow, std::size_t offset) {
  std::vector<LabelSet> out;
  std::size_t i = 0;
  auto skip = [&] {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  };
  skip();
  while (i < s.size()) {
    if (s[i] != '{') throw ParseError("expected '{' at position " + std::to_string(offset + i), offset + i);
    auto close = s.find('}', i);
    if (close == std::string_view::npos)
      throw ParseError("unterminated '{' at position " + std::to_string(offset + i), offset + i);
    LabelSet label = 0;
    std::string body(s.substr(i + 1, close - i - 1));
    std::size_t p = 0;
    while (p <= body.size()) {
      auto comma = body.find(',', p);
      if (comma == std::string::npos) comma = body.size();
      auto name = ltlrl::detail::trim(std::string_view(body).substr(p, comma - p));
      if (!name.empty()) {
        std::string n(name);
        if (!alphabet.contains(n)) {
          if (!grow) throw ValidationError("unknown proposition '" + n + "' in lasso word");
          alphabet.add(n);
        }
        label |= alphabet.bit(n);
      }
      p = comma + 1;
    }
    out.push_back(label);
    i = close + 1;
    skip();
  }
  return out;
}

}  // namespace detail

/// Parses `prefix: {a}{a,b}{} loop: {c}`. Propositions not yet in `alphabet`
/// are appended when `grow` is set, otherwise rejected.
inline LassoWord parse_lasso(std::string_view text, Alphabet alphabet, bool grow = true) {
  auto p = text.find("prefix:");
  auto l = text.find("loop:");
  if (p == std::string_view::npos || l == std::string_view::npos || l < p)
    throw ParseError("lasso word must have the form 'prefix: {..}.. loop: {..}..'", 0);
  LassoWord w;
  w.prefix = detail::parse_symbols(text.substr(p + 7, l - p - 7), alphabet, grow, p + 7);
  w.loop = detail::parse_symbols(text.substr(l + 5), alphabet, grow, l + 5);
  w.alphabet = std::move(alphabet);
  w.validate();
  return w;
}

// ---------------------------------------------------------------------------
// Satisfaction on lasso words
//
// Every subformula is evaluated on the |prefix|+|loop| distinct suffixes of
// the word. Position n-1 wraps to the first loop position. Until is the least
// fixed point of  r = right | (left & X r), reached by iterating from the
// all-false set.

class LassoEvaluator {
 public:
  LassoEvaluator(const Formula& f, const Alphabet& alphabet) { compile(f, alphabet); }

  bool operator()(const LassoWord& w) const {
    const std::size_t n = w.length();
    if (w.loop.empty()) throw ValidationError("lasso loop must be non-empty");
    if (n <= 64) return eval_packed(w);
    return eval_wide(w);
  }

 private:
  struct Op {
    Kind kind;
    LabelSet bit;
    std::uint32_t a;
    std::uint32_t b;
  };

  std::uint32_t compile(const Formula& f, const Alphabet& alphabet) {
    Op op{f.kind(), 0, 0, 0};
    switch (f.kind()) {
      case Kind::True: break;
      case Kind::Atom:
        if (!alphabet.contains(f.name()))
          throw ValidationError("formula atom '" + f.name() + "' is not in the word alphabet");
        op.bit = alphabet.bit(f.name());
        break;
      case Kind::Not:
      case Kind::Next: op.a = compile(f.child(), alphabet); break;
      case Kind::And:
      case Kind::Until:
        op.a = compile(f.left(), alphabet);
        op.b = compile(f.right(), alphabet);
        break;
    }
    ops_.push_back(op);
    return static_cast<std::uint32_t>(ops_.size() - 1);
  }

  bool eval_packed(const LassoWord& w) const {
    const std::size_t n = w.length();
    const std::size_t loop_start = w.prefix.size();
    const std::uint64_t full = n == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
    auto next = [&](std::uint64_t m) {
      return ((m >> 1) | (((m >> loop_start) & 1u) << (n - 1))) & full;
    };
    std::vector<std::uint64_t> val(ops_.size());
    for (std::size_t k = 0; k < ops_.size(); ++k) {
      const Op& op = ops_[k];
      std::uint64_t r = 0;
      switch (op.kind) {
        case Kind::True: r = full; break;
        case Kind::Atom:
          for (std::size_t i = 0; i < n; ++i)
            if (w.at(i) & op.bit) r |= std::uint64_t{1} << i;
          break;
        case Kind::Not: r = ~val[op.a] & full; break;
        case Kind::And: r = val[op.a] & val[op.b]; break;
        case Kind::Next: r = next(val[op.a]); break;
        case Kind::Until: {
          const auto lhs = val[op.a];
          const auto rhs = val[op.b];
          r = rhs;
          for (;;) {
            auto nr = rhs | (lhs & next(r));
            if (nr == r) break;
            r = nr;
          }
          break;
        }
      }
      val[k] = r;
    }
    return val.back() & 1u;
  }

  bool eval_wide(const LassoWord& w) const {
    const std::size_t n = w.length();
    const std::size_t loop_start = w.prefix.size();
    auto succ = [&](std::size_t i) { return i + 1 < n ? i + 1 : loop_start; };
    std::vector<std::vector<char>> val(ops_.size(), std::vector<char>(n, 0));
    for (std::size_t k = 0; k < ops_.size(); ++k) {
      const Op& op = ops_[k];
      auto& r = val[k];
      switch (op.kind) {
        case Kind::True: std::fill(r.begin(), r.end(), 1); break;
        case Kind::Atom:
          for (std::size_t i = 0; i < n; ++i) r[i] = (w.at(i) & op.bit) != 0;
          break;
        case Kind::Not:
          for (std::size_t i = 0; i < n; ++i) r[i] = !val[op.a][i];
          break;
        case Kind::And:
          for (std::size_t i = 0; i < n; ++i) r[i] = val[op.a][i] && val[op.b][i];
          break;
        case Kind::Next:
          for (std::size_t i = 0; i < n; ++i) r[i] = val[op.a][succ(i)];
          break;
        case Kind::Until: {
          const auto& lhs = val[op.a];
          const auto& rhs = val[op.b];
          r = rhs;
          for (bool changed = true; changed;) {
            changed = false;
            for (std::size_t i = n; i-- > 0;) {
              const char v = rhs[i] || (lhs[i] && r[succ(i)]);
              if (v != r[i]) {
                r[i] = v;
                changed = true;
              }
            }
          }
          break;
        }
      }
    }
    return val.back()[0];
  }

  std::vector<Op> ops_;
};

/// Whether prefix · loop^ω satisfies `f`.
inline bool eval_lasso(const Formula& f, const LassoWord& w) { return LassoEvaluator(f, w.alphabet)(w); }

}  // namespace ltlrl::ltl
