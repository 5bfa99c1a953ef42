#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ltlrl/error.hpp"
#include "ltlrl/labels.hpp"

namespace ltlrl {

using Rng = std::mt19937_64;

struct WorldState {
  double x = 0;
  double y = 0;
  bool operator==(const WorldState&) const = default;
};

struct StartSpec {
  enum class Kind { Point, Region };
  Kind kind = Kind::Point;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  static StartSpec point(double x, double y) { return {Kind::Point, x, y, x, y}; }
  static StartSpec region(double x0, double y0, double x1, double y1) { return {Kind::Region, x0, y0, x1, y1}; }
};

/// Continuous rectangle [0,width]×[0,height] labelled by a grid of half-open
/// cells. Moves travel a random distance in (0, max_step] and are clamped to
/// the rectangle.
class LabeledWorld {
 public:
  /// `cells` is row-major with row 0 at the bottom (y = 0).
  LabeledWorld(double width, double height, std::size_t nx, std::size_t ny, std::vector<LabelSet> cells,
               double max_step, StartSpec start, Alphabet alphabet, LabelSet unsafe)
      : width_(width),
        height_(height),
        nx_(nx),
        ny_(ny),
        cells_(std::move(cells)),
        max_step_(max_step),
        start_(start),
        alphabet_(std::move(alphabet)),
        unsafe_(unsafe) {
    validate();
  }

  double width() const { return width_; }
  double height() const { return height_; }
  std::size_t cells_x() const { return nx_; }
  std::size_t cells_y() const { return ny_; }
  double cell_width() const { return width_ / static_cast<double>(nx_); }
  double cell_height() const { return height_ / static_cast<double>(ny_); }
  double max_step() const { return max_step_; }
  const StartSpec& start() const { return start_; }
  const Alphabet& alphabet() const { return alphabet_; }
  LabelSet unsafe_mask() const { return unsafe_; }

  LabelSet cell(std::size_t ix, std::size_t iy) const { return cells_.at(iy * nx_ + ix); }

  bool in_bounds(const WorldState& s) const { return s.x >= 0 && s.x <= width_ && s.y >= 0 && s.y <= height_; }

  std::size_t cell_x(double x) const {
    auto i = static_cast<std::size_t>(std::floor(x * static_cast<double>(nx_) / width_));
    return std::min(i, nx_ - 1);
  }
  std::size_t cell_y(double y) const {
    auto i = static_cast<std::size_t>(std::floor(y * static_cast<double>(ny_) / height_));
    return std::min(i, ny_ - 1);
  }

  /// L(s). A point on a shared cell edge belongs to the higher-index cell.
  LabelSet label(const WorldState& s) const {
    if (!in_bounds(s)) throw std::out_of_range("state outside the world rectangle");
    return cell(cell_x(s.x), cell_y(s.y));
  }

  bool is_unsafe(const WorldState& s) const { return (label(s) & unsafe_) != 0; }

  /// Deterministic part of a move: travel `distance` along `angle`, then clamp
  /// each coordinate to the rectangle.
  WorldState move(const WorldState& s, double angle, double distance) const {
    return {std::clamp(s.x + distance * std::cos(angle), 0.0, width_),
            std::clamp(s.y + distance * std::sin(angle), 0.0, height_)};
  }

  /// Step length uniform on (0, D], drawn as D·(1 − u) with u uniform on [0,1).
  double draw_step_length(Rng& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return max_step_ * (1.0 - unit(rng));
  }

  WorldState step(const WorldState& s, double angle, Rng& rng) const { return move(s, angle, draw_step_length(rng)); }

  /// Initial state: the fixed point, or a uniform draw from the start region
  /// that avoids unsafe cells.
  WorldState reset(Rng& rng) const {
    if (start_.kind == StartSpec::Kind::Point) return {start_.x0, start_.y0};
    std::uniform_real_distribution<double> ux(start_.x0, start_.x1), uy(start_.y0, start_.y1);
    for (int tries = 0; tries < 1000; ++tries) {
      WorldState s{ux(rng), uy(rng)};
      if (!is_unsafe(s)) return s;
    }
    throw ValidationError("no safe start found in 1000 draws from the start region");
  }

  /// Centres of all cells without unsafe labels.
  std::vector<WorldState> safe_cell_centres() const {
    std::vector<WorldState> out;
    for (std::size_t iy = 0; iy < ny_; ++iy)
      for (std::size_t ix = 0; ix < nx_; ++ix)
        if (!(cell(ix, iy) & unsafe_))
          out.push_back({(static_cast<double>(ix) + 0.5) * cell_width(), (static_cast<double>(iy) + 0.5) * cell_height()});
    return out;
  }

 private:
  void validate() const {
    if (!(width_ > 0) || !(height_ > 0)) throw ValidationError("world size must be positive");
    if (nx_ == 0 || ny_ == 0) throw ValidationError("world needs at least one cell");
    if (cells_.size() != nx_ * ny_) throw ValidationError("cell count does not match grid size");
    if (!(max_step_ > 0)) throw ValidationError("max step D must be positive");
    const LabelSet mask = static_cast<LabelSet>(alphabet_.letter_count() - 1);
    for (auto c : cells_)
      if (c & ~mask) throw ValidationError("cell label outside alphabet");
    if (unsafe_ & ~mask) throw ValidationError("unsafe propositions outside alphabet");
    if (start_.kind == StartSpec::Kind::Point) {
      WorldState s{start_.x0, start_.y0};
      if (!in_bounds(s)) throw ValidationError("start point outside the world");
      if (is_unsafe(s)) throw ValidationError("start point lies in an unsafe cell");
    } else {
      if (!(start_.x0 <= start_.x1) || !(start_.y0 <= start_.y1) || !in_bounds({start_.x0, start_.y0}) ||
          !in_bounds({start_.x1, start_.y1}))
        throw ValidationError("start region must lie inside the world");
      bool any_safe = false;
      // Only cells with positive overlap area can be sampled.
      auto last = [](double hi, std::size_t n, double extent, std::size_t first) {
        auto c = static_cast<std::size_t>(std::ceil(hi * static_cast<double>(n) / extent));
        return std::max(first, std::min(n, c) - (c > 0 ? 1 : 0));
      };
      const auto ix0 = cell_x(start_.x0), ix1 = last(start_.x1, nx_, width_, ix0);
      const auto iy0 = cell_y(start_.y0), iy1 = last(start_.y1, ny_, height_, iy0);
      for (auto iy = iy0; iy <= iy1 && !any_safe; ++iy)
        for (auto ix = ix0; ix <= ix1 && !any_safe; ++ix) any_safe = !(cell(ix, iy) & unsafe_);
      if (!any_safe) throw ValidationError("start region is entirely unsafe");
    }
  }

  double width_, height_;
  std::size_t nx_, ny_;
  std::vector<LabelSet> cells_;
  double max_step_;
  StartSpec start_;
  Alphabet alphabet_;
  LabelSet unsafe_;
};

// ---------------------------------------------------------------------------
// World file
//
//   size: 20 20
//   cells: 4 2
//   D: 2
//   start: region 0 0 20 20        | start: point 2 2
//   alphabet: t1 t2 u              (optional, default: labels in the grid)
//   unsafe: u                      (optional, default: u when present)
//   .  .  t1 .
//   u  .  .  t2,x
//
// The first grid row is the top of the world (largest y).

inline LabeledWorld load_world(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  double width = 0, height = 0, d = 0;
  std::size_t nx = 0, ny = 0;
  bool have_size = false, have_cells = false, have_d = false, have_start = false;
  StartSpec start;
  std::optional<std::vector<std::string>> declared_alphabet, unsafe_names;
  std::vector<std::vector<std::string>> rows;

  auto fail = [&](const std::string& msg) -> ParseError {
    return ParseError("line " + std::to_string(lineno) + ": " + msg, lineno);
  };
  auto numbers = [&](std::string_view v, std::size_t count) {
    auto toks = detail::split_ws(v);
    if (toks.size() != count) throw fail("expected " + std::to_string(count) + " numbers");
    std::vector<double> out;
    for (const auto& t : toks) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(t, &used));
        if (used != t.size()) throw fail("bad number '" + t + "'");
      } catch (const std::logic_error&) {
        throw fail("bad number '" + t + "'");
      }
    }
    return out;
  };

  while (std::getline(in, line)) {
    ++lineno;
    auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto colon = body.find(':');
    if (colon != std::string_view::npos && rows.empty()) {
      auto key = detail::trim(body.substr(0, colon));
      auto value = detail::trim(body.substr(colon + 1));
      if (key == "size") {
        auto v = numbers(value, 2);
        width = v[0];
        height = v[1];
        have_size = true;
      } else if (key == "cells") {
        auto v = numbers(value, 2);
        if (v[0] < 1 || v[1] < 1 || v[0] != std::floor(v[0]) || v[1] != std::floor(v[1]))
          throw fail("cell counts must be positive integers");
        nx = static_cast<std::size_t>(v[0]);
        ny = static_cast<std::size_t>(v[1]);
        have_cells = true;
      } else if (key == "D") {
        d = numbers(value, 1)[0];
        have_d = true;
      } else if (key == "start") {
        auto toks = detail::split_ws(value);
        if (toks.empty()) throw fail("empty start");
        std::string rest(value.substr(toks[0].size()));
        if (toks[0] == "point") {
          auto v = numbers(rest, 2);
          start = StartSpec::point(v[0], v[1]);
        } else if (toks[0] == "region") {
          auto v = numbers(rest, 4);
          start = StartSpec::region(v[0], v[1], v[2], v[3]);
        } else {
          throw fail("start must be 'point X Y' or 'region X0 Y0 X1 Y1'");
        }
        have_start = true;
      } else if (key == "alphabet") {
        declared_alphabet = detail::split_ws(value);
      } else if (key == "unsafe") {
        unsafe_names = detail::split_ws(value);
      } else {
        throw fail("unknown key '" + std::string(key) + "'");
      }
      continue;
    }
    rows.push_back(detail::split_ws(body));
    if (rows.back().size() != nx) throw fail("expected " + std::to_string(nx) + " cells in row");
  }
  if (!have_size || !have_cells || !have_d || !have_start)
    throw ParseError("world file needs size, cells, D and start headers", lineno);
  if (rows.size() != ny) throw ParseError("expected " + std::to_string(ny) + " grid rows", lineno);

  Alphabet alphabet;
  if (declared_alphabet)
    for (const auto& n : *declared_alphabet) alphabet.add(n);
  std::vector<LabelSet> cells(nx * ny, 0);
  for (std::size_t r = 0; r < ny; ++r) {
    const std::size_t iy = ny - 1 - r;
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const auto& tok = rows[r][ix];
      if (tok == ".") continue;
      LabelSet l = 0;
      std::string name;
      std::istringstream parts(tok);
      while (std::getline(parts, name, ',')) {
        if (name.empty()) continue;
        if (!alphabet.contains(name)) {
          if (declared_alphabet) throw ValidationError("cell label '" + name + "' is not in the declared alphabet");
          alphabet.add(name);
        }
        l |= alphabet.bit(name);
      }
      cells[iy * nx + ix] = l;
    }
  }
  LabelSet unsafe = 0;
  if (unsafe_names) {
    for (const auto& n : *unsafe_names) {
      alphabet.add(n);
      unsafe |= alphabet.bit(n);
    }
  } else if (alphabet.contains("u")) {
    unsafe = alphabet.bit("u");
  }
  return LabeledWorld(width, height, nx, ny, std::move(cells), d, start, std::move(alphabet), unsafe);
}

}  // namespace ltlrl
