#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ltlrl/error.hpp"
#include "ltlrl/labels.hpp"

namespace ltlrl::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Output { Linear, Tanh };

inline const char* to_string(Output o) { return o == Output::Tanh ? "tanh" : "linear"; }

/// Activations of one batched forward pass. Columns are samples.
struct Cache {
  std::vector<Matrix> z;  // pre-activations per layer
  std::vector<Matrix> a;  // a[0] is the input, a[k+1] the output of layer k
  std::uint64_t version = 0;
  const void* owner = nullptr;

  const Matrix& output() const { return a.back(); }
};

struct Gradients {
  std::vector<Matrix> w;
  std::vector<Vector> b;
  Matrix input;
};

/// Dense network: affine layers with ReLU between them and a linear or tanh
/// output.
class Mlp {
 public:
  Mlp() = default;

  Mlp(std::vector<std::size_t> sizes, Output output) : sizes_(std::move(sizes)), output_(output) {
    if (sizes_.size() < 2) throw ValidationError("network needs at least an input and an output layer");
    for (auto s : sizes_)
      if (s == 0) throw ValidationError("layer sizes must be positive");
    for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
      w_.push_back(Matrix::Zero(static_cast<Eigen::Index>(sizes_[k + 1]), static_cast<Eigen::Index>(sizes_[k])));
      b_.push_back(Vector::Zero(static_cast<Eigen::Index>(sizes_[k + 1])));
    }
  }

  /// Uniform ±1/√fan_in initialisation; the last layer is further scaled by
  /// `last_layer_scale`.
  template <class Gen>
  static Mlp random(std::vector<std::size_t> sizes, Output output, Gen& rng, double last_layer_scale = 1.0) {
    Mlp net(std::move(sizes), output);
    for (std::size_t k = 0; k < net.w_.size(); ++k) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(net.sizes_[k]));
      const double scale = k + 1 == net.w_.size() ? last_layer_scale : 1.0;
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index c = 0; c < net.w_[k].cols(); ++c)
        for (Eigen::Index r = 0; r < net.w_[k].rows(); ++r) net.w_[k](r, c) = u(rng) * scale;
      for (Eigen::Index r = 0; r < net.b_[k].size(); ++r) net.b_[k](r) = u(rng) * scale;
    }
    return net;
  }

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  Output output_kind() const { return output_; }
  std::size_t layers() const { return w_.size(); }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }

  const Matrix& weight(std::size_t k) const { return w_.at(k); }
  const Vector& bias(std::size_t k) const { return b_.at(k); }
  Matrix& weight(std::size_t k) {
    ++version_;
    return w_.at(k);
  }
  Vector& bias(std::size_t k) {
    ++version_;
    return b_.at(k);
  }
  std::uint64_t version() const { return version_; }
  void touch() { ++version_; }

  bool same_shape(const Mlp& o) const { return sizes_ == o.sizes_ && output_ == o.output_; }

  Matrix forward(const Matrix& x, Cache& cache) const {
    if (static_cast<std::size_t>(x.rows()) != input_size())
      throw ValidationError("input has " + std::to_string(x.rows()) + " rows, network expects " +
                            std::to_string(input_size()));
    cache.z.resize(w_.size());
    cache.a.resize(w_.size() + 1);
    cache.a[0] = x;
    for (std::size_t k = 0; k < w_.size(); ++k) {
      cache.z[k].noalias() = w_[k] * cache.a[k];
      cache.z[k].colwise() += b_[k];
      if (k + 1 < w_.size()) {
        cache.a[k + 1] = cache.z[k].cwiseMax(0.0);
      } else if (output_ == Output::Tanh) {
        cache.a[k + 1] = cache.z[k].array().tanh().matrix();
      } else {
        cache.a[k + 1] = cache.z[k];
      }
    }
    cache.version = version_;
    cache.owner = this;
    return cache.a.back();
  }

  Matrix forward(const Matrix& x) const {
    Cache c;
    return forward(x, c);
  }

  Vector forward(const Vector& x) const {
    Cache c;
    return forward(Matrix(x), c).col(0);
  }

  /// Reverse pass for `cache`; `d_out` has one column per sample. ReLU uses
  /// subgradient 0 at 0.
  Gradients backward(const Cache& cache, const Matrix& d_out) const {
    if (cache.owner != this || cache.version != version_)
      throw ValidationError("stale activation cache: network changed since forward");
    if (d_out.rows() != cache.a.back().rows() || d_out.cols() != cache.a.back().cols())
      throw ValidationError("output gradient shape mismatch");
    Gradients g;
    g.w.resize(w_.size());
    g.b.resize(w_.size());
    Matrix delta = d_out;
    const std::size_t last = w_.size() - 1;
    if (output_ == Output::Tanh) delta.array() *= 1.0 - cache.a.back().array().square();
    for (std::size_t k = last + 1; k-- > 0;) {
      if (k != last) delta.array() *= (cache.z[k].array() > 0.0).cast<double>();
      g.w[k].noalias() = delta * cache.a[k].transpose();
      g.b[k] = delta.rowwise().sum();
      Matrix prev = w_[k].transpose() * delta;
      delta.swap(prev);
    }
    g.input = std::move(delta);
    return g;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < w_.size(); ++k) n += static_cast<std::size_t>(w_[k].size() + b_[k].size());
    return n;
  }

  /// Parameters in a fixed order: per layer, weights column-major then bias.
  std::vector<double> parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (std::size_t k = 0; k < w_.size(); ++k) {
      out.insert(out.end(), w_[k].data(), w_[k].data() + w_[k].size());
      out.insert(out.end(), b_[k].data(), b_[k].data() + b_[k].size());
    }
    return out;
  }

  void set_parameters(const std::vector<double>& p) {
    if (p.size() != parameter_count()) throw ValidationError("parameter vector length mismatch");
    std::size_t i = 0;
    for (std::size_t k = 0; k < w_.size(); ++k) {
      std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(i), w_[k].size(), w_[k].data());
      i += static_cast<std::size_t>(w_[k].size());
      std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(i), b_[k].size(), b_[k].data());
      i += static_cast<std::size_t>(b_[k].size());
    }
    ++version_;
  }

  bool finite() const {
    for (std::size_t k = 0; k < w_.size(); ++k)
      if (!w_[k].allFinite() || !b_[k].allFinite()) return false;
    return true;
  }

  friend bool operator==(const Mlp& x, const Mlp& y) {
    if (!x.same_shape(y)) return false;
    for (std::size_t k = 0; k < x.w_.size(); ++k)
      if (x.w_[k] != y.w_[k] || x.b_[k] != y.b_[k]) return false;
    return true;
  }

 private:
  std::vector<std::size_t> sizes_;
  Output output_ = Output::Linear;
  std::vector<Matrix> w_;
  std::vector<Vector> b_;
  std::uint64_t version_ = 0;
};

/// Same order as Mlp::parameters().
inline std::vector<double> flatten(const Gradients& g) {
  std::vector<double> out;
  for (std::size_t k = 0; k < g.w.size(); ++k) {
    out.insert(out.end(), g.w[k].data(), g.w[k].data() + g.w[k].size());
    out.insert(out.end(), g.b[k].data(), g.b[k].data() + g.b[k].size());
  }
  return out;
}

inline bool finite(const Gradients& g) {
  for (std::size_t k = 0; k < g.w.size(); ++k)
    if (!g.w[k].allFinite() || !g.b[k].allFinite()) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, AdamConfig cfg) : cfg_(cfg) {
    for (std::size_t k = 0; k < net.layers(); ++k) {
      mw_.push_back(Matrix::Zero(net.weight(k).rows(), net.weight(k).cols()));
      vw_.push_back(mw_.back());
      mb_.push_back(Vector::Zero(net.bias(k).size()));
      vb_.push_back(mb_.back());
    }
  }

  const AdamConfig& config() const { return cfg_; }
  std::uint64_t steps() const { return t_; }

  /// Returns false and leaves everything untouched when a gradient entry is
  /// not finite.
  bool step(Mlp& net, const Gradients& g) {
    if (g.w.size() != mw_.size()) throw ValidationError("gradient shape mismatch");
    for (std::size_t k = 0; k < mw_.size(); ++k)
      if (g.w[k].rows() != mw_[k].rows() || g.w[k].cols() != mw_[k].cols() || g.b[k].size() != mb_[k].size())
        throw ValidationError("gradient shape mismatch");
    if (!finite(g)) return false;
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * grad;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
      param.array() -= cfg_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
    };
    for (std::size_t k = 0; k < mw_.size(); ++k) {
      update(net.weight(k), mw_[k], vw_[k], g.w[k]);
      update(net.bias(k), mb_[k], vb_[k], g.b[k]);
    }
    return true;
  }

  std::vector<double> state() const {
    std::vector<double> out;
    for (std::size_t k = 0; k < mw_.size(); ++k)
      for (const auto* m : {&mw_[k], &vw_[k]}) out.insert(out.end(), m->data(), m->data() + m->size());
    for (std::size_t k = 0; k < mb_.size(); ++k)
      for (const auto* m : {&mb_[k], &vb_[k]}) out.insert(out.end(), m->data(), m->data() + m->size());
    return out;
  }

  void set_state(const std::vector<double>& s, std::uint64_t t) {
    std::size_t i = 0;
    auto take = [&](double* p, Eigen::Index n) {
      if (i + static_cast<std::size_t>(n) > s.size()) throw ValidationError("optimiser state too short");
      std::copy_n(s.begin() + static_cast<std::ptrdiff_t>(i), n, p);
      i += static_cast<std::size_t>(n);
    };
    for (std::size_t k = 0; k < mw_.size(); ++k)
      for (auto* m : {&mw_[k], &vw_[k]}) take(m->data(), m->size());
    for (std::size_t k = 0; k < mb_.size(); ++k)
      for (auto* m : {&mb_[k], &vb_[k]}) take(m->data(), m->size());
    if (i != s.size()) throw ValidationError("optimiser state length mismatch");
    t_ = t;
  }

 private:
  AdamConfig cfg_;
  std::vector<Matrix> mw_, vw_;
  std::vector<Vector> mb_, vb_;
  std::uint64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Target tracking and averaging

/// target ← τ·source + (1−τ)·target per parameter. Entries that already agree
/// are left alone, so a target equal to its source stays bit-identical.
inline void soft_update(Mlp& target, const Mlp& source, double tau) {
  if (!target.same_shape(source)) throw ValidationError("soft update between different architectures");
  if (!(tau > 0 && tau <= 1)) throw ValidationError("tau must lie in (0,1]");
  auto blend = [tau](double t, double s) { return tau == 1.0 || s == t ? s : tau * s + (1.0 - tau) * t; };
  for (std::size_t k = 0; k < target.layers(); ++k) {
    target.weight(k) = target.weight(k).binaryExpr(source.weight(k), blend);
    target.bias(k) = target.bias(k).binaryExpr(source.bias(k), blend);
  }
}

/// Running equal-weight mean: `avg` already holds the mean of n−1 samples and
/// absorbs `sample` as the n-th.
inline void accumulate_average(Mlp& avg, const Mlp& sample, std::size_t n) {
  if (n == 1) {
    avg = sample;
    return;
  }
  if (!avg.same_shape(sample)) throw ValidationError("averaging different architectures");
  const double inv = 1.0 / static_cast<double>(n);
  auto mean = [inv](double a, double s) { return a == s ? a : a + (s - a) * inv; };
  for (std::size_t k = 0; k < avg.layers(); ++k) {
    avg.weight(k) = avg.weight(k).binaryExpr(sample.weight(k), mean);
    avg.bias(k) = avg.bias(k).binaryExpr(sample.bias(k), mean);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints (text, hexadecimal floats, bit-exact)

namespace detail {

inline std::string hex(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  return std::string(buf, r.ptr);
}

inline double unhex(const std::string& s) {
  double v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ParseError("bad number '" + s + "' in checkpoint", 0);
  return v;
}

inline void write_numbers(std::ostream& out, const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) out << (i % 8 ? " " : (i ? "\n" : "")) << hex(v[i]);
  out << '\n';
}

inline std::vector<double> read_numbers(std::istream& in, std::size_t n) {
  std::vector<double> v(n);
  std::string tok;
  for (auto& x : v) {
    if (!(in >> tok)) throw ParseError("checkpoint ended early", 0);
    x = unhex(tok);
  }
  return v;
}

inline void expect(std::istream& in, const std::string& word) {
  std::string tok;
  if (!(in >> tok) || tok != word) throw ParseError("checkpoint: expected '" + word + "', got '" + tok + "'", 0);
}

}  // namespace detail

inline void save(std::ostream& out, const Mlp& net) {
  out << "mlp 1\nsizes";
  for (auto s : net.sizes()) out << ' ' << s;
  out << "\noutput " << to_string(net.output_kind()) << "\nparams\n";
  detail::write_numbers(out, net.parameters());
}

inline Mlp load_mlp(std::istream& in) {
  detail::expect(in, "mlp");
  detail::expect(in, "1");
  detail::expect(in, "sizes");
  std::vector<std::size_t> sizes;
  std::string tok;
  while (in >> tok && tok != "output") sizes.push_back(std::stoul(tok));
  if (tok != "output") throw ParseError("checkpoint: missing output kind", 0);
  in >> tok;
  if (tok != "tanh" && tok != "linear") throw ParseError("checkpoint: unknown output kind '" + tok + "'", 0);
  Mlp net(sizes, tok == "tanh" ? Output::Tanh : Output::Linear);
  detail::expect(in, "params");
  net.set_parameters(detail::read_numbers(in, net.parameter_count()));
  return net;
}

inline void save(std::ostream& out, const Adam& opt) {
  const auto& c = opt.config();
  auto s = opt.state();
  out << "adam 1\nconfig " << detail::hex(c.lr) << ' ' << detail::hex(c.beta1) << ' ' << detail::hex(c.beta2) << ' '
      << detail::hex(c.eps) << "\nsteps " << opt.steps() << "\nstate " << s.size() << '\n';
  detail::write_numbers(out, s);
}

inline Adam load_adam(std::istream& in, const Mlp& net) {
  detail::expect(in, "adam");
  detail::expect(in, "1");
  detail::expect(in, "config");
  auto c = detail::read_numbers(in, 4);
  Adam opt(net, {c[0], c[1], c[2], c[3]});
  detail::expect(in, "steps");
  std::uint64_t t = 0;
  in >> t;
  detail::expect(in, "state");
  std::size_t n = 0;
  in >> n;
  opt.set_state(detail::read_numbers(in, n), t);
  return opt;
}

}  // namespace ltlrl::nn
