#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltlrl/nn.hpp"
#include "ltlrl/product.hpp"

namespace ltlrl::ddpg {

using nn::Matrix;
using nn::Mlp;
using nn::Vector;

// ---------------------------------------------------------------------------
// Action encoding

inline constexpr double kTwoPi = 2 * std::numbers::pi;
inline constexpr double kDegenerateNorm = 1e-8;

inline Vector encode_action(double angle) {
  Vector v(2);
  v << std::cos(angle), std::sin(angle);
  return v;
}

/// Angle in [0, 2π) of the direction of `v`; vectors shorter than 1e-8 map
/// to 0.
inline double decode_action(double x, double y) {
  const double n = std::hypot(x, y);
  if (n < kDegenerateNorm) return 0.0;
  double a = std::atan2(y / n, x / n);
  if (a < 0) a += kTwoPi;
  return a >= kTwoPi ? 0.0 : a;
}

inline double decode_action(const Vector& v) { return decode_action(v(0), v(1)); }

// ---------------------------------------------------------------------------
// Replay

struct Experience {
  WorldState s;
  StateId q = 0;
  double a0 = 0, a1 = 0;
  double reward = 0;
  WorldState s_next;
  StateId q_next = 0;
  bool terminal = false;
  bool operator==(const Experience&) const = default;
};

/// Fixed-capacity FIFO ring.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1) : capacity_(capacity) {
    if (capacity == 0) throw ValidationError("replay capacity must be positive");
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }
  std::uint64_t inserted() const { return inserted_; }

  void push(const Experience& e) {
    if (data_.size() < capacity_) {
      data_.push_back(e);
    } else {
      data_[head_] = e;
      head_ = (head_ + 1) % capacity_;
    }
    ++inserted_;
  }

  /// i = 0 is the oldest entry.
  const Experience& at(std::size_t i) const { return data_.at((head_ + i) % data_.size()); }

  template <class Gen>
  const Experience& sample(Gen& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    return at(pick(rng));
  }

 private:
  std::size_t capacity_;
  std::vector<Experience> data_;
  std::size_t head_ = 0;
  std::uint64_t inserted_ = 0;
};

// ---------------------------------------------------------------------------
// Configuration

struct TrainingConfig {
  std::size_t episodes = 1000;
  std::size_t max_steps = 100;
  std::size_t batch = 64;
  std::size_t capacity = 100000;
  std::size_t warmup = 4096;
  double tau = 0.005;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double noise_init = 0.5;
  double noise_decay = 0.999;
  double noise_min = 0.05;
  double noise_theta = 1.0;
  double success_ratio = 0.8;
  bool swa = false;
  std::size_t swa_threshold = 8;
  std::size_t swa_every = 50;
  std::vector<std::size_t> hidden = {64, 64};
  RewardParams reward;
  std::uint64_t seed = 1;
  bool modular = true;
  double adam_eps = 1e-8;

  void validate() const {
    reward.validate();
    if (batch == 0) throw ValidationError("batch must be positive");
    if (batch > warmup) throw ValidationError("batch must not exceed warmup");
    if (warmup > 2 * capacity) throw ValidationError("warmup can never be reached with this capacity");
    if (!(tau > 0 && tau <= 1)) throw ValidationError("tau must lie in (0,1]");
    if (!(actor_lr >= 0) || !(critic_lr >= 0)) throw ValidationError("learning rates must be non-negative");
    if (!(adam_eps > 0)) throw ValidationError("adam_eps must be positive");
    if (!(noise_init >= 0) || !(noise_min >= 0) || !(noise_decay > 0 && noise_decay <= 1))
      throw ValidationError("noise parameters out of range");
    if (!(noise_theta > 0 && noise_theta <= 1)) throw ValidationError("noise_theta must lie in (0,1]");
    if (!(success_ratio >= 0 && success_ratio <= 1)) throw ValidationError("success_ratio must lie in [0,1]");
    if (swa && (swa_threshold == 0 || swa_every == 0)) throw ValidationError("swa parameters must be positive");
    if (max_steps == 0) throw ValidationError("max_steps must be positive");
    for (auto h : hidden)
      if (h == 0) throw ValidationError("hidden sizes must be positive");
  }

  double noise_at(std::size_t episode) const {
    return std::max(noise_min, noise_init * std::pow(noise_decay, static_cast<double>(episode)));
  }
};

// ---------------------------------------------------------------------------
// Agent

struct Module {
  Mlp actor, critic, actor_target, critic_target;
  nn::Adam actor_opt, critic_opt;
  ReplayBuffer success, failure;
  Mlp swa_actor, swa_critic;
  std::size_t swa_count = 0;
  std::size_t streak = 0;
  std::size_t train_steps = 0;

  std::size_t stored() const { return success.size() + failure.size(); }
};

struct TrainStats {
  bool trained = false;
  double critic_loss = 0;
  double actor_objective = 0;
};

/// One actor/critic/target quadruple with its own buffers per automaton
/// state, or a single shared quadruple (with the state index appended to the
/// input) when `modular` is off.
class Agent {
 public:
  Agent(double width, double height, std::size_t states, const TrainingConfig& cfg, Rng& init)
      : width_(width), height_(height), states_(states), cfg_(cfg) {
    cfg_.validate();
    const std::size_t in = modular() ? 2 : 3;
    auto sizes = [&](std::size_t first, std::size_t last) {
      std::vector<std::size_t> s{first};
      s.insert(s.end(), cfg_.hidden.begin(), cfg_.hidden.end());
      s.push_back(last);
      return s;
    };
    const std::size_t count = modular() ? states : 1;
    for (std::size_t i = 0; i < count; ++i) {
      Module m;
      m.actor = Mlp::random(sizes(in, 2), nn::Output::Tanh, init, 1e-3);
      m.critic = Mlp::random(sizes(in + 2, 1), nn::Output::Linear, init, 1e-3);
      m.actor_target = m.actor;
      m.critic_target = m.critic;
      m.actor_opt = nn::Adam(m.actor, {cfg_.actor_lr, 0.9, 0.999, cfg_.adam_eps});
      m.critic_opt = nn::Adam(m.critic, {cfg_.critic_lr, 0.9, 0.999, cfg_.adam_eps});
      m.success = ReplayBuffer(cfg_.capacity);
      m.failure = ReplayBuffer(cfg_.capacity);
      modules_.push_back(std::move(m));
    }
  }

  bool modular() const { return cfg_.modular; }
  const TrainingConfig& config() const { return cfg_; }
  std::size_t state_count() const { return states_; }
  double width() const { return width_; }
  double height() const { return height_; }
  std::size_t module_count() const { return modules_.size(); }

  Module& slot(StateId q) { return modules_.at(modular() ? q : 0); }
  const Module& slot(StateId q) const { return modules_.at(modular() ? q : 0); }
  std::vector<Module>& modules() { return modules_; }
  const std::vector<Module>& modules() const { return modules_; }

  std::size_t input_size() const { return modular() ? 2 : 3; }

  void write_input(const WorldState& s, StateId q, double* out) const {
    out[0] = s.x / width_;
    out[1] = s.y / height_;
    if (!modular()) out[2] = static_cast<double>(q);
  }

  Matrix input(const WorldState& s, StateId q) const {
    Matrix m(static_cast<Eigen::Index>(input_size()), 1);
    write_input(s, q, m.data());
    return m;
  }

  /// Raw actor output for (s, q).
  Vector actor_output(const WorldState& s, StateId q, bool use_swa = false) const {
    const auto& m = slot(q);
    const Mlp& net = use_swa && m.swa_count > 0 ? m.swa_actor : m.actor;
    return net.forward(input(s, q)).col(0);
  }

  double greedy_angle(const WorldState& s, StateId q, bool use_swa = false) const {
    return decode_action(actor_output(s, q, use_swa));
  }

 private:
  double width_, height_;
  std::size_t states_;
  TrainingConfig cfg_;
  std::vector<Module> modules_;
};

struct ActionChoice {
  Vector encoded;
  double angle = 0;
};

/// Per-episode exploration noise on the encoded action. theta = 1 draws
/// independent Gaussians; smaller theta is a discrete Ornstein-Uhlenbeck
/// process with the same stationary spread, so headings stay correlated.
struct NoiseProcess {
  double theta = 1.0;
  Vector z = Vector::Zero(2);

  void reset() { z.setZero(); }

  template <class Gen>
  const Vector& draw(double sigma, Gen& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double keep = 1.0 - theta;
    const double fresh = sigma * std::sqrt(1.0 - keep * keep);
    for (Eigen::Index i = 0; i < 2; ++i) {
      const double g = gauss(rng);
      z(i) = keep * z(i) + fresh * g;
    }
    return z;
  }
};

/// Actor direction plus an additive perturbation. The noisy vector is pulled
/// back radially into the unit disk, which keeps it inside [−1,1]² without
/// biasing its direction.
inline ActionChoice perturbed_action(const Agent& agent, const ProductState& ps, const Vector* noise) {
  Vector raw = agent.actor_output(ps.s, ps.q);
  const double n = raw.norm();
  Vector v = n < kDegenerateNorm ? encode_action(0.0) : Vector(raw / n);
  if (noise) {
    v += *noise;
    const double m = v.norm();
    if (m > 1.0) v /= m;
  }
  const double angle = decode_action(v);
  return {encode_action(angle), angle};
}

/// Independent Gaussian noise with std `noise_scale` on each component.
template <class Gen>
ActionChoice select_action(const Agent& agent, const ProductState& ps, double noise_scale, Gen& rng) {
  if (noise_scale <= 0) return perturbed_action(agent, ps, nullptr);
  NoiseProcess fresh;
  return perturbed_action(agent, ps, &fresh.draw(noise_scale, rng));
}

namespace detail {

/// Unit-normalised actor outputs (columns) and the norms used.
inline Matrix normalise_columns(const Matrix& raw, Vector& norms) {
  Matrix a = raw;
  norms.resize(raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    norms(j) = raw.col(j).norm();
    if (norms(j) < kDegenerateNorm) {
      a(0, j) = 1;
      a(1, j) = 0;
    } else {
      a.col(j) /= norms(j);
    }
  }
  return a;
}

inline void check_finite(const Mlp& net, const char* what) {
  if (!net.finite()) throw std::runtime_error(std::string("non-finite parameters in ") + what);
}

}  // namespace detail

struct Batch {
  std::vector<const Experience*> items;
};

/// Draws `batch` items: round(ratio·B) from the success pool and the rest
/// from the failure pool, shifting quota to the other pool when one holds
/// fewer entries than its share. Sampling is uniform with replacement.
template <class Gen>
Batch sample_batch(const Module& m, std::size_t batch, double ratio, Gen& rng) {
  std::size_t ns = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(batch)));
  ns = std::min(ns, m.success.size());
  std::size_t nf = std::min(batch - ns, m.failure.size());
  ns = std::min(batch - nf, m.success.size());
  Batch b;
  for (std::size_t i = 0; i < ns; ++i) b.items.push_back(&m.success.sample(rng));
  for (std::size_t i = 0; i < nf; ++i) b.items.push_back(&m.failure.sample(rng));
  return b;
}

/// Critic regression on y = R + γ·Q′_{q'}(s', μ′_{q'}(s')) (y = R on terminal
/// transitions), then one ascent step of the actor along ∂Q/∂a through the
/// action normalisation, then soft target updates for q.
inline TrainStats train_on_batch(Agent& agent, StateId q, const Batch& batch) {
  TrainStats st;
  const auto B = static_cast<Eigen::Index>(batch.items.size());
  if (B == 0) return st;
  const auto& cfg = agent.config();
  const auto in = static_cast<Eigen::Index>(agent.input_size());
  auto& m = agent.slot(q);

  Matrix x(in, B), xa(in + 2, B), xn(in, B);
  Vector y(B);
  for (Eigen::Index j = 0; j < B; ++j) {
    const Experience& e = *batch.items[static_cast<std::size_t>(j)];
    agent.write_input(e.s, e.q, x.col(j).data());
    xa.block(0, j, in, 1) = x.col(j);
    xa(in, j) = e.a0;
    xa(in + 1, j) = e.a1;
    agent.write_input(e.s_next, e.q_next, xn.col(j).data());
    y(j) = e.reward;
  }

  // Bootstrap through the successor state's target networks, one group per
  // distinct successor module.
  std::vector<bool> done(static_cast<std::size_t>(B), false);
  for (Eigen::Index j = 0; j < B; ++j) {
    const Experience& e = *batch.items[static_cast<std::size_t>(j)];
    if (e.terminal || done[static_cast<std::size_t>(j)]) continue;
    const Module* target = &agent.slot(e.q_next);
    std::vector<Eigen::Index> cols;
    for (Eigen::Index k = j; k < B; ++k) {
      const Experience& f = *batch.items[static_cast<std::size_t>(k)];
      if (!f.terminal && !done[static_cast<std::size_t>(k)] && &agent.slot(f.q_next) == target) {
        cols.push_back(k);
        done[static_cast<std::size_t>(k)] = true;
      }
    }
    Matrix sn(in, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sn.col(static_cast<Eigen::Index>(c)) = xn.col(cols[c]);
    Vector norms;
    Matrix an = detail::normalise_columns(target->actor_target.forward(sn), norms);
    Matrix sa(in + 2, sn.cols());
    sa << sn, an;
    Matrix qn = target->critic_target.forward(sa);
    for (std::size_t c = 0; c < cols.size(); ++c) y(cols[c]) += cfg.reward.gamma * qn(0, static_cast<Eigen::Index>(c));
  }

  // Critic: minimise (1/B) Σ (y − Q)².
  nn::Cache cc;
  Matrix qv = m.critic.forward(xa, cc);
  Matrix resid = qv.row(0).transpose() - y;
  st.critic_loss = resid.squaredNorm() / static_cast<double>(B);
  Matrix dq = (2.0 / static_cast<double>(B)) * resid.transpose();
  m.critic_opt.step(m.critic, m.critic.backward(cc, dq));
  detail::check_finite(m.critic, "critic");

  // Actor: ascend (1/B) Σ Q(s, μ(s)/‖μ(s)‖) using the updated critic.
  nn::Cache ca, cq;
  Matrix raw = m.actor.forward(x, ca);
  Vector norms;
  Matrix a = detail::normalise_columns(raw, norms);
  Matrix sa(in + 2, B);
  sa << x, a;
  Matrix qa = m.critic.forward(sa, cq);
  st.actor_objective = qa.mean();
  auto gq = m.critic.backward(cq, Matrix::Constant(1, B, -1.0 / static_cast<double>(B)));
  Matrix da = gq.input.bottomRows(2);
  Matrix draw(2, B);
  for (Eigen::Index j = 0; j < B; ++j) {
    if (norms(j) < kDegenerateNorm) {
      draw.col(j).setZero();
      continue;
    }
    const Vector u = a.col(j);
    draw.col(j) = (da.col(j) - u * u.dot(da.col(j))) / norms(j);
  }
  m.actor_opt.step(m.actor, m.actor.backward(ca, draw));
  detail::check_finite(m.actor, "actor");

  nn::soft_update(m.critic_target, m.critic, cfg.tau);
  nn::soft_update(m.actor_target, m.actor, cfg.tau);
  ++m.train_steps;
  if (cfg.swa && m.streak >= cfg.swa_threshold && m.train_steps % cfg.swa_every == 0) {
    ++m.swa_count;
    nn::accumulate_average(m.swa_actor, m.actor, m.swa_count);
    nn::accumulate_average(m.swa_critic, m.critic, m.swa_count);
  }
  st.trained = true;
  return st;
}

/// One update of q's quadruple, or a no-op until q's buffers hold the
/// warm-up amount.
template <class Gen>
TrainStats train_step(Agent& agent, StateId q, Gen& rng) {
  const auto& cfg = agent.config();
  const auto& m = agent.slot(q);
  if (m.stored() < cfg.warmup || m.stored() < cfg.batch) return {};
  return train_on_batch(agent, q, sample_batch(m, cfg.batch, cfg.success_ratio, rng));
}

/// Moves an episode's experiences into the success or failure pools of
/// their automaton states.
inline void route_episode(Agent& agent, const std::vector<Experience>& staged, bool success) {
  for (const auto& e : staged) {
    auto& m = agent.slot(e.q);
    (success ? m.success : m.failure).push(e);
  }
}

/// Per-state traversal outcomes of one episode: a visit to q succeeds when
/// the run leaves q for a state outside the sink, or rests in an accepting q
/// at a successful end. Updates the consecutive-success counters.
inline void update_streaks(Agent& agent, const Ldba& ldba, const Episode& ep) {
  if (!agent.modular()) return;
  const auto& tr = ep.trace;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const StateId q = tr[i].ps.q;
    if (ldba.in_sink(q)) continue;
    if (i + 1 < tr.size()) {
      const StateId next = tr[i + 1].ps.q;
      if (next == q) continue;
      auto& m = agent.slot(q);
      m.streak = ldba.in_sink(next) ? 0 : m.streak + 1;
    } else {
      auto& m = agent.slot(q);
      m.streak = ldba.is_accepting(q) && ep.outcome == Outcome::Success ? m.streak + 1 : 0;
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop

struct LogRow {
  std::size_t episode = 0;
  std::size_t steps = 0;
  double total_reward = 0;
  Outcome outcome = Outcome::Timeout;
  std::size_t frontier_resets = 0;
  double noise = 0;
};

inline std::string log_header() { return "episode,steps,return,outcome,frontier_resets,epsilon_scale"; }

inline std::string format_log_row(const LogRow& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%s,%zu,%.17g", r.episode, r.steps, r.total_reward,
                to_string(r.outcome), r.frontier_resets, r.noise);
  return buf;
}

/// Generator seeded from (seed, stream) through std::seed_seq.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{seed & 0xffffffffu, seed >> 32, stream};
  return Rng(seq);
}

/// Independent random streams derived from one seed.
struct Streams {
  Rng init, env, noise, replay;
  explicit Streams(std::uint64_t seed)
      : init(make_rng(seed, 1)),
        env(make_rng(seed, 2)),
        noise(make_rng(seed, 3)),
        replay(make_rng(seed, 4)) {}
};

struct EpisodeRecord {
  LogRow row;
  const Episode& episode;
  const std::vector<Experience>& staged;
  std::size_t train_updates = 0;
};

using EpisodeObserver = std::function<void(const EpisodeRecord&, const Agent&)>;

struct TrainingResult {
  Agent agent;
  std::vector<LogRow> log;
};

inline TrainingResult run_training(const Product& product, const TrainingConfig& cfg,
                                   const EpisodeObserver& observer = nullptr) {
  cfg.validate();
  const auto& ldba = product.ldba();
  Streams rs(cfg.seed);
  TrainingResult out{Agent(product.world().width(), product.world().height(), ldba.state_count(), cfg, rs.init), {}};
  Agent& agent = out.agent;

  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    const double sigma = cfg.noise_at(e);
    Episode ep;
    std::vector<Experience> staged;
    std::size_t updates = 0;
    ProductState ps = product.initial(rs.env);
    AcceptingFamily frontier = product.initial_frontier();
    ep.trace.push_back({0, ps, 0.0, popcount(frontier)});
    NoiseProcess noise{cfg.noise_theta};
    for (std::size_t t = 1; t <= cfg.max_steps; ++t) {
      auto act = sigma > 0 ? perturbed_action(agent, ps, &noise.draw(sigma, rs.noise))
                           : perturbed_action(agent, ps, nullptr);
      auto r = product.step(ps, frontier, act.angle, cfg.reward, rs.env);
      staged.push_back({ps.s, ps.q, act.encoded(0), act.encoded(1), r.reward, r.next.s, r.next.q, r.done});
      if (train_step(agent, ps.q, rs.replay).trained) ++updates;
      ps = r.next;
      frontier = r.frontier;
      ep.total_reward += r.reward;
      ep.frontier_resets += r.frontier_reset ? 1 : 0;
      ep.steps = t;
      ep.trace.push_back({t, ps, r.reward, popcount(frontier)});
      if (r.done) break;
    }
    ep.outcome = product.classify(ps, ep.frontier_resets);
    route_episode(agent, staged, ep.outcome == Outcome::Success);
    update_streaks(agent, ldba, ep);
    LogRow row{e, ep.steps, ep.total_reward, ep.outcome, ep.frontier_resets, sigma};
    out.log.push_back(row);
    if (observer) observer(EpisodeRecord{row, ep, staged, updates}, agent);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalResult {
  std::size_t episodes = 0;
  std::size_t successes = 0, trapped = 0, timeouts = 0;
  double mean_steps = 0;
  std::vector<Episode> runs;

  double success_rate() const { return episodes ? static_cast<double>(successes) / static_cast<double>(episodes) : 0; }
  double failure_rate() const { return episodes ? static_cast<double>(trapped) / static_cast<double>(episodes) : 0; }
  double timeout_rate() const { return episodes ? static_cast<double>(timeouts) / static_cast<double>(episodes) : 0; }
};

/// Noise-free rollouts of `policy`. With `starts` given, one episode per start.
inline EvalResult evaluate_policy(const Product& product, const Product::Policy& policy, std::size_t episodes,
                                  std::size_t max_steps, const RewardParams& reward, std::uint64_t seed,
                                  const std::vector<WorldState>* starts = nullptr, bool keep_runs = false) {
  Rng rng = make_rng(seed, 5);
  EvalResult r;
  const std::size_t n = starts ? starts->size() : episodes;
  double steps = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto ep = starts ? product.run_episode(policy, reward, max_steps, rng, (*starts)[i])
                     : product.run_episode(policy, reward, max_steps, rng);
    ++r.episodes;
    steps += static_cast<double>(ep.steps);
    switch (ep.outcome) {
      case Outcome::Success: ++r.successes; break;
      case Outcome::Trapped: ++r.trapped; break;
      case Outcome::Timeout: ++r.timeouts; break;
    }
    if (keep_runs) r.runs.push_back(std::move(ep));
  }
  r.mean_steps = r.episodes ? steps / static_cast<double>(r.episodes) : 0;
  return r;
}

inline EvalResult evaluate(const Agent& agent, const Product& product, std::size_t episodes, std::size_t max_steps,
                           std::uint64_t seed, const std::vector<WorldState>* starts = nullptr,
                           bool keep_runs = false) {
  const bool swa = agent.config().swa;
  auto policy = [&](const ProductState& ps) { return agent.greedy_angle(ps.s, ps.q, swa); };
  return evaluate_policy(product, policy, episodes, max_steps, agent.config().reward, seed, starts, keep_runs);
}

// ---------------------------------------------------------------------------
// Agent checkpoint

inline void save_agent(std::ostream& out, const Agent& agent) {
  out << "agent 1\nmodular " << (agent.modular() ? 1 : 0) << "\nstates " << agent.state_count() << "\nworld "
      << nn::detail::hex(agent.width()) << ' ' << nn::detail::hex(agent.height()) << "\nmodules "
      << agent.module_count() << '\n';
  for (std::size_t i = 0; i < agent.module_count(); ++i) {
    const auto& m = agent.modules()[i];
    out << "module " << i << " train_steps " << m.train_steps << " streak " << m.streak << " swa " << m.swa_count
        << '\n';
    nn::save(out, m.actor);
    nn::save(out, m.critic);
    nn::save(out, m.actor_target);
    nn::save(out, m.critic_target);
    nn::save(out, m.actor_opt);
    nn::save(out, m.critic_opt);
    if (m.swa_count > 0) {
      nn::save(out, m.swa_actor);
      nn::save(out, m.swa_critic);
    }
  }
}

/// Restores networks, optimiser states and counters; replay buffers start
/// empty.
inline Agent load_agent(std::istream& in, TrainingConfig cfg) {
  using nn::detail::expect;
  expect(in, "agent");
  expect(in, "1");
  int modular = 0;
  std::size_t states = 0, modules = 0;
  std::string w, h;
  expect(in, "modular");
  in >> modular;
  expect(in, "states");
  in >> states;
  expect(in, "world");
  in >> w >> h;
  expect(in, "modules");
  in >> modules;
  if (!in) throw ParseError("agent checkpoint header is malformed", 0);
  cfg.modular = modular != 0;
  Rng dummy(0);
  Agent agent(nn::detail::unhex(w), nn::detail::unhex(h), states, cfg, dummy);
  if (modules != agent.module_count()) throw ParseError("agent checkpoint module count mismatch", 0);
  for (std::size_t i = 0; i < modules; ++i) {
    auto& m = agent.modules()[i];
    std::size_t idx = 0;
    expect(in, "module");
    in >> idx;
    expect(in, "train_steps");
    in >> m.train_steps;
    expect(in, "streak");
    in >> m.streak;
    expect(in, "swa");
    in >> m.swa_count;
    if (!in || idx != i) throw ParseError("agent checkpoint module header is malformed", 0);
    m.actor = nn::load_mlp(in);
    m.critic = nn::load_mlp(in);
    m.actor_target = nn::load_mlp(in);
    m.critic_target = nn::load_mlp(in);
    m.actor_opt = nn::load_adam(in, m.actor);
    m.critic_opt = nn::load_adam(in, m.critic);
    if (m.swa_count > 0) {
      m.swa_actor = nn::load_mlp(in);
      m.swa_critic = nn::load_mlp(in);
    }
  }
  return agent;
}

}  // namespace ltlrl::ddpg
