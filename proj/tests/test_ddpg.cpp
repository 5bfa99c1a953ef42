#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "ltlrl/ddpg.hpp"
#include "step_check.hpp"

using namespace ltlrl;
using namespace ltlrl::ddpg;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Ldba melas_ldba() { return load_ldba(slurp(LTLRL_SAMPLES_DIR "/melas_mission.ldba")); }

TrainingConfig small_config() {
  TrainingConfig c;
  c.hidden = {16, 16};
  c.batch = 16;
  c.warmup = 64;
  c.max_steps = 30;
  c.episodes = 20;
  c.capacity = 500;
  return c;
}

Experience tagged(double id, StateId q = 0) { return {{0, 0}, q, 1, 0, id, {0, 0}, q, false}; }

// Chi-squared critical value at p = 0.01 via the Wilson–Hilferty approximation.
double chi2_critical_01(double dof) {
  const double z = 2.3263478740408408;
  const double h = 2.0 / (9.0 * dof);
  return dof * std::pow(1 - h + z * std::sqrt(h), 3);
}

}  // namespace

TEST(ActionCodec, Examples) {
  auto e0 = encode_action(0);
  EXPECT_EQ(e0(0), 1.0);
  EXPECT_EQ(e0(1), 0.0);
  auto epi = encode_action(std::numbers::pi);
  EXPECT_NEAR(epi(0), -1.0, 1e-15);
  EXPECT_NEAR(epi(1), 0.0, 1e-15);
  EXPECT_EQ(decode_action(1, 0), 0.0);
  EXPECT_NEAR(decode_action(0, -2), 1.5 * std::numbers::pi, 1e-15);
  EXPECT_EQ(decode_action(0, 0), 0.0);
  EXPECT_EQ(decode_action(1e-9, 5e-9), 0.0);
}

TEST(ActionCodec, RoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, kTwoPi);
  for (int i = 0; i < 10000; ++i) {
    const double t = u(rng);
    auto v = encode_action(t);
    ASSERT_NEAR(v.squaredNorm(), 1.0, 1e-12);
    ASSERT_NEAR(decode_action(v), t, 1e-9);
  }
}

TEST(SelectAction, NoiselessIsDecodedActor) {
  TrainingConfig cfg = small_config();
  Rng init(3);
  Agent agent(20, 20, 4, cfg, init);
  Rng rng(1);
  ProductState ps{{3, 7}, 1};
  auto c = select_action(agent, ps, 0.0, rng);
  EXPECT_NEAR(c.angle, decode_action(agent.actor_output(ps.s, ps.q)), 1e-15);
  EXPECT_NEAR(c.encoded.norm(), 1.0, 1e-15);
}

TEST(SelectAction, LargeNoiseIsCircularlyUniform) {
  TrainingConfig cfg = small_config();
  Rng init(3);
  Agent agent(20, 20, 4, cfg, init);
  Rng rng(2);
  const int n = 100000, bins = 36;
  std::vector<int> h(bins, 0);
  for (int i = 0; i < n; ++i) {
    const double a = select_action(agent, {{3, 7}, 0}, 1e6, rng).angle;
    ASSERT_GE(a, 0.0);
    ASSERT_LT(a, kTwoPi);
    ++h[static_cast<int>(a / kTwoPi * bins)];
  }
  double chi2 = 0;
  const double expect = static_cast<double>(n) / bins;
  for (int c : h) chi2 += (c - expect) * (c - expect) / expect;
  EXPECT_LT(chi2, chi2_critical_01(bins - 1));
}

TEST(NoiseProcess, SpreadAndCorrelation) {
  for (double theta : {1.0, 0.1}) {
    NoiseProcess p{theta};
    Rng rng(9);
    const double sigma = 0.5;
    for (int i = 0; i < 200; ++i) p.draw(sigma, rng);
    const int n = 200000;
    double sq = 0, lag = 0, prev = p.z(0);
    for (int i = 0; i < n; ++i) {
      const double x = p.draw(sigma, rng)(0);
      sq += x * x;
      lag += x * prev;
      prev = x;
    }
    EXPECT_NEAR(std::sqrt(sq / n), sigma, 0.02) << theta;
    EXPECT_NEAR(lag / sq, 1.0 - theta, 0.02) << theta;
  }
  NoiseProcess p{0.3};
  Rng rng(1);
  p.draw(1.0, rng);
  p.reset();
  EXPECT_EQ(p.z.norm(), 0.0);
}

TEST(SelectAction, StatesUseTheirOwnActors) {
  TrainingConfig cfg = small_config();
  Rng init(5);
  Agent agent(20, 20, 2, cfg, init);
  Rng rng(1);
  const double a0 = select_action(agent, {{3, 7}, 0}, 0.0, rng).angle;
  const double a1 = select_action(agent, {{3, 7}, 1}, 0.0, rng).angle;
  EXPECT_NE(a0, a1);
}

TEST(Replay, FifoEviction) {
  ReplayBuffer b(2);
  b.push(tagged(1));
  b.push(tagged(2));
  b.push(tagged(3));
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b.at(0).reward, 2.0);
  EXPECT_EQ(b.at(1).reward, 3.0);
  EXPECT_EQ(b.inserted(), 3u);
}

TEST(Replay, UniformSampling) {
  ReplayBuffer b(50);
  for (int i = 0; i < 70; ++i) b.push(tagged(i));
  std::map<double, int> counts;
  Rng rng(9);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[b.sample(rng).reward];
  ASSERT_EQ(counts.size(), 50u);
  EXPECT_EQ(counts.begin()->first, 20.0);
  double chi2 = 0;
  const double expect = n / 50.0;
  for (auto [k, c] : counts) chi2 += (c - expect) * (c - expect) / expect;
  EXPECT_LT(chi2, chi2_critical_01(49));
}

TEST(Replay, BatchRatioAndFallback) {
  TrainingConfig cfg = small_config();
  Rng init(1);
  Agent agent(1, 1, 1, cfg, init);
  auto& m = agent.slot(0);
  for (int i = 0; i < 100; ++i) m.failure.push(tagged(-1));
  Rng rng(1);
  auto only_fail = sample_batch(m, 64, 0.8, rng);
  EXPECT_EQ(only_fail.items.size(), 64u);
  for (int i = 0; i < 100; ++i) m.success.push(tagged(1));
  auto mixed = sample_batch(m, 64, 0.8, rng);
  int s = 0;
  for (auto* e : mixed.items) s += e->reward > 0;
  EXPECT_EQ(s, 51);
  ReplayBuffer few(10);
  m.success = few;
  for (int i = 0; i < 5; ++i) m.success.push(tagged(1));
  auto short_success = sample_batch(m, 64, 0.8, rng);
  s = 0;
  for (auto* e : short_success.items) s += e->reward > 0;
  EXPECT_EQ(s, 5);
  EXPECT_EQ(short_success.items.size(), 64u);
}

TEST(Routing, EpisodesLandInTheirPools) {
  TrainingConfig cfg = small_config();
  Rng init(1);
  Agent agent(1, 1, 3, cfg, init);
  route_episode(agent, {tagged(1, 0), tagged(2, 1), tagged(3, 1)}, true);
  route_episode(agent, {tagged(4, 2)}, false);
  EXPECT_EQ(agent.slot(0).success.size(), 1u);
  EXPECT_EQ(agent.slot(1).success.size(), 2u);
  EXPECT_EQ(agent.slot(2).failure.size(), 1u);
  EXPECT_EQ(agent.slot(2).success.size(), 0u);
}

TEST(TrainStep, TerminalOnlyBatchRegressesOnRewards) {
  TrainingConfig cfg = small_config();
  Rng init(2);
  Agent agent(10, 10, 2, cfg, init);
  std::vector<Experience> xs;
  for (int i = 0; i < 4; ++i) xs.push_back({{1.0 + i, 2.0}, 0, 0.6, 0.8, i % 2 ? 1.0 : -1.0, {1, 1}, 1, true});
  Batch b;
  double expect = 0;
  for (auto& e : xs) {
    b.items.push_back(&e);
    Eigen::MatrixXd x(4, 1);
    x << e.s.x / 10, e.s.y / 10, e.a0, e.a1;
    const double q = agent.slot(0).critic.forward(x)(0, 0);
    expect += (e.reward - q) * (e.reward - q);
  }
  auto st = train_on_batch(agent, 0, b);
  EXPECT_NEAR(st.critic_loss, expect / 4, 1e-15);
}

TEST(TrainStep, MatchesScalarOracle) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed)
    for (double eps : {1e-8, 1.0})
      for (bool terminal : {false, true}) {
        auto r = step_check::run(seed, eps, terminal);
        EXPECT_LE(r.max_rel, 1e-10) << seed << ' ' << eps << ' ' << terminal;
        EXPECT_TRUE(r.other_state_untouched);
      }
}

TEST(TrainStep, ActorClimbsConstructedCritic) {
  // Q(s,a) = 2·relu(a·a* + 2) − 6 equals −‖a − a*‖² on the unit circle.
  TrainingConfig cfg = small_config();
  cfg.hidden = {8};
  cfg.critic_lr = 0;
  cfg.actor_lr = 1e-2;
  Rng init(4);
  Agent agent(10, 10, 1, cfg, init);
  auto& m = agent.slot(0);
  m.critic = Mlp({4, 1, 1}, nn::Output::Linear);
  const double target = 2.2;
  m.critic.weight(0) << 0, 0, std::cos(target), std::sin(target);
  m.critic.bias(0) << 2;
  m.critic.weight(1) << 2;
  m.critic.bias(1) << -6;
  m.critic_target = m.critic;
  m.critic_opt = nn::Adam(m.critic, {0, 0.9, 0.999, 1e-8});
  Experience e{{4, 6}, 0, 1, 0, 0, {4, 6}, 0, true};
  Batch b{{&e}};
  auto dist = [&] {
    auto a = encode_action(agent.greedy_angle(e.s, 0));
    return (a - encode_action(target)).norm();
  };
  double before = dist();
  for (int i = 0; i < 20; ++i) {
    train_on_batch(agent, 0, b);
    const double after = dist();
    ASSERT_LT(after, before);
    before = after;
  }
}

TEST(TrainStep, OnlyTouchesItsOwnModule) {
  TrainingConfig cfg = small_config();
  Rng init(6);
  Agent agent(10, 10, 3, cfg, init);
  for (int i = 0; i < 64; ++i) agent.slot(1).failure.push({{1, 1}, 1, 1, 0, 0, {2, 2}, 2, false});
  const auto before = agent.modules();
  Rng rng(1);
  ASSERT_TRUE(train_step(agent, 1, rng).trained);
  for (std::size_t q : {0u, 2u}) {
    EXPECT_EQ(agent.modules()[q].actor, before[q].actor);
    EXPECT_EQ(agent.modules()[q].critic, before[q].critic);
    EXPECT_EQ(agent.modules()[q].actor_target, before[q].actor_target);
    EXPECT_EQ(agent.modules()[q].critic_target, before[q].critic_target);
  }
  EXPECT_FALSE(agent.modules()[1].actor == before[1].actor);
  // Targets lag by exactly (1 − τ) of the previous gap.
  auto t = agent.modules()[1].critic_target.parameters();
  auto t0 = before[1].critic_target.parameters();
  auto s = agent.modules()[1].critic.parameters();
  for (std::size_t i = 0; i < t.size(); ++i)
    ASSERT_LE(std::abs(t[i] - s[i]), (1 - cfg.tau) * std::abs(t0[i] - s[i]) + 1e-15);
}

TEST(TrainStep, WaitsForWarmup) {
  TrainingConfig cfg = small_config();
  Rng init(6);
  Agent agent(10, 10, 1, cfg, init);
  for (int i = 0; i < 63; ++i) agent.slot(0).failure.push(tagged(0));
  Rng rng(1);
  EXPECT_FALSE(train_step(agent, 0, rng).trained);
  agent.slot(0).success.push(tagged(0));
  EXPECT_TRUE(train_step(agent, 0, rng).trained);
}

TEST(Streaks, TraversalsCountAndReset) {
  auto ldba = melas_ldba();
  TrainingConfig cfg = small_config();
  Rng init(1);
  Agent agent(20, 20, 4, cfg, init);
  auto episode = [](std::vector<StateId> qs, Outcome o) {
    Episode ep;
    for (std::size_t i = 0; i < qs.size(); ++i) ep.trace.push_back({i, {{0, 0}, qs[i]}, 0, 1});
    ep.outcome = o;
    return ep;
  };
  update_streaks(agent, ldba, episode({0, 0, 1, 1, 2, 2}, Outcome::Success));
  EXPECT_EQ(agent.slot(0).streak, 1u);
  EXPECT_EQ(agent.slot(1).streak, 1u);
  EXPECT_EQ(agent.slot(2).streak, 1u);
  update_streaks(agent, ldba, episode({0, 1, 3}, Outcome::Trapped));
  EXPECT_EQ(agent.slot(0).streak, 2u);
  EXPECT_EQ(agent.slot(1).streak, 0u);
  update_streaks(agent, ldba, episode({0, 0}, Outcome::Timeout));
  EXPECT_EQ(agent.slot(0).streak, 0u);
}

TEST(Swa, AccumulatesOnlyWhileStreakHolds) {
  TrainingConfig cfg = small_config();
  cfg.swa = true;
  cfg.swa_threshold = 2;
  cfg.swa_every = 1;
  Rng init(6);
  Agent agent(10, 10, 1, cfg, init);
  for (int i = 0; i < 64; ++i) agent.slot(0).failure.push({{1, 1}, 0, 1, 0, 0, {2, 2}, 0, false});
  Rng rng(1);
  train_step(agent, 0, rng);
  EXPECT_EQ(agent.slot(0).swa_count, 0u);
  agent.slot(0).streak = 2;
  train_step(agent, 0, rng);
  EXPECT_EQ(agent.slot(0).swa_count, 1u);
  EXPECT_EQ(agent.slot(0).swa_actor, agent.slot(0).actor);
  train_step(agent, 0, rng);
  EXPECT_EQ(agent.slot(0).swa_count, 2u);
}

TEST(Training, ZeroEpisodes) {
  auto world = load_world(slurp(LTLRL_SAMPLES_DIR "/melas.world"));
  Product p(world, melas_ldba());
  auto cfg = small_config();
  cfg.episodes = 0;
  auto r = run_training(p, cfg);
  EXPECT_TRUE(r.log.empty());
  Streams rs(cfg.seed);
  Agent fresh(20, 20, 4, cfg, rs.init);
  EXPECT_EQ(r.agent.modules()[0].actor, fresh.modules()[0].actor);
}

TEST(Training, SeededRunsAreIdentical) {
  auto world = load_world(slurp(LTLRL_SAMPLES_DIR "/melas.world"));
  Product p(world, melas_ldba());
  auto cfg = small_config();
  cfg.episodes = 50;
  auto a = run_training(p, cfg);
  auto b = run_training(p, cfg);
  ASSERT_EQ(a.log.size(), 50u);
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(format_log_row(a.log[i]), format_log_row(b.log[i]));
  std::stringstream sa, sb;
  save_agent(sa, a.agent);
  save_agent(sb, b.agent);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_GT(a.agent.slot(0).train_steps, 0u);
}

TEST(Training, ZeroLearningRateKeepsInitialParameters) {
  auto world = load_world(slurp(LTLRL_SAMPLES_DIR "/melas.world"));
  Product p(world, melas_ldba());
  auto cfg = small_config();
  cfg.episodes = 30;
  cfg.actor_lr = 0;
  cfg.critic_lr = 0;
  auto r = run_training(p, cfg);
  Streams rs(cfg.seed);
  Agent fresh(20, 20, 4, cfg, rs.init);
  std::size_t stored = 0;
  for (std::size_t q = 0; q < 4; ++q) {
    const auto& m = r.agent.modules()[q];
    const auto& f = fresh.modules()[q];
    EXPECT_EQ(m.actor, f.actor);
    EXPECT_EQ(m.critic, f.critic);
    EXPECT_EQ(m.actor_target, f.actor_target);
    EXPECT_EQ(m.critic_target, f.critic_target);
    stored += m.stored();
  }
  EXPECT_GT(stored, 0u);
  EXPECT_GT(r.agent.slot(0).train_steps, 0u);
}

TEST(Training, MonolithicUsesOneQuadruple) {
  auto world = load_world(slurp(LTLRL_SAMPLES_DIR "/melas.world"));
  Product p(world, melas_ldba());
  auto cfg = small_config();
  cfg.modular = false;
  auto r = run_training(p, cfg);
  EXPECT_EQ(r.agent.module_count(), 1u);
  EXPECT_EQ(r.agent.input_size(), 3u);
  EXPECT_EQ(&r.agent.slot(0), &r.agent.slot(3));
}

TEST(Evaluate, HazardSeekerAlwaysFails) {
  auto world = load_world("size: 3 1\ncells: 3 1\nD: 5\nstart: point 1.5 0.5\nalphabet: t1 t2 u\nu . t1\n");
  Product p(world, melas_ldba());
  auto r = evaluate_policy(p, [](const ProductState&) { return std::numbers::pi; }, 20, 10, {}, 1);
  EXPECT_EQ(r.success_rate(), 0.0);
  EXPECT_EQ(r.failure_rate(), 1.0);
}

TEST(Evaluate, ScriptedCorridorAlwaysSucceeds) {
  // t1 | . | t2: go west to t1, then east to t2 and keep pushing east.
  auto world = load_world("size: 3 1\ncells: 3 1\nD: 1\nstart: region 1 0 2 1\nalphabet: t1 t2 u\nt1 . t2\n");
  Product p(world, melas_ldba());
  auto policy = [&](const ProductState& ps) { return ps.q == 0 ? std::numbers::pi : 0.0; };
  auto r = evaluate_policy(p, policy, 200, 60, {}, 3);
  EXPECT_EQ(r.success_rate(), 1.0);
  EXPECT_DOUBLE_EQ(r.success_rate() + r.failure_rate() + r.timeout_rate(), 1.0);
}

TEST(Evaluate, SweepCoversEverySafeCell) {
  auto world = load_world(slurp(LTLRL_SAMPLES_DIR "/melas.world"));
  Product p(world, melas_ldba());
  auto cfg = small_config();
  Rng init(1);
  Agent agent(20, 20, 4, cfg, init);
  auto starts = world.safe_cell_centres();
  auto r = evaluate(agent, p, 0, 30, 1, &starts);
  EXPECT_EQ(r.episodes, 96u);
  EXPECT_DOUBLE_EQ(r.success_rate() + r.failure_rate() + r.timeout_rate(), 1.0);
}

TEST(Checkpoint, AgentRoundTrip) {
  auto world = load_world(slurp(LTLRL_SAMPLES_DIR "/melas.world"));
  Product p(world, melas_ldba());
  auto cfg = small_config();
  auto r = run_training(p, cfg);
  std::stringstream ss;
  save_agent(ss, r.agent);
  auto loaded = load_agent(ss, cfg);
  std::stringstream again;
  save_agent(again, loaded);
  std::stringstream first;
  save_agent(first, r.agent);
  EXPECT_EQ(again.str(), first.str());
  auto e1 = evaluate(r.agent, p, 10, 30, 7);
  auto e2 = evaluate(loaded, p, 10, 30, 7);
  EXPECT_EQ(e1.successes, e2.successes);
  EXPECT_EQ(e1.mean_steps, e2.mean_steps);
}
