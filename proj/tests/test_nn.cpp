#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gradcheck.hpp"
#include "ltlrl/nn.hpp"

using namespace ltlrl::nn;

namespace {

Matrix col(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

}  // namespace

TEST(Mlp, IdentityLinearLayer) {
  Mlp net({3, 3}, Output::Linear);
  net.weight(0) = Matrix::Identity(3, 3);
  auto x = col({1.5, -2, 0.25});
  EXPECT_EQ(net.forward(x), x);
}

TEST(Mlp, ZeroWeightsGiveSquashedBias) {
  Mlp net({2, 4, 2}, Output::Tanh);
  net.bias(1) = Vector::Constant(2, 0.3);
  auto y = net.forward(col({5, -7}));
  EXPECT_DOUBLE_EQ(y(0, 0), std::tanh(0.3));
  EXPECT_DOUBLE_EQ(y(1, 0), std::tanh(0.3));
}

TEST(Mlp, HandComputedTwoTwoOne) {
  Mlp net({2, 2, 1}, Output::Linear);
  net.weight(0) << 1, -2, 0.5, 1;
  net.bias(0) << 0.5, -3;
  net.weight(1) << 2, -1;
  net.bias(1) << 0.25;
  // h = relu([1 - 4 + 0.5, 0.5 + 2 - 3]) = relu([-2.5, -0.5]) = 0 → y = 0.25
  EXPECT_DOUBLE_EQ(net.forward(col({1, 2}))(0, 0), 0.25);
  // h = relu([3 - 2 + 0.5, 1.5 + 1 - 3]) = [1.5, 0] → y = 3.25
  EXPECT_DOUBLE_EQ(net.forward(col({3, 1}))(0, 0), 3.25);
}

TEST(Mlp, LinearScalarBackward) {
  Mlp net({1, 1}, Output::Linear);
  net.weight(0)(0, 0) = 1.7;
  net.bias(0)(0) = -0.4;
  Cache c;
  net.forward(col({2.5}), c);
  auto g = net.backward(c, col({1}));
  EXPECT_DOUBLE_EQ(g.w[0](0, 0), 2.5);
  EXPECT_DOUBLE_EQ(g.b[0](0), 1.0);
  EXPECT_DOUBLE_EQ(g.input(0, 0), 1.7);
}

TEST(Mlp, ReluSubgradientAtZeroIsZero) {
  Mlp net({1, 1, 1}, Output::Linear);
  net.weight(0)(0, 0) = 1;
  net.weight(1)(0, 0) = 1;
  Cache c;
  net.forward(col({0}), c);
  auto g = net.backward(c, col({1}));
  EXPECT_EQ(g.input(0, 0), 0.0);
  EXPECT_EQ(g.w[0](0, 0), 0.0);
}

TEST(Mlp, StaleCacheRejected) {
  std::mt19937_64 rng(1);
  auto net = Mlp::random({2, 3, 1}, Output::Linear, rng);
  Cache c;
  net.forward(col({1, 1}), c);
  net.bias(0)(0) += 1;
  EXPECT_THROW(net.backward(c, col({1})), ltlrl::ValidationError);
  auto other = net;
  net.forward(col({1, 1}), c);
  EXPECT_THROW(other.backward(c, col({1})), ltlrl::ValidationError);
  EXPECT_THROW(net.forward(col({1, 1, 1})), ltlrl::ValidationError);
}

TEST(Mlp, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1);
  for (auto out : {Output::Linear, Output::Tanh}) {
    auto net = Mlp::random({4, 8, 8, 2}, out, rng);
    Matrix x = Matrix::NullaryExpr(4, 3, [&] { return n(rng); });
    Matrix c = Matrix::NullaryExpr(2, 3, [&] { return n(rng); });
    auto r = gradcheck::check(net, x, c);
    EXPECT_LE(r.max_param_error, 1e-4) << to_string(out);
    EXPECT_LE(r.max_input_error, 1e-4) << to_string(out);
  }
}

TEST(Mlp, InitialisationBounds) {
  std::mt19937_64 rng(2);
  auto net = Mlp::random({4, 16, 2}, Output::Tanh, rng, 1e-3);
  EXPECT_LE(net.weight(0).cwiseAbs().maxCoeff(), 0.5);
  EXPECT_LE(net.weight(1).cwiseAbs().maxCoeff(), 1e-3 / 4);
  EXPECT_GT(net.weight(0).cwiseAbs().maxCoeff(), 0.3);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::mt19937_64 rng(3);
  auto net = Mlp::random({2, 4, 1}, Output::Linear, rng);
  const auto before = net.parameters();
  Adam opt(net, {});
  Cache c;
  net.forward(col({1, 2}), c);
  auto g = net.backward(c, col({0}));
  for (int i = 0; i < 5; ++i) ASSERT_TRUE(opt.step(net, g));
  EXPECT_EQ(net.parameters(), before);
}

TEST(Adam, SingleStepMatchesScalarDerivation) {
  Mlp net({1, 1}, Output::Linear);
  net.weight(0)(0, 0) = 0.7;
  AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
  Adam opt(net, cfg);
  Gradients g{{col({-0.3})}, {Vector::Constant(1, 2.0)}, {}};
  ASSERT_TRUE(opt.step(net, g));
  // m̂ = g and v̂ = g² after one bias-corrected step.
  EXPECT_NEAR(net.weight(0)(0, 0), 0.7 - 0.01 * (-0.3) / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(net.bias(0)(0), -0.01 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, ConstantGradientMovesAgainstSign) {
  Mlp net({1, 1}, Output::Linear);
  Adam opt(net, {});
  Gradients g{{col({0.5})}, {Vector::Constant(1, -0.2)}, {}};
  double w = 0, b = 0;
  for (int i = 0; i < 50; ++i) {
    opt.step(net, g);
    ASSERT_LT(net.weight(0)(0, 0), w);
    ASSERT_GT(net.bias(0)(0), b);
    w = net.weight(0)(0, 0);
    b = net.bias(0)(0);
  }
}

TEST(Adam, NonFiniteGradientSkipsUpdate) {
  Mlp net({1, 1}, Output::Linear);
  Adam opt(net, {});
  Gradients g{{col({NAN})}, {Vector::Constant(1, 1.0)}, {}};
  EXPECT_FALSE(opt.step(net, g));
  EXPECT_EQ(opt.steps(), 0u);
  EXPECT_EQ(net.bias(0)(0), 0.0);
  EXPECT_TRUE(net.finite());
}

TEST(SoftUpdate, Examples) {
  Mlp t({1, 1}, Output::Linear), s({1, 1}, Output::Linear);
  s.bias(0)(0) = 2;
  soft_update(t, s, 0.5);
  EXPECT_EQ(t.bias(0)(0), 1.0);
  std::mt19937_64 rng(4);
  auto src = Mlp::random({2, 3, 2}, Output::Tanh, rng);
  auto tgt = Mlp::random({2, 3, 2}, Output::Tanh, rng);
  soft_update(tgt, src, 1.0);
  EXPECT_EQ(tgt, src);
  EXPECT_THROW(soft_update(tgt, Mlp({2, 4, 2}, Output::Tanh), 0.5), ltlrl::ValidationError);
}

TEST(SoftUpdate, GeometricConvergence) {
  Mlp t({1, 1}, Output::Linear), s({1, 1}, Output::Linear);
  s.weight(0)(0, 0) = 3;
  const double tau = 0.1;
  double err = 3;
  for (int i = 0; i < 40; ++i) {
    soft_update(t, s, tau);
    const double e = 3 - t.weight(0)(0, 0);
    EXPECT_NEAR(e / err, 1 - tau, 1e-12);
    err = e;
  }
}

TEST(SoftUpdate, AffineInTarget) {
  std::mt19937_64 rng(6);
  auto src = Mlp::random({3, 5, 2}, Output::Linear, rng);
  auto a = Mlp::random({3, 5, 2}, Output::Linear, rng);
  auto b = Mlp::random({3, 5, 2}, Output::Linear, rng);
  auto pa = a.parameters(), pb = b.parameters();
  soft_update(a, src, 0.3);
  soft_update(b, src, 0.3);
  auto qa = a.parameters(), qb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_NEAR(qa[i] - qb[i], 0.7 * (pa[i] - pb[i]), 1e-14);
}

TEST(SoftUpdate, EqualTargetStaysBitIdentical) {
  std::mt19937_64 rng(7);
  auto src = Mlp::random({2, 64, 2}, Output::Tanh, rng);
  auto tgt = src;
  for (int i = 0; i < 100; ++i) soft_update(tgt, src, 0.005);
  EXPECT_EQ(tgt, src);
}

TEST(Average, RunningMean) {
  Mlp a({1, 1}, Output::Linear), s0({1, 1}, Output::Linear), s2({1, 1}, Output::Linear);
  s2.bias(0)(0) = 2;
  accumulate_average(a, s0, 1);
  accumulate_average(a, s2, 2);
  EXPECT_EQ(a.bias(0)(0), 1.0);
  std::mt19937_64 rng(8);
  auto w = Mlp::random({2, 5, 2}, Output::Tanh, rng);
  Mlp avg;
  for (std::size_t k = 1; k <= 7; ++k) accumulate_average(avg, w, k);
  EXPECT_EQ(avg, w);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  std::mt19937_64 rng(9);
  auto net = Mlp::random({2, 16, 16, 2}, Output::Tanh, rng, 1e-3);
  Adam opt(net, {1e-4, 0.9, 0.999, 1e-8});
  Cache c;
  net.forward(Matrix::Random(2, 4), c);
  opt.step(net, net.backward(c, Matrix::Ones(2, 4)));
  std::stringstream ss;
  save(ss, net);
  save(ss, opt);
  auto net2 = load_mlp(ss);
  auto opt2 = load_adam(ss, net2);
  EXPECT_EQ(net2, net);
  EXPECT_EQ(opt2.state(), opt.state());
  EXPECT_EQ(opt2.steps(), 1u);
  Matrix x = Matrix::Random(2, 10);
  EXPECT_EQ(net2.forward(x), net.forward(x));
  std::stringstream again;
  save(again, net2);
  save(again, opt2);
  std::stringstream first;
  save(first, net);
  save(first, opt);
  EXPECT_EQ(again.str(), first.str());
  std::stringstream bad("mlp 1\nsizes 2 2\noutput relu\n");
  EXPECT_THROW(load_mlp(bad), ltlrl::ParseError);
}
