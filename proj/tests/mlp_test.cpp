#include "qsynth/mlp.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

namespace {

using namespace qsynth;

bool same_params(const Mlp& a, const Mlp& b) {
  if (a.layer_sizes != b.layer_sizes) return false;
  for (int l = 0; l < a.n_layers(); ++l) {
    if (a.weights[l] != b.weights[l]) return false;
    if (a.biases[l] != b.biases[l]) return false;
  }
  return true;
}

Mlp constant_net(const std::vector<int>& sizes, double value) {
  Rng rng(0);
  Mlp net = Mlp::init(sizes, rng);
  for (auto& w : net.weights) w.setConstant(value);
  for (auto& b : net.biases) b.setConstant(value);
  return net;
}

TEST(Init, ShapesSeedAndZeroInput) {
  Rng rng(5);
  const Mlp net = Mlp::init({4, 8, 3}, rng);
  ASSERT_EQ(net.n_layers(), 2);
  EXPECT_EQ(net.weights[0].rows(), 8);
  EXPECT_EQ(net.weights[0].cols(), 4);
  EXPECT_EQ(net.weights[1].rows(), 3);
  EXPECT_EQ(net.weights[1].cols(), 8);

  Rng rng_b(5);
  EXPECT_TRUE(same_params(net, Mlp::init({4, 8, 3}, rng_b)));

  // Zero biases: zero input propagates to the output bias, which is zero.
  const Eigen::VectorXd out = net.forward(Eigen::VectorXd::Zero(4));
  EXPECT_EQ(out.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Init, RejectsBadSizes) {
  Rng rng(0);
  EXPECT_THROW(Mlp::init({5}, rng), std::invalid_argument);
  EXPECT_THROW(Mlp::init({4, 0, 3}, rng), std::invalid_argument);
}

TEST(Forward, IdentitySingleLayerAndBatchConsistency) {
  Mlp net = constant_net({3, 3}, 0.0);
  net.weights[0].setIdentity();
  Eigen::VectorXd x(3);
  x << 0.5, -2.0, 3.25;
  EXPECT_EQ((net.forward(x) - x).cwiseAbs().maxCoeff(), 0.0);

  Eigen::MatrixXd batch(3, 2);
  batch << x, x;
  const Eigen::MatrixXd out = net.forward_batch(batch);
  EXPECT_EQ((out.col(0) - out.col(1)).cwiseAbs().maxCoeff(), 0.0);

  EXPECT_THROW(net.forward(Eigen::VectorXd::Zero(4)), std::invalid_argument);
}

TEST(Train, PerfectTargetsLeaveParametersUnchanged) {
  Rng rng(11);
  Mlp net = Mlp::init({4, 6, 3}, rng);
  const Mlp before = net;
  AdamState adam = AdamState::for_net(net);

  Eigen::MatrixXd inputs(4, 2);
  for (int i = 0; i < inputs.size(); ++i) inputs(i) = rng.uniform(-1.0, 1.0);
  const Eigen::MatrixXd outs = net.forward_batch(inputs);
  const std::vector<int> actions = {2, 0};
  const std::vector<double> targets = {outs(2, 0), outs(0, 1)};

  const TrainStats stats = train_batch(net, adam, inputs, actions, targets);
  EXPECT_EQ(stats.loss, 0.0);
  EXPECT_EQ(stats.skipped, 0);
  EXPECT_TRUE(same_params(net, before));
}

TEST(Train, LinearSingleSampleStepReducesLoss) {
  Mlp net = constant_net({2, 1}, 0.3);
  AdamState adam = AdamState::for_net(net, 1e-2);
  Eigen::MatrixXd input(2, 1);
  input << 1.0, -0.5;
  const std::vector<int> actions = {0};
  const std::vector<double> targets = {2.0};

  const double before = train_batch(net, adam, input, actions, targets).loss;
  const double out = net.forward(input.col(0))(0);
  const double after = (out - 2.0) * (out - 2.0);
  EXPECT_LT(after, before);
}

TEST(Train, UnselectedOutputHeadsReceiveNoUpdate) {
  Rng rng(12);
  Mlp net = Mlp::init({2, 3}, rng);
  const Mlp before = net;
  AdamState adam = AdamState::for_net(net);

  Eigen::MatrixXd input(2, 1);
  input << 0.7, -1.1;
  train_batch(net, adam, input, {1}, {5.0});

  for (const int row : {0, 2}) {  // masked heads: bitwise untouched
    EXPECT_EQ(net.weights[0].row(row), before.weights[0].row(row));
    EXPECT_EQ(net.biases[0](row), before.biases[0](row));
  }
  EXPECT_NE(net.weights[0].row(1), before.weights[0].row(1));
}

TEST(Train, NonFiniteTargetsAreSkipped) {
  Rng rng(13);
  Mlp net = Mlp::init({3, 4, 2}, rng);
  AdamState adam = AdamState::for_net(net);
  Eigen::MatrixXd inputs = Eigen::MatrixXd::Random(3, 3);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  const TrainStats one = train_batch(net, adam, inputs, {0, 1, 0},
                                     {1.0, nan, -1.0});
  EXPECT_EQ(one.skipped, 1);
  EXPECT_TRUE(std::isfinite(one.loss));
  EXPECT_EQ(adam.step, 1);

  const Mlp before = net;
  const TrainStats all = train_batch(net, adam, inputs, {0, 1, 0},
                                     {nan, nan, nan});
  EXPECT_EQ(all.skipped, 3);
  EXPECT_EQ(all.loss, 0.0);
  EXPECT_EQ(adam.step, 1);  // no update applied
  EXPECT_TRUE(same_params(net, before));
}

TEST(Train, FixedBatchLossCollapses) {
  Rng rng(14);
  Mlp net = Mlp::init({4, 32, 2}, rng);
  AdamState adam = AdamState::for_net(net, 1e-2);

  const int batch = 16;
  Eigen::MatrixXd inputs(4, batch);
  for (int i = 0; i < inputs.size(); ++i) inputs(i) = rng.uniform(-1.0, 1.0);
  Eigen::MatrixXd map(2, 4);
  for (int i = 0; i < map.size(); ++i) map(i) = rng.uniform(-1.0, 1.0);
  const Eigen::MatrixXd y = map * inputs;

  std::vector<int> actions(batch);
  std::vector<double> targets(batch);
  for (int i = 0; i < batch; ++i) {
    actions[i] = i % 2;
    targets[i] = y(actions[i], i);
  }

  double initial = 0.0;
  double final_loss = 0.0;
  for (int step = 0; step < 500; ++step) {
    const double loss =
        train_batch(net, adam, inputs, actions, targets).loss;
    if (step == 0) initial = loss;
    final_loss = loss;
  }
  EXPECT_GT(initial, 0.0);
  EXPECT_LT(final_loss, 0.01 * initial);
}

TEST(Polyak, WeightedAverageOfParameterSets) {
  Mlp target = constant_net({2, 3, 2}, 0.0);
  const Mlp online = constant_net({2, 3, 2}, 1.0);

  polyak(target, online, 0.01);
  EXPECT_NEAR(target.weights[0](0, 0), 0.01, 1e-15);
  EXPECT_NEAR(target.biases[1](1), 0.01, 1e-15);

  Mlp copy_target = constant_net({2, 3, 2}, -0.5);
  polyak(copy_target, online, 1.0);
  EXPECT_TRUE(same_params(copy_target, online));

  Mlp stable = constant_net({2, 3, 2}, 0.25);
  polyak(stable, constant_net({2, 3, 2}, 0.25), 0.3);
  EXPECT_NEAR(stable.weights[1](0, 0), 0.25, 1e-15);

  Mlp mismatched = constant_net({2, 4, 2}, 0.0);
  EXPECT_THROW(polyak(mismatched, online, 0.5), std::invalid_argument);
  EXPECT_THROW(polyak(target, online, 0.0), std::invalid_argument);
}

TEST(GradCheck, RandomNetsStayBelowTolerance) {
  for (const std::uint64_t seed : {21u, 22u, 23u}) {
    Rng rng(seed);
    Mlp net = Mlp::init({6, 12, 10, 8, 5}, rng);
    Eigen::VectorXd x(6);
    for (int i = 0; i < 6; ++i) x(i) = rng.uniform(-1.0, 1.0);
    const int action = rng.uniform_int(0, 4);
    const double target = rng.uniform(-2.0, 2.0);
    EXPECT_LT(gradient_check(net, x, action, target, rng), 1e-4);
  }
}

TEST(GradCheck, ZeroLossPointHasVanishingGradient) {
  Rng rng(24);
  Mlp net = Mlp::init({3, 8, 4}, rng);
  Eigen::VectorXd x(3);
  x << 0.4, -0.2, 0.9;
  const double target = net.forward(x)(2);
  EXPECT_LT(gradient_check(net, x, 2, target, rng), 1e-8);
}

TEST(Checkpoint, JsonRoundTripIsExact) {
  Rng rng(25);
  const Mlp net = Mlp::init({5, 7, 3}, rng);
  const nlohmann::json j = mlp_to_json(net);
  const Mlp back = mlp_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_TRUE(same_params(net, back));

  EXPECT_THROW(mlp_from_json(nlohmann::json::object()),
               std::invalid_argument);
  nlohmann::json bad = j;
  bad["params"].erase(0);
  EXPECT_THROW(mlp_from_json(bad), std::invalid_argument);
}

}  // namespace
