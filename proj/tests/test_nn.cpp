#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "symc/nn.hpp"
#include "symc/report.hpp"

using namespace symc;

namespace {

TwoLayerNet weighted_net(std::size_t in, std::size_t width, std::size_t out, Activation act, std::uint64_t seed) {
  TwoLayerNet net = TwoLayerNet::init(in, width, out, act, seed);
  Rng rng(seed + 1);
  for (Eigen::Index j = 0; j < net.c.size(); ++j) net.c[j] = rng.uniform(0.0, 3.0);
  return net;
}

Eigen::MatrixXd inputs(std::size_t n, std::size_t in, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
  return x;
}

LabeledDataset regression_data(std::size_t n, std::uint64_t seed) {
  Eigen::MatrixXd x = inputs(n, 2, seed);
  Eigen::VectorXd y(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) y[r] = std::sin(3 * x(r, 0)) * x(r, 1);
  return LabeledDataset(std::move(x), std::move(y));
}

TwoLayerNet permuted(const TwoLayerNet& net, const std::vector<Eigen::Index>& perm) {
  TwoLayerNet p = net;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    p.W1.row(ii) = net.W1.row(perm[i]);
    p.b1[ii] = net.b1[perm[i]];
    p.W2.col(ii) = net.W2.col(perm[i]);
    p.c[ii] = net.c[perm[i]];
  }
  return p;
}

double max_param_diff(const TwoLayerNet& a, const TwoLayerNet& b) {
  return std::max({(a.W1 - b.W1).cwiseAbs().maxCoeff(), (a.b1 - b.b1).cwiseAbs().maxCoeff(),
                   (a.W2 - b.W2).cwiseAbs().maxCoeff()});
}

TrainConfig sgd_config(std::size_t epochs, std::uint64_t batch_seed) {
  TrainConfig tc;
  tc.optimizer = Optimizer::sgd;
  tc.lr0 = 0.05;
  tc.epochs = epochs;
  tc.batch_size = 16;
  tc.batches_per_epoch = 10;
  tc.batch_seed = batch_seed;
  return tc;
}

}  // namespace

TEST(Forward, ZeroMultiplicitiesGiveZero) {
  TwoLayerNet net = TwoLayerNet::init(2, 8, 3, Activation::sigmoid, 1);
  net.c.setZero();
  EXPECT_EQ(forward(net, inputs(5, 2, 1)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Forward, HandNet) {
  TwoLayerNet net;
  net.activation = Activation::relu;
  net.W1 = Eigen::MatrixXd::Ones(2, 1);
  net.b1 = Eigen::VectorXd::Zero(2);
  net.W2 = Eigen::MatrixXd::Ones(1, 2);
  net.c = Eigen::Vector2d(1, 2);
  EXPECT_DOUBLE_EQ(forward(net, Eigen::MatrixXd::Ones(1, 1))(0, 0), 3.0);
}

TEST(Forward, LargeBatchChunkingConsistent) {
  const auto net = weighted_net(2, 16, 1, Activation::relu, 3);
  const auto x = inputs(3000, 2, 3);
  const Eigen::MatrixXd all = forward(net, x);
  for (Eigen::Index r : {0, 1023, 1024, 2999})
    EXPECT_EQ(all(r, 0), forward(net, Eigen::MatrixXd(x.row(r)))(0, 0));
}

TEST(Fold, IdentityOnRandomNets) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto net = weighted_net(3, 20, 2, seed % 2 ? Activation::relu : Activation::sigmoid, seed);
    const auto x = inputs(20, 3, seed);
    EXPECT_LE((forward(net, x) - forward(fold(net), x)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Fold, ZeroNeuronsDieAndFoldIsIdempotent) {
  auto net = weighted_net(2, 6, 1, Activation::relu, 2);
  net.c[3] = 0.0;
  const auto f = fold(net);
  EXPECT_EQ(f.W2.col(3).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(f.c, Eigen::VectorXd::Ones(6));
  const auto ff = fold(f);
  EXPECT_EQ(ff.W2, f.W2);
}

TEST(NeuronObjects, ShapeAndRoundTrip) {
  const auto net = weighted_net(2, 10, 1, Activation::relu, 4);
  const auto ws = neuron_objects(net);
  EXPECT_EQ(ws.dim(), 4u);
  EXPECT_EQ(ws.size(), 10u);
  const auto back = net_from_neuron_objects(ws, 2, Activation::relu);
  EXPECT_EQ(back.W1, net.W1);
  EXPECT_EQ(back.b1, net.b1);
  EXPECT_EQ(back.W2, net.W2);
  EXPECT_EQ(back.c, net.c);
}

TEST(NeuronObjects, PermutationCommutes) {
  const auto net = weighted_net(2, 7, 2, Activation::relu, 5);
  const std::vector<Eigen::Index> perm{3, 0, 6, 1, 5, 2, 4};
  const auto a = neuron_objects(permuted(net, perm));
  const auto b = neuron_objects(net);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto pa = a.point(i), pb = b.point(static_cast<std::size_t>(perm[i]));
    EXPECT_TRUE(std::equal(pa.begin(), pa.end(), pb.begin()));
    EXPECT_EQ(a.weight(i), b.weight(static_cast<std::size_t>(perm[i])));
  }
}

TEST(CompressWidth, TargetAtWidthIsIdentity) {
  const auto net = TwoLayerNet::init(2, 30, 1, Activation::relu, 6);
  CompressionConfig cc;
  cc.k = 2;
  cc.target_size = 30;
  const auto out = compress_width(net, cc);
  EXPECT_EQ(out.net.W1, net.W1);
  EXPECT_EQ(out.net.W2, net.W2);
  EXPECT_EQ(out.net.c, net.c);
}

TEST(CompressWidth, MomentsOfNeuronObjectsPreserved) {
  const auto net = TwoLayerNet::init(2, 512, 1, Activation::relu, 7);
  CompressionConfig cc;
  cc.k = 3;
  cc.target_size = 64;
  const auto out = compress_width(net, cc);
  EXPECT_LE(out.net.width(), 64u);
  const auto before = moment_vector(neuron_objects(net), 2, false);
  const auto after = moment_vector(neuron_objects(out.net), 2, false);
  EXPECT_LE(max_relative_moment_residual(before, after), 1e-9);
}

TEST(CompressWidth, OutputErrorShrinksWithOrder) {
  const auto net = TwoLayerNet::init(2, 512, 1, Activation::relu, 8);
  const auto x = inputs(100, 2, 8);
  const Eigen::VectorXd ref = forward(net, x).col(0);
  std::vector<double> med;
  for (std::size_t k = 1; k <= 3; ++k) {
    CompressionConfig cc;
    cc.k = k;
    cc.target_size = 64;
    cc.seed = 8;
    const Eigen::VectorXd got = forward(compress_width(net, cc).net, x).col(0);
    std::vector<double> rel(100);
    for (Eigen::Index i = 0; i < 100; ++i) rel[static_cast<std::size_t>(i)] = std::abs(got[i] - ref[i]) / std::abs(ref[i]);
    med.push_back(quantile(rel, 0.5));
  }
  EXPECT_GT(med[0], med[1]);
  EXPECT_GT(med[1], med[2]);
}

TEST(Gradients, SingleSgdStepClosedForm) {
  TwoLayerNet net;
  net.activation = Activation::relu;
  net.W1 = Eigen::MatrixXd::Constant(1, 1, 2.0);
  net.b1 = Eigen::VectorXd::Constant(1, 0.1);
  net.W2 = Eigen::MatrixXd::Constant(1, 1, 0.3);
  net.c = Eigen::VectorXd::Ones(1);
  const double x = 0.5, y = 1.0, lr = 0.1;
  // f = v relu(w x + b) = 0.3 * 1.1; dL/df = 2 (f - y)
  const double z = 2.0 * x + 0.1, f = 0.3 * z, g = 2.0 * (f - y);
  LabeledDataset data(Eigen::MatrixXd::Constant(1, 1, x), Eigen::VectorXd::Constant(1, y));
  TrainConfig tc;
  tc.optimizer = Optimizer::sgd;
  tc.lr0 = lr;
  tc.epochs = 1;
  tc.batch_size = 1;
  tc.batches_per_epoch = 1;
  const auto hist = train(net, data, tc);
  EXPECT_NEAR(hist.train_loss[0], (f - y) * (f - y), 1e-15);
  EXPECT_NEAR(net.W1(0, 0), 2.0 - lr * g * 0.3 * x, 1e-15);
  EXPECT_NEAR(net.b1[0], 0.1 - lr * g * 0.3, 1e-15);
  EXPECT_NEAR(net.W2(0, 0), 0.3 - lr * g * z, 1e-15);
}

TEST(Gradients, SigmoidFiniteDifference) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto net = weighted_net(3, 12, 2, Activation::sigmoid, seed);
    const auto x = inputs(16, 3, seed + 100);
    const Eigen::MatrixXd t = inputs(16, 2, seed + 200);
    EXPECT_LE(finite_diff_grad_check(net, x, t, 1e-6), 1e-5) << seed;
  }
}

TEST(Gradients, ReluAwayFromKinks) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto net = weighted_net(2, 12, 1, Activation::relu, seed);
    const auto x = kink_safe_inputs(net, 16, seed);
    const Eigen::MatrixXd pre = (x * net.W1.transpose()).rowwise() + net.b1.transpose();
    EXPECT_GE(pre.cwiseAbs().minCoeff(), 1e-3);
    EXPECT_LE(finite_diff_grad_check(net, x, Eigen::MatrixXd::Zero(16, 1), 1e-6), 1e-5) << seed;
  }
}

TEST(Gradients, ZeroWeightNetOutputGradientsAgree) {
  TwoLayerNet net = TwoLayerNet::init(2, 5, 1, Activation::sigmoid, 3);
  net.W1.setZero();
  net.b1.setZero();
  net.W2.setZero();
  const auto x = inputs(8, 2, 3);
  const Eigen::MatrixXd t = Eigen::MatrixXd::Ones(8, 1);
  const Gradients g = mse_gradients(net, x, t);
  // dL/dv_j = -2 c_j * mean(sigmoid(0) * t) = -1 exactly
  for (Eigen::Index j = 0; j < 5; ++j) EXPECT_EQ(g.W2(0, j), -1.0);
  EXPECT_LE(finite_diff_grad_check(net, x, t, 1e-6), 1e-5);
}

TEST(Gradients, EpsRangeChecked) {
  const auto net = TwoLayerNet::init(2, 3, 1, Activation::sigmoid, 1);
  EXPECT_THROW(finite_diff_grad_check(net, inputs(2, 2, 1), Eigen::MatrixXd::Zero(2, 1), 1e-2), std::invalid_argument);
}

TEST(Train, RescaleIsNoOpAtUnitWeights) {
  const auto data = regression_data(200, 1);
  for (auto opt : {Optimizer::sgd, Optimizer::sgd_momentum, Optimizer::adamw}) {
    TwoLayerNet a = TwoLayerNet::init(2, 16, 1, Activation::relu, 2), b = a;
    TrainConfig tc = sgd_config(20, 3);
    tc.optimizer = opt;
    tc.lr0 = opt == Optimizer::adamw ? 1e-2 : 0.05;
    tc.grad_rescale = true;
    train(a, data, tc);
    tc.grad_rescale = false;
    train(b, data, tc);
    EXPECT_LE(max_param_diff(a, b), 1e-12) << to_string(opt);
  }
}

TEST(Train, PermutationEquivariance) {
  const auto data = regression_data(300, 4);
  const std::vector<Eigen::Index> perm{5, 2, 9, 0, 7, 1, 11, 3, 10, 4, 8, 6};
  std::vector<Eigen::Index> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<Eigen::Index>(i);
  for (auto opt : {Optimizer::sgd, Optimizer::sgd_momentum, Optimizer::adamw}) {
    TwoLayerNet a = weighted_net(2, 12, 1, Activation::relu, 5);
    TwoLayerNet b = permuted(a, perm);
    TrainConfig tc = sgd_config(10, 6);  // 100 steps
    tc.optimizer = opt;
    tc.lr0 = opt == Optimizer::adamw ? 1e-2 : 0.05;
    train(a, data, tc);
    train(b, data, tc);
    EXPECT_LE(max_param_diff(a, permuted(b, inv)), 1e-10) << to_string(opt);
  }
}

TEST(Train, ZeroWeightNeuronsFrozen) {
  const auto data = regression_data(100, 5);
  TwoLayerNet net = weighted_net(2, 8, 1, Activation::relu, 6);
  net.c[2] = 0.0;
  const TwoLayerNet before = net;
  TrainConfig tc = sgd_config(5, 7);
  tc.optimizer = Optimizer::adamw;
  tc.lr0 = 1e-2;
  train(net, data, tc);
  EXPECT_EQ(net.W1.row(2), before.W1.row(2));
  EXPECT_EQ(net.b1[2], before.b1[2]);
  EXPECT_EQ(net.W2.col(2), before.W2.col(2));
  EXPECT_NE(net.W1.row(0), before.W1.row(0));
}

TEST(Train, RescaleMatchesDuplicatedNeurons) {
  // a neuron of multiplicity 2 under the rescaled rule moves exactly like
  // each copy of a duplicated pair under plain SGD
  const auto data = regression_data(100, 8);
  TwoLayerNet base = TwoLayerNet::init(2, 4, 1, Activation::relu, 9);
  TwoLayerNet weighted = base;
  weighted.c << 2, 1, 1, 1;
  TwoLayerNet dup;
  dup.activation = base.activation;
  dup.W1.resize(5, 2);
  dup.W1 << base.W1, base.W1.row(0);
  dup.b1.resize(5);
  dup.b1 << base.b1, base.b1[0];
  dup.W2.resize(1, 5);
  dup.W2 << base.W2, base.W2.col(0);
  dup.c = Eigen::VectorXd::Ones(5);
  TrainConfig tc = sgd_config(5, 10);
  train(weighted, data, tc);
  train(dup, data, tc);
  EXPECT_LE((weighted.W1 - dup.W1.topRows(4)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((weighted.W1.row(0) - dup.W1.row(4)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((weighted.W2 - dup.W2.leftCols(4)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Train, AdamWRescaleOnOffClose) {
  const auto data = regression_data(400, 11);
  const auto test = regression_data(400, 12);
  TwoLayerNet a = weighted_net(2, 32, 1, Activation::relu, 13), b = a;
  TrainConfig tc = sgd_config(30, 14);
  tc.optimizer = Optimizer::adamw;
  tc.lr0 = 1e-2;
  tc.grad_rescale = true;
  const double la = train(a, data, tc, &test).test_loss.back();
  tc.grad_rescale = false;
  const double lb = train(b, data, tc, &test).test_loss.back();
  RecordProperty("relative_difference", std::to_string(std::abs(la - lb) / lb));
  EXPECT_LT(std::abs(la - lb) / lb, 0.05);
}

TEST(Train, CosineSchedule) {
  EXPECT_DOUBLE_EQ(cosine_lr(0.1, 0, 100), 0.1);
  EXPECT_NEAR(cosine_lr(0.1, 50, 100), 0.05, 1e-15);
  EXPECT_NEAR(cosine_lr(0.1, 100, 100), 0.0, 1e-15);
}

TEST(Train, NonFiniteLossAborts) {
  const auto data = regression_data(50, 15);
  // sigmoid units cannot all die, so the output weights grow until overflow
  TwoLayerNet net = TwoLayerNet::init(2, 8, 1, Activation::sigmoid, 16);
  TrainConfig tc = sgd_config(50, 17);
  tc.lr0 = 1e6;
  tc.cosine = false;
  EXPECT_THROW(train(net, data, tc), NonFiniteLoss);
}

TEST(Train, ConfigValidation) {
  const auto data = regression_data(10, 1);
  TwoLayerNet net = TwoLayerNet::init(2, 4, 1, Activation::relu, 1);
  TrainConfig tc;
  tc.lr0 = 0.0;
  EXPECT_THROW(train(net, data, tc), std::invalid_argument);
  tc.lr0 = 1e-3;
  tc.epochs = 0;
  EXPECT_THROW(train(net, data, tc), std::invalid_argument);
}

TEST(Train, BatchTrajectoryDependsOnlyOnSeed) {
  const auto data = regression_data(200, 18);
  TwoLayerNet a = TwoLayerNet::init(2, 8, 1, Activation::relu, 19), b = a;
  TrainConfig tc = sgd_config(3, 20);
  const auto ha = train(a, data, tc), hb = train(b, data, tc);
  EXPECT_EQ(ha.train_loss, hb.train_loss);
  EXPECT_EQ(a.W1, b.W1);
}
