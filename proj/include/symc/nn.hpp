#pragma once

// Weighted two-layer perceptron f(x) = sum_j c_j v_j act(w_j . x + b_j),
// its neuron objects, width compression, weight folding and training with
// the compressed-dynamics gradient rule.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "symc/compressor.hpp"
#include "symc/dataset.hpp"
#include "symc/moments.hpp"
#include "symc/random.hpp"

namespace symc {

enum class Activation { relu, sigmoid };

inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "sigmoid"; }
inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  throw std::invalid_argument("unknown activation: " + s);
}

struct TwoLayerNet {
  Activation activation = Activation::relu;
  Eigen::MatrixXd W1;  // width x in_dim, row j is w_j
  Eigen::VectorXd b1;  // width
  Eigen::MatrixXd W2;  // out_dim x width, column j is v_j
  Eigen::VectorXd c;   // width, neuron multiplicities

  std::size_t in_dim() const { return static_cast<std::size_t>(W1.cols()); }
  std::size_t width() const { return static_cast<std::size_t>(W1.rows()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(W2.rows()); }

  /// Uniformly weighted net, every parameter uniform in +-1/sqrt(fan_in).
  static TwoLayerNet init(std::size_t in_dim, std::size_t width, std::size_t out_dim, Activation act,
                          std::uint64_t seed) {
    Rng rng(seed);
    TwoLayerNet net;
    net.activation = act;
    const auto w = static_cast<Eigen::Index>(width);
    const double a1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
    const double a2 = 1.0 / std::sqrt(static_cast<double>(width));
    net.W1.resize(w, static_cast<Eigen::Index>(in_dim));
    net.b1.resize(w);
    net.W2.resize(static_cast<Eigen::Index>(out_dim), w);
    for (Eigen::Index j = 0; j < w; ++j) {
      for (Eigen::Index a = 0; a < net.W1.cols(); ++a) net.W1(j, a) = rng.uniform(-a1, a1);
      net.b1[j] = rng.uniform(-a1, a1);
    }
    for (Eigen::Index o = 0; o < net.W2.rows(); ++o)
      for (Eigen::Index j = 0; j < w; ++j) net.W2(o, j) = rng.uniform(-a2, a2);
    net.c = Eigen::VectorXd::Ones(w);
    return net;
  }
};

namespace detail {

inline Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::relu) return z.cwiseMax(0.0);
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

inline Eigen::MatrixXd preactivation(const TwoLayerNet& net, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z = x * net.W1.transpose();
  z.rowwise() += net.b1.transpose();
  return z;
}

}  // namespace detail

/// Rows of x are inputs; rows of the result are outputs.
inline Eigen::MatrixXd forward(const TwoLayerNet& net, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.cols()) != net.in_dim()) throw std::invalid_argument("forward: input dimension mismatch");
  const Eigen::MatrixXd vc = net.W2 * net.c.asDiagonal();
  Eigen::MatrixXd y(x.rows(), vc.rows());
  constexpr Eigen::Index kChunk = 1024;  // bounds the rows x width activation block
  for (Eigen::Index r0 = 0; r0 < x.rows(); r0 += kChunk) {
    const Eigen::Index n = std::min(kChunk, x.rows() - r0);
    const Eigen::MatrixXd h = detail::activate(detail::preactivation(net, x.middleRows(r0, n)), net.activation);
    y.middleRows(r0, n).noalias() = h * vc.transpose();
  }
  return y;
}

/// Neuron j as the point (w_j, b_j, v_j) with weight c_j.
inline WeightedSet neuron_objects(const TwoLayerNet& net) {
  const std::size_t in = net.in_dim(), out = net.out_dim(), m = in + 1 + out;
  std::vector<double> pts(net.width() * m);
  for (std::size_t j = 0; j < net.width(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    double* p = pts.data() + j * m;
    for (std::size_t a = 0; a < in; ++a) p[a] = net.W1(jj, static_cast<Eigen::Index>(a));
    p[in] = net.b1[jj];
    for (std::size_t o = 0; o < out; ++o) p[in + 1 + o] = net.W2(static_cast<Eigen::Index>(o), jj);
  }
  return WeightedSet(m, std::move(pts), std::vector<double>(net.c.data(), net.c.data() + net.c.size()));
}

/// Inverse of neuron_objects. With drop_zero, only supported neurons are kept.
inline TwoLayerNet net_from_neuron_objects(const WeightedSet& ws, std::size_t in_dim, Activation act,
                                           bool drop_zero = false) {
  if (ws.dim() < in_dim + 2) throw std::invalid_argument("net_from_neuron_objects: object dimension too small");
  const std::size_t out = ws.dim() - in_dim - 1;
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < ws.size(); ++j)
    if (!drop_zero || ws.weight(j) > 0.0) keep.push_back(j);
  const auto w = static_cast<Eigen::Index>(keep.size());
  TwoLayerNet net;
  net.activation = act;
  net.W1.resize(w, static_cast<Eigen::Index>(in_dim));
  net.b1.resize(w);
  net.W2.resize(static_cast<Eigen::Index>(out), w);
  net.c.resize(w);
  for (Eigen::Index j = 0; j < w; ++j) {
    auto p = ws.point(keep[static_cast<std::size_t>(j)]);
    for (std::size_t a = 0; a < in_dim; ++a) net.W1(j, static_cast<Eigen::Index>(a)) = p[a];
    net.b1[j] = p[in_dim];
    for (std::size_t o = 0; o < out; ++o) net.W2(static_cast<Eigen::Index>(o), j) = p[in_dim + 1 + o];
    net.c[j] = ws.weight(keep[static_cast<std::size_t>(j)]);
  }
  return net;
}

/// v_j <- c_j v_j, c_j <- 1. The forward map is unchanged.
inline TwoLayerNet fold(const TwoLayerNet& net) {
  TwoLayerNet out = net;
  out.W2 = net.W2 * net.c.asDiagonal();
  out.c.setOnes();
  return out;
}

struct WidthCompression {
  TwoLayerNet net;
  Compression info;
};

/// Moment-matches the neuron objects down to cfg.target_size neurons and
/// keeps only the supported ones, each carrying its new multiplicity.
inline WidthCompression compress_width(const TwoLayerNet& net, const CompressionConfig& cfg) {
  WidthCompression out;
  out.info = compress(neuron_objects(net), cfg);
  out.net = net_from_neuron_objects(out.info.set, net.in_dim(), net.activation, true);
  return out;
}

struct Gradients {
  Eigen::MatrixXd W1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd W2;
  double loss = 0.0;
};

/// Scratch buffers reused across steps; a wide net's batch x width
/// activations are too large to reallocate every step.
struct GradWorkspace {
  Eigen::MatrixXd h, dz, vc, resid;
};

/// Loss and raw gradients of the MSE (mean over rows and outputs).
inline void mse_gradients(const TwoLayerNet& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& target, Gradients& g,
                          GradWorkspace& ws) {
  ws.h.noalias() = x * net.W1.transpose();
  ws.h.rowwise() += net.b1.transpose();
  if (net.activation == Activation::relu)
    ws.h = ws.h.cwiseMax(0.0);
  else
    ws.h = (1.0 + (-ws.h.array()).exp()).inverse().matrix();
  ws.vc.noalias() = net.W2 * net.c.asDiagonal();
  ws.resid.noalias() = ws.h * ws.vc.transpose();
  ws.resid -= target;
  const double denom = static_cast<double>(ws.resid.size());
  g.loss = ws.resid.squaredNorm() / denom;
  ws.resid *= 2.0 / denom;  // dL/dy from here on

  g.W2.noalias() = ws.resid.transpose() * ws.h;
  g.W2 = g.W2 * net.c.asDiagonal();
  ws.dz.noalias() = ws.resid * ws.vc;
  if (net.activation == Activation::relu)
    ws.dz = (ws.h.array() > 0.0).select(ws.dz, 0.0);
  else
    ws.dz.array() *= ws.h.array() * (1.0 - ws.h.array());
  g.W1.noalias() = ws.dz.transpose() * x;
  g.b1 = ws.dz.colwise().sum().transpose();
}

inline Gradients mse_gradients(const TwoLayerNet& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& target) {
  Gradients g;
  GradWorkspace ws;
  mse_gradients(net, x, target, g, ws);
  return g;
}

inline double mse(const TwoLayerNet& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  return (forward(net, x).col(0) - y).squaredNorm() / static_cast<double>(y.size());
}

enum class Optimizer { sgd, sgd_momentum, adamw };

inline const char* to_string(Optimizer o) {
  switch (o) {
    case Optimizer::sgd: return "sgd";
    case Optimizer::sgd_momentum: return "sgd_momentum";
    case Optimizer::adamw: return "adamw";
  }
  return "?";
}
inline Optimizer optimizer_from_string(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "sgd_momentum") return Optimizer::sgd_momentum;
  if (s == "adamw") return Optimizer::adamw;
  throw std::invalid_argument("unknown optimizer: " + s);
}

struct TrainConfig {
  Optimizer optimizer = Optimizer::adamw;
  double lr0 = 1e-3;
  std::size_t epochs = 1;
  std::size_t batch_size = 128;
  std::size_t batches_per_epoch = 0;  // 0: ceil(rows / batch_size)
  Sampling sampling = Sampling::iid;
  bool cosine = true;  // lr0 * (1 + cos(pi t / T)) / 2 over all T steps
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  bool grad_rescale = true;  // raw gradient of neuron j times 1/c_j
  std::uint64_t batch_seed = 0;
  std::size_t eval_every = 0;  // epochs between test evaluations, 0: final only
};

struct OptState {
  Eigen::MatrixXd m_W1, v_W1;
  Eigen::VectorXd m_b1, v_b1;
  Eigen::MatrixXd m_W2, v_W2;  // m_* doubles as the momentum buffer
  std::size_t step = 0;

  explicit OptState(const TwoLayerNet& net)
      : m_W1(Eigen::MatrixXd::Zero(net.W1.rows(), net.W1.cols())),
        v_W1(Eigen::MatrixXd::Zero(net.W1.rows(), net.W1.cols())),
        m_b1(Eigen::VectorXd::Zero(net.b1.size())),
        v_b1(Eigen::VectorXd::Zero(net.b1.size())),
        m_W2(Eigen::MatrixXd::Zero(net.W2.rows(), net.W2.cols())),
        v_W2(Eigen::MatrixXd::Zero(net.W2.rows(), net.W2.cols())) {}
};

namespace detail {

template <typename P, typename G>
void apply_update(const TrainConfig& cfg, double lr, std::size_t step, P& param, const G& grad, P& m, P& v) {
  switch (cfg.optimizer) {
    case Optimizer::sgd:
      param -= lr * grad;
      break;
    case Optimizer::sgd_momentum:
      if (step == 1)
        m = grad;
      else
        m = cfg.momentum * m + grad;
      param -= lr * m;
      break;
    case Optimizer::adamw: {
      param *= (1.0 - lr * cfg.weight_decay);
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      const auto denom = (v.array().sqrt() / std::sqrt(bc2) + cfg.eps);
      param.array() -= (lr / bc1) * m.array() / denom;
      break;
    }
  }
}

}  // namespace detail

/// One optimizer step from raw gradients. Neurons with c_j = 0 do not move.
inline void optimizer_step(TwoLayerNet& net, OptState& st, Gradients g, const TrainConfig& cfg, double lr) {
  const Eigen::Index w = net.W1.rows();
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(w);
  if (cfg.grad_rescale)
    for (Eigen::Index j = 0; j < w; ++j)
      if (net.c[j] > 0.0) scale[j] = 1.0 / net.c[j];
  g.W1 = scale.asDiagonal() * g.W1;
  g.b1 = g.b1.cwiseProduct(scale);
  g.W2 = g.W2 * scale.asDiagonal();

  const TwoLayerNet before = (net.c.array() == 0.0).any() ? net : TwoLayerNet{};
  ++st.step;
  detail::apply_update(cfg, lr, st.step, net.W1, g.W1, st.m_W1, st.v_W1);
  detail::apply_update(cfg, lr, st.step, net.b1, g.b1, st.m_b1, st.v_b1);
  detail::apply_update(cfg, lr, st.step, net.W2, g.W2, st.m_W2, st.v_W2);
  if (before.W1.size() == 0) return;
  for (Eigen::Index j = 0; j < w; ++j) {
    if (net.c[j] != 0.0) continue;
    net.W1.row(j) = before.W1.row(j);
    net.b1[j] = before.b1[j];
    net.W2.col(j) = before.W2.col(j);
  }
}

inline double cosine_lr(double lr0, std::size_t step, std::size_t total) {
  return lr0 * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(step) / static_cast<double>(total)));
}

struct TrainHistory {
  std::vector<std::size_t> epoch;  // evaluation points, epochs completed
  std::vector<double> train_loss;  // mean minibatch loss over the preceding epoch
  std::vector<double> test_loss;   // NaN without a test set
};

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Minibatch training on MSE. The batch index stream depends only on
/// (data.c, cfg.sampling, cfg.batch_seed), so runs that share those see
/// identical batches.
inline TrainHistory train(TwoLayerNet& net, const LabeledDataset& data, const TrainConfig& cfg,
                          const LabeledDataset* test = nullptr) {
  if (!(cfg.lr0 > 0.0)) throw std::invalid_argument("train: lr0 must be > 0");
  if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (net.out_dim() != 1) throw std::invalid_argument("train: scalar-output nets only");
  if (data.in_dim() != net.in_dim()) throw std::invalid_argument("train: data/net input dimension mismatch");

  const std::size_t per_epoch =
      cfg.batches_per_epoch ? cfg.batches_per_epoch : (data.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = per_epoch * cfg.epochs;
  MinibatchSampler sampler(data.c, cfg.sampling, cfg.batch_seed);
  OptState st(net);
  TrainHistory hist;

  Eigen::MatrixXd xb(static_cast<Eigen::Index>(cfg.batch_size), data.x.cols());
  Eigen::MatrixXd yb(static_cast<Eigen::Index>(cfg.batch_size), 1);
  Gradients g;
  GradWorkspace ws;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b, ++step) {
      const auto idx = sampler.next(cfg.batch_size);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        xb.row(static_cast<Eigen::Index>(r)) = data.x.row(static_cast<Eigen::Index>(idx[r]));
        yb(static_cast<Eigen::Index>(r), 0) = data.y[static_cast<Eigen::Index>(idx[r])];
      }
      mse_gradients(net, xb, yb, g, ws);
      if (!std::isfinite(g.loss))
        throw NonFiniteLoss("train: non-finite loss at step " + std::to_string(step) + " (epoch " +
                            std::to_string(epoch) + ", lr0 " + std::to_string(cfg.lr0) + ")");
      epoch_loss += g.loss;
      const double lr = cfg.cosine ? cosine_lr(cfg.lr0, step, total) : cfg.lr0;
      optimizer_step(net, st, g, cfg, lr);
    }
    const bool record = epoch == cfg.epochs || (cfg.eval_every && epoch % cfg.eval_every == 0);
    if (record) {
      hist.epoch.push_back(epoch);
      hist.train_loss.push_back(epoch_loss / static_cast<double>(per_epoch));
      hist.test_loss.push_back(test ? mse(net, test->x, test->y) : std::numeric_limits<double>::quiet_NaN());
    }
  }
  return hist;
}

/// Largest |g_backprop - g_fd| / max(|g_backprop|, |g_fd|, 1e-4) over all
/// W1, b1, W2 entries, with central differences of step eps.
inline double finite_diff_grad_check(const TwoLayerNet& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& target,
                                     double eps = 1e-6) {
  if (!(eps >= 1e-7 && eps <= 1e-4)) throw std::invalid_argument("finite_diff_grad_check: eps must be in [1e-7, 1e-4]");
  const Gradients g = mse_gradients(net, x, target);
  auto loss = [&](const TwoLayerNet& n) { return (forward(n, x) - target).squaredNorm() / static_cast<double>(target.size()); };
  double worst = 0.0;
  auto check = [&](auto member, const auto& grad) {
    TwoLayerNet probe = net;
    auto& p = probe.*member;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double orig = p.data()[i];
      p.data()[i] = orig + eps;
      const double up = loss(probe);
      p.data()[i] = orig - eps;
      const double down = loss(probe);
      p.data()[i] = orig;
      const double fd = (up - down) / (2.0 * eps);
      const double bp = grad.data()[i];
      worst = std::max(worst, std::abs(bp - fd) / std::max({std::abs(bp), std::abs(fd), 1e-4}));
    }
  };
  check(&TwoLayerNet::W1, g.W1);
  check(&TwoLayerNet::b1, g.b1);
  check(&TwoLayerNet::W2, g.W2);
  return worst;
}

/// n inputs uniform in [-1,1]^in, each resampled until every preactivation
/// is at least `margin` away from the ReLU kink.
inline Eigen::MatrixXd kink_safe_inputs(const TwoLayerNet& net, std::size_t n, std::uint64_t seed,
                                        double margin = 1e-3) {
  Rng rng(seed);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(net.in_dim()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw std::runtime_error("kink_safe_inputs: could not avoid ReLU kinks");
      for (Eigen::Index a = 0; a < x.cols(); ++a) x(r, a) = rng.uniform(-1.0, 1.0);
      const Eigen::VectorXd z = net.W1 * x.row(r).transpose() + net.b1;
      if (z.cwiseAbs().minCoeff() >= margin) break;
    }
  }
  return x;
}

}  // namespace symc
