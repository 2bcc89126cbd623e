#pragma once

// The four experiment drivers. Each is a pure function of its config: every
// random draw comes from derive_seed(seed, cell keys), so cells can run on
// any worker in any order and a single cell can be replayed on its own.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "symc/compressor.hpp"
#include "symc/data.hpp"
#include "symc/dataset.hpp"
#include "symc/nn.hpp"
#include "symc/report.hpp"
#include "symc/symfunc.hpp"

namespace symc {

inline json to_json(const TrainConfig& c) {
  return json{{"optimizer", to_string(c.optimizer)},
              {"lr0", c.lr0},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"batches_per_epoch", c.batches_per_epoch},
              {"sampling", c.sampling == Sampling::iid ? "iid" : "shuffle"},
              {"cosine", c.cosine},
              {"momentum", c.momentum},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"eps", c.eps},
              {"weight_decay", c.weight_decay},
              {"grad_rescale", c.grad_rescale},
              {"eval_every", c.eval_every}};
}

inline std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> s(count);
  for (std::size_t i = 0; i < count; ++i) s[i] = first + i;
  return s;
}

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline double variance(const Eigen::VectorXd& v) { return (v.array() - v.mean()).square().mean(); }

// stream tags for derive_seed
constexpr std::uint64_t kPoints = 1, kProbes = 2, kCompress = 3, kInit = 4, kBatches = 5, kTest = 6, kSubset = 7,
                        kData = 8;

/// k distinct indices out of n, in increasing order.
inline std::vector<std::size_t> random_subset(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) std::swap(perm[i], perm[i + rng.index(n - i)]);
  perm.resize(k);
  std::sort(perm.begin(), perm.end());
  return perm;
}

inline double last(const std::vector<double>& v) { return v.empty() ? std::nan("") : v.back(); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Error scaling of the sigmoid probe function under compression.

struct ErrorScalingConfig {
  std::vector<std::size_t> ms{2};
  std::vector<std::size_t> ks{1, 2, 3};
  std::vector<std::size_t> ds{256, 512, 1024, 2048, 4096, 8192};
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  std::size_t n_probe = 10;
  double fraction = 0.1;  // d' = max(ceil(fraction d), N)
  double tol = 1e-8;
  double switch_factor = 4.0;
  std::size_t workers = 1;
};

struct ErrorScalingTrial {
  double error = 0.0;
  std::size_t target = 0;
  std::size_t final_support = 0;
  bool floored = false;  // N > ceil(fraction d): target raised to N
  bool no_compression = false;  // N >= d: nothing to compress
};

/// One trial of one (m, k, d) cell. Points and probes depend on (m, d, trial)
/// only, so all orders k see the same inputs.
inline ErrorScalingTrial error_scaling_trial(std::size_t m, std::size_t k, std::size_t d, std::size_t trial,
                                             const ErrorScalingConfig& cfg) {
  const std::uint64_t ts = derive_seed(cfg.seed, {m, d, trial});
  Rng rng(derive_seed(ts, {detail::kPoints}));
  std::vector<double> pts(d * m);
  for (auto& v : pts) v = rng.uniform(-1.0, 1.0);
  const WeightedSet ws = WeightedSet::uniform(m, std::move(pts));
  const ProbeFunction pf = make_probes(m, cfg.n_probe, derive_seed(ts, {detail::kProbes}));

  const std::size_t N = n_basis(m, k);
  const auto frac = static_cast<std::size_t>(std::ceil(cfg.fraction * static_cast<double>(d)));
  ErrorScalingTrial t;
  t.target = std::max(frac, N);
  t.floored = N > frac;
  t.no_compression = N >= d;
  if (t.no_compression) {
    t.final_support = d;
    return t;
  }
  CompressionConfig cc;
  cc.k = k;
  cc.target_size = t.target;
  cc.tol = cfg.tol;
  cc.switch_factor = cfg.switch_factor;
  cc.seed = derive_seed(ts, {detail::kCompress, k});
  const Compression comp = compress(ws, cc);
  t.final_support = comp.set.support_size();
  t.error = compression_error(ws, comp.set, [&](const WeightedSet& s) { return eval_probe(s, pf); });
  return t;
}

inline ExperimentReport run_error_scaling(const ErrorScalingConfig& cfg) {
  detail::Stopwatch sw;
  struct Job {
    std::size_t m, k, d, trial;
  };
  std::vector<Job> jobs;
  for (auto m : cfg.ms)
    for (auto k : cfg.ks)
      for (auto d : cfg.ds)
        for (std::size_t t = 0; t < cfg.trials; ++t) jobs.push_back({m, k, d, t});
  std::vector<ErrorScalingTrial> res(jobs.size());
  parallel_for(jobs.size(), cfg.workers, [&](std::size_t i) {
    res[i] = error_scaling_trial(jobs[i].m, jobs[i].k, jobs[i].d, jobs[i].trial, cfg);
  });

  ExperimentReport rep;
  rep.experiment = "error-scaling";
  rep.config = {{"ms", cfg.ms},           {"ks", cfg.ks},           {"ds", cfg.ds},
                {"trials", cfg.trials},   {"seed", cfg.seed},       {"n_probe", cfg.n_probe},
                {"fraction", cfg.fraction}, {"tol", cfg.tol},       {"switch_factor", cfg.switch_factor}};
  rep.metadata = {{"point_distribution", "uniform[-1,1]^m"},
                  {"probe_distribution", "standard normal"},
                  {"aggregate", "median over trials, spread as q25/q75"},
                  {"cell_seed", "derive_seed(seed, {m, d, trial})"}};
  rep.columns = {"m", "k", "d", "target", "trials", "seed", "median_error", "q25_error", "q75_error",
                 "mean_final_support", "floored", "in_fit"};

  std::size_t i = 0;
  for (auto m : cfg.ms) {
    for (auto k : cfg.ks) {
      std::vector<std::pair<double, double>> pts;
      for (auto d : cfg.ds) {
        std::vector<double> errs;
        double supp = 0.0;
        const ErrorScalingTrial first = res[i];
        for (std::size_t t = 0; t < cfg.trials; ++t, ++i) {
          errs.push_back(res[i].error);
          supp += static_cast<double>(res[i].final_support);
        }
        const double med = quantile(errs, 0.5);
        const bool flagged = first.floored || first.no_compression;
        const bool in_fit = !flagged && med > 0.0;
        if (in_fit) pts.emplace_back(static_cast<double>(d), med);
        rep.add_row({static_cast<double>(m), static_cast<double>(k), static_cast<double>(d),
                     static_cast<double>(first.target), static_cast<double>(cfg.trials), static_cast<double>(cfg.seed),
                     med, quantile(errs, 0.25), quantile(errs, 0.75), supp / static_cast<double>(cfg.trials),
                     flagged ? 1.0 : 0.0, in_fit ? 1.0 : 0.0});
      }
      json fit = {{"m", m}, {"k", k}, {"reference_alpha", static_cast<double>(k + 1) / static_cast<double>(m) + 0.5}};
      if (pts.size() >= 3)
        fit.update(to_json(fit_power_law(pts)));
      else
        fit["alpha"] = nullptr;
      rep.fits.push_back(fit);
    }
  }
  rep.wall_time_s = sw.seconds();
  return rep;
}

// ---------------------------------------------------------------------------
// Training on a compressed dataset versus the full one and a random subset.

enum DatasetArm { kFullArm = 0, kCompressedArm = 1, kSubsetArm = 2 };

struct DatasetCompressionConfig {
  std::size_t d = 10000;
  std::size_t d_prime = 1000;
  std::size_t k = 5;
  std::vector<std::uint64_t> seeds = seed_range(0, 10);
  double noise_sd = 3.0;
  std::size_t width = 50;
  std::size_t test_size = 20000;
  double tol = 1e-8;
  TrainConfig train = [] {
    TrainConfig t;
    t.optimizer = Optimizer::adamw;
    t.lr0 = 1e-3;
    t.epochs = 100;
    t.batch_size = 256;
    t.eval_every = 10;
    return t;
  }();
  std::size_t workers = 1;
};

struct DatasetCompressionSeedResult {
  std::vector<std::vector<double>> rows;
  double final_mse[3] = {0, 0, 0};
  double signal_variance = 0.0;
  double moment_residual = 0.0;
  std::size_t compressed_support = 0;
};

inline DatasetCompressionSeedResult dataset_compression_seed(const DatasetCompressionConfig& cfg, std::uint64_t seed) {
  const TeacherStudent ts = make_teacher_student(cfg.d, seed, cfg.noise_sd);
  const LabeledDataset test = teacher_test_set(ts.teacher, cfg.test_size, derive_seed(seed, {detail::kTest}));

  CompressionConfig cc;
  cc.k = cfg.k;
  cc.target_size = cfg.d_prime;
  cc.tol = cfg.tol;
  cc.seed = derive_seed(seed, {detail::kCompress});
  const Compression comp = compress(ts.data.to_weighted_set(), cc);

  DatasetCompressionSeedResult out;
  out.signal_variance = detail::variance(test.y);
  out.moment_residual = comp.report.max_moment_residual;
  out.compressed_support = comp.set.support_size();

  const LabeledDataset arms[3] = {
      ts.data, LabeledDataset::from_weighted_set(comp.set, true),
      ts.data.subset(detail::random_subset(cfg.d, std::min(cfg.d_prime, cfg.d), derive_seed(seed, {detail::kSubset})))};

  // equal step budgets: an epoch is ceil(d / batch) steps for every arm
  TrainConfig tc = cfg.train;
  if (tc.batches_per_epoch == 0) tc.batches_per_epoch = (cfg.d + tc.batch_size - 1) / tc.batch_size;
  tc.batch_seed = derive_seed(seed, {detail::kBatches});
  tc.sampling = Sampling::iid;
  for (int arm = 0; arm < 3; ++arm) {
    TwoLayerNet net = TwoLayerNet::init(2, cfg.width, 1, Activation::relu, derive_seed(seed, {detail::kInit}));
    const TrainHistory h = train(net, arms[arm], tc, &test);
    for (std::size_t e = 0; e < h.epoch.size(); ++e)
      out.rows.push_back({static_cast<double>(seed), static_cast<double>(arm), static_cast<double>(h.epoch[e]),
                          h.train_loss[e], h.test_loss[e]});
    out.final_mse[arm] = detail::last(h.test_loss);
  }
  return out;
}

inline ExperimentReport run_dataset_compression(const DatasetCompressionConfig& cfg) {
  if (cfg.d_prime > cfg.d) throw std::invalid_argument("run_dataset_compression: d' must not exceed d");
  detail::Stopwatch sw;
  std::vector<DatasetCompressionSeedResult> res(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.workers, [&](std::size_t i) { res[i] = dataset_compression_seed(cfg, cfg.seeds[i]); });

  ExperimentReport rep;
  rep.experiment = "compress-dataset";
  rep.config = {{"d", cfg.d},         {"d_prime", cfg.d_prime},   {"k", cfg.k},   {"seeds", cfg.seeds},
                {"noise_sd", cfg.noise_sd}, {"width", cfg.width}, {"test_size", cfg.test_size},
                {"tol", cfg.tol},     {"train", to_json(cfg.train)}};
  rep.metadata = {{"arms", {"full", "compressed", "subsample"}},
                  {"objects", "(x1, x2, y)"},
                  {"teacher", "width-50 ReLU, uniform +-1/sqrt(fan_in) init"},
                  {"test_set", "noise-free teacher outputs on fresh uniform inputs"}};
  rep.columns = {"seed", "arm", "epoch", "train_loss", "test_mse"};
  std::size_t wins = 0;
  json per_seed = json::array();
  for (std::size_t i = 0; i < res.size(); ++i) {
    for (auto& r : res[i].rows) rep.add_row(r);
    const bool win = res[i].final_mse[kCompressedArm] <= res[i].final_mse[kSubsetArm];
    wins += win;
    per_seed.push_back({{"seed", cfg.seeds[i]},
                        {"final_test_mse", {res[i].final_mse[0], res[i].final_mse[1], res[i].final_mse[2]}},
                        {"compressed_le_subsample", win},
                        {"signal_variance", res[i].signal_variance},
                        {"compressed_support", res[i].compressed_support},
                        {"moment_residual", res[i].moment_residual}});
  }
  rep.summary = {{"per_seed", per_seed}, {"compressed_le_subsample", wins}, {"n_seeds", res.size()}};
  rep.wall_time_s = sw.seconds();
  return rep;
}

// ---------------------------------------------------------------------------
// Width compression at initialization followed by compressed dynamics.

enum WidthArm { kOriginalNet = 0, kCompressedNet = 1, kSubnet = 2 };

struct LthConfig {
  std::size_t width = 4096;
  std::size_t width_prime = 512;
  std::size_t k = 5;
  std::vector<Optimizer> rules{Optimizer::sgd, Optimizer::adamw};
  std::map<Optimizer, double> lr{{Optimizer::sgd, 1e-2}, {Optimizer::sgd_momentum, 1e-2}, {Optimizer::adamw, 1e-3}};
  std::vector<std::uint64_t> seeds = seed_range(0, 10);
  std::size_t train_size = 20000;
  std::size_t test_size = 20000;
  double noise_sd = 0.2;
  std::size_t epochs = 100;
  std::size_t batch_size = 512;
  std::size_t batches_per_epoch = 0;  // 0: ceil(train_size / batch_size)
  std::size_t eval_every = 10;
  bool reweight_subnet = true;  // subnet neurons carry c = width / width'
  double tol = 1e-8;
  std::size_t workers = 1;
};

struct LthRunResult {
  std::vector<std::vector<double>> rows;
  double final_mse[3] = {0, 0, 0};
};

struct LthSeedSetup {
  LabeledDataset data, test;
  TwoLayerNet nets[3];
  double moment_residual = 0.0;
};

inline LthSeedSetup lth_setup(const LthConfig& cfg, std::uint64_t seed) {
  LthSeedSetup s;
  s.data = make_harmonic_dataset(cfg.train_size, derive_seed(seed, {detail::kData}), cfg.noise_sd);
  s.test = harmonic_test_set(cfg.test_size, derive_seed(seed, {detail::kTest}));
  const TwoLayerNet net = TwoLayerNet::init(2, cfg.width, 1, Activation::relu, derive_seed(seed, {detail::kInit}));
  CompressionConfig cc;
  cc.k = cfg.k;
  cc.target_size = cfg.width_prime;
  cc.tol = cfg.tol;
  cc.seed = derive_seed(seed, {detail::kCompress});
  WidthCompression wc = compress_width(net, cc);
  s.moment_residual = wc.info.report.max_moment_residual;

  const auto keep = detail::random_subset(cfg.width, std::min(cfg.width_prime, cfg.width),
                                          derive_seed(seed, {detail::kSubset}));
  WeightedSet objs = neuron_objects(net);
  std::vector<double> w(cfg.width, 0.0);
  const double c = cfg.reweight_subnet ? static_cast<double>(cfg.width) / static_cast<double>(keep.size()) : 1.0;
  for (auto j : keep) w[j] = c;
  objs.set_weights(std::move(w));

  s.nets[kOriginalNet] = net;
  s.nets[kCompressedNet] = std::move(wc.net);
  s.nets[kSubnet] = net_from_neuron_objects(objs, 2, net.activation, true);
  return s;
}

inline LthRunResult lth_run(const LthConfig& cfg, const LthSeedSetup& s, std::uint64_t seed, Optimizer rule) {
  TrainConfig tc;
  tc.optimizer = rule;
  tc.lr0 = cfg.lr.at(rule);
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.batches_per_epoch = cfg.batches_per_epoch;
  tc.sampling = Sampling::shuffle;
  tc.grad_rescale = true;
  tc.eval_every = cfg.eval_every;
  tc.batch_seed = derive_seed(seed, {detail::kBatches});  // shared by all arms
  LthRunResult out;
  for (int arm = 0; arm < 3; ++arm) {
    TwoLayerNet net = s.nets[arm];
    const TrainHistory h = train(net, s.data, tc, &s.test);
    for (std::size_t e = 0; e < h.epoch.size(); ++e)
      out.rows.push_back({static_cast<double>(seed), static_cast<double>(rule), static_cast<double>(arm),
                          static_cast<double>(h.epoch[e]), h.train_loss[e], h.test_loss[e]});
    out.final_mse[arm] = detail::last(h.test_loss);
  }
  return out;
}

inline ExperimentReport run_lth(const LthConfig& cfg) {
  if (cfg.width_prime > cfg.width) throw std::invalid_argument("run_lth: width' must not exceed width");
  detail::Stopwatch sw;
  const std::size_t R = cfg.rules.size();
  std::vector<LthRunResult> res(cfg.seeds.size() * R);
  std::vector<double> residuals(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.workers, [&](std::size_t i) {
    const LthSeedSetup s = lth_setup(cfg, cfg.seeds[i]);
    residuals[i] = s.moment_residual;
    for (std::size_t r = 0; r < R; ++r) res[i * R + r] = lth_run(cfg, s, cfg.seeds[i], cfg.rules[r]);
  });

  ExperimentReport rep;
  rep.experiment = "lth";
  json rules = json::array(), lrs = json::object();
  for (auto r : cfg.rules) {
    rules.push_back(to_string(r));
    lrs[to_string(r)] = cfg.lr.at(r);
  }
  rep.config = {{"width", cfg.width},         {"width_prime", cfg.width_prime},
                {"k", cfg.k},                 {"rules", rules},
                {"lr0", lrs},                 {"seeds", cfg.seeds},
                {"train_size", cfg.train_size}, {"test_size", cfg.test_size},
                {"noise_sd", cfg.noise_sd},   {"epochs", cfg.epochs},
                {"batch_size", cfg.batch_size}, {"batches_per_epoch", cfg.batches_per_epoch},
                {"eval_every", cfg.eval_every}, {"reweight_subnet", cfg.reweight_subnet},
                {"tol", cfg.tol}};
  rep.metadata = {{"arms", {"original", "compressed", "random_subnet"}},
                  {"rule_codes", {{"sgd", 0}, {"sgd_momentum", 1}, {"adamw", 2}}},
                  {"objects", "(w1, w2, b, v) per hidden neuron"},
                  {"schedule", "cosine to zero over all steps"},
                  {"batches", "shared shuffle trajectory across arms"}};
  rep.columns = {"seed", "rule", "arm", "epoch", "train_loss", "test_mse"};
  json per_rule = json::object();
  for (std::size_t r = 0; r < R; ++r) {
    std::size_t closer = 0, within = 0;
    json per_seed = json::array();
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
      const auto& f = res[i * R + r].final_mse;
      const bool c = std::abs(f[1] - f[0]) < std::abs(f[2] - f[0]);
      const bool w = std::abs(f[1] - f[0]) <= 0.15 * f[0];
      closer += c;
      within += w;
      per_seed.push_back({{"seed", cfg.seeds[i]},
                          {"final_test_mse", {f[0], f[1], f[2]}},
                          {"compressed_closer", c},
                          {"compressed_within_15pct", w},
                          {"moment_residual", residuals[i]}});
    }
    per_rule[to_string(cfg.rules[r])] = {
        {"per_seed", per_seed}, {"compressed_closer", closer}, {"within_15pct", within}, {"n_seeds", cfg.seeds.size()}};
  }
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
    for (std::size_t r = 0; r < R; ++r)
      for (auto& row : res[i * R + r].rows) rep.add_row(row);
  rep.summary = per_rule;
  rep.wall_time_s = sw.seconds();
  return rep;
}

// ---------------------------------------------------------------------------
// Loss scaling with and without d -> ceil(scale sqrt(d)) compression.

enum class NslMode { dataset, width };

struct NslConfig {
  NslMode mode = NslMode::dataset;
  std::vector<std::size_t> ds{1000, 2000, 4000, 8000};
  std::size_t k = 6;
  double scale = 16.0;
  std::vector<std::uint64_t> seeds = seed_range(0, 5);
  std::size_t width = 50;  // student width in dataset mode
  double noise_sd = 3.0;   // dataset mode; width mode uses noise_sd_width
  double noise_sd_width = 0.2;
  std::size_t train_size = 4000;  // width mode
  std::size_t test_size = 20000;
  TrainConfig train = [] {
    TrainConfig t;
    t.optimizer = Optimizer::adamw;
    t.lr0 = 1e-3;
    t.epochs = 2048;
    t.batch_size = 512;
    t.batches_per_epoch = 1;
    return t;
  }();
  double tol = 1e-8;
  std::size_t workers = 1;
};

/// Desk defaults for width mode.
inline NslConfig nsl_width_defaults() {
  NslConfig c;
  c.mode = NslMode::width;
  c.ds = {512, 1024, 2048, 4096};
  c.train.epochs = 40;
  c.train.batch_size = 128;
  c.train.batches_per_epoch = 0;
  return c;
}

inline std::size_t nsl_compressed_size(std::size_t d, double scale) {
  return static_cast<std::size_t>(std::ceil(scale * std::sqrt(static_cast<double>(d))));
}

struct NslCell {
  double mse[2] = {0, 0};
  std::size_t objects[2] = {0, 0};
  bool flagged = false;
};

inline NslCell nsl_cell(const NslConfig& cfg, std::size_t d, std::uint64_t seed) {
  NslCell cell;
  const std::size_t dp = nsl_compressed_size(d, cfg.scale);
  const std::size_t m = cfg.mode == NslMode::dataset ? 3 : 4;
  cell.flagged = dp >= d || dp < n_basis(m, cfg.k);
  cell.objects[0] = d;
  cell.objects[1] = std::min(dp, d);

  CompressionConfig cc;
  cc.k = cfg.k;
  cc.target_size = dp;
  cc.tol = cfg.tol;
  cc.seed = derive_seed(seed, {detail::kCompress, d});
  TrainConfig tc = cfg.train;
  tc.batch_seed = derive_seed(seed, {detail::kBatches, d});

  if (cfg.mode == NslMode::dataset) {
    const TeacherStudent ts = make_teacher_student(d, seed, cfg.noise_sd);
    const LabeledDataset test = teacher_test_set(ts.teacher, cfg.test_size, derive_seed(seed, {detail::kTest}));
    const LabeledDataset comp = LabeledDataset::from_weighted_set(compress(ts.data.to_weighted_set(), cc).set, true);
    cell.objects[1] = comp.size();
    const TwoLayerNet init = TwoLayerNet::init(2, cfg.width, 1, Activation::relu, derive_seed(seed, {detail::kInit, d}));
    tc.sampling = Sampling::iid;
    const LabeledDataset* arms[2] = {&ts.data, &comp};
    for (int a = 0; a < 2; ++a) {
      TwoLayerNet net = init;
      cell.mse[a] = detail::last(train(net, *arms[a], tc, &test).test_loss);
    }
  } else {
    const LabeledDataset data = make_harmonic_dataset(cfg.train_size, derive_seed(seed, {detail::kData}), cfg.noise_sd_width);
    const LabeledDataset test = harmonic_test_set(cfg.test_size, derive_seed(seed, {detail::kTest}));
    const TwoLayerNet init = TwoLayerNet::init(2, d, 1, Activation::relu, derive_seed(seed, {detail::kInit, d}));
    const TwoLayerNet nets[2] = {init, compress_width(init, cc).net};
    cell.objects[1] = nets[1].width();
    tc.sampling = Sampling::shuffle;
    tc.grad_rescale = true;
    for (int a = 0; a < 2; ++a) {
      TwoLayerNet net = nets[a];
      cell.mse[a] = detail::last(train(net, data, tc, &test).test_loss);
    }
  }
  return cell;
}

inline ExperimentReport run_nsl(const NslConfig& cfg) {
  detail::Stopwatch sw;
  const std::size_t S = cfg.seeds.size();
  std::vector<NslCell> res(cfg.ds.size() * S);
  parallel_for(res.size(), cfg.workers, [&](std::size_t i) { res[i] = nsl_cell(cfg, cfg.ds[i / S], cfg.seeds[i % S]); });

  ExperimentReport rep;
  rep.experiment = "nsl";
  rep.config = {{"mode", cfg.mode == NslMode::dataset ? "dataset" : "width"},
                {"ds", cfg.ds},
                {"k", cfg.k},
                {"scale", cfg.scale},
                {"seeds", cfg.seeds},
                {"width", cfg.width},
                {"noise_sd", cfg.mode == NslMode::dataset ? cfg.noise_sd : cfg.noise_sd_width},
                {"train_size", cfg.train_size},
                {"test_size", cfg.test_size},
                {"tol", cfg.tol},
                {"train", to_json(cfg.train)}};
  rep.metadata = {{"arms", {"original", "compressed"}},
                  {"compressed_size", "ceil(scale * sqrt(d))"},
                  {"aggregate", "mean test MSE over seeds"},
                  {"fit_x", "original arm: d; compressed arm: d'"}};
  rep.columns = {"seed", "d", "arm", "objects", "test_mse", "flagged"};

  std::vector<std::pair<double, double>> pts[2];
  json cells = json::array();
  for (std::size_t di = 0; di < cfg.ds.size(); ++di) {
    double mean[2] = {0, 0};
    bool flagged = false;
    for (std::size_t s = 0; s < S; ++s) {
      const NslCell& c = res[di * S + s];
      flagged |= c.flagged;
      for (int a = 0; a < 2; ++a) {
        rep.add_row({static_cast<double>(cfg.seeds[s]), static_cast<double>(cfg.ds[di]), static_cast<double>(a),
                     static_cast<double>(c.objects[a]), c.mse[a], c.flagged ? 1.0 : 0.0});
        mean[a] += c.mse[a] / static_cast<double>(S);
      }
    }
    const double x[2] = {static_cast<double>(cfg.ds[di]),
                         static_cast<double>(nsl_compressed_size(cfg.ds[di], cfg.scale))};
    if (!flagged)
      for (int a = 0; a < 2; ++a)
        if (mean[a] > 0.0) pts[a].emplace_back(x[a], mean[a]);
    cells.push_back({{"d", cfg.ds[di]}, {"d_prime", x[1]}, {"mean_test_mse", {mean[0], mean[1]}}, {"flagged", flagged}});
  }
  json ratio = nullptr;
  double alpha[2] = {0, 0};
  bool have = true;
  for (int a = 0; a < 2; ++a) {
    json fit = {{"arm", a == 0 ? "original" : "compressed"}};
    if (pts[a].size() >= 3) {
      const PowerLawFit f = fit_power_law(pts[a]);
      fit.update(to_json(f));
      alpha[a] = f.alpha;
    } else {
      fit["alpha"] = nullptr;
      have = false;
    }
    rep.fits.push_back(fit);
  }
  if (have && alpha[0] != 0.0) ratio = alpha[1] / alpha[0];
  rep.summary = {{"cells", cells}, {"exponent_ratio", ratio}};
  rep.wall_time_s = sw.seconds();
  return rep;
}

}  // namespace symc
