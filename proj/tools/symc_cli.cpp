// symc: moment-matching compression of symmetric object sets, plus the
// experiment drivers. Exit codes: 0 success, 1 usage error, 2 tolerance
// breach or unreachable target.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "symc/symc.hpp"

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
  bool paper_scale = false;
  std::size_t workers = 1;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Base seed");
  sub->add_option("--out", c.out, "Output path (default: stdout)");
  sub->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  sub->add_flag("--paper-scale", c.paper_scale, "Use full-size configurations (long runtime)");
  sub->add_option("--workers", c.workers, "Concurrent jobs (0: all cores)");
}

void emit(const symc::ExperimentReport& rep, const Common& c) {
  if (c.out.empty())
    rep.write(std::cout, c.format);
  else
    rep.save(c.out, c.format);
}

void warn_paper_scale(const Common& c) {
  if (c.paper_scale) std::cerr << "warning: --paper-scale configurations can run for many hours\n";
}

symc::Optimizer parse_rule(const std::string& s) { return symc::optimizer_from_string(s); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moment-matching compression of permutation-symmetric object sets"};
  app.require_subcommand(1);
  Common common;
  int status = 0;

  // ---- compress ----
  auto* cmp = app.add_subcommand("compress", "Compress a weighted set (CSV header c,w_1,...,w_m)");
  std::string cmp_in;
  symc::CompressionConfig ccfg;
  std::string cmp_moments;
  cmp->add_option("input", cmp_in, "Input weighted-set CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("--k", ccfg.k, "Moment order")->check(CLI::PositiveNumber);
  cmp->add_option("--target", ccfg.target_size, "Target support size d'")->required();
  cmp->add_option("--tol", ccfg.tol, "Relative moment tolerance");
  cmp->add_option("--switch-factor", ccfg.switch_factor, "Greedy rounds once support <= factor * d'");
  cmp->add_flag("--exact-nn", ccfg.exact_nn, "Brute-force neighbor search at every size");
  cmp->add_option("--moments", cmp_moments, "Also write the input/output moment vectors as JSON");
  add_common(cmp, common);
  cmp->footer("Output: weighted-set CSV with the same rows as the input; compressed-away rows carry c = 0.\n"
              "A one-line JSON summary goes to stderr.");
  cmp->callback([&] {
    ccfg.seed = common.seed;
    const symc::WeightedSet ws = symc::load_weighted_set(cmp_in);
    symc::Compression res;
    try {
      res = symc::compress(ws, ccfg);
    } catch (const symc::ToleranceError& e) {
      std::cerr << "tolerance breach: " << e.what() << '\n';
      status = 2;
      return;
    }
    if (common.out.empty())
      symc::write_weighted_set_csv(std::cout, res.set);
    else
      symc::save_weighted_set(common.out, res.set);
    if (!cmp_moments.empty()) {
      std::ofstream f(cmp_moments);
      f << symc::json{{"input", symc::to_json(symc::moment_vector(ws, ccfg.k, false))},
                      {"output", symc::to_json(symc::moment_vector(res.set, ccfg.k, false))}}
               .dump(2)
        << '\n';
    }
    std::cerr << symc::json{{"initial_support", res.report.initial_support},
                            {"final_support", res.report.final_support},
                            {"iterations", res.report.iterations},
                            {"max_moment_residual", res.report.max_moment_residual},
                            {"kmeans_rounds", res.kmeans_rounds},
                            {"greedy_rounds", res.greedy_rounds},
                            {"target_reached", res.target_reached},
                            {"warnings", res.warnings}}
                     .dump()
              << '\n';
    if (!res.target_reached) status = 2;
  });

  // ---- error-scaling ----
  auto* es = app.add_subcommand("error-scaling", "Compression error of the sigmoid probe function versus d");
  symc::ErrorScalingConfig escfg;
  es->add_option("--ms", escfg.ms, "Object dimensions");
  es->add_option("--ks", escfg.ks, "Moment orders");
  es->add_option("--ds", escfg.ds, "Set sizes");
  es->add_option("--trials", escfg.trials, "Trials per cell");
  es->add_option("--fraction", escfg.fraction, "Compress d to max(ceil(fraction d), N)");
  es->add_option("--probes", escfg.n_probe, "Probe vectors");
  add_common(es, common);
  es->footer("Columns: m,k,d,target,trials,seed,median_error,q25_error,q75_error,mean_final_support,floored,in_fit\n"
             "Fits: alpha per (m,k) from log-log least squares on unflagged median errors.");
  es->callback([&] {
    warn_paper_scale(common);
    if (common.paper_scale) {
      escfg.ms = {2, 3, 4};
      escfg.ks = {1, 2, 3, 4, 5};
      escfg.ds = {1000, 3000, 10000, 30000, 100000};
    }
    escfg.seed = common.seed;
    escfg.workers = common.workers;
    emit(symc::run_error_scaling(escfg), common);
  });

  // ---- compress-dataset ----
  auto* cd = app.add_subcommand("compress-dataset", "Train on full, compressed and subsampled teacher-student data");
  symc::DatasetCompressionConfig dcfg;
  std::size_t dc_seeds = dcfg.seeds.size();
  cd->add_option("--d", dcfg.d, "Training set size");
  cd->add_option("--d-prime", dcfg.d_prime, "Compressed / subsample size");
  cd->add_option("--k", dcfg.k, "Moment order");
  cd->add_option("--seeds", dc_seeds, "Number of seeds, starting at --seed");
  cd->add_option("--epochs", dcfg.train.epochs, "Epochs (ceil(d / batch) steps each, every arm)");
  cd->add_option("--batch-size", dcfg.train.batch_size, "Minibatch size");
  cd->add_option("--lr", dcfg.train.lr0, "Initial AdamW learning rate");
  cd->add_option("--eval-every", dcfg.train.eval_every, "Epochs between test evaluations");
  cd->add_option("--test-size", dcfg.test_size, "Noise-free test set size");
  cd->add_option("--noise-sd", dcfg.noise_sd, "Label noise standard deviation");
  add_common(cd, common);
  cd->footer("Columns: seed,arm,epoch,train_loss,test_mse  (arm 0 full, 1 compressed, 2 subsample)");
  cd->callback([&] {
    warn_paper_scale(common);
    if (common.paper_scale) dcfg.test_size = 100000;
    dcfg.seeds = symc::seed_range(common.seed, dc_seeds);
    dcfg.workers = common.workers;
    emit(symc::run_dataset_compression(dcfg), common);
  });

  // ---- lth ----
  auto* lth = app.add_subcommand("lth", "Width compression at init, then compressed training dynamics");
  symc::LthConfig lcfg;
  std::size_t lth_seeds = lcfg.seeds.size();
  std::vector<std::string> rules{"sgd", "adamw"};
  double lr_sgd = lcfg.lr[symc::Optimizer::sgd], lr_mom = lcfg.lr[symc::Optimizer::sgd_momentum],
         lr_adamw = lcfg.lr[symc::Optimizer::adamw];
  lth->add_option("--width", lcfg.width, "Original width");
  lth->add_option("--width-prime", lcfg.width_prime, "Compressed width");
  lth->add_option("--k", lcfg.k, "Moment order");
  lth->add_option("--rules", rules, "Update rules")->check(CLI::IsMember({"sgd", "sgd_momentum", "adamw"}));
  lth->add_option("--lr-sgd", lr_sgd, "Initial SGD learning rate");
  lth->add_option("--lr-sgd-momentum", lr_mom, "Initial SGD+momentum learning rate");
  lth->add_option("--lr-adamw", lr_adamw, "Initial AdamW learning rate");
  lth->add_option("--seeds", lth_seeds, "Number of seeds, starting at --seed");
  lth->add_option("--epochs", lcfg.epochs, "Epochs");
  lth->add_option("--batch-size", lcfg.batch_size, "Minibatch size");
  lth->add_option("--train-size", lcfg.train_size, "Training set size");
  lth->add_option("--test-size", lcfg.test_size, "Noise-free test set size");
  lth->add_option("--eval-every", lcfg.eval_every, "Epochs between test evaluations");
  add_common(lth, common);
  lth->footer("Columns: seed,rule,arm,epoch,train_loss,test_mse\n"
              "rule 0 sgd, 1 sgd_momentum, 2 adamw; arm 0 original, 1 compressed, 2 random subnet");
  lth->callback([&] {
    warn_paper_scale(common);
    if (common.paper_scale) {
      lcfg.width = 10000;
      lcfg.width_prime = 1000;
      lcfg.train_size = 100000;
      lcfg.test_size = 100000;
      lcfg.eval_every = 50;
      lcfg.epochs = 1000;
    }
    lcfg.rules.clear();
    for (auto& r : rules) lcfg.rules.push_back(parse_rule(r));
    lcfg.lr[symc::Optimizer::sgd] = lr_sgd;
    lcfg.lr[symc::Optimizer::sgd_momentum] = lr_mom;
    lcfg.lr[symc::Optimizer::adamw] = lr_adamw;
    lcfg.seeds = symc::seed_range(common.seed, lth_seeds);
    lcfg.workers = common.workers;
    emit(symc::run_lth(lcfg), common);
  });

  // ---- nsl ----
  auto* nsl = app.add_subcommand("nsl", "Loss scaling with d -> ceil(16 sqrt d) compression");
  std::string nsl_mode = "dataset";
  std::vector<std::size_t> nsl_ds;
  std::size_t nsl_seeds = 5, nsl_epochs = 0;
  std::size_t nsl_k = 6;
  std::size_t nsl_train = 0, nsl_test = 0;
  nsl->add_option("--mode", nsl_mode, "Compressed objects")->check(CLI::IsMember({"dataset", "width"}));
  nsl->add_option("--ds", nsl_ds, "Sizes d (dataset size or width)");
  nsl->add_option("--k", nsl_k, "Moment order");
  nsl->add_option("--seeds", nsl_seeds, "Number of seeds, starting at --seed");
  nsl->add_option("--epochs", nsl_epochs, "Epochs (dataset mode: one batch each)");
  nsl->add_option("--train-size", nsl_train, "Training set size (width mode)");
  nsl->add_option("--test-size", nsl_test, "Noise-free test set size");
  add_common(nsl, common);
  nsl->footer("Columns: seed,d,arm,objects,test_mse,flagged  (arm 0 original, 1 compressed)\n"
              "Summary: exponent_ratio = alpha(compressed vs d') / alpha(original vs d)");
  nsl->callback([&] {
    warn_paper_scale(common);
    symc::NslConfig n = nsl_mode == "width" ? symc::nsl_width_defaults() : symc::NslConfig{};
    if (common.paper_scale) {
      n.seeds = symc::seed_range(0, 10);
      if (n.mode == symc::NslMode::width) {
        n.train_size = 20000;
        n.train.epochs = 2000;
      } else {
        n.ds = {1000, 3000, 10000, 30000, 100000};
      }
    }
    if (!nsl_ds.empty()) n.ds = nsl_ds;
    if (nsl_epochs) n.train.epochs = nsl_epochs;
    if (nsl_train) n.train_size = nsl_train;
    if (nsl_test) n.test_size = nsl_test;
    n.k = nsl_k;
    n.seeds = symc::seed_range(common.seed, nsl_seeds);
    n.workers = common.workers;
    emit(symc::run_nsl(n), common);
  });

  // ---- grad-check ----
  auto* gc = app.add_subcommand("grad-check", "Backprop versus central differences on a random net");
  std::string act = "sigmoid";
  std::size_t gc_in = 2, gc_width = 16, gc_out = 1, gc_batch = 32;
  double gc_eps = 1e-6, gc_tol = 1e-5;
  gc->add_option("--activation", act, "Hidden activation")->check(CLI::IsMember({"relu", "sigmoid"}));
  gc->add_option("--in-dim", gc_in, "Input dimension");
  gc->add_option("--width", gc_width, "Hidden width");
  gc->add_option("--out-dim", gc_out, "Output dimension");
  gc->add_option("--batch", gc_batch, "Batch rows");
  gc->add_option("--eps", gc_eps, "Central-difference step, in [1e-7, 1e-4]");
  gc->add_option("--tol", gc_tol, "Pass threshold on the max relative error");
  add_common(gc, common);
  gc->footer("Columns: seed,max_rel_error,pass   (exit 2 if the threshold is exceeded)");
  gc->callback([&] {
    const auto a = symc::activation_from_string(act);
    const symc::TwoLayerNet net = symc::TwoLayerNet::init(gc_in, gc_width, gc_out, a, common.seed);
    const Eigen::MatrixXd x = symc::kink_safe_inputs(net, gc_batch, symc::derive_seed(common.seed, {1}));
    symc::Rng rng(symc::derive_seed(common.seed, {2}));
    Eigen::MatrixXd t(static_cast<Eigen::Index>(gc_batch), static_cast<Eigen::Index>(gc_out));
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
    const double err = symc::finite_diff_grad_check(net, x, t, gc_eps);
    symc::ExperimentReport rep;
    rep.experiment = "grad-check";
    rep.config = {{"activation", act}, {"in_dim", gc_in}, {"width", gc_width}, {"out_dim", gc_out},
                  {"batch", gc_batch}, {"eps", gc_eps},   {"tol", gc_tol},     {"seed", common.seed}};
    rep.columns = {"seed", "max_rel_error", "pass"};
    rep.add_row({static_cast<double>(common.seed), err, err <= gc_tol ? 1.0 : 0.0});
    emit(rep, common);
    if (!(err <= gc_tol)) status = 2;
  });

  // ---- selftest ----
  auto* st = app.add_subcommand("selftest", "Quick numerical sanity checks");
  add_common(st, common);
  st->footer("Columns: check,value,threshold,pass   (checks: 0 moments, 1 support, 2 bessel, 3 fold, 4 gradient)");
  st->callback([&] {
    symc::ExperimentReport rep;
    rep.experiment = "selftest";
    rep.config = {{"seed", common.seed}};
    rep.metadata = {{"checks", {"moment_residual", "support_minus_N", "bessel_recurrence", "fold_identity",
                                "sigmoid_grad_check"}}};
    rep.columns = {"check", "value", "threshold", "pass"};
    bool ok = true;
    auto row = [&](int id, double v, double thr) {
      const bool p = v <= thr;
      ok = ok && p;
      rep.add_row({static_cast<double>(id), v, thr, p ? 1.0 : 0.0});
    };
    symc::Rng rng(common.seed);
    std::vector<double> pts(3 * 600);
    for (auto& v : pts) v = rng.uniform(-1.0, 1.0);
    const symc::WeightedSet ws = symc::WeightedSet::uniform(3, pts);
    symc::CompressionConfig cc;
    cc.k = 3;
    cc.target_size = 40;
    cc.seed = common.seed;
    const auto comp = symc::compress(ws, cc);
    row(0, comp.report.max_moment_residual, 1e-8);
    row(1, static_cast<double>(comp.set.support_size()) - 40.0, 0.0);
    double rec = 0.0;
    for (double x = 0.5; x <= 40.0; x += 0.5)
      for (int n = 1; n < 20; ++n) {
        const double lhs = symc::bessel_j(n - 1, x) + symc::bessel_j(n + 1, x), rhs = 2.0 * n / x * symc::bessel_j(n, x);
        rec = std::max(rec, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
      }
    row(2, rec, 1e-9);
    symc::TwoLayerNet net = symc::TwoLayerNet::init(2, 64, 1, symc::Activation::relu, common.seed);
    for (Eigen::Index j = 0; j < net.c.size(); ++j) net.c[j] = rng.uniform(0.0, 3.0);
    Eigen::MatrixXd x(100, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
    row(3, (symc::forward(net, x) - symc::forward(symc::fold(net), x)).cwiseAbs().maxCoeff(), 1e-12);
    const auto sig = symc::TwoLayerNet::init(2, 8, 1, symc::Activation::sigmoid, common.seed);
    Eigen::MatrixXd t = Eigen::MatrixXd::Constant(100, 1, 0.3);
    row(4, symc::finite_diff_grad_check(sig, x, t, 1e-6), 1e-5);
    rep.summary = {{"pass", ok}};
    emit(rep, common);
    if (!ok) status = 2;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const symc::ToleranceError& e) {
    std::cerr << "tolerance breach: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return status;
}
