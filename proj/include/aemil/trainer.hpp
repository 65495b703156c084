#ifndef AEMIL_TRAINER_HPP
#define AEMIL_TRAINER_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "checkpoint.hpp"
#include "config.hpp"
#include "data.hpp"
#include "errors.hpp"
#include "gradcheck.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "objectives.hpp"
#include "optimizer.hpp"
#include "rng.hpp"

namespace aemil {

// ---------------------------------------------------------------------------
// Data loading
// ---------------------------------------------------------------------------

struct DataBundle {
  std::vector<Bag> bags;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;
};

// Synthetic data: bags from the seeded generator, stratified split drawn
// from a derived stream. Manifest data: bags read from disk, split taken
// from the manifest column, dims and labels validated against the config.
inline DataBundle load_data(const TrainConfig& cfg, std::uint64_t data_seed) {
  DataBundle bundle;
  if (cfg.use_synthetic) {
    SyntheticConfig synth = cfg.synth;
    synth.seed = data_seed;
    bundle.bags = generate_synthetic(synth);
    const DatasetSplit split =
        make_splits(bundle.bags, cfg.ratios, derive_seed(data_seed, 0x5917));
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < bundle.bags.size(); ++i)
      index[bundle.bags[i].id] = i;
    for (const auto& id : split.train) bundle.train_idx.push_back(index.at(id));
    for (const auto& id : split.val) bundle.val_idx.push_back(index.at(id));
    for (const auto& id : split.test) bundle.test_idx.push_back(index.at(id));
  } else {
    const auto entries = read_manifest(cfg.manifest_path);
    if (entries.empty())
      throw ConfigError("load_data: manifest " + cfg.manifest_path + " is empty");
    const std::filesystem::path dir =
        std::filesystem::path(cfg.manifest_path).parent_path();
    for (const auto& e : entries) {
      Bag bag = read_bag((dir / e.path).string());
      if (bag.label != e.label)
        throw ConfigError("load_data: label mismatch for " + e.path +
                          " (file says " + std::to_string(bag.label) +
                          ", manifest says " + std::to_string(e.label) + ")");
      if (bag.features.cols != cfg.arch.input_dim)
        throw ConfigError("load_data: bag " + e.path + " has dim " +
                          std::to_string(bag.features.cols) +
                          ", config expects " +
                          std::to_string(cfg.arch.input_dim));
      if (bag.label >= cfg.arch.n_classes)
        throw ConfigError("load_data: bag " + e.path + " label " +
                          std::to_string(bag.label) + " >= n_classes " +
                          std::to_string(cfg.arch.n_classes));
      const std::size_t idx = bundle.bags.size();
      bundle.bags.push_back(std::move(bag));
      if (e.split == "train")
        bundle.train_idx.push_back(idx);
      else if (e.split == "val")
        bundle.val_idx.push_back(idx);
      else
        bundle.test_idx.push_back(idx);
    }
  }
  if (bundle.train_idx.empty())
    throw ConfigError("load_data: empty training split");
  return bundle;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalSummary {
  EvalReport report;
  double mean_ce = 0.0;
  double accuracy = 0.0;
  // per-bag attention maps (bag id, weights), filled on request
  std::vector<std::pair<std::string, std::vector<double>>> attention;
};

inline EvalSummary evaluate_split(const ModelParams& params,
                                  const DataBundle& bundle,
                                  const std::vector<std::size_t>& indices,
                                  bool keep_attention = false) {
  if (indices.empty()) throw ConfigError("evaluate_split: empty split");
  const std::size_t c = params.spec.n_classes;
  Matrix probs(indices.size(), c);
  std::vector<std::size_t> preds(indices.size()), labels(indices.size());
  EvalSummary summary;
  std::size_t correct = 0;
  for (std::size_t row = 0; row < indices.size(); ++row) {
    const Bag& bag = bundle.bags[indices[row]];
    const AttentionOutput out = model_forward(bag.features, params);
    const std::vector<double> p = softmax_stable(out.logits);
    std::size_t pred = 0;
    for (std::size_t j = 0; j < c; ++j) {
      probs(row, j) = p[j];
      if (p[j] > p[pred]) pred = j;
    }
    preds[row] = pred;
    labels[row] = bag.label;
    correct += pred == bag.label;
    summary.mean_ce += cross_entropy(out.logits, bag.label).first;
    const double h = attention_entropy(out.weights);
    const std::size_t n = out.weights.size();
    summary.report.mean_attention_entropy += h;
    summary.report.mean_normalized_entropy +=
        n == 1 ? 1.0 : h / std::log(static_cast<double>(n));
    if (keep_attention) summary.attention.emplace_back(bag.id, out.weights);
  }
  const double m = static_cast<double>(indices.size());
  summary.mean_ce /= m;
  summary.accuracy = static_cast<double>(correct) / m;
  summary.report.mean_attention_entropy /= m;
  summary.report.mean_normalized_entropy /= m;
  auto [macro, per_class] = macro_auroc(probs, labels);
  summary.report.macro_auc = macro;
  summary.report.per_class_auc = std::move(per_class);
  summary.report.macro_f1 = macro_f1(preds, labels, c);
  return summary;
}

// Attention dump: `<bag_id>,<N>,<a_1>,...,<a_N>` at 9 significant digits.
inline void write_attention_dump(const EvalSummary& summary,
                                 const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("write_attention_dump: cannot open " + path);
  char buf[32];
  for (const auto& [id, weights] : summary.attention) {
    os << id << "," << weights.size();
    for (double w : weights) {
      std::snprintf(buf, sizeof buf, ",%.9g", w);
      os << buf;
    }
    os << "\n";
  }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

inline constexpr int kEpochCsvSchemaVersion = 1;
inline constexpr const char* kEpochCsvHeader =
    "epoch,lambda,lr,train_ce,train_reg,train_total,test_loss,test_acc,"
    "test_f1,test_auc,test_mean_entropy,test_mean_norm_entropy";

struct EpochRow {
  std::uint64_t epoch = 0; // 1-based, row written after the epoch completes
  double lambda = 0.0;     // weight used during the epoch
  double lr = 0.0;         // learning rate entering the epoch
  double train_ce = 0.0;
  double train_reg = 0.0;
  double train_total = 0.0;
  double test_loss = 0.0; // mean test cross entropy
  double test_acc = 0.0;
  double test_f1 = 0.0;
  double test_auc = 0.0;
  double test_mean_entropy = 0.0;
  double test_mean_norm_entropy = 0.0;

  std::string csv() const {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%llu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g",
                  static_cast<unsigned long long>(epoch), lambda, lr, train_ce,
                  train_reg, train_total, test_loss, test_acc, test_f1, test_auc,
                  test_mean_entropy, test_mean_norm_entropy);
    return buf;
  }
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRow> rows;
  EvalSummary final_eval;
  std::string checkpoint_path; // empty when no out_dir was given
};

// One full training run. Bags are visited one at a time (batch size 1 bag);
// the learning rate follows a per-step cosine, lambda a per-epoch cosine
// when CWA is enabled. With a non-empty out_dir the run writes config.cfg,
// epochs.csv (incrementally) and final.ckpt. Passing resume_ckpt continues
// an earlier run bit-identically; stop_after > 0 halts early (checkpointing
// at that epoch) without changing the schedule horizon.
inline TrainResult train_run(const TrainConfig& cfg, const DataBundle& bundle,
                             std::uint64_t run_seed,
                             const std::string& out_dir = "",
                             const std::string& resume_ckpt = "",
                             std::uint64_t stop_after = 0) {
  cfg.validate();
  ModelParams params = init_params(cfg.arch, run_seed);
  AdamState adam = init_adam(params, AdamConfig{cfg.lr0, 0.9, 0.999, 1e-8});
  Rng train_rng(derive_seed(run_seed, 1));
  const auto cfg_digest = config_hash(cfg);

  std::uint64_t start_epoch = 0;
  if (!resume_ckpt.empty()) {
    const CheckpointHeader header =
        load_checkpoint(resume_ckpt, params, adam, train_rng);
    if (header.cfg_hash != cfg_digest)
      throw ConfigError("resume: checkpoint was produced by a different config");
    start_epoch = header.epoch;
    if (start_epoch > cfg.epochs)
      throw ConfigError("resume: checkpoint is past the configured epochs");
  }

  std::ofstream csv;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream cfg_file(out_dir + "/config.cfg");
    cfg_file << serialize_config(cfg);
    const bool append = !resume_ckpt.empty() &&
                        std::filesystem::exists(out_dir + "/epochs.csv");
    csv.open(out_dir + "/epochs.csv",
             append ? std::ios::app : std::ios::trunc);
    if (!csv) throw FormatError("train: cannot open " + out_dir + "/epochs.csv");
    if (!append) csv << kEpochCsvHeader << "\n" << std::flush;
  }

  if (cfg.select_best_val && bundle.val_idx.empty())
    throw ConfigError("train: select_best_val needs a non-empty val split");

  const std::uint64_t total_steps = cfg.epochs * bundle.train_idx.size();
  const Schedule lr_sched{ScheduleKind::CosineLR, cfg.lr0, cfg.lr_min,
                          total_steps};
  const std::uint64_t end_epoch =
      stop_after == 0 ? cfg.epochs : std::min(stop_after, cfg.epochs);
  if (start_epoch > end_epoch)
    throw ConfigError("train: checkpoint is already past the stop epoch");

  TrainResult result;
  std::vector<std::size_t> order = bundle.train_idx;
  std::vector<std::vector<double>> grad_attention;
  Matrix best_val_params; // flattened snapshot under select_best_val
  double best_val_auc = -1.0;

  for (std::uint64_t epoch = start_epoch; epoch < end_epoch; ++epoch) {
    const double lam =
        lambda_at_epoch(cfg.lambda0, cfg.cwa, cfg.lambda_min, epoch, cfg.epochs);
    const double lr_epoch = cosine_value(lr_sched, adam.t);
    // seeded shuffle of the bag visit order; restarting from train_idx each
    // epoch keeps the order a pure function of the (checkpointed) rng state
    order = bundle.train_idx;
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = train_rng.uniform_int(0, i - 1);
      std::swap(order[i - 1], order[j]);
    }
    double sum_ce = 0.0, sum_reg = 0.0, sum_total = 0.0;
    for (const std::size_t idx : order) {
      const Bag& full = bundle.bags[idx];
      Bag sub;
      const Bag* bag = &full;
      if (cfg.subsample > 0.0) {
        sub = subsample_bag(full, cfg.subsample, train_rng);
        bag = &sub;
      }
      const AttentionOutput out = model_forward(bag->features, params);
      auto [ce, grad_logits] = cross_entropy(out.logits, bag->label);
      const RegResult rr = regularizer_for_variant(out, cfg.reg);
      const LossBreakdown lb = total_loss(ce, rr.value, lam, cfg.reg);
      grad_attention = rr.grad_heads;
      for (auto& head : grad_attention)
        for (double& g : head) g *= lb.lambda;
      params.zero_grad();
      model_backward(out, grad_logits, grad_attention, params);
      adam_step(params, adam, cosine_value(lr_sched, adam.t));
      sum_ce += lb.ce;
      sum_reg += lb.reg;
      sum_total += lb.total;
    }

    const std::uint64_t done = epoch + 1;
    if (done % cfg.eval_every == 0 || done == end_epoch) {
      const EvalSummary test = evaluate_split(params, bundle, bundle.test_idx);
      EpochRow row;
      row.epoch = done;
      row.lambda = lam;
      row.lr = lr_epoch;
      const double n_train = static_cast<double>(order.size());
      row.train_ce = sum_ce / n_train;
      row.train_reg = sum_reg / n_train;
      row.train_total = sum_total / n_train;
      row.test_loss = test.mean_ce;
      row.test_acc = test.accuracy;
      row.test_f1 = test.report.macro_f1;
      row.test_auc = test.report.macro_auc;
      row.test_mean_entropy = test.report.mean_attention_entropy;
      row.test_mean_norm_entropy = test.report.mean_normalized_entropy;
      result.rows.push_back(row);
      if (csv.is_open()) csv << row.csv() << "\n" << std::flush;
    }
    if (cfg.select_best_val) {
      const EvalSummary val = evaluate_split(params, bundle, bundle.val_idx);
      if (val.report.macro_auc > best_val_auc) {
        best_val_auc = val.report.macro_auc;
        const std::vector<double> flat = params.flatten_values();
        best_val_params = Matrix(1, flat.size());
        best_val_params.data = flat;
      }
    }
  }

  if (cfg.select_best_val && best_val_params.size() > 0)
    params.load_values(best_val_params.data);

  result.final_eval = evaluate_split(params, bundle, bundle.test_idx, true);
  if (!out_dir.empty()) {
    result.checkpoint_path = out_dir + "/final.ckpt";
    save_checkpoint(result.checkpoint_path, cfg_digest,
                    static_cast<std::uint32_t>(end_epoch), params, adam,
                    train_rng);
  }
  result.params = std::move(params);
  return result;
}

inline TrainResult train_run(const TrainConfig& cfg, std::uint64_t data_seed,
                             std::uint64_t run_seed,
                             const std::string& out_dir = "",
                             const std::string& resume_ckpt = "",
                             std::uint64_t stop_after = 0) {
  const DataBundle bundle = load_data(cfg, data_seed);
  return train_run(cfg, bundle, run_seed, out_dir, resume_ckpt, stop_after);
}

// ---------------------------------------------------------------------------
// Multi-run commands (sweep, correlate)
// ---------------------------------------------------------------------------

namespace detail {

template <typename Fn>
inline void parallel_runs(std::size_t n, std::size_t jobs, Fn&& fn) {
  if (jobs == 0) jobs = 1;
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  auto worker = [&]() {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

} // namespace detail

inline constexpr const char* kSweepCsvHeader =
    "kind,lambda,cwa,seed,auc,f1,entropy,auc_std,f1_std,entropy_std";

struct SweepRunRow {
  double lambda = 0.0;
  bool cwa = false;
  std::uint64_t seed = 0;
  double auc = 0.0, f1 = 0.0, entropy = 0.0;
};

struct SweepResult {
  std::vector<SweepRunRow> runs; // sorted by (lambda, seed)
  std::string csv_text;
};

// Trains grid x seeds independent runs. Seed index j maps to the derived
// seed hash(master, j) for both data and init, so every lambda sees the
// same dataset/init pairing at a given j and rows are comparable per seed.
inline SweepResult sweep_lambda(const TrainConfig& base,
                                const std::vector<double>& grid,
                                std::size_t n_seeds, std::size_t jobs = 1) {
  if (grid.empty()) throw ConfigError("sweep: empty lambda grid");
  if (n_seeds < 1) throw ConfigError("sweep: need at least one seed");
  for (double g : grid)
    if (g < 0.0) throw ConfigError("sweep: lambda values must be >= 0");

  const std::size_t n_runs = grid.size() * n_seeds;
  std::vector<SweepRunRow> rows(n_runs);
  detail::parallel_runs(n_runs, jobs, [&](std::size_t i) {
    const std::size_t gi = i / n_seeds, si = i % n_seeds;
    TrainConfig cfg = base;
    cfg.lambda0 = grid[gi];
    const std::uint64_t seed = derive_seed(base.seed, si);
    const TrainResult res = train_run(cfg, seed, seed);
    rows[i] = {grid[gi], cfg.cwa, seed, res.final_eval.report.macro_auc,
               res.final_eval.report.macro_f1,
               res.final_eval.report.mean_attention_entropy};
  });
  std::sort(rows.begin(), rows.end(), [](const SweepRunRow& a, const SweepRunRow& b) {
    return a.lambda != b.lambda ? a.lambda < b.lambda : a.seed < b.seed;
  });

  std::string text = std::string(kSweepCsvHeader) + "\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "run,%.9g,%d,%llu,%.9g,%.9g,%.9g,,,\n",
                  r.lambda, r.cwa ? 1 : 0,
                  static_cast<unsigned long long>(r.seed), r.auc, r.f1,
                  r.entropy);
    text += buf;
  }
  for (double g : grid) {
    std::vector<double> aucs, f1s, ents;
    for (const auto& r : rows)
      if (r.lambda == g) {
        aucs.push_back(r.auc);
        f1s.push_back(r.f1);
        ents.push_back(r.entropy);
      }
    const auto [auc_m, auc_s] = detail::mean_std(aucs);
    const auto [f1_m, f1_s] = detail::mean_std(f1s);
    const auto [ent_m, ent_s] = detail::mean_std(ents);
    std::snprintf(buf, sizeof buf,
                  "summary,%.9g,%d,,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", g,
                  base.cwa ? 1 : 0, auc_m, f1_m, ent_m, auc_s, f1_s, ent_s);
    text += buf;
  }
  return {std::move(rows), std::move(text)};
}

inline constexpr const char* kCorrelateCsvHeader =
    "seed,test_mean_norm_entropy,test_auc";

struct CorrelatePair {
  std::uint64_t seed = 0;
  double norm_entropy = 0.0;
  double auc = 0.0;
};

struct CorrelateResult {
  std::vector<CorrelatePair> pairs; // in seed-index order
  bool statistic_valid = false;     // false below 10 seeds or on zero variance
  double spearman_rho = 0.0;
  double pearson_r = 0.0;
  std::string csv_text;
};

// Trains n baseline (no-regularizer) models on one fixed dataset and split,
// varying only the init/shuffle seed, and correlates test attention entropy
// with test macro-AUC across seeds.
inline CorrelateResult correlate_entropy_auc(
    const TrainConfig& base, std::size_t n_seeds,
    const std::vector<std::uint64_t>& explicit_seeds = {},
    std::size_t jobs = 1) {
  std::vector<std::uint64_t> seeds = explicit_seeds;
  if (seeds.empty()) {
    for (std::size_t i = 0; i < n_seeds; ++i)
      seeds.push_back(derive_seed(base.seed, i));
  } else if (seeds.size() != n_seeds) {
    throw ConfigError("correlate: seed list length differs from --seeds");
  }
  if (seeds.empty()) throw ConfigError("correlate: need at least one seed");
  if (seeds.size() > 1 &&
      std::all_of(seeds.begin(), seeds.end(),
                  [&](std::uint64_t s) { return s == seeds.front(); }))
    throw ConfigError("correlate: all seeds identical, runs would be duplicates");

  TrainConfig cfg = base;
  cfg.reg = RegKind::None; // the seed study trains plain baselines
  cfg.lambda0 = 0.0;
  const DataBundle bundle = load_data(cfg, base.seed); // fixed data and split

  CorrelateResult result;
  result.pairs.resize(seeds.size());
  detail::parallel_runs(seeds.size(), jobs, [&](std::size_t i) {
    const TrainResult res = train_run(cfg, bundle, seeds[i]);
    result.pairs[i] = {seeds[i], res.final_eval.report.mean_normalized_entropy,
                       res.final_eval.report.macro_auc};
  });

  result.csv_text = std::string(kCorrelateCsvHeader) + "\n";
  char buf[128];
  std::vector<double> xs, ys;
  for (const auto& p : result.pairs) {
    std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g\n",
                  static_cast<unsigned long long>(p.seed), p.norm_entropy,
                  p.auc);
    result.csv_text += buf;
    xs.push_back(p.norm_entropy);
    ys.push_back(p.auc);
  }
  if (seeds.size() >= 10) {
    try {
      result.spearman_rho = spearman(xs, ys);
      result.pearson_r = pearson(xs, ys);
      result.statistic_valid = true;
    } catch (const MetricError&) {
      result.statistic_valid = false;
    }
  }
  return result;
}

} // namespace aemil

#endif
