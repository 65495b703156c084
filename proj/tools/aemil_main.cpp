// Command-line front end: train / eval / sweep / correlate / gen.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aemil/aemil.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> grid;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    const std::string tok =
        csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (tok.empty()) throw aemil::ConfigError("sweep: empty grid entry");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
      throw aemil::ConfigError("sweep: bad grid value '" + tok + "'");
    grid.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (grid.empty()) throw aemil::ConfigError("sweep: empty grid");
  return grid;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    const std::string tok =
        csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0')
      throw aemil::ConfigError("correlate: bad seed '" + tok + "'");
    seeds.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return seeds;
}

int run_train(const std::string& config_path, std::int64_t seed_override,
              const std::string& out_override, const std::string& resume,
              std::uint64_t stop_after) {
  aemil::TrainConfig cfg = aemil::load_config(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (cfg.out_dir.empty()) cfg.out_dir = "out";
  const aemil::TrainResult res =
      aemil::train_run(cfg, cfg.seed, cfg.seed, cfg.out_dir, resume, stop_after);
  const auto& rep = res.final_eval.report;
  std::printf("wrote %s and %s/epochs.csv\n", res.checkpoint_path.c_str(),
              cfg.out_dir.c_str());
  std::printf("final test: auc=%.6f f1=%.6f acc=%.6f mean_entropy=%.6f\n",
              rep.macro_auc, rep.macro_f1, res.final_eval.accuracy,
              rep.mean_attention_entropy);
  return 0;
}

int run_eval(const std::string& ckpt, const std::string& manifest,
             const std::string& split, std::string config_path,
             std::string dump_path) {
  if (config_path.empty()) {
    // the trainer leaves the resolved config next to the checkpoint
    config_path = (fs::path(ckpt).parent_path() / "config.cfg").string();
  }
  aemil::TrainConfig cfg = aemil::load_config(config_path);
  aemil::ModelParams params = aemil::init_params(cfg.arch, 0);
  aemil::AdamState adam = aemil::init_adam(params);
  aemil::Rng rng;
  const aemil::CheckpointHeader header =
      aemil::load_checkpoint(ckpt, params, adam, rng);
  if (header.cfg_hash != aemil::config_hash(cfg))
    throw aemil::ConfigError("eval: checkpoint does not match config " +
                             config_path);

  aemil::TrainConfig data_cfg = cfg;
  data_cfg.use_synthetic = false;
  data_cfg.manifest_path = manifest;
  const aemil::DataBundle bundle = aemil::load_data(data_cfg, cfg.seed);
  const std::vector<std::size_t>* idx = nullptr;
  if (split == "train")
    idx = &bundle.train_idx;
  else if (split == "val")
    idx = &bundle.val_idx;
  else if (split == "test")
    idx = &bundle.test_idx;
  else
    throw aemil::ConfigError("eval: split must be train, val or test");

  const aemil::EvalSummary summary =
      aemil::evaluate_split(params, bundle, *idx, true);
  if (dump_path.empty())
    dump_path = (fs::path(ckpt).parent_path() / "attention_dump.csv").string();
  aemil::write_attention_dump(summary, dump_path);

  const auto& rep = summary.report;
  std::printf("split=%s bags=%zu\n", split.c_str(), idx->size());
  std::printf("macro_auc=%.9g\nmacro_f1=%.9g\naccuracy=%.9g\nmean_ce=%.9g\n",
              rep.macro_auc, rep.macro_f1, summary.accuracy, summary.mean_ce);
  for (std::size_t c = 0; c < rep.per_class_auc.size(); ++c)
    std::printf("auc_class_%zu=%.9g\n", c, rep.per_class_auc[c]);
  std::printf("mean_attention_entropy=%.9g\nmean_norm_entropy=%.9g\n",
              rep.mean_attention_entropy, rep.mean_normalized_entropy);
  std::printf("attention dump: %s\n", dump_path.c_str());
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& grid_csv,
              std::size_t seeds, bool cwa, std::size_t jobs,
              const std::string& out_override) {
  aemil::TrainConfig cfg = aemil::load_config(config_path);
  if (cwa) cfg.cwa = true;
  const std::vector<double> grid = parse_grid(grid_csv);
  const aemil::SweepResult res = aemil::sweep_lambda(cfg, grid, seeds, jobs);
  const std::string out_dir = out_override.empty()
                                  ? (cfg.out_dir.empty() ? "out" : cfg.out_dir)
                                  : out_override;
  fs::create_directories(out_dir);
  const std::string path = out_dir + "/sweep.csv";
  std::ofstream os(path);
  os << res.csv_text;
  std::printf("%s", res.csv_text.c_str());
  std::printf("wrote %s (%zu runs)\n", path.c_str(), res.runs.size());
  return 0;
}

int run_correlate(const std::string& config_path, std::size_t seeds,
                  const std::string& seed_list_csv, std::size_t jobs,
                  const std::string& out_override) {
  aemil::TrainConfig cfg = aemil::load_config(config_path);
  std::vector<std::uint64_t> seed_list;
  if (!seed_list_csv.empty()) {
    seed_list = parse_seed_list(seed_list_csv);
    seeds = seed_list.size();
  }
  const aemil::CorrelateResult res =
      aemil::correlate_entropy_auc(cfg, seeds, seed_list, jobs);
  const std::string out_dir = out_override.empty()
                                  ? (cfg.out_dir.empty() ? "out" : cfg.out_dir)
                                  : out_override;
  fs::create_directories(out_dir);
  {
    std::ofstream os(out_dir + "/correlate_pairs.csv");
    os << res.csv_text;
  }
  std::ofstream stat(out_dir + "/correlation.txt");
  if (res.statistic_valid) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "spearman_rho = %.9g\npearson_r = %.9g\nn_seeds = %zu\n",
                  res.spearman_rho, res.pearson_r, res.pairs.size());
    stat << buf;
    std::printf("%s", buf);
  } else {
    stat << "statistic refused: need >= 10 seeds with rank variance\n";
    std::printf("statistic refused: need >= 10 seeds with rank variance (got %zu)\n",
                res.pairs.size());
  }
  std::printf("wrote %s/correlate_pairs.csv\n", out_dir.c_str());
  return 0;
}

// Materializes the synthetic dataset of a config as bag files + manifest so
// eval (or another tool) can consume it from disk.
int run_gen(const std::string& config_path, const std::string& out_dir) {
  aemil::TrainConfig cfg = aemil::load_config(config_path);
  if (!cfg.use_synthetic)
    throw aemil::ConfigError("gen: config does not use synthetic data");
  aemil::SyntheticConfig synth = cfg.synth;
  synth.seed = cfg.seed;
  const std::vector<aemil::Bag> bags = aemil::generate_synthetic(synth);
  const aemil::DatasetSplit split =
      aemil::make_splits(bags, cfg.ratios, aemil::derive_seed(cfg.seed, 0x5917));

  fs::create_directories(fs::path(out_dir) / "bags");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < bags.size(); ++i) index[bags[i].id] = i;

  std::vector<aemil::ManifestEntry> entries;
  auto emit = [&](const std::vector<std::string>& ids, const char* name) {
    for (const auto& id : ids) {
      const aemil::Bag& bag = bags[index.at(id)];
      const std::string rel = "bags/" + bag.id + ".bag";
      aemil::write_bag(bag, (fs::path(out_dir) / rel).string());
      entries.push_back({rel, bag.label, name});
    }
  };
  // manifest rows keep the split-list order so manifest training visits
  // bags in the same sequence as in-memory synthetic training
  emit(split.train, "train");
  emit(split.val, "val");
  emit(split.test, "test");
  const std::string manifest = (fs::path(out_dir) / "manifest.txt").string();
  aemil::write_manifest(entries, manifest);
  std::printf("wrote %zu bags and %s\n", entries.size(), manifest.c_str());
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"attention-MIL training engine with entropy regularization"};
  app.require_subcommand(1);

  std::string config_path, out_dir, resume, ckpt, manifest, dump;
  std::string split = "test", grid, seed_list;
  std::int64_t seed_override = -1;
  std::size_t seeds = 5, jobs = 1;
  std::uint64_t stop_after = 0;
  bool cwa = false;

  CLI::App* train = app.add_subcommand("train", "train one model from a config");
  train->add_option("--config", config_path, "config file")->required();
  train->add_option("--seed", seed_override, "override the config seed");
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--resume", resume, "checkpoint to continue from");
  train->add_option("--stop-after", stop_after,
                    "halt after this many epochs (schedules keep the full horizon)");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  eval->add_option("--ckpt", ckpt, "checkpoint file")->required();
  eval->add_option("--manifest", manifest, "bag manifest")->required();
  eval->add_option("--split", split, "train|val|test (default test)");
  eval->add_option("--config", config_path,
                   "config file (default: config.cfg beside the checkpoint)");
  eval->add_option("--dump", dump, "attention dump path");

  CLI::App* sweep = app.add_subcommand("sweep", "train a lambda grid x seeds");
  sweep->add_option("--config", config_path, "config file")->required();
  sweep->add_option("--grid", grid, "comma-separated lambda values")->required();
  sweep->add_option("--seeds", seeds, "seeds per lambda (default 5)");
  sweep->add_flag("--cwa", cwa, "enable cosine weight annealing");
  sweep->add_option("--jobs", jobs, "parallel workers (default 1)");
  sweep->add_option("--out", out_dir, "output directory");

  CLI::App* corr = app.add_subcommand(
      "correlate", "baseline seed study: attention entropy vs AUC");
  corr->add_option("--config", config_path, "config file")->required();
  corr->add_option("--seeds", seeds, "number of baseline runs")->required();
  corr->add_option("--seed-list", seed_list, "explicit comma-separated seeds");
  corr->add_option("--jobs", jobs, "parallel workers (default 1)");
  corr->add_option("--out", out_dir, "output directory");

  CLI::App* gen = app.add_subcommand("gen", "write a synthetic dataset to disk");
  gen->add_option("--config", config_path, "config file")->required();
  gen->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed())
      return run_train(config_path, seed_override, out_dir, resume, stop_after);
    if (eval->parsed()) return run_eval(ckpt, manifest, split, config_path, dump);
    if (sweep->parsed()) return run_sweep(config_path, grid, seeds, cwa, jobs, out_dir);
    if (corr->parsed()) return run_correlate(config_path, seeds, seed_list, jobs, out_dir);
    if (gen->parsed()) return run_gen(config_path, out_dir);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
