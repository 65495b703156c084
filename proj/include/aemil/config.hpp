#ifndef AEMIL_CONFIG_HPP
#define AEMIL_CONFIG_HPP

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "data.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "objectives.hpp"

namespace aemil {

// Every knob of one training run. Parsed from flat `key = value` text with
// `#` comments; unknown keys fail at startup.
struct TrainConfig {
  // data source
  bool use_synthetic = true;
  std::string manifest_path;
  SyntheticConfig synth;
  SplitRatios ratios;

  // model
  ArchitectureSpec arch;

  // objective
  RegKind reg = RegKind::Aem;
  double lambda0 = 0.1;
  bool cwa = false;
  double lambda_min = 0.0;

  // optimization
  std::uint64_t epochs = 50;
  double lr0 = 1e-4;
  double lr_min = 0.0;

  // run control
  std::uint64_t seed = 1;
  double subsample = 0.0; // keep fraction; 0 disables the augmentation
  std::uint64_t eval_every = 1;
  std::string out_dir;
  bool select_best_val = false;

  bool operator==(const TrainConfig&) const = default;

  void validate() const {
    if (use_synthetic) {
      synth.validate();
    } else if (manifest_path.empty()) {
      throw ConfigError("config: data = manifest requires manifest key");
    }
    if (arch.embed_dim < 1 || arch.attn_hidden < 1 || arch.n_classes < 1)
      throw ConfigError("config: architecture dims must be >= 1");
    if (arch.variant == AttentionVariant::MultiHead && arch.n_heads < 1)
      throw ConfigError("config: n_heads must be >= 1");
    if (lambda0 < 0.0 || lambda_min < 0.0)
      throw ConfigError("config: lambda values must be >= 0");
    if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
    if (lr0 <= 0.0) throw ConfigError("config: lr must be > 0");
    if (lr_min < 0.0) throw ConfigError("config: lr_min must be >= 0");
    if (subsample < 0.0 || subsample > 1.0)
      throw ConfigError("config: subsample must be in [0, 1]");
    if (eval_every < 1) throw ConfigError("config: eval_every must be >= 1");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& v, const std::string& key) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError("config: bad number '" + v + "' for key " + key);
  return x;
}

inline std::uint64_t parse_uint(const std::string& v, const std::string& key) {
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError("config: bad integer '" + v + "' for key " + key);
  return x;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad bool '" + v + "' for key " + key);
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace detail

inline TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " is not 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config: empty key or value on line " +
                        std::to_string(lineno));

    if (key == "data") {
      if (value == "synthetic")
        cfg.use_synthetic = true;
      else if (value == "manifest")
        cfg.use_synthetic = false;
      else
        throw ConfigError("config: data must be synthetic or manifest");
    } else if (key == "manifest") {
      cfg.manifest_path = value;
    } else if (key == "bags_per_class") {
      cfg.synth.bags_per_class = detail::parse_uint(value, key);
    } else if (key == "input_dim") {
      cfg.synth.dim = detail::parse_uint(value, key);
    } else if (key == "bag_min") {
      cfg.synth.n_min = detail::parse_uint(value, key);
    } else if (key == "bag_max") {
      cfg.synth.n_max = detail::parse_uint(value, key);
    } else if (key == "witness_rate") {
      cfg.synth.witness_rate = detail::parse_double(value, key);
    } else if (key == "separation") {
      cfg.synth.separation = detail::parse_double(value, key);
    } else if (key == "noise") {
      cfg.synth.noise = detail::parse_double(value, key);
    } else if (key == "flip_prob") {
      cfg.synth.flip_prob = detail::parse_double(value, key);
    } else if (key == "split_train") {
      cfg.ratios.train = detail::parse_double(value, key);
    } else if (key == "split_val") {
      cfg.ratios.val = detail::parse_double(value, key);
    } else if (key == "split_test") {
      cfg.ratios.test = detail::parse_double(value, key);
    } else if (key == "variant") {
      if (value == "gated")
        cfg.arch.variant = AttentionVariant::Gated;
      else if (value == "dualstream")
        cfg.arch.variant = AttentionVariant::DualStream;
      else if (value == "multihead")
        cfg.arch.variant = AttentionVariant::MultiHead;
      else
        throw ConfigError("config: unknown variant '" + value + "'");
    } else if (key == "embed_dim") {
      cfg.arch.embed_dim = detail::parse_uint(value, key);
    } else if (key == "attn_hidden") {
      cfg.arch.attn_hidden = detail::parse_uint(value, key);
    } else if (key == "n_heads") {
      cfg.arch.n_heads = detail::parse_uint(value, key);
    } else if (key == "n_classes") {
      cfg.arch.n_classes = detail::parse_uint(value, key);
    } else if (key == "reg") {
      if (value == "none")
        cfg.reg = RegKind::None;
      else if (value == "aem")
        cfg.reg = RegKind::Aem;
      else if (value == "kl")
        cfg.reg = RegKind::Kl;
      else
        throw ConfigError("config: unknown reg '" + value + "'");
    } else if (key == "lambda") {
      cfg.lambda0 = detail::parse_double(value, key);
    } else if (key == "cwa") {
      cfg.cwa = detail::parse_bool(value, key);
    } else if (key == "lambda_min") {
      cfg.lambda_min = detail::parse_double(value, key);
    } else if (key == "epochs") {
      cfg.epochs = detail::parse_uint(value, key);
    } else if (key == "lr") {
      cfg.lr0 = detail::parse_double(value, key);
    } else if (key == "lr_min") {
      cfg.lr_min = detail::parse_double(value, key);
    } else if (key == "seed") {
      cfg.seed = detail::parse_uint(value, key);
    } else if (key == "subsample") {
      cfg.subsample = detail::parse_double(value, key);
    } else if (key == "eval_every") {
      cfg.eval_every = detail::parse_uint(value, key);
    } else if (key == "out_dir") {
      cfg.out_dir = value;
    } else if (key == "select_best_val") {
      cfg.select_best_val = detail::parse_bool(value, key);
    } else {
      throw ConfigError("config: unknown key '" + key + "' on line " +
                        std::to_string(lineno));
    }
  }
  // with no regularizer the weight is meaningless; record it as 0
  if (cfg.reg == RegKind::None) cfg.lambda0 = 0.0;
  cfg.synth.n_classes = cfg.arch.n_classes;
  cfg.arch.input_dim = cfg.synth.dim;
  cfg.validate();
  return cfg;
}

inline TrainConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

// Canonical text form; parse(serialize(cfg)) == cfg.
inline std::string serialize_config(const TrainConfig& cfg) {
  using detail::fmt_double;
  std::ostringstream os;
  os << "data = " << (cfg.use_synthetic ? "synthetic" : "manifest") << "\n";
  if (!cfg.manifest_path.empty()) os << "manifest = " << cfg.manifest_path << "\n";
  os << "bags_per_class = " << cfg.synth.bags_per_class << "\n"
     << "input_dim = " << cfg.synth.dim << "\n"
     << "bag_min = " << cfg.synth.n_min << "\n"
     << "bag_max = " << cfg.synth.n_max << "\n"
     << "witness_rate = " << fmt_double(cfg.synth.witness_rate) << "\n"
     << "separation = " << fmt_double(cfg.synth.separation) << "\n"
     << "noise = " << fmt_double(cfg.synth.noise) << "\n"
     << "flip_prob = " << fmt_double(cfg.synth.flip_prob) << "\n"
     << "split_train = " << fmt_double(cfg.ratios.train) << "\n"
     << "split_val = " << fmt_double(cfg.ratios.val) << "\n"
     << "split_test = " << fmt_double(cfg.ratios.test) << "\n"
     << "variant = " << variant_name(cfg.arch.variant) << "\n"
     << "embed_dim = " << cfg.arch.embed_dim << "\n"
     << "attn_hidden = " << cfg.arch.attn_hidden << "\n"
     << "n_heads = " << cfg.arch.n_heads << "\n"
     << "n_classes = " << cfg.arch.n_classes << "\n"
     << "reg = " << reg_kind_name(cfg.reg) << "\n"
     << "lambda = " << fmt_double(cfg.lambda0) << "\n"
     << "cwa = " << (cfg.cwa ? "true" : "false") << "\n"
     << "lambda_min = " << fmt_double(cfg.lambda_min) << "\n"
     << "epochs = " << cfg.epochs << "\n"
     << "lr = " << fmt_double(cfg.lr0) << "\n"
     << "lr_min = " << fmt_double(cfg.lr_min) << "\n"
     << "seed = " << cfg.seed << "\n"
     << "subsample = " << fmt_double(cfg.subsample) << "\n"
     << "eval_every = " << cfg.eval_every << "\n";
  if (!cfg.out_dir.empty()) os << "out_dir = " << cfg.out_dir << "\n";
  os << "select_best_val = " << (cfg.select_best_val ? "true" : "false") << "\n";
  return os.str();
}

// 32-byte digest of the canonical config text: four FNV-1a 64-bit lanes with
// distinct offset bases. A format guard, not a cryptographic hash. The
// output directory is excluded so relocated runs still match their
// checkpoints.
inline std::array<unsigned char, 32> config_hash(const TrainConfig& cfg) {
  TrainConfig keyed = cfg;
  keyed.out_dir.clear();
  const std::string text = serialize_config(keyed);
  constexpr std::uint64_t kPrime = 0x100000001B3ULL;
  constexpr std::uint64_t kBasis = 0xCBF29CE484222325ULL;
  constexpr std::uint64_t kLane[4] = {0ULL, 0x9E3779B97F4A7C15ULL,
                                      0xD1B54A32D192ED03ULL,
                                      0x2545F4914F6CDD1DULL};
  std::array<unsigned char, 32> digest{};
  for (int lane = 0; lane < 4; ++lane) {
    std::uint64_t h = kBasis ^ kLane[lane];
    for (unsigned char byte : text) {
      h ^= byte;
      h *= kPrime;
    }
    for (int i = 0; i < 8; ++i)
      digest[lane * 8 + i] = static_cast<unsigned char>(h >> (8 * i));
  }
  return digest;
}

} // namespace aemil

#endif
