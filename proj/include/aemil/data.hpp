#ifndef AEMIL_DATA_HPP
#define AEMIL_DATA_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "rng.hpp"
#include "serialize.hpp"

namespace aemil {

// One MIL example: an NxD instance-feature matrix plus a class label.
struct Bag {
  Matrix features;
  std::size_t label = 0;
  std::string id;
};

struct SyntheticConfig {
  std::size_t n_classes = 2;
  std::size_t dim = 32;
  std::size_t bags_per_class = 50;
  std::size_t n_min = 20;
  std::size_t n_max = 50;
  double witness_rate = 0.1;  // fraction of evidence instances, (0, 1]
  double separation = 2.0;    // class-mean offset along a basis direction
  double noise = 1.0;         // per-feature stddev
  double flip_prob = 0.0;     // label noise, [0, 1)
  std::uint64_t seed = 1;

  void validate() const {
    if (n_classes < 2) throw ConfigError("synthetic: need at least 2 classes");
    if (n_min < 1 || n_min > n_max)
      throw ConfigError("synthetic: bag size range invalid");
    if (witness_rate <= 0.0 || witness_rate > 1.0)
      throw ConfigError("synthetic: witness_rate must be in (0, 1]");
    if (separation <= 0.0) throw ConfigError("synthetic: separation must be > 0");
    if (noise <= 0.0) throw ConfigError("synthetic: noise must be > 0");
    if (flip_prob < 0.0 || flip_prob >= 1.0)
      throw ConfigError("synthetic: flip_prob must be in [0, 1)");
    if (dim < n_classes - 1)
      throw ConfigError("synthetic: dim " + std::to_string(dim) +
                        " too small for " + std::to_string(n_classes) +
                        " basis-direction classes");
  }

  bool operator==(const SyntheticConfig&) const = default;
};

// Class 0 bags are pure background noise; class c >= 1 bags carry
// ceil(witness_rate * N) witness instances shifted by separation along the
// c-th canonical basis direction. Labels flip to a uniformly random other
// class with probability flip_prob. Features are quantized to float32 at
// generation so a bag written to disk reads back bit-identically.
inline std::vector<Bag> generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::vector<Bag> bags;
  bags.reserve(cfg.n_classes * cfg.bags_per_class);
  for (std::size_t cls = 0; cls < cfg.n_classes; ++cls) {
    for (std::size_t b = 0; b < cfg.bags_per_class; ++b) {
      const std::size_t n = rng.uniform_int(cfg.n_min, cfg.n_max);
      const std::size_t witnesses =
          cls == 0 ? 0
                   : static_cast<std::size_t>(
                         std::ceil(cfg.witness_rate * static_cast<double>(n)));
      Bag bag;
      bag.features = Matrix(n, cfg.dim);
      for (std::size_t i = 0; i < n; ++i) {
        const bool witness = i < witnesses;
        for (std::size_t d = 0; d < cfg.dim; ++d) {
          double mean = 0.0;
          if (witness && d == cls - 1) mean = cfg.separation;
          const double value = mean + cfg.noise * rng.normal();
          bag.features(i, d) = static_cast<double>(static_cast<float>(value));
        }
      }
      bag.label = cls;
      if (cfg.flip_prob > 0.0 && rng.uniform() < cfg.flip_prob) {
        const std::size_t other = rng.uniform_int(0, cfg.n_classes - 2);
        bag.label = other >= cls ? other + 1 : other;
      }
      char idbuf[32];
      std::snprintf(idbuf, sizeof idbuf, "c%zu_b%03zu", cls, b);
      bag.id = idbuf;
      bags.push_back(std::move(bag));
    }
  }
  return bags;
}

// Bag file, little-endian:
//   bytes 0-7   magic "MILBAG01"
//   bytes 8-23  u32 N, u32 D, u32 label, u32 reserved = 0
//   bytes 24-   N*D float32, row-major
inline constexpr char kBagMagic[8] = {'M', 'I', 'L', 'B', 'A', 'G', '0', '1'};

inline void write_bag(const Bag& bag, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("write_bag: cannot open " + path);
  io::put_bytes(os, kBagMagic, 8);
  io::put_u32(os, static_cast<std::uint32_t>(bag.features.rows));
  io::put_u32(os, static_cast<std::uint32_t>(bag.features.cols));
  io::put_u32(os, static_cast<std::uint32_t>(bag.label));
  io::put_u32(os, 0);
  for (double v : bag.features.data) io::put_f32(os, static_cast<float>(v));
  if (!os) throw FormatError("write_bag: short write to " + path);
}

inline Bag read_bag(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("read_bag: cannot open " + path);
  char magic[8];
  io::get_bytes(is, magic, 8, "read_bag", 0);
  if (std::memcmp(magic, kBagMagic, 8) != 0)
    throw FormatError("read_bag: bad magic at byte offset 0 in " + path);
  const std::uint32_t n = io::get_u32(is, "read_bag", 8);
  const std::uint32_t d = io::get_u32(is, "read_bag", 12);
  const std::uint32_t label = io::get_u32(is, "read_bag", 16);
  const std::uint32_t reserved = io::get_u32(is, "read_bag", 20);
  if (reserved != 0)
    throw FormatError("read_bag: nonzero reserved field at byte offset 20");
  if (n == 0) throw FormatError("read_bag: bag with zero instances");
  is.seekg(0, std::ios::end);
  const std::size_t actual = static_cast<std::size_t>(is.tellg());
  const std::size_t expected = 24 + static_cast<std::size_t>(n) * d * 4;
  if (actual != expected)
    throw FormatError("read_bag: expected " + std::to_string(expected) +
                      " bytes, file has " + std::to_string(actual));
  is.seekg(24);
  Bag bag;
  bag.features = Matrix(n, d);
  for (std::size_t i = 0; i < bag.features.size(); ++i)
    bag.features.data[i] =
        static_cast<double>(io::get_f32(is, "read_bag", 24 + i * 4));
  bag.label = label;
  // id from the filename stem
  std::size_t slash = path.find_last_of("/\\");
  std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
  const std::size_t dot = stem.rfind('.');
  if (dot != std::string::npos) stem = stem.substr(0, dot);
  bag.id = stem;
  return bag;
}

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  bool operator==(const SplitRatios&) const = default;
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

// Stratified shuffle split. Per-class counts come from largest-remainder
// rounding, so each class deviates from the exact ratio by at most one bag.
inline DatasetSplit make_splits(const std::vector<Bag>& bags,
                                const SplitRatios& ratios, std::uint64_t seed) {
  const double sum = ratios.train + ratios.val + ratios.test;
  if (std::fabs(sum - 1.0) > 1e-9)
    throw ConfigError("make_splits: ratios sum to " + std::to_string(sum));
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0)
    throw ConfigError("make_splits: negative ratio");
  std::size_t n_classes = 0;
  for (const Bag& b : bags) n_classes = std::max(n_classes, b.label + 1);
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < bags.size(); ++i)
    by_class[bags[i].label].push_back(i);

  const double r[3] = {ratios.train, ratios.val, ratios.test};
  std::size_t parts = 0;
  for (double x : r)
    if (x > 0.0) ++parts;

  Rng rng(seed);
  DatasetSplit split;
  std::vector<std::string>* lists[3] = {&split.train, &split.val, &split.test};
  for (std::size_t cls = 0; cls < n_classes; ++cls) {
    auto& ids = by_class[cls];
    if (ids.size() < parts)
      throw ConfigError("make_splits: class " + std::to_string(cls) + " has " +
                        std::to_string(ids.size()) + " bags for " +
                        std::to_string(parts) + " split parts");
    // Fisher-Yates
    for (std::size_t i = ids.size(); i > 1; --i) {
      const std::size_t j = rng.uniform_int(0, i - 1);
      std::swap(ids[i - 1], ids[j]);
    }
    // largest-remainder allocation
    const double total = static_cast<double>(ids.size());
    std::size_t counts[3];
    double remainders[3];
    std::size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
      const double ideal = r[k] * total;
      counts[k] = static_cast<std::size_t>(std::floor(ideal));
      remainders[k] = ideal - std::floor(ideal);
      assigned += counts[k];
    }
    while (assigned < ids.size()) {
      int best = 0;
      for (int k = 1; k < 3; ++k)
        if (remainders[k] > remainders[best]) best = k;
      counts[best] += 1;
      remainders[best] = -1.0;
      ++assigned;
    }
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k)
      for (std::size_t i = 0; i < counts[k]; ++i)
        lists[k]->push_back(bags[ids[pos++]].id);
  }
  return split;
}

// Uniform subsample of ceil(keep_fraction * N) instances without
// replacement; redrawn on every call so it acts as a training-time
// augmentation. Never empties a bag.
inline Bag subsample_bag(const Bag& bag, double keep_fraction, Rng& rng) {
  if (keep_fraction <= 0.0 || keep_fraction > 1.0)
    throw DomainError("subsample_bag: keep fraction must be in (0, 1]");
  const std::size_t n = bag.features.rows;
  const std::size_t keep = static_cast<std::size_t>(
      std::ceil(keep_fraction * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j = rng.uniform_int(i, n - 1);
    std::swap(idx[i], idx[j]);
  }
  Bag out;
  out.label = bag.label;
  out.id = bag.id;
  out.features = Matrix(keep, bag.features.cols);
  for (std::size_t i = 0; i < keep; ++i)
    for (std::size_t d = 0; d < bag.features.cols; ++d)
      out.features(i, d) = bag.features(idx[i], d);
  return out;
}

// Manifest: one `<relative-path>,<label>,<split>` line per bag, `#` comments.
struct ManifestEntry {
  std::string path; // relative to the manifest file
  std::size_t label = 0;
  std::string split; // train | val | test
};

inline void write_manifest(const std::vector<ManifestEntry>& entries,
                           const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("write_manifest: cannot open " + path);
  os << "# path,label,split\n";
  for (const auto& e : entries)
    os << e.path << "," << e.label << "," << e.split << "\n";
}

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("read_manifest: cannot open " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string trimmed = line;
    trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
    if (trimmed.empty() || trimmed[0] == '#') continue;
    std::stringstream ss(trimmed);
    ManifestEntry e;
    std::string label_str;
    if (!std::getline(ss, e.path, ',') || !std::getline(ss, label_str, ',') ||
        !std::getline(ss, e.split))
      throw FormatError("read_manifest: malformed line " + std::to_string(lineno));
    while (!e.split.empty() && (e.split.back() == '\r' || e.split.back() == ' '))
      e.split.pop_back();
    if (e.split != "train" && e.split != "val" && e.split != "test")
      throw FormatError("read_manifest: unknown split '" + e.split + "' on line " +
                        std::to_string(lineno));
    char* endp = nullptr;
    e.label = static_cast<std::size_t>(std::strtoull(label_str.c_str(), &endp, 10));
    if (endp == label_str.c_str() || *endp != '\0')
      throw FormatError("read_manifest: bad label on line " + std::to_string(lineno));
    entries.push_back(std::move(e));
  }
  return entries;
}

} // namespace aemil

#endif
