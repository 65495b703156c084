#ifndef AEMIL_CHECKPOINT_HPP
#define AEMIL_CHECKPOINT_HPP

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "errors.hpp"
#include "model.hpp"
#include "optimizer.hpp"
#include "rng.hpp"
#include "serialize.hpp"

namespace aemil {

// Checkpoint file, little-endian:
//   bytes 0-7  magic "AEMCKPT1"
//   byte  8    format version (1)
//   bytes 9-40 config hash (32 bytes)
//   u32        completed epochs
//   f64 blob   parameter values in ModelParams traversal order
//   optimizer  u64 step count, then per tensor the m blob and the v blob
//   rng        u32 word count, then the stream state words
inline constexpr char kCheckpointMagic[8] = {'A', 'E', 'M', 'C', 'K', 'P', 'T', '1'};
inline constexpr unsigned char kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path,
                            const std::array<unsigned char, 32>& cfg_hash,
                            std::uint32_t epoch, const ModelParams& params,
                            const AdamState& adam, const Rng& rng) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("save_checkpoint: cannot open " + path);
  io::put_bytes(os, kCheckpointMagic, 8);
  const unsigned char ver = kCheckpointVersion;
  io::put_bytes(os, &ver, 1);
  io::put_bytes(os, cfg_hash.data(), cfg_hash.size());
  io::put_u32(os, epoch);
  params.visit([&](const ParamTensor& p) {
    for (double v : p.value.data) io::put_f64(os, v);
  });
  io::put_u64(os, adam.t);
  for (std::size_t i = 0; i < adam.m.size(); ++i) {
    for (double v : adam.m[i].data) io::put_f64(os, v);
    for (double v : adam.v[i].data) io::put_f64(os, v);
  }
  const auto state = rng.state();
  io::put_u32(os, static_cast<std::uint32_t>(state.size()));
  for (std::uint64_t w : state) io::put_u64(os, w);
  if (!os) throw FormatError("save_checkpoint: short write to " + path);
}

struct CheckpointHeader {
  std::array<unsigned char, 32> cfg_hash{};
  std::uint32_t epoch = 0;
};

// Loads into shape-matching params/adam/rng built from the run config.
inline CheckpointHeader load_checkpoint(const std::string& path,
                                        ModelParams& params, AdamState& adam,
                                        Rng& rng) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("load_checkpoint: cannot open " + path);
  char magic[8];
  io::get_bytes(is, magic, 8, "load_checkpoint", 0);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw FormatError("load_checkpoint: bad magic at byte offset 0 in " + path);
  unsigned char ver = 0;
  io::get_bytes(is, &ver, 1, "load_checkpoint", 8);
  if (ver != kCheckpointVersion)
    throw FormatError("load_checkpoint: unsupported version " +
                      std::to_string(static_cast<int>(ver)));
  CheckpointHeader header;
  std::size_t off = 9;
  io::get_bytes(is, header.cfg_hash.data(), 32, "load_checkpoint", off);
  off += 32;
  header.epoch = io::get_u32(is, "load_checkpoint", off);
  off += 4;
  auto next_f64 = [&](double& v) {
    v = io::get_f64(is, "load_checkpoint", off);
    off += 8;
  };
  params.visit([&](ParamTensor& p) {
    for (double& v : p.value.data) next_f64(v);
  });
  adam.t = io::get_u64(is, "load_checkpoint", off);
  off += 8;
  for (std::size_t i = 0; i < adam.m.size(); ++i) {
    for (double& v : adam.m[i].data) next_f64(v);
    for (double& v : adam.v[i].data) next_f64(v);
  }
  const std::uint32_t words = io::get_u32(is, "load_checkpoint", off);
  off += 4;
  if (words != 4)
    throw FormatError("load_checkpoint: unexpected RNG state size " +
                      std::to_string(words));
  std::array<std::uint64_t, 4> state;
  for (auto& w : state) {
    w = io::get_u64(is, "load_checkpoint", off);
    off += 8;
  }
  rng.set_state(state);
  return header;
}

} // namespace aemil

#endif
