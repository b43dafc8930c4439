#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace semicount::train {
class Trainer;
}

namespace semicount::ckpt {

inline constexpr char kMagic[4] = {'S', 'C', 'K', 'P'};
inline constexpr std::uint32_t kVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

// Full training state: model, both optimizers, agents, frozen partition,
// and a flat config echo for standalone reloading.
struct Snapshot {
  std::size_t epoch = 0;
  std::vector<NamedTensor> model;
  std::vector<NamedTensor> adam_m, adam_v;  // aligned with `model` by order
  std::int64_t adam_t = 0;
  NamedTensor agents;  // [n_agents, dim]
  std::vector<double> agents_m, agents_v;
  std::int64_t agents_t = 0;
  std::vector<double> partition_borders, partition_centers;
  std::map<std::string, std::string> meta;
};

// Binary: magic, u32 version, u64 header length, JSON header, then a flat
// little-endian double payload addressed by per-tensor offsets. The write is
// atomic (temp file + rename).
void save(const std::string& path, const Snapshot& snap);
Snapshot load(const std::string& path);

Snapshot snapshot_of(const train::Trainer& trainer);
void restore_into(train::Trainer& trainer, const Snapshot& snap);

}  // namespace semicount::ckpt
