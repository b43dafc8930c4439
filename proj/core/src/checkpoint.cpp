#include "semicount/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "semicount/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace semicount::train {

// Checkpointing needs the trainer's optimizer internals; this accessor keeps
// that surface in one translation unit instead of widening the public API.
struct TrainerAccess {
  static net::Network& network(Trainer& t) { return t.network_; }
  static const net::Network& network(const Trainer& t) { return t.network_; }
  static std::vector<Adam>& model_opt(Trainer& t) { return t.model_opt_; }
  static const std::vector<Adam>& model_opt(const Trainer& t) { return t.model_opt_; }
  static Adam& agent_opt(Trainer& t) { return t.agent_opt_; }
  static const Adam& agent_opt(const Trainer& t) { return t.agent_opt_; }
  static agency::AgentBank& agents(Trainer& t) { return t.agents_; }
  static const agency::AgentBank& agents(const Trainer& t) { return t.agents_; }
  static agency::Partition& partition(Trainer& t) { return t.partition_; }
  static const agency::Partition& partition(const Trainer& t) { return t.partition_; }
  static std::size_t& epochs_done(Trainer& t) { return t.epochs_done_; }
  static const TrainConfig& config(const Trainer& t) { return t.cfg_; }
};

}  // namespace semicount::train

namespace semicount::ckpt {

namespace {

struct PayloadWriter {
  std::vector<double> payload;
  json index = json::array();

  void add(const std::string& name, const std::vector<std::size_t>& shape,
           const std::vector<double>& data) {
    json e;
    e["name"] = name;
    e["shape"] = shape;
    e["offset"] = payload.size();
    e["len"] = data.size();
    index.push_back(std::move(e));
    payload.insert(payload.end(), data.begin(), data.end());
  }
};

struct PayloadReader {
  std::vector<double> payload;
  const json* index = nullptr;

  NamedTensor get(const std::string& name) const {
    for (const auto& e : *index) {
      if (e.at("name").get<std::string>() != name) continue;
      NamedTensor t;
      t.name = name;
      t.shape = e.at("shape").get<std::vector<std::size_t>>();
      auto off = e.at("offset").get<std::size_t>();
      auto len = e.at("len").get<std::size_t>();
      if (off + len > payload.size())
        throw std::runtime_error("checkpoint: tensor '" + name + "' out of payload range");
      t.data.assign(payload.begin() + std::ptrdiff_t(off),
                    payload.begin() + std::ptrdiff_t(off + len));
      return t;
    }
    throw std::runtime_error("checkpoint: tensor '" + name + "' missing");
  }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& e : *index) out.push_back(e.at("name").get<std::string>());
    return out;
  }
};

}  // namespace

void save(const std::string& path, const Snapshot& snap) {
  PayloadWriter w;
  for (const auto& t : snap.model) w.add("model/" + t.name, t.shape, t.data);
  for (const auto& t : snap.adam_m) w.add("adam.m/" + t.name, t.shape, t.data);
  for (const auto& t : snap.adam_v) w.add("adam.v/" + t.name, t.shape, t.data);
  w.add("agents", snap.agents.shape, snap.agents.data);
  w.add("agents.m", {snap.agents_m.size()}, snap.agents_m);
  w.add("agents.v", {snap.agents_v.size()}, snap.agents_v);
  w.add("partition.borders", {snap.partition_borders.size()}, snap.partition_borders);
  w.add("partition.centers", {snap.partition_centers.size()}, snap.partition_centers);

  json header;
  header["epoch"] = snap.epoch;
  header["adam_t"] = snap.adam_t;
  header["agents_t"] = snap.agents_t;
  header["meta"] = snap.meta;
  header["tensors"] = std::move(w.index);
  std::string hs = header.dump();

  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint for write: " + tmp.string());
    out.write(kMagic, 4);
    std::uint32_t ver = kVersion;
    std::uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&ver), sizeof ver);
    out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
    out.write(hs.data(), std::streamsize(hs.size()));
    out.write(reinterpret_cast<const char*>(w.payload.data()),
              std::streamsize(w.payload.size() * sizeof(double)));
    if (!out) throw std::runtime_error("checkpoint write failed: " + tmp.string());
  }
  fs::rename(tmp, target);  // atomic replace
}

Snapshot load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  std::uint32_t ver = 0;
  std::uint64_t hlen = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&ver), sizeof ver);
  in.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  if (ver != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(ver) +
                             " in " + path);
  std::string hs(hlen, '\0');
  in.read(hs.data(), std::streamsize(hlen));
  json header = json::parse(hs);

  PayloadReader r;
  r.index = &header.at("tensors");
  {
    std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
    if (raw.size() % sizeof(double) != 0)
      throw std::runtime_error("checkpoint payload corrupt: " + path);
    r.payload.resize(raw.size() / sizeof(double));
    std::memcpy(r.payload.data(), raw.data(), raw.size());
  }

  Snapshot snap;
  snap.epoch = header.at("epoch").get<std::size_t>();
  snap.adam_t = header.at("adam_t").get<std::int64_t>();
  snap.agents_t = header.at("agents_t").get<std::int64_t>();
  for (const auto& [k, v] : header.at("meta").items())
    snap.meta[k] = v.get<std::string>();

  for (const std::string& full : r.names()) {
    if (full.rfind("model/", 0) == 0) {
      NamedTensor t = r.get(full);
      t.name = full.substr(6);
      snap.model.push_back(std::move(t));
    }
  }
  for (const auto& t : snap.model) {
    NamedTensor m = r.get("adam.m/" + t.name);
    m.name = t.name;
    snap.adam_m.push_back(std::move(m));
    NamedTensor v = r.get("adam.v/" + t.name);
    v.name = t.name;
    snap.adam_v.push_back(std::move(v));
  }
  snap.agents = r.get("agents");
  snap.agents.name = "agents";
  snap.agents_m = r.get("agents.m").data;
  snap.agents_v = r.get("agents.v").data;
  snap.partition_borders = r.get("partition.borders").data;
  snap.partition_centers = r.get("partition.centers").data;
  return snap;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Snapshot snapshot_of(const train::Trainer& trainer) {
  using train::TrainerAccess;
  Snapshot snap;
  snap.epoch = trainer.epochs_done();

  const auto& params = TrainerAccess::network(trainer).params();
  const auto& opts = TrainerAccess::model_opt(trainer);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, node] = params[i];
    snap.model.push_back({name, node->value.shape, node->value.data});
    snap.adam_m.push_back({name, {opts[i].first_moment().size()}, opts[i].first_moment()});
    snap.adam_v.push_back({name, {opts[i].second_moment().size()}, opts[i].second_moment()});
  }
  snap.adam_t = opts.empty() ? 0 : opts.front().steps();

  const auto& agents = TrainerAccess::agents(trainer);
  snap.agents = {"agents", {agents.n, agents.dim}, agents.weights};
  snap.agents_m = TrainerAccess::agent_opt(trainer).first_moment();
  snap.agents_v = TrainerAccess::agent_opt(trainer).second_moment();
  snap.agents_t = TrainerAccess::agent_opt(trainer).steps();

  const auto& part = TrainerAccess::partition(trainer);
  snap.partition_borders = part.borders;
  snap.partition_centers = part.centers;

  const auto& cfg = TrainerAccess::config(trainer);
  snap.meta["format"] = "1";
  snap.meta["model.in_channels"] = std::to_string(cfg.network.in_channels);
  snap.meta["model.channels"] = std::to_string(cfg.network.channels);
  snap.meta["model.attn_layers"] = std::to_string(cfg.network.attn_layers);
  snap.meta["train.n_agents"] = std::to_string(cfg.n_agents);
  snap.meta["train.seed"] = std::to_string(cfg.seed);
  snap.meta["train.model_lr"] = fmt(cfg.model_lr);
  snap.meta["train.agent_lr"] = fmt(cfg.agent_lr);
  snap.meta["train.sigma_posterior"] = fmt(cfg.sigma_posterior);
  snap.meta["train.mask_dilation"] = std::to_string(cfg.mask_dilation);
  snap.meta["loss.beta"] = fmt(cfg.loss.beta);
  snap.meta["loss.lambda_m"] = fmt(cfg.loss.lambda_m);
  snap.meta["loss.lambda_c"] = fmt(cfg.loss.lambda_c);
  snap.meta["loss.lambda_u"] = fmt(cfg.loss.lambda_u);
  snap.meta["contrastive.tau"] = fmt(cfg.contrastive.tau);
  snap.meta["contrastive.lambda_b"] = fmt(cfg.contrastive.lambda_b);
  snap.meta["contrastive.kernel"] = agency::to_string(cfg.contrastive.match.kernel);
  snap.meta["contrastive.clamp_weights"] = cfg.contrastive.match.clamp_weights ? "1" : "0";
  return snap;
}

void restore_into(train::Trainer& trainer, const Snapshot& snap) {
  using train::TrainerAccess;
  auto& params = TrainerAccess::network(trainer).params();
  auto& opts = TrainerAccess::model_opt(trainer);
  if (snap.model.size() != params.size())
    throw std::runtime_error("checkpoint restore: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, node] = params[i];
    const NamedTensor* found = nullptr;
    for (const auto& t : snap.model)
      if (t.name == name) {
        found = &t;
        break;
      }
    if (!found) throw std::runtime_error("checkpoint restore: missing tensor " + name);
    if (found->shape != node->value.shape)
      throw std::runtime_error("checkpoint restore: shape mismatch for " + name);
    node->value.data = found->data;
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params[i].first;
    const NamedTensor *m = nullptr, *v = nullptr;
    for (const auto& t : snap.adam_m)
      if (t.name == name) m = &t;
    for (const auto& t : snap.adam_v)
      if (t.name == name) v = &t;
    if (!m || !v) throw std::runtime_error("checkpoint restore: missing adam state for " + name);
    opts[i].restore(m->data, v->data, snap.adam_t);
  }

  auto& agents = TrainerAccess::agents(trainer);
  if (snap.agents.shape.size() != 2 || snap.agents.shape[0] != agents.n ||
      snap.agents.shape[1] != agents.dim)
    throw std::runtime_error("checkpoint restore: agent bank shape mismatch");
  agents.weights = snap.agents.data;
  TrainerAccess::agent_opt(trainer).restore(snap.agents_m, snap.agents_v, snap.agents_t);

  auto& part = TrainerAccess::partition(trainer);
  part.borders = snap.partition_borders;
  part.centers = snap.partition_centers;
  TrainerAccess::epochs_done(trainer) = snap.epoch;
}

}  // namespace semicount::ckpt

namespace semicount::train {

void Trainer::save_checkpoint(const std::string& path) const {
  ckpt::save(path, ckpt::snapshot_of(*this));
}

void Trainer::restore_checkpoint(const std::string& path) {
  ckpt::restore_into(*this, ckpt::load(path));
}

}  // namespace semicount::train
