#include "semicount/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace semicount::cfg {

namespace {

struct type_mismatch {};

struct Key {
  std::string desc;
  std::function<void(const json&)> apply;
};

std::map<std::string, Key> key_table(train::TrainConfig& t, DatasetConfig& d) {
  std::map<std::string, Key> k;
  auto num = [](std::string desc, double* target) {
    return Key{std::move(desc), [target](const json& v) {
                 if (!v.is_number()) throw type_mismatch{};
                 *target = v.get<double>();
               }};
  };
  auto idx = [](std::string desc, std::size_t* target) {
    return Key{std::move(desc), [target](const json& v) {
                 if (!v.is_number_unsigned()) throw type_mismatch{};
                 *target = v.get<std::size_t>();
               }};
  };
  auto flag = [](std::string desc, bool* target) {
    return Key{std::move(desc), [target](const json& v) {
                 if (!v.is_boolean()) throw type_mismatch{};
                 *target = v.get<bool>();
               }};
  };

  k["train.epochs"] = idx("training epochs", &t.epochs);
  k["train.batch_labeled"] = idx("labeled samples per step", &t.batch_labeled);
  k["train.batch_unlabeled"] = idx("unlabeled samples per step", &t.batch_unlabeled);
  k["train.model_lr"] = num("model learning rate", &t.model_lr);
  k["train.agent_lr"] = num("agent learning rate", &t.agent_lr);
  k["train.n_agents"] = idx("number of density agents", &t.n_agents);
  k["train.labeled_only"] = flag("skip unlabeled data (baseline)", &t.labeled_only);
  k["train.seed"] = Key{"training seed", [&t](const json& v) {
                          if (!v.is_number_unsigned())
                            throw type_mismatch{};
                          t.seed = v.get<std::uint64_t>();
                        }};
  k["train.crop"] = idx("training crop size (stride multiple)", &t.crop);
  k["train.scale_lo"] = num("augmentation scale lower bound", &t.aug_scale_lo);
  k["train.scale_hi"] = num("augmentation scale upper bound", &t.aug_scale_hi);
  k["train.hflip"] = num("horizontal flip probability", &t.aug_hflip);
  k["train.sigma_posterior"] = num("posterior kernel width (pixels)", &t.sigma_posterior);
  k["train.mask_dilation"] = Key{"mask dilation (cells)", [&t](const json& v) {
                                   if (!v.is_number_integer())
                                     throw type_mismatch{};
                                   t.mask_dilation = v.get<int>();
                                 }};
  k["train.checkpoint_every"] = idx("checkpoint every N epochs (0: final only)",
                                    &t.checkpoint_every);

  k["model.channels"] = idx("token width (divisible by 4)", &t.network.channels);
  k["model.attn_layers"] = idx("refinement layers", &t.network.attn_layers);

  k["loss.beta"] = num("noise depression strength", &t.loss.beta);
  k["loss.lambda_m"] = num("mask loss weight", &t.loss.lambda_m);
  k["loss.lambda_c"] = num("contrastive block weight", &t.loss.lambda_c);
  k["loss.lambda_u"] = num("unlabeled objective weight", &t.loss.lambda_u);

  k["contrastive.tau"] = num("similarity temperature", &t.contrastive.tau);
  k["contrastive.lambda_b"] = num("background push weight", &t.contrastive.lambda_b);
  k["contrastive.kernel"] = Key{"matching kernel: laplace | normal", [&t](const json& v) {
                                  if (!v.is_string())
                                    throw type_mismatch{};
                                  t.contrastive.match.kernel =
                                      agency::kernel_from_string(v.get<std::string>());
                                }};
  k["contrastive.clamp_weights"] = flag("clamp uncertainty weights to [0,2]",
                                        &t.contrastive.match.clamp_weights);

  k["data.n_train"] = idx("training scenes", &d.n_train);
  k["data.n_test"] = idx("test scenes", &d.n_test);
  k["data.labeled_fraction"] = num("labeled fraction of training scenes",
                                   &d.labeled_fraction);
  k["data.count_lo"] = idx("minimum scene count", &d.count_lo);
  k["data.count_hi"] = idx("maximum scene count", &d.count_hi);
  k["data.height"] = idx("scene height (pixels)", &d.scene.height);
  k["data.width"] = idx("scene width (pixels)", &d.scene.width);
  k["data.noise_sigma"] = num("background noise level", &d.scene.noise_sigma);
  k["data.layout"] = Key{"point layout: uniform | clustered | gradient",
                         [&d](const json& v) {
                           if (!v.is_string())
                             throw type_mismatch{};
                           d.scene.layout = layout_from_string(v.get<std::string>());
                         }};
  k["data.seed"] = Key{"dataset seed", [&d](const json& v) {
                         if (!v.is_number_unsigned())
                           throw type_mismatch{};
                         d.seed = v.get<std::uint64_t>();
                       }};
  return k;
}

void apply(const json& doc, train::TrainConfig& t, DatasetConfig& d) {
  if (!doc.is_object()) throw std::runtime_error("config must be a JSON object");
  auto table = key_table(t, d);
  for (const auto& [key, value] : doc.items()) {
    auto it = table.find(key);
    if (it == table.end()) {
      std::ostringstream os;
      os << "unknown config key '" << key << "'; known keys:\n" << describe_keys();
      throw std::runtime_error(os.str());
    }
    try {
      it->second.apply(value);
    } catch (const type_mismatch&) {
      throw std::runtime_error("config key '" + key + "' has the wrong type (" +
                               it->second.desc + ")");
    } catch (const json::exception&) {
      throw std::runtime_error("config key '" + key + "' has the wrong type (" +
                               it->second.desc + ")");
    }
  }
}

}  // namespace

void apply_config_json(const std::string& json_text, train::TrainConfig& t,
                       DatasetConfig& d) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config parse error: ") + e.what());
  }
  apply(doc, t, d);
}

void apply_config_file(const std::string& path, train::TrainConfig& t, DatasetConfig& d) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    apply_config_json(buf.str(), t, d);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::string describe_keys() {
  train::TrainConfig t;
  DatasetConfig d;
  std::ostringstream os;
  for (const auto& [key, entry] : key_table(t, d)) os << "  " << key << "\t" << entry.desc << "\n";
  return os.str();
}

}  // namespace semicount::cfg
