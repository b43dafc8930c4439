#pragma once

#include <string>

#include "semicount/dataset.hpp"
#include "semicount/trainer.hpp"

namespace semicount::cfg {

// Flat dotted-key JSON, e.g. {"train.epochs": 20, "loss.beta": 1.0}.
// Unknown keys and wrong value types are errors listing the offending key.
void apply_config_file(const std::string& path, train::TrainConfig& train_cfg,
                       DatasetConfig& data_cfg);

// Same mechanism for strings already in memory (used by tests).
void apply_config_json(const std::string& json_text, train::TrainConfig& train_cfg,
                       DatasetConfig& data_cfg);

// The full key table, one "key<TAB>description" line each (CLI help, README).
std::string describe_keys();

}  // namespace semicount::cfg
