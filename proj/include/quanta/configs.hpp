#pragma once

#include <string>

#include "quanta/infer.hpp"
#include "quanta/simulate.hpp"
#include "quanta/train.hpp"

// JSON-text mirrors of the config structs. Parsing validates types and
// rejects unknown keys so stale hyperparameter files fail loudly.

namespace quanta {

std::string to_json_text(const TrainConfig& cfg);
std::string to_json_text(const InferConfig& cfg);

TrainConfig train_config_from_json(const std::string& text);
InferConfig infer_config_from_json(const std::string& text);

}  // namespace quanta
