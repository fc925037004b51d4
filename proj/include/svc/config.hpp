#pragma once

#include <string>

#include "svc/training.hpp"

namespace svc {

// Flat key=value run configuration ('#' starts a comment). Every key maps to
// one TrainConfig/SpectroConfig/ModelConfig/LossWeights field; unknown keys
// are rejected by name. The result is validated before return.
TrainConfig parse_run_config_text(const std::string& text);
TrainConfig parse_run_config(const std::string& path);

}  // namespace svc
