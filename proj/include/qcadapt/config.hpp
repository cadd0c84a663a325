#pragma once

#include <filesystem>
#include <stdexcept>
#include <string_view>

#include "qcadapt/experiment.hpp"

namespace qcadapt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses a TOML experiment description. Unknown keys are rejected; missing
/// keys keep their defaults.
ExperimentConfig parse_config(std::string_view text, std::string_view source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace qcadapt
