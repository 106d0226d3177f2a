#pragma once

#include "mz/config.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mz {

// Fully resolved configuration for one experiment preset at one scale.
// Desk scale shrinks sample counts and training budgets only; every
// algorithmic constant matches the full-scale setup.
Config preset_config(const std::string& preset, const std::string& scale,
                     std::uint64_t seed);

std::vector<std::string> preset_names();

// Model tags listed in cfg's model.tags, in declaration order.
std::vector<std::string> config_tags(const Config& cfg);

// Throws naming the first key that is not part of the preset schema.
void validate_experiment_config(const Config& cfg);

}  // namespace mz
