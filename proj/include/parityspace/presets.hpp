#pragma once

#include "parityspace/plant.hpp"

#include <string>

namespace parityspace {

/// Named benchmark plants selectable from configs and the CLI.
///   eq80: third-order marginally stable plant, scalar actuator and sensor,
///         Q = R = 0.01, monitored under observer-based feedback.
///   eq81: scalar integrator plant with Q = 1, R = 0.1, the classic
///         replay-vulnerable loop.
bool is_preset(const std::string& name);
LtiSystem preset_system(const std::string& name);

}  // namespace parityspace
