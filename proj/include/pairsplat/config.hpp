// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "pairsplat/trainer.hpp"

#include <string>

namespace pairsplat {

// Parses a JSON config document. Unknown keys are rejected with a diagnostic
// naming the key; missing keys keep the documented defaults (the paper-scale
// schedule). The parsed config is validated before it is returned.
TrainConfig config_from_json_text(const std::string& text);
TrainConfig load_config_file(const std::string& path);

// Fully-resolved config as JSON with every key populated; echoed into run
// artifacts so any report can be reproduced from its own provenance block.
std::string config_to_json_text(const TrainConfig& cfg);

} // namespace pairsplat
