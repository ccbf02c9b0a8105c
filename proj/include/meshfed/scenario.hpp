/*
Copyright 2026 The meshfed Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

// JSON scenario files (scenarios/*.scn.json). Schema in docs/scenario-format.md.
// Unknown keys are rejected. Errors are ValidationError with either
// "line L, column C: ..." for syntax problems or "<field.path>: ..." for
// semantic ones.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "meshfed/sim.hpp"

namespace meshfed::sim {

/// Parses and validates.
ScenarioSpec parse_scenario(std::string_view text);
/// Io if the file cannot be read.
ScenarioSpec load_scenario(const std::filesystem::path& path);

/// JSON text to a document; syntax errors become "line L, column C: ...".
nlohmann::json parse_json(std::string_view text);

/// A real node (`meshfed node run`). Node fields sit at the top level with the
/// same names as a scenario node entry; trainer, dataset and partition use the
/// scenario blocks. Times are milliseconds.
struct NodeConfig {
    std::string ns;
    std::string listen = "127.0.0.1:0";
    std::vector<std::string> bootstrap;
    std::string id;  // hex; empty means random
    std::string aggregation = "fedavg";
    std::uint64_t rounds = 0;  // 0 runs until interrupted
    Tick heartbeat_interval = 1000;
    std::uint32_t ttl_multiplier = 3;
    NodeSpec node;  // pool_timeout defaults to 500 here
    TrainerSpec trainer;
    DatasetSpec dataset;
    refmodel::PartitionScheme partition;
    std::uint64_t seed = 0;  // dataset and init seed; shared by a community
    std::size_t shards = 1;
    std::size_t shard = 0;
};

/// Reads and validates; unknown keys are rejected.
NodeConfig node_config_from_json(const nlohmann::json& j);
void validate(const NodeConfig& cfg);

}  // namespace meshfed::sim
