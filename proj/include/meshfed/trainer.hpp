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

#include <cstdint>
#include <optional>

#include "meshfed/core.hpp"

namespace meshfed {

struct TrainResult {
    ParameterSet params;
    std::uint64_t samples_used = 0;
    double loss = 0.0;
};

/// The pluggable model. The runtime only ever sees parameters; whatever data a
/// trainer holds stays behind this interface. Called from the owning node's
/// loop only, so implementations need not be thread-safe.
class TrainerContract {
public:
    virtual ~TrainerContract() = default;

    /// One round of local training. The result must conform to spec_of(params).
    virtual TrainResult train(const ParameterSet& params) = 0;
    /// Starting parameters, or nullopt when the node must fetch a model from a peer.
    virtual std::optional<ParameterSet> initial_params() = 0;
    virtual std::uint64_t local_sample_count() const = 0;
    /// Called before each round; trainers whose data arrives over time use it.
    virtual void on_round_begin(std::uint64_t /*round*/) {}
};

}  // namespace meshfed
