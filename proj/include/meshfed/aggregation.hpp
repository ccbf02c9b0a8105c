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
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "meshfed/core.hpp"

namespace meshfed {

struct WeightedSet {
    const ParameterSet* params;
    double weight;
};

/// Weighted elementwise mean, accumulated in double and summed in ascending
/// origin order (stable for equal origins) so the result does not depend on
/// input order. Output: first input's origin, max round, summed sample_count.
/// Throws EmptyInput, NonPositiveWeight, SpecMismatch.
ParameterSet fedavg(std::span<const WeightedSet> inputs);

/// fedavg with unit weights.
ParameterSet uniform_mean(std::span<const ParameterSet> inputs);

struct NoisePolicy {
    double sigma = 0.0;
    std::uint64_t rng_seed = 0;
};

/// Adds N(0, sigma^2) per element from a generator seeded by
/// (rng_seed, ps.round, ps.origin). sigma == 0 returns ps unchanged.
ParameterSet add_noise(const ParameterSet& ps, const NoisePolicy& policy);

class AggregationStrategy {
public:
    virtual ~AggregationStrategy() = default;

    /// Combines the local set with already-vetted inbound sets. The result
    /// conforms to spec_of(local) and carries local's origin.
    virtual ParameterSet combine(const ParameterSet& local, std::span<const ParameterSet> inbound) const = 0;
    virtual std::string_view name() const noexcept = 0;
};

/// Weights each set by its sample_count. Zero-count sets contribute nothing;
/// if every count is zero it degrades to a plain mean.
class FedAvgStrategy final : public AggregationStrategy {
public:
    ParameterSet combine(const ParameterSet& local, std::span<const ParameterSet> inbound) const override;
    std::string_view name() const noexcept override { return "fedavg"; }
};

class UniformMeanStrategy final : public AggregationStrategy {
public:
    ParameterSet combine(const ParameterSet& local, std::span<const ParameterSet> inbound) const override;
    std::string_view name() const noexcept override { return "mean"; }
};

/// "fedavg" or "mean"; nullptr otherwise.
std::shared_ptr<const AggregationStrategy> make_strategy(std::string_view name);

}  // namespace meshfed
