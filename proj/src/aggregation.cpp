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

#include "meshfed/aggregation.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace meshfed {

ParameterSet fedavg(std::span<const WeightedSet> inputs) {
    if (inputs.empty()) throw Error(Errc::EmptyInput, "fedavg of nothing");
    const ModelSpec spec = spec_of(*inputs.front().params);
    for (const auto& in : inputs) {
        if (!(in.weight > 0.0)) throw Error(Errc::NonPositiveWeight, std::to_string(in.weight));
        if (!conforms(*in.params, spec)) throw Error(Errc::SpecMismatch, "fedavg inputs do not conform");
    }

    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return inputs[a].params->origin < inputs[b].params->origin;
    });

    double total = 0.0;
    for (auto i : order) total += inputs[i].weight;

    ParameterSet out;
    for (std::size_t e = 0; e < spec.layout.size(); ++e) {
        const auto& layout = spec.layout[e];
        std::vector<double> acc(Tensor::element_count(layout.shape), 0.0);
        for (auto i : order) {
            auto values = inputs[i].params->entries()[e].second.values();
            const double w = inputs[i].weight;
            for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += w * values[k];
        }
        for (auto& v : acc) v /= total;
        out.add(layout.name, Tensor(layout.dtype, layout.shape, std::move(acc)));
    }

    out.origin = inputs.front().params->origin;
    for (const auto& in : inputs) {
        out.round = std::max(out.round, in.params->round);
        out.sample_count += in.params->sample_count;
    }
    return out;
}

ParameterSet uniform_mean(std::span<const ParameterSet> inputs) {
    std::vector<WeightedSet> weighted;
    weighted.reserve(inputs.size());
    for (const auto& ps : inputs) weighted.push_back({&ps, 1.0});
    return fedavg(weighted);
}

ParameterSet add_noise(const ParameterSet& ps, const NoisePolicy& policy) {
    if (policy.sigma < 0.0) throw Error(Errc::ValidationError, "noise sigma must be non-negative");
    if (policy.sigma == 0.0) return ps;

    std::vector<std::uint32_t> seed_words;
    auto push64 = [&](std::uint64_t v) {
        seed_words.push_back(static_cast<std::uint32_t>(v));
        seed_words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push64(policy.rng_seed);
    push64(ps.round);
    for (auto b : ps.origin.bytes()) seed_words.push_back(b);
    std::seed_seq seq(seed_words.begin(), seed_words.end());
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, policy.sigma);

    ParameterSet out = ps;
    for (auto& [name, t] : out.entries())
        for (std::size_t i = 0; i < t.size(); ++i) t.set(i, t[i] + noise(rng));
    return out;
}

namespace {

std::vector<ParameterSet> with_local(const ParameterSet& local, std::span<const ParameterSet> inbound) {
    std::vector<ParameterSet> all;
    all.reserve(inbound.size() + 1);
    all.push_back(local);
    all.insert(all.end(), inbound.begin(), inbound.end());
    return all;
}

}  // namespace

ParameterSet FedAvgStrategy::combine(const ParameterSet& local, std::span<const ParameterSet> inbound) const {
    auto all = with_local(local, inbound);
    std::vector<WeightedSet> weighted;
    for (const auto& ps : all)
        if (ps.sample_count > 0) weighted.push_back({&ps, static_cast<double>(ps.sample_count)});

    ParameterSet out = weighted.empty() ? uniform_mean(all) : fedavg(weighted);
    out.origin = local.origin;
    out.round = 0;
    out.sample_count = 0;
    for (const auto& ps : all) {
        out.round = std::max(out.round, ps.round);
        out.sample_count += ps.sample_count;
    }
    return out;
}

ParameterSet UniformMeanStrategy::combine(const ParameterSet& local, std::span<const ParameterSet> inbound) const {
    auto all = with_local(local, inbound);
    ParameterSet out = uniform_mean(all);
    out.origin = local.origin;
    out.sample_count = local.sample_count;
    return out;
}

std::shared_ptr<const AggregationStrategy> make_strategy(std::string_view name) {
    if (name == "fedavg") return std::make_shared<FedAvgStrategy>();
    if (name == "mean") return std::make_shared<UniformMeanStrategy>();
    return nullptr;
}

}  // namespace meshfed
