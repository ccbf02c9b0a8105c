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

// Reference regression models with analytic gradients, synthetic data and
// shard partitioning. Linear: y = w.x + b with entries "w" [d], "b" [1].
// MLP: y = w2.tanh(w1 x + b1) + b2 with "w1" [h,d], "b1" [h], "w2" [1,h],
// "b2" [1]. Loss is mean squared error in both.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "meshfed/core.hpp"
#include "meshfed/trainer.hpp"

namespace meshfed::refmodel {

/// Row-major feature matrix plus targets. Also used for shards.
struct Dataset {
    std::size_t d = 0;
    std::vector<double> x;  // size() * d
    std::vector<double> y;
    // generator metadata (empty for shards)
    std::uint64_t seed = 0;
    std::vector<double> true_weights;
    double noise_std = 0.0;

    std::size_t size() const noexcept { return y.size(); }
    std::span<const double> row(std::size_t i) const { return {x.data() + i * d, d}; }
};

using Shard = Dataset;

/// X ~ N(0,1), w* ~ N(0,1), y = X w* + eps with eps ~ N(0, noise_std^2).
Dataset gen_dataset(std::uint64_t seed, std::size_t n, std::size_t d, double noise_std);

struct PartitionScheme {
    enum class Kind { Iid, FeatureSkew, QuantitySkew };

    Kind kind = Kind::Iid;
    double alpha = 0.0;          // FeatureSkew: 0 = random, 1 = sorted by feature 0
    std::vector<double> ratios;  // QuantitySkew: one per shard, summing to 1

    static PartitionScheme iid() { return {}; }
    static PartitionScheme feature_skew(double alpha) { return {Kind::FeatureSkew, alpha, {}}; }
    static PartitionScheme quantity_skew(std::vector<double> ratios) {
        return {Kind::QuantitySkew, 0.0, std::move(ratios)};
    }
};

/// Disjoint cover of ds in k shards. Throws TooManyShards, BadRatios.
std::vector<Shard> partition(const Dataset& ds, std::size_t k, const PartitionScheme& scheme, std::uint64_t seed);

/// Header "x0,...,x{d-1},y" then one line per sample.
void export_csv(const Dataset& ds, std::ostream& os);

enum class ModelKind { Linear, Mlp };

struct ModelShape {
    ModelKind kind = ModelKind::Linear;
    std::size_t features = 1;
    std::size_t hidden = 8;
    DType dtype = DType::F64;
};

ModelSpec model_spec(const ModelShape& shape);
/// Normal(0, scale^2 / fan_in) weights, zero biases.
ParameterSet init_params(const ModelShape& shape, std::uint64_t seed, double scale = 1.0);

/// Model kind inferred from entry names; loss/gradient throw SpecMismatch if
/// the set does not fit the shard, EmptyShard on an empty row selection.
double mse_loss(const ParameterSet& params, const Shard& shard);
ParameterSet gradient(const ParameterSet& params, const Shard& shard);
/// Same over a subset of shard rows.
double mse_loss(const ParameterSet& params, const Shard& shard, std::span<const std::size_t> rows);
ParameterSet gradient(const ParameterSet& params, const Shard& shard, std::span<const std::size_t> rows);

struct TrainerConfig {
    double learning_rate = 0.05;
    std::uint32_t local_epochs = 1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

/// Local data that shows up over time: `initial` samples up front, then
/// `per_round` more at the start of every round.
struct DataArrival {
    std::uint64_t initial = 0;
    std::uint64_t per_round = 0;
};

/// Mini-batch gradient descent over the revealed part of a shard.
class GradientTrainer : public TrainerContract {
public:
    GradientTrainer(ModelShape shape, Shard shard, TrainerConfig config, std::optional<ParameterSet> initial,
                    std::optional<DataArrival> arrival = std::nullopt);

    TrainResult train(const ParameterSet& params) override;
    std::optional<ParameterSet> initial_params() override { return initial_; }
    std::uint64_t local_sample_count() const override { return revealed_; }
    void on_round_begin(std::uint64_t round) override;

    const Shard& shard() const noexcept { return shard_; }
    const ModelShape& shape() const noexcept { return shape_; }

private:
    ModelShape shape_;
    Shard shard_;
    TrainerConfig config_;
    std::optional<ParameterSet> initial_;
    std::optional<DataArrival> arrival_;
    std::uint64_t revealed_ = 0;
    std::uint64_t rounds_begun_ = 0;
    std::mt19937_64 rng_;
};

class LinearTrainer final : public GradientTrainer {
public:
    LinearTrainer(Shard shard, TrainerConfig config, std::optional<ParameterSet> initial,
                  std::optional<DataArrival> arrival = std::nullopt, DType dtype = DType::F64);
};

class MlpTrainer final : public GradientTrainer {
public:
    MlpTrainer(Shard shard, std::size_t hidden, TrainerConfig config, std::optional<ParameterSet> initial,
               std::optional<DataArrival> arrival = std::nullopt, DType dtype = DType::F64);
};

}  // namespace meshfed::refmodel
