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

#include "meshfed/refmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace meshfed::refmodel {

Dataset gen_dataset(std::uint64_t seed, std::size_t n, std::size_t d, double noise_std) {
    if (n == 0 || d == 0) throw Error(Errc::ValidationError, "dataset needs n >= 1 and d >= 1");
    if (noise_std < 0.0) throw Error(Errc::ValidationError, "noise_std must be non-negative");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    Dataset ds;
    ds.d = d;
    ds.seed = seed;
    ds.noise_std = noise_std;
    ds.true_weights.resize(d);
    for (auto& w : ds.true_weights) w = normal(rng);
    ds.x.resize(n * d);
    for (auto& v : ds.x) v = normal(rng);
    ds.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += ds.x[i * d + j] * ds.true_weights[j];
        ds.y[i] = dot;
    }
    if (noise_std > 0.0)
        for (auto& y : ds.y) y += noise_std * normal(rng);
    return ds;
}

namespace {

Shard gather(const Dataset& ds, std::span<const std::size_t> idx) {
    Shard s;
    s.d = ds.d;
    s.x.reserve(idx.size() * ds.d);
    s.y.reserve(idx.size());
    for (auto i : idx) {
        auto r = ds.row(i);
        s.x.insert(s.x.end(), r.begin(), r.end());
        s.y.push_back(ds.y[i]);
    }
    return s;
}

std::vector<Shard> split(const Dataset& ds, const std::vector<std::size_t>& order,
                         const std::vector<std::size_t>& sizes) {
    std::vector<Shard> shards;
    std::size_t at = 0;
    for (auto sz : sizes) {
        shards.push_back(gather(ds, std::span(order).subspan(at, sz)));
        at += sz;
    }
    return shards;
}

std::vector<std::size_t> even_sizes(std::size_t n, std::size_t k) {
    std::vector<std::size_t> sizes(k, n / k);
    for (std::size_t i = 0; i < n % k; ++i) ++sizes[i];
    return sizes;
}

}  // namespace

std::vector<Shard> partition(const Dataset& ds, std::size_t k, const PartitionScheme& scheme, std::uint64_t seed) {
    const std::size_t n = ds.size();
    if (k == 0) throw Error(Errc::TooManyShards, "zero shards requested");
    if (k > n) throw Error(Errc::TooManyShards, std::to_string(k) + " shards of " + std::to_string(n) + " samples");

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    switch (scheme.kind) {
        case PartitionScheme::Kind::Iid: {
            std::shuffle(order.begin(), order.end(), rng);
            return split(ds, order, even_sizes(n, k));
        }
        case PartitionScheme::Kind::FeatureSkew: {
            if (scheme.alpha < 0.0 || scheme.alpha > 1.0)
                throw Error(Errc::ValidationError, "feature skew alpha must lie in [0, 1]");
            std::vector<std::size_t> by_feature = order;
            std::sort(by_feature.begin(), by_feature.end(),
                      [&](std::size_t a, std::size_t b) { return ds.x[a * ds.d] < ds.x[b * ds.d]; });
            std::vector<double> key(n);
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            for (std::size_t rank = 0; rank < n; ++rank)
                key[by_feature[rank]] = scheme.alpha * static_cast<double>(rank) / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) key[i] += (1.0 - scheme.alpha) * unit(rng);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
            return split(ds, order, even_sizes(n, k));
        }
        case PartitionScheme::Kind::QuantitySkew: {
            const auto& r = scheme.ratios;
            if (r.size() != k)
                throw Error(Errc::BadRatios, std::to_string(r.size()) + " ratios for " + std::to_string(k) + " shards");
            double sum = 0.0;
            for (double v : r) {
                if (!(v >= 0.0)) throw Error(Errc::BadRatios, "negative ratio");
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-9) throw Error(Errc::BadRatios, "ratios sum to " + std::to_string(sum));

            // Largest-remainder rounding keeps every shard within one sample of its target.
            std::vector<std::size_t> sizes(k);
            std::vector<double> frac(k);
            std::size_t assigned = 0;
            for (std::size_t i = 0; i < k; ++i) {
                double exact = r[i] * static_cast<double>(n);
                sizes[i] = static_cast<std::size_t>(std::floor(exact));
                frac[i] = exact - std::floor(exact);
                assigned += sizes[i];
            }
            std::vector<std::size_t> by_frac(k);
            std::iota(by_frac.begin(), by_frac.end(), 0);
            std::stable_sort(by_frac.begin(), by_frac.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
            for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[by_frac[i % k]];
            std::shuffle(order.begin(), order.end(), rng);
            return split(ds, order, sizes);
        }
    }
    return {};
}

void export_csv(const Dataset& ds, std::ostream& os) {
    for (std::size_t j = 0; j < ds.d; ++j) os << 'x' << j << ',';
    os << "y\n";
    auto old = os.precision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (double v : ds.row(i)) os << v << ',';
        os << ds.y[i] << '\n';
    }
    os.precision(old);
}

// ---- models ---------------------------------------------------------------

ModelSpec model_spec(const ModelShape& shape) {
    const auto d = static_cast<std::uint32_t>(shape.features);
    const auto h = static_cast<std::uint32_t>(shape.hidden);
    ModelSpec spec;
    if (shape.kind == ModelKind::Linear) {
        spec.layout = {{"w", shape.dtype, {d}}, {"b", shape.dtype, {1}}};
    } else {
        spec.layout = {{"w1", shape.dtype, {h, d}},
                       {"b1", shape.dtype, {h}},
                       {"w2", shape.dtype, {1, h}},
                       {"b2", shape.dtype, {1}}};
    }
    return spec;
}

ParameterSet init_params(const ModelShape& shape, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    ParameterSet ps;
    for (const auto& e : model_spec(shape).layout) {
        auto t = Tensor::zeros(e.dtype, e.shape);
        const bool is_bias = e.name.front() == 'b';
        if (!is_bias) {
            const double fan_in = static_cast<double>(e.shape.back());
            for (std::size_t i = 0; i < t.size(); ++i) t.set(i, scale * normal(rng) / std::sqrt(fan_in));
        }
        ps.add(e.name, std::move(t));
    }
    return ps;
}

namespace {

struct Eval {
    double loss = 0.0;
    ParameterSet grad;
};

ModelKind detect(const ParameterSet& p, std::size_t d) {
    if (p.size() == 2 && p.find("w") && p.find("b")) {
        ModelShape s{ModelKind::Linear, d, 0, p.find("w")->dtype()};
        if (conforms(p, model_spec(s))) return ModelKind::Linear;
    }
    if (p.size() == 4 && p.find("w1") && p.find("b1")) {
        const auto& shp = p.find("w1")->shape();
        if (shp.size() == 2) {
            ModelShape s{ModelKind::Mlp, d, shp[0], p.find("w1")->dtype()};
            if (conforms(p, model_spec(s))) return ModelKind::Mlp;
        }
    }
    throw Error(Errc::SpecMismatch, "parameters do not match a reference model for " + std::to_string(d) + " features");
}

Tensor like(const Tensor& t, std::vector<double> values) { return Tensor(t.dtype(), t.shape(), std::move(values)); }

Eval evaluate(const ParameterSet& p, const Shard& shard, std::span<const std::size_t> rows, bool want_grad) {
    const std::size_t d = shard.d;
    const ModelKind kind = detect(p, d);
    if (rows.empty()) throw Error(Errc::EmptyShard, "no samples to evaluate");
    const double m = static_cast<double>(rows.size());

    Eval out;
    if (kind == ModelKind::Linear) {
        auto w = p.find("w")->values();
        double b = (*p.find("b"))[0];
        std::vector<double> gw(d, 0.0);
        double gb = 0.0;
        for (auto i : rows) {
            auto x = shard.row(i);
            double r = b - shard.y[i];
            for (std::size_t j = 0; j < d; ++j) r += w[j] * x[j];
            out.loss += r * r;
            if (want_grad) {
                const double g = 2.0 * r / m;
                for (std::size_t j = 0; j < d; ++j) gw[j] += g * x[j];
                gb += g;
            }
        }
        out.loss /= m;
        if (want_grad) {
            out.grad.add("w", like(*p.find("w"), std::move(gw)));
            out.grad.add("b", like(*p.find("b"), {gb}));
        }
        return out;
    }

    auto w1 = p.find("w1")->values();
    auto b1 = p.find("b1")->values();
    auto w2 = p.find("w2")->values();
    const double b2 = (*p.find("b2"))[0];
    const std::size_t h = b1.size();
    std::vector<double> gw1(h * d, 0.0), gb1(h, 0.0), gw2(h, 0.0);
    double gb2 = 0.0;
    std::vector<double> a(h);
    for (auto i : rows) {
        auto x = shard.row(i);
        double pred = b2;
        for (std::size_t k = 0; k < h; ++k) {
            double z = b1[k];
            for (std::size_t j = 0; j < d; ++j) z += w1[k * d + j] * x[j];
            a[k] = std::tanh(z);
            pred += w2[k] * a[k];
        }
        const double r = pred - shard.y[i];
        out.loss += r * r;
        if (!want_grad) continue;
        const double g = 2.0 * r / m;
        gb2 += g;
        for (std::size_t k = 0; k < h; ++k) {
            gw2[k] += g * a[k];
            const double dz = g * w2[k] * (1.0 - a[k] * a[k]);
            gb1[k] += dz;
            for (std::size_t j = 0; j < d; ++j) gw1[k * d + j] += dz * x[j];
        }
    }
    out.loss /= m;
    if (want_grad) {
        out.grad.add("w1", like(*p.find("w1"), std::move(gw1)));
        out.grad.add("b1", like(*p.find("b1"), std::move(gb1)));
        out.grad.add("w2", like(*p.find("w2"), std::move(gw2)));
        out.grad.add("b2", like(*p.find("b2"), {gb2}));
    }
    return out;
}

std::vector<std::size_t> all_rows(const Shard& s) {
    std::vector<std::size_t> rows(s.size());
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

}  // namespace

double mse_loss(const ParameterSet& params, const Shard& shard, std::span<const std::size_t> rows) {
    return evaluate(params, shard, rows, false).loss;
}

ParameterSet gradient(const ParameterSet& params, const Shard& shard, std::span<const std::size_t> rows) {
    return evaluate(params, shard, rows, true).grad;
}

double mse_loss(const ParameterSet& params, const Shard& shard) { return mse_loss(params, shard, all_rows(shard)); }

ParameterSet gradient(const ParameterSet& params, const Shard& shard) {
    return gradient(params, shard, all_rows(shard));
}

// ---- trainers -------------------------------------------------------------

GradientTrainer::GradientTrainer(ModelShape shape, Shard shard, TrainerConfig config,
                                 std::optional<ParameterSet> initial, std::optional<DataArrival> arrival)
    : shape_(shape),
      shard_(std::move(shard)),
      config_(config),
      initial_(std::move(initial)),
      arrival_(arrival),
      rng_(config.seed) {
    if (config_.batch_size == 0) throw Error(Errc::ValidationError, "batch_size must be positive");
    if (initial_ && !conforms(*initial_, model_spec(shape_)))
        throw Error(Errc::SpecMismatch, "initial parameters do not match the model shape");
    revealed_ = arrival_ ? std::min<std::uint64_t>(arrival_->initial, shard_.size()) : shard_.size();
}

void GradientTrainer::on_round_begin(std::uint64_t /*round*/) {
    if (!arrival_) return;
    ++rounds_begun_;
    revealed_ = std::min<std::uint64_t>(arrival_->initial + arrival_->per_round * rounds_begun_, shard_.size());
}

TrainResult GradientTrainer::train(const ParameterSet& params) {
    TrainResult result;
    result.params = params;
    result.samples_used = revealed_;
    if (revealed_ == 0) {
        result.loss = std::numeric_limits<double>::quiet_NaN();
        return result;
    }

    std::vector<std::size_t> rows(revealed_);
    std::iota(rows.begin(), rows.end(), 0);
    for (std::uint32_t epoch = 0; epoch < config_.local_epochs; ++epoch) {
        std::shuffle(rows.begin(), rows.end(), rng_);
        for (std::size_t at = 0; at < rows.size(); at += config_.batch_size) {
            const std::size_t len = std::min(config_.batch_size, rows.size() - at);
            auto grad = gradient(result.params, shard_, std::span(rows).subspan(at, len));
            for (std::size_t e = 0; e < grad.size(); ++e) {
                auto& t = result.params.entries()[e].second;
                auto g = grad.entries()[e].second.values();
                for (std::size_t i = 0; i < t.size(); ++i) t.set(i, t[i] - config_.learning_rate * g[i]);
            }
        }
    }
    result.loss = mse_loss(result.params, shard_, rows);
    return result;
}

LinearTrainer::LinearTrainer(Shard shard, TrainerConfig config, std::optional<ParameterSet> initial,
                             std::optional<DataArrival> arrival, DType dtype)
    : GradientTrainer(ModelShape{ModelKind::Linear, shard.d, 0, dtype}, shard, config, std::move(initial),
                      arrival) {}

MlpTrainer::MlpTrainer(Shard shard, std::size_t hidden, TrainerConfig config, std::optional<ParameterSet> initial,
                       std::optional<DataArrival> arrival, DType dtype)
    : GradientTrainer(ModelShape{ModelKind::Mlp, shard.d, hidden, dtype}, shard, config, std::move(initial),
                      arrival) {}

}  // namespace meshfed::refmodel
