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

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "meshfed/error.hpp"

namespace meshfed {

/// Monotonic time. Simulation ticks in the simulator, milliseconds on a real
/// transport. Nothing in the runtime assumes which.
using Tick = std::int64_t;

class NodeId {
public:
    static constexpr std::size_t kSize = 16;
    using Bytes = std::array<std::uint8_t, kSize>;

    constexpr NodeId() = default;
    explicit constexpr NodeId(const Bytes& bytes) : bytes_(bytes) {}

    /// Fresh random identity, drawn from the OS entropy source.
    static NodeId random();
    /// Deterministic identity derived from a label and a seed (simulation use).
    static NodeId derive(std::string_view label, std::uint64_t seed);
    /// Parses 32 lowercase or uppercase hex digits.
    static std::optional<NodeId> from_hex(std::string_view hex);

    const Bytes& bytes() const noexcept { return bytes_; }
    std::string hex() const;
    /// First 8 hex digits, for logs.
    std::string short_hex() const { return hex().substr(0, 8); }

    friend constexpr auto operator<=>(const NodeId&, const NodeId&) = default;

private:
    Bytes bytes_{};
};

/// Name of a federated community. 1..255 bytes, no NUL.
class Namespace {
public:
    static constexpr std::size_t kMaxBytes = 255;

    explicit Namespace(std::string name);

    static bool valid(std::string_view name) noexcept;

    const std::string& str() const noexcept { return name_; }

    friend bool operator==(const Namespace&, const Namespace&) = default;

private:
    std::string name_;
};

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

std::string_view dtype_name(DType dtype) noexcept;
std::optional<DType> parse_dtype(std::string_view name) noexcept;

using Shape = std::vector<std::uint32_t>;

/// Dense row-major tensor. Values are held as doubles; an F32 tensor only ever
/// holds values exactly representable as float, so narrowing on the wire is
/// lossless.
class Tensor {
public:
    static constexpr std::size_t kMaxRank = 8;

    Tensor() = default;
    Tensor(DType dtype, Shape shape, std::vector<double> values);

    static Tensor zeros(DType dtype, Shape shape);
    static std::size_t element_count(const Shape& shape);

    DType dtype() const noexcept { return dtype_; }
    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }

    double operator[](std::size_t i) const { return values_[i]; }
    /// Stores v, rounded to the tensor's dtype.
    void set(std::size_t i, double v) { values_[i] = round_to(dtype_, v); }

    static double round_to(DType dtype, double v) noexcept {
        return dtype == DType::F32 ? static_cast<double>(static_cast<float>(v)) : v;
    }

    /// Bitwise equality of dtype, shape and values.
    friend bool operator==(const Tensor& a, const Tensor& b) noexcept;

private:
    DType dtype_ = DType::F64;
    Shape shape_;
    std::vector<double> values_;
};

struct LayoutEntry {
    std::string name;
    DType dtype = DType::F64;
    Shape shape;

    friend bool operator==(const LayoutEntry&, const LayoutEntry&) = default;
};

/// Names, dtypes and shapes of a parameter set, in order.
struct ModelSpec {
    std::vector<LayoutEntry> layout;

    /// Throws DuplicateEntry on repeated names and InvalidTensor on bad shapes.
    void validate() const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Ordered named tensors plus the metadata that travels with them.
class ParameterSet {
public:
    using Entry = std::pair<std::string, Tensor>;

    ParameterSet() = default;

    /// Appends an entry. Throws DuplicateEntry if the name exists.
    void add(std::string name, Tensor tensor);

    const Tensor* find(std::string_view name) const noexcept;
    Tensor* find(std::string_view name) noexcept;

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::vector<Entry>& entries() noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }

    /// Total scalar count over all entries.
    std::size_t element_count() const noexcept;

    std::uint64_t round = 0;
    std::uint64_t sample_count = 0;
    NodeId origin;

    friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

private:
    std::vector<Entry> entries_;
};

ModelSpec spec_of(const ParameterSet& ps);
bool conforms(const ParameterSet& ps, const ModelSpec& spec);
/// Euclidean norm of the elementwise difference. Throws SpecMismatch.
double l2_distance(const ParameterSet& a, const ParameterSet& b);
/// 64-bit FNV-1a over names, dtypes, shapes and value bits, as 16 hex digits.
std::string digest(const ParameterSet& ps);

enum class SharingMode : std::uint8_t { Seed = 0, Leech = 1, Peer = 2, Block = 3 };

constexpr bool may_send(SharingMode m) noexcept {
    return m == SharingMode::Seed || m == SharingMode::Peer;
}
constexpr bool may_receive(SharingMode m) noexcept {
    return m == SharingMode::Leech || m == SharingMode::Peer;
}

std::string_view mode_name(SharingMode m) noexcept;
/// Accepts "seed", "leech", "peer", "block" in any case.
std::optional<SharingMode> parse_mode(std::string_view name) noexcept;

}  // namespace meshfed

template <>
struct std::hash<meshfed::NodeId> {
    std::size_t operator()(const meshfed::NodeId& id) const noexcept {
        std::size_t h = 1469598103934665603ULL;
        for (auto b : id.bytes()) h = (h ^ b) * 1099511628211ULL;
        return h;
    }
};
