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

#include "meshfed/core.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace meshfed {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::InvalidNamespace: return "InvalidNamespace";
        case Errc::InvalidTensor: return "InvalidTensor";
        case Errc::DuplicateEntry: return "DuplicateEntry";
        case Errc::SpecMismatch: return "SpecMismatch";
        case Errc::BodyTooLarge: return "BodyTooLarge";
        case Errc::BadMagic: return "BadMagic";
        case Errc::UnsupportedVersion: return "UnsupportedVersion";
        case Errc::TruncatedFrame: return "TruncatedFrame";
        case Errc::UnknownKind: return "UnknownKind";
        case Errc::MalformedPayload: return "MalformedPayload";
        case Errc::DuplicateNode: return "DuplicateNode";
        case Errc::HubInLeaves: return "HubInLeaves";
        case Errc::TooFewNodes: return "TooFewNodes";
        case Errc::TooManyEdgesRequested: return "TooManyEdgesRequested";
        case Errc::SizeMismatch: return "SizeMismatch";
        case Errc::UnknownNode: return "UnknownNode";
        case Errc::SelfEdge: return "SelfEdge";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::NonPositiveWeight: return "NonPositiveWeight";
        case Errc::EmptyShard: return "EmptyShard";
        case Errc::BadRatios: return "BadRatios";
        case Errc::TooManyShards: return "TooManyShards";
        case Errc::NoPeersForModel: return "NoPeersForModel";
        case Errc::NoAliveNodes: return "NoAliveNodes";
        case Errc::ValidationError: return "ValidationError";
        case Errc::Io: return "Io";
        case Errc::BindFailed: return "BindFailed";
    }
    return "Unknown";
}

// ---- NodeId ---------------------------------------------------------------

NodeId NodeId::random() {
    std::random_device rd;
    Bytes b{};
    for (std::size_t i = 0; i < kSize; i += 4) {
        std::uint32_t r = rd();
        for (std::size_t j = 0; j < 4; ++j) b[i + j] = static_cast<std::uint8_t>(r >> (8 * j));
    }
    return NodeId(b);
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv(std::uint64_t& h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ p[i]) * kFnvPrime;
}

}  // namespace

NodeId NodeId::derive(std::string_view label, std::uint64_t seed) {
    std::uint64_t h = kFnvOffset;
    fnv(h, label.data(), label.size());
    std::uint64_t state = h ^ (seed * 0x9e3779b97f4a7c15ULL);
    Bytes b{};
    for (std::size_t i = 0; i < kSize; i += 8) {
        std::uint64_t r = splitmix64(state);
        for (std::size_t j = 0; j < 8; ++j) b[i + j] = static_cast<std::uint8_t>(r >> (8 * j));
    }
    return NodeId(b);
}

std::optional<NodeId> NodeId::from_hex(std::string_view hex) {
    if (hex.size() != 2 * kSize) return std::nullopt;
    Bytes b{};
    for (std::size_t i = 0; i < kSize; ++i) {
        int hi = hex_value(hex[2 * i]);
        int lo = hex_value(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        b[i] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return NodeId(b);
}

std::string NodeId::hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(2 * kSize, '0');
    for (std::size_t i = 0; i < kSize; ++i) {
        out[2 * i] = digits[bytes_[i] >> 4];
        out[2 * i + 1] = digits[bytes_[i] & 0xF];
    }
    return out;
}

// ---- Namespace ------------------------------------------------------------

bool Namespace::valid(std::string_view name) noexcept {
    return !name.empty() && name.size() <= kMaxBytes && name.find('\0') == std::string_view::npos;
}

Namespace::Namespace(std::string name) : name_(std::move(name)) {
    if (!valid(name_)) {
        throw Error(Errc::InvalidNamespace,
                    "namespace must be 1-255 bytes without NUL (got " +
                        std::to_string(name_.size()) + " bytes)");
    }
}

// ---- Tensor ---------------------------------------------------------------

std::string_view dtype_name(DType dtype) noexcept {
    return dtype == DType::F32 ? "f32" : "f64";
}

std::optional<DType> parse_dtype(std::string_view name) noexcept {
    if (name == "f32" || name == "F32") return DType::F32;
    if (name == "f64" || name == "F64") return DType::F64;
    return std::nullopt;
}

std::size_t Tensor::element_count(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

Tensor::Tensor(DType dtype, Shape shape, std::vector<double> values)
    : dtype_(dtype), shape_(std::move(shape)), values_(std::move(values)) {
    if (shape_.size() > kMaxRank) throw Error(Errc::InvalidTensor, "rank exceeds 8");
    if (std::any_of(shape_.begin(), shape_.end(), [](std::uint32_t d) { return d == 0; }))
        throw Error(Errc::InvalidTensor, "dimension of size 0");
    if (element_count(shape_) != values_.size())
        throw Error(Errc::InvalidTensor, "shape does not match element count");
    if (dtype_ == DType::F32)
        for (auto& v : values_) v = round_to(DType::F32, v);
}

Tensor Tensor::zeros(DType dtype, Shape shape) {
    auto n = element_count(shape);
    return Tensor(dtype, std::move(shape), std::vector<double>(n, 0.0));
}

bool operator==(const Tensor& a, const Tensor& b) noexcept {
    if (a.dtype_ != b.dtype_ || a.shape_ != b.shape_ || a.values_.size() != b.values_.size())
        return false;
    for (std::size_t i = 0; i < a.values_.size(); ++i)
        if (std::bit_cast<std::uint64_t>(a.values_[i]) != std::bit_cast<std::uint64_t>(b.values_[i]))
            return false;
    return true;
}

// ---- ModelSpec / ParameterSet ---------------------------------------------

void ModelSpec::validate() const {
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& e = layout[i];
        if (e.shape.size() > Tensor::kMaxRank) throw Error(Errc::InvalidTensor, e.name + ": rank exceeds 8");
        for (auto d : e.shape)
            if (d == 0) throw Error(Errc::InvalidTensor, e.name + ": dimension of size 0");
        for (std::size_t j = 0; j < i; ++j)
            if (layout[j].name == e.name) throw Error(Errc::DuplicateEntry, e.name);
    }
}

void ParameterSet::add(std::string name, Tensor tensor) {
    if (find(name) != nullptr) throw Error(Errc::DuplicateEntry, name);
    entries_.emplace_back(std::move(name), std::move(tensor));
}

const Tensor* ParameterSet::find(std::string_view name) const noexcept {
    for (const auto& [n, t] : entries_)
        if (n == name) return &t;
    return nullptr;
}

Tensor* ParameterSet::find(std::string_view name) noexcept {
    for (auto& [n, t] : entries_)
        if (n == name) return &t;
    return nullptr;
}

std::size_t ParameterSet::element_count() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.size();
    return n;
}

ModelSpec spec_of(const ParameterSet& ps) {
    ModelSpec spec;
    spec.layout.reserve(ps.size());
    for (const auto& [name, t] : ps) spec.layout.push_back({name, t.dtype(), t.shape()});
    return spec;
}

bool conforms(const ParameterSet& ps, const ModelSpec& spec) {
    if (ps.size() != spec.layout.size()) return false;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto& [name, t] = ps.entries()[i];
        const auto& l = spec.layout[i];
        if (name != l.name || t.dtype() != l.dtype || t.shape() != l.shape) return false;
    }
    return true;
}

double l2_distance(const ParameterSet& a, const ParameterSet& b) {
    if (!conforms(a, spec_of(b))) throw Error(Errc::SpecMismatch, "l2_distance on non-conforming sets");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto x = a.entries()[i].second.values();
        auto y = b.entries()[i].second.values();
        for (std::size_t k = 0; k < x.size(); ++k) {
            double d = x[k] - y[k];
            sum += d * d;
        }
    }
    return std::sqrt(sum);
}

std::string digest(const ParameterSet& ps) {
    std::uint64_t h = kFnvOffset;
    for (const auto& [name, t] : ps) {
        fnv(h, name.data(), name.size());
        auto dt = static_cast<std::uint8_t>(t.dtype());
        fnv(h, &dt, 1);
        for (auto d : t.shape()) fnv(h, &d, sizeof d);
        for (double v : t.values()) {
            auto bits = std::bit_cast<std::uint64_t>(v);
            fnv(h, &bits, sizeof bits);
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---- SharingMode ----------------------------------------------------------

std::string_view mode_name(SharingMode m) noexcept {
    switch (m) {
        case SharingMode::Seed: return "seed";
        case SharingMode::Leech: return "leech";
        case SharingMode::Peer: return "peer";
        case SharingMode::Block: return "block";
    }
    return "block";
}

std::optional<SharingMode> parse_mode(std::string_view name) noexcept {
    std::string lower(name);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "seed") return SharingMode::Seed;
    if (lower == "leech") return SharingMode::Leech;
    if (lower == "peer") return SharingMode::Peer;
    if (lower == "block") return SharingMode::Block;
    return std::nullopt;
}

}  // namespace meshfed
