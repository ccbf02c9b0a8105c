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

// Frame layout (all integers little-endian):
//
//   "SBFL" | version u8 = 1 | kind u8 | sender [16] | ns_len u8 | ns bytes
//   | payload_len u32 | payload
//
// Payloads:
//   ANNOUNCE    mode u8 | addr_len u16 | addr bytes
//   MODEL_SPEC  count u16 | { name_len u16 | name | dtype u8 | ndim u8 | dims u32... }
//   WEIGHTS     round u64 | sample_count u64 | count u16
//               | { name_len u16 | name | dtype u8 | ndim u8 | dims u32... | raw values }
//   others      empty
//
// Raw values are IEEE-754 little-endian, 4 bytes for F32 and 8 for F64.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "meshfed/core.hpp"

namespace meshfed::wire {

inline constexpr std::uint8_t kMagic[4] = {'S', 'B', 'F', 'L'};
inline constexpr std::uint8_t kVersion = 1;
/// Magic, version and kind.
inline constexpr std::size_t kPrefixBytes = 6;

enum class Kind : std::uint8_t {
    Announce = 0x01,
    Hello = 0x02,
    ModelRequest = 0x03,
    ModelSpec = 0x04,
    Weights = 0x05,
    Heartbeat = 0x06,
    Goodbye = 0x07,
};

std::string_view kind_name(Kind kind) noexcept;
std::optional<Kind> parse_kind(std::string_view name) noexcept;

struct AnnounceBody {
    SharingMode mode = SharingMode::Peer;
    std::string address;

    friend bool operator==(const AnnounceBody&, const AnnounceBody&) = default;
};

using Body = std::variant<std::monostate, AnnounceBody, ModelSpec, ParameterSet>;

struct Message {
    Kind kind = Kind::Heartbeat;
    NodeId sender;
    Namespace ns;
    Body body;

    static Message announce(NodeId sender, Namespace ns, SharingMode mode, std::string address);
    static Message empty(Kind kind, NodeId sender, Namespace ns);
    static Message model_spec(NodeId sender, Namespace ns, ModelSpec spec);
    static Message weights(NodeId sender, Namespace ns, ParameterSet ps);

    /// True when the body alternative matches the kind.
    bool well_formed() const noexcept;

    friend bool operator==(const Message&, const Message&) = default;
};

using Bytes = std::vector<std::uint8_t>;

/// Throws Error with BodyTooLarge when a length field would overflow, or
/// MalformedPayload when the body does not match the kind.
Bytes encode_message(const Message& m);

/// Total over arbitrary input. Throws Error with one of BadMagic,
/// UnsupportedVersion, TruncatedFrame, UnknownKind, MalformedPayload.
Message decode_message(std::span<const std::uint8_t> buf);

/// For stream transports: the full frame length once enough header bytes are
/// buffered, std::nullopt while more are needed. Throws like decode_message on
/// a bad prefix.
std::optional<std::size_t> frame_length(std::span<const std::uint8_t> buf);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::optional<Bytes> from_hex(std::string_view hex);

}  // namespace meshfed::wire
