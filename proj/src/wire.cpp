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

#include "meshfed/wire.hpp"

#include <bit>
#include <cstring>
#include <limits>

namespace meshfed::wire {

std::string_view kind_name(Kind kind) noexcept {
    switch (kind) {
        case Kind::Announce: return "ANNOUNCE";
        case Kind::Hello: return "HELLO";
        case Kind::ModelRequest: return "MODEL_REQUEST";
        case Kind::ModelSpec: return "MODEL_SPEC";
        case Kind::Weights: return "WEIGHTS";
        case Kind::Heartbeat: return "HEARTBEAT";
        case Kind::Goodbye: return "GOODBYE";
    }
    return "UNKNOWN";
}

std::optional<Kind> parse_kind(std::string_view name) noexcept {
    for (std::uint8_t k = 1; k <= 7; ++k)
        if (kind_name(static_cast<Kind>(k)) == name) return static_cast<Kind>(k);
    return std::nullopt;
}

Message Message::announce(NodeId sender, Namespace ns, SharingMode mode, std::string address) {
    return Message{Kind::Announce, sender, std::move(ns), AnnounceBody{mode, std::move(address)}};
}

Message Message::empty(Kind kind, NodeId sender, Namespace ns) {
    return Message{kind, sender, std::move(ns), std::monostate{}};
}

Message Message::model_spec(NodeId sender, Namespace ns, ModelSpec spec) {
    return Message{Kind::ModelSpec, sender, std::move(ns), std::move(spec)};
}

Message Message::weights(NodeId sender, Namespace ns, ParameterSet ps) {
    return Message{Kind::Weights, sender, std::move(ns), std::move(ps)};
}

bool Message::well_formed() const noexcept {
    switch (kind) {
        case Kind::Announce: return std::holds_alternative<AnnounceBody>(body);
        case Kind::ModelSpec: return std::holds_alternative<ModelSpec>(body);
        case Kind::Weights: return std::holds_alternative<ParameterSet>(body);
        case Kind::Hello:
        case Kind::ModelRequest:
        case Kind::Heartbeat:
        case Kind::Goodbye: return std::holds_alternative<std::monostate>(body);
    }
    return false;
}

// ---- encoding -------------------------------------------------------------

namespace {

class Writer {
public:
    explicit Writer(Bytes& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { le(v, 2); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    void str16(std::string_view s, const char* what) {
        if (s.size() > std::numeric_limits<std::uint16_t>::max())
            throw Error(Errc::BodyTooLarge, std::string(what) + " longer than 65535 bytes");
        u16(static_cast<std::uint16_t>(s.size()));
        raw(s.data(), s.size());
    }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    Bytes& out_;
};

void write_layout(Writer& w, std::string_view name, DType dtype, const Shape& shape) {
    w.str16(name, "entry name");
    w.u8(static_cast<std::uint8_t>(dtype));
    w.u8(static_cast<std::uint8_t>(shape.size()));
    for (auto d : shape) w.u32(d);
}

std::uint16_t entry_count(std::size_t n) {
    if (n > std::numeric_limits<std::uint16_t>::max())
        throw Error(Errc::BodyTooLarge, "more than 65535 entries");
    return static_cast<std::uint16_t>(n);
}

void write_payload(Writer& w, const Message& m) {
    switch (m.kind) {
        case Kind::Announce: {
            const auto& a = std::get<AnnounceBody>(m.body);
            w.u8(static_cast<std::uint8_t>(a.mode));
            w.str16(a.address, "announce address");
            break;
        }
        case Kind::ModelSpec: {
            const auto& spec = std::get<ModelSpec>(m.body);
            w.u16(entry_count(spec.layout.size()));
            for (const auto& e : spec.layout) write_layout(w, e.name, e.dtype, e.shape);
            break;
        }
        case Kind::Weights: {
            const auto& ps = std::get<ParameterSet>(m.body);
            w.u64(ps.round);
            w.u64(ps.sample_count);
            w.u16(entry_count(ps.size()));
            for (const auto& [name, t] : ps) {
                write_layout(w, name, t.dtype(), t.shape());
                if (t.dtype() == DType::F32) {
                    for (double v : t.values()) w.u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
                } else {
                    for (double v : t.values()) w.u64(std::bit_cast<std::uint64_t>(v));
                }
            }
            break;
        }
        default: break;
    }
}

}  // namespace

Bytes encode_message(const Message& m) {
    if (!m.well_formed())
        throw Error(Errc::MalformedPayload, std::string("body does not match kind ") +
                                                std::string(kind_name(m.kind)));
    if (!Namespace::valid(m.ns.str())) throw Error(Errc::InvalidNamespace, "namespace");

    Bytes payload;
    Writer pw(payload);
    write_payload(pw, m);
    if (payload.size() > std::numeric_limits<std::uint32_t>::max())
        throw Error(Errc::BodyTooLarge, "payload exceeds u32 range");

    Bytes out;
    out.reserve(kPrefixBytes + 16 + 1 + m.ns.str().size() + 4 + payload.size());
    Writer w(out);
    w.raw(kMagic, 4);
    w.u8(kVersion);
    w.u8(static_cast<std::uint8_t>(m.kind));
    w.raw(m.sender.bytes().data(), NodeId::kSize);
    w.u8(static_cast<std::uint8_t>(m.ns.str().size()));
    w.raw(m.ns.str().data(), m.ns.str().size());
    w.u32(static_cast<std::uint32_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

// ---- decoding -------------------------------------------------------------

namespace {

/// Bounded reader; running off the end raises `short_code`.
class Reader {
public:
    Reader(std::span<const std::uint8_t> buf, Errc short_code) : buf_(buf), short_(short_code) {}

    std::size_t remaining() const noexcept { return buf_.size() - pos_; }
    std::size_t pos() const noexcept { return pos_; }

    std::span<const std::uint8_t> take(std::size_t n) {
        if (n > remaining()) throw Error(short_, "need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_));
        auto s = buf_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint8_t u8() { return take(1)[0]; }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    std::string str(std::size_t n) {
        auto s = take(n);
        return std::string(reinterpret_cast<const char*>(s.data()), s.size());
    }

private:
    std::uint64_t le(int n) {
        auto s = take(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
        return v;
    }

    std::span<const std::uint8_t> buf_;
    std::size_t pos_ = 0;
    Errc short_;
};

[[noreturn]] void malformed(const std::string& what) { throw Error(Errc::MalformedPayload, what); }

LayoutEntry read_layout(Reader& r) {
    LayoutEntry e;
    e.name = r.str(r.u16());
    auto dtype = r.u8();
    if (dtype > 1) malformed("unknown dtype " + std::to_string(dtype));
    e.dtype = static_cast<DType>(dtype);
    auto ndim = r.u8();
    if (ndim > Tensor::kMaxRank) malformed("rank " + std::to_string(ndim) + " exceeds 8");
    e.shape.reserve(ndim);
    for (int i = 0; i < ndim; ++i) {
        auto d = r.u32();
        if (d == 0) malformed("zero dimension in " + e.name);
        e.shape.push_back(d);
    }
    return e;
}

std::vector<double> read_values(Reader& r, const LayoutEntry& e) {
    // Guard the element count against the bytes actually present before
    // allocating anything; dims are attacker-controlled.
    const std::size_t width = e.dtype == DType::F32 ? 4 : 8;
    const std::size_t limit = r.remaining() / width;
    std::size_t count = 1;
    for (auto d : e.shape) {
        count *= d;  // count <= limit < 2^32 before this, so no overflow
        if (count > limit) malformed("tensor " + e.name + " exceeds payload");
    }
    std::vector<double> values(count);
    for (auto& v : values) {
        if (width == 4) {
            v = static_cast<double>(std::bit_cast<float>(r.u32()));
        } else {
            v = std::bit_cast<double>(r.u64());
        }
    }
    return values;
}

Body read_body(Kind kind, std::span<const std::uint8_t> payload) {
    Reader r(payload, Errc::MalformedPayload);
    Body body;
    switch (kind) {
        case Kind::Announce: {
            auto mode = r.u8();
            if (mode > 3) malformed("unknown sharing mode " + std::to_string(mode));
            AnnounceBody a;
            a.mode = static_cast<SharingMode>(mode);
            a.address = r.str(r.u16());
            body = std::move(a);
            break;
        }
        case Kind::ModelSpec: {
            ModelSpec spec;
            auto n = r.u16();
            for (int i = 0; i < n; ++i) {
                auto e = read_layout(r);
                for (const auto& prev : spec.layout)
                    if (prev.name == e.name) malformed("duplicate entry " + e.name);
                spec.layout.push_back(std::move(e));
            }
            body = std::move(spec);
            break;
        }
        case Kind::Weights: {
            ParameterSet ps;
            ps.round = r.u64();
            ps.sample_count = r.u64();
            auto n = r.u16();
            for (int i = 0; i < n; ++i) {
                auto e = read_layout(r);
                if (ps.find(e.name) != nullptr) malformed("duplicate entry " + e.name);
                auto values = read_values(r, e);
                ps.add(e.name, Tensor(e.dtype, e.shape, std::move(values)));
            }
            body = std::move(ps);
            break;
        }
        default: break;
    }
    if (r.remaining() != 0) malformed(std::to_string(r.remaining()) + " trailing payload bytes");
    return body;
}

Kind check_prefix(std::span<const std::uint8_t> buf) {
    if (buf.size() < kPrefixBytes) throw Error(Errc::TruncatedFrame, "shorter than frame prefix");
    if (std::memcmp(buf.data(), kMagic, 4) != 0) throw Error(Errc::BadMagic, "bad frame magic");
    if (buf[4] != kVersion)
        throw Error(Errc::UnsupportedVersion, "version " + std::to_string(buf[4]));
    if (buf[5] < 1 || buf[5] > 7) throw Error(Errc::UnknownKind, "kind " + std::to_string(buf[5]));
    return static_cast<Kind>(buf[5]);
}

}  // namespace

std::optional<std::size_t> frame_length(std::span<const std::uint8_t> buf) {
    if (buf.size() < kPrefixBytes) {
        // Reject a bad magic as soon as its bytes are visible.
        for (std::size_t i = 0; i < buf.size() && i < 4; ++i)
            if (buf[i] != kMagic[i]) throw Error(Errc::BadMagic, "bad frame magic");
        return std::nullopt;
    }
    check_prefix(buf);
    const std::size_t ns_at = kPrefixBytes + NodeId::kSize;
    if (buf.size() < ns_at + 1) return std::nullopt;
    const std::size_t len_at = ns_at + 1 + buf[ns_at];
    if (buf.size() < len_at + 4) return std::nullopt;
    std::size_t payload = 0;
    for (int i = 0; i < 4; ++i) payload |= static_cast<std::size_t>(buf[len_at + i]) << (8 * i);
    return len_at + 4 + payload;
}

Message decode_message(std::span<const std::uint8_t> buf) {
    Kind kind = check_prefix(buf);
    Reader r(buf, Errc::TruncatedFrame);
    r.take(kPrefixBytes);

    NodeId::Bytes id{};
    auto sender = r.take(NodeId::kSize);
    std::memcpy(id.data(), sender.data(), NodeId::kSize);

    std::string ns = r.str(r.u8());
    if (!Namespace::valid(ns)) malformed("invalid namespace");

    auto payload_len = r.u32();
    auto payload = r.take(payload_len);
    if (r.remaining() != 0) malformed(std::to_string(r.remaining()) + " bytes after frame end");

    Message m{kind, NodeId(id), Namespace(std::move(ns)), read_body(kind, payload)};
    if (auto* ps = std::get_if<ParameterSet>(&m.body)) ps->origin = m.sender;
    return m;
}

// ---- hex ------------------------------------------------------------------

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xF]);
    }
    return out;
}

std::optional<Bytes> from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) return std::nullopt;
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = nibble(hex[2 * i]);
        int lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out[i] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return out;
}

}  // namespace meshfed::wire
