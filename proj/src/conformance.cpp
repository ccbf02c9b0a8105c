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

#include "meshfed/conformance.hpp"

#include <cstring>
#include <random>

namespace meshfed::conformance {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(Errc::ValidationError, what); }

std::optional<Errc> parse_errc(std::string_view name) {
    for (int i = 0; i <= static_cast<int>(Errc::BindFailed); ++i)
        if (errc_name(static_cast<Errc>(i)) == name) return static_cast<Errc>(i);
    return std::nullopt;
}

ordered_json layout_json(const std::string& name, DType dtype, const Shape& shape) {
    ordered_json e;
    e["name"] = name;
    e["dtype"] = dtype_name(dtype);
    e["shape"] = shape;
    return e;
}

LayoutEntry layout_from(const json& e) {
    LayoutEntry out;
    out.name = e.at("name").get<std::string>();
    auto dt = parse_dtype(e.at("dtype").get<std::string>());
    if (!dt) bad("unknown dtype " + e.at("dtype").dump());
    out.dtype = *dt;
    out.shape = e.at("shape").get<Shape>();
    return out;
}

}  // namespace

ordered_json describe(const wire::Message& m) {
    ordered_json j;
    j["kind"] = wire::kind_name(m.kind);
    j["sender"] = m.sender.hex();
    j["namespace"] = m.ns.str();
    if (const auto* a = std::get_if<wire::AnnounceBody>(&m.body)) {
        j["mode"] = mode_name(a->mode);
        j["address"] = a->address;
    } else if (const auto* spec = std::get_if<ModelSpec>(&m.body)) {
        j["layout"] = ordered_json::array();
        for (const auto& e : spec->layout) j["layout"].push_back(layout_json(e.name, e.dtype, e.shape));
    } else if (const auto* ps = std::get_if<ParameterSet>(&m.body)) {
        j["round"] = ps->round;
        j["sample_count"] = ps->sample_count;
        j["entries"] = ordered_json::array();
        for (const auto& [name, t] : *ps) {
            auto e = layout_json(name, t.dtype(), t.shape());
            e["values"] = std::vector<double>(t.values().begin(), t.values().end());
            j["entries"].push_back(std::move(e));
        }
    }
    return j;
}

wire::Message from_description(const json& j) {
    try {
        auto kind = wire::parse_kind(j.at("kind").get<std::string>());
        if (!kind) bad("unknown kind " + j.at("kind").dump());
        auto sender = NodeId::from_hex(j.at("sender").get<std::string>());
        if (!sender) bad("sender is not 32 hex digits");
        Namespace ns(j.at("namespace").get<std::string>());
        switch (*kind) {
            case wire::Kind::Announce: {
                auto mode = parse_mode(j.at("mode").get<std::string>());
                if (!mode) bad("unknown mode " + j.at("mode").dump());
                return wire::Message::announce(*sender, ns, *mode, j.at("address").get<std::string>());
            }
            case wire::Kind::ModelSpec: {
                ModelSpec spec;
                for (const auto& e : j.at("layout")) spec.layout.push_back(layout_from(e));
                return wire::Message::model_spec(*sender, ns, std::move(spec));
            }
            case wire::Kind::Weights: {
                ParameterSet ps;
                ps.round = j.at("round").get<std::uint64_t>();
                ps.sample_count = j.at("sample_count").get<std::uint64_t>();
                ps.origin = *sender;
                for (const auto& e : j.at("entries")) {
                    auto l = layout_from(e);
                    ps.add(l.name, Tensor(l.dtype, l.shape, e.at("values").get<std::vector<double>>()));
                }
                return wire::Message::weights(*sender, ns, std::move(ps));
            }
            default: return wire::Message::empty(*kind, *sender, ns);
        }
    } catch (const json::exception& e) {
        bad(std::string("description: ") + e.what());
    }
}

std::string to_line(const Vector& v) {
    ordered_json j;
    j["name"] = v.name;
    j["frame"] = wire::to_hex(v.frame);
    if (v.expect) j["expect"] = describe(*v.expect);
    if (v.error) j["error"] = errc_name(*v.error);
    return j.dump();
}

Vector from_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        bad(std::string("vector line: ") + e.what());
    }
    Vector v;
    v.name = j.value("name", "");
    auto frame = wire::from_hex(j.value("frame", ""));
    if (!frame) bad(v.name + ": frame is not hex");
    v.frame = std::move(*frame);
    if (j.contains("expect")) v.expect = from_description(j["expect"]);
    if (j.contains("error")) {
        v.error = parse_errc(j["error"].get<std::string>());
        if (!v.error) bad(v.name + ": unknown error " + j["error"].dump());
    }
    if (v.expect.has_value() == v.error.has_value()) bad(v.name + ": needs exactly one of expect, error");
    return v;
}

std::optional<std::string> check(const Vector& v) {
    try {
        auto m = wire::decode_message(v.frame);
        if (!v.expect) return "decoded, expected " + std::string(errc_name(*v.error));
        if (!(m == *v.expect)) return "decoded to " + describe(m).dump();
        if (wire::encode_message(*v.expect) != v.frame) return "re-encoding differs";
    } catch (const Error& e) {
        if (v.expect) return std::string("rejected: ") + e.what();
        if (e.code() != *v.error) return std::string("wrong error: ") + e.what();
    }
    return std::nullopt;
}

// ---- the fixed set ----------------------------------------------------------

namespace {

NodeId fixed_id(std::uint8_t salt) {
    NodeId::Bytes b{};
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<std::uint8_t>(salt * 16 + i);
    return NodeId(b);
}

Tensor tensor(DType dtype, Shape shape, std::vector<double> values) {
    return Tensor(dtype, std::move(shape), std::move(values));
}

ParameterSet params(std::uint64_t round, std::uint64_t samples, const NodeId& origin,
                    std::vector<ParameterSet::Entry> entries) {
    ParameterSet ps;
    ps.round = round;
    ps.sample_count = samples;
    ps.origin = origin;
    for (auto& [n, t] : entries) ps.add(n, std::move(t));
    return ps;
}

// Values from raw generator bits only, so the set does not depend on a
// library's distribution algorithms.
std::vector<double> gen_values(std::mt19937_64& rng, std::size_t n, DType dtype) {
    std::vector<double> out(n);
    for (auto& v : out) {
        const auto r = rng();
        const double x = static_cast<double>(static_cast<std::int64_t>(r >> 11) - (std::int64_t{1} << 52)) /
                         static_cast<double>(std::int64_t{1} << 48);
        v = Tensor::round_to(dtype, x);
    }
    return out;
}

Vector valid(std::string name, wire::Message m) {
    Vector v{std::move(name), wire::encode_message(m), std::move(m), std::nullopt};
    return v;
}

Vector invalid(std::string name, wire::Bytes frame, Errc code) {
    return Vector{std::move(name), std::move(frame), std::nullopt, code};
}

void put_u32(wire::Bytes& b, std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

}  // namespace

std::vector<std::pair<std::string, std::vector<Vector>>> standard_vectors() {
    using wire::Kind;
    using wire::Message;
    const NodeId a = fixed_id(1), b = fixed_id(2);
    const Namespace ns("MyNetwork");

    std::vector<Vector> ok;
    ok.push_back(valid("hello", Message::empty(Kind::Hello, a, ns)));
    ok.push_back(valid("heartbeat", Message::empty(Kind::Heartbeat, a, ns)));
    ok.push_back(valid("goodbye", Message::empty(Kind::Goodbye, b, ns)));
    ok.push_back(valid("model_request", Message::empty(Kind::ModelRequest, b, ns)));
    for (auto mode : {SharingMode::Seed, SharingMode::Leech, SharingMode::Peer, SharingMode::Block})
        ok.push_back(valid("announce_" + std::string(mode_name(mode)),
                           Message::announce(a, ns, mode, "127.0.0.1:7000")));
    ok.push_back(valid("announce_empty_address", Message::announce(b, ns, SharingMode::Peer, "")));
    ok.push_back(valid("namespace_one_byte", Message::empty(Kind::Heartbeat, a, Namespace("x"))));
    ok.push_back(valid("namespace_255_bytes", Message::empty(Kind::Heartbeat, a, Namespace(std::string(255, 'n')))));
    ok.push_back(valid("namespace_utf8", Message::empty(Kind::Hello, b, Namespace("r\xc3\xa9seau"))));

    ok.push_back(valid("model_spec_linear",
                       Message::model_spec(a, ns, ModelSpec{{{"w", DType::F64, {8}}, {"b", DType::F64, {1}}}})));
    ok.push_back(valid("model_spec_mlp_f32",
                       Message::model_spec(a, ns, ModelSpec{{{"w1", DType::F32, {8, 4}},
                                                             {"b1", DType::F32, {8}},
                                                             {"w2", DType::F32, {1, 8}},
                                                             {"b2", DType::F32, {1}}}})));
    ok.push_back(valid("model_spec_empty", Message::model_spec(b, ns, ModelSpec{})));
    ok.push_back(valid("model_spec_scalar", Message::model_spec(b, ns, ModelSpec{{{"s", DType::F64, {}}}})));
    ok.push_back(valid("model_spec_rank8",
                       Message::model_spec(b, ns, ModelSpec{{{"t", DType::F32, {1, 2, 1, 2, 1, 2, 1, 2}}}})));

    ok.push_back(valid("weights_linear_f64",
                       Message::weights(a, ns, params(3, 128, a, {{"w", tensor(DType::F64, {4}, {0.5, -1.25, 3.0, 1e-300})},
                                                                  {"b", tensor(DType::F64, {1}, {-0.0})}}))));
    ok.push_back(valid("weights_f32",
                       Message::weights(b, ns, params(1, 7, b, {{"w", tensor(DType::F32, {2, 2}, {1.5, -2.0, 0.1f, 3.4028234663852886e38})}}))));
    ok.push_back(valid("weights_mixed_dtype",
                       Message::weights(a, ns, params(9, 1, a, {{"f", tensor(DType::F32, {2}, {0.25, -0.75})},
                                                                {"d", tensor(DType::F64, {2}, {0.1, 5e-324})}}))));
    ok.push_back(valid("weights_empty", Message::weights(b, ns, params(0, 0, b, {}))));
    ok.push_back(valid("weights_scalar", Message::weights(a, ns, params(2, 2, a, {{"s", tensor(DType::F64, {}, {42.0})}}))));
    ok.push_back(valid("weights_max_counters",
                       Message::weights(a, ns, params(UINT64_MAX, UINT64_MAX, a, {{"b", tensor(DType::F64, {1}, {1.0})}}))));

    std::mt19937_64 rng(0x6d657368);
    for (int i = 0; i < 16; ++i) {
        const DType dt = (rng() & 1) ? DType::F32 : DType::F64;
        const auto rows = static_cast<std::uint32_t>(1 + rng() % 4);
        const auto cols = static_cast<std::uint32_t>(1 + rng() % 5);
        NodeId::Bytes idb{};
        for (auto& x : idb) x = static_cast<std::uint8_t>(rng());
        const NodeId id(idb);
        auto ps = params(rng() % 1000, rng() % 100000, id,
                         {{"w", tensor(dt, {rows, cols}, gen_values(rng, std::size_t{rows} * cols, dt))},
                          {"b", tensor(dt, {rows}, gen_values(rng, rows, dt))}});
        ok.push_back(valid("weights_generated_" + std::to_string(i), Message::weights(id, ns, std::move(ps))));
    }

    // Rejections, built by damaging good frames.
    std::vector<Vector> bad_frames;
    const auto hb = wire::encode_message(Message::empty(Kind::Heartbeat, a, ns));
    const auto an = wire::encode_message(Message::announce(a, ns, SharingMode::Peer, "h:1"));
    const auto spec = wire::encode_message(Message::model_spec(a, ns, ModelSpec{{{"w", DType::F64, {2}}}}));
    const auto wts = wire::encode_message(
        Message::weights(a, ns, params(1, 1, a, {{"w", tensor(DType::F64, {2}, {1.0, 2.0})}})));
    const std::size_t ns_at = wire::kPrefixBytes + NodeId::kSize;
    const std::size_t payload_at = ns_at + 1 + ns.str().size() + 4;

    bad_frames.push_back(invalid("empty_buffer", {}, Errc::TruncatedFrame));
    bad_frames.push_back(invalid("prefix_only", wire::Bytes(hb.begin(), hb.begin() + 6), Errc::TruncatedFrame));
    {
        auto f = hb;
        f[0] = 'X';
        bad_frames.push_back(invalid("bad_magic", f, Errc::BadMagic));
    }
    {
        auto f = hb;
        f[4] = 2;
        bad_frames.push_back(invalid("version_2", f, Errc::UnsupportedVersion));
    }
    {
        auto f = hb;
        f[4] = 0;
        bad_frames.push_back(invalid("version_0", f, Errc::UnsupportedVersion));
    }
    for (std::uint8_t k : {0, 8, 255}) {
        auto f = hb;
        f[5] = k;
        bad_frames.push_back(invalid("kind_" + std::to_string(k), f, Errc::UnknownKind));
    }
    bad_frames.push_back(invalid("truncated_sender", wire::Bytes(hb.begin(), hb.begin() + 12), Errc::TruncatedFrame));
    bad_frames.push_back(invalid("truncated_length", wire::Bytes(hb.begin(), hb.end() - 2), Errc::TruncatedFrame));
    {
        auto f = hb;
        f.push_back(0);
        bad_frames.push_back(invalid("trailing_byte", f, Errc::MalformedPayload));
    }
    {
        auto f = hb;
        put_u32(f, payload_at - 4, 10);
        bad_frames.push_back(invalid("payload_beyond_buffer", f, Errc::TruncatedFrame));
    }
    {
        wire::Bytes f(hb.begin(), hb.begin() + static_cast<std::ptrdiff_t>(ns_at));
        f.push_back(0);
        f.insert(f.end(), {0, 0, 0, 0});
        bad_frames.push_back(invalid("empty_namespace", f, Errc::MalformedPayload));
    }
    {
        auto f = hb;
        f[ns_at + 3] = 0;
        bad_frames.push_back(invalid("namespace_nul", f, Errc::MalformedPayload));
    }
    {
        auto f = hb;
        f.push_back(0xAB);
        put_u32(f, payload_at - 4, 1);
        bad_frames.push_back(invalid("heartbeat_with_payload", f, Errc::MalformedPayload));
    }
    {
        auto f = an;
        f[payload_at] = 4;
        bad_frames.push_back(invalid("announce_mode_4", f, Errc::MalformedPayload));
    }
    {
        auto f = an;
        f[payload_at + 1] = 9;
        bad_frames.push_back(invalid("announce_address_overrun", f, Errc::MalformedPayload));
    }
    {
        // layout entry: u16 count, u16 name len, name, dtype, ndim, dims
        auto f = spec;
        f[payload_at + 2 + 2 + 1] = 2;
        bad_frames.push_back(invalid("spec_unknown_dtype", f, Errc::MalformedPayload));
    }
    {
        auto f = spec;
        f[payload_at + 2 + 2 + 1 + 1] = 9;
        bad_frames.push_back(invalid("spec_rank_9", f, Errc::MalformedPayload));
    }
    {
        auto f = spec;
        put_u32(f, payload_at + 2 + 2 + 1 + 2, 0);
        bad_frames.push_back(invalid("spec_zero_dim", f, Errc::MalformedPayload));
    }
    {
        auto f = wire::encode_message(Message::model_spec(
            a, ns, ModelSpec{{{"w", DType::F64, {2}}, {"v", DType::F64, {2}}}}));
        f[payload_at + 2 + 2 + 1 + 2 + 4 + 2] = 'w';
        bad_frames.push_back(invalid("spec_duplicate_name", f, Errc::MalformedPayload));
    }
    {
        auto f = wts;
        f.resize(f.size() - 8);
        put_u32(f, payload_at - 4, static_cast<std::uint32_t>(f.size() - payload_at));
        bad_frames.push_back(invalid("weights_values_short", f, Errc::MalformedPayload));
    }
    {
        auto f = wts;
        put_u32(f, payload_at + 8 + 8 + 2 + 2 + 1 + 2, 0xFFFFFFFF);
        bad_frames.push_back(invalid("weights_huge_dim", f, Errc::MalformedPayload));
    }
    {
        auto f = wts;
        f.resize(payload_at + 10);
        put_u32(f, payload_at - 4, 10);
        bad_frames.push_back(invalid("weights_header_short", f, Errc::MalformedPayload));
    }

    return {{"valid", std::move(ok)}, {"invalid", std::move(bad_frames)}};
}

}  // namespace meshfed::conformance
