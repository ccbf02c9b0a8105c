#include <gtest/gtest.h>

#include <random>

#include "meshfed/wire.hpp"
#include "test_util.hpp"

using namespace meshfed;
using namespace meshfed::wire;

namespace {

Errc decode_error(std::span<const std::uint8_t> buf) {
    try {
        decode_message(buf);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "decode unexpectedly succeeded";
    return Errc::Io;
}

Bytes header(Kind kind, std::string_view ns, std::uint32_t payload_len) {
    Bytes b = {0x53, 0x42, 0x46, 0x4C, 0x01, static_cast<std::uint8_t>(kind)};
    b.insert(b.end(), 16, 0x00);
    b.push_back(static_cast<std::uint8_t>(ns.size()));
    b.insert(b.end(), ns.begin(), ns.end());
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(payload_len >> (8 * i)));
    return b;
}

}  // namespace

TEST(Encode, HeartbeatHandEncoded) {
    auto m = Message::empty(Kind::Heartbeat, NodeId{}, Namespace("A"));
    Bytes expected = {0x53, 0x42, 0x46, 0x4C, 0x01, 0x06};
    expected.insert(expected.end(), 16, 0x00);
    expected.insert(expected.end(), {0x01, 0x41, 0x00, 0x00, 0x00, 0x00});
    EXPECT_EQ(encode_message(m), expected);
    EXPECT_EQ(to_hex(expected), "5342464c0106" + std::string(32, '0') + "014100000000");
}

TEST(Encode, EmptyWeightsPayloadIs18Bytes) {
    ParameterSet ps;
    ps.round = 3;
    ps.sample_count = 258;
    auto bytes = encode_message(Message::weights(NodeId{}, Namespace("A"), ps));
    Bytes expected = header(Kind::Weights, "A", 18);
    expected.insert(expected.end(), {3, 0, 0, 0, 0, 0, 0, 0});
    expected.insert(expected.end(), {0x02, 0x01, 0, 0, 0, 0, 0, 0});
    expected.insert(expected.end(), {0, 0});
    EXPECT_EQ(bytes, expected);
}

TEST(Encode, F32TensorHandEncoded) {
    ParameterSet ps;
    ps.add("w", Tensor(DType::F32, {2}, {1.0, -2.0}));
    auto bytes = encode_message(Message::weights(NodeId{}, Namespace("A"), ps));
    Bytes payload = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0};
    payload.insert(payload.end(), {0x01, 0x00, 'w', 0x00, 0x01, 0x02, 0x00, 0x00, 0x00});
    payload.insert(payload.end(), {0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0xC0});
    Bytes expected = header(Kind::Weights, "A", static_cast<std::uint32_t>(payload.size()));
    expected.insert(expected.end(), payload.begin(), payload.end());
    EXPECT_EQ(bytes, expected);
}

TEST(Encode, AnnounceHandEncoded) {
    auto m = Message::announce(NodeId{}, Namespace("A"), SharingMode::Leech, "h:1");
    Bytes expected = header(Kind::Announce, "A", 6);
    expected.insert(expected.end(), {0x01, 0x03, 0x00, 'h', ':', '1'});
    EXPECT_EQ(encode_message(m), expected);
}

TEST(Encode, RejectsBodyKindMismatch) {
    Message m = Message::empty(Kind::Weights, NodeId{}, Namespace("A"));
    try {
        encode_message(m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::MalformedPayload);
    }
}

TEST(Encode, RejectsOversizedNames) {
    ParameterSet ps;
    ps.add(std::string(70000, 'n'), Tensor::zeros(DType::F64, {1}));
    try {
        encode_message(Message::weights(NodeId{}, Namespace("A"), ps));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::BodyTooLarge);
    }
}

TEST(Decode, GuardCases) {
    Bytes short_buf = {0x53, 0x42, 0x46, 0x4C, 0x01};
    EXPECT_EQ(decode_error(short_buf), Errc::TruncatedFrame);

    auto good = encode_message(Message::empty(Kind::Heartbeat, NodeId{}, Namespace("A")));
    Bytes bad_magic = good;
    std::fill_n(bad_magic.begin(), 4, 'X');
    EXPECT_EQ(decode_error(bad_magic), Errc::BadMagic);

    Bytes bad_version = good;
    bad_version[4] = 2;
    EXPECT_EQ(decode_error(bad_version), Errc::UnsupportedVersion);

    Bytes bad_kind = good;
    bad_kind[5] = 0x08;
    EXPECT_EQ(decode_error(bad_kind), Errc::UnknownKind);
    bad_kind[5] = 0x00;
    EXPECT_EQ(decode_error(bad_kind), Errc::UnknownKind);

    Bytes cut = good;
    cut.pop_back();
    EXPECT_EQ(decode_error(cut), Errc::TruncatedFrame);

    Bytes trailing = good;
    trailing.push_back(0);
    EXPECT_EQ(decode_error(trailing), Errc::MalformedPayload);

    Bytes hb_with_payload = header(Kind::Heartbeat, "A", 1);
    hb_with_payload.push_back(0);
    EXPECT_EQ(decode_error(hb_with_payload), Errc::MalformedPayload);

    Bytes empty_ns = header(Kind::Heartbeat, "", 0);
    EXPECT_EQ(decode_error(empty_ns), Errc::MalformedPayload);
}

TEST(Decode, RejectsMalformedTensors) {
    // Declares a 2^32-1 element tensor inside a tiny payload.
    Bytes payload(18, 0);
    payload[16] = 1;
    payload.insert(payload.end(), {0x01, 0x00, 'w', 0x01, 0x02, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF});
    Bytes frame = header(Kind::Weights, "A", static_cast<std::uint32_t>(payload.size()));
    frame.insert(frame.end(), payload.begin(), payload.end());
    EXPECT_EQ(decode_error(frame), Errc::MalformedPayload);

    // dtype 7
    Bytes p2(18, 0);
    p2[16] = 1;
    p2.insert(p2.end(), {0x01, 0x00, 'w', 0x07, 0x00, 0, 0, 0, 0, 0, 0, 0, 0});
    Bytes f2 = header(Kind::Weights, "A", static_cast<std::uint32_t>(p2.size()));
    f2.insert(f2.end(), p2.begin(), p2.end());
    EXPECT_EQ(decode_error(f2), Errc::MalformedPayload);

    // rank 9
    Bytes p3(18, 0);
    p3[16] = 1;
    p3.insert(p3.end(), {0x01, 0x00, 'w', 0x01, 0x09});
    Bytes f3 = header(Kind::Weights, "A", static_cast<std::uint32_t>(p3.size()));
    f3.insert(f3.end(), p3.begin(), p3.end());
    EXPECT_EQ(decode_error(f3), Errc::MalformedPayload);
}

TEST(Decode, WeightsOriginIsSender) {
    std::mt19937_64 rng(5);
    auto sender = testutil::random_id(rng);
    ParameterSet ps;
    ps.add("b", Tensor(DType::F64, {1}, {0.5}));
    auto m = decode_message(encode_message(Message::weights(sender, Namespace("ns"), ps)));
    EXPECT_EQ(std::get<ParameterSet>(m.body).origin, sender);
}

TEST(WireProperties, RoundTripAndDeterminism) {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 2000; ++i) {
        auto m = testutil::random_message(rng);
        auto bytes = encode_message(m);
        EXPECT_EQ(encode_message(m), bytes);
        auto back = decode_message(bytes);
        ASSERT_EQ(back, m) << "message " << i;
        auto len = frame_length(bytes);
        ASSERT_TRUE(len);
        EXPECT_EQ(*len, bytes.size());
    }
}

TEST(WireProperties, TruncationsAndBitFlipsYieldTypedErrors) {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 300; ++i) {
        auto bytes = encode_message(testutil::random_message(rng));
        for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
            try {
                decode_message(std::span(bytes).first(cut));
                ADD_FAILURE() << "truncated frame decoded";
            } catch (const Error&) {
            }
        }
        Bytes flipped = bytes;
        flipped[rng() % flipped.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
        try {
            decode_message(flipped);
        } catch (const Error&) {
        }
    }
}

TEST(FrameLength, NeedsMoreBytesUntilHeaderComplete) {
    auto bytes = encode_message(Message::empty(Kind::Goodbye, NodeId{}, Namespace("abc")));
    for (std::size_t n = 0; n < 6 + 16 + 1 + 3 + 4; ++n) EXPECT_FALSE(frame_length(std::span(bytes).first(n)));
    EXPECT_EQ(frame_length(bytes), bytes.size());
    Bytes junk = {'Q'};
    EXPECT_THROW(frame_length(junk), Error);
}

TEST(Hex, RoundTrip) {
    Bytes b = {0x00, 0xAB, 0xFF};
    EXPECT_EQ(to_hex(b), "00abff");
    EXPECT_EQ(from_hex("00ABff"), b);
    EXPECT_FALSE(from_hex("0"));
    EXPECT_FALSE(from_hex("zz"));
}
