#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "meshfed/conformance.hpp"

using namespace meshfed;
namespace fs = std::filesystem;

namespace {

const fs::path kVectors = fs::path(MESHFED_SOURCE_DIR) / "conformance" / "vectors";

std::vector<std::string> lines_of(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(line);
    return out;
}

const conformance::Vector& named(const std::vector<conformance::Vector>& vs, const std::string& name) {
    for (const auto& v : vs)
        if (v.name == name) return v;
    throw std::runtime_error("no vector " + name);
}

std::string hex_of(std::string_view s) {
    return wire::to_hex(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

}  // namespace

TEST(Conformance, CommittedFilesPass) {
    std::size_t total = 0;
    for (const auto& entry : fs::directory_iterator(kVectors)) {
        if (entry.path().extension() != ".jsonl") continue;
        for (const auto& line : lines_of(entry.path())) {
            auto v = conformance::from_line(line);
            auto why = conformance::check(v);
            EXPECT_FALSE(why.has_value()) << entry.path().filename() << " " << v.name << ": " << *why;
            ++total;
        }
    }
    EXPECT_GE(total, 50u);
}

TEST(Conformance, CommittedFilesMatchGenerator) {
    for (const auto& [stem, vectors] : conformance::standard_vectors()) {
        auto lines = lines_of(kVectors / (stem + ".jsonl"));
        ASSERT_EQ(lines.size(), vectors.size()) << stem;
        for (std::size_t i = 0; i < lines.size(); ++i) EXPECT_EQ(lines[i], conformance::to_line(vectors[i])) << stem << " " << i;
    }
}

TEST(Conformance, LineRoundTrip) {
    for (const auto& [stem, vectors] : conformance::standard_vectors())
        for (const auto& v : vectors) {
            auto back = conformance::from_line(conformance::to_line(v));
            EXPECT_EQ(back.frame, v.frame);
            EXPECT_EQ(back.error, v.error);
            EXPECT_EQ(back.expect, v.expect) << v.name;
        }
}

TEST(Conformance, HandEncodedFrames) {
    auto sets = conformance::standard_vectors();
    const auto& ok = sets.at(0).second;
    const std::string sender = "101112131415161718191a1b1c1d1e1f";
    EXPECT_EQ(wire::to_hex(named(ok, "heartbeat").frame),
              "5342464c" "01" "06" + sender + "09" + hex_of("MyNetwork") + "00000000");
    EXPECT_EQ(wire::to_hex(named(ok, "weights_scalar").frame),
              "5342464c" "01" "05" + sender + "09" + hex_of("MyNetwork") + "1f000000" +
                  "0200000000000000" "0200000000000000" "0100" "0100" + hex_of("s") + "01" "00" +
                  "0000000000004540");
    EXPECT_EQ(wire::to_hex(named(ok, "announce_seed").frame),
              "5342464c" "01" "01" + sender + "09" + hex_of("MyNetwork") + "11000000" "00" "0e00" +
                  hex_of("127.0.0.1:7000"));
}

TEST(Conformance, CheckCatchesMismatches) {
    auto sets = conformance::standard_vectors();
    auto v = named(sets.at(0).second, "weights_linear_f64");
    v.frame[v.frame.size() - 1] ^= 1;  // flips a value bit
    EXPECT_TRUE(conformance::check(v).has_value());

    auto bad = named(sets.at(1).second, "bad_magic");
    bad.error = Errc::UnknownKind;
    EXPECT_TRUE(conformance::check(bad).has_value());
}

TEST(Conformance, MalformedLinesRejected) {
    EXPECT_THROW(conformance::from_line("{\"name\":\"x\",\"frame\":\"zz\",\"error\":\"BadMagic\"}"), Error);
    EXPECT_THROW(conformance::from_line("{\"name\":\"x\",\"frame\":\"00\"}"), Error);
    EXPECT_THROW(conformance::from_line("{\"name\":\"x\",\"frame\":\"00\",\"error\":\"Nope\"}"), Error);
    EXPECT_THROW(conformance::from_line("not json"), Error);
}
