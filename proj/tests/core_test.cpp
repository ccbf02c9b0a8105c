#include <gtest/gtest.h>

#include <random>

#include "meshfed/core.hpp"
#include "test_util.hpp"

using namespace meshfed;

TEST(SpecOf, SingleEntryProjection) {
    ParameterSet ps;
    ps.add("w", Tensor::zeros(DType::F32, {2, 3}));
    auto spec = spec_of(ps);
    ASSERT_EQ(spec.layout.size(), 1u);
    EXPECT_EQ(spec.layout[0], (LayoutEntry{"w", DType::F32, {2, 3}}));
}

TEST(SpecOf, EmptySetGivesEmptyLayout) { EXPECT_TRUE(spec_of(ParameterSet{}).layout.empty()); }

TEST(SpecOf, PreservesInsertionOrder) {
    ParameterSet ps;
    ps.add("b", Tensor::zeros(DType::F64, {1}));
    ps.add("w", Tensor::zeros(DType::F64, {4}));
    auto spec = spec_of(ps);
    ASSERT_EQ(spec.layout.size(), 2u);
    EXPECT_EQ(spec.layout[0].name, "b");
    EXPECT_EQ(spec.layout[1].name, "w");
}

TEST(Conforms, IdentityDtypeAndOrder) {
    ParameterSet ps;
    ps.add("w", Tensor::zeros(DType::F32, {2}));
    ps.add("b", Tensor::zeros(DType::F32, {1}));
    EXPECT_TRUE(conforms(ps, spec_of(ps)));

    ParameterSet as_f64;
    as_f64.add("w", Tensor::zeros(DType::F64, {2}));
    as_f64.add("b", Tensor::zeros(DType::F64, {1}));
    EXPECT_FALSE(conforms(as_f64, spec_of(ps)));

    ParameterSet reordered;
    reordered.add("b", Tensor::zeros(DType::F32, {1}));
    reordered.add("w", Tensor::zeros(DType::F32, {2}));
    EXPECT_FALSE(conforms(reordered, spec_of(ps)));
}

TEST(L2Distance, Examples) {
    ParameterSet a, b;
    a.add("v", Tensor(DType::F64, {2}, {0.0, 0.0}));
    b.add("v", Tensor(DType::F64, {2}, {3.0, 4.0}));
    EXPECT_EQ(l2_distance(a, a), 0.0);
    EXPECT_DOUBLE_EQ(l2_distance(a, b), 5.0);

    ParameterSet c;
    c.add("v", Tensor(DType::F64, {1, 2}, {3.0, 4.0}));
    try {
        l2_distance(a, c);
        FAIL() << "expected SpecMismatch";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::SpecMismatch);
    }
}

TEST(CoreProperties, ConformsAndDistanceOverRandomSets) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        ParameterSet a = testutil::random_params(rng, NodeId::derive("a", trial));
        EXPECT_TRUE(conforms(a, spec_of(a)));
        ParameterSet b = testutil::perturbed(a, rng);
        const double ab = l2_distance(a, b);
        EXPECT_EQ(ab, l2_distance(b, a));
        EXPECT_GE(ab, 0.0);
        EXPECT_EQ(l2_distance(a, a), 0.0);
        EXPECT_EQ(ab == 0.0, a.entries() == b.entries());
    }
}

TEST(Tensor, RejectsBadShapes) {
    EXPECT_THROW(Tensor(DType::F64, {2, 2}, {1.0, 2.0}), Error);
    EXPECT_THROW(Tensor(DType::F64, {0}, {}), Error);
    EXPECT_THROW(Tensor::zeros(DType::F64, Shape(9, 1)), Error);
    EXPECT_NO_THROW(Tensor::zeros(DType::F64, Shape(8, 1)));
}

TEST(Tensor, F32ValuesAreNarrowed) {
    Tensor t(DType::F32, {1}, {0.1});
    EXPECT_EQ(t[0], static_cast<double>(0.1f));
}

TEST(ParameterSet, DuplicateNamesRejected) {
    ParameterSet ps;
    ps.add("w", Tensor::zeros(DType::F64, {1}));
    try {
        ps.add("w", Tensor::zeros(DType::F64, {1}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::DuplicateEntry);
    }
}

TEST(Namespace, Validation) {
    EXPECT_THROW(Namespace(""), Error);
    EXPECT_THROW(Namespace(std::string("a\0b", 3)), Error);
    EXPECT_THROW(Namespace(std::string(256, 'x')), Error);
    EXPECT_NO_THROW(Namespace(std::string(255, 'x')));
    EXPECT_EQ(Namespace("MyNetwork").str(), "MyNetwork");
}

TEST(NodeId, HexRoundTripAndOrdering) {
    auto id = NodeId::random();
    auto parsed = NodeId::from_hex(id.hex());
    ASSERT_TRUE(parsed);
    EXPECT_EQ(*parsed, id);
    EXPECT_FALSE(NodeId::from_hex("zz"));
    EXPECT_EQ(NodeId::derive("n0", 1), NodeId::derive("n0", 1));
    EXPECT_NE(NodeId::derive("n0", 1), NodeId::derive("n0", 2));
    NodeId zero;
    EXPECT_LT(zero, *NodeId::from_hex("00000000000000000000000000000001"));
}

TEST(SharingMode, SendReceivePermissions) {
    EXPECT_TRUE(may_send(SharingMode::Seed));
    EXPECT_FALSE(may_receive(SharingMode::Seed));
    EXPECT_FALSE(may_send(SharingMode::Leech));
    EXPECT_TRUE(may_receive(SharingMode::Leech));
    EXPECT_TRUE(may_send(SharingMode::Peer));
    EXPECT_TRUE(may_receive(SharingMode::Peer));
    EXPECT_FALSE(may_send(SharingMode::Block));
    EXPECT_FALSE(may_receive(SharingMode::Block));
    EXPECT_EQ(parse_mode("LEECH"), SharingMode::Leech);
    EXPECT_FALSE(parse_mode("lurker"));
}

TEST(Digest, SensitiveToValueBits) {
    ParameterSet a;
    a.add("w", Tensor(DType::F64, {2}, {1.0, 2.0}));
    ParameterSet b = a;
    EXPECT_EQ(digest(a), digest(b));
    b.find("w")->set(1, 2.0000000000000004);
    EXPECT_NE(digest(a), digest(b));
}
