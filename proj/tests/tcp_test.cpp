#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "meshfed/refmodel.hpp"
#include "meshfed/scenario.hpp"
#include "meshfed/tcp.hpp"

using namespace meshfed;
using namespace std::chrono_literals;

namespace {

const Namespace kNs("tcp-test");

std::vector<wire::Bytes> receive_n(TcpTransport& t, std::size_t n, std::chrono::milliseconds budget = 3000ms) {
    std::vector<wire::Bytes> got;
    const auto until = std::chrono::steady_clock::now() + budget;
    while (got.size() < n && std::chrono::steady_clock::now() < until)
        for (auto& f : t.receive(50ms)) got.push_back(std::move(f));
    return got;
}

wire::Bytes heartbeat(std::uint8_t salt) {
    NodeId::Bytes b{};
    b[0] = salt;
    return wire::encode_message(wire::Message::empty(wire::Kind::Heartbeat, NodeId(b), kNs));
}

}  // namespace

TEST(Tcp, SplitHostPort) {
    std::string host;
    std::uint16_t port = 0;
    EXPECT_TRUE(split_host_port("127.0.0.1:8080", host, port));
    EXPECT_EQ(host, "127.0.0.1");
    EXPECT_EQ(port, 8080);
    EXPECT_FALSE(split_host_port("127.0.0.1", host, port));
    EXPECT_FALSE(split_host_port("h:", host, port));
    EXPECT_FALSE(split_host_port("h:65536", host, port));
    EXPECT_FALSE(split_host_port("h:8x", host, port));
}

TEST(Tcp, FramesArriveWholeAndInOrder) {
    TcpTransport a("127.0.0.1:0"), b("127.0.0.1:0");
    EXPECT_NE(b.address(), "127.0.0.1:0");
    std::vector<wire::Bytes> sent;
    for (std::uint8_t i = 0; i < 50; ++i) {
        sent.push_back(heartbeat(i));
        ASSERT_TRUE(a.send(b.address(), sent.back()));
    }
    auto big = ParameterSet();
    big.add("w", Tensor(DType::F64, {200000}, std::vector<double>(200000, 0.25)));
    sent.push_back(wire::encode_message(wire::Message::weights(NodeId{}, kNs, big)));
    ASSERT_TRUE(a.send(b.address(), sent.back()));

    auto got = receive_n(b, sent.size());
    EXPECT_EQ(got, sent);
    EXPECT_EQ(b.bad_streams(), 0u);
}

TEST(Tcp, SendToNothingFails) {
    TcpTransport a("127.0.0.1:0");
    std::string addr;
    {
        TcpTransport gone("127.0.0.1:0");
        addr = gone.address();
    }
    EXPECT_FALSE(a.send(addr, heartbeat(1)));
}

TEST(Tcp, OccupiedPortIsBindFailed) {
    TcpTransport a("127.0.0.1:0");
    try {
        TcpTransport b(a.address());
        FAIL() << "second bind succeeded";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::BindFailed);
    }
    EXPECT_THROW(TcpTransport("no-port"), Error);
}

TEST(Tcp, GarbageStreamClosedAndCounted) {
    TcpTransport a("127.0.0.1:0"), b("127.0.0.1:0");
    wire::Bytes junk = {'J', 'U', 'N', 'K', 1, 2, 3, 4, 5, 6, 7, 8};
    ASSERT_TRUE(a.send(b.address(), junk));
    const auto until = std::chrono::steady_clock::now() + 3s;
    while (b.bad_streams() == 0 && std::chrono::steady_clock::now() < until) b.receive(20ms);
    EXPECT_EQ(b.bad_streams(), 1u);

    // A fresh connection still works afterwards.
    TcpTransport c("127.0.0.1:0");
    ASSERT_TRUE(c.send(b.address(), heartbeat(9)));
    EXPECT_EQ(receive_n(b, 1).size(), 1u);
}

TEST(Tcp, LeechJoinsOverSockets) {
    auto ds = refmodel::gen_dataset(3, 128, 3, 0.1);
    auto shards = refmodel::partition(ds, 2, refmodel::PartitionScheme::iid(), 1);
    refmodel::ModelShape shape{refmodel::ModelKind::Linear, 3, 0, DType::F64};
    refmodel::TrainerConfig cfg;

    TcpTransport ta("127.0.0.1:0"), tb("127.0.0.1:0");
    NodeOptions oa;
    oa.id = NodeId::derive("a", 0);
    oa.ns = kNs;
    oa.address = ta.address();
    oa.heartbeat_interval = 100;
    oa.model_request_timeout = 200;
    oa.policy.pool_timeout = 50;
    NodeOptions ob = oa;
    ob.id = NodeId::derive("b", 0);
    ob.address = tb.address();
    ob.bootstrap = {ta.address()};
    ob.policy.default_mode = SharingMode::Leech;
    ob.policy.promote_threshold = 1000;

    Node a(oa, std::make_unique<refmodel::GradientTrainer>(shape, shards[0], cfg, refmodel::init_params(shape, 5)),
           make_strategy("fedavg"), ta);
    Node b(ob, std::make_unique<refmodel::GradientTrainer>(shape, shards[1], cfg, std::nullopt), make_strategy("fedavg"),
           tb);

    const auto t0 = std::chrono::steady_clock::now();
    auto now = [&] {
        return static_cast<Tick>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                     std::chrono::steady_clock::now() - t0).count());
    };
    a.start(now());
    b.start(now());
    while (!b.ready() && now() < 5000) {
        for (auto& f : ta.receive(5ms)) a.handle_frame(f, now());
        for (auto& f : tb.receive(5ms)) b.handle_frame(f, now());
        a.poll(now());
        b.poll(now());
    }
    ASSERT_TRUE(b.ready());
    EXPECT_EQ(spec_of(*b.params()), spec_of(*a.params()));
    bool adopted = false;
    for (const auto& ev : b.events())
        if (ev.kind == NodeEvent::Kind::ModelAdopted && ev.peer == a.id()) adopted = true;
    EXPECT_TRUE(adopted);
    EXPECT_EQ(a.counters().malformed_frames + b.counters().malformed_frames, 0u);
}

TEST(NodeConfig, DefaultsAndOverrides) {
    auto c = sim::node_config_from_json(nlohmann::json::parse(R"({"namespace":"demo"})"));
    EXPECT_EQ(c.heartbeat_interval, 1000);
    EXPECT_EQ(c.ttl_multiplier, 3u);
    EXPECT_EQ(c.node.pool_timeout, 500);
    EXPECT_EQ(c.node.pool_min_inbound, 1u);
    EXPECT_EQ(c.node.mode, SharingMode::Peer);

    c = sim::node_config_from_json(nlohmann::json::parse(
        R"({"namespace":"demo","mode":"leech","initial_params":false,"arrival":{"initial":5,"per_round":2},
            "trainer":{"model":"mlp","hidden":4},"bootstrap":["127.0.0.1:9000"],"shards":4,"shard":3})"));
    EXPECT_EQ(c.node.mode, SharingMode::Leech);
    EXPECT_FALSE(c.node.initial_params);
    ASSERT_TRUE(c.node.arrival.has_value());
    EXPECT_EQ(c.node.arrival->per_round, 2u);
    EXPECT_EQ(c.trainer.model, refmodel::ModelKind::Mlp);
    EXPECT_EQ(c.bootstrap.size(), 1u);
}

TEST(NodeConfig, RejectsWithFieldNames) {
    auto message = [](const char* text) {
        try {
            sim::node_config_from_json(nlohmann::json::parse(text));
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), Errc::ValidationError);
            return std::string(e.what());
        }
        return std::string("accepted");
    };
    EXPECT_NE(message(R"({"namespace":""})").find("namespace:"), std::string::npos);
    EXPECT_NE(message(R"({})").find("namespace: required"), std::string::npos);
    EXPECT_NE(message(R"({"namespace":"x","colour":1})").find("colour: unknown key"), std::string::npos);
    EXPECT_NE(message(R"({"namespace":"x","trainer":{"lr":1}})").find("trainer.lr: unknown key"), std::string::npos);
    EXPECT_NE(message(R"({"namespace":"x","listen":"nope"})").find("listen:"), std::string::npos);
    EXPECT_NE(message(R"({"namespace":"x","bootstrap":["h:0"]})").find("bootstrap[0]"), std::string::npos);
    EXPECT_NE(message(R"({"namespace":"x","shard":2,"shards":2})").find("shard:"), std::string::npos);
    EXPECT_NE(message(R"({"namespace":"x","mode":"lurker"})").find("mode:"), std::string::npos);
    EXPECT_NE(message(R"({"namespace":"x","isolated":true})").find("isolated:"), std::string::npos);
}
