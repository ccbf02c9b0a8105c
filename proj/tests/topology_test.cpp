#include <gtest/gtest.h>

#include "meshfed/topology.hpp"

using namespace meshfed;

namespace {

std::vector<NodeId> ids(std::size_t n, std::uint64_t seed = 1) {
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(NodeId::derive("n" + std::to_string(i), seed));
    return out;
}

Errc error_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return Errc::Io;
}

std::size_t in_degree(const Topology& t, const NodeId& n) { return t.neighbors(n, Direction::Inbound).size(); }

}  // namespace

TEST(Star, Examples) {
    auto n = ids(5);
    auto t = build_star(n[0], {n[1], n[2], n[3], n[4]});
    EXPECT_EQ(t.edge_count(), 8u);
    EXPECT_EQ(t.out_degree(n[0]), 4u);
    for (int i = 1; i <= 4; ++i) {
        EXPECT_EQ(t.edge_mode(n[0], n[i]), SharingMode::Peer);
        EXPECT_EQ(t.edge_mode(n[i], n[0]), SharingMode::Peer);
    }
    EXPECT_EQ(t.edge_mode(n[1], n[2]), SharingMode::Block);

    EXPECT_EQ(build_star(n[0], {n[1]}).edge_count(), 2u);
    EXPECT_EQ(error_of([&] { build_star(n[0], {n[1], n[0]}); }), Errc::HubInLeaves);
    EXPECT_EQ(error_of([&] { build_star(n[0], {n[1], n[1]}); }), Errc::DuplicateNode);
}

TEST(Complete, Examples) {
    EXPECT_EQ(build_complete(ids(4)).edge_count(), 12u);
    EXPECT_EQ(build_complete(ids(2)).edge_count(), 2u);
    EXPECT_EQ(error_of([&] { build_complete(ids(1)); }), Errc::TooFewNodes);
    auto n = ids(3);
    EXPECT_EQ(error_of([&] { build_complete({n[0], n[1], n[0]}); }), Errc::DuplicateNode);
}

TEST(Neighborhood, RoundRobinAssignment) {
    auto hubs = ids(2, 7);
    auto leaves = ids(4, 8);
    auto t = build_neighborhood(hubs, 1, leaves);
    EXPECT_EQ(t.edge_mode(hubs[0], hubs[1]), SharingMode::Peer);
    EXPECT_EQ(t.edge_mode(hubs[1], hubs[0]), SharingMode::Peer);
    // leaf i -> hub i mod 2
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        EXPECT_EQ(t.edge_mode(leaves[i], hubs[i % 2]), SharingMode::Peer);
        EXPECT_EQ(t.edge_mode(hubs[i % 2], leaves[i]), SharingMode::Peer);
        EXPECT_EQ(t.edge_mode(leaves[i], hubs[(i + 1) % 2]), SharingMode::Block);
        EXPECT_EQ(t.out_degree(leaves[i]), 1u);
    }
    EXPECT_EQ(t.edge_count(), 2u + 8u);
}

TEST(Neighborhood, SaturationAndGuards) {
    auto hubs = ids(3, 7);
    auto leaf = ids(1, 9);
    auto t = build_neighborhood(hubs, 3, leaf);
    EXPECT_EQ(t.out_degree(leaf[0]), 3u);
    EXPECT_EQ(error_of([&] { build_neighborhood(hubs, 4, leaf); }), Errc::TooManyEdgesRequested);
    EXPECT_EQ(error_of([&] { build_neighborhood(hubs, 1, {hubs[0]}); }), Errc::DuplicateNode);
}

TEST(Grid, DegreesAndGuards) {
    auto n = ids(9);
    auto t = build_grid(3, 3, n);
    EXPECT_EQ(t.out_degree(n[0]), 2u);  // corner
    EXPECT_EQ(t.out_degree(n[1]), 3u);  // edge cell
    EXPECT_EQ(t.out_degree(n[4]), 4u);  // center

    auto line = ids(5);
    auto path = build_grid(1, 5, line);
    EXPECT_EQ(path.out_degree(line[0]), 1u);
    EXPECT_EQ(path.out_degree(line[4]), 1u);
    EXPECT_EQ(path.out_degree(line[2]), 2u);

    EXPECT_EQ(error_of([&] { build_grid(2, 2, ids(6)); }), Errc::SizeMismatch);
}

TEST(Neighbors, Examples) {
    auto n = ids(5);
    auto star = build_star(n[0], {n[1], n[2], n[3], n[4]});
    auto out = star.neighbors(n[0], Direction::Outbound);
    ASSERT_EQ(out.size(), 4u);
    for (std::size_t i = 0; i < out.size(); ++i) {
        EXPECT_EQ(out[i].second, SharingMode::Peer);
        if (i > 0) EXPECT_LT(out[i - 1].first, out[i].first);
    }

    Topology lonely;
    lonely.add_node(n[0]);
    EXPECT_TRUE(lonely.neighbors(n[0], Direction::Outbound).empty());
    EXPECT_EQ(error_of([&] { lonely.neighbors(n[1], Direction::Inbound); }), Errc::UnknownNode);
}

TEST(Overrides, DemoteAndBlock) {
    auto n = ids(3);
    auto t = build_complete(n);
    auto seeded = t.with_edge(n[0], n[1], SharingMode::Seed);
    EXPECT_EQ(t.edge_mode(n[0], n[1]), SharingMode::Peer);  // original untouched
    auto out = seeded.neighbors(n[0], Direction::Outbound);
    bool found = false;
    for (const auto& [peer, mode] : out)
        if (peer == n[1]) {
            found = true;
            EXPECT_EQ(mode, SharingMode::Seed);
        }
    EXPECT_TRUE(found);

    auto blocked = t.with_edge(n[0], n[1], SharingMode::Block);
    Topology removed = t;
    removed.set_edge(n[0], n[1], SharingMode::Block);
    EXPECT_EQ(blocked, removed);
    EXPECT_EQ(blocked.out_degree(n[0]), 1u);
    EXPECT_EQ(blocked.edge_count(), 5u);
    EXPECT_EQ(error_of([&] { t.with_edge(n[0], n[0], SharingMode::Peer); }), Errc::SelfEdge);
}

TEST(Builders, Deterministic) {
    EXPECT_EQ(build_grid(3, 4, ids(12)), build_grid(3, 4, ids(12)));
    EXPECT_EQ(build_neighborhood(ids(3, 2), 2, ids(7, 3)), build_neighborhood(ids(3, 2), 2, ids(7, 3)));
}

TEST(Builders, DegreeSequencesMatchClosedFormsUpTo10x10) {
    for (std::size_t rows = 1; rows <= 10; ++rows) {
        for (std::size_t cols = 1; cols <= 10; ++cols) {
            auto n = ids(rows * cols);
            auto t = build_grid(rows, cols, n);
            std::size_t total = 0;
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < cols; ++c) {
                    const std::size_t expect = (r > 0) + (r + 1 < rows) + (c > 0) + (c + 1 < cols);
                    ASSERT_EQ(t.out_degree(n[r * cols + c]), expect) << rows << "x" << cols;
                    ASSERT_EQ(in_degree(t, n[r * cols + c]), expect);
                    total += expect;
                }
            }
            // 2 * (rows*(cols-1) + cols*(rows-1)) directed edges
            EXPECT_EQ(t.edge_count(), 2 * (rows * (cols - 1) + cols * (rows - 1)));
            EXPECT_EQ(total, t.edge_count());
        }
    }

    for (std::size_t k = 2; k <= 100; ++k) {
        auto n = ids(k);
        auto complete = build_complete(n);
        EXPECT_EQ(complete.edge_count(), k * (k - 1));
        for (const auto& id : n) ASSERT_EQ(complete.out_degree(id), k - 1);

        auto star = build_star(n[0], std::vector<NodeId>(n.begin() + 1, n.end()));
        EXPECT_EQ(star.out_degree(n[0]), k - 1);
        for (std::size_t i = 1; i < k; ++i) ASSERT_EQ(star.out_degree(n[i]), 1u);
    }

    for (std::size_t h = 1; h <= 10; ++h) {
        for (std::size_t leaves = 0; leaves <= 10; ++leaves) {
            for (std::size_t e = 1; e <= h; ++e) {
                auto hubs = ids(h, 100);
                auto ls = ids(leaves, 200);
                auto t = build_neighborhood(hubs, e, ls);
                for (const auto& l : ls) ASSERT_EQ(t.out_degree(l), e);
                // each hub: h-1 hub links plus the leaves whose window covers it
                for (std::size_t j = 0; j < h; ++j) {
                    std::size_t covered = 0;
                    for (std::size_t i = 0; i < leaves; ++i)
                        if ((j + h - i % h) % h < e) ++covered;
                    ASSERT_EQ(t.out_degree(hubs[j]), h - 1 + covered);
                }
            }
        }
    }
}

TEST(Dot, StartsWithDigraph) {
    auto n = ids(3);
    auto dot = to_dot(build_star(n[0], {n[1], n[2]}), {{n[0], "hub"}});
    EXPECT_EQ(dot.rfind("digraph", 0), 0u);
    EXPECT_NE(dot.find("\"hub\" -> "), std::string::npos);
}

TEST(RemoveNode, DropsIncidentEdges) {
    auto n = ids(4);
    auto t = build_complete(n);
    t.remove_node(n[2]);
    EXPECT_FALSE(t.contains(n[2]));
    EXPECT_EQ(t.edge_count(), 6u);
}
