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

#include "meshfed/topology.hpp"

#include <sstream>

namespace meshfed {

namespace {

void require_distinct(const std::vector<NodeId>& ids, std::set<NodeId>& seen) {
    for (const auto& id : ids)
        if (!seen.insert(id).second) throw Error(Errc::DuplicateNode, id.hex());
}

void link(Topology& t, const NodeId& a, const NodeId& b) {
    t.set_edge(a, b, SharingMode::Peer);
    t.set_edge(b, a, SharingMode::Peer);
}

}  // namespace

void Topology::add_node(const NodeId& id) { nodes_.insert(id); }

void Topology::remove_node(const NodeId& id) {
    nodes_.erase(id);
    for (auto it = edges_.begin(); it != edges_.end();) {
        if (it->first.first == id || it->first.second == id) {
            it = edges_.erase(it);
        } else {
            ++it;
        }
    }
}

void Topology::set_edge(const NodeId& from, const NodeId& to, SharingMode mode) {
    if (!contains(from)) throw Error(Errc::UnknownNode, from.hex());
    if (!contains(to)) throw Error(Errc::UnknownNode, to.hex());
    if (from == to) throw Error(Errc::SelfEdge, from.hex());
    if (mode == SharingMode::Block) {
        edges_.erase({from, to});
    } else {
        edges_[{from, to}] = mode;
    }
}

Topology Topology::with_edge(const NodeId& from, const NodeId& to, SharingMode mode) const {
    Topology copy = *this;
    copy.set_edge(from, to, mode);
    return copy;
}

SharingMode Topology::edge_mode(const NodeId& from, const NodeId& to) const {
    auto it = edges_.find({from, to});
    return it == edges_.end() ? SharingMode::Block : it->second;
}

std::vector<std::pair<NodeId, SharingMode>> Topology::neighbors(const NodeId& n, Direction dir) const {
    if (!contains(n)) throw Error(Errc::UnknownNode, n.hex());
    std::vector<std::pair<NodeId, SharingMode>> out;
    if (dir == Direction::Outbound) {
        // edges_ is ordered by (from, to), so this range is already sorted by `to`.
        for (auto it = edges_.lower_bound({n, NodeId{}}); it != edges_.end() && it->first.first == n; ++it)
            out.emplace_back(it->first.second, it->second);
    } else {
        for (const auto& [key, mode] : edges_)
            if (key.second == n) out.emplace_back(key.first, mode);
    }
    return out;
}

Topology build_star(const NodeId& hub, const std::vector<NodeId>& leaves) {
    if (leaves.empty()) throw Error(Errc::TooFewNodes, "star needs at least one leaf");
    std::set<NodeId> seen;
    require_distinct(leaves, seen);
    if (seen.count(hub) != 0) throw Error(Errc::HubInLeaves, hub.hex());

    Topology t;
    t.add_node(hub);
    for (const auto& leaf : leaves) {
        t.add_node(leaf);
        link(t, hub, leaf);
    }
    return t;
}

Topology build_complete(const std::vector<NodeId>& nodes) {
    std::set<NodeId> seen;
    require_distinct(nodes, seen);
    if (nodes.size() < 2) throw Error(Errc::TooFewNodes, "complete graph needs at least 2 nodes");

    Topology t;
    for (const auto& n : nodes) t.add_node(n);
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (std::size_t j = i + 1; j < nodes.size(); ++j) link(t, nodes[i], nodes[j]);
    return t;
}

Topology build_neighborhood(const std::vector<NodeId>& hubs, std::size_t edges_per_leaf,
                            const std::vector<NodeId>& leaves) {
    std::set<NodeId> seen;
    require_distinct(hubs, seen);
    require_distinct(leaves, seen);
    if (hubs.empty()) throw Error(Errc::TooFewNodes, "neighborhood needs at least one hub");
    if (edges_per_leaf == 0 || edges_per_leaf > hubs.size())
        throw Error(Errc::TooManyEdgesRequested,
                    std::to_string(edges_per_leaf) + " edges per leaf with " + std::to_string(hubs.size()) +
                        " hubs");

    Topology t;
    for (const auto& h : hubs) t.add_node(h);
    for (const auto& l : leaves) t.add_node(l);
    for (std::size_t i = 0; i < hubs.size(); ++i)
        for (std::size_t j = i + 1; j < hubs.size(); ++j) link(t, hubs[i], hubs[j]);
    for (std::size_t i = 0; i < leaves.size(); ++i)
        for (std::size_t k = 0; k < edges_per_leaf; ++k) link(t, leaves[i], hubs[(i + k) % hubs.size()]);
    return t;
}

Topology build_grid(std::size_t rows, std::size_t cols, const std::vector<NodeId>& nodes) {
    if (rows == 0 || cols == 0 || nodes.size() != rows * cols)
        throw Error(Errc::SizeMismatch, std::to_string(nodes.size()) + " nodes for a " + std::to_string(rows) +
                                            "x" + std::to_string(cols) + " grid");
    std::set<NodeId> seen;
    require_distinct(nodes, seen);

    Topology t;
    for (const auto& n : nodes) t.add_node(n);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const auto& here = nodes[r * cols + c];
            if (r + 1 < rows) link(t, here, nodes[(r + 1) * cols + c]);
            if (c + 1 < cols) link(t, here, nodes[r * cols + c + 1]);
        }
    }
    return t;
}

std::string to_dot(const Topology& t, const std::map<NodeId, std::string>& label) {
    auto name = [&](const NodeId& id) {
        auto it = label.find(id);
        return it != label.end() ? it->second : id.short_hex();
    };
    std::ostringstream os;
    os << "digraph topology {\n";
    for (const auto& n : t.nodes()) os << "  \"" << name(n) << "\";\n";
    for (const auto& [key, mode] : t.edges())
        os << "  \"" << name(key.first) << "\" -> \"" << name(key.second) << "\" [label=\"" << mode_name(mode)
           << "\"];\n";
    os << "}\n";
    return os.str();
}

}  // namespace meshfed
