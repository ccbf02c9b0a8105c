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

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "meshfed/core.hpp"

namespace meshfed {

enum class Direction { Outbound, Inbound };

/// Directed compute graph. Edge (from, to) holds from's stance toward to; a
/// missing edge means Block.
class Topology {
public:
    Topology() = default;

    void add_node(const NodeId& id);
    /// Removes the node and every edge touching it.
    void remove_node(const NodeId& id);
    /// Setting Block erases the edge. Throws UnknownNode / SelfEdge.
    void set_edge(const NodeId& from, const NodeId& to, SharingMode mode);

    /// Copy with one edge overridden.
    Topology with_edge(const NodeId& from, const NodeId& to, SharingMode mode) const;

    bool contains(const NodeId& id) const { return nodes_.count(id) != 0; }
    SharingMode edge_mode(const NodeId& from, const NodeId& to) const;

    /// Non-Block neighbors ordered by id. Throws UnknownNode.
    std::vector<std::pair<NodeId, SharingMode>> neighbors(const NodeId& n, Direction dir) const;

    const std::set<NodeId>& nodes() const noexcept { return nodes_; }
    const std::map<std::pair<NodeId, NodeId>, SharingMode>& edges() const noexcept { return edges_; }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    std::size_t out_degree(const NodeId& n) const { return neighbors(n, Direction::Outbound).size(); }

    friend bool operator==(const Topology&, const Topology&) = default;

private:
    std::set<NodeId> nodes_;
    std::map<std::pair<NodeId, NodeId>, SharingMode> edges_;
};

Topology build_star(const NodeId& hub, const std::vector<NodeId>& leaves);
Topology build_complete(const std::vector<NodeId>& nodes);
/// Hubs are fully interconnected; leaf i links to hubs i, i+1, ... (mod hub
/// count), edges_per_leaf of them.
Topology build_neighborhood(const std::vector<NodeId>& hubs, std::size_t edges_per_leaf,
                            const std::vector<NodeId>& leaves);
/// Row-major placement, 4-neighborhood, no wraparound.
Topology build_grid(std::size_t rows, std::size_t cols, const std::vector<NodeId>& nodes);

/// Graphviz text. `label` maps ids to display names; unknown ids print as short hex.
std::string to_dot(const Topology& t, const std::map<NodeId, std::string>& label = {});

}  // namespace meshfed
