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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "meshfed/core.hpp"
#include "meshfed/wire.hpp"

namespace meshfed {

struct PeerRecord {
    NodeId id;
    std::string address;  // empty until the peer has announced itself
    SharingMode advertised_mode = SharingMode::Block;
    Tick last_seen = 0;
};

/// Namespace-scoped membership with heartbeat liveness. A record expires once
/// `now - last_seen > heartbeat_interval * ttl_multiplier`.
class PeerTable {
public:
    PeerTable(Namespace ns, Tick heartbeat_interval = 1, std::uint32_t ttl_multiplier = 3);

    enum class Outcome { Inserted, Refreshed, Ignored };

    /// Applies an ANNOUNCE or HEARTBEAT. Foreign-namespace traffic bumps
    /// mismatch_count() and leaves the table untouched.
    Outcome on_announce(const wire::Message& msg, Tick now);

    /// Removes and returns every expired record, ordered by id.
    std::vector<NodeId> sweep_expired(Tick now);

    /// Current records ordered by id bytes.
    std::vector<PeerRecord> alive_peers() const;

    bool remove(const NodeId& id);
    void clear() { records_.clear(); }
    const PeerRecord* find(const NodeId& id) const;
    bool contains(const NodeId& id) const { return records_.count(id) != 0; }
    std::size_t size() const noexcept { return records_.size(); }

    const Namespace& ns() const noexcept { return ns_; }
    Tick heartbeat_interval() const noexcept { return interval_; }
    std::uint32_t ttl_multiplier() const noexcept { return ttl_; }
    Tick ttl() const noexcept { return interval_ * static_cast<Tick>(ttl_); }
    std::uint64_t mismatch_count() const noexcept { return mismatches_; }

private:
    Namespace ns_;
    Tick interval_;
    std::uint32_t ttl_;
    std::map<NodeId, PeerRecord> records_;
    std::uint64_t mismatches_ = 0;
};

}  // namespace meshfed
