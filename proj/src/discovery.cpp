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

#include "meshfed/discovery.hpp"

#include <algorithm>

namespace meshfed {

PeerTable::PeerTable(Namespace ns, Tick heartbeat_interval, std::uint32_t ttl_multiplier)
    : ns_(std::move(ns)), interval_(heartbeat_interval), ttl_(ttl_multiplier) {
    if (interval_ <= 0) throw Error(Errc::ValidationError, "heartbeat_interval must be positive");
    if (ttl_ == 0) throw Error(Errc::ValidationError, "ttl_multiplier must be positive");
}

PeerTable::Outcome PeerTable::on_announce(const wire::Message& msg, Tick now) {
    if (msg.ns != ns_) {
        ++mismatches_;
        return Outcome::Ignored;
    }
    if (msg.kind != wire::Kind::Announce && msg.kind != wire::Kind::Heartbeat) return Outcome::Ignored;

    auto [it, inserted] = records_.try_emplace(msg.sender);
    PeerRecord& rec = it->second;
    if (inserted) {
        rec.id = msg.sender;
        rec.last_seen = now;
    } else {
        rec.last_seen = std::max(rec.last_seen, now);
    }
    if (const auto* a = std::get_if<wire::AnnounceBody>(&msg.body)) {
        rec.advertised_mode = a->mode;
        rec.address = a->address;
    }
    return inserted ? Outcome::Inserted : Outcome::Refreshed;
}

std::vector<NodeId> PeerTable::sweep_expired(Tick now) {
    std::vector<NodeId> expelled;
    const Tick limit = ttl();
    for (auto it = records_.begin(); it != records_.end();) {
        if (now - it->second.last_seen > limit) {
            expelled.push_back(it->first);
            it = records_.erase(it);
        } else {
            ++it;
        }
    }
    return expelled;
}

std::vector<PeerRecord> PeerTable::alive_peers() const {
    std::vector<PeerRecord> out;
    out.reserve(records_.size());
    for (const auto& [id, rec] : records_) out.push_back(rec);
    return out;
}

bool PeerTable::remove(const NodeId& id) { return records_.erase(id) != 0; }

const PeerRecord* PeerTable::find(const NodeId& id) const {
    auto it = records_.find(id);
    return it == records_.end() ? nullptr : &it->second;
}

}  // namespace meshfed
