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

#include "meshfed/node.hpp"

#include <algorithm>
#include <limits>

#include "meshfed/log.hpp"

namespace meshfed {

SharingMode default_transition(const TransitionInput& in) {
    if (in.mode == SharingMode::Leech && in.local_samples >= in.promote_threshold) return SharingMode::Peer;
    return in.mode;
}

std::string_view event_kind_name(NodeEvent::Kind kind) noexcept {
    switch (kind) {
        case NodeEvent::Kind::ModeTransition: return "mode_transition";
        case NodeEvent::Kind::ModelAdopted: return "model_adopted";
        case NodeEvent::Kind::PeerJoined: return "peer_joined";
        case NodeEvent::Kind::PeerExpelled: return "peer_expelled";
        case NodeEvent::Kind::PeerLeft: return "peer_left";
        case NodeEvent::Kind::NoPeersForModel: return "no_peers_for_model";
    }
    return "unknown";
}

Node::Node(NodeOptions options, std::unique_ptr<TrainerContract> trainer,
           std::shared_ptr<const AggregationStrategy> strategy, Transport& transport,
           std::optional<Topology> topology)
    : options_(std::move(options)),
      trainer_(std::move(trainer)),
      strategy_(std::move(strategy)),
      transport_(transport),
      topology_(std::move(topology)),
      peers_(options_.ns, options_.heartbeat_interval, options_.ttl_multiplier),
      mode_(options_.policy.default_mode),
      last_loss_(std::numeric_limits<double>::quiet_NaN()) {
    if (!trainer_) throw Error(Errc::ValidationError, "node needs a trainer");
    if (!strategy_) throw Error(Errc::ValidationError, "node needs an aggregation strategy");
    if (options_.policy.pool_min_inbound == 0) throw Error(Errc::ValidationError, "pool_min_inbound must be >= 1");
    if (options_.policy.pool_timeout < 0) throw Error(Errc::ValidationError, "pool_timeout must be >= 0");
    if (options_.policy.noise.sigma < 0.0) throw Error(Errc::ValidationError, "noise sigma must be >= 0");
}

bool Node::done() const noexcept {
    return options_.max_rounds != 0 && completed_rounds_ >= options_.max_rounds && !collecting_;
}

// ---- plumbing -------------------------------------------------------------

void Node::record(NodeEvent ev) {
    events_.push_back(ev);
    if (on_event) on_event(events_.back());
}

void Node::send(const std::string& address, const wire::Message& m) {
    if (address.empty() || address == options_.address) return;
    auto frame = wire::encode_message(m);
    ++counters_.frames_sent;
    if (!transport_.send(address, frame)) {
        ++counters_.send_failures;
        log::debug("send to " + address + " failed");
    }
}

void Node::send_announce(const std::string& address) {
    send(address, wire::Message::announce(id(), options_.ns, mode_, options_.address));
}

SharingMode Node::edge_toward(const NodeId& peer) const {
    if (!topology_) return SharingMode::Peer;
    if (!topology_->contains(id()) || !topology_->contains(peer)) return SharingMode::Block;
    return topology_->edge_mode(id(), peer);
}

std::vector<PeerRecord> Node::weight_targets() const {
    std::vector<PeerRecord> out;
    for (const auto& rec : peers_.alive_peers()) {
        if (rec.address.empty() || !may_receive(rec.advertised_mode)) continue;
        if (!may_send(edge_toward(rec.id))) continue;
        out.push_back(rec);
    }
    return out;
}

ParameterSet Node::stamped(const ParameterSet& ps) const {
    ParameterSet out = ps;
    out.round = current_round_;
    out.sample_count = trainer_->local_sample_count();
    out.origin = id();
    return out;
}

// ---- lifecycle ------------------------------------------------------------

void Node::start(Tick now) {
    started_ = true;
    for (const auto& addr : options_.bootstrap) send_announce(addr);
    next_heartbeat_ = now + options_.heartbeat_interval;

    if (auto init = trainer_->initial_params()) {
        ParameterSet ps = std::move(*init);
        ps.origin = id();
        ps.round = 0;
        params_ = std::move(ps);
    } else {
        pass_deadline_ = now + options_.model_request_timeout;
    }
}

void Node::stop(Tick /*now*/) {
    if (stopped_) return;
    for (const auto& rec : peers_.alive_peers())
        send(rec.address, wire::Message::empty(wire::Kind::Goodbye, id(), options_.ns));
    stopped_ = true;
}

void Node::resume(Tick now) {
    std::set<std::string> targets(options_.bootstrap.begin(), options_.bootstrap.end());
    for (const auto& rec : peers_.alive_peers()) targets.insert(rec.address);
    for (const auto& addr : targets) send_announce(addr);
    next_heartbeat_ = now + options_.heartbeat_interval;
    if (!params_) {
        request_target_.reset();
        tried_.clear();
        pass_deadline_ = now + options_.model_request_timeout;
    }
}

// ---- inbound --------------------------------------------------------------

void Node::handle_frame(std::span<const std::uint8_t> frame, Tick now) {
    if (stopped_) return;
    ++counters_.frames_received;
    try {
        handle_message(wire::decode_message(frame), now);
    } catch (const Error& e) {
        ++counters_.malformed_frames;
        log::debug(std::string("dropped frame: ") + e.what());
    }
}

void Node::handle_message(const wire::Message& m, Tick now) {
    if (stopped_ || m.sender == id()) return;
    if (m.ns != options_.ns) {
        ++counters_.namespace_mismatches;
        return;
    }

    switch (m.kind) {
        case wire::Kind::Announce:
        case wire::Kind::Heartbeat: {
            const PeerRecord* before = peers_.find(m.sender);
            const bool had_address = before != nullptr && !before->address.empty();
            auto outcome = peers_.on_announce(m, now);
            if (outcome == PeerTable::Outcome::Inserted)
                record({NodeEvent::Kind::PeerJoined, now, completed_rounds_, m.sender});
            // Answer a newcomer so it learns our address without waiting a beat.
            if (m.kind == wire::Kind::Announce && !had_address) {
                const auto& a = std::get<wire::AnnounceBody>(m.body);
                send_announce(a.address);
            }
            break;
        }
        case wire::Kind::Goodbye:
            if (peers_.remove(m.sender)) record({NodeEvent::Kind::PeerLeft, now, completed_rounds_, m.sender});
            break;
        case wire::Kind::ModelRequest:
            on_model_request(m);
            break;
        case wire::Kind::ModelSpec:
            if (!params_ && request_target_ && *request_target_ == m.sender)
                offered_spec_ = std::get<ModelSpec>(m.body);
            break;
        case wire::Kind::Weights:
            on_weights(m, now);
            break;
        case wire::Kind::Hello:
            break;
    }
}

void Node::on_model_request(const wire::Message& m) {
    const PeerRecord* rec = peers_.find(m.sender);
    if (!params_ || !may_send(mode_) || !may_send(edge_toward(m.sender)) || rec == nullptr ||
        rec->address.empty()) {
        ++counters_.model_requests_refused;
        return;
    }
    ParameterSet ps = *params_;
    ps.round = completed_rounds_;
    ps.sample_count = trainer_->local_sample_count();
    ps.origin = id();
    send(rec->address, wire::Message::model_spec(id(), options_.ns, spec_of(ps)));
    send(rec->address, wire::Message::weights(id(), options_.ns, add_noise(ps, options_.policy.noise)));
    ++counters_.weights_sent;
}

void Node::on_weights(const wire::Message& m, Tick now) {
    const auto& ps = std::get<ParameterSet>(m.body);
    if (!params_) {
        if (request_target_ && *request_target_ == m.sender && offered_spec_ && conforms(ps, *offered_spec_)) {
            adopt(ps, m.sender, now);
        } else {
            ++counters_.weights_dropped_unready;
        }
        return;
    }
    if (!may_receive(mode_) || !may_receive(edge_toward(m.sender))) {
        ++counters_.weights_dropped_role;
        return;
    }
    if (!conforms(ps, spec_of(*params_))) {
        ++counters_.weights_dropped_spec;
        log::info("dropping non-conforming weights from " + m.sender.short_hex());
        return;
    }
    auto it = inbound_.find(m.sender);
    if (it == inbound_.end()) {
        inbound_.emplace(m.sender, ps);
    } else if (ps.round >= it->second.round) {
        it->second = ps;
    }
    ++counters_.weights_buffered;
}

void Node::adopt(const ParameterSet& ps, const NodeId& from, Tick now) {
    params_ = ps;
    params_->origin = id();
    completed_rounds_ = ps.round;
    request_target_.reset();
    offered_spec_.reset();
    tried_.clear();
    NodeEvent ev{NodeEvent::Kind::ModelAdopted, now, completed_rounds_, from};
    ev.from = ev.to = mode_;
    record(ev);
    log::info("model adopted from " + from.hex());
}

// ---- periodic work --------------------------------------------------------

void Node::heartbeat(Tick now) {
    if (now < next_heartbeat_) return;
    ++beats_;
    const bool full = options_.reannounce_every != 0 && beats_ % options_.reannounce_every == 0;

    std::vector<std::string> targets = options_.bootstrap;
    for (const auto& rec : peers_.alive_peers())
        if (std::find(targets.begin(), targets.end(), rec.address) == targets.end()) targets.push_back(rec.address);
    for (const auto& addr : targets) {
        if (full) {
            send_announce(addr);
        } else {
            send(addr, wire::Message::empty(wire::Kind::Heartbeat, id(), options_.ns));
        }
    }
    next_heartbeat_ += options_.heartbeat_interval;
    if (next_heartbeat_ <= now) next_heartbeat_ = now + options_.heartbeat_interval;
}

void Node::advance_join(Tick now) {
    if (request_target_ && now < request_deadline_) return;
    request_target_.reset();
    offered_spec_.reset();

    for (const auto& rec : peers_.alive_peers()) {
        if (tried_.count(rec.id) || rec.address.empty() || !may_send(rec.advertised_mode)) continue;
        tried_.insert(rec.id);
        request_target_ = rec.id;
        request_deadline_ = now + options_.model_request_timeout;
        send(rec.address, wire::Message::empty(wire::Kind::ModelRequest, id(), options_.ns));
        ++counters_.model_requests_sent;
        return;
    }

    // Every known peer has been asked this pass.
    if (now < pass_deadline_) return;
    ++passes_;
    tried_.clear();
    pass_deadline_ = now + options_.model_request_timeout;
    if (passes_ >= options_.model_retry_budget && !no_peers_for_model_) {
        no_peers_for_model_ = true;
        record({NodeEvent::Kind::NoPeersForModel, now, 0, NodeId{}});
        log::error("no peer supplied a model after " + std::to_string(passes_) + " passes; still retrying");
    }
}

std::optional<RoundReport> Node::poll(Tick now) {
    if (!started_ || stopped_) return std::nullopt;

    for (const auto& gone : peers_.sweep_expired(now))
        record({NodeEvent::Kind::PeerExpelled, now, completed_rounds_, gone});
    heartbeat(now);

    if (!params_) {
        advance_join(now);
        return std::nullopt;
    }

    std::optional<RoundReport> report;
    if (collecting_) {
        const bool enough = may_receive(mode_) && inbound_.size() >= options_.policy.pool_min_inbound;
        if (enough || now >= pool_deadline_) report = finish_round(now);
    }
    if (!collecting_ && !done()) begin_round(now);
    return report;
}

// ---- rounds ---------------------------------------------------------------

void Node::begin_round(Tick now) {
    if (!params_) throw Error(Errc::ValidationError, "round started before a model was adopted");
    current_round_ = completed_rounds_ + 1;
    trainer_->on_round_begin(current_round_);
    sent_to_.clear();

    const bool skip_training = mode_ == SharingMode::Leech && trainer_->local_sample_count() == 0;
    if (!skip_training) {
        TrainResult result = trainer_->train(*params_);
        if (!conforms(result.params, spec_of(*params_)))
            throw Error(Errc::SpecMismatch, "trainer returned parameters with a different spec");
        params_->entries() = std::move(result.params.entries());
        last_loss_ = result.loss;
    }

    if (may_send(mode_)) {
        const ParameterSet outgoing = add_noise(stamped(*params_), options_.policy.noise);
        for (const auto& rec : weight_targets()) {
            send(rec.address, wire::Message::weights(id(), options_.ns, outgoing));
            ++counters_.weights_sent;
            sent_to_.insert(rec.id);
        }
    }

    collecting_ = true;
    pool_deadline_ = now + options_.policy.pool_timeout;
}

RoundReport Node::finish_round(Tick now) {
    if (!collecting_) throw Error(Errc::ValidationError, "finish_round without begin_round");
    RoundReport report;
    report.round = current_round_;
    report.tick = now;
    report.sent_to.assign(sent_to_.begin(), sent_to_.end());

    if (may_receive(mode_)) {
        const ParameterSet local = stamped(*params_);
        const ModelSpec spec = spec_of(local);
        std::vector<ParameterSet> accepted;
        for (auto& [sender, ps] : inbound_) {
            if (ps.round + options_.policy.staleness_window < current_round_) {
                ++counters_.weights_dropped_stale;
                continue;
            }
            if (options_.policy.privacy_exclusion && sent_to_.count(sender)) {
                ++counters_.weights_excluded_privacy;
                continue;
            }
            if (!conforms(ps, spec)) {
                ++counters_.weights_dropped_spec;
                continue;
            }
            ps.origin = sender;
            report.aggregated_from.push_back(sender);
            accepted.push_back(std::move(ps));
        }
        if (!accepted.empty()) {
            ParameterSet combined = strategy_->combine(local, accepted);
            params_->entries() = std::move(combined.entries());
        }
    } else {
        counters_.weights_discarded += inbound_.size();
    }
    inbound_.clear();

    params_->round = current_round_;
    params_->sample_count = trainer_->local_sample_count();
    params_->origin = id();
    completed_rounds_ = current_round_;
    collecting_ = false;

    maybe_transition(now);
    report.mode = mode_;
    report.loss = last_loss_;
    report.digest = digest(*params_);
    return report;
}

RoundReport Node::step_round(Tick now) {
    begin_round(now);
    return finish_round(now);
}

SharingMode Node::maybe_transition(Tick now) {
    const TransitionInput in{mode_, completed_rounds_, trainer_->local_sample_count(),
                             options_.policy.promote_threshold};
    const SharingMode next = options_.policy.transition ? options_.policy.transition(in) : default_transition(in);
    if (next == mode_) return mode_;

    NodeEvent ev{NodeEvent::Kind::ModeTransition, now, completed_rounds_, NodeId{}};
    ev.from = mode_;
    ev.to = next;
    mode_ = next;
    record(ev);
    log::info("mode " + std::string(mode_name(ev.from)) + " -> " + std::string(mode_name(ev.to)) + " at round " +
              std::to_string(completed_rounds_));
    for (const auto& rec : peers_.alive_peers()) send_announce(rec.address);
    return mode_;
}

}  // namespace meshfed
