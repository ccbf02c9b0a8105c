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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "meshfed/aggregation.hpp"
#include "meshfed/core.hpp"
#include "meshfed/discovery.hpp"
#include "meshfed/topology.hpp"
#include "meshfed/trainer.hpp"
#include "meshfed/wire.hpp"

namespace meshfed {

/// Outbound half of a transport. Inbound frames are pushed into
/// Node::handle_frame by whoever owns the node's loop.
class Transport {
public:
    virtual ~Transport() = default;
    /// Hands a frame off for delivery; false if that failed immediately.
    virtual bool send(const std::string& address, const wire::Bytes& frame) = 0;
};

struct TransitionInput {
    SharingMode mode;
    std::uint64_t round;
    std::uint64_t local_samples;
    std::uint64_t promote_threshold;
};

/// Returns the mode to switch to (possibly the current one).
using TransitionFn = std::function<SharingMode(const TransitionInput&)>;

/// Leech becomes Peer once local samples reach the threshold; nothing else moves.
SharingMode default_transition(const TransitionInput& in);

struct NodePolicy {
    SharingMode default_mode = SharingMode::Peer;
    std::uint64_t promote_threshold = 0;
    /// Never aggregate a set from a partner this node sent to in the same round.
    bool privacy_exclusion = false;
    NoisePolicy noise;
    std::size_t pool_min_inbound = 1;
    Tick pool_timeout = 1;
    /// Inbound sets tagged older than current round minus this are dropped.
    std::uint64_t staleness_window = 2;
    TransitionFn transition;  // empty: default_transition
};

struct NodeOptions {
    NodeId id;
    Namespace ns{"default"};
    std::string address;
    std::vector<std::string> bootstrap;
    NodePolicy policy;
    Tick heartbeat_interval = 1;
    std::uint32_t ttl_multiplier = 3;
    /// Every n-th beat is a full ANNOUNCE so peers that expelled us relearn our address.
    std::uint32_t reannounce_every = 4;
    Tick model_request_timeout = 2;
    std::uint32_t model_retry_budget = 3;
    /// Stop starting rounds after this many; 0 runs forever.
    std::uint64_t max_rounds = 0;
};

struct RoundReport {
    std::uint64_t round = 0;
    Tick tick = 0;
    double loss = 0.0;
    SharingMode mode = SharingMode::Peer;
    std::vector<NodeId> sent_to;
    std::vector<NodeId> aggregated_from;
    std::string digest;
};

struct NodeEvent {
    enum class Kind { ModeTransition, ModelAdopted, PeerJoined, PeerExpelled, PeerLeft, NoPeersForModel };

    Kind kind;
    Tick tick = 0;
    std::uint64_t round = 0;
    NodeId peer;
    SharingMode from = SharingMode::Block;
    SharingMode to = SharingMode::Block;
};

std::string_view event_kind_name(NodeEvent::Kind kind) noexcept;

struct NodeCounters {
    std::uint64_t frames_sent = 0;
    std::uint64_t send_failures = 0;
    std::uint64_t frames_received = 0;
    std::uint64_t malformed_frames = 0;
    std::uint64_t namespace_mismatches = 0;
    std::uint64_t weights_sent = 0;
    std::uint64_t weights_buffered = 0;
    std::uint64_t weights_dropped_role = 0;    // node or edge mode forbids receiving
    std::uint64_t weights_dropped_spec = 0;    // failed conforms()
    std::uint64_t weights_dropped_stale = 0;
    std::uint64_t weights_dropped_unready = 0; // arrived before a model was adopted
    std::uint64_t weights_discarded = 0;       // buffered but node mode could not apply them
    std::uint64_t weights_excluded_privacy = 0;
    std::uint64_t model_requests_sent = 0;
    std::uint64_t model_requests_refused = 0;
};

/// One federated learning participant. Single-threaded: the owner feeds
/// frames through handle_frame and drives time through poll; the two never
/// run concurrently for one node.
class Node {
public:
    Node(NodeOptions options, std::unique_ptr<TrainerContract> trainer,
         std::shared_ptr<const AggregationStrategy> strategy, Transport& transport,
         std::optional<Topology> topology = std::nullopt);

    /// Announces to the bootstrap list; adopts the trainer's initial
    /// parameters or starts asking peers for a model.
    void start(Tick now);
    /// Decodes and dispatches; undecodable frames are counted and dropped.
    void handle_frame(std::span<const std::uint8_t> frame, Tick now);
    void handle_message(const wire::Message& m, Tick now);
    /// Heartbeats, expiry sweep, model requests, round progress. Returns a
    /// report when a round completed.
    std::optional<RoundReport> poll(Tick now);

    /// Train, send, then collect what is already buffered and aggregate.
    RoundReport step_round(Tick now);
    void begin_round(Tick now);
    RoundReport finish_round(Tick now);

    SharingMode maybe_transition(Tick now);

    /// Sends GOODBYE to every known peer; the node stays inert afterwards.
    void stop(Tick now);
    /// Re-announces after an outage (simulated revival or reconnect).
    void resume(Tick now);

    void set_topology(std::optional<Topology> topology) { topology_ = std::move(topology); }

    const NodeId& id() const noexcept { return options_.id; }
    const NodeOptions& options() const noexcept { return options_; }
    SharingMode mode() const noexcept { return mode_; }
    bool ready() const noexcept { return params_.has_value(); }
    bool collecting() const noexcept { return collecting_; }
    bool no_peers_for_model() const noexcept { return no_peers_for_model_; }
    const std::optional<ParameterSet>& params() const noexcept { return params_; }
    std::uint64_t completed_rounds() const noexcept { return completed_rounds_; }
    bool done() const noexcept;
    double last_loss() const noexcept { return last_loss_; }
    const PeerTable& peers() const noexcept { return peers_; }
    const NodeCounters& counters() const noexcept { return counters_; }
    const std::vector<NodeEvent>& events() const noexcept { return events_; }
    TrainerContract& trainer() noexcept { return *trainer_; }

    /// Called for every event as it is recorded.
    std::function<void(const NodeEvent&)> on_event;

private:
    SharingMode edge_toward(const NodeId& peer) const;
    std::vector<PeerRecord> weight_targets() const;
    ParameterSet stamped(const ParameterSet& ps) const;
    void send(const std::string& address, const wire::Message& m);
    void send_announce(const std::string& address);
    void heartbeat(Tick now);
    void advance_join(Tick now);
    void adopt(const ParameterSet& ps, const NodeId& from, Tick now);
    void on_weights(const wire::Message& m, Tick now);
    void on_model_request(const wire::Message& m);
    void record(NodeEvent ev);

    NodeOptions options_;
    std::unique_ptr<TrainerContract> trainer_;
    std::shared_ptr<const AggregationStrategy> strategy_;
    Transport& transport_;
    std::optional<Topology> topology_;
    PeerTable peers_;

    SharingMode mode_;
    std::optional<ParameterSet> params_;
    std::uint64_t completed_rounds_ = 0;
    double last_loss_;
    bool started_ = false;
    bool stopped_ = false;

    // round in progress
    bool collecting_ = false;
    std::uint64_t current_round_ = 0;
    Tick pool_deadline_ = 0;
    std::set<NodeId> sent_to_;
    std::map<NodeId, ParameterSet> inbound_;

    // discovery timers
    Tick next_heartbeat_ = 0;
    std::uint64_t beats_ = 0;

    // join handshake
    std::optional<NodeId> request_target_;
    Tick request_deadline_ = 0;
    Tick pass_deadline_ = 0;
    std::set<NodeId> tried_;
    std::uint32_t passes_ = 0;
    std::optional<ModelSpec> offered_spec_;
    bool no_peers_for_model_ = false;

    NodeCounters counters_;
    std::vector<NodeEvent> events_;
};

}  // namespace meshfed
