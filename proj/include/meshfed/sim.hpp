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

// Deterministic in-memory network and tick scheduler for whole communities.
//
// Each tick: deliver frames that are due, fire churn events, then poll every
// alive node once in NodeId order. One mt19937_64 decides drops and latency.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "meshfed/core.hpp"
#include "meshfed/node.hpp"
#include "meshfed/refmodel.hpp"
#include "meshfed/topology.hpp"

namespace meshfed::sim {

struct SimConfig {
    std::uint64_t seed = 0;
    Tick latency_min = 1;
    Tick latency_max = 1;
    double drop_prob = 0.0;
    Tick heartbeat_interval = 1;
    std::uint32_t ttl_multiplier = 3;
};

struct TopologySpec {
    std::string kind = "complete";  // complete | star | neighborhood | grid
    std::string hub;                // star; default first node
    std::vector<std::string> hubs;  // neighborhood; default first two nodes
    std::size_t edges_per_leaf = 1;
    std::size_t rows = 0, cols = 0;  // grid
};

struct EdgeOverride {
    std::string from, to;
    SharingMode mode = SharingMode::Peer;
};

struct DatasetSpec {
    std::size_t n = 256;
    std::size_t d = 4;
    double noise_std = 0.1;
};

struct TrainerSpec {
    refmodel::ModelKind model = refmodel::ModelKind::Linear;
    double learning_rate = 0.05;
    std::uint32_t local_epochs = 1;
    std::size_t batch_size = 32;
    std::size_t hidden = 8;
    DType dtype = DType::F64;
    bool shared_init = true;  // false: every node draws its own init
    double init_scale = 1.0;
};

struct NodeSpec {
    std::string name;
    SharingMode mode = SharingMode::Peer;
    std::uint64_t promote_threshold = 0;
    bool privacy_exclusion = false;
    double noise_sigma = 0.0;
    std::size_t pool_min_inbound = 1;
    Tick pool_timeout = 1;
    std::uint64_t staleness_window = 2;
    bool initial_params = true;  // false: joins without a model
    std::optional<refmodel::DataArrival> arrival;
    bool isolated = false;  // networking disabled
};

struct ChurnEvent {
    enum class Action { Kill, Revive, Join };

    Action action = Action::Kill;
    std::optional<Tick> at_tick;
    /// Fires once every alive node holding a model has completed this many rounds.
    std::optional<std::uint64_t> at_round;
    std::string node;
    NodeSpec join;                        // Join: the new node (join.name == node)
    std::vector<std::string> connect_to;  // Join: Peer edges; empty = every existing node
};

std::string_view action_name(ChurnEvent::Action a) noexcept;

struct ScenarioSpec {
    Namespace ns{"sim"};
    std::uint64_t seed = 0;
    std::uint64_t rounds = 10;
    Tick max_ticks = 0;  // 0: rounds * 10 + 100
    std::string aggregation = "fedavg";
    TopologySpec topology;
    std::vector<EdgeOverride> edge_overrides;
    DatasetSpec dataset;
    refmodel::PartitionScheme partition;
    TrainerSpec trainer;
    std::vector<NodeSpec> nodes;
    std::vector<ChurnEvent> churn;
    SimConfig sim;

    Tick tick_budget() const noexcept { return max_ticks > 0 ? max_ticks : static_cast<Tick>(rounds) * 10 + 100; }
};

/// Throws ValidationError naming the offending field.
void validate(const ScenarioSpec& spec);

/// Builds the scenario's topology over its initial nodes (no joins).
Topology build_topology(const ScenarioSpec& spec);

struct MetricsRow {
    Tick tick = 0;
    std::string node;
    std::uint64_t round = 0;
    SharingMode mode = SharingMode::Peer;
    double loss = 0.0;          // NaN until the node has trained
    double dist_to_mean = 0.0;  // NaN while the node holds no model
    std::size_t peer_count = 0;
    std::string digest;  // empty while the node holds no model
};

struct TickSummary {
    Tick tick = 0;
    std::size_t alive = 0;
    std::size_t ready = 0;
    std::uint64_t frames_sent = 0;
    std::uint64_t frames_dropped = 0;
    std::uint64_t frames_delivered = 0;
    std::uint64_t frames_in_flight = 0;
};

struct EventRow {
    Tick tick = 0;
    std::string node;
    std::string kind;
    std::uint64_t round = 0;
    std::string peer;
    std::string from, to;  // modes, for transitions
};

/// Append-only record of a run.
struct MetricsLog {
    std::vector<MetricsRow> rows;
    std::vector<TickSummary> ticks;
    std::vector<EventRow> events;

    static constexpr const char* kCsvHeader = "tick,node,round,mode,loss,dist_to_mean,peer_count,digest";

    void write_csv(std::ostream& os) const;
    void write_jsonl(std::ostream& os) const;
    void write_ticks_jsonl(std::ostream& os) const;
    void write_events_jsonl(std::ostream& os) const;
    /// FNV-1a over every export, as 16 hex digits.
    std::string hash() const;
};

/// Max over nodes of the l2 distance to the element-wise mean. Throws
/// EmptyInput on no sets, SpecMismatch on mixed specs.
double consensus_distance(std::span<const ParameterSet> params);
/// Same, from the rows logged at `tick`. Throws ValidationError for a tick
/// outside the log, NoAliveNodes when no alive node held a model.
double consensus_distance(const MetricsLog& log, Tick tick);

struct CapturedFrame {
    Tick tick = 0;
    std::string from;  // node name
    std::string to;    // node name, or the raw address if unknown
    wire::Kind kind = wire::Kind::Hello;
    bool dropped = false;
};

struct FrameCounters {
    std::uint64_t sent = 0;
    std::uint64_t dropped = 0;
    std::uint64_t delivered = 0;
    std::uint64_t in_flight() const noexcept { return sent - dropped - delivered; }
};

class Simulation {
public:
    /// Validates, then builds data, trainers and nodes. Nothing runs yet.
    explicit Simulation(ScenarioSpec spec);
    ~Simulation();
    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    /// Runs one tick.
    void step();
    bool finished() const;
    /// Steps until finished; returns the log.
    const MetricsLog& run();

    Tick now() const noexcept { return tick_; }
    const ScenarioSpec& spec() const noexcept { return spec_; }
    const MetricsLog& log() const noexcept { return log_; }
    const FrameCounters& counters() const noexcept { return counters_; }
    const std::vector<CapturedFrame>& capture() const noexcept { return capture_; }
    const Topology& topology() const noexcept { return topology_; }
    const refmodel::Dataset& dataset() const noexcept { return dataset_; }

    /// Every node created so far, in creation order.
    std::vector<std::string> node_names() const;
    Node* node(const std::string& name);
    const Node* node(const std::string& name) const;
    bool alive(const std::string& name) const;
    std::string name_of(const NodeId& id) const;

    /// Called for each completed round with the node's post-round params.
    std::function<void(const std::string&, const RoundReport&, const ParameterSet&)> on_round;

private:
    struct Member;
    class Link;
    struct InFlight {
        std::string from;
        std::string to;
        wire::Bytes frame;
        std::size_t capture_index;
    };

    bool enqueue(const std::string& from, const std::string& address, const wire::Bytes& frame);
    void deliver_due();
    void fire_churn();
    bool round_reached(std::uint64_t round) const;
    void apply(const ChurnEvent& ev);
    Member& create_member(const NodeSpec& ns, std::size_t index);
    std::unique_ptr<TrainerContract> make_trainer(const NodeSpec& ns, std::size_t index);
    void record_tick();

    ScenarioSpec spec_;
    refmodel::Dataset dataset_;
    std::vector<refmodel::Shard> shards_;
    std::shared_ptr<const AggregationStrategy> strategy_;
    Topology topology_;
    std::mt19937_64 rng_;

    std::vector<std::unique_ptr<Member>> members_;  // creation order
    std::map<std::string, Member*> by_name_;
    std::map<std::string, Member*> by_address_;
    std::map<NodeId, Member*> by_id_;

    std::multimap<std::pair<Tick, std::uint64_t>, InFlight> queue_;
    std::uint64_t seq_ = 0;
    std::vector<bool> fired_;

    Tick tick_ = 0;
    FrameCounters counters_;
    std::vector<CapturedFrame> capture_;
    MetricsLog log_;
};

/// Runs a scenario to completion.
MetricsLog run_scenario(const ScenarioSpec& spec);

/// "sim://<name>"
std::string sim_address(const std::string& name);

/// Splitmix finalizer used to derive every per-node seed from one scenario seed.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

}  // namespace meshfed::sim
