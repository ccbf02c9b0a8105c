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

#include "meshfed/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace meshfed::sim {

namespace {

using ojson = nlohmann::ordered_json;

[[noreturn]] void invalid(const std::string& msg) { throw Error(Errc::ValidationError, msg); }

std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ojson json_double(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::vector<NodeId> ids_for(const ScenarioSpec& spec, const std::vector<std::string>& names) {
    std::vector<NodeId> out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(NodeId::derive(n, spec.seed));
    return out;
}

/// Element-wise mean in double precision plus each set's distance to it.
std::vector<double> distances_to_mean(std::span<const ParameterSet* const> sets) {
    if (sets.empty()) throw Error(Errc::EmptyInput, "no parameter sets");
    const ModelSpec spec = spec_of(*sets[0]);
    for (const auto* ps : sets)
        if (!conforms(*ps, spec)) throw Error(Errc::SpecMismatch, "parameter sets differ in spec");

    std::vector<std::vector<double>> mean;
    for (const auto& [name, t] : *sets[0]) mean.emplace_back(t.size(), 0.0);
    for (const auto* ps : sets) {
        std::size_t e = 0;
        for (const auto& [name, t] : *ps) {
            for (std::size_t i = 0; i < t.size(); ++i) mean[e][i] += t[i];
            ++e;
        }
    }
    const double k = static_cast<double>(sets.size());
    for (auto& m : mean)
        for (double& v : m) v /= k;

    std::vector<double> out;
    for (const auto* ps : sets) {
        double sum = 0.0;
        std::size_t e = 0;
        for (const auto& [name, t] : *ps) {
            for (std::size_t i = 0; i < t.size(); ++i) sum += (t[i] - mean[e][i]) * (t[i] - mean[e][i]);
            ++e;
        }
        out.push_back(std::sqrt(sum));
    }
    return out;
}

}  // namespace

std::string sim_address(const std::string& name) { return "sim://" + name; }

std::uint64_t mix_seed(std::uint64_t x) noexcept { return mix(x); }

std::string_view action_name(ChurnEvent::Action a) noexcept {
    switch (a) {
        case ChurnEvent::Action::Kill: return "kill";
        case ChurnEvent::Action::Revive: return "revive";
        case ChurnEvent::Action::Join: return "join";
    }
    return "unknown";
}

// ---- validation -----------------------------------------------------------

Topology build_topology(const ScenarioSpec& spec) {
    std::vector<std::string> names;
    for (const auto& n : spec.nodes) names.push_back(n.name);
    const auto ids = ids_for(spec, names);
    auto id_of = [&](const std::string& name, const std::string& field) {
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) invalid(field + ": unknown node '" + name + "'");
        return ids[static_cast<std::size_t>(it - names.begin())];
    };

    const auto& ts = spec.topology;
    Topology t;
    try {
        if (ts.kind == "complete") {
            t = build_complete(ids);
        } else if (ts.kind == "star") {
            if (names.empty()) invalid("topology: star needs nodes");
            const std::string hub = ts.hub.empty() ? names[0] : ts.hub;
            const NodeId hub_id = id_of(hub, "topology.hub");
            std::vector<NodeId> leaves;
            for (const auto& id : ids)
                if (id != hub_id) leaves.push_back(id);
            t = build_star(hub_id, leaves);
        } else if (ts.kind == "neighborhood") {
            std::vector<std::string> hub_names = ts.hubs;
            if (hub_names.empty())
                hub_names.assign(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(2, names.size())));
            std::vector<NodeId> hubs, leaves;
            for (std::size_t i = 0; i < hub_names.size(); ++i)
                hubs.push_back(id_of(hub_names[i], "topology.hubs[" + std::to_string(i) + "]"));
            for (const auto& id : ids)
                if (std::find(hubs.begin(), hubs.end(), id) == hubs.end()) leaves.push_back(id);
            t = build_neighborhood(hubs, ts.edges_per_leaf, leaves);
        } else if (ts.kind == "grid") {
            t = build_grid(ts.rows, ts.cols, ids);
        } else {
            invalid("topology.kind: unknown kind '" + ts.kind + "'");
        }
    } catch (const Error& e) {
        if (e.code() == Errc::ValidationError) throw;
        invalid(std::string("topology: ") + e.what());
    }

    for (std::size_t i = 0; i < spec.edge_overrides.size(); ++i) {
        const auto& o = spec.edge_overrides[i];
        const std::string field = "edge_overrides[" + std::to_string(i) + "]";
        const NodeId from = id_of(o.from, field + ".from");
        const NodeId to = id_of(o.to, field + ".to");
        if (from == to) invalid(field + ": self edge");
        t.set_edge(from, to, o.mode);
    }
    return t;
}

void validate(const ScenarioSpec& spec) {
    if (spec.rounds == 0) invalid("rounds: must be >= 1");
    if (spec.max_ticks < 0) invalid("max_ticks: must be >= 0");
    if (!make_strategy(spec.aggregation)) invalid("aggregation: unknown strategy '" + spec.aggregation + "'");

    const auto& sc = spec.sim;
    if (sc.latency_min < 1) invalid("sim.latency_ticks: minimum must be >= 1");
    if (sc.latency_max < sc.latency_min) invalid("sim.latency_ticks: max below min");
    if (!(sc.drop_prob >= 0.0 && sc.drop_prob <= 1.0)) invalid("sim.drop_prob: must be in [0, 1]");
    if (sc.heartbeat_interval < 1) invalid("sim.heartbeat_interval: must be >= 1");
    if (sc.ttl_multiplier < 1) invalid("sim.ttl_multiplier: must be >= 1");

    const auto& tr = spec.trainer;
    if (!(tr.learning_rate > 0.0)) invalid("trainer.learning_rate: must be > 0");
    if (tr.batch_size == 0) invalid("trainer.batch_size: must be >= 1");
    if (tr.model == refmodel::ModelKind::Mlp && tr.hidden == 0) invalid("trainer.hidden: must be >= 1");
    if (!(tr.init_scale >= 0.0)) invalid("trainer.init_scale: must be >= 0");

    if (spec.nodes.empty()) invalid("nodes: at least one node required");
    std::set<std::string> known;
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        const auto& n = spec.nodes[i];
        const std::string field = "nodes[" + std::to_string(i) + "]";
        if (n.name.empty()) invalid(field + ".name: empty");
        if (!known.insert(n.name).second) invalid(field + ".name: duplicate node '" + n.name + "'");
        if (n.pool_min_inbound == 0) invalid(field + ".pool_min_inbound: must be >= 1");
        if (n.pool_timeout < 0) invalid(field + ".pool_timeout: must be >= 0");
        if (!(n.noise_sigma >= 0.0)) invalid(field + ".noise_sigma: must be >= 0");
    }

    std::size_t joins = 0;
    for (std::size_t i = 0; i < spec.churn.size(); ++i) {
        const auto& ev = spec.churn[i];
        const std::string field = "churn[" + std::to_string(i) + "]";
        if (ev.at_tick.has_value() == ev.at_round.has_value())
            invalid(field + ": exactly one of at_tick and at_round is required");
        if (ev.at_tick && *ev.at_tick < 0) invalid(field + ".at_tick: must be >= 0");
        switch (ev.action) {
            case ChurnEvent::Action::Kill:
            case ChurnEvent::Action::Revive:
                if (!known.count(ev.node))
                    invalid(field + ": " + std::string(action_name(ev.action)) + " of unknown node '" + ev.node + "'");
                break;
            case ChurnEvent::Action::Join:
                if (ev.node.empty() || ev.join.name != ev.node) invalid(field + ".node: join needs a node name");
                if (known.count(ev.node)) invalid(field + ".node: node '" + ev.node + "' already exists");
                for (std::size_t j = 0; j < ev.connect_to.size(); ++j)
                    if (!known.count(ev.connect_to[j]))
                        invalid(field + ".connect_to[" + std::to_string(j) + "]: unknown node '" + ev.connect_to[j] +
                                "'");
                if (ev.join.pool_min_inbound == 0) invalid(field + ".pool_min_inbound: must be >= 1");
                known.insert(ev.node);
                ++joins;
                break;
        }
    }

    const auto& ds = spec.dataset;
    if (ds.n == 0) invalid("dataset.n: must be >= 1");
    if (ds.d == 0) invalid("dataset.d: must be >= 1");
    if (!(ds.noise_std >= 0.0)) invalid("dataset.noise_std: must be >= 0");
    const std::size_t shards = spec.nodes.size() + joins;
    if (shards > ds.n) invalid("dataset.n: fewer samples than nodes");
    const auto& p = spec.partition;
    if (p.kind == refmodel::PartitionScheme::Kind::FeatureSkew && !(p.alpha >= 0.0 && p.alpha <= 1.0))
        invalid("partition.alpha: must be in [0, 1]");
    if (p.kind == refmodel::PartitionScheme::Kind::QuantitySkew) {
        if (p.ratios.size() != shards)
            invalid("partition.ratios: need one ratio per node (" + std::to_string(shards) + ")");
        double sum = 0.0;
        for (double r : p.ratios) {
            if (!(r >= 0.0)) invalid("partition.ratios: negative ratio");
            sum += r;
        }
        if (std::abs(sum - 1.0) > 1e-9) invalid("partition.ratios: must sum to 1");
    }

    build_topology(spec);
}

// ---- metrics --------------------------------------------------------------

void MetricsLog::write_csv(std::ostream& os) const {
    os << kCsvHeader << '\n';
    for (const auto& r : rows) {
        os << r.tick << ',' << r.node << ',' << r.round << ',' << mode_name(r.mode) << ',' << fmt_double(r.loss) << ','
           << fmt_double(r.dist_to_mean) << ',' << r.peer_count << ',' << r.digest << '\n';
    }
}

void MetricsLog::write_jsonl(std::ostream& os) const {
    for (const auto& r : rows) {
        ojson j;
        j["tick"] = r.tick;
        j["node"] = r.node;
        j["round"] = r.round;
        j["mode"] = mode_name(r.mode);
        j["loss"] = json_double(r.loss);
        j["dist_to_mean"] = json_double(r.dist_to_mean);
        j["peer_count"] = r.peer_count;
        j["digest"] = r.digest;
        os << j.dump() << '\n';
    }
}

void MetricsLog::write_ticks_jsonl(std::ostream& os) const {
    for (const auto& t : ticks) {
        ojson j;
        j["tick"] = t.tick;
        j["alive"] = t.alive;
        j["ready"] = t.ready;
        j["frames_sent"] = t.frames_sent;
        j["frames_dropped"] = t.frames_dropped;
        j["frames_delivered"] = t.frames_delivered;
        j["frames_in_flight"] = t.frames_in_flight;
        os << j.dump() << '\n';
    }
}

void MetricsLog::write_events_jsonl(std::ostream& os) const {
    for (const auto& e : events) {
        ojson j;
        j["tick"] = e.tick;
        j["node"] = e.node;
        j["event"] = e.kind;
        j["round"] = e.round;
        if (!e.peer.empty()) j["peer"] = e.peer;
        if (!e.from.empty()) j["from"] = e.from;
        if (!e.to.empty()) j["to"] = e.to;
        os << j.dump() << '\n';
    }
}

std::string MetricsLog::hash() const {
    std::ostringstream os;
    write_csv(os);
    write_ticks_jsonl(os);
    write_events_jsonl(os);
    const std::string text = os.str();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

double consensus_distance(std::span<const ParameterSet> params) {
    std::vector<const ParameterSet*> ptrs;
    for (const auto& p : params) ptrs.push_back(&p);
    auto d = distances_to_mean(ptrs);
    return *std::max_element(d.begin(), d.end());
}

double consensus_distance(const MetricsLog& log, Tick tick) {
    auto t = std::lower_bound(log.ticks.begin(), log.ticks.end(), tick,
                              [](const TickSummary& s, Tick v) { return s.tick < v; });
    if (t == log.ticks.end() || t->tick != tick) invalid("tick " + std::to_string(tick) + " is not in the log");
    auto lo = std::lower_bound(log.rows.begin(), log.rows.end(), tick,
                               [](const MetricsRow& r, Tick v) { return r.tick < v; });
    bool any = false;
    double worst = 0.0;
    for (auto it = lo; it != log.rows.end() && it->tick == tick; ++it) {
        if (std::isnan(it->dist_to_mean)) continue;
        any = true;
        worst = std::max(worst, it->dist_to_mean);
    }
    if (!any) throw Error(Errc::NoAliveNodes, "no alive node held a model at tick " + std::to_string(tick));
    return worst;
}

// ---- simulation -----------------------------------------------------------

class Simulation::Link final : public Transport {
public:
    Link(Simulation& sim, std::string from) : sim_(sim), from_(std::move(from)) {}
    bool send(const std::string& address, const wire::Bytes& frame) override {
        return sim_.enqueue(from_, address, frame);
    }

private:
    Simulation& sim_;
    std::string from_;
};

struct Simulation::Member {
    std::string name;
    std::string address;
    NodeSpec spec;
    std::size_t index = 0;
    std::unique_ptr<Link> link;
    std::unique_ptr<Node> node;
    bool alive = true;
    bool started = false;
};

Simulation::Simulation(ScenarioSpec spec) : spec_(std::move(spec)), rng_(spec_.sim.seed) {
    validate(spec_);
    std::size_t joins = 0;
    for (const auto& ev : spec_.churn) joins += ev.action == ChurnEvent::Action::Join;

    dataset_ = refmodel::gen_dataset(spec_.seed, spec_.dataset.n, spec_.dataset.d, spec_.dataset.noise_std);
    shards_ = refmodel::partition(dataset_, spec_.nodes.size() + joins, spec_.partition, mix(spec_.seed ^ 0x5a));
    strategy_ = make_strategy(spec_.aggregation);
    topology_ = build_topology(spec_);
    fired_.assign(spec_.churn.size(), false);

    for (std::size_t i = 0; i < spec_.nodes.size(); ++i) create_member(spec_.nodes[i], i);
}

Simulation::~Simulation() = default;

std::unique_ptr<TrainerContract> Simulation::make_trainer(const NodeSpec& ns, std::size_t index) {
    const auto& tr = spec_.trainer;
    refmodel::ModelShape shape{tr.model, spec_.dataset.d, tr.hidden, tr.dtype};
    std::optional<ParameterSet> initial;
    if (ns.initial_params) {
        const std::uint64_t init_seed = tr.shared_init ? mix(spec_.seed ^ 0x1417) : mix(spec_.seed ^ 0x1417) + index + 1;
        initial = refmodel::init_params(shape, init_seed, tr.init_scale);
    }
    refmodel::TrainerConfig cfg{tr.learning_rate, tr.local_epochs, tr.batch_size, mix(spec_.seed + 1000 + index)};
    return std::make_unique<refmodel::GradientTrainer>(shape, shards_.at(index), cfg, std::move(initial), ns.arrival);
}

Simulation::Member& Simulation::create_member(const NodeSpec& ns, std::size_t index) {
    auto m = std::make_unique<Member>();
    m->name = ns.name;
    m->address = sim_address(ns.name);
    m->spec = ns;
    m->index = index;
    m->link = std::make_unique<Link>(*this, ns.name);

    NodeOptions opt;
    opt.id = NodeId::derive(ns.name, spec_.seed);
    opt.ns = spec_.ns;
    opt.address = m->address;
    std::set<NodeId> near;
    if (topology_.contains(opt.id)) {
        for (const auto& [peer, mode] : topology_.neighbors(opt.id, Direction::Outbound)) near.insert(peer);
        for (const auto& [peer, mode] : topology_.neighbors(opt.id, Direction::Inbound)) near.insert(peer);
    }
    std::map<NodeId, std::string> names;
    for (const auto& n : spec_.nodes) names[NodeId::derive(n.name, spec_.seed)] = n.name;
    for (const auto& ev : spec_.churn)
        if (ev.action == ChurnEvent::Action::Join) names[NodeId::derive(ev.node, spec_.seed)] = ev.node;
    for (const auto& peer : near) opt.bootstrap.push_back(sim_address(names.at(peer)));

    opt.policy.default_mode = ns.mode;
    opt.policy.promote_threshold = ns.promote_threshold;
    opt.policy.privacy_exclusion = ns.privacy_exclusion;
    opt.policy.noise = NoisePolicy{ns.noise_sigma, mix(spec_.seed + 2000 + index)};
    opt.policy.pool_min_inbound = ns.pool_min_inbound;
    opt.policy.pool_timeout = ns.pool_timeout;
    opt.policy.staleness_window = ns.staleness_window;
    opt.heartbeat_interval = spec_.sim.heartbeat_interval;
    opt.ttl_multiplier = spec_.sim.ttl_multiplier;
    opt.max_rounds = spec_.rounds;

    m->node = std::make_unique<Node>(opt, make_trainer(ns, index), strategy_, *m->link, topology_);
    Member* raw = m.get();
    m->node->on_event = [this, raw](const NodeEvent& ev) {
        EventRow row{tick_, raw->name, std::string(event_kind_name(ev.kind)), ev.round, {}, {}, {}};
        if (ev.kind != NodeEvent::Kind::NoPeersForModel && ev.kind != NodeEvent::Kind::ModeTransition)
            row.peer = name_of(ev.peer);
        if (ev.kind == NodeEvent::Kind::ModeTransition) {
            row.from = mode_name(ev.from);
            row.to = mode_name(ev.to);
        }
        log_.events.push_back(std::move(row));
    };

    by_name_[m->name] = raw;
    by_address_[m->address] = raw;
    by_id_[opt.id] = raw;
    members_.push_back(std::move(m));
    return *raw;
}

std::vector<std::string> Simulation::node_names() const {
    std::vector<std::string> out;
    for (const auto& m : members_) out.push_back(m->name);
    return out;
}

Node* Simulation::node(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second->node.get();
}

const Node* Simulation::node(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second->node.get();
}

bool Simulation::alive(const std::string& name) const {
    auto it = by_name_.find(name);
    return it != by_name_.end() && it->second->alive;
}

std::string Simulation::name_of(const NodeId& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? id.hex() : it->second->name;
}

bool Simulation::enqueue(const std::string& from, const std::string& address, const wire::Bytes& frame) {
    ++counters_.sent;
    auto target = by_address_.find(address);
    CapturedFrame cf;
    cf.tick = tick_;
    cf.from = from;
    cf.to = target == by_address_.end() ? address : target->second->name;
    if (frame.size() > 5) cf.kind = static_cast<wire::Kind>(frame[5]);

    const bool drop = std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < spec_.sim.drop_prob;
    if (drop || by_name_.at(from)->spec.isolated) {
        ++counters_.dropped;
        cf.dropped = true;
        capture_.push_back(std::move(cf));
        return true;
    }
    const Tick latency = std::uniform_int_distribution<Tick>(spec_.sim.latency_min, spec_.sim.latency_max)(rng_);
    queue_.emplace(std::make_pair(tick_ + latency, seq_++), InFlight{from, address, frame, capture_.size()});
    capture_.push_back(std::move(cf));
    return true;
}

void Simulation::deliver_due() {
    while (!queue_.empty() && queue_.begin()->first.first <= tick_) {
        InFlight f = std::move(queue_.begin()->second);
        queue_.erase(queue_.begin());
        auto target = by_address_.find(f.to);
        if (target == by_address_.end() || !target->second->alive || target->second->spec.isolated) {
            ++counters_.dropped;
            capture_[f.capture_index].dropped = true;
            continue;
        }
        ++counters_.delivered;
        target->second->node->handle_frame(f.frame, tick_);
    }
}

bool Simulation::round_reached(std::uint64_t round) const {
    bool any = false;
    for (const auto& m : members_) {
        if (!m->alive || !m->node->ready()) continue;
        any = true;
        if (m->node->completed_rounds() < round) return false;
    }
    return any;
}

void Simulation::fire_churn() {
    for (std::size_t i = 0; i < spec_.churn.size(); ++i) {
        if (fired_[i]) continue;
        const auto& ev = spec_.churn[i];
        const bool due = ev.at_tick ? *ev.at_tick <= tick_ : round_reached(*ev.at_round);
        if (!due) continue;
        fired_[i] = true;
        apply(ev);
    }
}

void Simulation::apply(const ChurnEvent& ev) {
    log_.events.push_back({tick_, ev.node, std::string(action_name(ev.action)), 0, {}, {}, {}});
    switch (ev.action) {
        case ChurnEvent::Action::Kill: {
            Member* m = by_name_.at(ev.node);
            log_.events.back().round = m->node->completed_rounds();
            m->alive = false;
            break;
        }
        case ChurnEvent::Action::Revive: {
            Member* m = by_name_.at(ev.node);
            log_.events.back().round = m->node->completed_rounds();
            if (m->alive) break;
            m->alive = true;
            if (m->started) m->node->resume(tick_);
            break;
        }
        case ChurnEvent::Action::Join: {
            const NodeId id = NodeId::derive(ev.node, spec_.seed);
            topology_.add_node(id);
            std::vector<std::string> targets = ev.connect_to;
            if (targets.empty())
                for (const auto& m : members_) targets.push_back(m->name);
            for (const auto& t : targets) {
                const NodeId other = NodeId::derive(t, spec_.seed);
                topology_.set_edge(id, other, SharingMode::Peer);
                topology_.set_edge(other, id, SharingMode::Peer);
            }
            create_member(ev.join, members_.size());
            for (const auto& m : members_) m->node->set_topology(topology_);
            break;
        }
    }
}

void Simulation::record_tick() {
    std::vector<Member*> ready;
    std::vector<const ParameterSet*> sets;
    TickSummary summary;
    summary.tick = tick_;
    for (auto& [id, m] : by_id_) {
        if (!m->alive) continue;
        ++summary.alive;
        if (m->node->ready()) {
            ready.push_back(m);
            sets.push_back(&*m->node->params());
        }
    }
    summary.ready = ready.size();
    std::map<Member*, double> dist;
    if (!sets.empty()) {
        auto d = distances_to_mean(sets);
        for (std::size_t i = 0; i < ready.size(); ++i) dist[ready[i]] = d[i];
    }
    for (auto& [id, m] : by_id_) {
        if (!m->alive) continue;
        MetricsRow row;
        row.tick = tick_;
        row.node = m->name;
        row.round = m->node->completed_rounds();
        row.mode = m->node->mode();
        row.loss = m->node->last_loss();
        auto it = dist.find(m);
        row.dist_to_mean = it == dist.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
        row.peer_count = m->node->peers().size();
        if (m->node->ready()) row.digest = digest(*m->node->params());
        log_.rows.push_back(std::move(row));
    }
    summary.frames_sent = counters_.sent;
    summary.frames_dropped = counters_.dropped;
    summary.frames_delivered = counters_.delivered;
    summary.frames_in_flight = counters_.in_flight();
    log_.ticks.push_back(summary);
}

void Simulation::step() {
    deliver_due();
    fire_churn();
    for (auto& [id, m] : by_id_) {
        if (!m->alive) continue;
        if (!m->started) {
            m->node->start(tick_);
            m->started = true;
        }
        if (auto report = m->node->poll(tick_)) {
            if (on_round) on_round(m->name, *report, *m->node->params());
        }
    }
    record_tick();
    ++tick_;
}

bool Simulation::finished() const {
    if (tick_ >= spec_.tick_budget()) return true;
    for (std::size_t i = 0; i < spec_.churn.size(); ++i)
        if (!fired_[i] && spec_.churn[i].at_tick) return false;
    for (const auto& m : members_) {
        if (!m->alive) continue;
        if (!m->started || !m->node->done()) return false;
    }
    return true;
}

const MetricsLog& Simulation::run() {
    while (!finished()) step();
    return log_;
}

MetricsLog run_scenario(const ScenarioSpec& spec) {
    Simulation sim(spec);
    return sim.run();
}

}  // namespace meshfed::sim
