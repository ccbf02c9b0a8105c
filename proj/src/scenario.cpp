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

#include "meshfed/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "meshfed/tcp.hpp"

namespace meshfed::sim {

namespace {

using json = nlohmann::json;

[[noreturn]] void invalid(const std::string& msg) { throw Error(Errc::ValidationError, msg); }

/// An object whose keys must all be consumed.
class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) invalid(where() + "expected an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* get(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void u64(const std::string& key, std::uint64_t& out) {
        if (const json* v = get(key)) {
            if (!v->is_number_unsigned()) invalid(field(key) + ": expected a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }
    void size(const std::string& key, std::size_t& out) {
        std::uint64_t v = out;
        u64(key, v);
        out = static_cast<std::size_t>(v);
    }
    void u32(const std::string& key, std::uint32_t& out) {
        std::uint64_t v = out;
        u64(key, v);
        if (v > 0xffffffffULL) invalid(field(key) + ": too large");
        out = static_cast<std::uint32_t>(v);
    }
    void tick(const std::string& key, Tick& out) {
        if (const json* v = get(key)) {
            if (!v->is_number_integer()) invalid(field(key) + ": expected an integer");
            out = v->get<Tick>();
        }
    }
    void real(const std::string& key, double& out) {
        if (const json* v = get(key)) {
            if (!v->is_number()) invalid(field(key) + ": expected a number");
            out = v->get<double>();
        }
    }
    void boolean(const std::string& key, bool& out) {
        if (const json* v = get(key)) {
            if (!v->is_boolean()) invalid(field(key) + ": expected true or false");
            out = v->get<bool>();
        }
    }
    void string(const std::string& key, std::string& out) {
        if (const json* v = get(key)) {
            if (!v->is_string()) invalid(field(key) + ": expected a string");
            out = v->get<std::string>();
        }
    }
    void strings(const std::string& key, std::vector<std::string>& out) {
        if (const json* v = get(key)) {
            if (!v->is_array()) invalid(field(key) + ": expected a list of strings");
            out.clear();
            for (std::size_t i = 0; i < v->size(); ++i) {
                if (!(*v)[i].is_string()) invalid(field(key) + "[" + std::to_string(i) + "]: expected a string");
                out.push_back((*v)[i].get<std::string>());
            }
        }
    }
    void mode(const std::string& key, SharingMode& out) {
        std::string s;
        string(key, s);
        if (s.empty() && !j_.contains(key)) return;
        auto m = parse_mode(s);
        if (!m) invalid(field(key) + ": unknown mode '" + s + "' (seed|leech|peer|block)");
        out = *m;
    }

    /// Throws on any key not asked for.
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) invalid(field(it.key()) + ": unknown key");
    }

private:
    std::string where() const { return path_.empty() ? "" : path_ + ": "; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

/// Node fields shared by defaults, node entries and join events.
void node_fields(Fields& f, NodeSpec& n) {
    f.mode("mode", n.mode);
    f.u64("promote_threshold", n.promote_threshold);
    f.boolean("privacy_exclusion", n.privacy_exclusion);
    f.real("noise_sigma", n.noise_sigma);
    f.size("pool_min_inbound", n.pool_min_inbound);
    f.tick("pool_timeout", n.pool_timeout);
    f.u64("staleness_window", n.staleness_window);
    f.boolean("initial_params", n.initial_params);
    f.boolean("isolated", n.isolated);
    if (const json* a = f.get("arrival")) {
        Fields af(*a, f.field("arrival"));
        refmodel::DataArrival arrival;
        af.u64("initial", arrival.initial);
        af.u64("per_round", arrival.per_round);
        af.finish();
        n.arrival = arrival;
    }
}

void parse_topology(const json& j, TopologySpec& t) {
    Fields f(j, "topology");
    f.string("kind", t.kind);
    f.string("hub", t.hub);
    f.strings("hubs", t.hubs);
    f.size("edges_per_leaf", t.edges_per_leaf);
    f.size("rows", t.rows);
    f.size("cols", t.cols);
    f.finish();
}

void parse_partition(const json& j, refmodel::PartitionScheme& p) {
    Fields f(j, "partition");
    std::string scheme = "iid";
    f.string("scheme", scheme);
    double alpha = 0.0;
    f.real("alpha", alpha);
    std::vector<double> ratios;
    if (const json* r = f.get("ratios")) {
        if (!r->is_array()) invalid("partition.ratios: expected a list of numbers");
        for (const auto& v : *r) {
            if (!v.is_number()) invalid("partition.ratios: expected a list of numbers");
            ratios.push_back(v.get<double>());
        }
    }
    f.finish();
    if (scheme == "iid") {
        p = refmodel::PartitionScheme::iid();
    } else if (scheme == "feature_skew") {
        p = refmodel::PartitionScheme::feature_skew(alpha);
    } else if (scheme == "quantity_skew") {
        p = refmodel::PartitionScheme::quantity_skew(std::move(ratios));
    } else {
        invalid("partition.scheme: unknown scheme '" + scheme + "' (iid|feature_skew|quantity_skew)");
    }
}

void parse_trainer(const json& j, TrainerSpec& t) {
    Fields f(j, "trainer");
    std::string model = "linear", dtype = "f64", init = "shared";
    f.string("model", model);
    f.real("learning_rate", t.learning_rate);
    f.u32("local_epochs", t.local_epochs);
    f.size("batch_size", t.batch_size);
    f.size("hidden", t.hidden);
    f.string("dtype", dtype);
    f.string("init", init);
    f.real("init_scale", t.init_scale);
    f.finish();
    if (model == "linear") {
        t.model = refmodel::ModelKind::Linear;
    } else if (model == "mlp") {
        t.model = refmodel::ModelKind::Mlp;
    } else {
        invalid("trainer.model: unknown model '" + model + "' (linear|mlp)");
    }
    auto dt = parse_dtype(dtype);
    if (!dt) invalid("trainer.dtype: unknown dtype '" + dtype + "' (f32|f64)");
    t.dtype = *dt;
    if (init == "shared") {
        t.shared_init = true;
    } else if (init == "per_node") {
        t.shared_init = false;
    } else {
        invalid("trainer.init: expected 'shared' or 'per_node'");
    }
}

void parse_sim(const json& j, SimConfig& s, bool& seed_given) {
    Fields f(j, "sim");
    seed_given = j.contains("seed");
    f.u64("seed", s.seed);
    if (const json* lat = f.get("latency_ticks")) {
        if (!lat->is_array() || lat->size() != 2 || !(*lat)[0].is_number_integer() || !(*lat)[1].is_number_integer())
            invalid("sim.latency_ticks: expected [min, max]");
        s.latency_min = (*lat)[0].get<Tick>();
        s.latency_max = (*lat)[1].get<Tick>();
    }
    f.real("drop_prob", s.drop_prob);
    f.tick("heartbeat_interval", s.heartbeat_interval);
    f.u32("ttl_multiplier", s.ttl_multiplier);
    f.finish();
}

ChurnEvent parse_churn(const json& j, std::size_t index, const NodeSpec& defaults) {
    const std::string path = "churn[" + std::to_string(index) + "]";
    Fields f(j, path);
    ChurnEvent ev;
    if (const json* t = f.get("at_tick")) {
        if (!t->is_number_integer()) invalid(path + ".at_tick: expected an integer");
        ev.at_tick = t->get<Tick>();
    }
    if (const json* r = f.get("at_round")) {
        if (!r->is_number_unsigned()) invalid(path + ".at_round: expected a non-negative integer");
        ev.at_round = r->get<std::uint64_t>();
    }
    std::string action;
    f.string("action", action);
    f.string("node", ev.node);
    if (action == "kill") {
        ev.action = ChurnEvent::Action::Kill;
    } else if (action == "revive") {
        ev.action = ChurnEvent::Action::Revive;
    } else if (action == "join") {
        ev.action = ChurnEvent::Action::Join;
        ev.join = defaults;
        ev.join.name = ev.node;
        f.strings("connect_to", ev.connect_to);
        node_fields(f, ev.join);
    } else {
        invalid(path + ".action: expected kill, revive or join");
    }
    f.finish();
    return ev;
}

ScenarioSpec from_json(const json& root) {
    Fields f(root, "");
    ScenarioSpec s;
    std::string ns = "sim";
    f.string("namespace", ns);
    if (!Namespace::valid(ns)) invalid("namespace: must be 1-255 bytes without NUL");
    s.ns = Namespace(ns);
    f.u64("seed", s.seed);
    f.u64("rounds", s.rounds);
    f.tick("max_ticks", s.max_ticks);
    f.string("aggregation", s.aggregation);
    if (const json* t = f.get("topology")) parse_topology(*t, s.topology);
    if (const json* o = f.get("edge_overrides")) {
        if (!o->is_array()) invalid("edge_overrides: expected a list");
        for (std::size_t i = 0; i < o->size(); ++i) {
            Fields of((*o)[i], "edge_overrides[" + std::to_string(i) + "]");
            EdgeOverride e;
            of.string("from", e.from);
            of.string("to", e.to);
            of.mode("mode", e.mode);
            of.finish();
            s.edge_overrides.push_back(e);
        }
    }
    if (const json* d = f.get("dataset")) {
        Fields df(*d, "dataset");
        df.size("n", s.dataset.n);
        df.size("d", s.dataset.d);
        df.real("noise_std", s.dataset.noise_std);
        df.finish();
    }
    if (const json* p = f.get("partition")) parse_partition(*p, s.partition);
    if (const json* t = f.get("trainer")) parse_trainer(*t, s.trainer);

    NodeSpec defaults;
    if (const json* d = f.get("defaults")) {
        Fields df(*d, "defaults");
        node_fields(df, defaults);
        df.finish();
    }

    const json* nodes = f.get("nodes");
    if (nodes == nullptr) invalid("nodes: required");
    if (nodes->is_number_unsigned()) {
        const auto count = nodes->get<std::uint64_t>();
        if (count == 0 || count > 100000) invalid("nodes: count must be in [1, 100000]");
        for (std::uint64_t i = 0; i < count; ++i) {
            NodeSpec n = defaults;
            n.name = "n" + std::to_string(i);
            s.nodes.push_back(n);
        }
    } else if (nodes->is_array()) {
        for (std::size_t i = 0; i < nodes->size(); ++i) {
            Fields nf((*nodes)[i], "nodes[" + std::to_string(i) + "]");
            NodeSpec n = defaults;
            nf.string("name", n.name);
            node_fields(nf, n);
            nf.finish();
            s.nodes.push_back(n);
        }
    } else {
        invalid("nodes: expected a count or a list of node objects");
    }

    if (const json* c = f.get("churn")) {
        if (!c->is_array()) invalid("churn: expected a list");
        for (std::size_t i = 0; i < c->size(); ++i) s.churn.push_back(parse_churn((*c)[i], i, defaults));
    }

    bool sim_seed_given = false;
    if (const json* sm = f.get("sim")) parse_sim(*sm, s.sim, sim_seed_given);
    if (!sim_seed_given) s.sim.seed = s.seed;
    f.finish();
    return s;
}

}  // namespace

json parse_json(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        // Recover line and column from the byte offset.
        std::size_t line = 1, col = 1;
        const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
        for (std::size_t i = 0; i < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::string what = e.what();
        if (auto p = what.find("syntax error"); p != std::string::npos) what = what.substr(p);
        invalid("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + what);
    }
}

ScenarioSpec parse_scenario(std::string_view text) {
    ScenarioSpec spec = from_json(parse_json(text));
    validate(spec);
    return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

NodeConfig node_config_from_json(const json& j) {
    Fields f(j, "");
    NodeConfig c;
    c.node.pool_timeout = 500;
    f.string("namespace", c.ns);
    f.string("listen", c.listen);
    f.strings("bootstrap", c.bootstrap);
    f.string("id", c.id);
    f.string("aggregation", c.aggregation);
    f.u64("rounds", c.rounds);
    f.tick("heartbeat_interval", c.heartbeat_interval);
    f.u32("ttl_multiplier", c.ttl_multiplier);
    f.u64("seed", c.seed);
    f.size("shards", c.shards);
    f.size("shard", c.shard);
    node_fields(f, c.node);
    if (const json* t = f.get("trainer")) parse_trainer(*t, c.trainer);
    if (const json* d = f.get("dataset")) {
        Fields df(*d, "dataset");
        df.size("n", c.dataset.n);
        df.size("d", c.dataset.d);
        df.real("noise_std", c.dataset.noise_std);
        df.finish();
    }
    if (const json* p = f.get("partition")) parse_partition(*p, c.partition);
    if (!j.contains("namespace")) invalid("namespace: required");
    f.finish();
    validate(c);
    return c;
}

void validate(const NodeConfig& c) {
    if (!Namespace::valid(c.ns)) invalid("namespace: must be 1 to 255 bytes with no NUL");
    std::string host;
    std::uint16_t port = 0;
    if (!split_host_port(c.listen, host, port)) invalid("listen: expected host:port");
    for (std::size_t i = 0; i < c.bootstrap.size(); ++i)
        if (!split_host_port(c.bootstrap[i], host, port) || port == 0)
            invalid("bootstrap[" + std::to_string(i) + "]: expected host:port");
    if (!c.id.empty() && !NodeId::from_hex(c.id)) invalid("id: expected 32 hex digits");
    if (!make_strategy(c.aggregation)) invalid("aggregation: unknown strategy '" + c.aggregation + "'");
    if (c.heartbeat_interval < 1) invalid("heartbeat_interval: must be >= 1");
    if (c.ttl_multiplier < 1) invalid("ttl_multiplier: must be >= 1");
    if (c.node.pool_min_inbound == 0) invalid("pool_min_inbound: must be >= 1");
    if (c.node.pool_timeout < 0) invalid("pool_timeout: must be >= 0");
    if (!(c.node.noise_sigma >= 0.0)) invalid("noise_sigma: must be >= 0");
    if (c.node.isolated) invalid("isolated: only meaningful in simulation");
    const auto& tr = c.trainer;
    if (!(tr.learning_rate > 0.0)) invalid("trainer.learning_rate: must be > 0");
    if (tr.batch_size == 0) invalid("trainer.batch_size: must be >= 1");
    if (tr.model == refmodel::ModelKind::Mlp && tr.hidden == 0) invalid("trainer.hidden: must be >= 1");
    if (!(tr.init_scale >= 0.0)) invalid("trainer.init_scale: must be >= 0");
    if (c.dataset.n == 0) invalid("dataset.n: must be >= 1");
    if (c.dataset.d == 0) invalid("dataset.d: must be >= 1");
    if (!(c.dataset.noise_std >= 0.0)) invalid("dataset.noise_std: must be >= 0");
    if (c.shards == 0 || c.shards > c.dataset.n) invalid("shards: must be in [1, dataset.n]");
    if (c.shard >= c.shards) invalid("shard: must be below shards");
}

}  // namespace meshfed::sim
