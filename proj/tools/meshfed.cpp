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

// meshfed command line. Machine-readable output is one JSON object per line
// on stdout; prose goes to stderr. Exit codes: 0 ok, 2 config or validation,
// 3 bind failure, 4 I/O.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "meshfed/conformance.hpp"
#include "meshfed/refmodel.hpp"
#include "meshfed/scenario.hpp"
#include "meshfed/tcp.hpp"
#include "meshfed/topology.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace meshfed;

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kBind = 3;
constexpr int kIo = 4;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void emit(const ordered_json& j) {
    std::cout << j.dump() << '\n' << std::flush;
}

int exit_code(const Error& e) {
    switch (e.code()) {
        case Errc::BindFailed: return kBind;
        case Errc::Io: return kIo;
        default: return kConfig;
    }
}

int fail(const Error& e) {
    std::cerr << "meshfed: " << e.what() << '\n';
    return exit_code(e);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// ---- node run ---------------------------------------------------------------

struct NodeFlags {
    std::string config;
    std::optional<std::string> ns, listen, id, mode, aggregation, model;
    std::vector<std::string> bootstrap;
    std::optional<std::uint64_t> rounds, promote_threshold, seed, shards, shard, local_epochs;
    std::optional<std::uint64_t> arrival_initial, arrival_per_round, pool_min_inbound;
    std::optional<std::int64_t> pool_timeout, heartbeat;
    std::optional<double> noise_sigma, learning_rate;
    bool privacy_exclusion = false;
    bool no_initial_params = false;
    std::int64_t linger_ms = -1;
};

/// Config file first, then each flag that was given replaces its field.
json merged_config(const NodeFlags& fl) {
    json j = fl.config.empty() ? json::object() : sim::parse_json(read_file(fl.config));
    if (!j.is_object()) throw Error(Errc::ValidationError, "config: expected an object");
    auto set = [&](const char* key, const auto& v) {
        if (v) j[key] = *v;
    };
    set("namespace", fl.ns);
    set("listen", fl.listen);
    set("id", fl.id);
    set("mode", fl.mode);
    set("aggregation", fl.aggregation);
    set("rounds", fl.rounds);
    set("promote_threshold", fl.promote_threshold);
    set("seed", fl.seed);
    set("shards", fl.shards);
    set("shard", fl.shard);
    set("pool_min_inbound", fl.pool_min_inbound);
    set("pool_timeout", fl.pool_timeout);
    set("heartbeat_interval", fl.heartbeat);
    set("noise_sigma", fl.noise_sigma);
    if (!fl.bootstrap.empty()) j["bootstrap"] = fl.bootstrap;
    if (fl.privacy_exclusion) j["privacy_exclusion"] = true;
    if (fl.no_initial_params) j["initial_params"] = false;
    if (fl.arrival_initial || fl.arrival_per_round) {
        json& a = j["arrival"];
        if (fl.arrival_initial) a["initial"] = *fl.arrival_initial;
        if (fl.arrival_per_round) a["per_round"] = *fl.arrival_per_round;
    }
    if (fl.learning_rate) j["trainer"]["learning_rate"] = *fl.learning_rate;
    if (fl.local_epochs) j["trainer"]["local_epochs"] = *fl.local_epochs;
    if (fl.model) j["trainer"]["model"] = *fl.model;
    return j;
}

std::unique_ptr<TrainerContract> make_trainer(const sim::NodeConfig& c) {
    const auto& tr = c.trainer;
    auto ds = refmodel::gen_dataset(c.seed, c.dataset.n, c.dataset.d, c.dataset.noise_std);
    auto shards = refmodel::partition(ds, c.shards, c.partition, sim::mix_seed(c.seed ^ 0x5a));
    refmodel::ModelShape shape{tr.model, c.dataset.d, tr.hidden, tr.dtype};
    std::optional<ParameterSet> initial;
    if (c.node.initial_params) {
        std::uint64_t init_seed = sim::mix_seed(c.seed ^ 0x1417);
        if (!tr.shared_init) init_seed += c.shard + 1;
        initial = refmodel::init_params(shape, init_seed, tr.init_scale);
    }
    refmodel::TrainerConfig cfg{tr.learning_rate, tr.local_epochs, tr.batch_size,
                                sim::mix_seed(c.seed + 1000 + c.shard)};
    return std::make_unique<refmodel::GradientTrainer>(shape, std::move(shards.at(c.shard)), cfg,
                                                       std::move(initial), c.node.arrival);
}

std::string advertised(const std::string& bound) {
    if (bound.rfind("0.0.0.0:", 0) == 0) return "127.0.0.1:" + bound.substr(8);
    return bound;
}

int node_run(const NodeFlags& fl) {
    sim::NodeConfig cfg = sim::node_config_from_json(merged_config(fl));
    TcpTransport transport(cfg.listen);

    NodeOptions opt;
    opt.id = cfg.id.empty() ? NodeId::random() : *NodeId::from_hex(cfg.id);
    opt.ns = Namespace(cfg.ns);
    opt.address = advertised(transport.address());
    opt.bootstrap = cfg.bootstrap;
    opt.policy.default_mode = cfg.node.mode;
    opt.policy.promote_threshold = cfg.node.promote_threshold;
    opt.policy.privacy_exclusion = cfg.node.privacy_exclusion;
    opt.policy.noise = NoisePolicy{cfg.node.noise_sigma, sim::mix_seed(cfg.seed + 2000 + cfg.shard)};
    opt.policy.pool_min_inbound = cfg.node.pool_min_inbound;
    opt.policy.pool_timeout = cfg.node.pool_timeout;
    opt.policy.staleness_window = cfg.node.staleness_window;
    opt.heartbeat_interval = cfg.heartbeat_interval;
    opt.ttl_multiplier = cfg.ttl_multiplier;
    opt.model_request_timeout = 2 * cfg.heartbeat_interval;
    opt.max_rounds = cfg.rounds;

    Node node(opt, make_trainer(cfg), make_strategy(cfg.aggregation), transport);
    const std::string self = node.id().hex();
    node.on_event = [&](const NodeEvent& ev) {
        ordered_json j;
        j["event"] = event_kind_name(ev.kind);
        j["node"] = self;
        j["tick"] = ev.tick;
        j["round"] = ev.round;
        if (ev.kind == NodeEvent::Kind::ModeTransition) {
            j["from"] = mode_name(ev.from);
            j["to"] = mode_name(ev.to);
        } else if (ev.kind != NodeEvent::Kind::NoPeersForModel) {
            j["peer"] = ev.peer.hex();
        }
        if (ev.kind == NodeEvent::Kind::ModelAdopted) j["msg"] = "model adopted from " + ev.peer.hex();
        emit(j);
    };

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    const auto t0 = std::chrono::steady_clock::now();
    auto now = [&] {
        return static_cast<Tick>(
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count());
    };

    ordered_json hello;
    hello["event"] = "listening";
    hello["node"] = self;
    hello["address"] = opt.address;
    hello["namespace"] = cfg.ns;
    hello["mode"] = mode_name(cfg.node.mode);
    emit(hello);

    node.start(now());
    std::optional<Tick> done_at;
    while (!g_stop) {
        for (const auto& frame : transport.receive(std::chrono::milliseconds(10))) node.handle_frame(frame, now());
        if (auto r = node.poll(now())) {
            ordered_json j;
            j["event"] = "round";
            j["node"] = self;
            j["tick"] = r->tick;
            j["round"] = r->round;
            j["mode"] = mode_name(r->mode);
            j["loss"] = std::isfinite(r->loss) ? ordered_json(r->loss) : ordered_json(nullptr);
            j["sent_to"] = r->sent_to.size();
            j["aggregated_from"] = r->aggregated_from.size();
            j["digest"] = r->digest;
            emit(j);
        }
        if (node.done() && !done_at) done_at = now();
        if (done_at && fl.linger_ms >= 0 && now() - *done_at >= fl.linger_ms) break;
    }
    node.stop(now());
    const auto& c = node.counters();
    ordered_json bye;
    bye["event"] = "stopped";
    bye["node"] = self;
    bye["rounds"] = node.completed_rounds();
    bye["frames_sent"] = c.frames_sent;
    bye["frames_received"] = c.frames_received;
    bye["malformed_frames"] = c.malformed_frames;
    bye["bad_streams"] = transport.bad_streams();
    emit(bye);
    transport.close();
    return kOk;
}

// ---- scenario run -------------------------------------------------------------

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + path.string());
    body(out);
    out.flush();
    if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

int scenario_run(const std::string& path, const std::string& out_dir) {
    const sim::ScenarioSpec spec = sim::load_scenario(path);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(Errc::Io, "cannot create " + out_dir + ": " + ec.message());
    // Fail before a long run rather than after it.
    write_file(fs::path(out_dir) / "summary.json", [](std::ostream&) {});

    sim::Simulation s(spec);
    const auto& log = s.run();

    std::vector<ParameterSet> finals;
    double loss_sum = 0.0;
    std::size_t alive = 0;
    for (const auto& name : s.node_names()) {
        if (!s.alive(name)) continue;
        ++alive;
        const auto& p = s.node(name)->params();
        if (!p) continue;
        finals.push_back(*p);
        loss_sum += refmodel::mse_loss(*p, s.dataset());
    }

    const fs::path dir(out_dir);
    write_file(dir / "metrics.csv", [&](std::ostream& os) { log.write_csv(os); });
    write_file(dir / "metrics.jsonl", [&](std::ostream& os) { log.write_jsonl(os); });
    write_file(dir / "ticks.jsonl", [&](std::ostream& os) { log.write_ticks_jsonl(os); });
    write_file(dir / "events.jsonl", [&](std::ostream& os) { log.write_events_jsonl(os); });

    ordered_json sum;
    sum["scenario"] = fs::path(path).filename().string();
    sum["ticks"] = s.now();
    sum["alive_nodes"] = alive;
    sum["ready_nodes"] = finals.size();
    sum["final_consensus_distance"] = finals.empty() ? ordered_json(nullptr) : ordered_json(sim::consensus_distance(finals));
    sum["final_mean_loss"] = finals.empty() ? ordered_json(nullptr) : ordered_json(loss_sum / static_cast<double>(finals.size()));
    sum["frames_sent"] = s.counters().sent;
    sum["frames_dropped"] = s.counters().dropped;
    sum["frames_delivered"] = s.counters().delivered;
    sum["hash"] = log.hash();
    write_file(dir / "summary.json", [&](std::ostream& os) { os << sum.dump(2) << '\n'; });
    emit(sum);
    return kOk;
}

// ---- topology show ------------------------------------------------------------

int topology_show(const std::string& path, const std::string& format) {
    const sim::ScenarioSpec spec = sim::load_scenario(path);
    const Topology t = sim::build_topology(spec);
    std::map<NodeId, std::string> names;
    std::map<NodeId, std::size_t> order;
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        const NodeId id = NodeId::derive(spec.nodes[i].name, spec.seed);
        names[id] = spec.nodes[i].name;
        order[id] = i;
    }
    if (format == "dot") {
        std::cout << to_dot(t, names);
        return kOk;
    }
    for (const auto& n : spec.nodes) {
        ordered_json j;
        j["node"] = n.name;
        j["id"] = NodeId::derive(n.name, spec.seed).hex();
        emit(j);
    }
    std::vector<std::tuple<std::size_t, std::size_t, SharingMode>> edges;
    for (const auto& [key, mode] : t.edges()) edges.emplace_back(order.at(key.first), order.at(key.second), mode);
    std::sort(edges.begin(), edges.end());
    for (const auto& [from, to, mode] : edges) {
        ordered_json j;
        j["from"] = spec.nodes[from].name;
        j["to"] = spec.nodes[to].name;
        j["mode"] = mode_name(mode);
        emit(j);
    }
    return kOk;
}

// ---- conformance --------------------------------------------------------------

int conformance_generate(const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(Errc::Io, "cannot create " + out_dir + ": " + ec.message());
    for (const auto& [stem, vectors] : conformance::standard_vectors()) {
        for (const auto& v : vectors)
            if (auto why = conformance::check(v)) throw Error(Errc::ValidationError, v.name + ": " + *why);
        write_file(fs::path(out_dir) / (stem + ".jsonl"), [&](std::ostream& os) {
            for (const auto& v : vectors) os << conformance::to_line(v) << '\n';
        });
        ordered_json j;
        j["file"] = stem + ".jsonl";
        j["vectors"] = vectors.size();
        emit(j);
    }
    return kOk;
}

int conformance_check(const std::vector<std::string>& files) {
    std::size_t passed = 0, failed = 0;
    for (const auto& file : files) {
        std::istringstream in(read_file(file));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto v = conformance::from_line(line);
            const auto why = conformance::check(v);
            ordered_json j;
            j["file"] = fs::path(file).filename().string();
            j["name"] = v.name;
            j["pass"] = !why;
            if (why) j["reason"] = *why;
            emit(j);
            ++(why ? failed : passed);
        }
    }
    std::cerr << passed << " passed, " << failed << " failed\n";
    return failed == 0 ? kOk : kConfig;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"meshfed: decentralized federated learning nodes and simulator"};
    app.require_subcommand(1);

    NodeFlags nf;
    auto* node = app.add_subcommand("node", "Run a real node");
    node->require_subcommand(1);
    auto* node_run_cmd = node->add_subcommand("run", "Join a namespace over TCP and train until interrupted");
    node_run_cmd->add_option("--config", nf.config, "JSON node config");
    node_run_cmd->add_option("--namespace", nf.ns);
    node_run_cmd->add_option("--listen", nf.listen, "host:port, port 0 picks one");
    node_run_cmd->add_option("--bootstrap", nf.bootstrap, "peer host:port, repeatable");
    node_run_cmd->add_option("--id", nf.id, "32 hex digits");
    node_run_cmd->add_option("--mode", nf.mode, "seed|leech|peer|block");
    node_run_cmd->add_option("--aggregation", nf.aggregation, "fedavg|mean");
    node_run_cmd->add_option("--rounds", nf.rounds, "stop training after this many rounds");
    node_run_cmd->add_option("--promote-threshold", nf.promote_threshold);
    node_run_cmd->add_flag("--privacy-exclusion", nf.privacy_exclusion);
    node_run_cmd->add_option("--noise-sigma", nf.noise_sigma);
    node_run_cmd->add_option("--pool-min-inbound", nf.pool_min_inbound);
    node_run_cmd->add_option("--pool-timeout", nf.pool_timeout, "ms");
    node_run_cmd->add_option("--heartbeat", nf.heartbeat, "ms");
    node_run_cmd->add_flag("--no-initial-params", nf.no_initial_params, "ask peers for the model");
    node_run_cmd->add_option("--arrival-initial", nf.arrival_initial);
    node_run_cmd->add_option("--arrival-per-round", nf.arrival_per_round);
    node_run_cmd->add_option("--seed", nf.seed, "dataset and init seed");
    node_run_cmd->add_option("--shards", nf.shards);
    node_run_cmd->add_option("--shard", nf.shard);
    node_run_cmd->add_option("--model", nf.model, "linear|mlp");
    node_run_cmd->add_option("--learning-rate", nf.learning_rate);
    node_run_cmd->add_option("--local-epochs", nf.local_epochs);
    node_run_cmd->add_option("--linger-ms", nf.linger_ms, "exit this long after the last round; default waits for a signal");

    std::string scn_path, out_dir = "out";
    auto* scenario = app.add_subcommand("scenario", "Simulated runs");
    scenario->require_subcommand(1);
    auto* scenario_run_cmd = scenario->add_subcommand("run", "Run a scenario and export metrics");
    scenario_run_cmd->add_option("path", scn_path)->required();
    scenario_run_cmd->add_option("--out", out_dir, "output directory");

    std::string topo_path, format = "jsonl";
    auto* topology = app.add_subcommand("topology", "Compute graphs");
    topology->require_subcommand(1);
    auto* topology_show_cmd = topology->add_subcommand("show", "Print a scenario's nodes and directed edges");
    topology_show_cmd->add_option("path", topo_path)->required();
    topology_show_cmd->add_option("--format", format)->check(CLI::IsMember({"jsonl", "dot"}));

    std::string vec_dir = "conformance/vectors";
    std::vector<std::string> vec_files;
    auto* conf = app.add_subcommand("conformance", "Codec fixtures");
    conf->require_subcommand(1);
    auto* conf_gen = conf->add_subcommand("generate", "Write the standard vector files");
    conf_gen->add_option("--out", vec_dir);
    auto* conf_check = conf->add_subcommand("check", "Check vector files against this codec");
    conf_check->add_option("files", vec_files)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*node_run_cmd) return node_run(nf);
        if (*scenario_run_cmd) return scenario_run(scn_path, out_dir);
        if (*topology_show_cmd) return topology_show(topo_path, format);
        if (*conf_gen) return conformance_generate(vec_dir);
        if (*conf_check) return conformance_check(vec_files);
    } catch (const Error& e) {
        return fail(e);
    } catch (const std::exception& e) {
        std::cerr << "meshfed: " << e.what() << '\n';
        return kConfig;
    }
    return kOk;
}
