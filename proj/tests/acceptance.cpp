// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Scenario files come from the repo's scenarios/ directory; tolerances are
// fixed here and never read from the scenarios.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "meshfed/refmodel.hpp"
#include "meshfed/scenario.hpp"
#include "meshfed/sim.hpp"
#include "meshfed/wire.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using namespace meshfed;
using namespace meshfed::sim;

#ifndef MESHFED_SCENARIO_DIR
#define MESHFED_SCENARIO_DIR "scenarios"
#endif

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

ScenarioSpec scenario(const std::string& name) {
    return load_scenario(std::string(MESHFED_SCENARIO_DIR) + "/" + name + ".scn.json");
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<double> flatten(const ParameterSet& ps) {
    std::vector<double> out;
    for (const auto& [n, t] : ps) out.insert(out.end(), t.values().begin(), t.values().end());
    return out;
}

// ---- codec ----------------------------------------------------------------

Outcome codec_soundness() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240601);
    std::size_t roundtrip_failures = 0;
    const std::size_t kMessages = 100000;
    std::vector<wire::Bytes> corpus;
    for (std::size_t i = 0; i < kMessages; ++i) {
        const wire::Message m = testutil::random_message(rng);
        try {
            const wire::Bytes b = wire::encode_message(m);
            const wire::Message back = wire::decode_message(b);
            if (!(back == m) || wire::encode_message(back) != b) ++roundtrip_failures;
            if (corpus.size() < 2000) corpus.push_back(b);
        } catch (const std::exception&) {
            ++roundtrip_failures;
        }
    }

    const std::size_t kFuzz = 1000000;
    std::size_t untyped = 0, decoded = 0;
    std::uniform_int_distribution<int> byte(0, 255);
    for (std::size_t i = 0; i < kFuzz; ++i) {
        wire::Bytes buf;
        switch (i % 4) {
            case 0: {  // pure noise
                buf.resize(rng() % 96);
                for (auto& c : buf) c = static_cast<std::uint8_t>(byte(rng));
                break;
            }
            case 1: {  // valid frame, a few bit flips
                buf = corpus[rng() % corpus.size()];
                if (buf.empty()) break;
                for (int k = 0, n = 1 + static_cast<int>(rng() % 4); k < n; ++k)
                    buf[rng() % buf.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
                break;
            }
            case 2: {  // valid frame, truncated or extended
                buf = corpus[rng() % corpus.size()];
                if (rng() % 2) {
                    buf.resize(rng() % (buf.size() + 1));
                } else {
                    for (int k = 0, n = 1 + static_cast<int>(rng() % 8); k < n; ++k)
                        buf.push_back(static_cast<std::uint8_t>(byte(rng)));
                }
                break;
            }
            default: {  // valid header, random payload
                buf = corpus[rng() % corpus.size()];
                const std::size_t keep = std::min<std::size_t>(buf.size(), 6 + rng() % 24);
                buf.resize(keep);
                for (std::size_t k = 0, n = rng() % 64; k < n; ++k) buf.push_back(static_cast<std::uint8_t>(byte(rng)));
                break;
            }
        }
        try {
            wire::decode_message(buf);
            ++decoded;
        } catch (const Error&) {
        } catch (...) {
            ++untyped;
        }
    }
    const double secs = seconds_since(t0);
    const bool pass = roundtrip_failures == 0 && untyped == 0 && secs < 120.0;
    return {pass, fmt("%zu roundtrips, %zu failures; %zu fuzz buffers, %zu untyped errors (%zu decoded); %.1fs < 120s",
                      kMessages, roundtrip_failures, kFuzz, untyped, decoded, secs)};
}

// ---- federated vs centralized ---------------------------------------------

Outcome fedavg_matches_least_squares() {
    const auto t0 = Clock::now();
    ScenarioSpec spec = scenario("fedavg_ols");
    Simulation s(spec);
    s.run();
    const auto& ds = s.dataset();
    const auto ols = oracle::least_squares_with_bias(ds.x, ds.y, ds.d);
    double worst = 0.0;
    std::size_t finished = 0;
    for (const auto& name : s.node_names()) {
        const Node* n = s.node(name);
        if (n->completed_rounds() == spec.rounds) ++finished;
        const auto got = flatten(*n->params());
        double sq = 0.0;
        for (std::size_t i = 0; i < got.size(); ++i) sq += (got[i] - ols[i]) * (got[i] - ols[i]);
        worst = std::max(worst, std::sqrt(sq));
    }
    const double secs = seconds_since(t0);
    const bool pass = worst < 0.05 && finished == spec.nodes.size() && secs < 30.0;
    return {pass, fmt("8 nodes, %zu finished %llu rounds; max l2 to normal-equations solution %.3g < 0.05; %.1fs < 30s",
                      finished, static_cast<unsigned long long>(spec.rounds), worst, secs)};
}

// ---- gossip consensus -----------------------------------------------------

Outcome gossip_consensus() {
    const auto t0 = Clock::now();
    bool pass = true;
    std::string detail;
    for (const char* kind : {"complete", "grid", "star", "neighborhood"}) {
        ScenarioSpec spec = scenario(std::string("gossip_") + kind);
        Simulation s(spec);
        std::vector<double> per_round;  // index r: distance once every node completed round r
        std::uint64_t seen = 0;
        while (!s.finished()) {
            s.step();
            std::uint64_t low = UINT64_MAX;
            std::vector<ParameterSet> params;
            for (const auto& name : s.node_names()) {
                low = std::min(low, s.node(name)->completed_rounds());
                params.push_back(*s.node(name)->params());
            }
            if (low > seen) {
                seen = low;
                per_round.push_back(consensus_distance(params));
            }
        }
        // Float noise near convergence can lift the distance by ~1e-16.
        const double slack = 1e-12;
        bool monotone = true;
        for (std::size_t r = 1; r < per_round.size(); ++r)
            if (per_round[r] > per_round[r - 1] + slack) monotone = false;
        std::size_t below_at = 0;
        for (std::size_t r = 0; r < per_round.size(); ++r)
            if (per_round[r] < 1e-6) {
                below_at = r + 1;
                break;
            }
        const bool ok = monotone && below_at != 0 && below_at <= 200 && per_round.size() >= below_at;
        pass = pass && ok;
        detail += fmt("%s: %s, <1e-6 at round %zu, start %.3g; ", kind, monotone ? "monotone" : "NOT monotone",
                      below_at, per_round.empty() ? 0.0 : per_round.front());
    }
    const double secs = seconds_since(t0);
    pass = pass && secs < 60.0;
    return {pass, detail + fmt("%.1fs < 60s", secs)};
}

// ---- churn ----------------------------------------------------------------

struct ChurnRun {
    std::map<std::string, std::uint64_t> rounds;  // alive nodes at the end
    double mean_loss = 0.0;
    Tick worst_expulsion = 0;
    std::size_t missed_expulsions = 0;
    std::map<std::string, std::vector<ParameterSet>> trajectory;
    std::vector<CapturedFrame> capture;
    std::vector<EventRow> events;
    std::string hash;
};

/// Full-dataset loss averaged over the nodes alive at the end.
ChurnRun run_churn(ScenarioSpec spec) {
    ChurnRun out;
    Simulation s(spec);
    s.on_round = [&](const std::string& name, const RoundReport&, const ParameterSet& ps) {
        out.trajectory[name].push_back(ps);
    };
    std::map<std::string, Tick> killed_at;
    std::map<std::string, std::set<std::string>> still_listed;  // victim -> peers that still list it
    while (!s.finished()) {
        s.step();
        const Tick now = s.now() - 1;
        for (const auto& name : s.node_names()) {
            if (!s.alive(name) && !killed_at.count(name)) {
                killed_at[name] = now;
                for (const auto& other : s.node_names())
                    if (other != name && s.alive(other)) still_listed[name].insert(other);
            }
        }
        for (auto& [victim, listers] : still_listed) {
            if (s.alive(victim)) continue;
            const NodeId vid = NodeId::derive(victim, spec.seed);
            for (auto it = listers.begin(); it != listers.end();) {
                if (!s.alive(*it) || !s.node(*it)->peers().contains(vid)) {
                    out.worst_expulsion = std::max(out.worst_expulsion, now - killed_at[victim]);
                    it = listers.erase(it);
                } else {
                    ++it;
                }
            }
        }
    }
    for (const auto& [victim, listers] : still_listed) out.missed_expulsions += listers.size();

    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& name : s.node_names()) {
        if (!s.alive(name)) continue;
        out.rounds[name] = s.node(name)->completed_rounds();
        sum += refmodel::mse_loss(*s.node(name)->params(), s.dataset());
        ++n;
    }
    out.mean_loss = n ? sum / static_cast<double>(n) : NAN;
    out.capture = s.capture();
    out.events = s.log().events;
    out.hash = s.log().hash();
    return out;
}

Outcome churn_resilience(const ChurnRun& lossy, const ChurnRun& clean, const ScenarioSpec& spec) {
    std::size_t complete = 0;
    for (const auto& [name, r] : lossy.rounds) complete += r == spec.rounds;
    const Tick bound = 4 * spec.sim.heartbeat_interval;
    const bool pass = complete == lossy.rounds.size() && lossy.rounds.size() == 7 &&
                      lossy.mean_loss <= 2.0 * clean.mean_loss && lossy.missed_expulsions == 0 &&
                      lossy.worst_expulsion <= bound;
    return {pass, fmt("%zu/%zu surviving nodes finished %llu rounds; final mean loss %.4g vs zero-drop %.4g "
                      "(ratio %.3f <= 2); slowest expulsion %lld ticks <= %lld, %zu never expelled",
                      complete, lossy.rounds.size(), static_cast<unsigned long long>(spec.rounds), lossy.mean_loss,
                      clean.mean_loss, lossy.mean_loss / clean.mean_loss, static_cast<long long>(lossy.worst_expulsion),
                      static_cast<long long>(bound), lossy.missed_expulsions)};
}

Outcome role_invariants(const ChurnRun& run, const ScenarioSpec& spec) {
    std::size_t leech_weights = 0, block_weights = 0;
    for (const auto& f : run.capture) {
        if (f.kind != wire::Kind::Weights) continue;
        if (f.from == "n1") ++leech_weights;
        if (f.from == "n2" || f.to == "n2") ++block_weights;
    }
    std::size_t transitions = 0;
    for (const auto& e : run.events)
        if (e.kind == "mode_transition" && (e.node == "n0" || e.node == "n1" || e.node == "n2")) ++transitions;

    ScenarioSpec offline = spec;
    for (auto& n : offline.nodes)
        if (n.name == "n0") n.isolated = true;
    const ChurnRun alone = run_churn(offline);
    const auto& a = run.trajectory.at("n0");
    const auto& b = alone.trajectory.at("n0");
    bool identical = a.size() == b.size() && !a.empty();
    for (std::size_t i = 0; identical && i < a.size(); ++i) identical = a[i] == b[i];

    const bool pass = leech_weights == 0 && block_weights == 0 && identical && transitions == 0;
    return {pass, fmt("leech n1 sent %zu WEIGHTS; block n2 exchanged %zu WEIGHTS; seed n0 trajectory %s isolated "
                      "rerun over %zu rounds; %zu role changes",
                      leech_weights, block_weights, identical ? "bit-identical to" : "DIFFERS from", a.size(),
                      transitions)};
}

// ---- leech join -----------------------------------------------------------

Outcome leech_join_flow() {
    ScenarioSpec spec = scenario("leech_join");
    Simulation s(spec);
    s.run();
    const Node* joiner = s.node("newcomer");
    if (joiner == nullptr) return {false, "newcomer never joined"};
    const Node* reference = s.node("n0");
    const bool adopted = joiner->ready() && spec_of(*joiner->params()) == spec_of(*reference->params());
    std::string adopted_from;
    std::vector<EventRow> transitions;
    for (const auto& e : s.log().events) {
        if (e.node != "newcomer") continue;
        if (e.kind == "model_adopted") adopted_from = e.peer;
        if (e.kind == "mode_transition") transitions.push_back(e);
    }
    const bool once = transitions.size() == 1 && transitions[0].from == "leech" && transitions[0].to == "peer";
    std::size_t sent_after = 0;
    for (const auto& f : s.capture()) sent_after += f.from == "newcomer" && f.kind == wire::Kind::Weights;
    const bool pass = adopted && !adopted_from.empty() && once && sent_after > 0;
    return {pass, fmt("adopted conforming model from %s: %s; leech->peer transitions: %zu (round %llu); "
                      "WEIGHTS sent afterwards: %zu",
                      adopted_from.empty() ? "nobody" : adopted_from.c_str(), adopted ? "yes" : "no",
                      transitions.size(),
                      static_cast<unsigned long long>(transitions.empty() ? 0 : transitions[0].round), sent_after)};
}

// ---- determinism ----------------------------------------------------------

Outcome determinism() {
    bool pass = true;
    std::string detail;
    for (const char* name : {"complete4_iid", "churn8", "leech_join", "star_mlp_skew"}) {
        const ScenarioSpec spec = scenario(name);
        std::set<std::string> hashes;
        for (int i = 0; i < 3; ++i) hashes.insert(run_scenario(spec).hash());
        pass = pass && hashes.size() == 1;
        detail += fmt("%s %s; ", name, hashes.size() == 1 ? hashes.begin()->c_str() : "MISMATCH");
    }
    return {pass, detail + "3 runs each"};
}

// ---- gradients ------------------------------------------------------------

Outcome gradient_oracle() {
    double worst_linear = 0.0, worst_mlp = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto ds = refmodel::gen_dataset(1000 + seed, 32, 5, 0.2);
        for (auto kind : {refmodel::ModelKind::Linear, refmodel::ModelKind::Mlp}) {
            const refmodel::ModelShape shape{kind, ds.d, 8, DType::F64};
            const ParameterSet params = refmodel::init_params(shape, seed);
            const auto analytic = flatten(refmodel::gradient(params, ds));
            const auto f = [&](const std::vector<double>& th) {
                return kind == refmodel::ModelKind::Linear ? oracle::linear_mse(th, ds.x, ds.y, ds.d)
                                                           : oracle::mlp_mse(th, ds.x, ds.y, ds.d, 8);
            };
            const auto numeric = oracle::central_difference(f, flatten(params), 1e-5);
            double& worst = kind == refmodel::ModelKind::Linear ? worst_linear : worst_mlp;
            for (std::size_t i = 0; i < numeric.size(); ++i) worst = std::max(worst, std::abs(numeric[i] - analytic[i]));
        }
    }
    const bool pass = worst_linear < 1e-4 && worst_mlp < 1e-4;
    return {pass, fmt("20 seeds, step 1e-5: max abs diff linear %.2e, mlp %.2e (< 1e-4)", worst_linear, worst_mlp)};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](const char* name, const std::function<Outcome()>& fn) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    };

    report("codec_soundness", codec_soundness);
    report("fedavg_matches_least_squares", fedavg_matches_least_squares);
    report("gossip_consensus", gossip_consensus);

    const ScenarioSpec churn = scenario("churn8");
    ScenarioSpec clean = churn;
    clean.sim.drop_prob = 0.0;
    std::optional<ChurnRun> lossy_run, clean_run;
    report("churn_resilience", [&] {
        lossy_run = run_churn(churn);
        clean_run = run_churn(clean);
        return churn_resilience(*lossy_run, *clean_run, churn);
    });
    report("role_invariants", [&] {
        if (!lossy_run) lossy_run = run_churn(churn);
        return role_invariants(*lossy_run, churn);
    });
    report("leech_join_flow", leech_join_flow);
    report("determinism", determinism);
    report("gradient_oracle", gradient_oracle);

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
