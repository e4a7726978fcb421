#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "dsdv_reference.hpp"
#include "hermes/nn.hpp"
#include "hermes/routing.hpp"
#include "support.hpp"

using namespace hermes;
using namespace hermes::testing;

namespace {

constexpr double kOracleTolerance = 1e-9;
constexpr double kRouteSecondsPerInstance = 10.0;
constexpr double kOracleSecondsTotal = 60.0;
constexpr double kMinForwardReduction = 0.20;
constexpr double kMinRoutingShare = 0.50;
constexpr int kRecoveryRuns = 100;
constexpr int kDirectionalSeeds = 10;

struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(std::string why) {
        if (pass) detail = std::move(why);
        pass = false;
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::uint64_t g_runs = 0;
std::uint64_t g_conservation_failures = 0;

bool conserved(Network& net, const Report& rep) {
    const auto tot = net.radio().totals();
    bool ok = tot.transmitted == tot.delivered + tot.dropped + tot.in_flight;
    std::uint64_t buckets = 0;
    for (auto b : rep.throughput.bytes) buckets += b;
    ok = ok && buckets == rep.throughput.total_bytes;
    std::uint64_t rx = 0;
    for (const auto& r : records_of(net, "rx", net.root_id())) {
        if (rep.throughput.window.contains(r.t)) rx += std::stoull(*detail_field(r.detail, "bytes"));
    }
    return ok && rx == rep.throughput.total_bytes;
}

struct Run {
    std::unique_ptr<Network> net;
    Report report;
};

Run run(const Scenario& sc) {
    Run r{std::make_unique<Network>(sc), {}};
    r.net->run();
    r.report = analyze(r.net->trace().records(), {});
    ++g_runs;
    if (!conserved(*r.net, r.report)) ++g_conservation_failures;
    return r;
}

std::string mac_for(std::size_t i) { return fmt::format("02:00:00:00:{:02x}:{:02x}", (i + 1) >> 8, (i + 1) & 0xff); }

std::vector<TimeMs> durations(const Report& rep) {
    std::vector<TimeMs> out;
    for (const auto& s : rep.timing.inference) out.push_back(s.duration());
    return out;
}

double mean(const std::vector<double>& v) { return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double mean_duration(const Report& rep) {
    std::vector<double> v;
    for (auto d : durations(rep)) v.push_back(static_cast<double>(d));
    return mean(v);
}

std::optional<TimeMs> entered(const Network& net, const std::string& node, const char* to, TimeMs since) {
    const std::string needle = std::string("to=") + to;
    for (const auto& r : records_of(net, "state", id_of(net, node))) {
        if (r.t >= since && r.detail.ends_with(needle)) return r.t;
    }
    return std::nullopt;
}

Scenario with_seed(Scenario sc, std::uint64_t seed, bool shuffle) {
    if (shuffle && sc.join_plan) sc.join_plan->shuffle = true;
    sc.set_seed(seed);
    if (sc.nn) sc.nn->config.seed = seed;
    return sc;
}

Outcome routing_convergence() {
    Outcome o;
    Rng rng(20241);
    double worst = 0.0;
    int instances = 0;
    std::vector<int> sizes{5, 50};
    for (int i = 0; i < 28; ++i) sizes.push_back(static_cast<int>(rng.uniform_int(5, 50)));
    for (int n : sizes) {
        std::string yaml = "seed: " + std::to_string(rng.uniform_int(1, 1000000)) + "\n";
        std::vector<int> children(static_cast<std::size_t>(n), 0);
        std::string vis = "visibility:\n";
        std::string nodes = "nodes:\n";
        std::string joins = "joins:\n";
        const TimeMs interval = 3000;
        for (int k = 0; k < n; ++k) {
            nodes += fmt::format("  - {{name: N{}, mac: \"{}\"{}}}\n", k, mac_for(static_cast<std::size_t>(k)),
                                 k == 0 ? ", root: true" : "");
            if (k == 0) continue;
            int parent = 0;
            do {
                parent = static_cast<int>(rng.uniform_int(0, k - 1));
            } while (children[static_cast<std::size_t>(parent)] >= 4);
            ++children[static_cast<std::size_t>(parent)];
            vis += fmt::format("  - [N{}, N{}]\n", parent, k);
            joins += fmt::format("  - {{node: N{}, at_ms: {}}}\n", k, 1000 + (k - 1) * interval);
        }
        const TimeMs joined = 1000 + (n - 1) * interval;
        const TimeMs fru_period = 60000 * 5;
        yaml += fmt::format("duration_ms: {}\n", joined + 30000 + 2 * fru_period);
        yaml += vis + nodes + joins;

        const auto t0 = Clock::now();
        Network net(scenario_from(yaml));
        net.run();
        const double secs = seconds_since(t0);
        worst = std::max(worst, secs);
        ++instances;
        if (net.tree().size() != static_cast<std::size_t>(n - 1)) {
            o.fail(fmt::format("{} nodes: only {} tree edges", n, net.tree().size()));
        }
        if (auto p = check_routes_match_tree(net)) o.fail(fmt::format("{} nodes: {}", n, *p));
        if (auto p = check_loop_free(net)) o.fail(fmt::format("{} nodes: {}", n, *p));
        if (secs >= kRouteSecondsPerInstance) o.fail(fmt::format("{} nodes took {:.2f} s", n, secs));
    }
    if (o.pass) o.detail = fmt::format("{} trees of 5-50 nodes, slowest {:.3f} s", instances, worst);
    return o;
}

RoutingTable table_with(std::optional<RouteEntry> stored, IpAddress self) {
    RoutingTable t(self);
    if (!stored) return t;
    if (stored->reachable()) {
        t.apply_advertisement(stored->next_hop, {stored->dest, static_cast<std::uint8_t>(stored->hops - 1), stored->seq});
    } else {
        t.apply_advertisement(stored->next_hop, {stored->dest, 1, stored->seq - 1});
        t.mark_neighbor_unreachable(stored->next_hop);
    }
    return t;
}

Outcome dsdv_rules() {
    Outcome o;
    const IpAddress self{10, 0, 0, 1};
    const IpAddress n1{10, 0, 1, 1};
    const IpAddress n2{10, 0, 2, 1};
    const IpAddress dest{10, 0, 9, 1};
    const std::uint8_t inf = kInfiniteHops;
    const std::vector<std::optional<RouteEntry>> stored_cases{
        std::nullopt, RouteEntry{dest, n1, 3, 8}, RouteEntry{dest, n1, 1, 8}, RouteEntry{dest, n1, inf, 9},
        RouteEntry{dest, n2, 2, 10}};
    int cases = 0;
    for (const auto& stored : stored_cases) {
        for (std::uint32_t seq = 5; seq <= 13; ++seq) {
            for (std::uint8_t hops : {std::uint8_t{0}, std::uint8_t{1}, std::uint8_t{2}, std::uint8_t{5}, inf}) {
                for (IpAddress sender : {n1, n2}) {
                    for (bool parent : {false, true}) {
                        auto t = table_with(stored, self);
                        const Advertisement adv{dest, hops, seq};
                        const auto got = t.apply_advertisement(sender, adv, parent);
                        const auto [want_entry, want_class] = reference_update(stored, sender, adv, parent);
                        const auto* e = t.find(dest);
                        const bool entry_ok = (e != nullptr) == want_entry.has_value() && (!e || *e == *want_entry);
                        const bool pending_ok = !is_significant(got) || t.pending_changes().contains(dest);
                        if (got != want_class || !entry_ok || !pending_ok) {
                            o.fail(fmt::format("seq={} hops={} sender={} parent={}", seq, hops, sender.to_string(),
                                               parent));
                        }
                        ++cases;
                    }
                }
            }
        }
    }

    Rng rng(77);
    RoutingTable t(self);
    const std::vector<IpAddress> neighbors{n1, n2, IpAddress{10, 0, 3, 1}};
    for (int i = 0; i < 50000 && o.pass; ++i) {
        const auto sender = neighbors[static_cast<std::size_t>(rng.uniform_int(0, 2))];
        if (rng.uniform01() < 0.05) {
            t.mark_neighbor_unreachable(sender);
        } else {
            const IpAddress d{10, 1, static_cast<std::uint8_t>(rng.uniform_int(0, 15)), 1};
            const auto seq = static_cast<std::uint32_t>(rng.uniform_int(0, 40));
            const auto h = seq % 2 == 1 ? inf : static_cast<std::uint8_t>(rng.uniform_int(0, 6));
            t.apply_advertisement(sender, {d, h, seq}, rng.uniform01() < 0.3);
        }
        if (rng.uniform01() < 0.02 && t.bump_own_seq() % 2 != 0) o.fail("own sequence number turned odd");
        for (const auto& [d, e] : t.entries()) {
            if ((e.seq % 2 == 1) != !e.reachable()) o.fail("parity broken for " + d.to_string());
        }
    }

    RoutingTable a(self);
    std::vector<IpAddress> via_n1;
    for (std::uint8_t k = 0; k < 12; ++k) {
        const IpAddress d{10, 2, k, 1};
        const auto via = k % 3 == 0 ? n2 : n1;
        a.apply_advertisement(via, {d, static_cast<std::uint8_t>(k % 4), 2u * (k + 1)});
        if (via == n1) via_n1.push_back(d);
    }
    a.apply_advertisement(n1, {n1, 0, 4});
    via_n1.push_back(n1);
    auto lost = a.mark_neighbor_unreachable(n1);
    std::sort(lost.begin(), lost.end());
    std::sort(via_n1.begin(), via_n1.end());
    if (lost != via_n1) o.fail("neighbor loss did not invalidate exactly the routes through it");
    for (const auto& [d, e] : a.entries()) {
        if (e.next_hop == n1 && (e.reachable() || e.seq % 2 == 0)) o.fail("route via lost neighbor still usable");
        if (e.next_hop == n2 && !e.reachable()) o.fail("unrelated route invalidated");
    }
    if (o.pass) o.detail = fmt::format("{} rule-table cases, parity and invalidation hold", cases);
    return o;
}

const char* kAltParent = R"(
duration_ms: 60000
link: {latency_jitter_ms: 0}
visibility: [[R, A], [R, X], [A, B], [X, B], [B, C]]
nodes:
  - {name: R, mac: "02:00:00:00:00:01", root: true}
  - {name: A, mac: "02:00:00:00:00:02"}
  - {name: B, mac: "02:00:00:00:00:03"}
  - {name: X, mac: "02:00:00:00:00:04"}
  - {name: C, mac: "02:00:00:00:00:05"}
joins: [{node: A, at_ms: 100}, {node: X, at_ms: 2000}, {node: B, at_ms: 4000}, {node: C, at_ms: 6000}]
faults:
  - {kind: kill, at_ms: 20000, node: A}
  - {kind: drop, category: lifecycle, type: 5}
)";

const char* kChain = R"(
duration_ms: 60000
link: {latency_jitter_ms: 0}
visibility: [[R, A], [A, B], [B, C], [C, D]]
nodes:
  - {name: R, mac: "02:00:00:00:00:01", root: true}
  - {name: A, mac: "02:00:00:00:00:02"}
  - {name: B, mac: "02:00:00:00:00:03"}
  - {name: C, mac: "02:00:00:00:00:04"}
  - {name: D, mac: "02:00:00:00:00:05"}
joins: [{node: A, at_ms: 100}, {node: B, at_ms: 2000}, {node: C, at_ms: 4000}, {node: D, at_ms: 6000}]
faults:
  - {kind: kill, at_ms: 20000, node: A}
  - {kind: link-up, at_ms: 40000, a: R, b: B}
)";

Outcome recovery() {
    Outcome o;
    const auto base = scenario_file("scenarios/testbed_topology.yaml");
    int stuck = 0;
    for (int s = 1; s <= kRecoveryRuns; ++s) {
        auto sc = with_seed(base, static_cast<std::uint64_t>(s), true);
        const auto& victim = sc.nodes[static_cast<std::size_t>(1 + (s - 1) % 4)].name;
        FaultSpec kill;
        kill.kind = FaultKind::Kill;
        kill.node = victim;
        kill.at = 30000 + (s * 7919) % 30000;
        sc.faults.push_back(kill);
        auto r = run(sc);
        const auto& net = *r.net;
        for (NodeId n = 0; n < net.size(); ++n) {
            const auto& node = net.node(n);
            if (!node.alive()) continue;
            if (node.state() != LifecycleState::Active || !net.depth_of(n)) {
                ++stuck;
                o.fail(fmt::format("seed {} kill {}: {} ends in {}", s, victim, node.name(), to_string(node.state())));
            }
        }
    }

    Network chain(scenario_from(kChain));
    chain.run();
    const auto b = entered(chain, "B", "Active", 40000);
    const auto c = entered(chain, "C", "Active", 40000);
    const auto d = entered(chain, "D", "Active", 40000);
    if (!b || !c || !d || !(*b < *c && *c < *d)) o.fail("chain subtree did not reintegrate layer by layer");
    if (check_routes_match_tree(chain)) o.fail("chain routes disagree with the tree after reintegration");

    Network tba(scenario_from(kAltParent));
    tba.run();
    const auto await = entered(tba, "C", "RecoveryAwait", 20000);
    if (count_of(tba, "drop") == 0) o.fail("no TBA was dropped");
    if (!await) o.fail("with TBAs dropped the descendant was not suspended");
    if (tba.node(id_of(tba, "C")).state() != LifecycleState::Active) o.fail("descendant did not come back");

    if (o.pass) o.detail = fmt::format("{} kill runs, 0 stuck; layer-by-layer and lost-TBA cases hold", kRecoveryRuns);
    return o;
}

Outcome assignment() {
    Outcome o;
    const auto r = run(scenario_file("scenarios/testbed_topology.yaml"));
    const auto& net = *r.net;
    const auto* app = net.node(net.root_id()).app();
    if (app == nullptr) {
        o.fail("root has no application");
        return o;
    }
    const auto& plan = app->plan();
    const auto counts = plan.counts();
    const std::vector<std::pair<std::string, int>> want{{"E1", 1}, {"E2", 1}, {"E3", 1}, {"Pi", 5}, {"R", 2}};
    for (const auto& [name, n] : want) {
        const auto it = counts.find(ip_of(net, name));
        const int got = it == counts.end() ? 0 : it->second;
        if (got != n) o.fail(fmt::format("{} holds {} neurons, expected {}", name, got, n));
    }
    const auto pi = ip_of(net, "Pi");
    if (plan.devices_in_layer(2) != std::vector<IpAddress>{pi}) o.fail("second hidden layer is not entirely on Pi");
    if (plan.neurons_of(pi).front() != NeuronId{1, 3}) o.fail("Pi's extra neuron is not the last of layer 1");
    std::vector<IpAddress> sequence;
    for (const auto& id : net.scenario().nn->model->compute_neurons()) sequence.push_back(plan.owner.at(id));
    std::set<IpAddress> closed;
    for (std::size_t i = 0; i < sequence.size(); ++i) {
        if (closed.contains(sequence[i])) o.fail("a device's neurons are not contiguous");
        if (i + 1 < sequence.size() && sequence[i + 1] != sequence[i]) closed.insert(sequence[i]);
    }
    if (o.pass) o.detail = "E1=1 E2=1 E3=1 Pi=5 (layer 2 plus one) R=2, contiguous";
    return o;
}

Scenario oracle_case(const Scenario& base, const std::vector<int>& sizes, Activation act, std::uint64_t seed) {
    auto sc = base;
    sc.nn->model = std::make_shared<const ModelSpec>(random_model(sizes, act, seed));
    sc.nn->model_source = "random:" + std::to_string(seed);
    sc.nn->config.seed = seed;
    sc.nodes[1].inputs.clear();
    sc.nodes[2].inputs.clear();
    for (int i = 0; i < sizes.front(); ++i) sc.nodes[static_cast<std::size_t>(1 + i % 2)].inputs.push_back(i);
    for (std::size_t k : {1u, 2u}) {
        if (sc.nodes[k].inputs.empty()) sc.nodes[k].roles &= static_cast<std::uint8_t>(~nn_role::kInputGenerator);
        else sc.nodes[k].roles |= nn_role::kInputGenerator;
    }
    sc.probes.clear();
    return sc;
}

Outcome inference_oracle() {
    Outcome o;
    const std::vector<Scenario> bases{scenario_file("scenarios/testbed_pubsub.yaml"),
                                      scenario_file("scenarios/testbed_topology.yaml"),
                                      scenario_file("scenarios/testbed_inject.yaml")};
    const Activation acts[] = {Activation::Sigmoid, Activation::Tanh, Activation::Relu, Activation::Identity};
    Rng rng(5150);
    const auto t0 = Clock::now();
    int cycles = 0;
    std::uint64_t nacks = 0;
    double worst = 0.0;
    for (int m = 0; m < 100; ++m) {
        const int layers = static_cast<int>(rng.uniform_int(2, 4));
        std::vector<int> sizes;
        for (int l = 0; l < layers; ++l) sizes.push_back(static_cast<int>(rng.uniform_int(1, 8)));
        const auto act = acts[rng.uniform_int(0, 3)];
        const auto seed = static_cast<std::uint64_t>(rng.uniform_int(1, 1 << 30));
        for (const auto& base : bases) {
            const auto r = run(oracle_case(base, sizes, act, seed));
            const auto& rep = r.report;
            nacks += rep.nacks;
            if (rep.timing.inference.size() != static_cast<std::size_t>(base.nn->config.cycles)) {
                o.fail(fmt::format("model {} under {}: {} of {} cycles", m, to_string(base.strategy),
                                   rep.timing.inference.size(), base.nn->config.cycles));
            }
            for (const auto& s : rep.timing.inference) {
                ++cycles;
                worst = std::max(worst, s.max_error);
                if (s.verdict != Verdict::Match || s.max_error > kOracleTolerance) {
                    o.fail(fmt::format("model {} under {}: cycle {} {} error {:g}", m, to_string(base.strategy), s.id,
                                       to_string(s.verdict), s.max_error));
                }
            }
        }
    }
    const double secs = seconds_since(t0);
    if (nacks != 0) o.fail(fmt::format("{} NACKs observed", nacks));
    if (secs >= kOracleSecondsTotal) o.fail(fmt::format("took {:.1f} s", secs));
    if (o.pass) o.detail = fmt::format("300 runs, {} cycles, max error {:g}, 0 NACKs, {:.2f} s", cycles, worst, secs);
    return o;
}

const char* kStar = R"(
seed: 4
duration_ms: 150000
strategy: none
link: {latency_jitter_ms: 5}
visibility: [[R, E1], [R, E2], [R, E3], [R, Pi]]
nodes:
  - {name: R,  mac: "02:00:00:00:00:01", kind: class-8266, root: true, roles: [coordinator, output-worker]}
  - {name: E1, mac: "02:00:00:00:00:11", roles: [hidden-worker, input-generator], quota: 1, inputs: [0]}
  - {name: E2, mac: "02:00:00:00:00:12", roles: [hidden-worker, input-generator], quota: 1, inputs: [1]}
  - {name: E3, mac: "02:00:00:00:00:13", roles: [hidden-worker], quota: 1}
  - {name: Pi, mac: "02:00:00:00:00:21", kind: class-pi, roles: [hidden-worker], quota: 5}
joins: {start_ms: 1000, interval_ms: 3000, order: [E1, E2, E3, Pi]}
nn:
  model: testbed_2442.txt
  cycles: 10
  period_ms: 2000
  required_hidden: 4
  required_output: 1
)";

std::vector<double> forward_pinned(const ModelSpec& m, std::vector<double> in, NeuronId pinned, double value) {
    std::vector<double> prev = std::move(in);
    for (int l = 1; l < m.layer_count(); ++l) {
        std::vector<double> next;
        for (int i = 0; i < m.layer_sizes()[static_cast<std::size_t>(l)]; ++i) {
            const NeuronId id{static_cast<std::uint8_t>(l), static_cast<std::uint16_t>(i)};
            if (id == pinned) {
                next.push_back(value);
                continue;
            }
            const auto& p = m.neuron(id);
            double s = p.bias;
            for (std::size_t k = 0; k < p.weights.size(); ++k) s += p.weights[k] * prev[k];
            next.push_back(activate(m.activation(l), s));
        }
        prev = std::move(next);
    }
    return prev;
}

Outcome fault_semantics() {
    Outcome o;
    auto drop_one = scenario_from(std::string(kStar) + "faults: [{kind: drop, category: data, type: 1, from: E3, count: 1}]\n");
    const auto a = run(drop_one);
    if (a.report.nacks < 1 || a.report.resends < 1) o.fail("the dropped value was not NACKed and re-sent");
    if (a.report.fallbacks != 0) o.fail("fallback used although the producer was alive");
    for (const auto& s : a.report.timing.inference) {
        if (s.verdict != Verdict::Match) o.fail(fmt::format("cycle {} is {}", s.id, to_string(s.verdict)));
    }

    const auto probe = run(scenario_from(kStar));
    const auto starts = records_of(*probe.net, "nn-start");
    if (starts.size() < 3) {
        o.fail("too few cycles to place the kill");
        return o;
    }
    auto dead = scenario_from(kStar);
    FaultSpec kill;
    kill.kind = FaultKind::Kill;
    kill.node = "E3";
    kill.at = starts[2].t - 1;
    dead.faults.push_back(kill);
    const auto b = run(dead);
    const auto& net = *b.net;
    const auto& rep = b.report;
    if (rep.timing.inference.size() != 10) o.fail(fmt::format("{} of 10 cycles completed", rep.timing.inference.size()));
    const auto fb = records_of(net, "nn-fallback");
    if (fb.empty()) o.fail("no fallback was used for the dead producer");
    std::map<std::uint32_t, double> cached;
    for (const auto& r : fb) {
        if (detail_field(r.detail, "cached") != "1") o.fail("fallback did not use the previous cycle's value");
        cached[static_cast<std::uint32_t>(std::stoul(*detail_field(r.detail, "id")))] =
            std::stod(*detail_field(r.detail, "value"));
    }
    std::map<std::uint32_t, std::vector<double>> inputs;
    for (const auto& r : records_of(net, "nn-input")) {
        auto& v = inputs[static_cast<std::uint32_t>(std::stoul(*detail_field(r.detail, "id")))];
        v.resize(2);
        v[static_cast<std::size_t>(std::stoi(*detail_field(r.detail, "index")))] = std::stod(*detail_field(r.detail, "value"));
    }
    const auto& model = *dead.nn->model;
    int degraded = 0;
    for (const auto& s : rep.timing.inference) {
        if (s.verdict == Verdict::Mismatch) o.fail(fmt::format("cycle {} mismatches", s.id));
        if (s.verdict != Verdict::Degraded) continue;
        ++degraded;
        const auto it = cached.find(s.id);
        if (it == cached.end()) continue;
        const auto want = forward_pinned(model, inputs.at(s.id), NeuronId{1, 2}, it->second);
        for (std::size_t i = 0; i < want.size(); ++i) {
            if (std::abs(s.outputs.at(i) - want[i]) > kOracleTolerance) o.fail("degraded output is not the pinned forward pass");
        }
    }
    if (degraded == 0) o.fail("no cycle ran degraded after the producer died");
    if (o.pass) {
        o.detail = fmt::format("drop: {} NACK, {} re-send, all Match; kill: {} fallbacks, {} degraded cycles completed",
                               a.report.nacks, a.report.resends, fb.size(), degraded);
    }
    return o;
}

Outcome forwarded_bytes() {
    Outcome o;
    const auto topo = scenario_file("scenarios/testbed_topology.yaml");
    const auto pub = scenario_file("scenarios/testbed_pubsub.yaml");
    std::vector<double> t, p;
    for (int s = 1; s <= kDirectionalSeeds; ++s) {
        const auto a = run(with_seed(topo, static_cast<std::uint64_t>(s), true));
        const auto b = run(with_seed(pub, static_cast<std::uint64_t>(s), true));
        t.push_back(static_cast<double>(a.report.throughput.neuron_output_forwarded));
        p.push_back(static_cast<double>(b.report.throughput.neuron_output_forwarded));
        if (t.back() > p.back()) o.fail(fmt::format("seed {}: topology {} > pubsub {}", s, t.back(), p.back()));
    }
    const double reduction = mean(p) > 0 ? 1.0 - mean(t) / mean(p) : 0.0;
    if (reduction < kMinForwardReduction) o.fail(fmt::format("mean reduction {:.1f}%", 100 * reduction));
    o.detail = fmt::format("mean forwarded neuron bytes topology {:.0f} vs pubsub {:.0f}, reduction {:.1f}%", mean(t),
                           mean(p), 100 * reduction) + (o.pass ? "" : "; " + o.detail);
    return o;
}

Outcome duration_ordering() {
    Outcome o;
    const std::vector<std::pair<std::string, Scenario>> cfgs{
        {"inject", scenario_file("scenarios/testbed_inject.yaml")},
        {"topology", scenario_file("scenarios/testbed_topology.yaml")},
        {"pubsub", scenario_file("scenarios/testbed_pubsub.yaml")}};
    std::vector<double> means;
    for (const auto& [name, base] : cfgs) {
        std::vector<double> per_seed;
        for (int s = 1; s <= kDirectionalSeeds; ++s) {
            per_seed.push_back(mean_duration(run(with_seed(base, static_cast<std::uint64_t>(s), true)).report));
        }
        means.push_back(mean(per_seed));
    }
    if (!(means[0] < means[1] && means[1] < means[2])) o.fail("ordering violated");
    o.detail = fmt::format("inject {:.1f} ms, topology {:.1f} ms, pubsub {:.1f} ms", means[0], means[1], means[2]);
    return o;
}

Outcome join_order_sensitivity() {
    Outcome o;
    const auto first = scenario_file("scenarios/testbed_topology_pi_first.yaml");
    const auto last = scenario_file("scenarios/testbed_topology_pi_last.yaml");
    std::vector<double> f, l;
    for (int s = 1; s <= kDirectionalSeeds; ++s) {
        f.push_back(mean_duration(run(with_seed(first, static_cast<std::uint64_t>(s), false)).report));
        l.push_back(mean_duration(run(with_seed(last, static_cast<std::uint64_t>(s), false)).report));
    }
    if (!(mean(f) < mean(l))) o.fail("early join is not faster");
    o.detail = fmt::format("Pi first {:.1f} ms, Pi last {:.1f} ms", mean(f), mean(l));
    return o;
}

Outcome throughput_accounting() {
    Outcome o;
    auto sc = scenario_file("scenarios/testbed_pubsub.yaml");
    sc.strategy = StrategyKind::None;
    sc.nn.reset();
    sc.probes.clear();
    for (auto& n : sc.nodes) {
        n.roles = 0;
        n.inputs.clear();
    }
    sc.routing_period = 60000;
    sc.duration = 600000;
    const auto r = run(sc);
    const auto& tp = r.report.throughput;
    const double share = tp.total_bytes ? static_cast<double>(tp.of(Bucket::Routing)) / tp.total_bytes : 0.0;
    if (tp.of(Bucket::Data) != 0 || tp.of(Bucket::Middleware) != 0) o.fail("data or middleware traffic present");
    if (share < kMinRoutingShare) o.fail(fmt::format("routing share {:.1f}%", 100 * share));
    if (g_conservation_failures != 0) o.fail(fmt::format("{} runs broke conservation", g_conservation_failures));
    o.detail = fmt::format("routing {:.3f} B/s of {:.3f} B/s ({:.1f}%), conservation held on {} of {} runs",
                           tp.rate(Bucket::Routing), tp.rate_of(tp.total_bytes), 100 * share,
                           g_runs - g_conservation_failures, g_runs) + (o.pass ? "" : "; " + o.detail);
    return o;
}

Outcome determinism() {
    Outcome o;
    int compared = 0;
    for (auto name : {"testbed_pubsub", "testbed_inject", "testbed_topology", "testbed_topology_pi_first",
                      "testbed_topology_pi_last"}) {
        for (double loss : {0.0, 0.05}) {
            auto sc = scenario_file(std::string("scenarios/") + name + ".yaml");
            sc.link.loss_probability = loss;
            const auto a = run(sc);
            const auto b = run(sc);
            ++compared;
            if (a.net->trace().to_text() != b.net->trace().to_text()) o.fail(std::string(name) + ": traces differ");
            if (to_records(a.report) != to_records(b.report) || to_text(a.report) != to_text(b.report)) {
                o.fail(std::string(name) + ": reports differ");
            }
        }
    }
    if (o.pass) o.detail = fmt::format("{} scenario pairs byte-identical", compared);
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"routing convergence and loop freedom", routing_convergence},
        {"DSDV update rules", dsdv_rules},
        {"recovery", recovery},
        {"neuron assignment", assignment},
        {"distributed inference oracle", inference_oracle},
        {"NACK and fallback", fault_semantics},
        {"forwarded neuron bytes", forwarded_bytes},
        {"inference duration ordering", duration_ordering},
        {"join order sensitivity", join_order_sensitivity},
        {"throughput accounting", throughput_accounting},
        {"determinism", determinism},
    };
    int failed = 0;
    int n = 0;
    for (const auto& [name, check] : criteria) {
        ++n;
        Outcome out;
        try {
            out = check();
        } catch (const std::exception& e) {
            out.fail(std::string("exception: ") + e.what());
        }
        if (!out.pass) ++failed;
        fmt::print("{} {} {}: {}\n", out.pass ? "PASS" : "FAIL", n, name, out.detail);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
