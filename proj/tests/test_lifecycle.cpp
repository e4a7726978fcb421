#include <algorithm>
#include <deque>
#include <string>

#include "doctest.h"
#include "hermes/lifecycle.hpp"
#include "support.hpp"

using namespace hermes;
using namespace hermes::testing;

namespace {

using S = LifecycleState;
using E = LifecycleEvent;
using A = LifecycleAction;

constexpr E kAllEvents[] = {E::Start,         E::CandidatesFound,    E::NoCandidates,     E::Connected,
                            E::CandidatesExhausted, E::JobStarted, E::JobFinished,      E::ParentLost,
                            E::Reattached,    E::RecoveryFailed,     E::RestartComplete,  E::TopologyBreakAlert,
                            E::TopologyRestored, E::ParentReset,     E::RootUnreachable,  E::RootReachable};

constexpr S kAllStates[] = {S::Init,   S::Search,         S::JoinNetwork,   S::Active,
                            S::ExecuteJob, S::ParentRecovery, S::RecoveryAwait, S::NodeRestart};

bool has(const Transition& t, A a) { return std::find(t.actions.begin(), t.actions.end(), a) != t.actions.end(); }

const char* kAltParent = R"(
duration_ms: 40000
link: {latency_jitter_ms: 0}
visibility: [[R, A], [R, X], [A, B], [X, B], [B, C]]
nodes:
  - {name: R, mac: "02:00:00:00:00:01", root: true}
  - {name: A, mac: "02:00:00:00:00:02"}
  - {name: B, mac: "02:00:00:00:00:03"}
  - {name: X, mac: "02:00:00:00:00:04"}
  - {name: C, mac: "02:00:00:00:00:05"}
joins: [{node: A, at_ms: 100}, {node: X, at_ms: 2000}, {node: B, at_ms: 4000}, {node: C, at_ms: 6000}]
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

/// First time `node` entered `to` at or after `since`.
std::optional<TimeMs> entered(const Network& net, const std::string& node, const char* to, TimeMs since = 0) {
    const std::string needle = std::string("to=") + to;
    for (const auto& r : records_of(net, "state", id_of(net, node))) {
        if (r.t >= since && r.detail.ends_with(needle)) return r.t;
    }
    return std::nullopt;
}

Scenario with_fault(const char* yaml, const std::string& extra) {
    std::string text(yaml);
    if (text.find("faults:") == std::string::npos) text += "faults:\n";
    text += extra;
    return scenario_from(text);
}

}  // namespace

TEST_CASE("documented transitions") {
    CHECK(transition(S::Init, E::Start, true).next == S::Active);
    CHECK(transition(S::Init, E::Start, false).next == S::Search);
    CHECK(transition(S::Search, E::CandidatesFound, false).next == S::JoinNetwork);
    CHECK(transition(S::JoinNetwork, E::Connected, false).next == S::Active);
    CHECK(transition(S::JoinNetwork, E::CandidatesExhausted, false).next == S::Search);
    CHECK(transition(S::Active, E::JobStarted, false).next == S::ExecuteJob);
    CHECK(transition(S::ExecuteJob, E::JobFinished, false).next == S::Active);

    const auto lost = transition(S::Active, E::ParentLost, false);
    CHECK(lost.next == S::ParentRecovery);
    CHECK(has(lost, A::BeginRecovery));
    CHECK(has(lost, A::SendTbaToChildren));

    const auto ok = transition(S::ParentRecovery, E::Reattached, false);
    CHECK(ok.next == S::Active);
    CHECK(has(ok, A::SendTrnToChildren));
    const auto fail = transition(S::ParentRecovery, E::RecoveryFailed, false);
    CHECK(fail.next == S::NodeRestart);
    CHECK(has(fail, A::SendPrnToChildren));
    CHECK(has(fail, A::ResetNetworkState));
    CHECK(transition(S::NodeRestart, E::RestartComplete, false).next == S::Search);

    CHECK(transition(S::Active, E::TopologyBreakAlert, false).next == S::RecoveryAwait);
    CHECK(transition(S::RecoveryAwait, E::TopologyRestored, false).next == S::Active);
    CHECK(transition(S::RecoveryAwait, E::ParentReset, false).next == S::ParentRecovery);
}

TEST_CASE("root-sequence safeguard") {
    CHECK(transition(S::Active, E::RootUnreachable, false).next == S::RecoveryAwait);
    CHECK(transition(S::RecoveryAwait, E::RootReachable, false).next == S::Active);
    const auto same = transition(S::Active, E::RootReachable, false);
    CHECK(same.next == S::Active);
    CHECK(same.actions.empty());
    for (auto s : {S::Active, S::ExecuteJob}) {
        const auto t = transition(s, E::RootUnreachable, true);
        CHECK(t.next == s);
        CHECK_FALSE(t.valid);
    }
}

TEST_CASE("the root only ever occupies Init, Active and ExecuteJob") {
    for (auto s : {S::Init, S::Active, S::ExecuteJob}) {
        for (auto e : kAllEvents) {
            const auto t = transition(s, e, true);
            CHECK((t.next == S::Init || t.next == S::Active || t.next == S::ExecuteJob));
        }
    }
}

TEST_CASE("invalid events leave the state alone") {
    int invalid = 0;
    for (auto s : kAllStates) {
        for (auto e : kAllEvents) {
            const auto t = transition(s, e, false);
            if (!t.valid) {
                CHECK(t.next == s);
                CHECK(t.actions.empty());
                ++invalid;
            }
        }
    }
    CHECK(invalid > 0);
    CHECK_FALSE(transition(S::Search, E::Connected, false).valid);
    CHECK_FALSE(transition(S::NodeRestart, E::TopologyRestored, false).valid);
}

TEST_CASE("state names round-trip") {
    for (auto s : kAllStates) CHECK(parse_lifecycle_state(to_string(s)) == s);
    CHECK_FALSE(parse_lifecycle_state("Sleeping").has_value());
}

TEST_CASE("event buffer overwrites the oldest entry when full") {
    EventBuffer b(3);
    b.push(E::Start);
    b.push(E::CandidatesFound);
    b.push(E::Connected);
    CHECK(b.size() == 3);
    b.push(E::ParentLost);
    CHECK(b.size() == 3);
    CHECK(b.overwritten() == 1);
    CHECK(b.pop() == E::CandidatesFound);
    CHECK(b.pop() == E::Connected);
    CHECK(b.pop() == E::ParentLost);
    CHECK_FALSE(b.pop().has_value());
    CHECK(b.capacity() == 3);
}

TEST_CASE("event buffer keeps the newest events under any push pattern") {
    Rng rng(5);
    EventBuffer b(8);
    std::deque<E> model;
    std::uint64_t dropped = 0;
    for (int i = 0; i < 5000; ++i) {
        if (rng.uniform01() < 0.6) {
            const auto e = kAllEvents[rng.uniform_int(0, 15)];
            b.push(e);
            model.push_back(e);
            if (model.size() > 8) {
                model.pop_front();
                ++dropped;
            }
        } else {
            const auto got = b.pop();
            if (model.empty()) {
                CHECK_FALSE(got.has_value());
            } else {
                CHECK(got == model.front());
                model.pop_front();
            }
        }
        REQUIRE(b.size() == model.size());
    }
    CHECK(b.overwritten() == dropped);
}

TEST_CASE("parent ranking") {
    auto cand = [](std::uint8_t host, std::uint8_t hops, std::uint8_t children, double q) {
        return Candidate{IpAddress{10, 0, host, 1}, q, ParentInfo{hops, children, S::Active, 10}};
    };
    std::vector<Candidate> c{cand(1, 2, 0, 1.0), cand(2, 1, 3, 1.0), cand(3, 1, 1, 0.5), cand(4, 1, 1, 0.9),
                             cand(5, 1, 1, 0.9)};
    c.push_back(Candidate{IpAddress{10, 0, 6, 1}, 1.0, std::nullopt});
    c.push_back(Candidate{IpAddress{10, 0, 7, 1}, 1.0, ParentInfo{0, 0, S::Search, 10}});
    c.push_back(Candidate{IpAddress{10, 0, 8, 1}, 1.0, ParentInfo{0, 10, S::Active, 10}});
    const auto ranked = rank_candidates(c);
    std::vector<int> order;
    for (const auto& r : ranked) order.push_back(r.ap_ip.octet(2));
    CHECK(order == std::vector<int>{4, 5, 3, 2, 1});
}

TEST_CASE("lifecycle payloads round-trip") {
    const ParentInfo info{2, 3, S::RecoveryAwait, 4};
    const auto back = decode_parent_info(encode_parent_info(info));
    REQUIRE(back.has_value());
    CHECK(back->hops_to_root == 2);
    CHECK(back->child_count == 3);
    CHECK(back->state == S::RecoveryAwait);
    CHECK_FALSE(back->eligible());
    CHECK_FALSE(decode_parent_info(std::vector<std::uint8_t>{1, 2, 99, 4}).has_value());
    CHECK_FALSE(decode_parent_info(std::vector<std::uint8_t>{1, 2}).has_value());

    const RegistrationAnswer yes{true, IpAddress{10, 1, 1, 2}};
    const auto a = decode_registration_answer(encode_registration_answer(yes));
    REQUIRE(a.has_value());
    CHECK(a->accepted);
    CHECK(a->sta_ip == yes.sta_ip);
    CHECK_FALSE(decode_registration_answer(encode_registration_answer({false, {}}))->accepted);
}

TEST_CASE("a lossless single-candidate join takes four lifecycle frames") {
    const char* yaml = R"(
duration_ms: 5000
link: {latency_jitter_ms: 0}
nodes:
  - {name: R, mac: "02:00:00:00:00:01", root: true}
  - {name: A, mac: "02:00:00:00:00:02"}
joins: [{node: A, at_ms: 100}]
)";
    Network probe(scenario_from(yaml));
    probe.run();
    const auto parent = records_of(probe, "parent", id_of(probe, "A"));
    REQUIRE(parent.size() == 1);

    Network net(scenario_from(yaml));
    net.run_until(parent[0].t - 1);
    CHECK(net.radio().totals().transmitted == 4);
    CHECK(net.radio().counters(id_of(net, "A"), id_of(net, "R")).transmitted == 2);
    CHECK(net.radio().counters(id_of(net, "R"), id_of(net, "A")).transmitted == 2);
}

TEST_CASE("integration time is the sum of its three states") {
    Network net(scenario_file("scenarios/testbed_pubsub.yaml"));
    net.run();
    const auto rep = analyze(net.trace().records(), {});
    REQUIRE(rep.timing.integration.size() == 4);
    for (const auto& s : rep.timing.integration) {
        CHECK(s.total == s.init + s.search + s.join);
        CHECK(s.search > 0);
    }
    for (const auto& r : records_of(net, "integration")) {
        const auto init = std::stoll(*detail_field(r.detail, "init"));
        const auto search = std::stoll(*detail_field(r.detail, "search"));
        const auto join = std::stoll(*detail_field(r.detail, "join"));
        const auto d = net.node(r.node).durations();
        CHECK(init == d[static_cast<std::size_t>(S::Init)]);
        CHECK(search == d[static_cast<std::size_t>(S::Search)]);
        CHECK(join == d[static_cast<std::size_t>(S::JoinNetwork)]);
    }
}

TEST_CASE("recovery with an alternative parent keeps the subtree") {
    auto sc = with_fault(kAltParent, "  - {kind: kill, at_ms: 20000, node: A}\n");
    Network net(sc);
    net.run_until(19999);
    REQUIRE(net.parent_of(id_of(net, "B")) == id_of(net, "A"));
    REQUIRE(net.parent_of(id_of(net, "C")) == id_of(net, "B"));
    net.run();
    CHECK(net.parent_of(id_of(net, "B")) == id_of(net, "X"));
    CHECK(net.parent_of(id_of(net, "C")) == id_of(net, "B"));
    CHECK(records_of(net, "parent", id_of(net, "C")).size() == 1);
    CHECK(entered(net, "B", "ParentRecovery", 20000).has_value());
    CHECK(entered(net, "C", "RecoveryAwait", 20000).has_value());
    CHECK_FALSE(entered(net, "B", "NodeRestart").has_value());
    for (auto n : {"R", "B", "X", "C"}) CHECK(net.node(id_of(net, n)).state() == S::Active);
    const auto rep = analyze(net.trace().records(), {});
    REQUIRE(rep.timing.recovery.size() == 1);
    CHECK(rep.timing.recovery[0].node == "B");
}

TEST_CASE("routes to a recovered subtree are whole again after the next full update") {
    auto sc = with_fault(kAltParent, "  - {kind: kill, at_ms: 20000, node: A}\n");
    sc.duration = 330000;
    Network net(sc);
    net.run();
    CHECK(check_routes_match_tree(net).value_or("") == "");
    CHECK(check_loop_free(net).value_or("") == "");
}

TEST_CASE("without an alternative the subtree restarts layer by layer and reintegrates") {
    Network net(scenario_from(kChain));
    net.run();
    const auto b_restart = entered(net, "B", "NodeRestart", 20000);
    const auto c_recover = entered(net, "C", "ParentRecovery", 20000);
    const auto c_await = entered(net, "C", "RecoveryAwait", 20000);
    const auto d_await = entered(net, "D", "RecoveryAwait", 20000);
    const auto d_recover = entered(net, "D", "ParentRecovery", 20000);
    REQUIRE(b_restart);
    REQUIRE(c_recover);
    REQUIRE(c_await);
    REQUIRE(d_await);
    REQUIRE(d_recover);
    CHECK(*c_await < *b_restart);
    CHECK(*c_recover >= *b_restart);
    CHECK(*d_recover > *c_recover);
    const auto c_restart = entered(net, "C", "NodeRestart", 20000);
    REQUIRE(c_restart);
    CHECK(*d_recover >= *c_restart);

    const auto b_back = entered(net, "B", "Active", 40000);
    const auto c_back = entered(net, "C", "Active", 40000);
    const auto d_back = entered(net, "D", "Active", 40000);
    REQUIRE(b_back);
    REQUIRE(c_back);
    REQUIRE(d_back);
    CHECK(*b_back < *c_back);
    CHECK(*c_back < *d_back);
    CHECK(net.depth_of(id_of(net, "D")) == 3);
    CHECK_FALSE(check_routes_match_tree(net).has_value());
}

TEST_CASE("restart releases each child with one PRN and clears the table") {
    const char* yaml = R"(
duration_ms: 30000
link: {latency_jitter_ms: 0}
visibility: [[R, A], [A, B], [B, C], [B, D]]
nodes:
  - {name: R, mac: "02:00:00:00:00:01", root: true}
  - {name: A, mac: "02:00:00:00:00:02"}
  - {name: B, mac: "02:00:00:00:00:03"}
  - {name: C, mac: "02:00:00:00:00:04"}
  - {name: D, mac: "02:00:00:00:00:05"}
joins: [{node: A, at_ms: 100}, {node: B, at_ms: 2000}, {node: C, at_ms: 4000}, {node: D, at_ms: 6000}]
faults:
  - {kind: kill, at_ms: 15000, node: A}
  - {kind: drop, category: lifecycle, type: 7, from: B}
)";
    Network net(scenario_from(yaml));
    net.run();
    const auto restart = records_of(net, "restart", id_of(net, "B"));
    REQUIRE(restart.size() >= 1);
    CHECK(restart[0].detail.starts_with("table=0"));
    std::size_t prn = 0;
    for (const auto& r : records_of(net, "drop", id_of(net, "B"))) {
        if (r.t == restart[0].t) ++prn;
    }
    CHECK(prn == 2);
}

TEST_CASE("a lost TRN is repaired by the root-route safeguard") {
    auto sc = with_fault(kAltParent,
                         "  - {kind: kill, at_ms: 20000, node: A}\n"
                         "  - {kind: drop, category: lifecycle, type: 6, from: B, to: C}\n");
    Network net(sc);
    net.run();
    CHECK(count_of(net, "drop", id_of(net, "B")) >= 1);
    const auto await = entered(net, "C", "RecoveryAwait", 20000);
    REQUIRE(await);
    CHECK(entered(net, "C", "Active", *await).has_value());
    CHECK(net.node(id_of(net, "C")).state() == S::Active);
}

TEST_CASE("lost TBAs still suspend descendants through the odd root sequence") {
    auto sc = with_fault(kAltParent,
                         "  - {kind: kill, at_ms: 20000, node: A}\n"
                         "  - {kind: drop, category: lifecycle, type: 5}\n");
    Network net(sc);
    net.run();
    CHECK(count_of(net, "drop") >= 1);
    const auto await = entered(net, "C", "RecoveryAwait", 20000);
    REQUIRE(await);
    CHECK(entered(net, "C", "Active", *await).has_value());
}

TEST_CASE("operational nodes never hold a dangling parent link") {
    Network net(scenario_from(kChain));
    bool ok = true;
    for (TimeMs t = 125; t <= 60000; t += 250) {
        net.run_until(t);
        for (NodeId n = 0; n < net.size(); ++n) {
            const auto& node = net.node(n);
            if (!node.alive() || node.is_root() || !is_operational(node.state())) continue;
            const auto p = net.parent_of(n);
            const bool fine = p.has_value() && net.node(*p).alive();
            if (!fine) MESSAGE(node.name() << " dangling at " << t);
            ok = ok && fine;
        }
    }
    CHECK(ok);
}
