#include "doctest.h"
#include "support.hpp"

using namespace hermes;
using namespace hermes::testing;

namespace {

const char* kTriangle = R"(
duration_ms: 20000
link: {latency_jitter_ms: 0}
visibility: [[R, A], [A, B], [R, C]]
nodes:
  - {name: R, mac: "02:00:00:00:00:01", root: true}
  - {name: A, mac: "02:00:00:00:00:02"}
  - {name: B, mac: "02:00:00:00:00:03"}
  - {name: C, mac: "02:00:00:00:00:04"}
joins: [{node: A, at_ms: 100}, {node: B, at_ms: 2000}, {node: C, at_ms: 4000}]
)";

}  // namespace

TEST_CASE("same scenario and seed give byte-identical traces") {
    auto sc = scenario_file("scenarios/testbed_pubsub.yaml");
    sc.link.loss_probability = 0.05;
    Network a(sc);
    Network b(sc);
    a.run();
    b.run();
    CHECK(a.trace().to_text() == b.trace().to_text());
    sc.set_seed(sc.seed + 1);
    Network c(sc);
    c.run();
    CHECK(a.trace().to_text() != c.trace().to_text());
}

TEST_CASE("every node joins and the tree is rooted and acyclic") {
    Network net(scenario_file("scenarios/testbed_topology.yaml"));
    net.run();
    for (NodeId n = 0; n < net.size(); ++n) {
        CHECK(net.node(n).state() == LifecycleState::Active);
        REQUIRE(net.depth_of(n).has_value());
        if (n != net.root_id()) CHECK(*net.depth_of(n) >= 1);
    }
    CHECK(net.tree().size() == net.size() - 1);
    CHECK(net.depth_of(net.root_id()) == 0);
}

TEST_CASE("killing a node breaks its parent link and every child link") {
    Network net(scenario_from(R"(
duration_ms: 20000
link: {latency_jitter_ms: 0}
visibility: [[R, A], [A, B], [A, C]]
nodes:
  - {name: R, mac: "02:00:00:00:00:01", root: true}
  - {name: A, mac: "02:00:00:00:00:02"}
  - {name: B, mac: "02:00:00:00:00:03"}
  - {name: C, mac: "02:00:00:00:00:04"}
joins: [{node: A, at_ms: 100}, {node: B, at_ms: 2000}, {node: C, at_ms: 4000}]
)"));
    net.run_until(10000);
    REQUIRE(net.tree().size() == 3);
    const auto before = count_of(net, "link");
    net.kill_node(id_of(net, "A"));
    CHECK(count_of(net, "link") - before == 3);
    CHECK(net.tree().empty());
    CHECK_FALSE(net.node(id_of(net, "A")).alive());
    net.run_until(10001);
    CHECK(count_of(net, "parent-lost", id_of(net, "B")) == 1);
    CHECK(count_of(net, "parent-lost", id_of(net, "C")) == 1);
    CHECK(count_of(net, "child-left", net.root_id()) == 1);
    CHECK(count_of(net, "killed", id_of(net, "A")) == 1);
}

TEST_CASE("losing visibility raises parent-lost on the child and child-left on the parent") {
    Network net(scenario_from(kTriangle));
    net.run_until(10000);
    const auto A = id_of(net, "A");
    const auto B = id_of(net, "B");
    REQUIRE(net.parent_of(B) == A);
    net.set_visibility(A, B, false);
    CHECK_FALSE(net.parent_of(B).has_value());
    net.run_until(10001);
    const auto lost = records_of(net, "parent-lost", B);
    REQUIRE(lost.size() == 1);
    CHECK(detail_field(lost[0].detail, "parent") == ip_of(net, "A").to_string());
    const auto left = records_of(net, "child-left", A);
    REQUIRE(left.size() == 1);
    CHECK(detail_field(left[0].detail, "child") == ip_of(net, "B").to_string());
    net.set_visibility(id_of(net, "R"), id_of(net, "C"), false);
    net.run_until(10002);
    CHECK(count_of(net, "child-left", net.root_id()) == 1);
}

TEST_CASE("a visibility change between unlinked nodes breaks nothing") {
    Network net(scenario_from(kTriangle));
    net.run_until(10000);
    const auto edges = net.tree();
    net.set_visibility(id_of(net, "B"), id_of(net, "C"), true);
    net.set_visibility(id_of(net, "B"), id_of(net, "C"), false);
    CHECK(net.tree() == edges);
}

TEST_CASE("link counters conserve frames per link and in total") {
    auto sc = scenario_file("scenarios/testbed_pubsub.yaml");
    sc.link.loss_probability = 0.1;
    Network net(sc);
    for (TimeMs t = 10000; t <= sc.duration; t += 10000) {
        net.run_until(t);
        const auto tot = net.radio().totals();
        CHECK(tot.transmitted == tot.delivered + tot.dropped + tot.in_flight);
        LinkCounters sum;
        for (NodeId a = 0; a < net.size(); ++a) {
            for (NodeId b = 0; b < net.size(); ++b) {
                const auto c = net.radio().counters(a, b);
                CHECK(c.transmitted == c.delivered + c.dropped + c.in_flight);
                sum.transmitted += c.transmitted;
                sum.delivered += c.delivered;
                sum.dropped += c.dropped;
            }
        }
        CHECK(sum.transmitted == tot.transmitted);
        CHECK(sum.delivered == tot.delivered);
        CHECK(sum.dropped == tot.dropped);
    }
    CHECK(net.radio().totals().dropped > 0);
}

TEST_CASE("the summary records close the trace") {
    Network net(scenario_from(kTriangle));
    net.run();
    const auto& recs = net.trace().records();
    REQUIRE_FALSE(recs.empty());
    CHECK(recs.back().kind == "radio");
    CHECK(count_of(net, "summary") == net.size());
    for (const auto& r : records_of(net, "summary")) {
        CHECK(detail_field(r.detail, "state") == "Active");
        CHECK(r.t == 20000);
    }
}

TEST_CASE("corrupted frames are counted as malformed at the receiver") {
    Network net(scenario_from(std::string(kTriangle) +
                              "faults: [{kind: corrupt, from: A, to: R, count: 3}]\n"));
    net.run();
    CHECK(count_of(net, "fault-corrupt") == 3);
    CHECK(net.node(net.root_id()).stats().malformed == 3);
}

TEST_CASE("snapshots list the ground-truth edges") {
    Network net(scenario_from(kTriangle));
    net.run_until(10000);
    net.snapshot();
    const auto snaps = records_of(net, "snapshot");
    REQUIRE_FALSE(snaps.empty());
    const auto edges = *detail_field(snaps.back().detail, "edges");
    for (const auto& e : net.tree()) {
        const auto text = net.node(e.child).self().to_string() + ">" + net.node(e.parent).self().to_string();
        CHECK(edges.find(text) != std::string::npos);
    }
}
