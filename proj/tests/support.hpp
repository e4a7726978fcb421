#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hermes/monitor.hpp"
#include "hermes/network.hpp"
#include "hermes/scenario.hpp"

namespace hermes::testing {

inline std::string source_path(std::string_view rel) { return std::string(HERMES_SOURCE_DIR) + "/" + std::string(rel); }

inline Scenario scenario_from(const std::string& yaml) { return Scenario::parse(yaml, source_path("models")); }

inline Scenario scenario_file(std::string_view rel) { return Scenario::load_file(source_path(rel)); }

inline std::vector<TraceRecord> records_of(const Network& net, std::string_view kind,
                                           std::optional<NodeId> node = std::nullopt) {
    std::vector<TraceRecord> out;
    for (const auto& r : net.trace().records()) {
        if (r.kind == kind && (!node || r.node == *node)) out.push_back(r);
    }
    return out;
}

inline std::size_t count_of(const Network& net, std::string_view kind, std::optional<NodeId> node = std::nullopt) {
    return records_of(net, kind, node).size();
}

inline NodeId id_of(const Network& net, const std::string& name) { return net.find(name).value(); }

inline IpAddress ip_of(const Network& net, const std::string& name) { return net.node(id_of(net, name)).self(); }

/// Hop distances over the ground-truth tree from `from` to every alive node.
inline std::map<NodeId, int> tree_distances(const Network& net, NodeId from) {
    std::map<NodeId, std::set<NodeId>> adj;
    for (const auto& e : net.tree()) {
        adj[e.child].insert(e.parent);
        adj[e.parent].insert(e.child);
    }
    std::map<NodeId, int> dist{{from, 0}};
    std::queue<NodeId> q;
    q.push(from);
    while (!q.empty()) {
        const auto n = q.front();
        q.pop();
        for (auto m : adj[n]) {
            if (dist.contains(m)) continue;
            dist[m] = dist[n] + 1;
            q.push(m);
        }
    }
    return dist;
}

/// Every node's hops to every other tree member equals the BFS distance and
/// next hops are tree neighbors. Returns a description of the first problem.
inline std::optional<std::string> check_routes_match_tree(const Network& net) {
    for (NodeId a = 0; a < net.size(); ++a) {
        const auto& na = net.node(a);
        if (!na.alive() || !na.started()) continue;
        const auto dist = tree_distances(net, a);
        for (const auto& [b, d] : dist) {
            if (b == a) continue;
            const auto* e = na.table().find(net.node(b).self());
            if (e == nullptr || !e->reachable()) {
                return na.name() + " has no route to " + net.node(b).name();
            }
            if (e->hops != d) {
                return na.name() + " -> " + net.node(b).name() + " hops " + std::to_string(e->hops) + " expected " +
                       std::to_string(d);
            }
            const auto next = net.node_by_ap(e->next_hop);
            if (!next || tree_distances(net, *next).at(b) != d - 1 || tree_distances(net, a).at(*next) != 1) {
                return na.name() + " -> " + net.node(b).name() + " next hop is not on the tree path";
            }
        }
    }
    return std::nullopt;
}

/// Follows next hops between every ordered pair; fails on a loop or dead end.
inline std::optional<std::string> check_loop_free(const Network& net) {
    const auto n = net.size();
    for (NodeId a = 0; a < n; ++a) {
        if (!net.node(a).alive() || !net.node(a).started()) continue;
        for (NodeId b = 0; b < n; ++b) {
            if (a == b || !net.node(b).alive()) continue;
            const auto dest = net.node(b).self();
            if (net.node(a).table().find(dest) == nullptr || !net.node(a).table().find(dest)->reachable()) continue;
            NodeId at = a;
            std::size_t steps = 0;
            while (at != b) {
                const auto* e = net.node(at).table().find(dest);
                if (e == nullptr || !e->reachable()) {
                    return "dead end at " + net.node(at).name() + " toward " + net.node(b).name();
                }
                const auto next = net.node_by_ap(e->next_hop);
                if (!next) return "unknown next hop at " + net.node(at).name();
                at = *next;
                if (++steps > n - 1) return "loop from " + net.node(a).name() + " to " + net.node(b).name();
            }
        }
    }
    return std::nullopt;
}

}  // namespace hermes::testing
