#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hermes/node.hpp"
#include "hermes/scenario.hpp"
#include "hermes/sim.hpp"

namespace hermes {

/// Child-to-parent edge of the ground-truth tree.
struct TreeEdge {
    NodeId child = 0;
    NodeId parent = 0;
    auto operator<=>(const TreeEdge&) const = default;
};

/// A whole simulated deployment built from a Scenario. Owns the event loop,
/// the radio, every node and the ground-truth link registry.
class Network final : public Environment {
public:
    explicit Network(Scenario scenario);
    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;
    ~Network() override;

    /// Runs to the scenario duration and appends the final summary.
    void run();
    void run_until(TimeMs t);
    /// Summary records: per-node state, link counters, root table size.
    void finish();

    [[nodiscard]] const Scenario& scenario() const { return scenario_; }
    [[nodiscard]] Trace& trace() { return trace_; }
    [[nodiscard]] const Trace& trace() const { return trace_; }
    [[nodiscard]] Radio& radio() { return *radio_; }
    [[nodiscard]] std::size_t size() const { return nodes_.size(); }
    [[nodiscard]] Node& node(NodeId id) { return *nodes_.at(id); }
    [[nodiscard]] const Node& node(NodeId id) const { return *nodes_.at(id); }
    [[nodiscard]] std::optional<NodeId> find(const std::string& name) const;
    [[nodiscard]] std::optional<NodeId> node_by_ap(IpAddress ap) const;
    [[nodiscard]] NodeId root_id() const { return root_; }

    /// Ground truth: the parent a node's station is linked to.
    [[nodiscard]] std::optional<NodeId> parent_of(NodeId child) const;
    [[nodiscard]] std::vector<TreeEdge> tree() const;
    /// Hop distance to the root over the ground-truth tree.
    [[nodiscard]] std::optional<int> depth_of(NodeId id) const;

    void start_node(NodeId id);
    void kill_node(NodeId id);
    /// Symmetric visibility change; an established link between the pair breaks.
    void set_visibility(NodeId a, NodeId b, bool visible);
    /// Emits one `snapshot` record with the ground-truth tree.
    void snapshot();

    // Environment
    Simulator& sim() override { return sim_; }
    void emit(NodeId node, std::string kind, std::string detail) override;
    void transmit(NodeId from, IpAddress to_ap, std::vector<std::uint8_t> frame) override;
    std::vector<ScanResult> scan(NodeId scanner) override;
    void link_up(NodeId child, IpAddress parent_ap) override;
    void detach_from_parent(NodeId child) override;
    void release_child(NodeId parent, IpAddress child_ap) override;

private:
    struct Filter {
        FaultKind kind = FaultKind::Drop;
        FrameMatch match;
        std::optional<NodeId> from;
        std::optional<NodeId> to;
        int remaining = -1;
    };

    void build();
    void schedule_faults();
    void schedule_probes();
    void schedule_snapshots(TimeMs at);
    /// Returns the filter that claims this frame, if any.
    Filter* match_filter(NodeId from, NodeId to, const std::vector<std::uint8_t>& frame);
    void break_link(NodeId child, NodeId parent, const char* cause);
    [[nodiscard]] bool is_descendant(NodeId node, NodeId ancestor) const;

    Scenario scenario_;
    Simulator sim_;
    Trace trace_;
    std::unique_ptr<Radio> radio_;
    std::vector<std::unique_ptr<Node>> nodes_;
    std::map<IpAddress, NodeId> by_ap_;
    std::map<NodeId, NodeId> parent_of_;
    std::vector<Filter> filters_;
    NodeId root_ = 0;
    bool finished_ = false;
};

}  // namespace hermes
