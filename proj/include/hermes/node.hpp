#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hermes/app_nn.hpp"
#include "hermes/envelope.hpp"
#include "hermes/lifecycle.hpp"
#include "hermes/link.hpp"
#include "hermes/middleware.hpp"
#include "hermes/routing.hpp"
#include "hermes/services.hpp"
#include "hermes/sim.hpp"

namespace hermes {

/// What a node may ask of the world around it. Implemented by Network.
class Environment {
public:
    virtual ~Environment() = default;

    virtual Simulator& sim() = 0;
    virtual void emit(NodeId node, std::string kind, std::string detail) = 0;
    /// One radio hop from `from` to the node owning `to_ap`.
    virtual void transmit(NodeId from, IpAddress to_ap, std::vector<std::uint8_t> frame) = 0;
    /// Visible nodes with their AP up, minus the scanner and its descendants.
    virtual std::vector<ScanResult> scan(NodeId scanner) = 0;
    virtual void link_up(NodeId child, IpAddress parent_ap) = 0;
    /// The child leaves on its own; the parent gets a child-left event.
    virtual void detach_from_parent(NodeId child) = 0;
    /// The parent drops a child; the child gets a parent-lost event.
    virtual void release_child(NodeId parent, IpAddress child_ap) = 0;
};

struct NodeConfig {
    NodeId id = 0;
    std::string name;
    MacAddress mac;
    DeviceProfile profile;
    bool is_root = false;
    IpAddress root;
    LifecycleTimers timers;
    TimeMs routing_period = 60000;
    int fru_every = 5;
    double fru_threshold = kDefaultFullUpdateThreshold;
    /// Interval between routing hellos to a new parent until it answers.
    TimeMs hello_retry = 1000;
    int hello_retries = 3;
    /// Interval and count for monitoring reports waiting on a route to the root.
    TimeMs report_retry = 500;
    int report_retries = 20;
    /// Emit one `rx` record per received frame (the monitoring tap).
    bool trace_rx = false;
};

struct NodeStats {
    std::uint64_t frames_sent = 0;
    std::uint64_t bytes_sent = 0;
    std::uint64_t frames_received = 0;
    std::uint64_t malformed = 0;
    std::uint64_t no_route = 0;
};

class Node final : public NodeServices {
public:
    Node(NodeConfig cfg, Environment& env, std::unique_ptr<Strategy> strategy, std::unique_ptr<NnApp> app);
    Node(const Node&) = delete;
    Node& operator=(const Node&) = delete;

    void start();
    void kill();
    /// Frame arriving from the radio. Returns false if the node is down.
    bool receive(std::vector<std::uint8_t> frame, IpAddress from_ap);
    void on_parent_lost(IpAddress parent_ap);
    void on_child_left(IpAddress child_ap);
    /// Sends one ping; the matching pong is traced as `rtt`.
    void ping(IpAddress dest, std::uint32_t seq);

    // NodeServices
    [[nodiscard]] TimeMs now() const override { return env_.sim().now(); }
    [[nodiscard]] IpAddress self() const override { return ap_.ap_ip(); }
    [[nodiscard]] bool is_root() const override { return cfg_.is_root; }
    [[nodiscard]] IpAddress root() const override { return cfg_.root; }
    [[nodiscard]] std::optional<IpAddress> parent() const override;
    [[nodiscard]] std::vector<IpAddress> children() const override;
    [[nodiscard]] LifecycleState state() const override { return state_; }
    [[nodiscard]] const DeviceProfile& profile() const override { return cfg_.profile; }
    [[nodiscard]] std::optional<int> hops_to(IpAddress dest) const override;
    std::uint32_t next_message_id() override { return ++message_id_; }
    bool route(Envelope env) override;
    bool send_to_neighbor(IpAddress neighbor, Envelope env) override;
    void after(TimeMs delay, std::function<void()> fn) override;
    void compute(TimeMs work, std::function<void()> fn) override;
    void trace(std::string kind, std::string detail) override;

    [[nodiscard]] NodeId id() const { return cfg_.id; }
    [[nodiscard]] const std::string& name() const { return cfg_.name; }
    [[nodiscard]] const MacAddress& mac() const { return cfg_.mac; }
    [[nodiscard]] bool alive() const { return alive_; }
    [[nodiscard]] bool started() const { return started_; }
    [[nodiscard]] const RoutingTable& table() const { return table_; }
    [[nodiscard]] const ApInterface& ap() const { return ap_; }
    [[nodiscard]] const StaInterface& sta() const { return sta_; }
    [[nodiscard]] const EventBuffer& events() const { return events_; }
    [[nodiscard]] StateDurations durations() const;
    [[nodiscard]] const NodeStats& stats() const { return stats_; }
    [[nodiscard]] Strategy& strategy() { return *strategy_; }
    [[nodiscard]] const Strategy& strategy() const { return *strategy_; }
    [[nodiscard]] NnApp* app() { return app_.get(); }
    [[nodiscard]] const NnApp* app() const { return app_.get(); }

private:
    struct JoinSession {
        std::uint64_t id = 0;
        bool recover = false;
        std::vector<Candidate> candidates;
        std::vector<Candidate> ranked;
        std::size_t index = 0;
        int tries = 0;
        std::size_t answers = 0;
        bool collecting = false;
        bool awaiting_ack = false;
        std::uint64_t crr_token = 0;
        bool parent_chosen = false;
    };

    // lifecycle engine
    void push_event(LifecycleEvent e);
    void drain_events();
    void set_state(LifecycleState next);
    /// Runs the Active entry hooks once a route to the root exists.
    void announce_active();
    void run_action(LifecycleAction a);

    // join and recovery
    void begin_scan(bool recover);
    void begin_join();
    void finish_collect(std::uint64_t sid);
    void try_next_candidate();
    void send_crr();
    void attach(IpAddress parent_ap, IpAddress sta_ip);
    void finish_attach();
    void join_exhausted();
    void start_recovery_attempt();
    void lose_parent(LifecycleEvent cause);
    void reset_network_state();
    void send_hello(int attempt);
    void notify_children(std::uint8_t type);

    // routing
    void routing_tick();
    void send_update(const RoutingUpdate& update, std::optional<IpAddress> except);
    void send_full_table(IpAddress neighbor);
    void propagate(const std::vector<IpAddress>& dests, std::optional<IpAddress> except);
    [[nodiscard]] std::uint8_t hops_to_root() const;

    // frame handling
    void dispatch(const Envelope& env, IpAddress from_ap);
    void handle_routing(const Envelope& env, IpAddress from_ap);
    void handle_lifecycle(const Envelope& env, IpAddress from_ap);
    void handle_data(const Envelope& env, IpAddress from_ap);
    void handle_monitoring(const Envelope& env);
    void deliver_data(Envelope env);
    void local_data(const Envelope& env);
    void send_direct(IpAddress ap, Envelope env);
    void flood(const Envelope& env, std::optional<IpAddress> except);
    void report_to_root(std::uint8_t type, std::vector<std::uint8_t> payload, int attempt);
    [[nodiscard]] bool is_neighbor(IpAddress ap) const;
    [[nodiscard]] ChildMap child_map() const;

    NodeConfig cfg_;
    Environment& env_;
    std::unique_ptr<Strategy> strategy_;
    std::unique_ptr<NnApp> app_;

    ApInterface ap_;
    StaInterface sta_;
    RoutingTable table_;
    EventBuffer events_;
    LifecycleState state_ = LifecycleState::Init;
    TimeMs state_entered_ = 0;
    StateDurations durations_{};
    bool draining_ = false;
    bool active_pending_ = false;
    bool attached_pending_ = false;

    bool alive_ = false;
    bool started_ = false;
    std::uint64_t epoch_ = 0;
    TimeMs busy_until_ = 0;
    std::uint32_t message_id_ = 0;
    std::uint64_t tick_ = 0;
    bool strategy_started_ = false;

    JoinSession session_;
    std::uint64_t session_seq_ = 0;
    int recovery_attempt_ = 0;
    std::optional<TimeMs> recovery_started_;
    bool heard_from_parent_ = false;
    std::set<std::pair<IpAddress, std::uint32_t>> flood_seen_;
    NodeStats stats_;
};

}  // namespace hermes
