#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "hermes/envelope.hpp"
#include "hermes/services.hpp"
#include "hermes/types.hpp"

namespace hermes {

enum class StrategyKind : std::uint8_t { None = 0, Inject = 1, PubSub = 2, Topology = 3 };

const char* to_string(StrategyKind k);
std::optional<StrategyKind> parse_strategy_kind(std::string_view text);

/// Opaque application metric.
using Metric = std::vector<std::uint8_t>;
/// Total preorder over metrics: negative, zero or positive like strcmp.
using MetricCompare = std::function<int(std::span<const std::uint8_t>, std::span<const std::uint8_t>)>;
/// Whether `candidate` is worth re-routing through, given our own metric (if any).
using Suitability = std::function<bool(const Metric* own, const Metric& candidate)>;

inline constexpr std::size_t kMaxMetricSize = 64;

Metric encode_u32_metric(std::uint32_t value);
std::optional<std::uint32_t> decode_u32_metric(std::span<const std::uint8_t> metric);
/// Compares big-endian unsigned metrics; a malformed metric ranks lowest.
int compare_u32_metric(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Default suitability: the candidate is strictly better than us, or we
/// have no metric at all.
Suitability strictly_better(MetricCompare compare);

struct MetricEntry {
    Metric metric;
    std::uint32_t version = 0;
    TimeMs refreshed = 0;
};

class MetricRegistry {
public:
    /// Stores the entry if its version is newer than what is held. The
    /// refresh time never moves backwards. Returns true if the version was new.
    bool update(IpAddress node, Metric metric, std::uint32_t version, TimeMs refreshed);
    void clear() { entries_.clear(); }

    [[nodiscard]] const std::map<IpAddress, MetricEntry>& entries() const { return entries_; }
    [[nodiscard]] bool fresh(IpAddress node, TimeMs now, TimeMs window) const;

private:
    std::map<IpAddress, MetricEntry> entries_;
};

struct InjectCandidate {
    IpAddress node;
    Metric metric;
    int hops = 0;
};

/// Best suitable candidate: highest metric, then fewer hops, then lower address.
std::optional<IpAddress> select_inject_target(const Metric* own, std::span<const InjectCandidate> candidates,
                                              const MetricCompare& compare, const Suitability& suitable);

using Topic = std::uint16_t;

struct TopicEntry {
    std::set<Topic> publishes;
    std::set<Topic> subscribes;
    std::uint32_t version = 0;
    TimeMs refreshed = 0;
};

class TopicTable {
public:
    bool update(IpAddress node, TopicEntry entry);
    void clear() { entries_.clear(); }

    [[nodiscard]] const std::map<IpAddress, TopicEntry>& entries() const { return entries_; }
    /// Subscribers of `topic` whose entry was refreshed within `window`.
    [[nodiscard]] std::vector<IpAddress> subscribers_of(Topic topic, TimeMs now, TimeMs window) const;

private:
    std::map<IpAddress, TopicEntry> entries_;
};

struct TopologyRecord {
    Metric metric;
    IpAddress parent;
    TimeMs last_report = 0;
};

class TopologyView {
public:
    void report(IpAddress node, Metric metric, IpAddress parent, TimeMs now);
    [[nodiscard]] const TopologyRecord* find(IpAddress node) const;
    [[nodiscard]] const std::map<IpAddress, TopologyRecord>& entries() const { return entries_; }

private:
    std::map<IpAddress, TopologyRecord> entries_;
};

struct ParentCandidate {
    IpAddress node;
    std::optional<Metric> metric;
    int hops = 0;
};

/// Parent-selection function run by the root.
using ParentSelector = std::function<std::optional<IpAddress>(std::span<const ParentCandidate>)>;

/// Highest metric, then fewer hops from the root, then lower address.
/// Candidates without a known metric rank below every known one.
ParentSelector max_metric_selector(MetricCompare compare);

namespace mw_op {
inline constexpr std::uint8_t kMetric = 1;
inline constexpr std::uint8_t kMetricSnapshot = 2;
inline constexpr std::uint8_t kTopics = 1;
inline constexpr std::uint8_t kTopicSnapshot = 2;
inline constexpr std::uint8_t kPlar = 1;
inline constexpr std::uint8_t kPla = 2;
inline constexpr std::uint8_t kPac = 3;
inline constexpr std::uint8_t kPacRelay = 4;
inline constexpr std::uint8_t kReport = 5;
}  // namespace mw_op

/// Topic header value marking a PubSub-mode data frame sent point to point.
inline constexpr Topic kNoTopic = 0xFFFF;

struct StrategyConfig {
    StrategyKind kind = StrategyKind::None;
    TimeMs period = 120000;
    int staleness_periods = 2;
    std::size_t max_topics = 16;
    TimeMs topology_timeout = 3000;
    std::optional<Metric> own_metric;
    MetricCompare compare;
    Suitability suitable;
    ParentSelector selector;
};

class StrategyConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Common interface between routing and the application.
class Strategy {
public:
    using LocalDelivery = std::function<void(Envelope)>;
    using ParentDecision = std::function<void(std::optional<IpAddress>)>;

    explicit Strategy(StrategyConfig cfg) : cfg_(std::move(cfg)) {}
    virtual ~Strategy() = default;

    [[nodiscard]] StrategyKind kind() const { return cfg_.kind; }
    [[nodiscard]] const StrategyConfig& config() const { return cfg_; }

    void bind(NodeServices& node, LocalDelivery deliver) {
        node_ = &node;
        deliver_ = std::move(deliver);
    }

    /// Arms the periodic middleware timer.
    virtual void start();
    /// Called on every middleware period.
    virtual void on_period() {}
    /// A parent link was established (first join or recovery).
    virtual void on_attached() {}
    virtual void on_child_confirmed(IpAddress /*child*/) {}
    virtual void on_child_left(IpAddress /*child*/) {}
    /// Network state reset on node restart.
    virtual void on_reset() {}
    /// Middleware frame addressed to this node.
    virtual void on_frame(const Envelope& /*env*/, IpAddress /*from_neighbor*/) {}

    /// Outbound application data; `topic` is only meaningful for PubSub.
    virtual bool send_data(Envelope env, std::optional<Topic> topic);
    /// Inbound data at its final destination; std::nullopt suppresses it.
    virtual std::optional<Envelope> accept_data(Envelope env) { return env; }

    virtual bool publish(Topic) { return false; }
    virtual bool withdraw(Topic) { return false; }
    virtual bool subscribe(Topic) { return false; }
    virtual bool unsubscribe(Topic) { return false; }

    /// True if this strategy chooses the parent during the join.
    [[nodiscard]] virtual bool selects_parent() const { return false; }
    virtual void request_parent(IpAddress temporary_parent, std::vector<IpAddress> candidates,
                                ParentDecision done) {
        (void)candidates;
        done(temporary_parent);
    }

    [[nodiscard]] TimeMs staleness_window() const { return cfg_.period * cfg_.staleness_periods; }

protected:
    NodeServices& node() { return *node_; }
    [[nodiscard]] const NodeServices& node() const { return *node_; }
    void deliver_local(Envelope env);
    void send_to_all_neighbors(const Envelope& env, std::optional<IpAddress> except);
    Envelope make_frame(std::uint8_t op, std::vector<std::uint8_t> body);

    StrategyConfig cfg_;
    NodeServices* node_ = nullptr;
    LocalDelivery deliver_;
};

/// Throws StrategyConfigError on a missing comparator for Inject or Topology.
std::unique_ptr<Strategy> make_strategy(StrategyConfig cfg);

class InjectStrategy final : public Strategy {
public:
    explicit InjectStrategy(StrategyConfig cfg);

    void on_period() override;
    void on_attached() override;
    void on_child_confirmed(IpAddress child) override;
    void on_reset() override;
    void on_frame(const Envelope& env, IpAddress from_neighbor) override;
    bool send_data(Envelope env, std::optional<Topic> topic) override;

    /// Outer destination chosen for a message to `final_dest`, if any.
    [[nodiscard]] std::optional<IpAddress> choose_target(IpAddress final_dest) const;
    [[nodiscard]] const MetricRegistry& registry() const { return registry_; }

private:
    void flood_own_metric(std::optional<IpAddress> only_to);
    void send_snapshot(IpAddress child);

    MetricRegistry registry_;
    std::uint32_t version_ = 0;
};

class PubSubStrategy final : public Strategy {
public:
    explicit PubSubStrategy(StrategyConfig cfg);

    void on_period() override;
    void on_attached() override;
    void on_child_confirmed(IpAddress child) override;
    void on_reset() override;
    void on_frame(const Envelope& env, IpAddress from_neighbor) override;
    bool send_data(Envelope env, std::optional<Topic> topic) override;
    std::optional<Envelope> accept_data(Envelope env) override;

    bool publish(Topic t) override;
    bool withdraw(Topic t) override;
    bool subscribe(Topic t) override;
    bool unsubscribe(Topic t) override;

    [[nodiscard]] const TopicTable& table() const { return table_; }
    [[nodiscard]] const TopicEntry& own() const { return own_; }
    [[nodiscard]] std::uint64_t duplicates_suppressed() const { return duplicates_; }

private:
    bool change(std::set<Topic>& set, Topic t, bool add);
    void announce(std::optional<IpAddress> only_to);
    void send_snapshot(IpAddress child);

    TopicEntry own_;
    TopicTable table_;
    std::set<std::pair<IpAddress, std::uint32_t>> seen_;
    std::deque<std::pair<IpAddress, std::uint32_t>> seen_order_;
    std::uint64_t duplicates_ = 0;
};

class TopologyStrategy final : public Strategy {
public:
    explicit TopologyStrategy(StrategyConfig cfg);

    void on_period() override;
    void on_attached() override;
    void on_reset() override;
    void on_frame(const Envelope& env, IpAddress from_neighbor) override;

    [[nodiscard]] bool selects_parent() const override { return !node().is_root(); }
    void request_parent(IpAddress temporary_parent, std::vector<IpAddress> candidates,
                        ParentDecision done) override;

    [[nodiscard]] const TopologyView& view() const { return view_; }

private:
    void send_report();

    TopologyView view_;
    ParentDecision pending_;
    std::uint32_t request_id_ = 0;
};

}  // namespace hermes
