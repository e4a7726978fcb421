#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hermes/app_nn.hpp"
#include "hermes/envelope.hpp"
#include "hermes/lifecycle.hpp"
#include "hermes/link.hpp"
#include "hermes/middleware.hpp"
#include "hermes/nn.hpp"
#include "hermes/routing.hpp"
#include "hermes/sim.hpp"

namespace hermes {

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NodeSpec {
    std::string name;
    MacAddress mac;
    DeviceKind kind = DeviceKind::Class32;
    bool root = false;
    std::uint8_t roles = 0;
    /// Application metric; defaults to the profile capacity.
    std::optional<std::uint32_t> metric;
    std::optional<int> quota;
    std::vector<int> inputs;
    std::optional<int> max_children;
    std::optional<TimeMs> frame_processing;
    std::optional<TimeMs> compute_delay;
    std::optional<TimeMs> state_handling;
    std::optional<TimeMs> scan_duration;
};

struct LinkOverride {
    std::string a;
    std::string b;
    LinkParams params;
};

struct JoinSpec {
    std::string node;
    TimeMs at = 0;
};

/// Evenly spaced joins; `shuffle` draws the order from the scenario seed.
struct JoinPlan {
    TimeMs start = 1000;
    TimeMs interval = 5000;
    std::vector<std::string> order;
    bool shuffle = false;
};

enum class FaultKind : std::uint8_t { Kill, LinkDown, LinkUp, Drop, Corrupt };

const char* to_string(FaultKind k);

/// Frame filter used by drop and corrupt faults. Unset fields match anything.
struct FrameMatch {
    std::optional<Category> category;
    std::optional<std::uint8_t> type;
    std::optional<std::string> from;
    std::optional<std::string> to;
    TimeMs start = 0;
    TimeMs end = std::numeric_limits<TimeMs>::max();
    /// Number of frames affected; negative means unlimited.
    int count = -1;
};

struct FaultSpec {
    FaultKind kind = FaultKind::Kill;
    TimeMs at = 0;
    std::string node;
    std::string a;
    std::string b;
    FrameMatch match;
};

struct ProbeSpec {
    std::string from;
    std::string to;
    int count = 10;
    TimeMs start = 0;
    TimeMs interval = 1000;
};

struct NnSpec {
    std::shared_ptr<const ModelSpec> model;
    std::string model_source;
    NnConfig config;
};

struct Scenario {
    std::uint64_t seed = 1;
    TimeMs duration = 600000;
    StrategyKind strategy = StrategyKind::None;
    TimeMs middleware_period = 120000;
    int staleness_periods = 2;
    std::size_t max_topics = 16;
    TimeMs topology_timeout = 3000;

    TimeMs routing_period = 60000;
    int fru_every = 5;
    double fru_threshold = kDefaultFullUpdateThreshold;
    LifecycleTimers lifecycle;

    LinkParams link;
    std::vector<LinkOverride> links;
    bool visibility_all = true;
    std::vector<std::pair<std::string, std::string>> visible_pairs;

    std::vector<NodeSpec> nodes;
    std::vector<JoinSpec> joins;
    std::optional<JoinPlan> join_plan;
    std::vector<FaultSpec> faults;
    std::vector<ProbeSpec> probes;
    TimeMs snapshot_interval = 0;
    std::optional<NnSpec> nn;

    /// Throws ScenarioError on syntax or type errors; `base_dir` resolves
    /// relative model paths.
    static Scenario parse(const std::string& yaml_text, const std::string& base_dir = ".");
    static Scenario load_file(const std::string& path);

    /// Semantic problems, each prefixed by the field path. Empty when valid.
    [[nodiscard]] std::vector<std::string> validate() const;

    /// Changes the seed and re-derives a shuffled join order.
    void set_seed(std::uint64_t s);
    /// Rebuilds `joins` from `join_plan`.
    void resolve_joins();

    [[nodiscard]] std::optional<std::size_t> index_of(const std::string& name) const;
    [[nodiscard]] std::size_t root_index() const;
};

}  // namespace hermes
