#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hermes/link.hpp"
#include "hermes/types.hpp"

namespace hermes {

enum class LifecycleState : std::uint8_t {
    Init,
    Search,
    JoinNetwork,
    Active,
    ExecuteJob,
    ParentRecovery,
    RecoveryAwait,
    NodeRestart,
};

inline constexpr std::size_t kLifecycleStateCount = 8;

const char* to_string(LifecycleState s);
std::optional<LifecycleState> parse_lifecycle_state(std::string_view text);

/// Attached to the tree and doing normal work.
constexpr bool is_operational(LifecycleState s) {
    return s == LifecycleState::Active || s == LifecycleState::ExecuteJob;
}

enum class LifecycleEvent : std::uint8_t {
    Start,
    CandidatesFound,
    NoCandidates,
    Connected,
    CandidatesExhausted,
    JobStarted,
    JobFinished,
    ParentLost,
    Reattached,
    RecoveryFailed,
    RestartComplete,
    TopologyBreakAlert,   // TBA received
    TopologyRestored,     // TRN received
    ParentReset,          // PRN received
    RootUnreachable,      // routing safeguard: odd root sequence number
    RootReachable,        // routing safeguard: root route valid again
};

const char* to_string(LifecycleEvent e);

enum class LifecycleAction : std::uint8_t {
    BeginScan,
    RetryScanLater,
    BeginJoin,
    ReportIntegration,
    BeginRecovery,
    SendTbaToChildren,
    SendTrnToChildren,
    SendPrnToChildren,
    ResetNetworkState,
    RefreshOwnRoute,
    ReportRecovery,
};

const char* to_string(LifecycleAction a);

struct Transition {
    LifecycleState next;
    std::vector<LifecycleAction> actions;
    /// False when the event is meaningless in the current state; the caller
    /// ignores it and notes it in the trace.
    bool valid = true;
};

/// Pure state-machine step.
Transition transition(LifecycleState state, LifecycleEvent event, bool is_root);

/// Fixed-capacity ring of pending lifecycle events. When full the oldest event
/// is overwritten; pushing never fails.
class EventBuffer {
public:
    static constexpr std::size_t kDefaultCapacity = 32;

    explicit EventBuffer(std::size_t capacity = kDefaultCapacity);

    void push(LifecycleEvent e);
    std::optional<LifecycleEvent> pop();

    [[nodiscard]] std::size_t size() const { return count_; }
    [[nodiscard]] bool empty() const { return count_ == 0; }
    [[nodiscard]] std::size_t capacity() const { return slots_.size(); }
    [[nodiscard]] std::uint64_t overwritten() const { return overwritten_; }

private:
    std::vector<LifecycleEvent> slots_;
    std::size_t head_ = 0;
    std::size_t count_ = 0;
    std::uint64_t overwritten_ = 0;
};

/// Parent Info Response body: what a joining node needs to rank candidates.
struct ParentInfo {
    std::uint8_t hops_to_root = 0;
    std::uint8_t child_count = 0;
    LifecycleState state = LifecycleState::Init;
    std::uint8_t max_children = 0;

    /// Only nodes attached to a live tree may adopt children.
    [[nodiscard]] bool eligible() const;
};

std::vector<std::uint8_t> encode_parent_info(const ParentInfo& info);
std::optional<ParentInfo> decode_parent_info(std::span<const std::uint8_t> payload);

/// Child Registration Request answer.
struct RegistrationAnswer {
    bool accepted = false;
    IpAddress sta_ip;
};

std::vector<std::uint8_t> encode_registration_answer(const RegistrationAnswer& a);
std::optional<RegistrationAnswer> decode_registration_answer(std::span<const std::uint8_t> payload);

/// A candidate parent as seen by a joining node.
struct Candidate {
    IpAddress ap_ip;
    double quality = 1.0;
    std::optional<ParentInfo> info;
};

/// Default preference: fewest hops to root, then fewest children, then best
/// link quality, then lowest AP address. Candidates without an eligible
/// answer are dropped.
std::vector<Candidate> rank_candidates(std::vector<Candidate> candidates);

/// Time spent in each state, in milliseconds.
using StateDurations = std::array<TimeMs, kLifecycleStateCount>;

struct LifecycleTimers {
    TimeMs pdr_window = 2000;
    TimeMs crr_ack_timeout = 1000;
    int crr_retries = 2;
    int max_recovery_attempts = 3;
    TimeMs search_retry = 1000;
    TimeMs child_confirm_timeout = 3000;
    std::size_t event_buffer_capacity = EventBuffer::kDefaultCapacity;
};

}  // namespace hermes
