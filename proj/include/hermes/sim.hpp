#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hermes/types.hpp"

namespace hermes {

enum class EventKind : std::uint8_t {
    FrameDelivery,
    Timer,
    NodeStart,
    NodeKill,
    LinkChange,
    Observation,
};

const char* to_string(EventKind kind);

class SchedulingError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// One line of the observation stream: `t=<ms> node=<id> kind=<...> detail=<...>`.
struct TraceRecord {
    TimeMs t = 0;
    NodeId node = kEnvironment;
    std::string kind;
    std::string detail;

    [[nodiscard]] std::string to_line() const;
    /// Inverse of to_line(); returns false on a malformed line.
    static bool parse(std::string_view line, TraceRecord& out);
};

class Trace {
public:
    void emit(TimeMs t, NodeId node, std::string kind, std::string detail);
    [[nodiscard]] const std::vector<TraceRecord>& records() const { return records_; }
    [[nodiscard]] std::string to_text() const;
    void set_listener(std::function<void(const TraceRecord&)> fn) { listener_ = std::move(fn); }

private:
    std::vector<TraceRecord> records_;
    std::function<void(const TraceRecord&)> listener_;
};

/// Ticket returned by Simulator::schedule; identifies the queue slot for cancellation.
struct Ticket {
    TimeMs fire_at = 0;
    std::uint64_t seq = 0;
};

/// Deterministic discrete-event engine. Events with equal fire_at run in
/// insertion order. The clock only moves when an event is consumed.
class Simulator {
public:
    using Handler = std::function<void()>;

    enum class StepResult { Consumed, Exhausted };

    Ticket schedule(TimeMs fire_at, NodeId target, EventKind kind, Handler handler);
    Ticket schedule_in(TimeMs delay, NodeId target, EventKind kind, Handler handler) {
        return schedule(now_ + delay, target, kind, std::move(handler));
    }
    bool cancel(const Ticket& ticket);

    StepResult step();
    /// Consumes every queued event with fire_at <= until, then moves the
    /// clock to `until`. Returns the count.
    std::size_t run_until(TimeMs until);

    [[nodiscard]] TimeMs now() const { return now_; }
    [[nodiscard]] std::size_t pending() const { return queue_.size(); }
    [[nodiscard]] std::uint64_t consumed() const { return consumed_; }
    [[nodiscard]] std::optional<TimeMs> next_fire_time() const;

    /// Kind and target of the most recently consumed event.
    [[nodiscard]] EventKind last_kind() const { return last_kind_; }
    [[nodiscard]] NodeId last_target() const { return last_target_; }

private:
    struct Slot {
        NodeId target;
        EventKind kind;
        Handler handler;
    };

    std::map<std::pair<TimeMs, std::uint64_t>, Slot> queue_;
    TimeMs now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t consumed_ = 0;
    EventKind last_kind_ = EventKind::Timer;
    NodeId last_target_ = kEnvironment;
};

/// splitmix64 finalizer; used to derive independent substream seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Seed for the substream identified by (global seed, stream key).
std::uint64_t derive_stream_seed(std::uint64_t global_seed, std::uint64_t stream_key);

/// Deterministic generator. Built on std::mt19937_64, whose output sequence is
/// fixed by the standard, with hand-rolled reductions so the draws do not depend
/// on the library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform on [0, 1) with 53 bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    /// Uniform integer on [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

private:
    std::mt19937_64 engine_;
};

struct LinkParams {
    double loss_probability = 0.0;
    TimeMs latency_base = 15;
    TimeMs latency_jitter = 10;
    /// Stands in for RSSI when ranking scan results.
    double quality = 1.0;
};

enum class DropReason : std::uint8_t { Loss, NoVisibility, SenderDown, ReceiverDown, Filtered };

const char* to_string(DropReason reason);

struct LinkCounters {
    std::uint64_t transmitted = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t in_flight = 0;
};

/// Virtual radio: symmetric visibility, per-pair link parameters and one
/// seeded substream per directed link.
///
/// Draw order per transmit on link (from, to): one uniform01() for the loss
/// test; if the frame survives and latency_jitter > 0, one uniform_int over
/// [-jitter, +jitter]. Latency is clamped at zero.
class Radio {
public:
    /// Called at delivery time; returns false if the receiver refused the frame.
    using DeliveryFn = std::function<bool(std::vector<std::uint8_t>)>;

    Radio(Simulator& sim, Trace& trace, std::uint64_t seed, LinkParams defaults);

    void set_visibility(NodeId a, NodeId b, bool visible);
    [[nodiscard]] bool visible(NodeId a, NodeId b) const;
    [[nodiscard]] std::vector<NodeId> visible_from(NodeId a) const;

    void set_link_params(NodeId a, NodeId b, const LinkParams& params);
    [[nodiscard]] const LinkParams& params(NodeId a, NodeId b) const;
    [[nodiscard]] const LinkParams& defaults() const { return defaults_; }

    enum class TxOutcome { Scheduled, Dropped };

    /// Sends one frame across a single radio hop. No retransmission here.
    TxOutcome transmit(NodeId from, NodeId to, std::vector<std::uint8_t> frame, bool sender_up,
                       DeliveryFn on_delivery);

    /// Records a drop decided outside the radio (fault filters).
    void record_filtered(NodeId from, NodeId to, std::size_t bytes);

    [[nodiscard]] LinkCounters counters(NodeId from, NodeId to) const;
    [[nodiscard]] LinkCounters totals() const { return totals_; }

    static std::uint64_t link_key(NodeId from, NodeId to) {
        return (std::uint64_t{from} << 32) | to;
    }

private:
    Rng& stream(NodeId from, NodeId to);
    void count_drop(NodeId from, NodeId to, std::size_t bytes, DropReason reason);

    Simulator& sim_;
    Trace& trace_;
    std::uint64_t seed_;
    LinkParams defaults_;
    std::map<std::pair<NodeId, NodeId>, bool> visibility_;
    std::map<std::pair<NodeId, NodeId>, LinkParams> params_;
    std::map<std::uint64_t, Rng> streams_;
    std::map<std::uint64_t, LinkCounters> counters_;
    LinkCounters totals_;
};

}  // namespace hermes
