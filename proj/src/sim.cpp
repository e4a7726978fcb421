#include "hermes/sim.hpp"

#include <algorithm>
#include <charconv>

#include <fmt/format.h>

namespace hermes {

const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::FrameDelivery: return "frame-delivery";
        case EventKind::Timer: return "timer";
        case EventKind::NodeStart: return "node-start";
        case EventKind::NodeKill: return "node-kill";
        case EventKind::LinkChange: return "link-change";
        case EventKind::Observation: return "observation";
    }
    return "?";
}

const char* to_string(DropReason reason) {
    switch (reason) {
        case DropReason::Loss: return "loss";
        case DropReason::NoVisibility: return "no-visibility";
        case DropReason::SenderDown: return "sender-down";
        case DropReason::ReceiverDown: return "receiver-down";
        case DropReason::Filtered: return "filtered";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Trace

std::string TraceRecord::to_line() const {
    if (node == kEnvironment) return fmt::format("t={} node=env kind={} detail={}", t, kind, detail);
    return fmt::format("t={} node={} kind={} detail={}", t, node, kind, detail);
}

bool TraceRecord::parse(std::string_view line, TraceRecord& out) {
    auto take_field = [&](std::string_view key, std::string_view& value) {
        if (line.substr(0, key.size()) != key) return false;
        line.remove_prefix(key.size());
        const auto space = line.find(' ');
        if (space == std::string_view::npos) return false;
        value = line.substr(0, space);
        line.remove_prefix(space + 1);
        return true;
    };
    std::string_view t_text;
    std::string_view node_text;
    std::string_view kind_text;
    if (!take_field("t=", t_text) || !take_field("node=", node_text) ||
        !take_field("kind=", kind_text)) {
        return false;
    }
    if (line.substr(0, 7) != "detail=") return false;
    line.remove_prefix(7);
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);

    TimeMs t = 0;
    auto [p, ec] = std::from_chars(t_text.data(), t_text.data() + t_text.size(), t);
    if (ec != std::errc{} || p != t_text.data() + t_text.size()) return false;
    NodeId node = kEnvironment;
    if (node_text != "env") {
        auto [q, ec2] = std::from_chars(node_text.data(), node_text.data() + node_text.size(), node);
        if (ec2 != std::errc{} || q != node_text.data() + node_text.size()) return false;
    }
    out.t = t;
    out.node = node;
    out.kind = std::string(kind_text);
    out.detail = std::string(line);
    return true;
}

void Trace::emit(TimeMs t, NodeId node, std::string kind, std::string detail) {
    records_.push_back(TraceRecord{t, node, std::move(kind), std::move(detail)});
    if (listener_) listener_(records_.back());
}

std::string Trace::to_text() const {
    std::string text;
    for (const auto& r : records_) {
        text += r.to_line();
        text += '\n';
    }
    return text;
}

// ---------------------------------------------------------------------------
// Simulator

Ticket Simulator::schedule(TimeMs fire_at, NodeId target, EventKind kind, Handler handler) {
    if (fire_at < now_) {
        throw SchedulingError(
            fmt::format("event at t={} precedes current time t={}", fire_at, now_));
    }
    const Ticket ticket{fire_at, next_seq_++};
    queue_.emplace(std::make_pair(ticket.fire_at, ticket.seq),
                   Slot{target, kind, std::move(handler)});
    return ticket;
}

bool Simulator::cancel(const Ticket& ticket) {
    return queue_.erase(std::make_pair(ticket.fire_at, ticket.seq)) > 0;
}

Simulator::StepResult Simulator::step() {
    if (queue_.empty()) return StepResult::Exhausted;
    auto head = queue_.begin();
    now_ = head->first.first;
    Slot slot = std::move(head->second);
    queue_.erase(head);
    last_kind_ = slot.kind;
    last_target_ = slot.target;
    ++consumed_;
    if (slot.handler) slot.handler();
    return StepResult::Consumed;
}

std::size_t Simulator::run_until(TimeMs until) {
    std::size_t count = 0;
    while (!queue_.empty() && queue_.begin()->first.first <= until) {
        step();
        ++count;
    }
    if (until > now_) now_ = until;
    return count;
}

std::optional<TimeMs> Simulator::next_fire_time() const {
    if (queue_.empty()) return std::nullopt;
    return queue_.begin()->first.first;
}

// ---------------------------------------------------------------------------
// Seeded streams

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t derive_stream_seed(std::uint64_t global_seed, std::uint64_t stream_key) {
    return mix_seed(global_seed ^ mix_seed(stream_key));
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
}

// ---------------------------------------------------------------------------
// Radio

namespace {

std::pair<NodeId, NodeId> unordered(NodeId a, NodeId b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

}  // namespace

Radio::Radio(Simulator& sim, Trace& trace, std::uint64_t seed, LinkParams defaults)
    : sim_(sim), trace_(trace), seed_(seed), defaults_(defaults) {}

void Radio::set_visibility(NodeId a, NodeId b, bool visible) {
    if (a == b) throw std::invalid_argument(fmt::format("node {} cannot see itself", a));
    visibility_[unordered(a, b)] = visible;
}

bool Radio::visible(NodeId a, NodeId b) const {
    if (a == b) return false;
    auto it = visibility_.find(unordered(a, b));
    return it != visibility_.end() && it->second;
}

std::vector<NodeId> Radio::visible_from(NodeId a) const {
    std::vector<NodeId> out;
    for (const auto& [pair, vis] : visibility_) {
        if (!vis) continue;
        if (pair.first == a) out.push_back(pair.second);
        else if (pair.second == a) out.push_back(pair.first);
    }
    std::sort(out.begin(), out.end());
    return out;
}

void Radio::set_link_params(NodeId a, NodeId b, const LinkParams& params) {
    params_[unordered(a, b)] = params;
}

const LinkParams& Radio::params(NodeId a, NodeId b) const {
    auto it = params_.find(unordered(a, b));
    return it == params_.end() ? defaults_ : it->second;
}

Rng& Radio::stream(NodeId from, NodeId to) {
    const auto key = link_key(from, to);
    auto it = streams_.find(key);
    if (it == streams_.end()) it = streams_.emplace(key, Rng{derive_stream_seed(seed_, key)}).first;
    return it->second;
}

void Radio::count_drop(NodeId from, NodeId to, std::size_t bytes, DropReason reason) {
    ++counters_[link_key(from, to)].dropped;
    ++totals_.dropped;
    trace_.emit(sim_.now(), from, "drop",
                fmt::format("to={} reason={} bytes={}", to, to_string(reason), bytes));
}

void Radio::record_filtered(NodeId from, NodeId to, std::size_t bytes) {
    ++counters_[link_key(from, to)].transmitted;
    ++totals_.transmitted;
    count_drop(from, to, bytes, DropReason::Filtered);
}

Radio::TxOutcome Radio::transmit(NodeId from, NodeId to, std::vector<std::uint8_t> frame,
                                 bool sender_up, DeliveryFn on_delivery) {
    auto& link = counters_[link_key(from, to)];
    ++link.transmitted;
    ++totals_.transmitted;
    const std::size_t bytes = frame.size();
    if (!sender_up) {
        count_drop(from, to, bytes, DropReason::SenderDown);
        return TxOutcome::Dropped;
    }
    if (!visible(from, to)) {
        count_drop(from, to, bytes, DropReason::NoVisibility);
        return TxOutcome::Dropped;
    }
    const LinkParams& lp = params(from, to);
    Rng& rng = stream(from, to);
    if (rng.uniform01() < lp.loss_probability) {
        count_drop(from, to, bytes, DropReason::Loss);
        return TxOutcome::Dropped;
    }
    TimeMs latency = lp.latency_base;
    if (lp.latency_jitter > 0) latency += rng.uniform_int(-lp.latency_jitter, lp.latency_jitter);
    latency = std::max<TimeMs>(latency, 0);

    ++link.in_flight;
    ++totals_.in_flight;
    sim_.schedule_in(latency, to, EventKind::FrameDelivery,
                     [this, from, to, bytes, frame = std::move(frame),
                      deliver = std::move(on_delivery)]() mutable {
                         auto& c = counters_[link_key(from, to)];
                         --c.in_flight;
                         --totals_.in_flight;
                         if (!visible(from, to)) {
                             count_drop(from, to, bytes, DropReason::NoVisibility);
                             return;
                         }
                         if (!deliver(std::move(frame))) {
                             count_drop(from, to, bytes, DropReason::ReceiverDown);
                             return;
                         }
                         ++c.delivered;
                         ++totals_.delivered;
                     });
    return TxOutcome::Scheduled;
}

LinkCounters Radio::counters(NodeId from, NodeId to) const {
    auto it = counters_.find(link_key(from, to));
    return it == counters_.end() ? LinkCounters{} : it->second;
}

}  // namespace hermes
