#include "hermes/lifecycle.hpp"

#include <algorithm>
#include <tuple>

#include "hermes/envelope.hpp"
#include "hermes/routing.hpp"

namespace hermes {

const char* to_string(LifecycleState s) {
    switch (s) {
        case LifecycleState::Init: return "Init";
        case LifecycleState::Search: return "Search";
        case LifecycleState::JoinNetwork: return "JoinNetwork";
        case LifecycleState::Active: return "Active";
        case LifecycleState::ExecuteJob: return "ExecuteJob";
        case LifecycleState::ParentRecovery: return "ParentRecovery";
        case LifecycleState::RecoveryAwait: return "RecoveryAwait";
        case LifecycleState::NodeRestart: return "NodeRestart";
    }
    return "?";
}

std::optional<LifecycleState> parse_lifecycle_state(std::string_view text) {
    for (std::size_t i = 0; i < kLifecycleStateCount; ++i) {
        const auto s = static_cast<LifecycleState>(i);
        if (text == to_string(s)) return s;
    }
    return std::nullopt;
}

const char* to_string(LifecycleEvent e) {
    switch (e) {
        case LifecycleEvent::Start: return "start";
        case LifecycleEvent::CandidatesFound: return "candidates-found";
        case LifecycleEvent::NoCandidates: return "no-candidates";
        case LifecycleEvent::Connected: return "connected";
        case LifecycleEvent::CandidatesExhausted: return "candidates-exhausted";
        case LifecycleEvent::JobStarted: return "job-started";
        case LifecycleEvent::JobFinished: return "job-finished";
        case LifecycleEvent::ParentLost: return "parent-lost";
        case LifecycleEvent::Reattached: return "reattached";
        case LifecycleEvent::RecoveryFailed: return "recovery-failed";
        case LifecycleEvent::RestartComplete: return "restart-complete";
        case LifecycleEvent::TopologyBreakAlert: return "tba";
        case LifecycleEvent::TopologyRestored: return "trn";
        case LifecycleEvent::ParentReset: return "prn";
        case LifecycleEvent::RootUnreachable: return "root-unreachable";
        case LifecycleEvent::RootReachable: return "root-reachable";
    }
    return "?";
}

const char* to_string(LifecycleAction a) {
    switch (a) {
        case LifecycleAction::BeginScan: return "begin-scan";
        case LifecycleAction::RetryScanLater: return "retry-scan-later";
        case LifecycleAction::BeginJoin: return "begin-join";
        case LifecycleAction::ReportIntegration: return "report-integration";
        case LifecycleAction::BeginRecovery: return "begin-recovery";
        case LifecycleAction::SendTbaToChildren: return "send-tba";
        case LifecycleAction::SendTrnToChildren: return "send-trn";
        case LifecycleAction::SendPrnToChildren: return "send-prn";
        case LifecycleAction::ResetNetworkState: return "reset-network-state";
        case LifecycleAction::RefreshOwnRoute: return "refresh-own-route";
        case LifecycleAction::ReportRecovery: return "report-recovery";
    }
    return "?";
}

Transition transition(LifecycleState state, LifecycleEvent event, bool is_root) {
    using S = LifecycleState;
    using E = LifecycleEvent;
    using A = LifecycleAction;
    const Transition ignored{state, {}, false};
    auto stay = [&] { return Transition{state, {}, true}; };

    if (is_root) {
        switch (state) {
            case S::Init:
                return event == E::Start ? Transition{S::Active, {}} : ignored;
            case S::Active:
                return event == E::JobStarted ? Transition{S::ExecuteJob, {}} : ignored;
            case S::ExecuteJob:
                if (event == E::JobFinished) return {S::Active, {}};
                if (event == E::JobStarted) return stay();
                return ignored;
            default:
                return ignored;
        }
    }

    switch (state) {
        case S::Init:
            if (event == E::Start) return {S::Search, {A::BeginScan}};
            return ignored;

        case S::Search:
            if (event == E::CandidatesFound) return {S::JoinNetwork, {A::BeginJoin}};
            if (event == E::NoCandidates) return {S::Search, {A::RetryScanLater}};
            return ignored;

        case S::JoinNetwork:
            if (event == E::Connected) return {S::Active, {A::ReportIntegration}};
            if (event == E::CandidatesExhausted || event == E::ParentLost || event == E::ParentReset) {
                return {S::Search, {A::RetryScanLater}};
            }
            return ignored;

        case S::Active:
        case S::ExecuteJob:
            if (event == E::JobStarted) return {S::ExecuteJob, {}};
            if (event == E::JobFinished) {
                return state == S::ExecuteJob ? Transition{S::Active, {}} : ignored;
            }
            if (event == E::ParentLost || event == E::ParentReset) {
                return {S::ParentRecovery, {A::SendTbaToChildren, A::BeginRecovery}};
            }
            if (event == E::TopologyBreakAlert || event == E::RootUnreachable) {
                return {S::RecoveryAwait, {A::SendTbaToChildren}};
            }
            if (event == E::TopologyRestored || event == E::RootReachable) return stay();
            return ignored;

        case S::ParentRecovery:
            if (event == E::Reattached) {
                return {S::Active, {A::SendTrnToChildren, A::ReportRecovery}};
            }
            if (event == E::RecoveryFailed) {
                return {S::NodeRestart, {A::SendPrnToChildren, A::ResetNetworkState}};
            }
            if (event == E::TopologyBreakAlert || event == E::TopologyRestored ||
                event == E::RootUnreachable || event == E::RootReachable ||
                event == E::ParentReset || event == E::ParentLost) {
                return stay();
            }
            return ignored;

        case S::RecoveryAwait:
            if (event == E::TopologyRestored || event == E::RootReachable) {
                return {S::Active, {A::SendTrnToChildren, A::RefreshOwnRoute}};
            }
            if (event == E::ParentReset || event == E::ParentLost) return {S::ParentRecovery, {A::BeginRecovery}};
            if (event == E::TopologyBreakAlert || event == E::RootUnreachable) return stay();
            return ignored;

        case S::NodeRestart:
            if (event == E::RestartComplete) return {S::Search, {A::BeginScan}};
            return ignored;
    }
    return ignored;
}

EventBuffer::EventBuffer(std::size_t capacity) : slots_(std::max<std::size_t>(capacity, 1)) {}

void EventBuffer::push(LifecycleEvent e) {
    const std::size_t cap = slots_.size();
    if (count_ == cap) {
        // Overwrite the oldest entry.
        slots_[head_] = e;
        head_ = (head_ + 1) % cap;
        ++overwritten_;
        return;
    }
    slots_[(head_ + count_) % cap] = e;
    ++count_;
}

std::optional<LifecycleEvent> EventBuffer::pop() {
    if (count_ == 0) return std::nullopt;
    const LifecycleEvent e = slots_[head_];
    head_ = (head_ + 1) % slots_.size();
    --count_;
    return e;
}

bool ParentInfo::eligible() const {
    return is_operational(state) && hops_to_root != kInfiniteHops && child_count < max_children;
}

std::vector<std::uint8_t> encode_parent_info(const ParentInfo& info) {
    ByteWriter w;
    w.u8(info.hops_to_root);
    w.u8(info.child_count);
    w.u8(static_cast<std::uint8_t>(info.state));
    w.u8(info.max_children);
    return w.take();
}

std::optional<ParentInfo> decode_parent_info(std::span<const std::uint8_t> payload) {
    ByteReader r(payload);
    ParentInfo info;
    info.hops_to_root = r.u8();
    info.child_count = r.u8();
    const auto state = r.u8();
    info.max_children = r.u8();
    if (!r.ok() || !r.at_end() || state >= kLifecycleStateCount) return std::nullopt;
    info.state = static_cast<LifecycleState>(state);
    return info;
}

std::vector<std::uint8_t> encode_registration_answer(const RegistrationAnswer& a) {
    ByteWriter w;
    w.u8(a.accepted ? 0 : 1);
    w.ip(a.sta_ip);
    return w.take();
}

std::optional<RegistrationAnswer> decode_registration_answer(std::span<const std::uint8_t> payload) {
    ByteReader r(payload);
    const auto status = r.u8();
    const auto ip = r.ip();
    if (!r.ok() || !r.at_end() || status > 1) return std::nullopt;
    return RegistrationAnswer{status == 0, ip};
}

std::vector<Candidate> rank_candidates(std::vector<Candidate> candidates) {
    std::erase_if(candidates, [](const Candidate& c) { return !c.info || !c.info->eligible(); });
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        return std::make_tuple(a.info->hops_to_root, a.info->child_count, -a.quality, a.ap_ip) <
               std::make_tuple(b.info->hops_to_root, b.info->child_count, -b.quality, b.ap_ip);
    });
    return candidates;
}

}  // namespace hermes
