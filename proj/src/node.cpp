#include "hermes/node.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace hermes {

namespace {

Envelope control_frame(Category cat, std::uint8_t type, IpAddress src, IpAddress dst, std::uint32_t id,
                       std::vector<std::uint8_t> payload = {}) {
    Envelope env;
    env.category = cat;
    env.type = type;
    env.src = src;
    env.dst = dst;
    env.id = id;
    env.payload = std::move(payload);
    return env;
}

}  // namespace

Node::Node(NodeConfig cfg, Environment& env, std::unique_ptr<Strategy> strategy, std::unique_ptr<NnApp> app)
    : cfg_(std::move(cfg)),
      env_(env),
      strategy_(std::move(strategy)),
      app_(std::move(app)),
      ap_(cfg_.mac, cfg_.profile.max_children),
      table_(derive_ap_ip(cfg_.mac)),
      events_(cfg_.timers.event_buffer_capacity) {
    strategy_->bind(*this, [this](Envelope e) { local_data(e); });
    if (app_) app_->bind(*this, *strategy_);
}

std::optional<IpAddress> Node::parent() const {
    if (sta_.state() != StaState::Connected) return std::nullopt;
    return sta_.parent();
}

std::vector<IpAddress> Node::children() const {
    std::vector<IpAddress> out;
    for (const auto& [ap, lease] : ap_.children()) out.push_back(ap);
    return out;
}

std::optional<int> Node::hops_to(IpAddress dest) const {
    if (dest == self()) return 0;
    const auto* e = table_.find(dest);
    if (e == nullptr || !e->reachable()) return std::nullopt;
    return e->hops;
}

ChildMap Node::child_map() const {
    ChildMap out;
    for (const auto& [ap, lease] : ap_.children()) out.emplace(ap, lease.sta_ip);
    return out;
}

bool Node::is_neighbor(IpAddress ap) const { return parent() == ap || ap_.has_child(ap); }

void Node::after(TimeMs delay, std::function<void()> fn) {
    env_.sim().schedule_in(std::max<TimeMs>(delay, 0), cfg_.id, EventKind::Timer,
                           [this, epoch = epoch_, fn = std::move(fn)] {
                               if (alive_ && epoch == epoch_) fn();
                           });
}

void Node::compute(TimeMs work, std::function<void()> fn) {
    const TimeMs start = std::max(now(), busy_until_);
    busy_until_ = start + std::max<TimeMs>(work, 0);
    after(busy_until_ - now(), std::move(fn));
}

void Node::trace(std::string kind, std::string detail) { env_.emit(cfg_.id, std::move(kind), std::move(detail)); }

StateDurations Node::durations() const {
    StateDurations d = durations_;
    if (started_) d[static_cast<std::size_t>(state_)] += now() - state_entered_;
    return d;
}

// ---------------------------------------------------------------------------
// Start and stop

void Node::start() {
    if (started_) return;
    started_ = true;
    alive_ = true;
    state_ = LifecycleState::Init;
    state_entered_ = now();
    ap_.start();
    trace("node", fmt::format("ip={} mac={} kind={} root={} capacity={}", self().to_string(), cfg_.mac.to_string(),
                              to_string(cfg_.profile.kind), cfg_.is_root ? 1 : 0, cfg_.profile.capacity));
    push_event(LifecycleEvent::Start);
    after(cfg_.routing_period, [this] { routing_tick(); });
}

void Node::kill() {
    if (!alive_) return;
    alive_ = false;
    ++epoch_;
    trace("killed", fmt::format("state={}", to_string(state_)));
}

// ---------------------------------------------------------------------------
// Lifecycle engine

void Node::push_event(LifecycleEvent e) {
    events_.push(e);
    if (draining_) return;
    draining_ = true;
    after(cfg_.profile.state_handling, [this] { drain_events(); });
}

void Node::drain_events() {
    draining_ = false;
    const auto e = events_.pop();
    if (!e) return;
    const auto t = transition(state_, *e, cfg_.is_root);
    if (!t.valid) {
        trace("event-ignored", fmt::format("state={} event={}", to_string(state_), to_string(*e)));
    } else {
        if (t.next != state_) set_state(t.next);
        for (auto a : t.actions) run_action(a);
    }
    if (!events_.empty() && !draining_) {
        draining_ = true;
        after(cfg_.profile.state_handling, [this] { drain_events(); });
    }
}

void Node::set_state(LifecycleState next) {
    const auto prev = state_;
    durations_[static_cast<std::size_t>(prev)] += now() - state_entered_;
    state_ = next;
    state_entered_ = now();
    trace("state", fmt::format("from={} to={}", to_string(prev), to_string(next)));
    if (next == LifecycleState::Active) {
        active_pending_ = true;
        attached_pending_ = prev == LifecycleState::JoinNetwork || prev == LifecycleState::ParentRecovery;
        if (cfg_.is_root || hops_to(cfg_.root)) announce_active();
    }
}

void Node::announce_active() {
    if (!active_pending_ || state_ != LifecycleState::Active) return;
    active_pending_ = false;
    if (attached_pending_) strategy_->on_attached();
    attached_pending_ = false;
    if (!strategy_started_) {
        strategy_started_ = true;
        strategy_->start();
    }
    if (app_) app_->on_active();
}

void Node::run_action(LifecycleAction a) {
    switch (a) {
        case LifecycleAction::BeginScan:
            begin_scan(false);
            break;
        case LifecycleAction::RetryScanLater:
            after(cfg_.timers.search_retry, [this, sid = ++session_seq_] {
                if (sid == session_seq_ && state_ == LifecycleState::Search) begin_scan(false);
            });
            break;
        case LifecycleAction::BeginJoin:
            begin_join();
            break;
        case LifecycleAction::ReportIntegration: {
            const auto d = durations();
            const TimeMs init = d[static_cast<std::size_t>(LifecycleState::Init)];
            const TimeMs search = d[static_cast<std::size_t>(LifecycleState::Search)];
            const TimeMs join = d[static_cast<std::size_t>(LifecycleState::JoinNetwork)];
            trace("integration", fmt::format("init={} search={} join={} total={}", init, search, join,
                                              init + search + join));
            ByteWriter w;
            w.u32(static_cast<std::uint32_t>(init));
            w.u32(static_cast<std::uint32_t>(search));
            w.u32(static_cast<std::uint32_t>(join));
            report_to_root(monitoring_type::kStateDurations, w.take(), 0);
            break;
        }
        case LifecycleAction::BeginRecovery:
            if (!recovery_started_) recovery_started_ = now();
            recovery_attempt_ = 0;
            start_recovery_attempt();
            break;
        case LifecycleAction::SendTbaToChildren:
            if (!recovery_started_ && state_ == LifecycleState::RecoveryAwait) recovery_started_ = now();
            notify_children(lifecycle_type::kTba);
            break;
        case LifecycleAction::SendTrnToChildren:
            notify_children(lifecycle_type::kTrn);
            break;
        case LifecycleAction::SendPrnToChildren:
            notify_children(lifecycle_type::kPrn);
            break;
        case LifecycleAction::ResetNetworkState:
            reset_network_state();
            break;
        case LifecycleAction::RefreshOwnRoute:
            recovery_started_.reset();
            propagate({}, std::nullopt);
            break;
        case LifecycleAction::ReportRecovery: {
            const TimeMs duration = recovery_started_ ? now() - *recovery_started_ : 0;
            recovery_started_.reset();
            trace("recovery", fmt::format("duration={} parent={}", duration,
                                          parent() ? parent()->to_string() : "-"));
            ByteWriter w;
            w.u32(static_cast<std::uint32_t>(duration));
            report_to_root(monitoring_type::kRecovery, w.take(), 0);
            break;
        }
    }
}

void Node::notify_children(std::uint8_t type) {
    for (const auto& c : children()) {
        send_to_neighbor(c, control_frame(Category::Lifecycle, type, self(), c, next_message_id()));
    }
}

// ---------------------------------------------------------------------------
// Join and recovery

void Node::begin_scan(bool recover) {
    const auto sid = ++session_seq_;
    session_ = JoinSession{};
    session_.id = sid;
    session_.recover = recover;
    after(cfg_.profile.scan_duration, [this, sid] {
        if (sid != session_.id) return;
        const auto results = env_.scan(cfg_.id);
        std::string list;
        for (const auto& r : results) {
            session_.candidates.push_back(Candidate{r.ap_ip, r.quality, std::nullopt});
            list += (list.empty() ? "" : ",") + r.ap_ip.to_string();
        }
        trace("scan", fmt::format("found={} candidates={}", results.size(), list.empty() ? "-" : list));
        if (session_.recover) {
            if (results.empty()) {
                join_exhausted();
            } else {
                begin_join();
            }
            return;
        }
        push_event(results.empty() ? LifecycleEvent::NoCandidates : LifecycleEvent::CandidatesFound);
    });
}

void Node::begin_join() {
    if (session_.candidates.empty()) {
        join_exhausted();
        return;
    }
    session_.collecting = true;
    session_.answers = 0;
    for (const auto& c : session_.candidates) {
        send_direct(c.ap_ip, control_frame(Category::Lifecycle, lifecycle_type::kPdr, self(), c.ap_ip, next_message_id()));
    }
    after(cfg_.timers.pdr_window, [this, sid = session_.id] { finish_collect(sid); });
}

void Node::finish_collect(std::uint64_t sid) {
    if (sid != session_.id || !session_.collecting) return;
    session_.collecting = false;
    session_.ranked = rank_candidates(session_.candidates);
    session_.index = 0;
    std::string list;
    for (const auto& c : session_.ranked) list += (list.empty() ? "" : ",") + c.ap_ip.to_string();
    trace("candidates", fmt::format("answered={} eligible={}", session_.answers, list.empty() ? "-" : list));
    try_next_candidate();
}

void Node::try_next_candidate() {
    if (session_.index >= session_.ranked.size()) {
        join_exhausted();
        return;
    }
    session_.tries = 0;
    send_crr();
}

void Node::send_crr() {
    const auto target = session_.ranked[session_.index].ap_ip;
    session_.awaiting_ack = true;
    const auto token = ++session_.crr_token;
    sta_.begin_connect(target);
    send_direct(target, control_frame(Category::Lifecycle, lifecycle_type::kCrr, self(), target, next_message_id()));
    after(cfg_.timers.crr_ack_timeout, [this, sid = session_.id, token] {
        if (sid != session_.id || !session_.awaiting_ack || token != session_.crr_token) return;
        if (++session_.tries <= cfg_.timers.crr_retries) {
            send_crr();
            return;
        }
        session_.awaiting_ack = false;
        sta_.disconnect();
        trace("crr-timeout", fmt::format("candidate={}", session_.ranked[session_.index].ap_ip.to_string()));
        ++session_.index;
        try_next_candidate();
    });
}

void Node::join_exhausted() {
    sta_.disconnect();
    if (session_.recover) {
        trace("recovery-attempt-failed", fmt::format("attempt={}", recovery_attempt_));
        after(cfg_.timers.search_retry, [this, sid = session_.id] {
            if (sid == session_.id && state_ == LifecycleState::ParentRecovery) start_recovery_attempt();
        });
        return;
    }
    push_event(LifecycleEvent::CandidatesExhausted);
}

void Node::start_recovery_attempt() {
    if (++recovery_attempt_ > cfg_.timers.max_recovery_attempts) {
        push_event(LifecycleEvent::RecoveryFailed);
        return;
    }
    begin_scan(true);
}

void Node::attach(IpAddress parent_ap, IpAddress sta_ip) {
    sta_.connected(parent_ap, sta_ip);
    env_.link_up(cfg_.id, parent_ap);
    heard_from_parent_ = false;
    table_.bump_own_seq();
    trace("parent", fmt::format("parent={} sta={} purpose={}", parent_ap.to_string(), sta_ip.to_string(),
                                session_.recover ? "recover" : "join"));
    send_hello(0);

    if (!session_.recover && strategy_->selects_parent() && !session_.parent_chosen) {
        session_.parent_chosen = true;
        std::vector<IpAddress> candidates;
        for (const auto& c : session_.ranked) candidates.push_back(c.ap_ip);
        strategy_->request_parent(parent_ap, candidates, [this, sid = session_.id, parent_ap](std::optional<IpAddress> assigned) {
            if (sid != session_.id || parent() != parent_ap) return;
            const bool known = assigned && std::any_of(session_.ranked.begin(), session_.ranked.end(),
                                                       [&](const Candidate& c) { return c.ap_ip == *assigned; });
            if (!assigned || *assigned == parent_ap || !known) {
                trace("topology-parent", fmt::format("parent={} switched=0 decided={}", parent_ap.to_string(),
                                                     assigned ? 1 : 0));
                finish_attach();
                return;
            }
            trace("topology-parent", fmt::format("parent={} switched=1 from={}", assigned->to_string(),
                                                 parent_ap.to_string()));
            env_.detach_from_parent(cfg_.id);
            sta_.disconnect();
            table_.clear_except_self();
            std::stable_partition(session_.ranked.begin(), session_.ranked.end(),
                                  [&](const Candidate& c) { return c.ap_ip == *assigned; });
            session_.index = 0;
            try_next_candidate();
        });
        return;
    }
    finish_attach();
}

void Node::finish_attach() {
    push_event(session_.recover ? LifecycleEvent::Reattached : LifecycleEvent::Connected);
}

void Node::send_hello(int attempt) {
    const auto p = parent();
    if (!p || heard_from_parent_) return;
    send_full_table(*p);
    if (attempt >= cfg_.hello_retries) return;
    after(cfg_.hello_retry, [this, p, attempt] {
        if (parent() == p) send_hello(attempt + 1);
    });
}

void Node::lose_parent(LifecycleEvent cause) {
    const auto p = sta_.parent();
    if (!p) return;
    if (sta_.state() == StaState::Connected) env_.detach_from_parent(cfg_.id);
    sta_.disconnect();
    trace("parent-lost", fmt::format("parent={} cause={}", p->to_string(), to_string(cause)));
    if (is_operational(state_) || (state_ == LifecycleState::RecoveryAwait && !recovery_started_)) {
        recovery_started_ = now();
    }
    const auto invalid = table_.mark_neighbor_unreachable(*p);
    if (!invalid.empty()) propagate(invalid, std::nullopt);
    // Abandon whatever join exchange was in flight.
    if (state_ == LifecycleState::JoinNetwork) session_.id = ++session_seq_;
    push_event(cause);
}

void Node::on_parent_lost(IpAddress parent_ap) {
    if (!alive_ || sta_.parent() != parent_ap) return;
    lose_parent(LifecycleEvent::ParentLost);
}

void Node::on_child_left(IpAddress child_ap) {
    if (!alive_ || !ap_.has_child(child_ap)) return;
    ap_.release(child_ap);
    trace("child-left", fmt::format("child={}", child_ap.to_string()));
    const auto invalid = table_.mark_neighbor_unreachable(child_ap);
    if (!invalid.empty()) propagate(invalid, std::nullopt);
    strategy_->on_child_left(child_ap);
}

void Node::reset_network_state() {
    for (const auto& c : children()) env_.release_child(cfg_.id, c);
    ap_.stop();
    ap_.start();
    if (sta_.state() == StaState::Connected) env_.detach_from_parent(cfg_.id);
    sta_.disconnect();
    table_.clear_except_self();
    strategy_->on_reset();
    recovery_started_.reset();
    ++session_seq_;
    session_ = JoinSession{};
    session_.id = session_seq_;
    trace("restart", fmt::format("table={}", table_.size()));
    push_event(LifecycleEvent::RestartComplete);
}

// ---------------------------------------------------------------------------
// Routing

std::uint8_t Node::hops_to_root() const {
    if (cfg_.is_root) return 0;
    const auto h = hops_to(cfg_.root);
    return h ? static_cast<std::uint8_t>(*h) : kInfiniteHops;
}

void Node::routing_tick() {
    ++tick_;
    const auto kind = cfg_.fru_every > 0 && tick_ % static_cast<std::uint64_t>(cfg_.fru_every) == 0
                          ? UpdateKind::Full
                          : UpdateKind::Partial;
    send_update(table_.build_update(kind, cfg_.fru_threshold), std::nullopt);
    after(cfg_.routing_period, [this] { routing_tick(); });
}

void Node::send_update(const RoutingUpdate& update, std::optional<IpAddress> except) {
    const auto type = update.kind == UpdateKind::Full ? routing_type::kFru : routing_type::kPru;
    const auto payload = encode_advertisements(update.advertised);
    std::vector<IpAddress> targets;
    if (auto p = parent(); p && p != except) targets.push_back(*p);
    for (const auto& c : children()) {
        if (c != except) targets.push_back(c);
    }
    for (const auto& t : targets) {
        send_to_neighbor(t, control_frame(Category::Routing, type, self(), t, table_.own_seq(), payload));
    }
}

void Node::send_full_table(IpAddress neighbor) {
    std::vector<Advertisement> adv;
    adv.push_back(Advertisement{self(), 0, table_.own_seq()});
    for (const auto& [dest, e] : table_.entries()) adv.push_back({dest, e.hops, e.seq});
    send_to_neighbor(neighbor, control_frame(Category::Routing, routing_type::kFru, self(), neighbor, table_.own_seq(),
                                             encode_advertisements(adv)));
}

void Node::propagate(const std::vector<IpAddress>& dests, std::optional<IpAddress> except) {
    send_update(table_.build_triggered(dests), except);
}

void Node::handle_routing(const Envelope& env, IpAddress from_ap) {
    if (!is_neighbor(from_ap)) {
        trace("routing-non-neighbor", fmt::format("from={}", from_ap.to_string()));
        return;
    }
    const auto advs = decode_advertisements(env.payload);
    if (!advs) {
        ++stats_.malformed;
        trace("routing-malformed", fmt::format("from={} bytes={}", from_ap.to_string(), env.payload.size()));
        return;
    }
    const bool from_parent = parent() == from_ap;
    if (from_parent) heard_from_parent_ = true;

    bool newly_confirmed = false;
    bool reply_full = false;
    if (!from_parent) {
        const auto& leases = ap_.children();
        const auto it = leases.find(from_ap);
        if (it != leases.end()) {
            newly_confirmed = !it->second.confirmed;
            reply_full = newly_confirmed || (env.type == routing_type::kFru &&
                                             now() - it->second.since <= cfg_.timers.child_confirm_timeout);
            ap_.confirm(from_ap);
        }
    }

    std::vector<IpAddress> significant;
    std::optional<ChangeClass> root_change;
    for (const auto& adv : *advs) {
        const auto cls = table_.apply_advertisement(from_ap, adv, from_parent);
        if (is_significant(cls)) significant.push_back(adv.dest);
        if (adv.dest == cfg_.root) root_change = cls;
    }

    if (newly_confirmed) {
        trace("child-confirmed", fmt::format("child={}", from_ap.to_string()));
        strategy_->on_child_confirmed(from_ap);
    }
    if (reply_full) send_full_table(from_ap);
    if (!significant.empty()) propagate(significant, from_ap);

    if (active_pending_ && hops_to(cfg_.root)) announce_active();

    if (!cfg_.is_root && root_change && *root_change != ChangeClass::Discarded) {
        const auto* e = table_.find(cfg_.root);
        if (e != nullptr && !e->reachable() && is_operational(state_)) {
            push_event(LifecycleEvent::RootUnreachable);
        } else if (e != nullptr && e->reachable() && state_ == LifecycleState::RecoveryAwait) {
            push_event(LifecycleEvent::RootReachable);
        }
    }
}

// ---------------------------------------------------------------------------
// Frames

void Node::send_direct(IpAddress ap, Envelope env) {
    auto frame = encode(env);
    ++stats_.frames_sent;
    stats_.bytes_sent += frame.size();
    env_.transmit(cfg_.id, ap, std::move(frame));
}

bool Node::send_to_neighbor(IpAddress neighbor, Envelope env) {
    if (!alive_ || !is_neighbor(neighbor)) return false;
    if (env.dst.is_unset()) env.dst = neighbor;
    send_direct(neighbor, std::move(env));
    return true;
}

bool Node::route(Envelope env) {
    if (!alive_) return false;
    if (env.dst.is_broadcast()) {
        flood_seen_.insert({env.src, env.id});
        flood(env, std::nullopt);
        return true;
    }
    if (env.dst == self()) {
        after(0, [this, env = std::move(env)] { dispatch(env, self()); });
        return true;
    }
    const auto hop = resolve_next_hop(table_, env.dst, parent(), child_map());
    if (hop.kind == NextHop::Kind::NoRoute) {
        ++stats_.no_route;
        return false;
    }
    send_direct(hop.neighbor, std::move(env));
    return true;
}

void Node::flood(const Envelope& env, std::optional<IpAddress> except) {
    if (auto p = parent(); p && p != except) send_direct(*p, env);
    for (const auto& c : children()) {
        if (c != except) send_direct(c, env);
    }
}

bool Node::receive(std::vector<std::uint8_t> frame, IpAddress from_ap) {
    if (!alive_) return false;
    ++stats_.frames_received;
    DecodeError err = DecodeError::None;
    auto env = decode(frame, &err);
    if (!env) {
        ++stats_.malformed;
        if (cfg_.trace_rx) trace("rx", fmt::format("cat=malformed type=0 bytes={} fwd=0", frame.size()));
        trace("malformed", fmt::format("from={} bytes={} error={}", from_ap.to_string(), frame.size(), to_string(err)));
        return true;
    }
    if (cfg_.trace_rx) {
        const auto final_dest = env->final_destination();
        const bool fwd = !final_dest.is_broadcast() && final_dest != self();
        trace("rx", fmt::format("cat={} type={} bytes={} fwd={}", to_string(env->category), env->type, frame.size(),
                                fwd ? 1 : 0));
    }
    compute(cfg_.profile.frame_processing, [this, env = std::move(*env), from_ap] { dispatch(env, from_ap); });
    return true;
}

void Node::dispatch(const Envelope& env, IpAddress from_ap) {
    switch (env.category) {
        case Category::Routing:
            handle_routing(env, from_ap);
            break;
        case Category::Lifecycle:
            handle_lifecycle(env, from_ap);
            break;
        case Category::Middleware:
            if (env.dst == self() || env.dst.is_unset()) {
                if (env.type == static_cast<std::uint8_t>(strategy_->kind())) strategy_->on_frame(env, from_ap);
            } else if (!route(env)) {
                trace("no-route", fmt::format("dst={} cat=middleware", env.dst.to_string()));
            }
            break;
        case Category::Data:
            handle_data(env, from_ap);
            break;
        case Category::Monitoring:
            handle_monitoring(env);
            break;
    }
}

void Node::handle_lifecycle(const Envelope& env, IpAddress from_ap) {
    switch (env.type) {
        case lifecycle_type::kPdr: {
            ParentInfo info;
            info.hops_to_root = hops_to_root();
            info.child_count = static_cast<std::uint8_t>(ap_.children().size());
            info.state = state_;
            info.max_children = static_cast<std::uint8_t>(ap_.max_children());
            send_direct(env.src, control_frame(Category::Lifecycle, lifecycle_type::kPir, self(), env.src,
                                               next_message_id(), encode_parent_info(info)));
            break;
        }
        case lifecycle_type::kPir: {
            if (!session_.collecting) break;
            const auto info = decode_parent_info(env.payload);
            if (!info) break;
            for (auto& c : session_.candidates) {
                if (c.ap_ip == env.src && !c.info) {
                    c.info = *info;
                    if (++session_.answers == session_.candidates.size()) finish_collect(session_.id);
                    break;
                }
            }
            break;
        }
        case lifecycle_type::kCrr: {
            RegistrationAnswer answer;
            const bool willing = (cfg_.is_root || is_operational(state_)) && sta_.parent() != env.src;
            if (willing) {
                const bool existing = ap_.has_child(env.src);
                if (auto sta = ap_.admit(env.src, now())) {
                    answer.accepted = true;
                    answer.sta_ip = *sta;
                    if (!existing) {
                        trace("child-admitted", fmt::format("child={} sta={}", env.src.to_string(), sta->to_string()));
                        const auto child = env.src;
                        const auto since = now();
                        after(cfg_.timers.child_confirm_timeout, [this, child, since] {
                            const auto& leases = ap_.children();
                            const auto it = leases.find(child);
                            if (it == leases.end() || it->second.confirmed || it->second.since != since) return;
                            ap_.release(child);
                            trace("lease-expired", fmt::format("child={}", child.to_string()));
                            env_.release_child(cfg_.id, child);
                        });
                    }
                }
            }
            if (!answer.accepted) {
                trace("crr-refused", fmt::format("from={} state={}", env.src.to_string(), to_string(state_)));
            }
            send_direct(env.src, control_frame(Category::Lifecycle, lifecycle_type::kAck, self(), env.src,
                                               next_message_id(), encode_registration_answer(answer)));
            break;
        }
        case lifecycle_type::kAck: {
            if (!session_.awaiting_ack || session_.index >= session_.ranked.size() ||
                session_.ranked[session_.index].ap_ip != env.src) {
                break;
            }
            const auto answer = decode_registration_answer(env.payload);
            if (!answer) break;
            session_.awaiting_ack = false;
            if (answer->accepted) {
                attach(env.src, answer->sta_ip);
            } else {
                sta_.disconnect();
                ++session_.index;
                try_next_candidate();
            }
            break;
        }
        case lifecycle_type::kTba:
            if (parent() == from_ap) push_event(LifecycleEvent::TopologyBreakAlert);
            break;
        case lifecycle_type::kTrn:
            if (parent() == from_ap) push_event(LifecycleEvent::TopologyRestored);
            break;
        case lifecycle_type::kPrn:
            if (parent() == from_ap) lose_parent(LifecycleEvent::ParentReset);
            break;
        default:
            trace("lifecycle-unknown", fmt::format("type={}", env.type));
            break;
    }
}

void Node::handle_data(const Envelope& env, IpAddress from_ap) {
    if (env.dst.is_broadcast()) {
        if (!flood_seen_.insert({env.src, env.id}).second) return;
        flood(env, from_ap);
        if (env.src != self()) deliver_data(env);
        return;
    }
    if (env.dst != self()) {
        if (!route(env)) trace("no-route", fmt::format("dst={} cat=data", env.dst.to_string()));
        return;
    }
    if (env.encapsulated() && env.final_dst != self()) {
        Envelope inner = env;
        inner.dst = env.final_dst;
        inner.final_dst = kUnsetIp;
        if (app_ && app_->intercept(inner)) {
            trace("unwrap", fmt::format("src={} final={} consumed=1", env.src.to_string(), env.final_dst.to_string()));
            return;
        }
        trace("unwrap", fmt::format("src={} final={} consumed=0", env.src.to_string(), env.final_dst.to_string()));
        if (!route(std::move(inner))) trace("no-route", fmt::format("dst={} cat=data", env.final_dst.to_string()));
        return;
    }
    Envelope plain = env;
    plain.final_dst = kUnsetIp;
    deliver_data(std::move(plain));
}

void Node::deliver_data(Envelope env) {
    auto accepted = strategy_->accept_data(std::move(env));
    if (accepted) local_data(*accepted);
}

void Node::local_data(const Envelope& env) {
    if (env.type == data_type::kPing) {
        Envelope pong = env;
        pong.type = data_type::kPong;
        pong.src = self();
        pong.dst = env.src;
        pong.id = next_message_id();
        if (!route(std::move(pong))) trace("no-route", fmt::format("dst={} cat=data", env.src.to_string()));
        return;
    }
    if (env.type == data_type::kPong) {
        ByteReader r(env.payload);
        const auto seq = r.u32();
        const auto sent = static_cast<TimeMs>(r.u64());
        const auto hops = r.u8();
        if (r.ok()) {
            trace("rtt", fmt::format("dst={} seq={} hops={} rtt={}", env.src.to_string(), seq, hops, now() - sent));
        }
        return;
    }
    if (app_) app_->on_data(env);
}

void Node::ping(IpAddress dest, std::uint32_t seq) {
    if (!alive_) return;
    const auto hops = hops_to(dest);
    ByteWriter w;
    w.u32(seq);
    w.u64(static_cast<std::uint64_t>(now()));
    w.u8(static_cast<std::uint8_t>(hops.value_or(kInfiniteHops)));
    trace("rtt-probe", fmt::format("dst={} seq={} hops={}", dest.to_string(), seq, hops.value_or(-1)));
    if (!route(control_frame(Category::Data, data_type::kPing, self(), dest, next_message_id(), w.take()))) {
        trace("no-route", fmt::format("dst={} cat=data", dest.to_string()));
    }
}

void Node::report_to_root(std::uint8_t type, std::vector<std::uint8_t> payload, int attempt) {
    if (cfg_.is_root) return;
    if (hops_to(cfg_.root)) {
        route(control_frame(Category::Monitoring, type, self(), cfg_.root, next_message_id(), std::move(payload)));
        return;
    }
    if (attempt >= cfg_.report_retries) {
        trace("report-dropped", fmt::format("type={}", type));
        return;
    }
    after(cfg_.report_retry, [this, type, payload = std::move(payload), attempt]() mutable {
        report_to_root(type, std::move(payload), attempt + 1);
    });
}

void Node::handle_monitoring(const Envelope& env) {
    if (env.dst != self()) {
        if (!route(env)) trace("no-route", fmt::format("dst={} cat=monitoring", env.dst.to_string()));
        return;
    }
    if (!cfg_.is_root) return;
    ByteReader r(env.payload);
    if (env.type == monitoring_type::kStateDurations) {
        const auto init = r.u32();
        const auto search = r.u32();
        const auto join = r.u32();
        if (r.ok()) {
            trace("monm", fmt::format("node={} init={} search={} join={} total={}", env.src.to_string(), init, search,
                                      join, std::uint64_t{init} + search + join));
        }
    } else if (env.type == monitoring_type::kRecovery) {
        const auto duration = r.u32();
        if (r.ok()) trace("monm-recovery", fmt::format("node={} duration={}", env.src.to_string(), duration));
    }
}

}  // namespace hermes
