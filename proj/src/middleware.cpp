#include "hermes/middleware.hpp"

#include <algorithm>
#include <tuple>

#include <fmt/format.h>

namespace hermes {

const char* to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::None: return "none";
        case StrategyKind::Inject: return "inject";
        case StrategyKind::PubSub: return "pubsub";
        case StrategyKind::Topology: return "topology";
    }
    return "?";
}

std::optional<StrategyKind> parse_strategy_kind(std::string_view text) {
    if (text == "none") return StrategyKind::None;
    if (text == "inject") return StrategyKind::Inject;
    if (text == "pubsub") return StrategyKind::PubSub;
    if (text == "topology") return StrategyKind::Topology;
    return std::nullopt;
}

Metric encode_u32_metric(std::uint32_t value) {
    ByteWriter w;
    w.u32(value);
    return w.take();
}

std::optional<std::uint32_t> decode_u32_metric(std::span<const std::uint8_t> metric) {
    if (metric.size() != 4) return std::nullopt;
    ByteReader r(metric);
    return r.u32();
}

int compare_u32_metric(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    const auto x = decode_u32_metric(a);
    const auto y = decode_u32_metric(b);
    if (!x || !y) return static_cast<int>(x.has_value()) - static_cast<int>(y.has_value());
    return *x < *y ? -1 : (*x > *y ? 1 : 0);
}

Suitability strictly_better(MetricCompare compare) {
    return [compare = std::move(compare)](const Metric* own, const Metric& candidate) {
        return own == nullptr || compare(candidate, *own) > 0;
    };
}

bool MetricRegistry::update(IpAddress node, Metric metric, std::uint32_t version, TimeMs refreshed) {
    auto it = entries_.find(node);
    if (it == entries_.end()) {
        entries_.emplace(node, MetricEntry{std::move(metric), version, refreshed});
        return true;
    }
    if (version <= it->second.version) return false;
    it->second.metric = std::move(metric);
    it->second.version = version;
    it->second.refreshed = std::max(it->second.refreshed, refreshed);
    return true;
}

bool MetricRegistry::fresh(IpAddress node, TimeMs now, TimeMs window) const {
    auto it = entries_.find(node);
    return it != entries_.end() && now - it->second.refreshed <= window;
}

std::optional<IpAddress> select_inject_target(const Metric* own, std::span<const InjectCandidate> candidates,
                                              const MetricCompare& compare, const Suitability& suitable) {
    const InjectCandidate* best = nullptr;
    for (const auto& c : candidates) {
        if (!suitable(own, c.metric)) continue;
        if (best == nullptr) {
            best = &c;
            continue;
        }
        const int cmp = compare(c.metric, best->metric);
        if (cmp > 0 || (cmp == 0 && std::tie(c.hops, c.node) < std::tie(best->hops, best->node))) best = &c;
    }
    if (best == nullptr) return std::nullopt;
    return best->node;
}

bool TopicTable::update(IpAddress node, TopicEntry entry) {
    auto it = entries_.find(node);
    if (it == entries_.end()) {
        entries_.emplace(node, std::move(entry));
        return true;
    }
    if (entry.version <= it->second.version) return false;
    entry.refreshed = std::max(entry.refreshed, it->second.refreshed);
    it->second = std::move(entry);
    return true;
}

std::vector<IpAddress> TopicTable::subscribers_of(Topic topic, TimeMs now, TimeMs window) const {
    std::vector<IpAddress> out;
    for (const auto& [node, e] : entries_) {
        if (now - e.refreshed <= window && e.subscribes.contains(topic)) out.push_back(node);
    }
    return out;
}

void TopologyView::report(IpAddress node, Metric metric, IpAddress parent, TimeMs now) {
    auto& rec = entries_[node];
    rec.metric = std::move(metric);
    rec.parent = parent;
    rec.last_report = std::max(rec.last_report, now);
}

const TopologyRecord* TopologyView::find(IpAddress node) const {
    auto it = entries_.find(node);
    return it == entries_.end() ? nullptr : &it->second;
}

ParentSelector max_metric_selector(MetricCompare compare) {
    return [compare = std::move(compare)](std::span<const ParentCandidate> candidates) -> std::optional<IpAddress> {
        const ParentCandidate* best = nullptr;
        for (const auto& c : candidates) {
            if (best == nullptr) {
                best = &c;
                continue;
            }
            int cmp = 0;
            if (c.metric && best->metric) cmp = compare(*c.metric, *best->metric);
            else cmp = static_cast<int>(c.metric.has_value()) - static_cast<int>(best->metric.has_value());
            if (cmp > 0 || (cmp == 0 && std::tie(c.hops, c.node) < std::tie(best->hops, best->node))) best = &c;
        }
        if (best == nullptr) return std::nullopt;
        return best->node;
    };
}

// ---------------------------------------------------------------------------
// Wire helpers

namespace {

void put_metric(ByteWriter& w, const Metric& m) {
    w.u8(static_cast<std::uint8_t>(m.size()));
    w.bytes(m);
}

Metric get_metric(ByteReader& r) { return r.bytes(r.u8()); }

void put_topics(ByteWriter& w, const std::set<Topic>& topics) {
    w.u8(static_cast<std::uint8_t>(topics.size()));
    for (Topic t : topics) w.u16(t);
}

std::set<Topic> get_topics(ByteReader& r) {
    std::set<Topic> out;
    const auto n = r.u8();
    for (int i = 0; i < n && r.ok(); ++i) out.insert(r.u16());
    return out;
}

void put_topic_entry(ByteWriter& w, IpAddress origin, const TopicEntry& e, TimeMs now) {
    w.ip(origin);
    w.u32(e.version);
    w.u32(static_cast<std::uint32_t>(std::max<TimeMs>(0, now - e.refreshed)));
    put_topics(w, e.publishes);
    put_topics(w, e.subscribes);
}

std::pair<IpAddress, TopicEntry> get_topic_entry(ByteReader& r, TimeMs now) {
    const auto origin = r.ip();
    TopicEntry e;
    e.version = r.u32();
    e.refreshed = now - static_cast<TimeMs>(r.u32());
    e.publishes = get_topics(r);
    e.subscribes = get_topics(r);
    return {origin, std::move(e)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Strategy base

void Strategy::start() {
    if (cfg_.period <= 0) return;
    node().after(cfg_.period, [this] {
        on_period();
        start();
    });
}

void Strategy::deliver_local(Envelope env) {
    node().after(0, [this, env = std::move(env)]() mutable {
        if (deliver_) deliver_(std::move(env));
    });
}

void Strategy::send_to_all_neighbors(const Envelope& env, std::optional<IpAddress> except) {
    auto to = [&](IpAddress neighbor) {
        Envelope copy = env;
        copy.dst = neighbor;
        node().send_to_neighbor(neighbor, std::move(copy));
    };
    if (auto p = node().parent(); p && p != except) to(*p);
    for (const auto& c : node().children()) {
        if (c != except) to(c);
    }
}

Envelope Strategy::make_frame(std::uint8_t op, std::vector<std::uint8_t> body) {
    Envelope env;
    env.category = Category::Middleware;
    env.type = static_cast<std::uint8_t>(cfg_.kind);
    env.src = node().self();
    env.id = node().next_message_id();
    env.payload.reserve(body.size() + 1);
    env.payload.push_back(op);
    env.payload.insert(env.payload.end(), body.begin(), body.end());
    return env;
}

bool Strategy::send_data(Envelope env, std::optional<Topic>) {
    if (env.dst == node().self()) {
        deliver_local(std::move(env));
        return true;
    }
    const auto dst = env.dst;
    if (!node().route(std::move(env))) {
        node().trace("no-route", fmt::format("dst={}", dst.to_string()));
        return false;
    }
    return true;
}

std::unique_ptr<Strategy> make_strategy(StrategyConfig cfg) {
    if ((cfg.kind == StrategyKind::Inject || cfg.kind == StrategyKind::Topology) && !cfg.compare) {
        throw StrategyConfigError(fmt::format("{} strategy requires a metric comparator", to_string(cfg.kind)));
    }
    if (cfg.own_metric && cfg.own_metric->size() > kMaxMetricSize) {
        throw StrategyConfigError("metric exceeds the size bound");
    }
    switch (cfg.kind) {
        case StrategyKind::None: return std::make_unique<Strategy>(std::move(cfg));
        case StrategyKind::Inject: return std::make_unique<InjectStrategy>(std::move(cfg));
        case StrategyKind::PubSub: return std::make_unique<PubSubStrategy>(std::move(cfg));
        case StrategyKind::Topology: return std::make_unique<TopologyStrategy>(std::move(cfg));
    }
    throw StrategyConfigError("unknown strategy");
}

// ---------------------------------------------------------------------------
// Inject

InjectStrategy::InjectStrategy(StrategyConfig cfg) : Strategy(std::move(cfg)) {
    if (!cfg_.suitable) cfg_.suitable = strictly_better(cfg_.compare);
}

void InjectStrategy::flood_own_metric(std::optional<IpAddress> only_to) {
    if (!cfg_.own_metric) return;
    ByteWriter w;
    w.ip(node().self());
    w.u32(version_);
    w.u32(0);
    put_metric(w, *cfg_.own_metric);
    auto env = make_frame(mw_op::kMetric, w.take());
    if (only_to) {
        node().send_to_neighbor(*only_to, env);
    } else {
        send_to_all_neighbors(env, std::nullopt);
    }
}

void InjectStrategy::on_period() {
    ++version_;
    flood_own_metric(std::nullopt);
}

void InjectStrategy::on_attached() {
    ++version_;
    if (auto p = node().parent()) flood_own_metric(*p);
}

void InjectStrategy::on_child_confirmed(IpAddress child) { send_snapshot(child); }

void InjectStrategy::send_snapshot(IpAddress child) {
    const TimeMs now = node().now();
    ByteWriter w;
    std::vector<std::pair<IpAddress, MetricEntry>> rows;
    if (cfg_.own_metric) rows.emplace_back(node().self(), MetricEntry{*cfg_.own_metric, version_, now});
    for (const auto& [ip, e] : registry_.entries()) {
        if (ip != child && now - e.refreshed <= staleness_window()) rows.emplace_back(ip, e);
    }
    w.u16(static_cast<std::uint16_t>(rows.size()));
    for (const auto& [ip, e] : rows) {
        w.ip(ip);
        w.u32(e.version);
        w.u32(static_cast<std::uint32_t>(now - e.refreshed));
        put_metric(w, e.metric);
    }
    node().send_to_neighbor(child, make_frame(mw_op::kMetricSnapshot, w.take()));
}

void InjectStrategy::on_reset() { registry_.clear(); }

void InjectStrategy::on_frame(const Envelope& env, IpAddress from_neighbor) {
    ByteReader r(env.payload);
    const auto op = r.u8();
    const TimeMs now = node().now();
    if (op == mw_op::kMetric) {
        const auto origin = r.ip();
        const auto version = r.u32();
        const auto age = r.u32();
        auto metric = get_metric(r);
        if (!r.ok() || origin == node().self()) return;
        if (registry_.update(origin, metric, version, now - age)) {
            auto relay = env;
            relay.src = node().self();
            relay.id = node().next_message_id();
            send_to_all_neighbors(relay, from_neighbor);
        }
    } else if (op == mw_op::kMetricSnapshot) {
        const auto n = r.u16();
        for (int i = 0; i < n && r.ok(); ++i) {
            const auto origin = r.ip();
            const auto version = r.u32();
            const auto age = r.u32();
            auto metric = get_metric(r);
            if (r.ok() && origin != node().self()) registry_.update(origin, std::move(metric), version, now - age);
        }
    }
}

std::optional<IpAddress> InjectStrategy::choose_target(IpAddress final_dest) const {
    std::vector<InjectCandidate> candidates;
    const TimeMs now = node().now();
    for (const auto& [ip, e] : registry_.entries()) {
        if (ip == node().self() || now - e.refreshed > staleness_window()) continue;
        const auto hops = node().hops_to(ip);
        if (!hops) continue;
        candidates.push_back(InjectCandidate{ip, e.metric, *hops});
    }
    const Metric* own = cfg_.own_metric ? &*cfg_.own_metric : nullptr;
    auto target = select_inject_target(own, candidates, cfg_.compare, cfg_.suitable);
    if (target == final_dest) return std::nullopt;
    return target;
}

bool InjectStrategy::send_data(Envelope env, std::optional<Topic> topic) {
    if (env.dst == node().self() || env.dst.is_broadcast()) return Strategy::send_data(std::move(env), topic);
    if (auto target = choose_target(env.dst)) {
        Envelope wrapped = env;
        wrapped.final_dst = env.dst;
        wrapped.dst = *target;
        if (node().route(std::move(wrapped))) return true;
        node().trace("inject-fallback", fmt::format("via={} dst={}", target->to_string(), env.dst.to_string()));
    }
    return Strategy::send_data(std::move(env), topic);
}

// ---------------------------------------------------------------------------
// Publish/Subscribe

PubSubStrategy::PubSubStrategy(StrategyConfig cfg) : Strategy(std::move(cfg)) {}

bool PubSubStrategy::change(std::set<Topic>& set, Topic t, bool add) {
    if (t == kNoTopic) return false;
    if (add) {
        if (set.contains(t)) return true;
        if (set.size() >= cfg_.max_topics) {
            node().trace("topic-cap", fmt::format("topic={}", t));
            return false;
        }
        set.insert(t);
    } else if (set.erase(t) == 0) {
        return true;
    }
    ++own_.version;
    announce(std::nullopt);
    return true;
}

bool PubSubStrategy::publish(Topic t) { return change(own_.publishes, t, true); }
bool PubSubStrategy::withdraw(Topic t) { return change(own_.publishes, t, false); }
bool PubSubStrategy::subscribe(Topic t) { return change(own_.subscribes, t, true); }
bool PubSubStrategy::unsubscribe(Topic t) { return change(own_.subscribes, t, false); }

void PubSubStrategy::announce(std::optional<IpAddress> only_to) {
    if (node_ == nullptr) return;
    own_.refreshed = node().now();
    ByteWriter w;
    put_topic_entry(w, node().self(), own_, node().now());
    auto env = make_frame(mw_op::kTopics, w.take());
    if (only_to) {
        node().send_to_neighbor(*only_to, env);
    } else {
        send_to_all_neighbors(env, std::nullopt);
    }
}

void PubSubStrategy::on_period() {
    ++own_.version;
    announce(std::nullopt);
}

void PubSubStrategy::on_attached() {
    ++own_.version;
    if (auto p = node().parent()) announce(*p);
}

void PubSubStrategy::on_child_confirmed(IpAddress child) { send_snapshot(child); }

void PubSubStrategy::send_snapshot(IpAddress child) {
    const TimeMs now = node().now();
    std::vector<std::pair<IpAddress, TopicEntry>> rows;
    TopicEntry self_entry = own_;
    self_entry.refreshed = now;
    rows.emplace_back(node().self(), self_entry);
    for (const auto& [ip, e] : table_.entries()) {
        if (ip != child && now - e.refreshed <= staleness_window()) rows.emplace_back(ip, e);
    }
    ByteWriter w;
    w.u16(static_cast<std::uint16_t>(rows.size()));
    for (const auto& [ip, e] : rows) put_topic_entry(w, ip, e, now);
    node().send_to_neighbor(child, make_frame(mw_op::kTopicSnapshot, w.take()));
}

void PubSubStrategy::on_reset() { table_.clear(); }

void PubSubStrategy::on_frame(const Envelope& env, IpAddress from_neighbor) {
    ByteReader r(env.payload);
    const auto op = r.u8();
    const TimeMs now = node().now();
    if (op == mw_op::kTopics) {
        auto [origin, entry] = get_topic_entry(r, now);
        if (!r.ok() || origin == node().self()) return;
        if (table_.update(origin, std::move(entry))) {
            auto relay = env;
            relay.src = node().self();
            relay.id = node().next_message_id();
            send_to_all_neighbors(relay, from_neighbor);
        }
    } else if (op == mw_op::kTopicSnapshot) {
        const auto n = r.u16();
        for (int i = 0; i < n && r.ok(); ++i) {
            auto [origin, entry] = get_topic_entry(r, now);
            if (r.ok() && origin != node().self()) table_.update(origin, std::move(entry));
        }
    }
}

bool PubSubStrategy::send_data(Envelope env, std::optional<Topic> topic) {
    auto framed = [](const Envelope& e, Topic t) {
        Envelope out = e;
        out.type |= data_type::kTopicFlag;
        ByteWriter w;
        w.u16(t);
        w.bytes(e.payload);
        out.payload = w.take();
        return out;
    };
    if (!topic) {
        if (env.dst == node().self()) {
            deliver_local(std::move(env));
            return true;
        }
        return Strategy::send_data(framed(env, kNoTopic), std::nullopt);
    }
    if (own_.subscribes.contains(*topic)) {
        Envelope local = env;
        local.dst = node().self();
        deliver_local(std::move(local));
    }
    for (const auto& sub : table_.subscribers_of(*topic, node().now(), staleness_window())) {
        if (sub == node().self()) continue;
        Envelope copy = framed(env, *topic);
        copy.dst = sub;
        if (!node().route(std::move(copy))) {
            node().trace("pubsub-unreachable", fmt::format("topic={} subscriber={}", *topic, sub.to_string()));
        }
    }
    return true;
}

std::optional<Envelope> PubSubStrategy::accept_data(Envelope env) {
    if ((env.type & data_type::kTopicFlag) == 0) return env;
    if (env.payload.size() < 2) return std::nullopt;
    const auto key = std::make_pair(env.src, env.id);
    if (!seen_.insert(key).second) {
        ++duplicates_;
        return std::nullopt;
    }
    seen_order_.push_back(key);
    if (seen_order_.size() > 8192) {
        seen_.erase(seen_order_.front());
        seen_order_.pop_front();
    }
    env.payload.erase(env.payload.begin(), env.payload.begin() + 2);
    env.type &= static_cast<std::uint8_t>(~data_type::kTopicFlag);
    return env;
}

// ---------------------------------------------------------------------------
// Topology

TopologyStrategy::TopologyStrategy(StrategyConfig cfg) : Strategy(std::move(cfg)) {
    if (!cfg_.selector) cfg_.selector = max_metric_selector(cfg_.compare);
}

void TopologyStrategy::on_period() { send_report(); }

void TopologyStrategy::on_attached() { send_report(); }

void TopologyStrategy::on_reset() {
    pending_ = nullptr;
    ++request_id_;
}

void TopologyStrategy::send_report() {
    if (node().is_root()) return;
    const auto parent = node().parent();
    if (!parent || !is_operational(node().state())) return;
    ByteWriter w;
    put_metric(w, cfg_.own_metric.value_or(Metric{}));
    w.ip(*parent);
    auto env = make_frame(mw_op::kReport, w.take());
    env.dst = node().root();
    if (!node().route(std::move(env))) node().trace("topology-report-skipped", "reason=no-route");
}

void TopologyStrategy::request_parent(IpAddress temporary_parent, std::vector<IpAddress> candidates,
                                      ParentDecision done) {
    pending_ = std::move(done);
    const auto id = ++request_id_;
    ByteWriter w;
    w.u32(id);
    w.ip(node().self());
    put_metric(w, cfg_.own_metric.value_or(Metric{}));
    w.u8(static_cast<std::uint8_t>(candidates.size()));
    for (const auto& c : candidates) w.ip(c);
    auto env = make_frame(mw_op::kPlar, w.take());
    env.dst = temporary_parent;
    node().send_to_neighbor(temporary_parent, std::move(env));
    node().after(cfg_.topology_timeout, [this, id] {
        if (id != request_id_ || !pending_) return;
        node().trace("topology-timeout", fmt::format("request={}", id));
        auto d = std::move(pending_);
        pending_ = nullptr;
        d(std::nullopt);
    });
}

void TopologyStrategy::on_frame(const Envelope& env, IpAddress /*from_neighbor*/) {
    ByteReader r(env.payload);
    const auto op = r.u8();
    if (op == mw_op::kPlar || op == mw_op::kPla) {
        const auto id = r.u32();
        const auto joining = r.ip();
        auto metric = get_metric(r);
        std::vector<IpAddress> candidates(r.u8());
        for (auto& c : candidates) c = r.ip();
        if (!r.ok()) return;
        if (!node().is_root()) {
            if (op == mw_op::kPla) return;
            auto fwd = env;
            fwd.payload[0] = mw_op::kPla;
            fwd.src = node().self();
            fwd.dst = node().root();
            fwd.id = node().next_message_id();
            if (!node().route(std::move(fwd))) node().trace("topology-pla-skipped", "reason=no-route");
            return;
        }
        const IpAddress via = op == mw_op::kPlar ? node().self() : env.src;
        if (!metric.empty()) view_.report(joining, std::move(metric), via, node().now());
        std::vector<ParentCandidate> list;
        for (const auto& c : candidates) {
            ParentCandidate pc;
            pc.node = c;
            if (c == node().self()) {
                pc.metric = cfg_.own_metric;
            } else if (const auto* rec = view_.find(c)) {
                pc.metric = rec->metric;
            }
            const auto hops = node().hops_to(c);
            if (!hops) continue;
            pc.hops = *hops;
            list.push_back(std::move(pc));
        }
        const auto assigned = cfg_.selector(list).value_or(via);
        node().trace("topology-assign", fmt::format("node={} parent={} via={}", joining.to_string(),
                                                    assigned.to_string(), via.to_string()));
        ByteWriter w;
        w.u32(id);
        w.ip(joining);
        w.ip(assigned);
        if (via == node().self()) {
            auto relay = make_frame(mw_op::kPacRelay, w.take());
            relay.dst = joining;
            node().send_to_neighbor(joining, std::move(relay));
        } else {
            auto pac = make_frame(mw_op::kPac, w.take());
            pac.dst = via;
            if (!node().route(std::move(pac))) node().trace("topology-pac-skipped", "reason=no-route");
        }
    } else if (op == mw_op::kPac) {
        const auto id = r.u32();
        const auto joining = r.ip();
        const auto assigned = r.ip();
        if (!r.ok()) return;
        const auto kids = node().children();
        if (std::find(kids.begin(), kids.end(), joining) == kids.end()) return;
        ByteWriter w;
        w.u32(id);
        w.ip(joining);
        w.ip(assigned);
        auto relay = make_frame(mw_op::kPacRelay, w.take());
        relay.dst = joining;
        node().send_to_neighbor(joining, std::move(relay));
    } else if (op == mw_op::kPacRelay) {
        const auto id = r.u32();
        const auto joining = r.ip();
        const auto assigned = r.ip();
        if (!r.ok() || joining != node().self() || id != request_id_ || !pending_) return;
        auto d = std::move(pending_);
        pending_ = nullptr;
        d(assigned);
    } else if (op == mw_op::kReport) {
        auto metric = get_metric(r);
        const auto parent = r.ip();
        if (!r.ok() || !node().is_root()) return;
        view_.report(env.src, std::move(metric), parent, node().now());
        node().trace("topology-report", fmt::format("node={} parent={}", env.src.to_string(), parent.to_string()));
    }
}

}  // namespace hermes
