#include "hermes/network.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace hermes {

namespace {

DeviceProfile profile_for(const NodeSpec& spec) {
    auto p = DeviceProfile::defaults(spec.kind);
    if (spec.max_children) p.max_children = *spec.max_children;
    if (spec.frame_processing) p.frame_processing = *spec.frame_processing;
    if (spec.compute_delay) p.compute_delay_per_neuron = *spec.compute_delay;
    if (spec.state_handling) p.state_handling = *spec.state_handling;
    if (spec.scan_duration) p.scan_duration = *spec.scan_duration;
    return p;
}

std::string flatten(std::string text) {
    while (!text.empty() && text.back() == '\n') text.pop_back();
    std::replace(text.begin(), text.end(), '\n', '|');
    return text;
}

}  // namespace

Network::Network(Scenario scenario) : scenario_(std::move(scenario)) {
    const auto errors = scenario_.validate();
    if (!errors.empty()) throw ScenarioError(errors.front());
    radio_ = std::make_unique<Radio>(sim_, trace_, scenario_.seed, scenario_.link);
    build();
}

Network::~Network() = default;

void Network::build() {
    const auto& sc = scenario_;
    root_ = static_cast<NodeId>(sc.root_index());
    const auto root_ip = derive_ap_ip(sc.nodes[root_].mac);

    std::optional<IpAddress> coordinator;
    std::vector<IpAddress> worker_order;
    for (const auto& n : sc.nodes) {
        if (n.roles & nn_role::kCoordinator) coordinator = derive_ap_ip(n.mac);
        worker_order.push_back(derive_ap_ip(n.mac));
    }

    emit(kEnvironment, "scenario",
         fmt::format("nodes={} strategy={} seed={} duration={}", sc.nodes.size(), to_string(sc.strategy), sc.seed,
                     sc.duration));
    if (sc.nn) {
        emit(kEnvironment, "model", fmt::format("source={} text={}", sc.nn->model_source, flatten(sc.nn->model->to_text())));
    }

    for (std::size_t i = 0; i < sc.nodes.size(); ++i) {
        const auto& spec = sc.nodes[i];
        NodeConfig cfg;
        cfg.id = static_cast<NodeId>(i);
        cfg.name = spec.name;
        cfg.mac = spec.mac;
        cfg.profile = profile_for(spec);
        cfg.is_root = spec.root;
        cfg.root = root_ip;
        cfg.timers = sc.lifecycle;
        cfg.routing_period = sc.routing_period;
        cfg.fru_every = sc.fru_every;
        cfg.fru_threshold = sc.fru_threshold;
        cfg.trace_rx = spec.root;

        StrategyConfig st;
        st.kind = sc.strategy;
        st.period = sc.middleware_period;
        st.staleness_periods = sc.staleness_periods;
        st.max_topics = sc.max_topics;
        st.topology_timeout = sc.topology_timeout;
        st.own_metric = encode_u32_metric(spec.metric.value_or(static_cast<std::uint32_t>(cfg.profile.capacity)));
        st.compare = compare_u32_metric;
        st.suitable = strictly_better(st.compare);
        st.selector = max_metric_selector(st.compare);

        std::unique_ptr<NnApp> app;
        if (sc.nn && spec.roles != 0) {
            NnConfig nc = sc.nn->config;
            nc.seed = sc.seed;
            nc.worker_order = worker_order;
            NnNodeSetup setup{spec.roles, cfg.profile.capacity, spec.quota, spec.inputs};
            app = std::make_unique<NnApp>(nc, setup, coordinator.value_or(root_ip), sc.nn->model);
        }

        const auto ip = derive_ap_ip(spec.mac);
        by_ap_.emplace(ip, cfg.id);
        emit(cfg.id, "member", fmt::format("name={} ip={} mac={} kind={}", spec.name, ip.to_string(),
                                           spec.mac.to_string(), to_string(spec.kind)));
        nodes_.push_back(std::make_unique<Node>(std::move(cfg), *this, make_strategy(std::move(st)), std::move(app)));
    }

    for (NodeId a = 0; a < nodes_.size(); ++a) {
        for (NodeId b = a + 1; b < nodes_.size(); ++b) radio_->set_visibility(a, b, sc.visibility_all);
    }
    for (const auto& [a, b] : sc.visible_pairs) radio_->set_visibility(*find(a), *find(b), true);
    for (const auto& o : sc.links) radio_->set_link_params(*find(o.a), *find(o.b), o.params);

    std::string order;
    for (const auto& j : sc.joins) order += fmt::format("{}{}@{}", order.empty() ? "" : ",", j.node, j.at);
    emit(kEnvironment, "joins", fmt::format("order={}", order.empty() ? "-" : order));

    sim_.schedule(0, root_, EventKind::NodeStart, [this] { start_node(root_); });
    for (const auto& j : sc.joins) {
        const auto id = *find(j.node);
        sim_.schedule(j.at, id, EventKind::NodeStart, [this, id] { start_node(id); });
    }
    schedule_faults();
    schedule_probes();
    if (sc.snapshot_interval > 0) schedule_snapshots(sc.snapshot_interval);
}

void Network::schedule_faults() {
    for (const auto& f : scenario_.faults) {
        switch (f.kind) {
            case FaultKind::Kill: {
                const auto id = *find(f.node);
                sim_.schedule(f.at, id, EventKind::NodeKill, [this, id] { kill_node(id); });
                break;
            }
            case FaultKind::LinkDown:
            case FaultKind::LinkUp: {
                const auto a = *find(f.a);
                const auto b = *find(f.b);
                const bool up = f.kind == FaultKind::LinkUp;
                sim_.schedule(f.at, kEnvironment, EventKind::LinkChange, [this, a, b, up] { set_visibility(a, b, up); });
                break;
            }
            case FaultKind::Drop:
            case FaultKind::Corrupt: {
                Filter filter;
                filter.kind = f.kind;
                filter.match = f.match;
                if (f.match.from) filter.from = find(*f.match.from);
                if (f.match.to) filter.to = find(*f.match.to);
                filter.remaining = f.match.count;
                filters_.push_back(std::move(filter));
                break;
            }
        }
    }
}

void Network::schedule_probes() {
    for (const auto& p : scenario_.probes) {
        const auto from = *find(p.from);
        const auto dest = derive_ap_ip(scenario_.nodes[*find(p.to)].mac);
        for (int k = 0; k < p.count; ++k) {
            sim_.schedule(p.start + k * p.interval, from, EventKind::Timer,
                          [this, from, dest, k] { nodes_[from]->ping(dest, static_cast<std::uint32_t>(k)); });
        }
    }
}

void Network::schedule_snapshots(TimeMs at) {
    if (at > scenario_.duration) return;
    sim_.schedule(at, kEnvironment, EventKind::Observation, [this, at] {
        snapshot();
        schedule_snapshots(at + scenario_.snapshot_interval);
    });
}

void Network::run() {
    run_until(scenario_.duration);
    finish();
}

void Network::run_until(TimeMs t) { sim_.run_until(t); }

void Network::finish() {
    if (finished_) return;
    finished_ = true;
    for (const auto& n : nodes_) {
        const auto& s = n->stats();
        const auto p = parent_of(n->id());
        emit(n->id(), "summary",
             fmt::format("state={} alive={} parent={} table={} sent={} bytes={} received={} malformed={}",
                         to_string(n->state()), n->alive() ? 1 : 0,
                         p ? nodes_[*p]->self().to_string() : std::string("-"), n->table().size(), s.frames_sent,
                         s.bytes_sent, s.frames_received, s.malformed));
    }
    const auto t = radio_->totals();
    emit(kEnvironment, "radio",
         fmt::format("transmitted={} delivered={} dropped={} in_flight={}", t.transmitted, t.delivered, t.dropped,
                     t.in_flight));
}

std::optional<NodeId> Network::find(const std::string& name) const {
    for (const auto& n : nodes_) {
        if (n->name() == name) return n->id();
    }
    for (std::size_t i = 0; i < scenario_.nodes.size(); ++i) {
        if (scenario_.nodes[i].name == name) return static_cast<NodeId>(i);
    }
    return std::nullopt;
}

std::optional<NodeId> Network::node_by_ap(IpAddress ap) const {
    const auto it = by_ap_.find(ap);
    if (it == by_ap_.end()) return std::nullopt;
    return it->second;
}

std::optional<NodeId> Network::parent_of(NodeId child) const {
    const auto it = parent_of_.find(child);
    if (it == parent_of_.end()) return std::nullopt;
    return it->second;
}

std::vector<TreeEdge> Network::tree() const {
    std::vector<TreeEdge> out;
    for (const auto& [c, p] : parent_of_) out.push_back({c, p});
    return out;
}

std::optional<int> Network::depth_of(NodeId id) const {
    int depth = 0;
    NodeId cur = id;
    while (cur != root_) {
        const auto p = parent_of(cur);
        if (!p || depth > static_cast<int>(nodes_.size())) return std::nullopt;
        cur = *p;
        ++depth;
    }
    return depth;
}

bool Network::is_descendant(NodeId node, NodeId ancestor) const {
    NodeId cur = node;
    for (std::size_t guard = 0; guard <= nodes_.size(); ++guard) {
        const auto p = parent_of(cur);
        if (!p) return false;
        if (*p == ancestor) return true;
        cur = *p;
    }
    return false;
}

void Network::start_node(NodeId id) { nodes_.at(id)->start(); }

void Network::kill_node(NodeId id) {
    auto& n = *nodes_.at(id);
    if (!n.alive()) return;
    n.kill();
    if (const auto p = parent_of(id)) break_link(id, *p, "kill");
    std::vector<NodeId> children;
    for (const auto& [c, p] : parent_of_) {
        if (p == id) children.push_back(c);
    }
    for (const auto c : children) break_link(c, id, "kill");
}

void Network::set_visibility(NodeId a, NodeId b, bool visible) {
    radio_->set_visibility(a, b, visible);
    emit(kEnvironment, "visibility", fmt::format("a={} b={} visible={}", a, b, visible ? 1 : 0));
    if (visible) return;
    if (parent_of(a) == b) break_link(a, b, "visibility");
    if (parent_of(b) == a) break_link(b, a, "visibility");
}

void Network::break_link(NodeId child, NodeId parent, const char* cause) {
    parent_of_.erase(child);
    const auto child_ap = nodes_[child]->self();
    const auto parent_ap = nodes_[parent]->self();
    emit(kEnvironment, "link",
         fmt::format("event=down child={} parent={} cause={}", child_ap.to_string(), parent_ap.to_string(), cause));
    sim_.schedule_in(0, child, EventKind::LinkChange, [this, child, parent_ap] { nodes_[child]->on_parent_lost(parent_ap); });
    sim_.schedule_in(0, parent, EventKind::LinkChange, [this, parent, child_ap] { nodes_[parent]->on_child_left(child_ap); });
}

void Network::snapshot() {
    std::string edges;
    for (const auto& [c, p] : parent_of_) {
        if (!edges.empty()) edges += ',';
        edges += fmt::format("{}>{}", nodes_[c]->self().to_string(), nodes_[p]->self().to_string());
    }
    emit(kEnvironment, "snapshot", fmt::format("edges={}", edges.empty() ? "-" : edges));
}

void Network::emit(NodeId node, std::string kind, std::string detail) {
    trace_.emit(sim_.now(), node, std::move(kind), std::move(detail));
}

Network::Filter* Network::match_filter(NodeId from, NodeId to, const std::vector<std::uint8_t>& frame) {
    if (filters_.empty()) return nullptr;
    const auto env = decode(frame);
    const auto now = sim_.now();
    for (auto& f : filters_) {
        if (f.remaining == 0) continue;
        if (now < f.match.start || now > f.match.end) continue;
        if (f.from && *f.from != from) continue;
        if (f.to && *f.to != to) continue;
        if (f.match.category && (!env || env->category != *f.match.category)) continue;
        if (f.match.type && (!env || env->type != *f.match.type)) continue;
        if (f.remaining > 0) --f.remaining;
        return &f;
    }
    return nullptr;
}

void Network::transmit(NodeId from, IpAddress to_ap, std::vector<std::uint8_t> frame) {
    const auto to = node_by_ap(to_ap);
    if (!to) {
        emit(from, "tx-unknown", fmt::format("to={} bytes={}", to_ap.to_string(), frame.size()));
        return;
    }
    if (auto* f = match_filter(from, *to, frame)) {
        if (f->kind == FaultKind::Drop) {
            radio_->record_filtered(from, *to, frame.size());
            return;
        }
        emit(from, "fault-corrupt", fmt::format("to={} bytes={}", *to, frame.size()));
        frame[0] ^= 0xFF;
    }
    const auto from_ap = nodes_[from]->self();
    radio_->transmit(from, *to, std::move(frame), nodes_[from]->alive(),
                     [this, to = *to, from_ap](std::vector<std::uint8_t> bytes) {
                         return nodes_[to]->receive(std::move(bytes), from_ap);
                     });
}

std::vector<ScanResult> Network::scan(NodeId scanner) {
    std::vector<ScanResult> out;
    for (const auto id : radio_->visible_from(scanner)) {
        const auto& n = *nodes_[id];
        if (!n.alive() || !n.ap().up() || is_descendant(id, scanner)) continue;
        out.push_back(ScanResult{n.ap().ssid(), n.self(), radio_->params(scanner, id).quality});
    }
    return out;
}

void Network::link_up(NodeId child, IpAddress parent_ap) {
    const auto parent = node_by_ap(parent_ap);
    if (!parent) return;
    if (const auto old = parent_of(child); old && *old != *parent) {
        parent_of_.erase(child);
        emit(kEnvironment, "link",
             fmt::format("event=down child={} parent={} cause=replaced", nodes_[child]->self().to_string(),
                         nodes_[*old]->self().to_string()));
    }
    parent_of_[child] = *parent;
    emit(kEnvironment, "link",
         fmt::format("event=up child={} parent={}", nodes_[child]->self().to_string(), parent_ap.to_string()));
}

void Network::detach_from_parent(NodeId child) {
    const auto parent = parent_of(child);
    if (!parent) return;
    parent_of_.erase(child);
    const auto child_ap = nodes_[child]->self();
    emit(kEnvironment, "link",
         fmt::format("event=down child={} parent={} cause=detach", child_ap.to_string(),
                     nodes_[*parent]->self().to_string()));
    sim_.schedule_in(0, *parent, EventKind::LinkChange,
                     [this, p = *parent, child_ap] { nodes_[p]->on_child_left(child_ap); });
}

void Network::release_child(NodeId parent, IpAddress child_ap) {
    const auto child = node_by_ap(child_ap);
    if (!child || parent_of(*child) != parent) return;
    parent_of_.erase(*child);
    const auto parent_ap = nodes_[parent]->self();
    emit(kEnvironment, "link",
         fmt::format("event=down child={} parent={} cause=release", child_ap.to_string(), parent_ap.to_string()));
    sim_.schedule_in(0, *child, EventKind::LinkChange,
                     [this, c = *child, parent_ap] { nodes_[c]->on_parent_lost(parent_ap); });
}

}  // namespace hermes
