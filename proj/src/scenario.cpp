#include "hermes/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace hermes {

const char* to_string(FaultKind k) {
    switch (k) {
        case FaultKind::Kill: return "kill";
        case FaultKind::LinkDown: return "link-down";
        case FaultKind::LinkUp: return "link-up";
        case FaultKind::Drop: return "drop";
        case FaultKind::Corrupt: return "corrupt";
    }
    return "?";
}

namespace {

constexpr std::uint64_t kJoinOrderStream = 0x6a6f696e73ULL;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ScenarioError(fmt::format("{}: {}", path, what));
}

void check_keys(const YAML::Node& node, std::initializer_list<const char*> allowed, const std::string& path) {
    if (!node.IsMap()) fail(path, "expected a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            fail(path.empty() ? key : path + "." + key, "unknown key");
        }
    }
}

template <typename T>
T as(const YAML::Node& node, const std::string& path) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        fail(path, "wrong type");
    }
}

template <typename T>
void read(const YAML::Node& parent, const char* key, T& out, const std::string& path) {
    if (const auto n = parent[key]) out = as<T>(n, path.empty() ? key : path + "." + key);
}

template <typename T>
void read_opt(const YAML::Node& parent, const char* key, std::optional<T>& out, const std::string& path) {
    if (const auto n = parent[key]) out = as<T>(n, path.empty() ? key : path + "." + key);
}

std::uint8_t parse_roles(const YAML::Node& n, const std::string& path) {
    std::uint8_t roles = 0;
    if (!n.IsSequence()) fail(path, "expected a list of roles");
    for (std::size_t i = 0; i < n.size(); ++i) {
        const auto r = as<std::string>(n[i], fmt::format("{}[{}]", path, i));
        if (r == "coordinator") roles |= nn_role::kCoordinator;
        else if (r == "input-generator") roles |= nn_role::kInputGenerator;
        else if (r == "hidden-worker") roles |= nn_role::kHiddenWorker;
        else if (r == "output-worker") roles |= nn_role::kOutputWorker;
        else fail(fmt::format("{}[{}]", path, i), "unknown role '" + r + "'");
    }
    return roles;
}

std::optional<Category> parse_category(const std::string& text) {
    for (auto c : {Category::Routing, Category::Lifecycle, Category::Middleware, Category::Data, Category::Monitoring}) {
        if (text == to_string(c)) return c;
    }
    return std::nullopt;
}

std::optional<FaultKind> parse_fault_kind(const std::string& text) {
    for (auto k : {FaultKind::Kill, FaultKind::LinkDown, FaultKind::LinkUp, FaultKind::Drop, FaultKind::Corrupt}) {
        if (text == to_string(k)) return k;
    }
    return std::nullopt;
}

void read_link_params(const YAML::Node& n, LinkParams& p, const std::string& path) {
    read(n, "loss", p.loss_probability, path);
    read(n, "latency_base_ms", p.latency_base, path);
    read(n, "latency_jitter_ms", p.latency_jitter, path);
    read(n, "quality", p.quality, path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError(fmt::format("cannot open '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

Scenario Scenario::load_file(const std::string& path) {
    const auto text = read_text_file(path);
    const auto dir = std::filesystem::path(path).parent_path().string();
    return parse(text, dir.empty() ? "." : dir);
}

Scenario Scenario::parse(const std::string& yaml_text, const std::string& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ScenarioError(fmt::format("yaml: {}", e.what()));
    }
    if (!root.IsMap()) throw ScenarioError("scenario: expected a mapping at top level");
    check_keys(root, {"seed", "duration_ms", "strategy", "timers", "link", "links", "visibility", "nodes", "joins",
                      "faults", "nn", "monitor"},
               "");

    Scenario sc;
    read(root, "seed", sc.seed, "");
    read(root, "duration_ms", sc.duration, "");
    if (const auto s = root["strategy"]) {
        const auto text = as<std::string>(s, "strategy");
        const auto kind = parse_strategy_kind(text);
        if (!kind) fail("strategy", "unknown strategy '" + text + "'");
        sc.strategy = *kind;
    }

    if (const auto t = root["timers"]) {
        check_keys(t,
                   {"routing_period_ms", "fru_every", "fru_threshold", "middleware_period_ms", "staleness_periods",
                    "max_topics", "topology_timeout_ms", "pdr_window_ms", "crr_ack_timeout_ms", "crr_retries",
                    "max_recovery_attempts", "search_retry_ms", "child_confirm_timeout_ms", "event_buffer_capacity"},
                   "timers");
        read(t, "routing_period_ms", sc.routing_period, "timers");
        read(t, "fru_every", sc.fru_every, "timers");
        read(t, "fru_threshold", sc.fru_threshold, "timers");
        read(t, "middleware_period_ms", sc.middleware_period, "timers");
        read(t, "staleness_periods", sc.staleness_periods, "timers");
        read(t, "max_topics", sc.max_topics, "timers");
        read(t, "topology_timeout_ms", sc.topology_timeout, "timers");
        read(t, "pdr_window_ms", sc.lifecycle.pdr_window, "timers");
        read(t, "crr_ack_timeout_ms", sc.lifecycle.crr_ack_timeout, "timers");
        read(t, "crr_retries", sc.lifecycle.crr_retries, "timers");
        read(t, "max_recovery_attempts", sc.lifecycle.max_recovery_attempts, "timers");
        read(t, "search_retry_ms", sc.lifecycle.search_retry, "timers");
        read(t, "child_confirm_timeout_ms", sc.lifecycle.child_confirm_timeout, "timers");
        read(t, "event_buffer_capacity", sc.lifecycle.event_buffer_capacity, "timers");
    }

    if (const auto l = root["link"]) {
        check_keys(l, {"loss", "latency_base_ms", "latency_jitter_ms", "quality"}, "link");
        read_link_params(l, sc.link, "link");
    }

    if (const auto nodes = root["nodes"]) {
        if (!nodes.IsSequence()) fail("nodes", "expected a list");
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const auto path = fmt::format("nodes[{}]", i);
            const auto& n = nodes[i];
            check_keys(n, {"name", "mac", "kind", "root", "roles", "metric", "quota", "inputs", "max_children",
                           "frame_processing_ms", "compute_delay_ms", "state_handling_ms", "scan_duration_ms"},
                       path);
            NodeSpec spec;
            if (!n["name"]) fail(path + ".name", "missing");
            read(n, "name", spec.name, path);
            if (!n["mac"]) fail(path + ".mac", "missing");
            const auto mac_text = as<std::string>(n["mac"], path + ".mac");
            const auto mac = MacAddress::parse(mac_text);
            if (!mac) fail(path + ".mac", "malformed MAC '" + mac_text + "'");
            spec.mac = *mac;
            if (const auto k = n["kind"]) {
                const auto text = as<std::string>(k, path + ".kind");
                const auto kind = parse_device_kind(text);
                if (!kind) fail(path + ".kind", "unknown device kind '" + text + "'");
                spec.kind = *kind;
            }
            read(n, "root", spec.root, path);
            if (const auto r = n["roles"]) spec.roles = parse_roles(r, path + ".roles");
            read_opt(n, "metric", spec.metric, path);
            read_opt(n, "quota", spec.quota, path);
            read(n, "inputs", spec.inputs, path);
            read_opt(n, "max_children", spec.max_children, path);
            read_opt(n, "frame_processing_ms", spec.frame_processing, path);
            read_opt(n, "compute_delay_ms", spec.compute_delay, path);
            read_opt(n, "state_handling_ms", spec.state_handling, path);
            read_opt(n, "scan_duration_ms", spec.scan_duration, path);
            sc.nodes.push_back(std::move(spec));
        }
    }

    if (const auto links = root["links"]) {
        if (!links.IsSequence()) fail("links", "expected a list");
        for (std::size_t i = 0; i < links.size(); ++i) {
            const auto path = fmt::format("links[{}]", i);
            check_keys(links[i], {"a", "b", "loss", "latency_base_ms", "latency_jitter_ms", "quality"}, path);
            LinkOverride o;
            o.params = sc.link;
            read(links[i], "a", o.a, path);
            read(links[i], "b", o.b, path);
            read_link_params(links[i], o.params, path);
            sc.links.push_back(std::move(o));
        }
    }

    if (const auto v = root["visibility"]) {
        if (v.IsScalar()) {
            if (as<std::string>(v, "visibility") != "all") fail("visibility", "expected 'all' or a list of pairs");
            sc.visibility_all = true;
        } else if (v.IsSequence()) {
            sc.visibility_all = false;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const auto path = fmt::format("visibility[{}]", i);
                if (!v[i].IsSequence() || v[i].size() != 2) fail(path, "expected a pair [a, b]");
                sc.visible_pairs.emplace_back(as<std::string>(v[i][0], path), as<std::string>(v[i][1], path));
            }
        } else {
            fail("visibility", "expected 'all' or a list of pairs");
        }
    }

    std::vector<std::string> non_root;
    for (const auto& n : sc.nodes) {
        if (!n.root) non_root.push_back(n.name);
    }
    if (const auto j = root["joins"]; j && j.IsSequence()) {
        for (std::size_t i = 0; i < j.size(); ++i) {
            const auto path = fmt::format("joins[{}]", i);
            check_keys(j[i], {"node", "at_ms"}, path);
            JoinSpec js;
            read(j[i], "node", js.node, path);
            read(j[i], "at_ms", js.at, path);
            sc.joins.push_back(std::move(js));
        }
    } else {
        JoinPlan plan;
        plan.order = non_root;
        if (j) {
            check_keys(j, {"start_ms", "interval_ms", "order"}, "joins");
            read(j, "start_ms", plan.start, "joins");
            read(j, "interval_ms", plan.interval, "joins");
            if (const auto o = j["order"]) {
                if (o.IsScalar()) {
                    const auto text = as<std::string>(o, "joins.order");
                    if (text == "random") {
                        plan.shuffle = true;
                    } else if (text != "config") {
                        fail("joins.order", "expected 'config', 'random' or a list of node names");
                    }
                } else {
                    plan.order = as<std::vector<std::string>>(o, "joins.order");
                }
            }
        }
        sc.join_plan = std::move(plan);
        sc.resolve_joins();
    }

    if (const auto f = root["faults"]) {
        if (!f.IsSequence()) fail("faults", "expected a list");
        for (std::size_t i = 0; i < f.size(); ++i) {
            const auto path = fmt::format("faults[{}]", i);
            check_keys(f[i], {"kind", "at_ms", "node", "a", "b", "category", "type", "from", "to", "start_ms", "end_ms",
                              "count"},
                       path);
            FaultSpec fs;
            const auto kind_text = as<std::string>(f[i]["kind"], path + ".kind");
            const auto kind = parse_fault_kind(kind_text);
            if (!kind) fail(path + ".kind", "unknown fault kind '" + kind_text + "'");
            fs.kind = *kind;
            read(f[i], "at_ms", fs.at, path);
            read(f[i], "node", fs.node, path);
            read(f[i], "a", fs.a, path);
            read(f[i], "b", fs.b, path);
            if (const auto c = f[i]["category"]) {
                const auto text = as<std::string>(c, path + ".category");
                fs.match.category = parse_category(text);
                if (!fs.match.category) fail(path + ".category", "unknown category '" + text + "'");
            }
            if (const auto t = f[i]["type"]) fs.match.type = static_cast<std::uint8_t>(as<int>(t, path + ".type"));
            read_opt(f[i], "from", fs.match.from, path);
            read_opt(f[i], "to", fs.match.to, path);
            read(f[i], "start_ms", fs.match.start, path);
            read(f[i], "end_ms", fs.match.end, path);
            read(f[i], "count", fs.match.count, path);
            sc.faults.push_back(std::move(fs));
        }
    }

    if (const auto m = root["monitor"]) {
        check_keys(m, {"snapshot_interval_ms", "probes"}, "monitor");
        read(m, "snapshot_interval_ms", sc.snapshot_interval, "monitor");
        if (const auto p = m["probes"]) {
            if (!p.IsSequence()) fail("monitor.probes", "expected a list");
            for (std::size_t i = 0; i < p.size(); ++i) {
                const auto path = fmt::format("monitor.probes[{}]", i);
                check_keys(p[i], {"from", "to", "count", "start_ms", "interval_ms"}, path);
                ProbeSpec ps;
                read(p[i], "from", ps.from, path);
                read(p[i], "to", ps.to, path);
                read(p[i], "count", ps.count, path);
                read(p[i], "start_ms", ps.start, path);
                read(p[i], "interval_ms", ps.interval, path);
                sc.probes.push_back(std::move(ps));
            }
        }
    }

    if (const auto n = root["nn"]) {
        check_keys(n, {"model", "random_model", "cycles", "period_ms", "input_deadline_ms", "fallback_window_ms",
                       "register_retry_ms", "assign_retry_ms", "assign_retries", "settle_ms",
                       "registration_timeout_ms", "required_hidden", "required_output", "inputs"},
                   "nn");
        NnSpec spec;
        auto& c = spec.config;
        if (const auto path = n["model"]) {
            const auto rel = as<std::string>(path, "nn.model");
            const auto full = (std::filesystem::path(base_dir) / rel).string();
            try {
                spec.model = std::make_shared<const ModelSpec>(ModelSpec::load_file(full));
            } catch (const std::exception& e) {
                fail("nn.model", e.what());
            }
            spec.model_source = rel;
        } else if (const auto rm = n["random_model"]) {
            check_keys(rm, {"layers", "activation", "seed"}, "nn.random_model");
            std::vector<int> layers = as<std::vector<int>>(rm["layers"], "nn.random_model.layers");
            std::string act_text = "sigmoid";
            std::uint64_t model_seed = sc.seed;
            read(rm, "activation", act_text, "nn.random_model");
            read(rm, "seed", model_seed, "nn.random_model");
            const auto act = parse_activation(act_text);
            if (!act) fail("nn.random_model.activation", "unknown activation '" + act_text + "'");
            try {
                spec.model = std::make_shared<const ModelSpec>(random_model(layers, *act, model_seed));
            } catch (const std::exception& e) {
                fail("nn.random_model", e.what());
            }
            spec.model_source = fmt::format("random:{}", model_seed);
        } else {
            fail("nn.model", "missing (give 'model' or 'random_model')");
        }
        read(n, "cycles", c.cycles, "nn");
        read(n, "period_ms", c.period, "nn");
        read(n, "input_deadline_ms", c.input_deadline, "nn");
        read(n, "fallback_window_ms", c.fallback_window, "nn");
        read(n, "register_retry_ms", c.register_retry, "nn");
        read(n, "assign_retry_ms", c.assign_retry, "nn");
        read(n, "assign_retries", c.assign_retries, "nn");
        read(n, "settle_ms", c.settle, "nn");
        read(n, "registration_timeout_ms", c.registration_timeout, "nn");
        read(n, "required_hidden", c.required_hidden, "nn");
        read(n, "required_output", c.required_output, "nn");
        read(n, "inputs", c.fixed_inputs, "nn");
        sc.nn = std::move(spec);
    }
    return sc;
}

void Scenario::set_seed(std::uint64_t s) {
    seed = s;
    if (join_plan && join_plan->shuffle) resolve_joins();
}

void Scenario::resolve_joins() {
    if (!join_plan) return;
    auto order = join_plan->order;
    if (join_plan->shuffle) {
        Rng rng(derive_stream_seed(seed, kJoinOrderStream));
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(order[i - 1], order[k]);
        }
    }
    joins.clear();
    TimeMs at = join_plan->start;
    for (auto& name : order) {
        joins.push_back(JoinSpec{std::move(name), at});
        at += join_plan->interval;
    }
}

std::optional<std::size_t> Scenario::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].name == name) return i;
    }
    return std::nullopt;
}

std::size_t Scenario::root_index() const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].root) return i;
    }
    throw ScenarioError("scenario has no root node");
}

std::vector<std::string> Scenario::validate() const {
    std::vector<std::string> errors;
    auto err = [&](std::string path, std::string what) { errors.push_back(path + ": " + what); };
    auto known = [&](const std::string& name) { return index_of(name).has_value(); };

    if (duration <= 0) err("duration_ms", "must be positive");
    if (routing_period <= 0) err("timers.routing_period_ms", "must be positive");
    if (fru_every <= 0) err("timers.fru_every", "must be positive");
    if (fru_threshold <= 0.0 || fru_threshold > 1.0) err("timers.fru_threshold", "must be in (0, 1]");
    if (middleware_period < 0) err("timers.middleware_period_ms", "must not be negative");
    if (lifecycle.event_buffer_capacity == 0) err("timers.event_buffer_capacity", "must be positive");
    if (lifecycle.crr_retries < 0) err("timers.crr_retries", "must not be negative");
    if (lifecycle.max_recovery_attempts < 1) err("timers.max_recovery_attempts", "must be at least 1");

    auto check_link = [&](const LinkParams& p, const std::string& path) {
        if (p.loss_probability < 0.0 || p.loss_probability > 1.0) err(path + ".loss", "must be in [0, 1]");
        if (p.latency_base < 0) err(path + ".latency_base_ms", "must not be negative");
        if (p.latency_jitter < 0) err(path + ".latency_jitter_ms", "must not be negative");
        if (p.quality < 0.0) err(path + ".quality", "must not be negative");
    };
    check_link(link, "link");

    if (nodes.empty()) err("nodes", "at least one node is required");
    int roots = 0;
    std::set<std::string> names;
    std::map<std::pair<std::uint8_t, std::uint8_t>, std::string> suffixes;
    int coordinators = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        const auto path = fmt::format("nodes[{}]", i);
        if (n.name.empty()) err(path + ".name", "must not be empty");
        if (!names.insert(n.name).second) err(path + ".name", "duplicate name '" + n.name + "'");
        const auto key = std::make_pair(n.mac.octets()[4], n.mac.octets()[5]);
        if (auto [it, inserted] = suffixes.emplace(key, n.name); !inserted) {
            err(path + ".mac", fmt::format("last two bytes collide with node '{}' (both map to {})", it->second,
                                           derive_ap_ip(n.mac).to_string()));
        }
        if (n.root) ++roots;
        if (n.roles & nn_role::kCoordinator) {
            ++coordinators;
            if (!n.root) err(path + ".roles", "the coordinator must be the root node");
        }
        if (n.quota && *n.quota < 0) err(path + ".quota", "must not be negative");
        if (n.max_children && *n.max_children < 0) err(path + ".max_children", "must not be negative");
        if (!n.inputs.empty() && (n.roles & nn_role::kInputGenerator) == 0) {
            err(path + ".inputs", "only input generators produce inputs");
        }
    }
    if (roots != 1) err("nodes", fmt::format("exactly one root is required, found {}", roots));

    for (std::size_t i = 0; i < links.size(); ++i) {
        const auto path = fmt::format("links[{}]", i);
        if (!known(links[i].a)) err(path + ".a", "unknown node '" + links[i].a + "'");
        if (!known(links[i].b)) err(path + ".b", "unknown node '" + links[i].b + "'");
        if (links[i].a == links[i].b) err(path, "a link needs two distinct nodes");
        check_link(links[i].params, path);
    }
    for (std::size_t i = 0; i < visible_pairs.size(); ++i) {
        const auto& [a, b] = visible_pairs[i];
        const auto path = fmt::format("visibility[{}]", i);
        if (!known(a)) err(path, "unknown node '" + a + "'");
        if (!known(b)) err(path, "unknown node '" + b + "'");
        if (a == b) err(path, "a node cannot see itself");
    }
    std::set<std::string> joined;
    for (std::size_t i = 0; i < joins.size(); ++i) {
        const auto path = fmt::format("joins[{}]", i);
        const auto idx = index_of(joins[i].node);
        if (!idx) {
            err(path, "unknown node '" + joins[i].node + "'");
            continue;
        }
        if (nodes[*idx].root) err(path, "the root starts at t=0 and does not join");
        if (!joined.insert(joins[i].node).second) err(path, "node '" + joins[i].node + "' joins twice");
        if (joins[i].at < 0) err(path + ".at_ms", "must not be negative");
    }
    for (std::size_t i = 0; i < faults.size(); ++i) {
        const auto& f = faults[i];
        const auto path = fmt::format("faults[{}]", i);
        if (f.at < 0) err(path + ".at_ms", "must not be negative");
        switch (f.kind) {
            case FaultKind::Kill:
                if (!known(f.node)) err(path + ".node", "unknown node '" + f.node + "'");
                break;
            case FaultKind::LinkDown:
            case FaultKind::LinkUp:
                if (!known(f.a)) err(path + ".a", "unknown node '" + f.a + "'");
                if (!known(f.b)) err(path + ".b", "unknown node '" + f.b + "'");
                if (f.a == f.b) err(path, "a link needs two distinct nodes");
                break;
            case FaultKind::Drop:
            case FaultKind::Corrupt:
                if (f.match.from && !known(*f.match.from)) err(path + ".from", "unknown node '" + *f.match.from + "'");
                if (f.match.to && !known(*f.match.to)) err(path + ".to", "unknown node '" + *f.match.to + "'");
                if (f.match.end < f.match.start) err(path + ".end_ms", "precedes start_ms");
                break;
        }
    }
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto path = fmt::format("monitor.probes[{}]", i);
        if (!known(probes[i].from)) err(path + ".from", "unknown node '" + probes[i].from + "'");
        if (!known(probes[i].to)) err(path + ".to", "unknown node '" + probes[i].to + "'");
        if (probes[i].count < 0) err(path + ".count", "must not be negative");
        if (probes[i].interval <= 0) err(path + ".interval_ms", "must be positive");
    }
    if (snapshot_interval < 0) err("monitor.snapshot_interval_ms", "must not be negative");

    if (nn) {
        if (!nn->model) {
            err("nn.model", "missing");
        } else {
            try {
                nn->model->validate();
            } catch (const std::exception& e) {
                err("nn.model", e.what());
            }
            if (coordinators != 1) err("nodes", fmt::format("exactly one coordinator is required, found {}", coordinators));
            std::set<int> covered;
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                for (int idx : nodes[i].inputs) {
                    if (idx < 0 || idx >= nn->model->input_count()) {
                        err(fmt::format("nodes[{}].inputs", i), fmt::format("input index {} out of range", idx));
                    }
                    covered.insert(idx);
                }
            }
            for (int i = 0; i < nn->model->input_count(); ++i) {
                if (!covered.contains(i)) err("nodes", fmt::format("no input generator produces input {}", i));
            }
            if (!nn->config.fixed_inputs.empty() &&
                static_cast<int>(nn->config.fixed_inputs.size()) != nn->model->input_count()) {
                err("nn.inputs", "length must equal the model's input count");
            }
        }
        if (nn->config.cycles < 0) err("nn.cycles", "must not be negative");
        if (nn->config.period <= 0) err("nn.period_ms", "must be positive");
        if (strategy == StrategyKind::Inject) {
            int hidden = 0;
            bool full_model = false;
            for (const auto& n : nodes) {
                if (n.roles & nn_role::kHiddenWorker) {
                    ++hidden;
                    full_model = (n.roles & nn_role::kOutputWorker) != 0 && !n.quota;
                }
            }
            if (hidden != 1 || !full_model) {
                err("strategy", "inject supports only the centralized case: exactly one hidden-worker that is also "
                                "the output-worker and has no quota");
            }
        }
    }
    return errors;
}

}  // namespace hermes
