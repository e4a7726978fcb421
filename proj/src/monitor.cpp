#include "hermes/monitor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "hermes/nn.hpp"

namespace hermes {

namespace {

template <typename T>
std::optional<T> to_number(std::string_view text) {
    T v{};
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size()) return std::nullopt;
    return v;
}

template <typename T>
std::optional<T> field_number(std::string_view detail, std::string_view key) {
    const auto f = detail_field(detail, key);
    if (!f) return std::nullopt;
    return to_number<T>(*f);
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> out;
    while (!text.empty()) {
        const auto pos = text.find(sep);
        out.push_back(text.substr(0, pos));
        if (pos == std::string_view::npos) break;
        text.remove_prefix(pos + 1);
    }
    return out;
}

std::optional<std::vector<double>> parse_doubles(std::string_view text) {
    std::vector<double> out;
    for (auto part : split(text, ',')) {
        auto v = to_number<double>(part);
        if (!v) return std::nullopt;
        out.push_back(*v);
    }
    return out;
}

std::optional<Bucket> parse_bucket(std::string_view text) {
    for (std::size_t i = 0; i < kBucketCount; ++i) {
        if (text == to_string(static_cast<Bucket>(i))) return static_cast<Bucket>(i);
    }
    return std::nullopt;
}

bool is_neuron_output(std::uint8_t type) {
    return (type & static_cast<std::uint8_t>(~data_type::kTopicFlag)) == data_type::kNeuronValue;
}

using EdgeMap = std::map<std::string, std::string>;

EdgeMap parse_edges(std::string_view text) {
    EdgeMap out;
    if (text == "-") return out;
    for (auto e : split(text, ',')) {
        const auto gt = e.find('>');
        if (gt == std::string_view::npos) continue;
        out.emplace(std::string(e.substr(0, gt)), std::string(e.substr(gt + 1)));
    }
    return out;
}

double round_ms(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

std::optional<std::string> detail_field(std::string_view detail, std::string_view key) {
    std::size_t pos = 0;
    while (pos < detail.size()) {
        const auto end = detail.find(' ', pos);
        const auto token = detail.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        if (token.size() > key.size() && token.substr(0, key.size()) == key && token[key.size()] == '=') {
            return std::string(token.substr(key.size() + 1));
        }
        if (end == std::string_view::npos) break;
        pos = end + 1;
    }
    return std::nullopt;
}

std::optional<Window> Window::parse(std::string_view text) {
    const auto dots = text.find("..");
    if (dots == std::string_view::npos) return std::nullopt;
    Window w;
    const auto a = text.substr(0, dots);
    const auto b = text.substr(dots + 2);
    if (!a.empty()) {
        auto v = to_number<TimeMs>(a);
        if (!v) return std::nullopt;
        w.start = *v;
    }
    if (!b.empty()) {
        auto v = to_number<TimeMs>(b);
        if (!v) return std::nullopt;
        w.end = *v;
    }
    if (w.end < w.start) return std::nullopt;
    return w;
}

const char* to_string(Bucket b) {
    switch (b) {
        case Bucket::Routing: return "routing";
        case Bucket::Lifecycle: return "lifecycle";
        case Bucket::Middleware: return "middleware";
        case Bucket::Data: return "data";
        case Bucket::Monitoring: return "monitoring";
        case Bucket::Malformed: return "malformed";
    }
    return "?";
}

Bucket bucket_of(Category c) {
    switch (c) {
        case Category::Routing: return Bucket::Routing;
        case Category::Lifecycle: return Bucket::Lifecycle;
        case Category::Middleware: return Bucket::Middleware;
        case Category::Data: return Bucket::Data;
        case Category::Monitoring: return Bucket::Monitoring;
    }
    return Bucket::Malformed;
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Match: return "match";
        case Verdict::Mismatch: return "mismatch";
        case Verdict::Degraded: return "degraded";
        case Verdict::Unchecked: return "unchecked";
    }
    return "?";
}

double ThroughputReport::seconds() const {
    return static_cast<double>(window.end - window.start) / 1000.0;
}

double ThroughputReport::rate_of(std::uint64_t b) const {
    const double s = seconds();
    return s > 0.0 ? static_cast<double>(b) / s : 0.0;
}

double ThroughputReport::rate(Bucket b) const { return rate_of(of(b)); }

void ThroughputAccumulator::record(std::span<const std::uint8_t> frame) {
    const auto env = decode(frame);
    if (!env) {
        record(Bucket::Malformed, 0, frame.size(), false);
        return;
    }
    const auto final_dest = env->final_destination();
    const bool fwd = !final_dest.is_broadcast() && final_dest != observer_;
    record(bucket_of(env->category), env->type, frame.size(), fwd);
}

void ThroughputAccumulator::record(Bucket bucket, std::uint8_t type, std::uint64_t bytes, bool fwd) {
    const auto i = static_cast<std::size_t>(bucket);
    acc_.bytes[i] += bytes;
    acc_.frames[i] += 1;
    acc_.total_bytes += bytes;
    if (bucket != Bucket::Data) return;
    if (fwd) acc_.data_forwarded += bytes;
    if (is_neuron_output(type)) {
        acc_.neuron_output += bytes;
        if (fwd) acc_.neuron_output_forwarded += bytes;
    }
}

ThroughputReport ThroughputAccumulator::report(Window w) const {
    auto r = acc_;
    r.window = w;
    return r;
}

double RttStats::mean() const {
    if (samples.empty()) return 0.0;
    double sum = 0.0;
    for (auto s : samples) sum += static_cast<double>(s);
    return sum / static_cast<double>(samples.size());
}

double RttStats::stddev() const {
    if (samples.size() < 2) return 0.0;
    const double m = mean();
    double acc = 0.0;
    for (auto s : samples) acc += (static_cast<double>(s) - m) * (static_cast<double>(s) - m);
    return std::sqrt(acc / static_cast<double>(samples.size() - 1));
}

std::vector<TraceRecord> parse_trace(std::string_view text, std::size_t* bad_lines) {
    std::vector<TraceRecord> out;
    std::size_t bad = 0;
    for (auto line : split(text, '\n')) {
        if (line.empty()) continue;
        TraceRecord r;
        if (TraceRecord::parse(line, r)) {
            out.push_back(std::move(r));
        } else {
            ++bad;
        }
    }
    if (bad_lines != nullptr) *bad_lines = bad;
    return out;
}

Report analyze(std::span<const TraceRecord> records, Window window, const MonitorOptions& opts) {
    Report rep;
    if (window.end == std::numeric_limits<TimeMs>::max()) {
        window.end = records.empty() ? 0 : records.back().t;
    }
    rep.window = window;

    std::map<NodeId, std::string> ip_of;
    std::map<std::string, std::string> name_of_ip;
    std::optional<NodeId> observer;
    std::optional<ModelSpec> model;
    std::map<std::uint32_t, std::map<int, double>> inputs;
    std::map<std::uint32_t, TimeMs> starts;
    std::set<std::uint32_t> completed;
    std::map<std::uint32_t, TimeMs> assign_started;
    std::map<std::tuple<NodeId, std::string, std::uint32_t>, int> probes;
    EdgeMap edges;
    ThroughputAccumulator acc;

    auto name = [&](const std::string& ip) {
        const auto it = name_of_ip.find(ip);
        return it == name_of_ip.end() ? ip : it->second;
    };
    auto drop_node = [&](const std::string& ip) {
        edges.erase(ip);
        std::erase_if(edges, [&](const auto& e) { return e.second == ip; });
    };

    for (const auto& r : records) {
        const bool in = window.contains(r.t);
        const auto& k = r.kind;
        const std::string_view d = r.detail;
        if (k == "member") {
            if (auto ip = detail_field(d, "ip")) {
                ip_of[r.node] = *ip;
                name_of_ip[*ip] = detail_field(d, "name").value_or(*ip);
            }
        } else if (k == "node") {
            if (detail_field(d, "root") == "1") observer = r.node;
            if (auto ip = detail_field(d, "ip")) ip_of.try_emplace(r.node, *ip);
        } else if (k == "model") {
            const auto pos = d.find("text=");
            if (pos != std::string_view::npos) {
                std::string text(d.substr(pos + 5));
                std::replace(text.begin(), text.end(), '|', '\n');
                try {
                    model = ModelSpec::parse(text);
                } catch (const std::exception&) {
                    model.reset();
                }
            }
        } else if (k == "rx") {
            if (!in || r.node != observer) continue;
            const auto cat = detail_field(d, "cat");
            const auto bucket = cat ? parse_bucket(*cat) : std::nullopt;
            const auto bytes = field_number<std::uint64_t>(d, "bytes");
            if (!bucket || !bytes) {
                ++rep.malformed_records;
                continue;
            }
            const auto type = field_number<unsigned>(d, "type").value_or(0);
            acc.record(*bucket, static_cast<std::uint8_t>(type), *bytes, detail_field(d, "fwd") == "1");
        } else if (k == "parent") {
            if (auto p = detail_field(d, "parent"); p && ip_of.contains(r.node)) edges[ip_of[r.node]] = *p;
        } else if (k == "parent-lost" || (k == "topology-parent" && detail_field(d, "switched") == "1")) {
            if (ip_of.contains(r.node)) edges.erase(ip_of[r.node]);
        } else if (k == "child-left" || k == "lease-expired") {
            const auto child = detail_field(d, "child");
            if (child && ip_of.contains(r.node)) {
                const auto it = edges.find(*child);
                if (it != edges.end() && it->second == ip_of[r.node]) edges.erase(it);
            }
        } else if (k == "killed" || k == "restart") {
            if (ip_of.contains(r.node)) drop_node(ip_of[r.node]);
        } else if (k == "snapshot") {
            if (!in) continue;
            const auto truth = parse_edges(detail_field(d, "edges").value_or("-"));
            TopologySnapshot snap;
            snap.at = r.t;
            for (const auto& [c, p] : edges) snap.edges.emplace(name(c), name(p));
            snap.matches_ground_truth = truth == edges;
            if (!snap.matches_ground_truth) ++rep.topology_mismatches;
            rep.topology.push_back(std::move(snap));
        } else if (k == "monm") {
            if (!in) continue;
            IntegrationSample s;
            s.node = name(detail_field(d, "node").value_or("?"));
            s.at = r.t;
            s.init = field_number<TimeMs>(d, "init").value_or(0);
            s.search = field_number<TimeMs>(d, "search").value_or(0);
            s.join = field_number<TimeMs>(d, "join").value_or(0);
            s.total = field_number<TimeMs>(d, "total").value_or(0);
            rep.timing.integration.push_back(std::move(s));
        } else if (k == "monm-recovery") {
            if (!in) continue;
            rep.timing.recovery.push_back(RecoverySample{name(detail_field(d, "node").value_or("?")), r.t,
                                                         field_number<TimeMs>(d, "duration").value_or(0)});
        } else if (k == "rtt-probe") {
            if (!in) continue;
            const auto dst = detail_field(d, "dst").value_or("");
            const auto seq = field_number<std::uint32_t>(d, "seq").value_or(0);
            probes[{r.node, dst, seq}] = field_number<int>(d, "hops").value_or(-1);
        } else if (k == "rtt") {
            const auto dst = detail_field(d, "dst").value_or("");
            const auto seq = field_number<std::uint32_t>(d, "seq").value_or(0);
            const auto it = probes.find({r.node, dst, seq});
            if (it == probes.end()) continue;
            probes.erase(it);
            const auto hops = field_number<int>(d, "hops").value_or(-1);
            rep.timing.rtt_by_hops[hops].samples.push_back(field_number<TimeMs>(d, "rtt").value_or(0));
        } else if (k == "nn-input") {
            const auto id = field_number<std::uint32_t>(d, "id");
            const auto idx = field_number<int>(d, "index");
            const auto v = field_number<double>(d, "value");
            if (id && idx && v) inputs[*id][*idx] = *v;
        } else if (k == "nn-start") {
            if (auto id = field_number<std::uint32_t>(d, "id")) starts.try_emplace(*id, r.t);
        } else if (k == "nn-complete") {
            const auto id = field_number<std::uint32_t>(d, "id");
            if (!id || !in || !completed.insert(*id).second) continue;
            InferenceSample s;
            s.id = *id;
            s.end = r.t;
            s.start = starts.contains(*id) ? starts[*id] : r.t;
            s.outputs = parse_doubles(detail_field(d, "outputs").value_or("")).value_or(std::vector<double>{});
            s.degraded = detail_field(d, "degraded") == "1";
            if (s.degraded) {
                s.verdict = Verdict::Degraded;
            } else if (model && inputs.contains(*id) &&
                       static_cast<int>(inputs[*id].size()) == model->input_count()) {
                std::vector<double> x;
                for (const auto& [i, v] : inputs[*id]) x.push_back(v);
                s.expected = forward(*model, x);
                s.max_error = s.expected.size() == s.outputs.size() ? 0.0 : INFINITY;
                for (std::size_t i = 0; i < s.outputs.size() && i < s.expected.size(); ++i) {
                    s.max_error = std::max(s.max_error, std::abs(s.outputs[i] - s.expected[i]));
                }
                s.verdict = s.max_error <= opts.tolerance ? Verdict::Match : Verdict::Mismatch;
                if (s.verdict == Verdict::Mismatch) ++rep.oracle_mismatches;
            }
            rep.timing.inference.push_back(std::move(s));
        } else if (k == "nn-init") {
            if (detail_field(d, "phase") == "assign") {
                if (auto v = field_number<std::uint32_t>(d, "version")) assign_started[*v] = r.t;
            }
        } else if (k == "nn-ready") {
            const auto v = field_number<std::uint32_t>(d, "version");
            if (!v || !in || !assign_started.contains(*v)) continue;
            rep.timing.init_phase.push_back(InitPhaseSample{*v, assign_started[*v], r.t});
        } else if (k == "nn-nack") {
            if (in) ++rep.nacks;
        } else if (k == "nn-fallback") {
            if (in) ++rep.fallbacks;
        } else if (k == "nn-resend") {
            if (in) ++rep.resends;
        }
    }
    for (const auto& [key, hops] : probes) ++rep.timing.rtt_by_hops[hops].lost;
    rep.throughput = acc.report(window);
    return rep;
}

std::string to_text(const Report& r) {
    std::string out;
    auto line = [&](std::string s) {
        out += s;
        out += '\n';
    };
    const auto& t = r.throughput;
    line(fmt::format("window {}..{} ms ({:.1f} s)", r.window.start, r.window.end, t.seconds()));
    line("");
    line("throughput at the root");
    line(fmt::format("  {:<12} {:>12} {:>10} {:>10}", "category", "bytes", "frames", "B/s"));
    for (std::size_t i = 0; i < kBucketCount; ++i) {
        const auto b = static_cast<Bucket>(i);
        line(fmt::format("  {:<12} {:>12} {:>10} {:>10.2f}", to_string(b), t.bytes[i], t.frames[i], t.rate(b)));
    }
    line(fmt::format("  {:<12} {:>12} {:>10} {:>10.2f}", "total", t.total_bytes, "", t.rate_of(t.total_bytes)));
    line(fmt::format("  data: neuron-output {} B ({:.2f} B/s), forwarded {} B ({:.2f} B/s), all forwarded {} B",
                     t.neuron_output, t.rate_of(t.neuron_output), t.neuron_output_forwarded,
                     t.rate_of(t.neuron_output_forwarded), t.data_forwarded));
    line("");
    line("integration (init + search + join)");
    for (const auto& s : r.timing.integration) {
        line(fmt::format("  {:<10} at {:>8} ms  init {:>5}  search {:>6}  join {:>6}  total {:>6}", s.node, s.at,
                         s.init, s.search, s.join, s.total));
    }
    if (!r.timing.recovery.empty()) {
        line("");
        line("parent recovery");
        for (const auto& s : r.timing.recovery) {
            line(fmt::format("  {:<10} at {:>8} ms  duration {:>6} ms", s.node, s.at, s.duration));
        }
    }
    if (!r.timing.rtt_by_hops.empty()) {
        line("");
        line("round-trip time");
        for (const auto& [hops, s] : r.timing.rtt_by_hops) {
            line(fmt::format("  hops {:>2}  samples {:>4}  lost {:>3}  mean {:>8.2f} ms  stddev {:>8.2f} ms", hops,
                             s.samples.size(), s.lost, s.mean(), s.stddev()));
        }
    }
    if (!r.timing.init_phase.empty()) {
        line("");
        line("initialization phase (assignment to last acknowledgment)");
        for (const auto& s : r.timing.init_phase) {
            line(fmt::format("  version {:>3}  {:>6} ms", s.version, s.duration()));
        }
    }
    if (!r.timing.inference.empty()) {
        line("");
        line("inference");
        double sum = 0.0;
        for (const auto& s : r.timing.inference) {
            sum += static_cast<double>(s.duration());
            std::string outs;
            for (auto v : s.outputs) outs += fmt::format("{}{:.6f}", outs.empty() ? "" : ",", v);
            line(fmt::format("  id {:>4}  {:>6} ms  outputs {}  {} (max error {:.3g})", s.id, s.duration(), outs,
                             to_string(s.verdict), s.max_error));
        }
        line(fmt::format("  mean duration {:.2f} ms over {} cycles; nacks {}, resends {}, fallbacks {}",
                         sum / static_cast<double>(r.timing.inference.size()), r.timing.inference.size(), r.nacks,
                         r.resends, r.fallbacks));
    }
    if (!r.topology.empty()) {
        line("");
        line("topology");
        std::string last;
        for (const auto& s : r.topology) {
            std::string edges;
            for (const auto& [c, p] : s.edges) edges += fmt::format("{}{}->{}", edges.empty() ? "" : " ", c, p);
            if (edges == last && s.matches_ground_truth) continue;
            last = edges;
            line(fmt::format("  {:>8} ms  {}{}", s.at, edges.empty() ? "(root only)" : edges,
                             s.matches_ground_truth ? "" : "  [differs from ground truth]"));
        }
    }
    line("");
    line(fmt::format("oracle mismatches {}; topology mismatches {}", r.oracle_mismatches, r.topology_mismatches));
    return out;
}

std::string to_records(const Report& r) {
    std::string out;
    auto rec = [&](std::string s) {
        out += s;
        out += '\n';
    };
    const auto& t = r.throughput;
    rec(fmt::format("record=window start={} end={}", r.window.start, r.window.end));
    for (std::size_t i = 0; i < kBucketCount; ++i) {
        const auto b = static_cast<Bucket>(i);
        rec(fmt::format("record=throughput category={} bytes={} frames={} rate={:.4f}", to_string(b), t.bytes[i],
                        t.frames[i], t.rate(b)));
    }
    rec(fmt::format("record=throughput category=total bytes={} rate={:.4f}", t.total_bytes, t.rate_of(t.total_bytes)));
    rec(fmt::format("record=throughput-data neuron_output={} neuron_output_forwarded={} forwarded={}", t.neuron_output,
                    t.neuron_output_forwarded, t.data_forwarded));
    for (const auto& s : r.timing.integration) {
        rec(fmt::format("record=integration node={} at={} init={} search={} join={} total={}", s.node, s.at, s.init,
                        s.search, s.join, s.total));
    }
    for (const auto& s : r.timing.recovery) {
        rec(fmt::format("record=recovery node={} at={} duration={}", s.node, s.at, s.duration));
    }
    for (const auto& [hops, s] : r.timing.rtt_by_hops) {
        rec(fmt::format("record=rtt hops={} samples={} lost={} mean={} stddev={}", hops, s.samples.size(), s.lost,
                        round_ms(s.mean()), round_ms(s.stddev())));
    }
    for (const auto& s : r.timing.init_phase) {
        rec(fmt::format("record=init-phase version={} start={} end={} duration={}", s.version, s.start, s.end,
                        s.duration()));
    }
    for (const auto& s : r.timing.inference) {
        std::string outs;
        for (auto v : s.outputs) outs += fmt::format("{}{}", outs.empty() ? "" : ",", v);
        rec(fmt::format("record=inference id={} start={} end={} duration={} outputs={} verdict={} max_error={}", s.id,
                        s.start, s.end, s.duration(), outs.empty() ? "-" : outs, to_string(s.verdict), s.max_error));
    }
    for (const auto& s : r.topology) {
        std::string edges;
        for (const auto& [c, p] : s.edges) edges += fmt::format("{}{}>{}", edges.empty() ? "" : ",", c, p);
        rec(fmt::format("record=topology at={} edges={} ground_truth={}", s.at, edges.empty() ? "-" : edges,
                        s.matches_ground_truth ? "match" : "differs"));
    }
    rec(fmt::format("record=summary nacks={} resends={} fallbacks={} oracle_mismatches={} topology_mismatches={} "
                    "malformed_records={}",
                    r.nacks, r.resends, r.fallbacks, r.oracle_mismatches, r.topology_mismatches, r.malformed_records));
    return out;
}

}  // namespace hermes
