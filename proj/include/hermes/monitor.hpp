#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hermes/envelope.hpp"
#include "hermes/sim.hpp"

namespace hermes {

/// Closed interval [start, end] of virtual time.
struct Window {
    TimeMs start = 0;
    TimeMs end = std::numeric_limits<TimeMs>::max();

    [[nodiscard]] bool contains(TimeMs t) const { return t >= start && t <= end; }
    /// Accepts "a..b", "a.." and "..b".
    static std::optional<Window> parse(std::string_view text);
};

/// Accounting buckets: the five categories plus malformed frames.
enum class Bucket : std::uint8_t { Routing, Lifecycle, Middleware, Data, Monitoring, Malformed };
inline constexpr std::size_t kBucketCount = 6;
const char* to_string(Bucket b);
Bucket bucket_of(Category c);

struct ThroughputReport {
    Window window;
    std::array<std::uint64_t, kBucketCount> bytes{};
    std::array<std::uint64_t, kBucketCount> frames{};
    std::uint64_t total_bytes = 0;
    /// Data sub-buckets.
    std::uint64_t neuron_output = 0;
    std::uint64_t neuron_output_forwarded = 0;
    /// Every data byte relayed through the observer rather than addressed to it.
    std::uint64_t data_forwarded = 0;

    [[nodiscard]] std::uint64_t of(Bucket b) const { return bytes[static_cast<std::size_t>(b)]; }
    [[nodiscard]] double seconds() const;
    /// Bytes per second over the window.
    [[nodiscard]] double rate(Bucket b) const;
    [[nodiscard]] double rate_of(std::uint64_t bytes) const;
};

/// Per-frame accounting at the observation node.
class ThroughputAccumulator {
public:
    explicit ThroughputAccumulator(IpAddress observer = {}) : observer_(observer) {}

    /// Decodes and counts one received frame; never throws.
    void record(std::span<const std::uint8_t> frame);
    /// Counts an already-classified frame (`fwd`: final destination elsewhere).
    void record(Bucket bucket, std::uint8_t type, std::uint64_t bytes, bool fwd);

    [[nodiscard]] ThroughputReport report(Window w) const;

private:
    IpAddress observer_;
    ThroughputReport acc_;
};

struct IntegrationSample {
    std::string node;
    TimeMs at = 0;
    TimeMs init = 0;
    TimeMs search = 0;
    TimeMs join = 0;
    TimeMs total = 0;
};

struct RecoverySample {
    std::string node;
    TimeMs at = 0;
    TimeMs duration = 0;
};

struct RttStats {
    std::vector<TimeMs> samples;
    int lost = 0;

    [[nodiscard]] double mean() const;
    [[nodiscard]] double stddev() const;
};

enum class Verdict : std::uint8_t { Match, Mismatch, Degraded, Unchecked };
const char* to_string(Verdict v);

struct InferenceSample {
    std::uint32_t id = 0;
    TimeMs start = 0;
    TimeMs end = 0;
    std::vector<double> outputs;
    std::vector<double> expected;
    bool degraded = false;
    Verdict verdict = Verdict::Unchecked;
    double max_error = 0.0;

    [[nodiscard]] TimeMs duration() const { return end - start; }
};

struct InitPhaseSample {
    std::uint32_t version = 0;
    TimeMs start = 0;
    TimeMs end = 0;

    [[nodiscard]] TimeMs duration() const { return end - start; }
};

struct TimingReport {
    std::vector<IntegrationSample> integration;
    std::vector<RecoverySample> recovery;
    std::map<int, RttStats> rtt_by_hops;
    std::vector<InferenceSample> inference;
    std::vector<InitPhaseSample> init_phase;
};

struct TopologySnapshot {
    TimeMs at = 0;
    /// child -> parent, as names.
    std::map<std::string, std::string> edges;
    bool matches_ground_truth = true;
};

struct Report {
    Window window;
    ThroughputReport throughput;
    TimingReport timing;
    std::vector<TopologySnapshot> topology;
    std::uint64_t nacks = 0;
    std::uint64_t fallbacks = 0;
    std::uint64_t resends = 0;
    std::uint64_t oracle_mismatches = 0;
    std::uint64_t topology_mismatches = 0;
    std::uint64_t malformed_records = 0;
};

struct MonitorOptions {
    /// Absolute tolerance for the oracle comparison of inference outputs.
    double tolerance = 1e-9;
};

/// Pure post-processing pass over an observation stream.
Report analyze(std::span<const TraceRecord> records, Window window, const MonitorOptions& opts = {});

/// Parses a line-delimited trace; unparsable lines are counted, not fatal.
std::vector<TraceRecord> parse_trace(std::string_view text, std::size_t* bad_lines = nullptr);

/// Human-readable tables.
std::string to_text(const Report& r);
/// Machine-readable, one `key=value` record per line.
std::string to_records(const Report& r);

/// Value of `key` in a `k=v k=v` detail string.
std::optional<std::string> detail_field(std::string_view detail, std::string_view key);

}  // namespace hermes
