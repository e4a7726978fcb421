#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "hermes/hermes.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitMismatch = 2;

template <typename Handle, typename Getter>
std::optional<std::string> read_text(Handle* h, Getter get) {
    std::size_t needed = 0;
    get(h, nullptr, 0, &needed);
    std::string out(needed, '\0');
    const auto status = get(h, out.data(), out.size(), &needed);
    if (status != HERMES_OK && status != HERMES_VALIDATION) return std::nullopt;
    out.resize(needed - 1);
    return out;
}

int report_error(const char* what) {
    std::cerr << "error: " << what << ": " << hermes_last_error() << "\n";
    return kExitError;
}

struct WindowArg {
    std::int64_t start = 0;
    std::int64_t end = -1;
};

std::optional<WindowArg> parse_window(const std::string& text) {
    const auto dots = text.find("..");
    if (dots == std::string::npos) return std::nullopt;
    WindowArg w;
    try {
        const auto a = text.substr(0, dots);
        const auto b = text.substr(dots + 2);
        if (!a.empty()) w.start = std::stoll(a);
        if (!b.empty()) w.end = std::stoll(b);
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (w.start < 0 || (w.end >= 0 && w.end < w.start)) return std::nullopt;
    return w;
}

bool write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    return static_cast<bool>(out);
}

int emit_report(hermes_report* rep, const std::optional<std::filesystem::path>& out_dir, bool records) {
    const auto text = read_text(rep, hermes_report_text);
    const auto recs = read_text(rep, hermes_report_records);
    if (!text || !recs) return report_error("report");
    std::cout << (records ? *recs : *text);
    if (out_dir) {
        if (!write_file(*out_dir / "report.txt", *text) || !write_file(*out_dir / "records.txt", *recs)) {
            std::cerr << "error: cannot write report files to " << out_dir->string() << "\n";
            return kExitError;
        }
    }
    hermes_report_summary summary{};
    if (hermes_report_summary_get(rep, &summary) == HERMES_ORACLE_MISMATCH) {
        std::cerr << "error: " << summary.oracle_mismatches << " inference cycle(s) differ from the oracle\n";
        return kExitMismatch;
    }
    return kExitOk;
}

int cmd_validate(const std::string& path) {
    hermes_scenario* s = nullptr;
    if (hermes_scenario_load(path.c_str(), &s) != HERMES_OK) return report_error(path.c_str());
    const auto problems = read_text(s, hermes_scenario_validate);
    hermes_scenario_free(s);
    if (!problems) {
        std::cerr << "error: cannot read validation result\n";
        return kExitError;
    }
    if (problems->empty()) {
        std::cout << path << ": ok\n";
        return kExitOk;
    }
    std::cerr << *problems;
    return kExitError;
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::int64_t> duration,
            const std::string& out_dir, const std::string& window_text, bool records, bool print_trace) {
    const auto window = parse_window(window_text);
    if (!window) {
        std::cerr << "error: bad window '" << window_text << "' (expected a..b)\n";
        return kExitError;
    }
    hermes_scenario* s = nullptr;
    if (hermes_scenario_load(path.c_str(), &s) != HERMES_OK) return report_error(path.c_str());
    std::unique_ptr<hermes_scenario, decltype(&hermes_scenario_free)> scenario(s, hermes_scenario_free);
    if (seed && hermes_scenario_set_seed(s, *seed) != HERMES_OK) return report_error("seed");
    if (duration && hermes_scenario_set_duration(s, *duration) != HERMES_OK) return report_error("duration");

    hermes_run* r = nullptr;
    if (hermes_run_create(s, &r) != HERMES_OK) return report_error(path.c_str());
    std::unique_ptr<hermes_run, decltype(&hermes_run_free)> run(r, hermes_run_free);
    if (hermes_run_execute(r) != HERMES_OK) return report_error("run");

    std::optional<std::filesystem::path> dir;
    if (!out_dir.empty()) {
        dir = out_dir;
        std::error_code ec;
        std::filesystem::create_directories(*dir, ec);
        if (ec) {
            std::cerr << "error: cannot create " << out_dir << ": " << ec.message() << "\n";
            return kExitError;
        }
    }
    if (dir || print_trace) {
        const auto trace = read_text(r, hermes_run_trace);
        if (!trace) return report_error("trace");
        if (print_trace) std::cout << *trace;
        if (dir && !write_file(*dir / "trace.txt", *trace)) {
            std::cerr << "error: cannot write trace to " << out_dir << "\n";
            return kExitError;
        }
    }
    hermes_report* rep = nullptr;
    if (hermes_run_report(r, window->start, window->end, &rep) != HERMES_OK) return report_error("report");
    std::unique_ptr<hermes_report, decltype(&hermes_report_free)> report(rep, hermes_report_free);
    if (print_trace) {
        hermes_report_summary summary{};
        return hermes_report_summary_get(rep, &summary) == HERMES_ORACLE_MISMATCH ? kExitMismatch : kExitOk;
    }
    return emit_report(rep, dir, records);
}

int cmd_report(const std::string& path, const std::string& window_text, bool records) {
    const auto window = parse_window(window_text);
    if (!window) {
        std::cerr << "error: bad window '" << window_text << "' (expected a..b)\n";
        return kExitError;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot open " << path << "\n";
        return kExitError;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    hermes_report* rep = nullptr;
    if (hermes_report_from_trace(buf.str().c_str(), window->start, window->end, &rep) != HERMES_OK) {
        return report_error(path.c_str());
    }
    std::unique_ptr<hermes_report, decltype(&hermes_report_free)> report(rep, hermes_report_free);
    return emit_report(rep, std::nullopt, records);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulate and analyze self-organizing mesh deployments"};
    app.set_version_flag("--version", std::string(hermes_version()));
    app.require_subcommand(1);

    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> duration;
    std::string out_dir;
    std::string window = "0..";
    bool records = false;
    bool print_trace = false;

    auto* run = app.add_subcommand("run", "Run a scenario and print the report");
    run->add_option("config", config, "Scenario file")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--duration", duration, "Override the duration in virtual ms")->check(CLI::PositiveNumber);
    run->add_option("--out", out_dir, "Write trace.txt, report.txt and records.txt here");
    run->add_option("--window", window, "Report window a..b in virtual ms");
    run->add_flag("--records", records, "Print machine-readable records instead of tables");
    run->add_flag("--trace", print_trace, "Print the raw observation trace instead of the report");

    auto* validate = app.add_subcommand("validate", "Check a scenario file");
    validate->add_option("config", config, "Scenario file")->required();

    std::string trace_path;
    auto* report = app.add_subcommand("report", "Analyze a saved trace");
    report->add_option("trace", trace_path, "Trace file")->required()->check(CLI::ExistingFile);
    report->add_option("--window", window, "Report window a..b in virtual ms");
    report->add_flag("--records", records, "Print machine-readable records instead of tables");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    if (*run) return cmd_run(config, seed, duration, out_dir, window, records, print_trace);
    if (*validate) return cmd_validate(config);
    return cmd_report(trace_path, window, records);
}
