#include "hermes/hermes.h"

#include <cstring>
#include <exception>
#include <memory>
#include <string>

#include "hermes/envelope.hpp"
#include "hermes/link.hpp"
#include "hermes/monitor.hpp"
#include "hermes/network.hpp"
#include "hermes/nn.hpp"
#include "hermes/scenario.hpp"

struct hermes_scenario {
    hermes::Scenario scenario;
};

struct hermes_run {
    std::unique_ptr<hermes::Network> network;
    bool executed = false;
};

struct hermes_report {
    hermes::Report report;
};

namespace {

thread_local std::string g_last_error;

hermes_status fail(hermes_status s, std::string message) {
    g_last_error = std::move(message);
    return s;
}

hermes_status ok() {
    g_last_error.clear();
    return HERMES_OK;
}

hermes_status copy_out(const std::string& text, char* buf, std::size_t cap, std::size_t* needed) {
    if (needed != nullptr) *needed = text.size() + 1;
    if (buf == nullptr || cap < text.size() + 1) {
        return fail(HERMES_BUFFER_TOO_SMALL, "buffer too small");
    }
    std::memcpy(buf, text.data(), text.size());
    buf[text.size()] = '\0';
    return ok();
}

template <typename F>
hermes_status guard(F&& f) {
    try {
        return f();
    } catch (const hermes::ScenarioError& e) {
        return fail(HERMES_PARSE, e.what());
    } catch (const hermes::ModelError& e) {
        return fail(HERMES_PARSE, e.what());
    } catch (const std::bad_alloc&) {
        return fail(HERMES_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(HERMES_INTERNAL, e.what());
    } catch (...) {
        return fail(HERMES_INTERNAL, "unknown error");
    }
}

hermes::Window make_window(std::int64_t start, std::int64_t end) {
    hermes::Window w;
    w.start = start < 0 ? 0 : start;
    if (end >= 0) w.end = end;
    return w;
}

}  // namespace

extern "C" {

const char* hermes_last_error(void) { return g_last_error.c_str(); }

const char* hermes_version(void) { return "0.1.0"; }

const char* hermes_status_string(hermes_status status) {
    switch (status) {
        case HERMES_OK: return "ok";
        case HERMES_INVALID_ARGUMENT: return "invalid argument";
        case HERMES_PARSE: return "parse error";
        case HERMES_VALIDATION: return "validation error";
        case HERMES_IO: return "i/o error";
        case HERMES_ORACLE_MISMATCH: return "oracle mismatch";
        case HERMES_INTERNAL: return "internal error";
        case HERMES_BUFFER_TOO_SMALL: return "buffer too small";
    }
    return "unknown status";
}

hermes_status hermes_scenario_load(const char* path, hermes_scenario** out) {
    if (path == nullptr || out == nullptr) return fail(HERMES_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    return guard([&] {
        std::FILE* f = std::fopen(path, "rb");
        if (f == nullptr) return fail(HERMES_IO, std::string("cannot open ") + path);
        std::fclose(f);
        *out = new hermes_scenario{hermes::Scenario::load_file(path)};
        return ok();
    });
}

hermes_status hermes_scenario_parse(const char* yaml, const char* base_dir, hermes_scenario** out) {
    if (yaml == nullptr || out == nullptr) return fail(HERMES_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    return guard([&] {
        *out = new hermes_scenario{hermes::Scenario::parse(yaml, base_dir != nullptr ? base_dir : ".")};
        return ok();
    });
}

hermes_status hermes_scenario_validate(const hermes_scenario* s, char* buf, std::size_t cap, std::size_t* needed) {
    if (s == nullptr) return fail(HERMES_INVALID_ARGUMENT, "null scenario");
    return guard([&] {
        std::string text;
        const auto errors = s->scenario.validate();
        for (const auto& e : errors) text += e + "\n";
        const auto st = copy_out(text, buf, cap, needed);
        if (st != HERMES_OK || errors.empty()) return st;
        return fail(HERMES_VALIDATION, errors.front());
    });
}

hermes_status hermes_scenario_set_seed(hermes_scenario* s, std::uint64_t seed) {
    if (s == nullptr) return fail(HERMES_INVALID_ARGUMENT, "null scenario");
    return guard([&] {
        s->scenario.set_seed(seed);
        return ok();
    });
}

hermes_status hermes_scenario_set_duration(hermes_scenario* s, std::int64_t duration_ms) {
    if (s == nullptr) return fail(HERMES_INVALID_ARGUMENT, "null scenario");
    if (duration_ms <= 0) return fail(HERMES_INVALID_ARGUMENT, "duration must be positive");
    s->scenario.duration = duration_ms;
    return ok();
}

void hermes_scenario_free(hermes_scenario* s) { delete s; }

hermes_status hermes_run_create(const hermes_scenario* s, hermes_run** out) {
    if (s == nullptr || out == nullptr) return fail(HERMES_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    const auto errors = s->scenario.validate();
    if (!errors.empty()) return fail(HERMES_VALIDATION, errors.front());
    return guard([&] {
        auto r = std::make_unique<hermes_run>();
        r->network = std::make_unique<hermes::Network>(s->scenario);
        *out = r.release();
        return ok();
    });
}

hermes_status hermes_run_execute(hermes_run* r) {
    if (r == nullptr) return fail(HERMES_INVALID_ARGUMENT, "null run");
    if (r->executed) return fail(HERMES_INVALID_ARGUMENT, "run already executed");
    return guard([&] {
        r->network->run();
        r->executed = true;
        return ok();
    });
}

hermes_status hermes_run_trace(const hermes_run* r, char* buf, std::size_t cap, std::size_t* needed) {
    if (r == nullptr) return fail(HERMES_INVALID_ARGUMENT, "null run");
    return guard([&] { return copy_out(r->network->trace().to_text(), buf, cap, needed); });
}

void hermes_run_free(hermes_run* r) { delete r; }

hermes_status hermes_report_from_trace(const char* trace, std::int64_t start_ms, std::int64_t end_ms,
                                       hermes_report** out) {
    if (trace == nullptr || out == nullptr) return fail(HERMES_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    if (end_ms >= 0 && end_ms < start_ms) return fail(HERMES_INVALID_ARGUMENT, "window end before start");
    return guard([&] {
        std::size_t bad = 0;
        const auto records = hermes::parse_trace(trace, &bad);
        auto rep = std::make_unique<hermes_report>();
        rep->report = hermes::analyze(records, make_window(start_ms, end_ms));
        rep->report.malformed_records += bad;
        *out = rep.release();
        return ok();
    });
}

hermes_status hermes_run_report(const hermes_run* r, std::int64_t start_ms, std::int64_t end_ms,
                                hermes_report** out) {
    if (r == nullptr || out == nullptr) return fail(HERMES_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    if (end_ms >= 0 && end_ms < start_ms) return fail(HERMES_INVALID_ARGUMENT, "window end before start");
    return guard([&] {
        auto rep = std::make_unique<hermes_report>();
        rep->report = hermes::analyze(r->network->trace().records(), make_window(start_ms, end_ms));
        *out = rep.release();
        return ok();
    });
}

hermes_status hermes_report_text(const hermes_report* r, char* buf, std::size_t cap, std::size_t* needed) {
    if (r == nullptr) return fail(HERMES_INVALID_ARGUMENT, "null report");
    return guard([&] { return copy_out(hermes::to_text(r->report), buf, cap, needed); });
}

hermes_status hermes_report_records(const hermes_report* r, char* buf, std::size_t cap, std::size_t* needed) {
    if (r == nullptr) return fail(HERMES_INVALID_ARGUMENT, "null report");
    return guard([&] { return copy_out(hermes::to_records(r->report), buf, cap, needed); });
}

hermes_status hermes_report_summary_get(const hermes_report* r, hermes_report_summary* out) {
    if (r == nullptr || out == nullptr) return fail(HERMES_INVALID_ARGUMENT, "null argument");
    const auto& rep = r->report;
    *out = hermes_report_summary{};
    out->window_start_ms = rep.window.start;
    out->window_end_ms = rep.window.end;
    for (std::size_t i = 0; i < hermes::kBucketCount; ++i) out->bytes[i] = rep.throughput.bytes[i];
    out->total_bytes = rep.throughput.total_bytes;
    out->neuron_output_bytes = rep.throughput.neuron_output;
    out->neuron_output_forwarded_bytes = rep.throughput.neuron_output_forwarded;
    out->inference_cycles = rep.timing.inference.size();
    double sum = 0.0;
    for (const auto& s : rep.timing.inference) sum += static_cast<double>(s.duration());
    out->mean_inference_ms = rep.timing.inference.empty() ? 0.0 : sum / static_cast<double>(out->inference_cycles);
    out->nacks = rep.nacks;
    out->oracle_mismatches = rep.oracle_mismatches;
    out->topology_mismatches = rep.topology_mismatches;
    return rep.oracle_mismatches > 0 ? fail(HERMES_ORACLE_MISMATCH, "inference outputs differ from the oracle")
                                     : ok();
}

void hermes_report_free(hermes_report* r) { delete r; }

hermes_status hermes_envelope_encode(const hermes_envelope* env, std::uint8_t* buf, std::size_t cap,
                                     std::size_t* needed) {
    if (env == nullptr || (env->payload == nullptr && env->payload_len > 0)) {
        return fail(HERMES_INVALID_ARGUMENT, "null argument");
    }
    if (env->category < 1 || env->category > 5) return fail(HERMES_INVALID_ARGUMENT, "unknown category");
    if (env->payload_len > hermes::Envelope::kMaxPayload) return fail(HERMES_INVALID_ARGUMENT, "payload too large");
    return guard([&] {
        hermes::Envelope e;
        e.category = static_cast<hermes::Category>(env->category);
        e.type = env->type;
        e.src = hermes::IpAddress{env->src};
        e.dst = hermes::IpAddress{env->dst};
        e.final_dst = hermes::IpAddress{env->final_dst};
        e.id = env->id;
        if (env->payload_len > 0) e.payload.assign(env->payload, env->payload + env->payload_len);
        const auto frame = hermes::encode(e);
        if (needed != nullptr) *needed = frame.size();
        if (buf == nullptr || cap < frame.size()) return fail(HERMES_BUFFER_TOO_SMALL, "buffer too small");
        std::memcpy(buf, frame.data(), frame.size());
        return ok();
    });
}

hermes_status hermes_envelope_decode(const std::uint8_t* frame, std::size_t len, hermes_envelope* out) {
    if ((frame == nullptr && len > 0) || out == nullptr) return fail(HERMES_INVALID_ARGUMENT, "null argument");
    hermes::DecodeError err = hermes::DecodeError::None;
    const auto env = hermes::decode(std::span<const std::uint8_t>(frame, len), &err);
    if (!env) return fail(HERMES_PARSE, std::string("malformed frame: ") + hermes::to_string(err));
    out->category = static_cast<std::uint8_t>(env->category);
    out->type = env->type;
    out->src = env->src.value();
    out->dst = env->dst.value();
    out->final_dst = env->final_dst.value();
    out->id = env->id;
    out->payload = env->payload.empty() ? nullptr : frame + hermes::Envelope::kHeaderSize;
    out->payload_len = env->payload.size();
    return ok();
}

std::uint32_t hermes_derive_ap_ip(const std::uint8_t mac[6]) {
    if (mac == nullptr) return 0;
    std::array<std::uint8_t, 6> octets{};
    std::memcpy(octets.data(), mac, 6);
    return hermes::derive_ap_ip(hermes::MacAddress{octets}).value();
}

hermes_status hermes_model_forward(const char* model_text, const double* inputs, std::size_t n_inputs,
                                   double* outputs, std::size_t cap, std::size_t* n_outputs) {
    if (model_text == nullptr || (inputs == nullptr && n_inputs > 0)) {
        return fail(HERMES_INVALID_ARGUMENT, "null argument");
    }
    return guard([&] {
        const auto model = hermes::ModelSpec::parse(model_text);
        if (static_cast<std::size_t>(model.input_count()) != n_inputs) {
            return fail(HERMES_INVALID_ARGUMENT, "input count does not match the model");
        }
        const auto y = hermes::forward(model, std::span<const double>(inputs, n_inputs));
        if (n_outputs != nullptr) *n_outputs = y.size();
        if (outputs == nullptr || cap < y.size()) return fail(HERMES_BUFFER_TOO_SMALL, "buffer too small");
        std::copy(y.begin(), y.end(), outputs);
        return ok();
    });
}

}  // extern "C"
