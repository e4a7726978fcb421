#include <cstring>
#include <string>
#include <vector>

#include "doctest.h"
#include "hermes/hermes.h"
#include "support.hpp"

using namespace hermes::testing;

namespace {

const char* kSmall = R"(
duration_ms: 20000
nodes:
  - {name: R, mac: "02:00:00:00:00:01", root: true}
  - {name: A, mac: "02:00:00:00:00:02"}
joins: [{node: A, at_ms: 100}]
)";

template <typename F>
std::string fetch(F&& call) {
    std::size_t needed = 0;
    REQUIRE(call(nullptr, 0, &needed) == HERMES_BUFFER_TOO_SMALL);
    std::string out(needed, '\0');
    REQUIRE(call(out.data(), out.size(), &needed) == HERMES_OK);
    REQUIRE(needed == out.size());
    out.resize(needed - 1);
    return out;
}

}  // namespace

TEST_CASE("version and status strings") {
    CHECK(std::strlen(hermes_version()) > 0);
    CHECK(std::string(hermes_status_string(HERMES_OK)) != hermes_status_string(HERMES_PARSE));
    CHECK(hermes_status_string(static_cast<hermes_status>(99)) != nullptr);
}

TEST_CASE("null arguments are refused with a message") {
    hermes_scenario* s = nullptr;
    CHECK(hermes_scenario_parse(nullptr, ".", &s) == HERMES_INVALID_ARGUMENT);
    CHECK(std::strlen(hermes_last_error()) > 0);
    CHECK(hermes_scenario_parse(kSmall, ".", nullptr) == HERMES_INVALID_ARGUMENT);
    CHECK(hermes_run_execute(nullptr) == HERMES_INVALID_ARGUMENT);
    CHECK(hermes_report_summary_get(nullptr, nullptr) == HERMES_INVALID_ARGUMENT);
    hermes_scenario_free(nullptr);
    hermes_run_free(nullptr);
    hermes_report_free(nullptr);
}

TEST_CASE("parse, load and validation errors map to their codes") {
    hermes_scenario* s = nullptr;
    CHECK(hermes_scenario_parse("nodes: [", ".", &s) == HERMES_PARSE);
    CHECK(s == nullptr);
    CHECK(hermes_scenario_parse("bogus: 1\n", ".", &s) == HERMES_PARSE);
    CHECK(std::string(hermes_last_error()) == "bogus: unknown key");
    CHECK(hermes_scenario_load("/nonexistent/x.yaml", &s) == HERMES_IO);

    REQUIRE(hermes_scenario_parse("duration_ms: 0\nnodes: [{name: R, mac: \"02:00:00:00:00:01\"}]\n", ".", &s) ==
            HERMES_OK);
    std::size_t needed = 0;
    CHECK(hermes_scenario_validate(s, nullptr, 0, &needed) == HERMES_BUFFER_TOO_SMALL);
    std::string buf(needed, '\0');
    CHECK(hermes_scenario_validate(s, buf.data(), buf.size(), &needed) == HERMES_VALIDATION);
    CHECK(buf.find("duration_ms") != std::string::npos);
    CHECK(buf.find("exactly one root") != std::string::npos);
    hermes_run* r = nullptr;
    CHECK(hermes_run_create(s, &r) == HERMES_VALIDATION);
    CHECK(r == nullptr);
    hermes_scenario_free(s);
}

TEST_CASE("run, trace and report through the C surface") {
    hermes_scenario* s = nullptr;
    REQUIRE(hermes_scenario_load(source_path("scenarios/testbed_pubsub.yaml").c_str(), &s) == HERMES_OK);
    std::size_t needed = 0;
    char empty[1] = {'x'};
    CHECK(hermes_scenario_validate(s, empty, 1, &needed) == HERMES_OK);
    CHECK(needed == 1);
    CHECK(empty[0] == '\0');
    CHECK(hermes_scenario_set_duration(s, -5) == HERMES_INVALID_ARGUMENT);
    REQUIRE(hermes_scenario_set_duration(s, 120000) == HERMES_OK);

    hermes_run* r = nullptr;
    REQUIRE(hermes_run_create(s, &r) == HERMES_OK);
    hermes_scenario_free(s);
    REQUIRE(hermes_run_execute(r) == HERMES_OK);

    const auto trace = fetch([&](char* b, std::size_t c, std::size_t* n) { return hermes_run_trace(r, b, c, n); });
    CHECK(trace.find(" kind=radio ") != std::string::npos);

    hermes_report* live = nullptr;
    REQUIRE(hermes_run_report(r, 0, -1, &live) == HERMES_OK);
    hermes_report_summary sum{};
    REQUIRE(hermes_report_summary_get(live, &sum) == HERMES_OK);
    CHECK(sum.window_end_ms == 120000);
    CHECK(sum.inference_cycles == 10);
    CHECK(sum.oracle_mismatches == 0);
    CHECK(sum.nacks == 0);
    std::uint64_t buckets = 0;
    for (auto b : sum.bytes) buckets += b;
    CHECK(buckets == sum.total_bytes);

    hermes_report* offline = nullptr;
    REQUIRE(hermes_report_from_trace(trace.c_str(), 0, -1, &offline) == HERMES_OK);
    const auto a = fetch([&](char* b, std::size_t c, std::size_t* n) { return hermes_report_records(live, b, c, n); });
    const auto b = fetch([&](char* x, std::size_t c, std::size_t* n) { return hermes_report_records(offline, x, c, n); });
    CHECK(a == b);
    const auto text = fetch([&](char* x, std::size_t c, std::size_t* n) { return hermes_report_text(live, x, c, n); });
    CHECK_FALSE(text.empty());

    hermes_report_free(live);
    hermes_report_free(offline);
    hermes_run_free(r);
}

TEST_CASE("seed changes reach the run") {
    hermes_scenario* s = nullptr;
    REQUIRE(hermes_scenario_parse(kSmall, ".", &s) == HERMES_OK);
    auto trace_for = [&](std::uint64_t seed) {
        REQUIRE(hermes_scenario_set_seed(s, seed) == HERMES_OK);
        hermes_run* r = nullptr;
        REQUIRE(hermes_run_create(s, &r) == HERMES_OK);
        REQUIRE(hermes_run_execute(r) == HERMES_OK);
        const auto t = fetch([&](char* b, std::size_t c, std::size_t* n) { return hermes_run_trace(r, b, c, n); });
        hermes_run_free(r);
        return t;
    };
    const auto a = trace_for(3);
    CHECK(trace_for(3) == a);
    CHECK(trace_for(4) != a);
    hermes_scenario_free(s);
}

TEST_CASE("an oracle mismatch surfaces as a status code") {
    hermes_scenario* s = nullptr;
    REQUIRE(hermes_scenario_load(source_path("scenarios/testbed_pubsub.yaml").c_str(), &s) == HERMES_OK);
    hermes_run* r = nullptr;
    REQUIRE(hermes_run_create(s, &r) == HERMES_OK);
    REQUIRE(hermes_run_execute(r) == HERMES_OK);
    auto trace = fetch([&](char* b, std::size_t c, std::size_t* n) { return hermes_run_trace(r, b, c, n); });
    const auto at = trace.find(" kind=nn-complete ");
    REQUIRE(at != std::string::npos);
    const auto outputs = trace.find("outputs=", at);
    const auto end = trace.find(' ', outputs);
    trace.replace(outputs, end - outputs, "outputs=0.5,0.5");
    hermes_report* rep = nullptr;
    REQUIRE(hermes_report_from_trace(trace.c_str(), 0, -1, &rep) == HERMES_OK);
    hermes_report_summary sum{};
    CHECK(hermes_report_summary_get(rep, &sum) == HERMES_ORACLE_MISMATCH);
    CHECK(sum.oracle_mismatches == 1);
    hermes_report_free(rep);
    hermes_run_free(r);
    hermes_scenario_free(s);
}

TEST_CASE("envelope codec round-trips through the C surface") {
    const std::uint8_t payload[] = {1, 2, 3, 4};
    hermes_envelope env{};
    env.category = 4;
    env.type = 1;
    env.src = 0x0A010201u;
    env.dst = 0x0A030401u;
    env.final_dst = 0;
    env.id = 77;
    env.payload = payload;
    env.payload_len = sizeof payload;
    std::size_t needed = 0;
    CHECK(hermes_envelope_encode(&env, nullptr, 0, &needed) == HERMES_BUFFER_TOO_SMALL);
    CHECK(needed == 26);
    std::vector<std::uint8_t> frame(needed);
    REQUIRE(hermes_envelope_encode(&env, frame.data(), frame.size(), &needed) == HERMES_OK);
    CHECK(frame[0] == 0x48);
    CHECK(frame[4] == 10);
    hermes_envelope back{};
    REQUIRE(hermes_envelope_decode(frame.data(), frame.size(), &back) == HERMES_OK);
    CHECK(back.src == env.src);
    CHECK(back.dst == env.dst);
    CHECK(back.id == 77);
    CHECK(back.payload_len == 4);
    CHECK(back.payload == frame.data() + 22);
    frame[0] = 0;
    CHECK(hermes_envelope_decode(frame.data(), frame.size(), &back) == HERMES_PARSE);
    env.category = 9;
    CHECK(hermes_envelope_encode(&env, frame.data(), frame.size(), &needed) == HERMES_INVALID_ARGUMENT);
}

TEST_CASE("address derivation and reference forward pass") {
    const std::uint8_t mac[6] = {0xDE, 0xAD, 0xBE, 0xEF, 0xAB, 0xCD};
    CHECK(hermes_derive_ap_ip(mac) == 0x0AABCD01u);

    const char* model = "layers 2 1 activation=identity\n1 0 0.5 2 3\n";
    const double in[2] = {1.0, 10.0};
    double out[1] = {0};
    std::size_t n = 0;
    REQUIRE(hermes_model_forward(model, in, 2, out, 1, &n) == HERMES_OK);
    CHECK(n == 1);
    CHECK(out[0] == 32.5);
    CHECK(hermes_model_forward(model, in, 1, out, 1, &n) == HERMES_INVALID_ARGUMENT);
    CHECK(hermes_model_forward(model, in, 2, out, 0, &n) == HERMES_BUFFER_TOO_SMALL);
    CHECK(hermes_model_forward("layers x", in, 2, out, 1, &n) == HERMES_PARSE);
}
