#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "hermes/envelope.hpp"
#include "hermes/sim.hpp"

using namespace hermes;

namespace {

Envelope sample() {
    Envelope e;
    e.category = Category::Data;
    e.type = data_type::kNeuronValue;
    e.src = IpAddress{10, 1, 2, 1};
    e.dst = IpAddress{10, 3, 4, 1};
    e.final_dst = IpAddress{10, 5, 6, 1};
    e.id = 0xA1B2C3D4;
    e.payload = {0xDE, 0xAD, 0xBE, 0xEF, 0x00};
    return e;
}

}  // namespace

TEST_CASE("envelope layout is bit exact") {
    const auto frame = encode(sample());
    const std::vector<std::uint8_t> expected{
        0x48, 0x01, 0x04, 0x01,              // magic, version, category, type
        10,   1,    2,    1,                 // src
        10,   3,    4,    1,                 // dst
        10,   5,    6,    1,                 // final dst
        0xA1, 0xB2, 0xC3, 0xD4,              // id
        0x00, 0x05,                          // payload length
        0xDE, 0xAD, 0xBE, 0xEF, 0x00,        // payload
    };
    CHECK(frame == expected);
    CHECK(frame.size() == Envelope::kHeaderSize + 5);
}

TEST_CASE("encode and decode round-trip") {
    Rng rng(1);
    for (int i = 0; i < 500; ++i) {
        Envelope e;
        e.category = static_cast<Category>(rng.uniform_int(1, 5));
        e.type = static_cast<std::uint8_t>(rng.next());
        e.src = IpAddress{static_cast<std::uint32_t>(rng.next())};
        e.dst = IpAddress{static_cast<std::uint32_t>(rng.next())};
        e.final_dst = rng.uniform01() < 0.5 ? IpAddress{} : IpAddress{static_cast<std::uint32_t>(rng.next())};
        e.id = static_cast<std::uint32_t>(rng.next());
        e.payload.resize(static_cast<std::size_t>(rng.uniform_int(0, 300)));
        for (auto& b : e.payload) b = static_cast<std::uint8_t>(rng.next());
        const auto frame = encode(e);
        CHECK(frame.size() == e.wire_size());
        const auto back = decode(frame);
        REQUIRE(back.has_value());
        CHECK(*back == e);
    }
}

TEST_CASE("malformed frames are rejected with a reason") {
    const auto good = encode(sample());
    DecodeError err = DecodeError::None;

    std::vector<std::uint8_t> truncated(good.begin(), good.begin() + 10);
    CHECK_FALSE(decode(truncated, &err).has_value());
    CHECK(err == DecodeError::Truncated);

    std::vector<std::uint8_t> short_payload(good.begin(), good.end() - 1);
    CHECK_FALSE(decode(short_payload, &err).has_value());
    CHECK(err == DecodeError::Truncated);

    auto longer = good;
    longer.push_back(0);
    CHECK_FALSE(decode(longer, &err).has_value());
    CHECK(err == DecodeError::LengthMismatch);

    auto magic = good;
    magic[0] = 0x00;
    CHECK_FALSE(decode(magic, &err).has_value());
    CHECK(err == DecodeError::BadMagic);

    auto version = good;
    version[1] = 2;
    CHECK_FALSE(decode(version, &err).has_value());
    CHECK(err == DecodeError::BadVersion);

    auto category = good;
    category[2] = 6;
    CHECK_FALSE(decode(category, &err).has_value());
    CHECK(err == DecodeError::BadCategory);
    category[2] = 0;
    CHECK_FALSE(decode(category, &err).has_value());

    CHECK_FALSE(decode(std::vector<std::uint8_t>{}, &err).has_value());
    CHECK(err == DecodeError::Truncated);
}

TEST_CASE("decode never crashes on arbitrary bytes") {
    Rng rng(99);
    for (int i = 0; i < 5000; ++i) {
        std::vector<std::uint8_t> junk(static_cast<std::size_t>(rng.uniform_int(0, 64)));
        for (auto& b : junk) b = static_cast<std::uint8_t>(rng.next());
        if (junk.size() > 2 && rng.uniform01() < 0.5) {
            junk[0] = Envelope::kMagic;
            junk[1] = Envelope::kVersion;
        }
        const auto env = decode(junk);
        if (env) CHECK(env->wire_size() == junk.size());
    }
}

TEST_CASE("oversized payload is refused") {
    Envelope e;
    e.payload.resize(Envelope::kMaxPayload + 1);
    CHECK_THROWS_AS(encode(e), std::length_error);
}

TEST_CASE("final destination falls back to dst") {
    auto e = sample();
    CHECK(e.encapsulated());
    CHECK(e.final_destination() == IpAddress(10, 5, 6, 1));
    e.final_dst = {};
    CHECK_FALSE(e.encapsulated());
    CHECK(e.final_destination() == e.dst);
}

TEST_CASE("byte reader latches on short reads") {
    ByteWriter w;
    w.u16(0x1234);
    w.f64(-2.5);
    w.u64(0x0102030405060708ull);
    const auto data = w.take();
    CHECK(data[0] == 0x12);
    CHECK(data[1] == 0x34);
    ByteReader r(data);
    CHECK(r.u16() == 0x1234);
    CHECK(r.f64() == -2.5);
    CHECK(r.u64() == 0x0102030405060708ull);
    CHECK(r.at_end());
    CHECK(r.ok());
    CHECK(r.u32() == 0);
    CHECK_FALSE(r.ok());
}

TEST_CASE("doubles travel in network byte order and exactly") {
    for (double v : {0.0, -0.0, 1.0, 0.1, 1e-300, std::numeric_limits<double>::max(),
                     std::numeric_limits<double>::denorm_min()}) {
        ByteWriter w;
        w.f64(v);
        ByteReader r(w.data());
        const double back = r.f64();
        CHECK(std::signbit(back) == std::signbit(v));
        CHECK(back == v);
    }
    ByteWriter w;
    w.f64(1.0);
    CHECK(w.data() == std::vector<std::uint8_t>{0x3F, 0xF0, 0, 0, 0, 0, 0, 0});
}
