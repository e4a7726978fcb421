#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hermes/types.hpp"

namespace hermes {

/// Big-endian writer for payload construction.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void ip(IpAddress a) { u32(a.value()); }
    void bytes(std::span<const std::uint8_t> data);

    [[nodiscard]] const std::vector<std::uint8_t>& data() const { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked big-endian reader. Any short read latches ok() to false and
/// returns zero from then on.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    IpAddress ip() { return IpAddress{u32()}; }
    std::vector<std::uint8_t> bytes(std::size_t n);

    [[nodiscard]] bool ok() const { return ok_; }
    [[nodiscard]] std::size_t remaining() const { return data_.size() - pos_; }
    [[nodiscard]] bool at_end() const { return pos_ == data_.size(); }

private:
    bool need(std::size_t n);

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
    bool ok_ = true;
};

enum class Category : std::uint8_t {
    Routing = 1,
    Lifecycle = 2,
    Middleware = 3,
    Data = 4,
    Monitoring = 5,
};

const char* to_string(Category c);

namespace routing_type {
inline constexpr std::uint8_t kFru = 1;
inline constexpr std::uint8_t kPru = 2;
}  // namespace routing_type

namespace lifecycle_type {
inline constexpr std::uint8_t kPdr = 1;
inline constexpr std::uint8_t kPir = 2;
inline constexpr std::uint8_t kCrr = 3;
inline constexpr std::uint8_t kAck = 4;
inline constexpr std::uint8_t kTba = 5;
inline constexpr std::uint8_t kTrn = 6;
inline constexpr std::uint8_t kPrn = 7;
}  // namespace lifecycle_type

namespace data_type {
inline constexpr std::uint8_t kNeuronValue = 1;
inline constexpr std::uint8_t kRegister = 2;
inline constexpr std::uint8_t kRegisterAck = 3;
inline constexpr std::uint8_t kAssign = 4;
inline constexpr std::uint8_t kAssignAck = 5;
inline constexpr std::uint8_t kStart = 6;
inline constexpr std::uint8_t kNack = 7;
inline constexpr std::uint8_t kResult = 8;
inline constexpr std::uint8_t kPing = 9;
inline constexpr std::uint8_t kPong = 10;
inline constexpr std::uint8_t kApplication = 11;
/// Set on data frames that carry a middleware topic header.
inline constexpr std::uint8_t kTopicFlag = 0x80;
}  // namespace data_type

namespace monitoring_type {
inline constexpr std::uint8_t kStateDurations = 1;
inline constexpr std::uint8_t kRecovery = 2;
}  // namespace monitoring_type

/// The single frame format carried on every link.
///
///   off  size  field
///     0     1  magic (0x48)
///     1     1  version (1)
///     2     1  category
///     3     1  type tag
///     4     4  src AP-IP
///     8     4  dst AP-IP
///    12     4  final dst AP-IP (0.0.0.0 unless encapsulated)
///    16     4  id / sequence
///    20     2  payload length
///    22     n  payload
///
/// All multi-byte fields are big-endian.
struct Envelope {
    static constexpr std::uint8_t kMagic = 0x48;
    static constexpr std::uint8_t kVersion = 1;
    static constexpr std::size_t kHeaderSize = 22;
    static constexpr std::size_t kMaxPayload = 0xFFFF;

    Category category = Category::Data;
    std::uint8_t type = 0;
    IpAddress src;
    IpAddress dst;
    IpAddress final_dst;
    std::uint32_t id = 0;
    std::vector<std::uint8_t> payload;

    [[nodiscard]] std::size_t wire_size() const { return kHeaderSize + payload.size(); }
    [[nodiscard]] bool encapsulated() const { return !final_dst.is_unset(); }
    /// Where the message ultimately ends up.
    [[nodiscard]] IpAddress final_destination() const { return encapsulated() ? final_dst : dst; }

    bool operator==(const Envelope&) const = default;
};

enum class DecodeError : std::uint8_t {
    None,
    Truncated,
    BadMagic,
    BadVersion,
    BadCategory,
    LengthMismatch,
};

const char* to_string(DecodeError e);

/// Throws std::length_error if the payload exceeds kMaxPayload.
std::vector<std::uint8_t> encode(const Envelope& env);

std::optional<Envelope> decode(std::span<const std::uint8_t> frame, DecodeError* error = nullptr);

}  // namespace hermes
