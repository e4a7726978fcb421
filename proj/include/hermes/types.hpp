#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace hermes {

/// Virtual time in milliseconds.
using TimeMs = std::int64_t;

/// Index of a node inside a scenario. Stable for the lifetime of a run.
using NodeId = std::uint32_t;

inline constexpr NodeId kEnvironment = 0xFFFFFFFFu;

class MacAddress {
public:
    constexpr MacAddress() = default;
    constexpr explicit MacAddress(std::array<std::uint8_t, 6> octets) : octets_(octets) {}

    /// Accepts "aa:bb:cc:dd:ee:ff" (case-insensitive, ':' or '-').
    static std::optional<MacAddress> parse(std::string_view text);

    [[nodiscard]] constexpr const std::array<std::uint8_t, 6>& octets() const { return octets_; }
    [[nodiscard]] std::string to_string() const;

    constexpr auto operator<=>(const MacAddress&) const = default;

private:
    std::array<std::uint8_t, 6> octets_{};
};

/// IPv4 address held in host order; octet 0 is the most significant.
class IpAddress {
public:
    constexpr IpAddress() = default;
    constexpr explicit IpAddress(std::uint32_t value) : value_(value) {}
    constexpr IpAddress(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
        : value_((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) | (std::uint32_t{c} << 8) | d) {}

    static std::optional<IpAddress> parse(std::string_view text);

    [[nodiscard]] constexpr std::uint32_t value() const { return value_; }
    [[nodiscard]] constexpr std::uint8_t octet(int i) const {
        return static_cast<std::uint8_t>(value_ >> (8 * (3 - i)));
    }
    [[nodiscard]] constexpr bool is_unset() const { return value_ == 0; }
    [[nodiscard]] constexpr bool is_broadcast() const { return value_ == 0xFFFFFFFFu; }
    /// /24 network prefix.
    [[nodiscard]] constexpr std::uint32_t prefix24() const { return value_ & 0xFFFFFF00u; }
    [[nodiscard]] constexpr std::uint8_t host() const { return static_cast<std::uint8_t>(value_); }
    [[nodiscard]] constexpr IpAddress with_host(std::uint8_t host) const {
        return IpAddress{prefix24() | host};
    }
    [[nodiscard]] std::string to_string() const;

    constexpr auto operator<=>(const IpAddress&) const = default;

private:
    std::uint32_t value_ = 0;
};

inline constexpr IpAddress kUnsetIp{};
inline constexpr IpAddress kBroadcastIp{0xFFFFFFFFu};

}  // namespace hermes
