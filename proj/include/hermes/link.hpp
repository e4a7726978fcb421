#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "hermes/types.hpp"

namespace hermes {

enum class DeviceKind : std::uint8_t { Class8266, Class32, ClassPi };

const char* to_string(DeviceKind kind);
std::optional<DeviceKind> parse_device_kind(std::string_view text);

/// Per-platform capabilities. The delays stand in for the processing speed of
/// the real boards; the slowest class has the largest values.
struct DeviceProfile {
    DeviceKind kind = DeviceKind::Class32;
    int capacity = 2;
    int max_children = 10;
    TimeMs compute_delay_per_neuron = 5;
    /// CPU time to take one received frame off the radio and dispatch it.
    TimeMs frame_processing = 2;
    /// Latency between a lifecycle event being buffered and being handled.
    TimeMs state_handling = 12;
    TimeMs scan_duration = 450;

    static DeviceProfile defaults(DeviceKind kind);
};

/// 10.<mac[4]>.<mac[5]>.1 -- also the node's gateway address.
IpAddress derive_ap_ip(const MacAddress& mac);

inline constexpr std::string_view kSsidPrefix = "HERMES_";
std::string derive_ssid(const MacAddress& mac);

inline constexpr std::uint8_t kFirstDhcpHost = 2;
inline constexpr std::uint8_t kLastDhcpHost = 254;

struct ChildLease {
    IpAddress sta_ip;
    /// Set once the child has sent its first routing update over the link.
    bool confirmed = false;
    TimeMs since = 0;
};

/// softAP side of a node. Children are keyed by their (static) AP address.
class ApInterface {
public:
    ApInterface() = default;
    ApInterface(const MacAddress& mac, int max_children);

    void start();
    /// Tears the AP down; every lease is released and the DHCP counter reset.
    void stop();
    [[nodiscard]] bool up() const { return up_; }

    [[nodiscard]] const std::string& ssid() const { return ssid_; }
    [[nodiscard]] IpAddress ap_ip() const { return ap_ip_; }
    [[nodiscard]] IpAddress gateway() const { return ap_ip_; }
    [[nodiscard]] int max_children() const { return max_children_; }
    [[nodiscard]] bool full() const { return static_cast<int>(children_.size()) >= max_children_; }

    /// DHCP-like admission. Re-admitting an existing child returns its lease
    /// unchanged; std::nullopt when the AP is down or full.
    std::optional<IpAddress> admit(IpAddress child_ap, TimeMs now);
    bool release(IpAddress child_ap);
    void confirm(IpAddress child_ap);

    [[nodiscard]] bool has_child(IpAddress child_ap) const { return children_.contains(child_ap); }
    [[nodiscard]] const std::map<IpAddress, ChildLease>& children() const { return children_; }
    [[nodiscard]] std::optional<IpAddress> sta_ip_of(IpAddress child_ap) const;
    [[nodiscard]] std::uint8_t dhcp_next() const { return dhcp_next_; }

private:
    std::string ssid_;
    IpAddress ap_ip_;
    int max_children_ = 0;
    bool up_ = false;
    std::map<IpAddress, ChildLease> children_;
    std::uint8_t dhcp_next_ = kFirstDhcpHost;
};

enum class StaState : std::uint8_t { Idle, Connecting, Connected };

/// Station side: at most one parent at a time.
class StaInterface {
public:
    void begin_connect(IpAddress parent_ap);
    void connected(IpAddress parent_ap, IpAddress sta_ip);
    void disconnect();

    [[nodiscard]] StaState state() const { return state_; }
    [[nodiscard]] std::optional<IpAddress> parent() const { return parent_; }
    [[nodiscard]] std::optional<IpAddress> sta_ip() const { return sta_ip_; }

private:
    StaState state_ = StaState::Idle;
    std::optional<IpAddress> parent_;
    std::optional<IpAddress> sta_ip_;
};

struct ScanResult {
    std::string ssid;
    IpAddress ap_ip;
    double quality = 1.0;
};

}  // namespace hermes
