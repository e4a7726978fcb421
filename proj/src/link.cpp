#include "hermes/link.hpp"

#include <fmt/format.h>

namespace hermes {

const char* to_string(DeviceKind kind) {
    switch (kind) {
        case DeviceKind::Class8266: return "class-8266";
        case DeviceKind::Class32: return "class-32";
        case DeviceKind::ClassPi: return "class-pi";
    }
    return "?";
}

std::optional<DeviceKind> parse_device_kind(std::string_view text) {
    if (text == "class-8266") return DeviceKind::Class8266;
    if (text == "class-32") return DeviceKind::Class32;
    if (text == "class-pi") return DeviceKind::ClassPi;
    return std::nullopt;
}

DeviceProfile DeviceProfile::defaults(DeviceKind kind) {
    switch (kind) {
        case DeviceKind::Class8266:
            return {kind, 1, 4, 12, 12, 30, 900};
        case DeviceKind::Class32:
            return {kind, 2, 10, 5, 2, 12, 450};
        case DeviceKind::ClassPi:
            return {kind, 3, 16, 1, 1, 5, 300};
    }
    return {};
}

IpAddress derive_ap_ip(const MacAddress& mac) {
    return IpAddress{10, mac.octets()[4], mac.octets()[5], 1};
}

std::string derive_ssid(const MacAddress& mac) {
    return fmt::format("{}{:02X}{:02X}", kSsidPrefix, mac.octets()[4], mac.octets()[5]);
}

ApInterface::ApInterface(const MacAddress& mac, int max_children)
    : ssid_(derive_ssid(mac)), ap_ip_(derive_ap_ip(mac)), max_children_(max_children) {}

void ApInterface::start() {
    up_ = true;
    dhcp_next_ = kFirstDhcpHost;
}

void ApInterface::stop() {
    up_ = false;
    children_.clear();
    dhcp_next_ = kFirstDhcpHost;
}

std::optional<IpAddress> ApInterface::admit(IpAddress child_ap, TimeMs now) {
    if (!up_) return std::nullopt;
    if (auto it = children_.find(child_ap); it != children_.end()) return it->second.sta_ip;
    if (full()) return std::nullopt;

    auto taken = [&](std::uint8_t host) {
        for (const auto& [ap, lease] : children_) {
            if (lease.sta_ip.host() == host) return true;
        }
        return false;
    };
    constexpr int kPool = kLastDhcpHost - kFirstDhcpHost + 1;
    for (int tries = 0; tries < kPool; ++tries) {
        const std::uint8_t host = dhcp_next_;
        dhcp_next_ = host == kLastDhcpHost ? kFirstDhcpHost : static_cast<std::uint8_t>(host + 1);
        if (taken(host)) continue;
        const IpAddress sta = ap_ip_.with_host(host);
        children_.emplace(child_ap, ChildLease{sta, false, now});
        return sta;
    }
    return std::nullopt;
}

bool ApInterface::release(IpAddress child_ap) { return children_.erase(child_ap) > 0; }

void ApInterface::confirm(IpAddress child_ap) {
    if (auto it = children_.find(child_ap); it != children_.end()) it->second.confirmed = true;
}

std::optional<IpAddress> ApInterface::sta_ip_of(IpAddress child_ap) const {
    auto it = children_.find(child_ap);
    if (it == children_.end()) return std::nullopt;
    return it->second.sta_ip;
}

void StaInterface::begin_connect(IpAddress parent_ap) {
    state_ = StaState::Connecting;
    parent_ = parent_ap;
    sta_ip_.reset();
}

void StaInterface::connected(IpAddress parent_ap, IpAddress sta_ip) {
    state_ = StaState::Connected;
    parent_ = parent_ap;
    sta_ip_ = sta_ip;
}

void StaInterface::disconnect() {
    state_ = StaState::Idle;
    parent_.reset();
    sta_ip_.reset();
}

}  // namespace hermes
