#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "hermes/types.hpp"

namespace hermes {

inline constexpr std::uint8_t kInfiniteHops = 255;

/// Per-destination routing state. Odd seq <=> hops == kInfiniteHops.
struct RouteEntry {
    IpAddress dest;
    IpAddress next_hop;
    std::uint8_t hops = kInfiniteHops;
    std::uint32_t seq = 0;

    [[nodiscard]] bool reachable() const { return hops != kInfiniteHops; }
    bool operator==(const RouteEntry&) const = default;
};

/// One (dest, hops, seq) triple as carried on the wire: 4 + 1 + 4 bytes.
struct Advertisement {
    IpAddress dest;
    std::uint8_t hops = 0;
    std::uint32_t seq = 0;

    [[nodiscard]] bool reachable() const { return hops != kInfiniteHops; }
    bool operator==(const Advertisement&) const = default;
};

enum class UpdateKind : std::uint8_t { Full = 1, Partial = 2 };

struct RoutingUpdate {
    UpdateKind kind = UpdateKind::Partial;
    IpAddress sender;
    std::vector<Advertisement> advertised;
};

inline constexpr std::size_t kAdvertisementSize = 9;

std::vector<std::uint8_t> encode_advertisements(std::span<const Advertisement> advertised);
/// std::nullopt if the payload is not a whole number of triples.
std::optional<std::vector<Advertisement>> decode_advertisements(std::span<const std::uint8_t> payload);

enum class ChangeClass : std::uint8_t { NewNode, PathChange, LinkFailure, Minor, Discarded };

const char* to_string(ChangeClass c);

/// New nodes, path changes and link failures are propagated immediately;
/// minor changes wait for the next full update.
constexpr bool is_significant(ChangeClass c) {
    return c == ChangeClass::NewNode || c == ChangeClass::PathChange || c == ChangeClass::LinkFailure;
}

inline constexpr double kDefaultFullUpdateThreshold = 0.75;

/// Destination-sequenced distance-vector table for one node.
///
/// Update rules for an advertisement (dest, hops, seq) from a neighbor:
///  - unknown dest: insert with next_hop = sender, hops + 1;
///  - lower seq: discard, except that the current parent may reinstate an
///    entry carrying our own failure mark (stored seq == advertised seq + 1);
///  - equal seq: replace only when hops + 1 is strictly shorter;
///  - higher seq: replace unconditionally. An unreachable mark is only taken
///    from the neighbor the stored route points through; in a tree no other
///    neighbor can know better.
class RoutingTable {
public:
    explicit RoutingTable(IpAddress self) : self_(self) {}

    [[nodiscard]] IpAddress self() const { return self_; }
    [[nodiscard]] std::uint32_t own_seq() const { return own_seq_; }
    /// Own sequence numbers advance by two so they stay even.
    std::uint32_t bump_own_seq() { return own_seq_ += 2; }

    ChangeClass apply_advertisement(IpAddress sender, const Advertisement& adv,
                                    bool sender_is_parent = false);

    /// Marks the neighbor and every route through it unreachable (seq + 1).
    /// Returns the invalidated destinations in address order.
    std::vector<IpAddress> mark_neighbor_unreachable(IpAddress neighbor);

    /// Builds the update for a periodic tick. A partial update carries the
    /// significant changes since the last full update; it is promoted to a full
    /// update once it would carry at least threshold * (|table| + 1) entries.
    /// Always bumps own_seq first.
    RoutingUpdate build_update(UpdateKind scheduled, double threshold_fraction = kDefaultFullUpdateThreshold);

    /// Partial update with the current state of `dests` plus the
    /// self-advertisement. Bumps own_seq.
    RoutingUpdate build_triggered(std::span<const IpAddress> dests);

    [[nodiscard]] const RouteEntry* find(IpAddress dest) const;
    [[nodiscard]] const std::map<IpAddress, RouteEntry>& entries() const { return entries_; }
    [[nodiscard]] const std::set<IpAddress>& pending_changes() const { return pending_; }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }

    /// Every destination (reachable or not) whose recorded next hop is `neighbor`.
    [[nodiscard]] std::set<IpAddress> destinations_via(IpAddress neighbor) const;

    /// Drops every non-self entry; own_seq is kept so later updates outrank
    /// failure marks other nodes hold for us.
    void clear_except_self();

private:
    IpAddress self_;
    std::uint32_t own_seq_ = 0;
    std::map<IpAddress, RouteEntry> entries_;
    std::set<IpAddress> pending_;
};

/// Where a frame for `dest` is handed to next.
struct NextHop {
    enum class Kind : std::uint8_t { Local, Parent, Child, NoRoute };
    Kind kind = Kind::NoRoute;
    /// Neighbor's AP address (routing identity).
    IpAddress neighbor;
    /// Concrete link-level address: the parent's AP-IP or the child's STA-IP.
    IpAddress link_address;
};

/// Child AP-IP -> child STA-IP.
using ChildMap = std::map<IpAddress, IpAddress>;

NextHop resolve_next_hop(const RoutingTable& table, IpAddress dest, std::optional<IpAddress> parent,
                         const ChildMap& children);

}  // namespace hermes
