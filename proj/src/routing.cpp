#include "hermes/routing.hpp"

#include <algorithm>

#include "hermes/envelope.hpp"

namespace hermes {

std::vector<std::uint8_t> encode_advertisements(std::span<const Advertisement> advertised) {
    ByteWriter w;
    for (const auto& a : advertised) {
        w.ip(a.dest);
        w.u8(a.hops);
        w.u32(a.seq);
    }
    return w.take();
}

std::optional<std::vector<Advertisement>> decode_advertisements(std::span<const std::uint8_t> payload) {
    if (payload.size() % kAdvertisementSize != 0) return std::nullopt;
    ByteReader r(payload);
    std::vector<Advertisement> out;
    out.reserve(payload.size() / kAdvertisementSize);
    while (!r.at_end()) {
        Advertisement a;
        a.dest = r.ip();
        a.hops = r.u8();
        a.seq = r.u32();
        out.push_back(a);
    }
    if (!r.ok()) return std::nullopt;
    return out;
}

const char* to_string(ChangeClass c) {
    switch (c) {
        case ChangeClass::NewNode: return "new-node";
        case ChangeClass::PathChange: return "path-change";
        case ChangeClass::LinkFailure: return "link-failure";
        case ChangeClass::Minor: return "minor";
        case ChangeClass::Discarded: return "discarded";
    }
    return "?";
}

ChangeClass RoutingTable::apply_advertisement(IpAddress sender, const Advertisement& adv,
                                              bool sender_is_parent) {
    if (adv.dest == self_) return ChangeClass::Discarded;
    const bool odd = (adv.seq & 1u) != 0;
    // Parity is the unreachability signal; a triple that disagrees with itself is corrupt.
    if (odd != !adv.reachable()) return ChangeClass::Discarded;

    const std::uint8_t hops =
        adv.reachable() ? static_cast<std::uint8_t>(std::min<int>(adv.hops + 1, kInfiniteHops - 1))
                        : kInfiniteHops;

    auto it = entries_.find(adv.dest);
    if (it == entries_.end()) {
        entries_.emplace(adv.dest, RouteEntry{adv.dest, sender, hops, adv.seq});
        if (!adv.reachable()) return ChangeClass::Minor;
        pending_.insert(adv.dest);
        return ChangeClass::NewNode;
    }

    RouteEntry& stored = it->second;
    auto significant = [&](ChangeClass c) {
        if (is_significant(c)) pending_.insert(adv.dest);
        return c;
    };

    if (adv.seq < stored.seq) {
        if (sender_is_parent && !stored.reachable() && adv.reachable() && adv.seq + 1 == stored.seq) {
            stored = RouteEntry{adv.dest, sender, hops, adv.seq};
            return significant(ChangeClass::NewNode);
        }
        return ChangeClass::Discarded;
    }

    if (!adv.reachable()) {
        if (stored.next_hop != sender || adv.seq == stored.seq) return ChangeClass::Discarded;
        const bool was_reachable = stored.reachable();
        stored = RouteEntry{adv.dest, sender, kInfiniteHops, adv.seq};
        return was_reachable ? significant(ChangeClass::LinkFailure) : ChangeClass::Minor;
    }

    if (adv.seq == stored.seq) {
        if (hops >= stored.hops) return ChangeClass::Discarded;
        stored = RouteEntry{adv.dest, sender, hops, adv.seq};
        return significant(ChangeClass::PathChange);
    }

    const RouteEntry old = stored;
    stored = RouteEntry{adv.dest, sender, hops, adv.seq};
    if (!old.reachable()) return significant(ChangeClass::NewNode);
    if (old.next_hop != sender || old.hops != hops) return significant(ChangeClass::PathChange);
    return ChangeClass::Minor;
}

std::vector<IpAddress> RoutingTable::mark_neighbor_unreachable(IpAddress neighbor) {
    std::vector<IpAddress> invalidated;
    for (auto& [dest, e] : entries_) {
        if (!e.reachable()) continue;
        if (dest != neighbor && e.next_hop != neighbor) continue;
        e.seq += 1;
        e.hops = kInfiniteHops;
        pending_.insert(dest);
        invalidated.push_back(dest);
    }
    return invalidated;
}

RoutingUpdate RoutingTable::build_update(UpdateKind scheduled, double threshold_fraction) {
    bump_own_seq();
    RoutingUpdate update;
    update.sender = self_;
    update.advertised.push_back(Advertisement{self_, 0, own_seq_});

    const double full_size = static_cast<double>(entries_.size() + 1);
    const bool promote = scheduled == UpdateKind::Partial && !pending_.empty() &&
                         static_cast<double>(pending_.size()) >= threshold_fraction * full_size;
    if (scheduled == UpdateKind::Full || promote) {
        update.kind = UpdateKind::Full;
        for (const auto& [dest, e] : entries_) update.advertised.push_back({dest, e.hops, e.seq});
        pending_.clear();
        return update;
    }
    update.kind = UpdateKind::Partial;
    for (const auto& dest : pending_) {
        const auto& e = entries_.at(dest);
        update.advertised.push_back({dest, e.hops, e.seq});
    }
    return update;
}

RoutingUpdate RoutingTable::build_triggered(std::span<const IpAddress> dests) {
    bump_own_seq();
    RoutingUpdate update;
    update.kind = UpdateKind::Partial;
    update.sender = self_;
    update.advertised.push_back(Advertisement{self_, 0, own_seq_});
    std::set<IpAddress> seen;
    for (const auto& dest : dests) {
        auto it = entries_.find(dest);
        if (it == entries_.end() || !seen.insert(dest).second) continue;
        update.advertised.push_back({dest, it->second.hops, it->second.seq});
    }
    return update;
}

const RouteEntry* RoutingTable::find(IpAddress dest) const {
    auto it = entries_.find(dest);
    return it == entries_.end() ? nullptr : &it->second;
}

std::set<IpAddress> RoutingTable::destinations_via(IpAddress neighbor) const {
    std::set<IpAddress> out;
    for (const auto& [dest, e] : entries_) {
        if (e.next_hop == neighbor) out.insert(dest);
    }
    return out;
}

void RoutingTable::clear_except_self() {
    entries_.clear();
    pending_.clear();
}

NextHop resolve_next_hop(const RoutingTable& table, IpAddress dest, std::optional<IpAddress> parent,
                         const ChildMap& children) {
    if (dest == table.self()) return {NextHop::Kind::Local, dest, dest};
    const RouteEntry* e = table.find(dest);
    if (e == nullptr || !e->reachable()) return {};
    if (parent && e->next_hop == *parent) return {NextHop::Kind::Parent, *parent, *parent};
    if (auto it = children.find(e->next_hop); it != children.end()) {
        return {NextHop::Kind::Child, it->first, it->second};
    }
    return {};
}

}  // namespace hermes
