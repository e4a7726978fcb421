#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hermes/envelope.hpp"
#include "hermes/lifecycle.hpp"
#include "hermes/link.hpp"
#include "hermes/types.hpp"

namespace hermes {

/// What a node exposes to the layers above routing (middleware and
/// application). Everything here acts on the calling node only.
class NodeServices {
public:
    virtual ~NodeServices() = default;

    [[nodiscard]] virtual TimeMs now() const = 0;
    [[nodiscard]] virtual IpAddress self() const = 0;
    [[nodiscard]] virtual bool is_root() const = 0;
    [[nodiscard]] virtual IpAddress root() const = 0;
    [[nodiscard]] virtual std::optional<IpAddress> parent() const = 0;
    [[nodiscard]] virtual std::vector<IpAddress> children() const = 0;
    [[nodiscard]] virtual LifecycleState state() const = 0;
    [[nodiscard]] virtual const DeviceProfile& profile() const = 0;
    /// Routing distance, std::nullopt if unreachable. Zero for self.
    [[nodiscard]] virtual std::optional<int> hops_to(IpAddress dest) const = 0;

    /// Fresh per-source message id.
    virtual std::uint32_t next_message_id() = 0;

    /// Hands a frame to routing; env.dst selects the next hop. Broadcast
    /// destinations flood the tree. Returns false when there is no route.
    virtual bool route(Envelope env) = 0;
    /// Sends over the direct tree link to `neighbor` (parent or child).
    virtual bool send_to_neighbor(IpAddress neighbor, Envelope env) = 0;

    /// Timer local to this node; dropped if the node dies first.
    virtual void after(TimeMs delay, std::function<void()> fn) = 0;
    /// Occupies the node's CPU for `work` ms after anything already queued.
    virtual void compute(TimeMs work, std::function<void()> fn) = 0;

    virtual void trace(std::string kind, std::string detail) = 0;
};

}  // namespace hermes
