#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "hermes/envelope.hpp"
#include "hermes/middleware.hpp"
#include "hermes/nn.hpp"
#include "hermes/services.hpp"

namespace hermes {

namespace nn_role {
inline constexpr std::uint8_t kInputGenerator = 1;
inline constexpr std::uint8_t kHiddenWorker = 2;
inline constexpr std::uint8_t kOutputWorker = 4;
inline constexpr std::uint8_t kCoordinator = 8;
}  // namespace nn_role

std::string roles_to_string(std::uint8_t roles);

struct NnConfig {
    TimeMs input_deadline = 500;
    TimeMs fallback_window = 500;
    TimeMs register_retry = 1000;
    TimeMs assign_retry = 1000;
    int assign_retries = 5;
    TimeMs settle = 1000;
    TimeMs registration_timeout = 60000;
    int cycles = 10;
    TimeMs period = 2000;
    /// Registrations the coordinator waits for before assigning.
    int required_hidden = 0;
    int required_output = 0;
    /// Empty: seeded pseudo-random inputs in [0, 1).
    std::vector<double> fixed_inputs;
    std::uint64_t seed = 0;
    /// Hidden workers are walked in this order; unlisted devices follow in
    /// registration order.
    std::vector<IpAddress> worker_order;
};

struct NnNodeSetup {
    std::uint8_t roles = 0;
    int capacity = 1;
    std::optional<int> quota;
    std::vector<int> input_indices;
};

/// How neuron outputs find their consumers.
enum class NnBinding : std::uint8_t { Explicit = 0, Topics = 1, Centralized = 2 };

/// Seeded input value for (inference id, input index).
double generated_input(std::uint64_t seed, std::uint32_t inference_id, int index);

/// Distributed MLP inference, one instance per node. The coordinator instance
/// holds the model; every instance may also act as a device computing
/// assigned neurons or generating inputs.
class NnApp {
public:
    NnApp(NnConfig cfg, NnNodeSetup setup, IpAddress coordinator, std::shared_ptr<const ModelSpec> model);

    void bind(NodeServices& node, Strategy& strategy);

    /// The node reached Active.
    void on_active();
    /// Data frame whose final destination is this node.
    void on_data(const Envelope& env);
    /// Encapsulated frame unwrapped here on its way elsewhere. Returns true if consumed.
    bool intercept(const Envelope& env);

    [[nodiscard]] bool is_coordinator() const { return (setup_.roles & nn_role::kCoordinator) != 0; }
    [[nodiscard]] const AssignmentPlan& plan() const { return plan_; }
    [[nodiscard]] std::uint32_t current_inference() const { return cycle_.id; }
    [[nodiscard]] std::size_t assigned_neuron_count() const { return duty_.neurons.size(); }
    [[nodiscard]] std::uint64_t nacks_sent() const { return nacks_sent_; }
    [[nodiscard]] std::uint64_t fallbacks_used() const { return fallbacks_; }
    [[nodiscard]] bool registered() const { return registered_; }

private:
    struct NeuronDuty {
        Activation activation = Activation::Sigmoid;
        NeuronParams params;
        std::vector<IpAddress> consumers;
    };

    struct Duty {
        std::uint32_t version = 0;
        NnBinding binding = NnBinding::Explicit;
        std::uint8_t output_layer = 0;
        std::uint16_t output_count = 0;
        IpAddress result_to;
        std::map<NeuronId, NeuronDuty> neurons;
        std::map<std::uint16_t, std::vector<IpAddress>> inputs;
    };

    struct Value {
        double v = 0.0;
        bool degraded = false;
    };

    struct Cycle {
        std::uint32_t id = 0;
        TimeMs started = 0;
        std::map<NeuronId, Value> values;
        std::set<NeuronId> computed;
        std::set<NeuronId> in_progress;
        bool complete = false;
    };

    struct Registration {
        IpAddress device;
        std::uint8_t roles = 0;
        int capacity = 1;
        std::optional<int> quota;
        std::vector<int> inputs;
    };

    enum class Phase : std::uint8_t { Registering, Assigning, Running };

    // device side
    void send_registration();
    void apply_assignment(const Duty& duty);
    void begin_cycle(std::uint32_t id);
    void on_start(std::uint32_t id);
    void on_value(std::uint32_t id, NeuronId nid, double v, bool degraded);
    void try_compute();
    void emit_value(NeuronId nid, const Value& value, std::optional<IpAddress> only_to);
    void check_deadline(std::uint32_t id, std::uint8_t layer);
    void apply_fallback(std::uint32_t id, std::uint8_t layer);
    void on_nack(const Envelope& env);
    [[nodiscard]] std::vector<NeuronId> missing_inputs(std::uint8_t layer) const;
    [[nodiscard]] bool consumes_layer(int layer) const;

    // coordinator side
    void on_register(const Envelope& env);
    void maybe_assign(bool deadline_passed);
    void build_and_send_plan();
    void send_assignment(IpAddress device);
    void on_assign_ack(IpAddress device, std::uint32_t version);
    void retry_assignments(std::uint32_t version);
    void schedule_cycles();
    void relay_misdirected(std::uint32_t id, NeuronId nid, const Envelope& env);
    [[nodiscard]] Duty duty_for(IpAddress device) const;
    [[nodiscard]] NnBinding binding() const;

    Envelope make(std::uint8_t type, IpAddress dst, std::vector<std::uint8_t> payload);
    void send_control(Envelope env);

    NnConfig cfg_;
    NnNodeSetup setup_;
    IpAddress coordinator_;
    std::shared_ptr<const ModelSpec> model_;
    NodeServices* node_ = nullptr;
    Strategy* strategy_ = nullptr;

    bool registration_started_ = false;
    bool registered_ = false;
    Duty duty_;
    bool has_duty_ = false;
    Cycle cycle_;
    std::map<NeuronId, double> previous_;
    std::uint64_t nacks_sent_ = 0;
    std::uint64_t fallbacks_ = 0;

    Phase phase_ = Phase::Registering;
    std::vector<Registration> registrations_;
    bool registration_deadline_armed_ = false;
    AssignmentPlan plan_;
    std::uint32_t plan_version_ = 0;
    std::map<IpAddress, int> unacked_;
    std::vector<IpAddress> devices_;
    std::uint32_t next_inference_ = 0;
};

}  // namespace hermes
