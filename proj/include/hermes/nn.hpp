#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hermes/types.hpp"

namespace hermes {

enum class Activation : std::uint8_t { Identity, Sigmoid, Tanh, Relu };

const char* to_string(Activation a);
std::optional<Activation> parse_activation(std::string_view text);
double activate(Activation a, double x);

struct NeuronId {
    std::uint8_t layer = 0;
    std::uint16_t index = 0;

    auto operator<=>(const NeuronId&) const = default;
};

struct NeuronParams {
    double bias = 0.0;
    std::vector<double> weights;

    bool operator==(const NeuronParams&) const = default;
};

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fully connected MLP. Layer 0 is the input layer and has no parameters.
///
/// Text format:
///   layers 2 4 4 2 activation=sigmoid
///   1 0 <bias> <w0> <w1>
///   ...
/// `activation=` takes one tag for every layer or a comma separated tag per
/// non-input layer. Lines starting with '#' are comments.
class ModelSpec {
public:
    ModelSpec() = default;
    ModelSpec(std::vector<int> layer_sizes, std::vector<Activation> activations);

    static ModelSpec parse(std::string_view text);
    static ModelSpec load_file(const std::string& path);
    [[nodiscard]] std::string to_text() const;

    [[nodiscard]] const std::vector<int>& layer_sizes() const { return sizes_; }
    [[nodiscard]] int layer_count() const { return static_cast<int>(sizes_.size()); }
    [[nodiscard]] int output_layer() const { return layer_count() - 1; }
    [[nodiscard]] int input_count() const { return sizes_.empty() ? 0 : sizes_.front(); }
    [[nodiscard]] int output_count() const { return sizes_.empty() ? 0 : sizes_.back(); }
    [[nodiscard]] int hidden_neuron_count() const;
    [[nodiscard]] Activation activation(int layer) const { return activations_.at(layer); }

    [[nodiscard]] const NeuronParams& neuron(NeuronId id) const;
    NeuronParams& neuron(NeuronId id);
    void set_neuron(NeuronId id, NeuronParams params);

    /// Every non-input neuron in layer-major, index order.
    [[nodiscard]] std::vector<NeuronId> compute_neurons() const;

    /// Throws ModelError on any inconsistency.
    void validate() const;

    bool operator==(const ModelSpec&) const = default;

private:
    std::vector<int> sizes_;
    /// activations_[0] is unused.
    std::vector<Activation> activations_;
    std::vector<std::vector<NeuronParams>> neurons_;
};

/// activation(sum_i w_i * x_i + bias), summed in index order.
double neuron_output(Activation act, const NeuronParams& p, std::span<const double> inputs);

/// All layer values, layer 0 being the inputs.
std::vector<std::vector<double>> forward_layers(const ModelSpec& model, std::span<const double> inputs);
std::vector<double> forward(const ModelSpec& model, std::span<const double> inputs);

/// Weights and biases uniform on [-1, 1).
ModelSpec random_model(const std::vector<int>& layer_sizes, Activation act, std::uint64_t seed);

struct WorkerSlot {
    IpAddress device;
    int capacity = 1;
    std::optional<int> quota;
};

/// Largest-remainder apportionment of `total` proportional to `weights`.
/// Ties on the remainder go to the earlier slot.
std::vector<int> proportional_quotas(std::span<const int> weights, int total);

/// Resolves per-worker hidden-neuron quotas. Explicit quotas are kept (and
/// trimmed from the back if they over-commit); workers without one share the
/// rest proportionally to capacity. Any shortfall goes to the worker with
/// the largest capacity, the earliest one on ties.
std::vector<int> resolve_quotas(std::span<const WorkerSlot> workers, int hidden_total);

struct AssignmentPlan {
    std::map<NeuronId, IpAddress> owner;

    [[nodiscard]] std::vector<NeuronId> neurons_of(IpAddress device) const;
    [[nodiscard]] std::map<IpAddress, int> counts() const;
    [[nodiscard]] std::vector<IpAddress> devices_in_layer(int layer) const;
};

/// Hidden neurons are walked layer by layer in index order and handed out as
/// contiguous runs, one run per worker in the given order. Output neurons all
/// go to `output_device`. With no workers, hidden neurons go to
/// `output_device` as well.
AssignmentPlan assign_neurons(const ModelSpec& model, std::span<const WorkerSlot> workers,
                              IpAddress output_device);

}  // namespace hermes
