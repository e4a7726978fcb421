#include "hermes/nn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "hermes/sim.hpp"

namespace hermes {

const char* to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
    }
    return "?";
}

std::optional<Activation> parse_activation(std::string_view text) {
    if (text == "identity") return Activation::Identity;
    if (text == "sigmoid") return Activation::Sigmoid;
    if (text == "tanh") return Activation::Tanh;
    if (text == "relu") return Activation::Relu;
    return std::nullopt;
}

double activate(Activation a, double x) {
    switch (a) {
        case Activation::Identity: return x;
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return x > 0.0 ? x : 0.0;
    }
    return x;
}

ModelSpec::ModelSpec(std::vector<int> layer_sizes, std::vector<Activation> activations)
    : sizes_(std::move(layer_sizes)), activations_(std::move(activations)) {
    if (sizes_.size() < 2) throw ModelError("a model needs an input and an output layer");
    for (int s : sizes_) {
        if (s <= 0 || s > 0xFFFF) throw ModelError(fmt::format("invalid layer size {}", s));
    }
    if (sizes_.size() > 0xFF) throw ModelError("too many layers");
    if (activations_.size() == 1) activations_.assign(sizes_.size() - 1, activations_.front());
    if (activations_.size() == sizes_.size() - 1) activations_.insert(activations_.begin(), Activation::Identity);
    if (activations_.size() != sizes_.size()) throw ModelError("activation count does not match layer count");
    neurons_.resize(sizes_.size());
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
        neurons_[l].assign(static_cast<std::size_t>(sizes_[l]),
                           NeuronParams{0.0, std::vector<double>(static_cast<std::size_t>(sizes_[l - 1]), 0.0)});
    }
}

int ModelSpec::hidden_neuron_count() const {
    int n = 0;
    for (int l = 1; l + 1 < layer_count(); ++l) n += sizes_[l];
    return n;
}

const NeuronParams& ModelSpec::neuron(NeuronId id) const {
    if (id.layer == 0 || id.layer >= neurons_.size() || id.index >= neurons_[id.layer].size()) {
        throw ModelError(fmt::format("no neuron ({}, {})", id.layer, id.index));
    }
    return neurons_[id.layer][id.index];
}

NeuronParams& ModelSpec::neuron(NeuronId id) {
    return const_cast<NeuronParams&>(static_cast<const ModelSpec&>(*this).neuron(id));
}

void ModelSpec::set_neuron(NeuronId id, NeuronParams params) {
    auto& slot = neuron(id);
    if (params.weights.size() != slot.weights.size()) {
        throw ModelError(fmt::format("neuron ({}, {}) expects {} weights, got {}", id.layer, id.index,
                                     slot.weights.size(), params.weights.size()));
    }
    slot = std::move(params);
}

std::vector<NeuronId> ModelSpec::compute_neurons() const {
    std::vector<NeuronId> out;
    for (int l = 1; l < layer_count(); ++l) {
        for (int i = 0; i < sizes_[l]; ++i) {
            out.push_back(NeuronId{static_cast<std::uint8_t>(l), static_cast<std::uint16_t>(i)});
        }
    }
    return out;
}

void ModelSpec::validate() const {
    if (sizes_.size() < 2) throw ModelError("a model needs an input and an output layer");
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
        if (neurons_[l].size() != static_cast<std::size_t>(sizes_[l])) throw ModelError("layer width mismatch");
        for (const auto& n : neurons_[l]) {
            if (n.weights.size() != static_cast<std::size_t>(sizes_[l - 1])) {
                throw ModelError(fmt::format("layer {} weight vector length mismatch", l));
            }
            if (!std::isfinite(n.bias)) throw ModelError("non-finite bias");
            for (double w : n.weights) {
                if (!std::isfinite(w)) throw ModelError("non-finite weight");
            }
        }
    }
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

template <typename T>
T parse_number(std::string_view text, int line_no) {
    T v{};
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size()) {
        throw ModelError(fmt::format("line {}: bad number '{}'", line_no, text));
    }
    return v;
}

}  // namespace

ModelSpec ModelSpec::parse(std::string_view text) {
    std::optional<ModelSpec> model;
    std::set<NeuronId> seen;
    int line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        auto tokens = split_ws(line);
        if (tokens.empty() || tokens[0].front() == '#') continue;

        if (tokens[0] == "layers") {
            if (model) throw ModelError(fmt::format("line {}: duplicate header", line_no));
            std::vector<int> sizes;
            std::vector<Activation> acts{Activation::Sigmoid};
            for (std::size_t i = 1; i < tokens.size(); ++i) {
                if (tokens[i].starts_with("activation=")) {
                    acts.clear();
                    std::string_view list = tokens[i].substr(11);
                    while (!list.empty()) {
                        const auto comma = list.find(',');
                        auto tag = list.substr(0, comma);
                        auto a = parse_activation(tag);
                        if (!a) throw ModelError(fmt::format("line {}: unknown activation '{}'", line_no, tag));
                        acts.push_back(*a);
                        list.remove_prefix(comma == std::string_view::npos ? list.size() : comma + 1);
                    }
                } else {
                    sizes.push_back(parse_number<int>(tokens[i], line_no));
                }
            }
            model.emplace(std::move(sizes), std::move(acts));
            continue;
        }

        if (!model) throw ModelError(fmt::format("line {}: neuron before header", line_no));
        if (tokens.size() < 3) throw ModelError(fmt::format("line {}: expected 'layer index bias weights...'", line_no));
        const int layer = parse_number<int>(tokens[0], line_no);
        const int index = parse_number<int>(tokens[1], line_no);
        if (layer < 1 || layer >= model->layer_count() || index < 0 || index >= model->sizes_[layer]) {
            throw ModelError(fmt::format("line {}: neuron ({}, {}) out of range", line_no, layer, index));
        }
        NeuronParams p;
        p.bias = parse_number<double>(tokens[2], line_no);
        for (std::size_t i = 3; i < tokens.size(); ++i) p.weights.push_back(parse_number<double>(tokens[i], line_no));
        const NeuronId id{static_cast<std::uint8_t>(layer), static_cast<std::uint16_t>(index)};
        if (!seen.insert(id).second) throw ModelError(fmt::format("line {}: duplicate neuron", line_no));
        try {
            model->set_neuron(id, std::move(p));
        } catch (const ModelError& e) {
            throw ModelError(fmt::format("line {}: {}", line_no, e.what()));
        }
    }
    if (!model) throw ModelError("missing 'layers' header");
    const auto expected = model->compute_neurons().size();
    if (seen.size() != expected) {
        throw ModelError(fmt::format("model defines {} of {} neurons", seen.size(), expected));
    }
    model->validate();
    return *model;
}

ModelSpec ModelSpec::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError(fmt::format("cannot open model file '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string ModelSpec::to_text() const {
    std::string out = "layers";
    for (int s : sizes_) out += fmt::format(" {}", s);
    out += " activation=";
    for (int l = 1; l < layer_count(); ++l) {
        if (l > 1) out += ',';
        out += to_string(activations_[l]);
    }
    out += '\n';
    for (int l = 1; l < layer_count(); ++l) {
        for (int i = 0; i < sizes_[l]; ++i) {
            const auto& n = neurons_[l][i];
            out += fmt::format("{} {} {}", l, i, n.bias);
            for (double w : n.weights) out += fmt::format(" {}", w);
            out += '\n';
        }
    }
    return out;
}

double neuron_output(Activation act, const NeuronParams& p, std::span<const double> inputs) {
    double sum = 0.0;
    for (std::size_t i = 0; i < p.weights.size(); ++i) sum += p.weights[i] * inputs[i];
    return activate(act, sum + p.bias);
}

std::vector<std::vector<double>> forward_layers(const ModelSpec& model, std::span<const double> inputs) {
    if (static_cast<int>(inputs.size()) != model.input_count()) {
        throw ModelError(fmt::format("expected {} inputs, got {}", model.input_count(), inputs.size()));
    }
    std::vector<std::vector<double>> values;
    values.emplace_back(inputs.begin(), inputs.end());
    for (int l = 1; l < model.layer_count(); ++l) {
        std::vector<double> next;
        for (int i = 0; i < model.layer_sizes()[l]; ++i) {
            const NeuronId id{static_cast<std::uint8_t>(l), static_cast<std::uint16_t>(i)};
            next.push_back(neuron_output(model.activation(l), model.neuron(id), values.back()));
        }
        values.push_back(std::move(next));
    }
    return values;
}

std::vector<double> forward(const ModelSpec& model, std::span<const double> inputs) {
    return forward_layers(model, inputs).back();
}

ModelSpec random_model(const std::vector<int>& layer_sizes, Activation act, std::uint64_t seed) {
    ModelSpec model(layer_sizes, {act});
    Rng rng(derive_stream_seed(seed, 0x6d6f64656cULL));
    for (const auto& id : model.compute_neurons()) {
        auto& p = model.neuron(id);
        p.bias = rng.uniform01() * 2.0 - 1.0;
        for (double& w : p.weights) w = rng.uniform01() * 2.0 - 1.0;
    }
    return model;
}

std::vector<int> proportional_quotas(std::span<const int> weights, int total) {
    std::vector<int> out(weights.size(), 0);
    const long long wsum = std::accumulate(weights.begin(), weights.end(), 0LL);
    if (weights.empty() || wsum <= 0 || total <= 0) return out;
    std::vector<std::pair<long long, std::size_t>> remainders;
    int given = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const long long num = static_cast<long long>(weights[i]) * total;
        out[i] = static_cast<int>(num / wsum);
        given += out[i];
        remainders.emplace_back(num % wsum, i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; given < total; ++k, ++given) ++out[remainders[k % remainders.size()].second];
    return out;
}

std::vector<int> resolve_quotas(std::span<const WorkerSlot> workers, int hidden_total) {
    std::vector<int> quotas(workers.size(), 0);
    if (workers.empty()) return quotas;
    int committed = 0;
    std::vector<int> free_weights;
    std::vector<std::size_t> free_index;
    for (std::size_t i = 0; i < workers.size(); ++i) {
        if (workers[i].quota) {
            quotas[i] = std::max(0, *workers[i].quota);
            committed += quotas[i];
        } else {
            free_weights.push_back(std::max(1, workers[i].capacity));
            free_index.push_back(i);
        }
    }
    const auto shares = proportional_quotas(free_weights, std::max(0, hidden_total - committed));
    for (std::size_t k = 0; k < free_index.size(); ++k) quotas[free_index[k]] = shares[k];

    int sum = std::accumulate(quotas.begin(), quotas.end(), 0);
    for (std::size_t i = quotas.size(); i-- > 0 && sum > hidden_total;) {
        const int cut = std::min(quotas[i], sum - hidden_total);
        quotas[i] -= cut;
        sum -= cut;
    }
    if (sum < hidden_total) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < workers.size(); ++i) {
            if (workers[i].capacity > workers[best].capacity) best = i;
        }
        quotas[best] += hidden_total - sum;
    }
    return quotas;
}

std::vector<NeuronId> AssignmentPlan::neurons_of(IpAddress device) const {
    std::vector<NeuronId> out;
    for (const auto& [id, dev] : owner) {
        if (dev == device) out.push_back(id);
    }
    return out;
}

std::map<IpAddress, int> AssignmentPlan::counts() const {
    std::map<IpAddress, int> out;
    for (const auto& [id, dev] : owner) ++out[dev];
    return out;
}

std::vector<IpAddress> AssignmentPlan::devices_in_layer(int layer) const {
    std::set<IpAddress> out;
    for (const auto& [id, dev] : owner) {
        if (id.layer == layer) out.insert(dev);
    }
    return {out.begin(), out.end()};
}

AssignmentPlan assign_neurons(const ModelSpec& model, std::span<const WorkerSlot> workers,
                              IpAddress output_device) {
    AssignmentPlan plan;
    std::vector<NeuronId> hidden;
    for (const auto& id : model.compute_neurons()) {
        if (id.layer == model.output_layer()) {
            plan.owner[id] = output_device;
        } else {
            hidden.push_back(id);
        }
    }
    if (workers.empty()) {
        for (const auto& id : hidden) plan.owner[id] = output_device;
        return plan;
    }
    const auto quotas = resolve_quotas(workers, static_cast<int>(hidden.size()));
    std::size_t next = 0;
    for (std::size_t w = 0; w < workers.size(); ++w) {
        for (int k = 0; k < quotas[w] && next < hidden.size(); ++k) plan.owner[hidden[next++]] = workers[w].device;
    }
    return plan;
}

}  // namespace hermes
