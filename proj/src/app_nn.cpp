#include "hermes/app_nn.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "hermes/sim.hpp"

namespace hermes {

std::string roles_to_string(std::uint8_t roles) {
    std::string out;
    auto add = [&](std::uint8_t bit, const char* name) {
        if ((roles & bit) == 0) return;
        if (!out.empty()) out += ',';
        out += name;
    };
    add(nn_role::kCoordinator, "coordinator");
    add(nn_role::kInputGenerator, "input-generator");
    add(nn_role::kHiddenWorker, "hidden-worker");
    add(nn_role::kOutputWorker, "output-worker");
    return out.empty() ? "none" : out;
}

double generated_input(std::uint64_t seed, std::uint32_t inference_id, int index) {
    const std::uint64_t key = 0x696e707574000000ULL ^ (std::uint64_t{inference_id} << 16) ^
                              static_cast<std::uint64_t>(index);
    Rng rng(derive_stream_seed(seed, key));
    return rng.uniform01();
}

namespace {

std::string neuron_text(NeuronId id) { return fmt::format("{}:{}", id.layer, id.index); }

std::vector<std::uint8_t> encode_value(std::uint32_t id, NeuronId nid, double v, bool degraded) {
    ByteWriter w;
    w.u32(id);
    w.u8(nid.layer);
    w.u16(nid.index);
    w.f64(v);
    w.u8(degraded ? 1 : 0);
    return w.take();
}

}  // namespace

NnApp::NnApp(NnConfig cfg, NnNodeSetup setup, IpAddress coordinator, std::shared_ptr<const ModelSpec> model)
    : cfg_(std::move(cfg)), setup_(std::move(setup)), coordinator_(coordinator), model_(std::move(model)) {}

void NnApp::bind(NodeServices& node, Strategy& strategy) {
    node_ = &node;
    strategy_ = &strategy;
}

NnBinding NnApp::binding() const {
    switch (strategy_->kind()) {
        case StrategyKind::PubSub: return NnBinding::Topics;
        case StrategyKind::Inject: return NnBinding::Centralized;
        default: return NnBinding::Explicit;
    }
}

Envelope NnApp::make(std::uint8_t type, IpAddress dst, std::vector<std::uint8_t> payload) {
    Envelope env;
    env.category = Category::Data;
    env.type = type;
    env.src = node_->self();
    env.dst = dst;
    env.id = node_->next_message_id();
    env.payload = std::move(payload);
    return env;
}

void NnApp::send_control(Envelope env) {
    if (env.dst == node_->self()) {
        node_->after(0, [this, env = std::move(env)] { on_data(env); });
        return;
    }
    const auto dst = env.dst;
    if (!node_->route(std::move(env))) node_->trace("no-route", fmt::format("dst={}", dst.to_string()));
}

void NnApp::on_active() {
    if (is_coordinator()) {
        if (!registration_deadline_armed_) {
            registration_deadline_armed_ = true;
            node_->trace("nn-init", "phase=register");
            node_->after(cfg_.registration_timeout, [this] { maybe_assign(true); });
            if ((setup_.roles & ~nn_role::kCoordinator) != 0) {
                ByteWriter w;
                w.u8(setup_.roles);
                w.u8(static_cast<std::uint8_t>(setup_.capacity));
                w.u16(static_cast<std::uint16_t>(setup_.quota.value_or(-1)));
                w.u8(static_cast<std::uint8_t>(setup_.input_indices.size()));
                for (int i : setup_.input_indices) w.u16(static_cast<std::uint16_t>(i));
                send_control(make(data_type::kRegister, node_->self(), w.take()));
            }
        }
        return;
    }
    if (setup_.roles == 0 || registration_started_) return;
    registration_started_ = true;
    send_registration();
}

void NnApp::send_registration() {
    if (registered_) return;
    ByteWriter w;
    w.u8(setup_.roles);
    w.u8(static_cast<std::uint8_t>(setup_.capacity));
    w.u16(static_cast<std::uint16_t>(setup_.quota.value_or(-1)));
    w.u8(static_cast<std::uint8_t>(setup_.input_indices.size()));
    for (int i : setup_.input_indices) w.u16(static_cast<std::uint16_t>(i));
    send_control(make(data_type::kRegister, coordinator_, w.take()));
    node_->after(cfg_.register_retry, [this] { send_registration(); });
}

// ---------------------------------------------------------------------------
// Coordinator

void NnApp::on_register(const Envelope& env) {
    if (!is_coordinator()) return;
    ByteReader r(env.payload);
    Registration reg;
    reg.device = env.src;
    reg.roles = r.u8();
    reg.capacity = r.u8();
    const auto quota = static_cast<std::int16_t>(r.u16());
    if (quota >= 0) reg.quota = quota;
    const auto n = r.u8();
    for (int i = 0; i < n && r.ok(); ++i) reg.inputs.push_back(r.u16());
    if (!r.ok()) return;

    const bool known = std::any_of(registrations_.begin(), registrations_.end(),
                                   [&](const Registration& x) { return x.device == reg.device; });
    if (!known) {
        node_->trace("nn-register", fmt::format("device={} roles={} capacity={}", reg.device.to_string(),
                                                roles_to_string(reg.roles), reg.capacity));
        registrations_.push_back(std::move(reg));
        auto rank = [&](IpAddress d) {
            const auto it = std::find(cfg_.worker_order.begin(), cfg_.worker_order.end(), d);
            return it - cfg_.worker_order.begin();
        };
        std::stable_sort(registrations_.begin(), registrations_.end(),
                         [&](const Registration& a, const Registration& b) { return rank(a.device) < rank(b.device); });
    }
    if (env.src != node_->self()) send_control(make(data_type::kRegisterAck, env.src, {}));
    maybe_assign(false);
}

void NnApp::maybe_assign(bool deadline_passed) {
    if (!is_coordinator() || phase_ != Phase::Registering || !model_) return;
    int hidden = 0;
    int output = 0;
    std::set<int> covered;
    for (const auto& r : registrations_) {
        if (r.roles & nn_role::kHiddenWorker) ++hidden;
        if (r.roles & nn_role::kOutputWorker) ++output;
        if (r.roles & nn_role::kInputGenerator) covered.insert(r.inputs.begin(), r.inputs.end());
    }
    bool inputs_ok = true;
    for (int i = 0; i < model_->input_count(); ++i) inputs_ok = inputs_ok && covered.contains(i);
    const bool quota_met = hidden >= cfg_.required_hidden && output >= cfg_.required_output;
    if (!inputs_ok) {
        if (deadline_passed) {
            node_->trace("nn-waiting", "reason=inputs-uncovered");
            node_->after(cfg_.registration_timeout, [this] { maybe_assign(true); });
        }
        return;
    }
    if (!quota_met && !deadline_passed) return;
    build_and_send_plan();
}

NnApp::Duty NnApp::duty_for(IpAddress device) const {
    Duty duty;
    duty.version = plan_version_;
    duty.binding = binding();
    duty.output_layer = static_cast<std::uint8_t>(model_->output_layer());
    duty.result_to = node_->self();
    for (const auto& [nid, owner] : plan_.owner) {
        if (owner != device) continue;
        NeuronDuty nd;
        nd.activation = model_->activation(nid.layer);
        nd.params = model_->neuron(nid);
        if (duty.binding != NnBinding::Topics && nid.layer < model_->output_layer()) {
            nd.consumers = plan_.devices_in_layer(nid.layer + 1);
        }
        if (nid.layer == model_->output_layer()) ++duty.output_count;
        duty.neurons.emplace(nid, std::move(nd));
    }
    std::set<int> claimed;
    for (const auto& r : registrations_) {
        if ((r.roles & nn_role::kInputGenerator) == 0) continue;
        for (int i : r.inputs) {
            if (i < 0 || i >= model_->input_count() || !claimed.insert(i).second) continue;
            if (r.device != device) continue;
            std::vector<IpAddress> consumers;
            if (duty.binding == NnBinding::Explicit) consumers = plan_.devices_in_layer(1);
            if (duty.binding == NnBinding::Centralized) consumers = {node_->self()};
            duty.inputs.emplace(static_cast<std::uint16_t>(i), std::move(consumers));
        }
    }
    return duty;
}

void NnApp::build_and_send_plan() {
    phase_ = Phase::Assigning;
    ++plan_version_;
    std::vector<WorkerSlot> workers;
    IpAddress output_device = node_->self();
    bool output_found = false;
    for (const auto& r : registrations_) {
        if (r.roles & nn_role::kHiddenWorker) workers.push_back(WorkerSlot{r.device, r.capacity, r.quota});
        if (!output_found && (r.roles & nn_role::kOutputWorker)) {
            output_device = r.device;
            output_found = true;
        }
    }
    plan_ = assign_neurons(*model_, workers, output_device);
    node_->trace("nn-init", fmt::format("phase=assign version={}", plan_version_));

    devices_.clear();
    auto add_device = [&](IpAddress d) {
        if (std::find(devices_.begin(), devices_.end(), d) == devices_.end()) devices_.push_back(d);
    };
    for (const auto& [nid, owner] : plan_.owner) add_device(owner);
    for (const auto& r : registrations_) {
        if (r.roles & nn_role::kInputGenerator) add_device(r.device);
    }
    for (const auto& d : devices_) {
        std::string list;
        for (const auto& nid : plan_.neurons_of(d)) list += (list.empty() ? "" : ",") + neuron_text(nid);
        node_->trace("nn-assign", fmt::format("version={} device={} neurons={}", plan_version_, d.to_string(),
                                              list.empty() ? "-" : list));
    }
    unacked_.clear();
    for (const auto& d : devices_) unacked_[d] = 0;
    for (const auto& d : devices_) send_assignment(d);
    const auto version = plan_version_;
    node_->after(cfg_.assign_retry, [this, version] { retry_assignments(version); });
}

void NnApp::send_assignment(IpAddress device) {
    const Duty duty = duty_for(device);
    if (device == node_->self()) {
        apply_assignment(duty);
        on_assign_ack(device, duty.version);
        return;
    }
    ByteWriter w;
    w.u32(duty.version);
    w.u8(static_cast<std::uint8_t>(duty.binding));
    w.u8(duty.output_layer);
    w.u16(duty.output_count);
    w.ip(duty.result_to);
    w.u16(static_cast<std::uint16_t>(duty.neurons.size()));
    for (const auto& [nid, nd] : duty.neurons) {
        w.u8(nid.layer);
        w.u16(nid.index);
        w.u8(static_cast<std::uint8_t>(nd.activation));
        w.f64(nd.params.bias);
        w.u16(static_cast<std::uint16_t>(nd.params.weights.size()));
        for (double x : nd.params.weights) w.f64(x);
        w.u8(static_cast<std::uint8_t>(nd.consumers.size()));
        for (const auto& c : nd.consumers) w.ip(c);
    }
    w.u8(static_cast<std::uint8_t>(duty.inputs.size()));
    for (const auto& [idx, consumers] : duty.inputs) {
        w.u16(idx);
        w.u8(static_cast<std::uint8_t>(consumers.size()));
        for (const auto& c : consumers) w.ip(c);
    }
    send_control(make(data_type::kAssign, device, w.take()));
}

void NnApp::retry_assignments(std::uint32_t version) {
    if (version != plan_version_ || phase_ != Phase::Assigning) return;
    std::vector<IpAddress> dead;
    for (auto& [device, tries] : unacked_) {
        if (++tries > cfg_.assign_retries) {
            dead.push_back(device);
        } else {
            node_->trace("nn-assign-resend", fmt::format("version={} device={}", version, device.to_string()));
            send_assignment(device);
        }
    }
    if (!dead.empty()) {
        for (const auto& d : dead) {
            node_->trace("nn-reassign", fmt::format("device={}", d.to_string()));
            std::erase_if(registrations_, [&](const Registration& r) { return r.device == d; });
        }
        build_and_send_plan();
        return;
    }
    if (!unacked_.empty()) node_->after(cfg_.assign_retry, [this, version] { retry_assignments(version); });
}

void NnApp::on_assign_ack(IpAddress device, std::uint32_t version) {
    if (!is_coordinator() || version != plan_version_ || phase_ != Phase::Assigning) return;
    unacked_.erase(device);
    if (!unacked_.empty()) return;
    phase_ = Phase::Running;
    node_->trace("nn-ready", fmt::format("version={} devices={}", version, devices_.size()));
    schedule_cycles();
}

void NnApp::schedule_cycles() {
    for (int c = 0; c < cfg_.cycles; ++c) {
        node_->after(cfg_.settle + static_cast<TimeMs>(c) * cfg_.period, [this] {
            const auto id = ++next_inference_;
            node_->trace("nn-start", fmt::format("id={}", id));
            for (const auto& d : devices_) {
                ByteWriter w;
                w.u32(id);
                send_control(make(data_type::kStart, d, w.take()));
            }
        });
    }
}

void NnApp::relay_misdirected(std::uint32_t id, NeuronId nid, const Envelope& env) {
    if (!is_coordinator() || phase_ != Phase::Running) return;
    (void)id;
    for (const auto& owner : plan_.devices_in_layer(nid.layer + 1)) {
        if (owner == node_->self()) continue;
        Envelope copy = env;
        copy.final_dst = kUnsetIp;
        copy.dst = owner;
        node_->trace("nn-relay", fmt::format("neuron={} to={}", neuron_text(nid), owner.to_string()));
        if (!node_->route(std::move(copy))) node_->trace("no-route", fmt::format("dst={}", owner.to_string()));
    }
}

// ---------------------------------------------------------------------------
// Device

void NnApp::apply_assignment(const Duty& duty) {
    if (has_duty_ && duty.version < duty_.version) return;
    const bool fresh = !has_duty_ || duty.version != duty_.version;
    duty_ = duty;
    has_duty_ = true;
    if (!fresh) return;
    node_->trace("nn-assigned",
                 fmt::format("version={} neurons={} inputs={}", duty.version, duty.neurons.size(), duty.inputs.size()));
    if (duty.binding == NnBinding::Topics) {
        for (const auto& [nid, nd] : duty.neurons) {
            strategy_->subscribe(static_cast<Topic>(nid.layer - 1));
            strategy_->publish(static_cast<Topic>(nid.layer));
        }
        if (!duty.inputs.empty()) strategy_->publish(0);
    }
}

bool NnApp::consumes_layer(int layer) const {
    return std::any_of(duty_.neurons.begin(), duty_.neurons.end(),
                       [&](const auto& kv) { return kv.first.layer == layer; });
}

void NnApp::begin_cycle(std::uint32_t id) {
    cycle_ = Cycle{};
    cycle_.id = id;
    cycle_.started = node_->now();
    std::set<std::uint8_t> layers;
    for (const auto& [nid, nd] : duty_.neurons) layers.insert(nid.layer);
    for (auto layer : layers) {
        node_->after(static_cast<TimeMs>(layer) * cfg_.input_deadline, [this, id, layer] { check_deadline(id, layer); });
    }
}

void NnApp::on_start(std::uint32_t id) {
    if (!has_duty_ || id < cycle_.id) return;
    if (id > cycle_.id) begin_cycle(id);
    for (const auto& [idx, consumers] : duty_.inputs) {
        if (cycle_.computed.contains(NeuronId{0, idx})) continue;
        const double v = idx < cfg_.fixed_inputs.size() ? cfg_.fixed_inputs[idx] : generated_input(cfg_.seed, id, idx);
        node_->trace("nn-input", fmt::format("id={} index={} value={}", id, idx, v));
        const NeuronId nid{0, idx};
        cycle_.values[nid] = Value{v, false};
        cycle_.computed.insert(nid);
        emit_value(nid, cycle_.values[nid], std::nullopt);
    }
    try_compute();
}

void NnApp::emit_value(NeuronId nid, const Value& value, std::optional<IpAddress> only_to) {
    auto payload = encode_value(cycle_.id, nid, value.v, value.degraded);
    if (only_to) {
        strategy_->send_data(make(data_type::kNeuronValue, *only_to, std::move(payload)), std::nullopt);
        return;
    }
    if (duty_.binding == NnBinding::Topics) {
        strategy_->send_data(make(data_type::kNeuronValue, kBroadcastIp, std::move(payload)), Topic{nid.layer});
        return;
    }
    const std::vector<IpAddress>* consumers = nullptr;
    if (nid.layer == 0) {
        auto it = duty_.inputs.find(nid.index);
        if (it != duty_.inputs.end()) consumers = &it->second;
    } else {
        auto it = duty_.neurons.find(nid);
        if (it != duty_.neurons.end()) consumers = &it->second.consumers;
    }
    if (consumers == nullptr) return;
    for (const auto& c : *consumers) {
        if (c == node_->self() && consumes_layer(nid.layer + 1)) continue;
        strategy_->send_data(make(data_type::kNeuronValue, c, payload), std::nullopt);
    }
}

void NnApp::on_value(std::uint32_t id, NeuronId nid, double v, bool degraded) {
    if (!has_duty_) return;
    if (id < cycle_.id) {
        node_->trace("nn-stale", fmt::format("id={} current={} neuron={}", id, cycle_.id, neuron_text(nid)));
        return;
    }
    if (id > cycle_.id) begin_cycle(id);
    if (!consumes_layer(nid.layer + 1)) return;
    if (cycle_.values.contains(nid)) return;
    cycle_.values[nid] = Value{v, degraded};
    previous_[nid] = v;
    try_compute();
}

void NnApp::try_compute() {
    std::vector<NeuronId> ready;
    for (const auto& [nid, nd] : duty_.neurons) {
        if (cycle_.computed.contains(nid) || cycle_.in_progress.contains(nid)) continue;
        bool all = true;
        for (std::size_t i = 0; i < nd.params.weights.size() && all; ++i) {
            all = cycle_.values.contains(NeuronId{static_cast<std::uint8_t>(nid.layer - 1), static_cast<std::uint16_t>(i)});
        }
        if (all) ready.push_back(nid);
    }
    if (ready.empty()) return;
    for (const auto& nid : ready) cycle_.in_progress.insert(nid);
    const auto id = cycle_.id;
    const TimeMs work = static_cast<TimeMs>(ready.size()) * node_->profile().compute_delay_per_neuron;
    node_->compute(work, [this, id, ready] {
        if (cycle_.id != id) return;
        for (const auto& nid : ready) {
            const auto& nd = duty_.neurons.at(nid);
            std::vector<double> inputs;
            bool degraded = false;
            for (std::size_t i = 0; i < nd.params.weights.size(); ++i) {
                const auto& in = cycle_.values.at(NeuronId{static_cast<std::uint8_t>(nid.layer - 1), static_cast<std::uint16_t>(i)});
                inputs.push_back(in.v);
                degraded = degraded || in.degraded;
            }
            const Value out{neuron_output(nd.activation, nd.params, inputs), degraded};
            cycle_.values[nid] = out;
            cycle_.in_progress.erase(nid);
            cycle_.computed.insert(nid);
            emit_value(nid, out, std::nullopt);
        }
        if (duty_.output_count > 0 && !cycle_.complete) {
            bool done = true;
            std::vector<double> outputs;
            bool degraded = false;
            for (std::uint16_t i = 0; i < duty_.output_count && done; ++i) {
                const NeuronId nid{duty_.output_layer, i};
                done = cycle_.computed.contains(nid);
                if (done) {
                    outputs.push_back(cycle_.values.at(nid).v);
                    degraded = degraded || cycle_.values.at(nid).degraded;
                }
            }
            if (done) {
                cycle_.complete = true;
                std::string text;
                for (double o : outputs) text += fmt::format("{}{}", text.empty() ? "" : ",", o);
                node_->trace("nn-complete",
                             fmt::format("id={} outputs={} degraded={}", id, text, degraded ? 1 : 0));
                if (duty_.result_to != node_->self()) {
                    ByteWriter w;
                    w.u32(id);
                    w.u8(static_cast<std::uint8_t>(outputs.size()));
                    for (double o : outputs) w.f64(o);
                    w.u8(degraded ? 1 : 0);
                    send_control(make(data_type::kResult, duty_.result_to, w.take()));
                }
            }
        }
        try_compute();
    });
}

std::vector<NeuronId> NnApp::missing_inputs(std::uint8_t layer) const {
    std::set<NeuronId> missing;
    for (const auto& [nid, nd] : duty_.neurons) {
        if (nid.layer != layer || cycle_.computed.contains(nid) || cycle_.in_progress.contains(nid)) continue;
        for (std::size_t i = 0; i < nd.params.weights.size(); ++i) {
            const NeuronId in{static_cast<std::uint8_t>(layer - 1), static_cast<std::uint16_t>(i)};
            if (!cycle_.values.contains(in)) missing.insert(in);
        }
    }
    return {missing.begin(), missing.end()};
}

void NnApp::check_deadline(std::uint32_t id, std::uint8_t layer) {
    if (cycle_.id != id) return;
    const auto missing = missing_inputs(layer);
    if (missing.empty()) return;
    ByteWriter w;
    w.u32(id);
    w.u8(static_cast<std::uint8_t>(missing.size()));
    std::string text;
    for (const auto& m : missing) {
        w.u8(m.layer);
        w.u16(m.index);
        text += (text.empty() ? "" : ",") + neuron_text(m);
    }
    ++nacks_sent_;
    node_->trace("nn-nack", fmt::format("id={} layer={} missing={}", id, layer, text));
    node_->route(make(data_type::kNack, kBroadcastIp, w.take()));
    node_->after(cfg_.fallback_window, [this, id, layer] { apply_fallback(id, layer); });
}

void NnApp::apply_fallback(std::uint32_t id, std::uint8_t layer) {
    if (cycle_.id != id) return;
    const auto missing = missing_inputs(layer);
    for (const auto& m : missing) {
        auto it = previous_.find(m);
        const double v = it == previous_.end() ? 0.0 : it->second;
        cycle_.values[m] = Value{v, true};
        ++fallbacks_;
        node_->trace("nn-fallback", fmt::format("id={} neuron={} value={} cached={}", id, neuron_text(m), v,
                                                it == previous_.end() ? 0 : 1));
    }
    if (!missing.empty()) try_compute();
}

void NnApp::on_nack(const Envelope& env) {
    if (!has_duty_ || env.src == node_->self()) return;
    ByteReader r(env.payload);
    const auto id = r.u32();
    const auto n = r.u8();
    std::vector<NeuronId> wanted;
    for (int i = 0; i < n && r.ok(); ++i) {
        NeuronId nid;
        nid.layer = r.u8();
        nid.index = r.u16();
        wanted.push_back(nid);
    }
    if (!r.ok() || id != cycle_.id) return;
    for (const auto& nid : wanted) {
        const bool mine = nid.layer == 0 ? duty_.inputs.contains(nid.index) : duty_.neurons.contains(nid);
        if (!mine || !cycle_.computed.contains(nid)) continue;
        node_->trace("nn-resend", fmt::format("id={} neuron={} to={}", id, neuron_text(nid), env.src.to_string()));
        emit_value(nid, cycle_.values.at(nid), env.src);
    }
}

// ---------------------------------------------------------------------------
// Dispatch

void NnApp::on_data(const Envelope& env) {
    ByteReader r(env.payload);
    switch (env.type) {
        case data_type::kRegister:
            on_register(env);
            break;
        case data_type::kRegisterAck:
            if (!registered_) node_->trace("nn-registered", fmt::format("coordinator={}", env.src.to_string()));
            registered_ = true;
            break;
        case data_type::kAssign: {
            Duty duty;
            duty.version = r.u32();
            duty.binding = static_cast<NnBinding>(r.u8());
            duty.output_layer = r.u8();
            duty.output_count = r.u16();
            duty.result_to = r.ip();
            const auto n = r.u16();
            for (int i = 0; i < n && r.ok(); ++i) {
                NeuronId nid;
                nid.layer = r.u8();
                nid.index = r.u16();
                NeuronDuty nd;
                nd.activation = static_cast<Activation>(r.u8());
                nd.params.bias = r.f64();
                nd.params.weights.resize(r.u16());
                for (double& x : nd.params.weights) x = r.f64();
                nd.consumers.resize(r.u8());
                for (auto& c : nd.consumers) c = r.ip();
                duty.neurons.emplace(nid, std::move(nd));
            }
            const auto m = r.u8();
            for (int i = 0; i < m && r.ok(); ++i) {
                const auto idx = r.u16();
                std::vector<IpAddress> consumers(r.u8());
                for (auto& c : consumers) c = r.ip();
                duty.inputs.emplace(idx, std::move(consumers));
            }
            if (!r.ok()) return;
            apply_assignment(duty);
            ByteWriter w;
            w.u32(duty.version);
            send_control(make(data_type::kAssignAck, env.src, w.take()));
            break;
        }
        case data_type::kAssignAck: {
            const auto version = r.u32();
            if (r.ok()) on_assign_ack(env.src, version);
            break;
        }
        case data_type::kStart: {
            const auto id = r.u32();
            if (r.ok()) on_start(id);
            break;
        }
        case data_type::kNeuronValue: {
            const auto id = r.u32();
            NeuronId nid;
            nid.layer = r.u8();
            nid.index = r.u16();
            const double v = r.f64();
            const bool degraded = r.u8() != 0;
            if (!r.ok()) return;
            if (is_coordinator() && (!has_duty_ || !consumes_layer(nid.layer + 1))) {
                relay_misdirected(id, nid, env);
                return;
            }
            on_value(id, nid, v, degraded);
            break;
        }
        case data_type::kNack:
            on_nack(env);
            break;
        case data_type::kResult: {
            const auto id = r.u32();
            const auto n = r.u8();
            std::string text;
            for (int i = 0; i < n && r.ok(); ++i) text += fmt::format("{}{}", text.empty() ? "" : ",", r.f64());
            const auto degraded = r.u8();
            if (r.ok() && is_coordinator()) {
                node_->trace("nn-result", fmt::format("id={} from={} outputs={} degraded={}", id,
                                                      env.src.to_string(), text, degraded));
            }
            break;
        }
        default:
            break;
    }
}

bool NnApp::intercept(const Envelope& env) {
    if (env.type != data_type::kNeuronValue || !has_duty_) return false;
    ByteReader r(env.payload);
    const auto id = r.u32();
    NeuronId nid;
    nid.layer = r.u8();
    nid.index = r.u16();
    const double v = r.f64();
    const bool degraded = r.u8() != 0;
    if (!r.ok() || !consumes_layer(nid.layer + 1)) return false;
    on_value(id, nid, v, degraded);
    return true;
}

}  // namespace hermes
