#include "ufp/fault.hpp"

#include <algorithm>
#include <cmath>
#include <span>

namespace ufp {

const char* fault_kind_name(FaultKind k) {
    return k == FaultKind::stuck_at ? "stuck_at" : "bit_flip";
}

const char* fault_site_name(FaultSite s) {
    return s == FaultSite::weights ? "weights" : "activations";
}

const char* layer_selector_name(LayerSelector s) {
    switch (s) {
    case LayerSelector::backbone: return "backbone";
    case LayerSelector::heads: return "heads";
    case LayerSelector::all: return "all";
    }
    return "?";
}

FaultKind fault_kind_from_string(const std::string& s) {
    if (s == "stuck_at") return FaultKind::stuck_at;
    if (s == "bit_flip") return FaultKind::bit_flip;
    throw InvalidConfig("unknown fault kind: " + s);
}

FaultSite fault_site_from_string(const std::string& s) {
    if (s == "weights") return FaultSite::weights;
    if (s == "activations") return FaultSite::activations;
    throw InvalidConfig("unknown fault site: " + s);
}

LayerSelector layer_selector_from_string(const std::string& s) {
    if (s == "backbone") return LayerSelector::backbone;
    if (s == "heads") return LayerSelector::heads;
    if (s == "all") return LayerSelector::all;
    throw InvalidConfig("unknown layer selector: " + s);
}

void FaultSpec::validate() const {
    if (!(rate >= 0.0 && rate <= 1.0)) {
        throw InvalidConfig("fault rate must lie in [0,1], got " + std::to_string(rate));
    }
    if (bit_width < 1 || bit_width > 16) {
        throw InvalidConfig("fault bit width must lie in [1,16]");
    }
    if (kind == FaultKind::stuck_at && target_state >= state_count()) {
        throw InvalidConfig("stuck-at target state out of range for K=" +
                            std::to_string(bit_width));
    }
}

std::size_t FaultMask::count_selected() const {
    std::size_t n = 0;
    for (bool b : selected) n += b ? 1 : 0;
    return n;
}

FaultMask sample_fault_mask(std::size_t element_count, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate <= 1.0)) {
        throw InvalidConfig("sample_fault_mask: rate must lie in [0,1]");
    }
    FaultMask mask;
    mask.selected.resize(element_count);
    for (std::size_t i = 0; i < element_count; ++i) {
        mask.selected[i] = rng.next_bernoulli(rate);
    }
    return mask;
}

FaultMask sample_fault_mask(const Shape& shape, double rate, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    return sample_fault_mask(shape_numel(shape), rate, rng);
}

float dequantize_state(std::uint32_t state, unsigned bit_width) {
    const std::uint32_t top = (1u << bit_width) - 1;
    if (bit_width == 1) return state ? 1.0f : -1.0f;
    return -1.0f + 2.0f * static_cast<float>(state) / static_cast<float>(top);
}

std::uint32_t quantize_to_state(float value, unsigned bit_width) {
    const std::uint32_t top = (1u << bit_width) - 1;
    if (bit_width == 1) return value >= 0.0f ? 1u : 0u;
    const float t = (std::clamp(value, -1.0f, 1.0f) + 1.0f) * 0.5f * static_cast<float>(top);
    const long s = std::lround(t);
    return static_cast<std::uint32_t>(std::clamp(s, 0L, static_cast<long>(top)));
}

namespace {

// Applies the fault codec to one tensor in place. Draw order: one selection
// draw per element, then one target draw per *selected* element (bit-flip
// K >= 1 only; stuck-at targets are fixed).
void apply_faults_to_values(std::span<float> values, const FaultSpec& spec, Rng& rng) {
    const FaultMask mask = sample_fault_mask(values.size(), spec.rate, rng);
    const std::uint32_t states = spec.state_count();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!mask.selected[i]) continue;
        if (spec.kind == FaultKind::stuck_at) {
            values[i] = dequantize_state(spec.target_state, spec.bit_width);
        } else if (spec.bit_width == 1) {
            values[i] = -values[i]; // +1 <-> -1
        } else {
            const std::uint32_t cur = quantize_to_state(values[i], spec.bit_width);
            const std::uint32_t offset =
                1u + static_cast<std::uint32_t>(rng.next_below(states - 1));
            values[i] = dequantize_state((cur + offset) % states, spec.bit_width);
        }
    }
}

struct FaultTarget {
    Layer* layer;
    ParamTensor* param;
};

// Weight faults address the weight tensors of Linear/Conv2d layers; affine
// scale parameters and biases are normalization/offset constants, not stored
// binary weights, and stay untouched.
std::vector<FaultTarget> weight_targets(DualHeadModel& m, LayerSelector selector) {
    std::vector<FaultTarget> targets;
    auto add_layer = [&targets](Layer* l) {
        if (l->kind() == LayerKind::linear || l->kind() == LayerKind::conv2d) {
            for (ParamTensor* p : l->params()) {
                if (p->name == "weight") targets.push_back({l, p});
            }
        }
    };
    if (selector == LayerSelector::backbone || selector == LayerSelector::all) {
        for (Layer* l : m.backbone_layers()) add_layer(l);
    }
    if (selector == LayerSelector::heads || selector == LayerSelector::all) {
        add_layer(m.prediction_head());
        if (m.uncertainty_head()) add_layer(m.uncertainty_head());
    }
    return targets;
}

} // namespace

GoldenSnapshot take_snapshot(const DualHeadModel& m) {
    GoldenSnapshot s;
    s.arch_hash = m.arch_hash();
    for (const ParamTensor* p : m.all_params()) {
        s.master.push_back(p->value);
        s.deployed.push_back(p->deployed);
    }
    return s;
}

void restore(DualHeadModel& m, const GoldenSnapshot& snapshot) {
    if (snapshot.arch_hash != m.arch_hash()) {
        throw InvalidSnapshot("restore: snapshot belongs to a different architecture");
    }
    const auto params = m.all_params();
    if (params.size() != snapshot.master.size()) {
        throw InvalidSnapshot("restore: parameter group count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i]->value = snapshot.master[i];
        params[i]->deployed = snapshot.deployed[i];
    }
    for (Layer* l : m.backbone_layers()) l->sync_packed_views();
    if (m.prediction_head()) m.prediction_head()->sync_packed_views();
    if (m.uncertainty_head()) m.uncertainty_head()->sync_packed_views();
}

GoldenSnapshot inject_weight_faults(DualHeadModel& m, const FaultSpec& spec) {
    spec.validate();
    if (spec.site != FaultSite::weights) {
        throw InvalidSpec("inject_weight_faults: spec targets " +
                          std::string(fault_site_name(spec.site)));
    }
    if (!m.is_deployed()) {
        throw InvalidState("inject_weight_faults: model is not deployed");
    }

    GoldenSnapshot snapshot = take_snapshot(m);
    const auto targets = weight_targets(m, spec.selector);
    for (std::size_t t = 0; t < targets.size(); ++t) {
        Rng rng(derive_seed(spec.seed, t));
        apply_faults_to_values(targets[t].param->deployed.values(), spec, rng);
        targets[t].layer->sync_packed_views();
    }
    return snapshot;
}

// ---------------------------------------------------------------------------
// Activation faults

TransientActivationFault::TransientActivationFault(const FaultSpec& spec) : spec_(spec) {
    spec_.validate();
    if (spec_.site != FaultSite::activations) {
        throw InvalidSpec("activation fault hook: spec targets " +
                          std::string(fault_site_name(spec_.site)));
    }
}

void TransientActivationFault::begin_pass() { ++pass_counter_; }

void TransientActivationFault::apply(std::size_t sign_layer_ordinal, DenseTensor& activation) {
    if (pass_counter_ < 0) {
        throw InvalidState("activation fault hook applied before begin_pass");
    }
    Rng rng(derive_seed(spec_.seed, static_cast<std::uint64_t>(pass_counter_),
                        sign_layer_ordinal));
    apply_faults_to_values(activation.values(), spec_, rng);
}

std::unique_ptr<TransientActivationFault> make_activation_fault_hook(const FaultSpec& spec) {
    return std::make_unique<TransientActivationFault>(spec);
}

} // namespace ufp
