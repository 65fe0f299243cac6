#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ufp/model.hpp"

namespace ufp {

enum class FaultKind { stuck_at, bit_flip };
enum class FaultSite { weights, activations };
enum class LayerSelector { backbone, heads, all };

const char* fault_kind_name(FaultKind k);
const char* fault_site_name(FaultSite s);
const char* layer_selector_name(LayerSelector s);
FaultKind fault_kind_from_string(const std::string& s);
FaultSite fault_site_from_string(const std::string& s);
LayerSelector layer_selector_from_string(const std::string& s);

// One fault-injection experiment: kind, site, Bernoulli rate, bit width and
// seed. K = 1 is the binary case with states {0 -> -1, 1 -> +1}; K > 1 uses a
// uniform symmetric K-bit grid over [-1, 1].
struct FaultSpec {
    FaultKind kind = FaultKind::bit_flip;
    FaultSite site = FaultSite::weights;
    LayerSelector selector = LayerSelector::backbone;
    double rate = 0.0;
    unsigned bit_width = 1;           // K
    std::uint32_t target_state = 1;   // stuck-at target in [0, 2^K)
    std::uint64_t seed = 0;

    void validate() const;
    std::uint32_t state_count() const { return 1u << bit_width; }
};

// Bernoulli site selection over one tensor.
struct FaultMask {
    std::vector<bool> selected;

    std::size_t count_selected() const;
};

FaultMask sample_fault_mask(std::size_t element_count, double rate, Rng& rng);
FaultMask sample_fault_mask(const Shape& shape, double rate, std::uint64_t rng_seed);

// K-bit codec: state s in [0, 2^K) <-> value on the uniform symmetric grid
// over [-1, 1]; K = 1 maps {0 -> -1, 1 -> +1}.
float dequantize_state(std::uint32_t state, unsigned bit_width);
std::uint32_t quantize_to_state(float value, unsigned bit_width);

// Bit-exact copy of all pre-fault parameters, keyed to the architecture.
struct GoldenSnapshot {
    std::uint64_t arch_hash = 0;
    std::vector<DenseTensor> master;
    std::vector<DenseTensor> deployed;
};

GoldenSnapshot take_snapshot(const DualHeadModel& m);
void restore(DualHeadModel& m, const GoldenSnapshot& snapshot);

// Applies persistent faults to the deployed weights of every Linear/Conv2d
// layer matched by the selector; packed binary views are refreshed (or
// invalidated when K > 1 moves values off the +-1 grid). Per-tensor streams
// are derived as derive_seed(spec.seed, tensor_index).
GoldenSnapshot inject_weight_faults(DualHeadModel& m, const FaultSpec& spec);

// Transient activation faults: a fresh mask per forward pass, applied to each
// sign-activation output; deterministic given (spec.seed, pass index).
class TransientActivationFault final : public ActivationFaultHook {
public:
    explicit TransientActivationFault(const FaultSpec& spec);

    void begin_pass() override;
    void apply(std::size_t sign_layer_ordinal, DenseTensor& activation) override;

    void reset() { pass_counter_ = -1; }
    std::int64_t pass_index() const { return pass_counter_; }

private:
    FaultSpec spec_;
    std::int64_t pass_counter_ = -1;
};

std::unique_ptr<TransientActivationFault> make_activation_fault_hook(const FaultSpec& spec);

// Runs several hooks in sequence (a campaign template may carry more than one
// activation spec).
class CompositeActivationFault final : public ActivationFaultHook {
public:
    void add(std::unique_ptr<ActivationFaultHook> hook) { hooks_.push_back(std::move(hook)); }
    bool empty() const { return hooks_.empty(); }
    void begin_pass() override {
        for (auto& h : hooks_) h->begin_pass();
    }
    void apply(std::size_t ordinal, DenseTensor& activation) override {
        for (auto& h : hooks_) h->apply(ordinal, activation);
    }

private:
    std::vector<std::unique_ptr<ActivationFaultHook>> hooks_;
};

} // namespace ufp
