#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ufp/rng.hpp"
#include "ufp/tensor.hpp"

namespace ufp {

// Forward-pass flavor.
//   train:      dense math on master weights (binary layers binarize on the fly),
//               inputs cached for backward.
//   deploy:     inference on the deployed parameter copies; binary layers with a
//               valid packed view and +-1 inputs take the XNOR-popcount path.
//   grad_check: like train, but sign() and weight binarization evaluate their
//               straight-through surrogate (hardtanh), making the full forward
//               differentiable so central differences can verify the backward
//               pass. Gradient-verification only, never used for inference.
enum class Mode { train, deploy, grad_check };

enum class LayerKind : std::uint8_t {
    linear = 0,
    conv2d = 1,
    sign_activation = 2,
    channel_affine = 3,
    adaptive_avg_pool = 4,
    flatten = 5,
};

const char* layer_kind_name(LayerKind kind);

// One trainable tensor within a layer. `value` holds the real master weights
// updated by the optimizer; `deployed` holds the inference copy (sign(master)
// for binarized tensors) that fault injection mutates and restore rewrites.
struct ParamTensor {
    std::string name;
    DenseTensor value;
    DenseTensor grad;
    DenseTensor deployed;
    bool binarized = false;

    void zero_grad() {
        for (auto& g : grad.values()) g = 0.0f;
    }
};

class Layer {
public:
    virtual ~Layer() = default;

    virtual LayerKind kind() const = 0;
    virtual Shape output_shape(const Shape& in) const = 0;
    virtual DenseTensor forward(const DenseTensor& x, Mode mode) = 0;
    // Consumes the cached input from the last train/grad_check forward and
    // accumulates into param grads; returns the gradient w.r.t. the input.
    virtual DenseTensor backward(const DenseTensor& dy) = 0;
    virtual std::vector<ParamTensor*> params() { return {}; }
    virtual std::vector<const ParamTensor*> params() const { return {}; }
    virtual std::unique_ptr<Layer> clone() const = 0;

    // Refreshes `deployed` (and packed views) from the master weights.
    virtual void refresh_deployed() {}
    // Rebuilds packed/binary views from the *current* deployed values, e.g.
    // after fault injection or restore.
    virtual void sync_packed_views() {}

    virtual std::uint64_t mac_count(const Shape&) const { return 0; }
    virtual std::string describe() const = 0;
};

class LinearLayer final : public Layer {
public:
    LinearLayer(std::size_t in, std::size_t out, bool bias, bool binarized);

    LayerKind kind() const override { return LayerKind::linear; }
    Shape output_shape(const Shape& in) const override;
    DenseTensor forward(const DenseTensor& x, Mode mode) override;
    DenseTensor backward(const DenseTensor& dy) override;
    std::vector<ParamTensor*> params() override;
    std::vector<const ParamTensor*> params() const override;
    std::unique_ptr<Layer> clone() const override;
    void refresh_deployed() override;
    void sync_packed_views() override;
    std::uint64_t mac_count(const Shape& in) const override;
    std::string describe() const override;

    void init_he_uniform(Rng& rng);

    std::size_t in_features() const { return in_; }
    std::size_t out_features() const { return out_; }
    bool has_bias() const { return bias_; }
    bool binarized() const { return binarized_; }

    ParamTensor& weight() { return weight_; }
    ParamTensor* bias_param() { return bias_ ? &bias_param_ : nullptr; }

    // Forward from an explicit input with caching, used by the stage-2 trainer
    // that feeds precomputed backbone features straight into the head.
    DenseTensor forward_cached(const DenseTensor& x) { return forward(x, Mode::train); }

private:
    std::size_t in_;
    std::size_t out_;
    bool bias_;
    bool binarized_;
    ParamTensor weight_;     // [out, in] row-major
    ParamTensor bias_param_; // [out]
    std::vector<BitTensor> packed_rows_;
    bool packed_valid_ = false;
    DenseTensor cached_input_;
    bool has_cache_ = false;
    Mode cached_mode_ = Mode::train;
};

class Conv2dLayer final : public Layer {
public:
    Conv2dLayer(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t stride,
                std::size_t pad);

    LayerKind kind() const override { return LayerKind::conv2d; }
    Shape output_shape(const Shape& in) const override;
    DenseTensor forward(const DenseTensor& x, Mode mode) override;
    DenseTensor backward(const DenseTensor& dy) override;
    std::vector<ParamTensor*> params() override;
    std::vector<const ParamTensor*> params() const override;
    std::unique_ptr<Layer> clone() const override;
    void refresh_deployed() override;
    void sync_packed_views() override;
    std::uint64_t mac_count(const Shape& in) const override;
    std::string describe() const override;

    void init_he_uniform(Rng& rng);

    std::size_t in_channels() const { return in_ch_; }
    std::size_t out_channels() const { return out_ch_; }
    std::size_t kernel() const { return k_; }
    std::size_t stride() const { return stride_; }
    std::size_t padding() const { return pad_; }

    ParamTensor& weight() { return weight_; }

private:
    std::size_t in_ch_, out_ch_, k_, stride_, pad_;
    ParamTensor weight_; // [out_ch, in_ch*k*k]
    std::vector<BitTensor> packed_filters_;
    bool packed_valid_ = false;
    DenseTensor cached_input_;
    bool has_cache_ = false;
    Mode cached_mode_ = Mode::train;

    Shape checked_out_dims(const Shape& in) const;
};

// sign(x) with sign(0) = +1. Backward is the straight-through estimator:
// upstream gradient passes where |x| <= 1, zero elsewhere. In grad_check mode
// the forward evaluates hardtanh(x) so the STE is exact.
class SignActivationLayer final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::sign_activation; }
    Shape output_shape(const Shape& in) const override { return in; }
    DenseTensor forward(const DenseTensor& x, Mode mode) override;
    DenseTensor backward(const DenseTensor& dy) override;
    std::unique_ptr<Layer> clone() const override;
    std::string describe() const override { return "sign"; }

private:
    DenseTensor cached_input_;
    bool has_cache_ = false;
};

// Learned per-channel y = gamma*x + beta. Channel = leading extent for rank-3
// inputs, the feature itself for rank-1. Stabilizes binary training in place
// of full normalization layers; never binarized.
class ChannelAffineLayer final : public Layer {
public:
    explicit ChannelAffineLayer(std::size_t channels);

    LayerKind kind() const override { return LayerKind::channel_affine; }
    Shape output_shape(const Shape& in) const override;
    DenseTensor forward(const DenseTensor& x, Mode mode) override;
    DenseTensor backward(const DenseTensor& dy) override;
    std::vector<ParamTensor*> params() override;
    std::vector<const ParamTensor*> params() const override;
    std::unique_ptr<Layer> clone() const override;
    void refresh_deployed() override;
    std::uint64_t mac_count(const Shape& in) const override;
    std::string describe() const override;

    std::size_t channels() const { return channels_; }

private:
    std::size_t channels_;
    ParamTensor gamma_;
    ParamTensor beta_;
    DenseTensor cached_input_;
    bool has_cache_ = false;
};

// [C,H,W] -> [C], mean over the spatial extent of each channel.
class AdaptiveAvgPoolLayer final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::adaptive_avg_pool; }
    Shape output_shape(const Shape& in) const override;
    DenseTensor forward(const DenseTensor& x, Mode mode) override;
    DenseTensor backward(const DenseTensor& dy) override;
    std::unique_ptr<Layer> clone() const override;
    std::string describe() const override { return "avgpool"; }

private:
    Shape cached_in_shape_;
};

class FlattenLayer final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::flatten; }
    Shape output_shape(const Shape& in) const override { return {shape_numel(in)}; }
    DenseTensor forward(const DenseTensor& x, Mode mode) override;
    DenseTensor backward(const DenseTensor& dy) override;
    std::unique_ptr<Layer> clone() const override;
    std::string describe() const override { return "flatten"; }

private:
    Shape cached_in_shape_;
};

// Standalone op view of the pooling layer (pure function).
DenseTensor adaptive_avg_pool(const DenseTensor& x);

// Standalone sign activation forward.
DenseTensor sign_activation(const DenseTensor& x);
// STE backward rule for the standalone op: dy where |x| <= 1, else 0.
DenseTensor sign_activation_backward(const DenseTensor& x, const DenseTensor& dy);

} // namespace ufp
