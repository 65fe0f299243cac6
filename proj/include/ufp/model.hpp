#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ufp/layers.hpp"

namespace ufp {

// Applied to every sign-activation output during a forward pass; implemented
// by the fault-injection module. begin_pass() is called once per forward so a
// hook can draw a fresh transient mask per pass.
class ActivationFaultHook {
public:
    virtual ~ActivationFaultHook() = default;
    virtual void begin_pass() = 0;
    virtual void apply(std::size_t sign_layer_ordinal, DenseTensor& activation) = 0;
};

struct ForwardRecord {
    DenseTensor prediction_logits;
    DenseTensor uncertainty_output; // empty (size 0 via shape {0}) when no head
    DenseTensor backbone_features;
};

// Serializable architecture descriptor; enough to rebuild an identical model.
struct LayerDesc {
    LayerKind kind;
    // linear: d0=in, d1=out, flag=bias; conv2d: d0=in_ch, d1=out_ch, d2=k,
    // d3=stride, d4=pad; channel_affine: d0=channels. flag2: linear binarized.
    std::uint64_t d0 = 0, d1 = 0, d2 = 0, d3 = 0, d4 = 0;
    bool flag = false;
    bool flag2 = false;

    bool operator==(const LayerDesc&) const = default;
};

struct ModelDesc {
    Shape input_shape;
    std::uint32_t num_classes = 0;
    std::uint64_t uncertainty_width = 0; // 0 = no uncertainty head
    bool uncertainty_pool = false;       // adaptive-avg-pool the features first
    std::vector<LayerDesc> backbone;

    bool operator==(const ModelDesc&) const = default;
};

struct ParamCounts {
    std::uint64_t backbone = 0;
    std::uint64_t prediction_head = 0;
    std::uint64_t uncertainty_head = 0;
    std::uint64_t total = 0;
};

struct MacCounts {
    std::vector<std::pair<std::string, std::uint64_t>> per_layer;
    std::uint64_t backbone = 0;
    std::uint64_t prediction_head = 0;
    std::uint64_t uncertainty_head = 0;
    std::uint64_t total = 0;
};

// Backbone + prediction head + optional uncertainty head. Both heads consume
// the backbone output; the uncertainty head may pool spatial features first.
class DualHeadModel {
public:
    DualHeadModel() = default;
    DualHeadModel(const DualHeadModel& other);
    DualHeadModel& operator=(const DualHeadModel& other);
    DualHeadModel(DualHeadModel&&) = default;
    DualHeadModel& operator=(DualHeadModel&&) = default;

    static DualHeadModel build(const ModelDesc& desc, std::uint64_t init_seed);

    ForwardRecord forward_dual(const DenseTensor& x, Mode mode,
                               ActivationFaultHook* act_fault = nullptr);

    // Backward from the prediction-head output; updates backbone + prediction
    // head grads (stage 1).
    void backward_prediction(const DenseTensor& dlogits);
    // Backward confined to the uncertainty head (stage 2 freeze contract).
    void backward_uncertainty(const DenseTensor& dunc);

    void zero_grads();
    // Binarizes/copies master weights into the deployed views and repacks.
    void deploy();
    bool is_deployed() const { return deployed_; }
    void invalidate_deployment() { deployed_ = false; }

    const ModelDesc& desc() const { return desc_; }
    const Shape& input_shape() const { return desc_.input_shape; }
    std::uint32_t num_classes() const { return desc_.num_classes; }
    std::uint64_t uncertainty_width() const { return desc_.uncertainty_width; }
    bool has_uncertainty_head() const { return uncertainty_head_ != nullptr; }

    std::vector<Layer*> backbone_layers();
    std::vector<const Layer*> backbone_layers() const;
    LinearLayer* prediction_head() { return prediction_head_.get(); }
    const LinearLayer* prediction_head() const { return prediction_head_.get(); }
    LinearLayer* uncertainty_head() { return uncertainty_head_.get(); }
    const LinearLayer* uncertainty_head() const { return uncertainty_head_.get(); }
    bool uncertainty_pooled() const { return desc_.uncertainty_pool; }

    // Stage-1/stage-2 parameter groups, in fixed order.
    std::vector<ParamTensor*> stage1_params();
    std::vector<ParamTensor*> stage2_params();
    std::vector<ParamTensor*> all_params();
    std::vector<const ParamTensor*> all_params() const;

    // Pools/forwards features into the uncertainty-head input space.
    DenseTensor uncertainty_head_input(const DenseTensor& backbone_features) const;

    bool stage1_done() const { return stage1_done_; }
    bool stage2_done() const { return stage2_done_; }
    void set_stage1_done(bool v) { stage1_done_ = v; }
    void set_stage2_done(bool v) { stage2_done_ = v; }
    std::uint64_t train_seed() const { return train_seed_; }
    void set_train_seed(std::uint64_t s) { train_seed_ = s; }

    // Stable hash of the architecture descriptor (snapshot compatibility).
    std::uint64_t arch_hash() const;

    std::string summary() const;

private:
    ModelDesc desc_;
    std::vector<std::unique_ptr<Layer>> backbone_;
    std::unique_ptr<LinearLayer> prediction_head_;
    std::unique_ptr<AdaptiveAvgPoolLayer> uncertainty_pool_;
    std::unique_ptr<LinearLayer> uncertainty_head_;
    Shape feature_shape_; // backbone output shape
    bool deployed_ = false;
    bool stage1_done_ = false;
    bool stage2_done_ = false;
    std::uint64_t train_seed_ = 0;
};

// Uncertainty fingerprint: the maximum value produced by the uncertainty head.
float fingerprint(const ForwardRecord& r);

// Baseline detector statistic: the maximum prediction logit.
float max_logit_score(const ForwardRecord& r);

ParamCounts count_params(const DualHeadModel& m);
MacCounts count_macs(const DualHeadModel& m, const Shape& input_shape);

// Desk-scale topologies.
ModelDesc desk_cnn_desc(const Shape& input_shape, std::uint32_t num_classes,
                        std::uint64_t uncertainty_width);
ModelDesc desk_cnn_pool_desc(const Shape& input_shape, std::uint32_t num_classes,
                             std::uint64_t uncertainty_width);
ModelDesc desk_mlp_desc(const Shape& input_shape, std::uint32_t num_classes,
                        std::uint64_t uncertainty_width, std::size_t hidden = 64);
ModelDesc linear_probe_desc(const Shape& input_shape, std::uint32_t num_classes,
                            std::uint64_t uncertainty_width);
ModelDesc topology_by_name(const std::string& name, const Shape& input_shape,
                           std::uint32_t num_classes, std::uint64_t uncertainty_width);

} // namespace ufp
