#include "ufp/model.hpp"

#include <algorithm>
#include <sstream>

namespace ufp {

namespace {

std::unique_ptr<Layer> layer_from_desc(const LayerDesc& d) {
    switch (d.kind) {
    case LayerKind::linear:
        return std::make_unique<LinearLayer>(d.d0, d.d1, d.flag, d.flag2);
    case LayerKind::conv2d:
        return std::make_unique<Conv2dLayer>(d.d0, d.d1, d.d2, d.d3, d.d4);
    case LayerKind::sign_activation:
        return std::make_unique<SignActivationLayer>();
    case LayerKind::channel_affine:
        return std::make_unique<ChannelAffineLayer>(d.d0);
    case LayerKind::adaptive_avg_pool:
        return std::make_unique<AdaptiveAvgPoolLayer>();
    case LayerKind::flatten:
        return std::make_unique<FlattenLayer>();
    }
    throw InvalidConfig("unknown layer kind");
}

std::uint64_t param_count(const Layer& layer) {
    std::uint64_t n = 0;
    for (const ParamTensor* p : layer.params()) n += p->value.size();
    return n;
}

} // namespace

DualHeadModel::DualHeadModel(const DualHeadModel& other)
    : desc_(other.desc_), feature_shape_(other.feature_shape_), deployed_(other.deployed_),
      stage1_done_(other.stage1_done_), stage2_done_(other.stage2_done_),
      train_seed_(other.train_seed_) {
    backbone_.reserve(other.backbone_.size());
    for (const auto& l : other.backbone_) backbone_.push_back(l->clone());
    if (other.prediction_head_) {
        prediction_head_ = std::make_unique<LinearLayer>(*other.prediction_head_);
    }
    if (other.uncertainty_pool_) {
        uncertainty_pool_ = std::make_unique<AdaptiveAvgPoolLayer>(*other.uncertainty_pool_);
    }
    if (other.uncertainty_head_) {
        uncertainty_head_ = std::make_unique<LinearLayer>(*other.uncertainty_head_);
    }
}

DualHeadModel& DualHeadModel::operator=(const DualHeadModel& other) {
    if (this != &other) {
        DualHeadModel tmp(other);
        *this = std::move(tmp);
    }
    return *this;
}

DualHeadModel DualHeadModel::build(const ModelDesc& desc, std::uint64_t init_seed) {
    if (desc.input_shape.empty() || shape_numel(desc.input_shape) == 0) {
        throw InvalidConfig("model: empty input shape");
    }
    if (desc.num_classes < 1) throw InvalidConfig("model: need at least one class");

    DualHeadModel m;
    m.desc_ = desc;

    Shape cur = desc.input_shape;
    std::size_t ordinal = 0;
    for (const LayerDesc& ld : desc.backbone) {
        auto layer = layer_from_desc(ld);
        cur = layer->output_shape(cur);
        Rng rng(derive_seed(init_seed, ordinal++));
        if (auto* lin = dynamic_cast<LinearLayer*>(layer.get())) lin->init_he_uniform(rng);
        if (auto* conv = dynamic_cast<Conv2dLayer*>(layer.get())) conv->init_he_uniform(rng);
        m.backbone_.push_back(std::move(layer));
    }
    m.feature_shape_ = cur;

    const std::size_t num_features = shape_numel(cur);
    m.prediction_head_ =
        std::make_unique<LinearLayer>(num_features, desc.num_classes, true, false);
    {
        Rng rng(derive_seed(init_seed, ordinal++));
        m.prediction_head_->init_he_uniform(rng);
    }

    if (desc.uncertainty_width > 0) {
        std::size_t head_in = num_features;
        if (desc.uncertainty_pool) {
            if (cur.size() != 3) {
                throw InvalidConfig("model: pooled uncertainty head needs rank-3 features");
            }
            m.uncertainty_pool_ = std::make_unique<AdaptiveAvgPoolLayer>();
            head_in = cur[0];
        }
        m.uncertainty_head_ = std::make_unique<LinearLayer>(
            head_in, static_cast<std::size_t>(desc.uncertainty_width), true, false);
        Rng rng(derive_seed(init_seed, ordinal++));
        m.uncertainty_head_->init_he_uniform(rng);
    }

    m.train_seed_ = init_seed;
    m.deploy();
    return m;
}

ForwardRecord DualHeadModel::forward_dual(const DenseTensor& x, Mode mode,
                                          ActivationFaultHook* act_fault) {
    if (!prediction_head_) throw UninitializedModel("forward_dual: model has no layers");
    if (mode == Mode::deploy && !deployed_) {
        throw UninitializedModel("forward_dual: deploy-mode pass before deploy()");
    }
    if (x.shape() != desc_.input_shape) {
        throw ShapeMismatch("forward_dual: input " + shape_to_string(x.shape()) +
                            ", model expects " + shape_to_string(desc_.input_shape));
    }

    if (act_fault) act_fault->begin_pass();

    DenseTensor cur = x;
    std::size_t sign_ordinal = 0;
    for (auto& layer : backbone_) {
        cur = layer->forward(cur, mode);
        if (layer->kind() == LayerKind::sign_activation && act_fault) {
            act_fault->apply(sign_ordinal, cur);
        }
        if (layer->kind() == LayerKind::sign_activation) ++sign_ordinal;
    }

    ForwardRecord rec;
    rec.backbone_features = cur;
    rec.prediction_logits = prediction_head_->forward(cur.reshaped({cur.size()}), mode);
    if (uncertainty_head_) {
        DenseTensor uin = uncertainty_pool_ ? uncertainty_pool_->forward(cur, mode)
                                            : cur.reshaped({cur.size()});
        rec.uncertainty_output = uncertainty_head_->forward(uin, mode);
    } else {
        rec.uncertainty_output = DenseTensor({0});
    }

    return rec;
}

void DualHeadModel::backward_prediction(const DenseTensor& dlogits) {
    DenseTensor g = prediction_head_->backward(dlogits);
    g = g.reshaped(feature_shape_);
    for (auto it = backbone_.rbegin(); it != backbone_.rend(); ++it) {
        g = (*it)->backward(g);
    }
}

void DualHeadModel::backward_uncertainty(const DenseTensor& dunc) {
    if (!uncertainty_head_) throw InvalidModel("backward_uncertainty: no uncertainty head");
    // Stops at the head input: the backbone and prediction head stay frozen.
    (void)uncertainty_head_->backward(dunc);
}

void DualHeadModel::zero_grads() {
    for (ParamTensor* p : all_params()) p->zero_grad();
}

void DualHeadModel::deploy() {
    for (auto& l : backbone_) l->refresh_deployed();
    if (prediction_head_) prediction_head_->refresh_deployed();
    if (uncertainty_head_) uncertainty_head_->refresh_deployed();
    deployed_ = true;
}

std::vector<Layer*> DualHeadModel::backbone_layers() {
    std::vector<Layer*> out;
    out.reserve(backbone_.size());
    for (auto& l : backbone_) out.push_back(l.get());
    return out;
}

std::vector<const Layer*> DualHeadModel::backbone_layers() const {
    std::vector<const Layer*> out;
    out.reserve(backbone_.size());
    for (const auto& l : backbone_) out.push_back(l.get());
    return out;
}

std::vector<ParamTensor*> DualHeadModel::stage1_params() {
    std::vector<ParamTensor*> out;
    for (auto& l : backbone_) {
        for (ParamTensor* p : l->params()) out.push_back(p);
    }
    for (ParamTensor* p : prediction_head_->params()) out.push_back(p);
    return out;
}

std::vector<ParamTensor*> DualHeadModel::stage2_params() {
    std::vector<ParamTensor*> out;
    if (uncertainty_head_) {
        for (ParamTensor* p : uncertainty_head_->params()) out.push_back(p);
    }
    return out;
}

std::vector<ParamTensor*> DualHeadModel::all_params() {
    std::vector<ParamTensor*> out = stage1_params();
    for (ParamTensor* p : stage2_params()) out.push_back(p);
    return out;
}

std::vector<const ParamTensor*> DualHeadModel::all_params() const {
    std::vector<const ParamTensor*> out;
    for (const auto& l : backbone_) {
        for (const ParamTensor* p : l->params()) out.push_back(p);
    }
    if (prediction_head_) {
        for (const ParamTensor* p : prediction_head_->params()) out.push_back(p);
    }
    if (uncertainty_head_) {
        for (const ParamTensor* p : uncertainty_head_->params()) out.push_back(p);
    }
    return out;
}

DenseTensor DualHeadModel::uncertainty_head_input(const DenseTensor& backbone_features) const {
    if (desc_.uncertainty_pool) return adaptive_avg_pool(backbone_features);
    return backbone_features.reshaped({backbone_features.size()});
}

std::uint64_t DualHeadModel::arch_hash() const {
    std::uint64_t h = 0x8b1f9d2fULL;
    auto fold = [&h](std::uint64_t v) { h = derive_seed(h, v); };
    for (std::size_t e : desc_.input_shape) fold(e);
    fold(desc_.num_classes);
    fold(desc_.uncertainty_width);
    fold(desc_.uncertainty_pool ? 1 : 0);
    for (const LayerDesc& d : desc_.backbone) {
        fold(static_cast<std::uint64_t>(d.kind));
        fold(d.d0);
        fold(d.d1);
        fold(d.d2);
        fold(d.d3);
        fold(d.d4);
        fold((d.flag ? 1 : 0) | (d.flag2 ? 2 : 0));
    }
    return h;
}

std::string DualHeadModel::summary() const {
    std::ostringstream os;
    os << "input " << shape_to_string(desc_.input_shape) << "\n";
    for (const auto& l : backbone_) os << "  " << l->describe() << "\n";
    os << "  pred: " << prediction_head_->describe() << "\n";
    if (uncertainty_head_) {
        os << "  unc:  " << (uncertainty_pool_ ? "avgpool + " : "")
           << uncertainty_head_->describe() << "\n";
    }
    return os.str();
}

float fingerprint(const ForwardRecord& r) {
    if (r.uncertainty_output.size() == 0) {
        throw InvalidModel("fingerprint: empty uncertainty output");
    }
    const auto vals = r.uncertainty_output.values();
    return *std::max_element(vals.begin(), vals.end());
}

float max_logit_score(const ForwardRecord& r) {
    if (r.prediction_logits.size() == 0) {
        throw InvalidModel("max_logit_score: empty logits");
    }
    const auto vals = r.prediction_logits.values();
    return *std::max_element(vals.begin(), vals.end());
}

ParamCounts count_params(const DualHeadModel& m) {
    ParamCounts counts;
    for (const Layer* l : m.backbone_layers()) counts.backbone += param_count(*l);
    if (m.prediction_head()) counts.prediction_head = param_count(*m.prediction_head());
    if (m.uncertainty_head()) counts.uncertainty_head = param_count(*m.uncertainty_head());
    counts.total = counts.backbone + counts.prediction_head + counts.uncertainty_head;
    return counts;
}

MacCounts count_macs(const DualHeadModel& m, const Shape& input_shape) {
    MacCounts counts;
    Shape cur = input_shape;
    for (const Layer* l : m.backbone_layers()) {
        const std::uint64_t macs = l->mac_count(cur);
        counts.per_layer.emplace_back(l->describe(), macs);
        counts.backbone += macs;
        cur = l->output_shape(cur);
    }
    const Shape flat{shape_numel(cur)};
    if (m.prediction_head()) {
        counts.prediction_head = m.prediction_head()->mac_count(flat);
        counts.per_layer.emplace_back("pred:" + m.prediction_head()->describe(),
                                      counts.prediction_head);
    }
    if (m.uncertainty_head()) {
        // The optional pooling stage is adds only; the head cost is its linear.
        counts.uncertainty_head = m.uncertainty_head()->mac_count(flat);
        counts.per_layer.emplace_back("unc:" + m.uncertainty_head()->describe(),
                                      counts.uncertainty_head);
    }
    counts.total = counts.backbone + counts.prediction_head + counts.uncertainty_head;
    return counts;
}

// ---------------------------------------------------------------------------
// Topologies

namespace {

void push_conv_block(std::vector<LayerDesc>& v, std::uint64_t in_ch, std::uint64_t out_ch,
                     std::uint64_t k, std::uint64_t stride, std::uint64_t pad) {
    v.push_back({.kind = LayerKind::conv2d, .d0 = in_ch, .d1 = out_ch, .d2 = k, .d3 = stride,
                 .d4 = pad});
    v.push_back({.kind = LayerKind::channel_affine, .d0 = out_ch});
    v.push_back({.kind = LayerKind::sign_activation});
}

} // namespace

ModelDesc desk_cnn_desc(const Shape& input_shape, std::uint32_t num_classes,
                        std::uint64_t uncertainty_width) {
    if (input_shape.size() != 3) throw InvalidConfig("desk_cnn: input must be [C,H,W]");
    ModelDesc d;
    d.input_shape = input_shape;
    d.num_classes = num_classes;
    d.uncertainty_width = uncertainty_width;

    const std::uint64_t c = input_shape[0];
    push_conv_block(d.backbone, c, 32, 3, 1, 1);
    push_conv_block(d.backbone, 32, 32, 3, 2, 1);
    d.backbone.push_back({.kind = LayerKind::flatten});

    const std::size_t h2 = (input_shape[1] + 2 - 3) / 2 + 1;
    const std::size_t w2 = (input_shape[2] + 2 - 3) / 2 + 1;
    const std::uint64_t flat = 32 * h2 * w2;
    d.backbone.push_back({.kind = LayerKind::linear, .d0 = flat, .d1 = 32, .flag = false,
                          .flag2 = true});
    d.backbone.push_back({.kind = LayerKind::channel_affine, .d0 = 32});
    d.backbone.push_back({.kind = LayerKind::sign_activation});
    return d;
}

ModelDesc desk_cnn_pool_desc(const Shape& input_shape, std::uint32_t num_classes,
                             std::uint64_t uncertainty_width) {
    if (input_shape.size() != 3) throw InvalidConfig("desk_cnn_pool: input must be [C,H,W]");
    ModelDesc d;
    d.input_shape = input_shape;
    d.num_classes = num_classes;
    d.uncertainty_width = uncertainty_width;
    d.uncertainty_pool = true;

    const std::uint64_t c = input_shape[0];
    push_conv_block(d.backbone, c, 32, 3, 1, 1);
    push_conv_block(d.backbone, 32, 32, 3, 2, 1);
    return d;
}

ModelDesc desk_mlp_desc(const Shape& input_shape, std::uint32_t num_classes,
                        std::uint64_t uncertainty_width, std::size_t hidden) {
    ModelDesc d;
    d.input_shape = input_shape;
    d.num_classes = num_classes;
    d.uncertainty_width = uncertainty_width;
    const std::uint64_t in_dim = shape_numel(input_shape);
    d.backbone.push_back({.kind = LayerKind::flatten});
    d.backbone.push_back({.kind = LayerKind::linear, .d0 = in_dim, .d1 = hidden, .flag = false,
                          .flag2 = true});
    d.backbone.push_back({.kind = LayerKind::channel_affine, .d0 = hidden});
    d.backbone.push_back({.kind = LayerKind::sign_activation});
    d.backbone.push_back({.kind = LayerKind::linear, .d0 = hidden, .d1 = 32, .flag = false,
                          .flag2 = true});
    d.backbone.push_back({.kind = LayerKind::channel_affine, .d0 = 32});
    d.backbone.push_back({.kind = LayerKind::sign_activation});
    return d;
}

ModelDesc linear_probe_desc(const Shape& input_shape, std::uint32_t num_classes,
                            std::uint64_t uncertainty_width) {
    ModelDesc d;
    d.input_shape = input_shape;
    d.num_classes = num_classes;
    d.uncertainty_width = uncertainty_width;
    d.backbone.push_back({.kind = LayerKind::flatten});
    return d;
}

ModelDesc topology_by_name(const std::string& name, const Shape& input_shape,
                           std::uint32_t num_classes, std::uint64_t uncertainty_width) {
    if (name == "desk_cnn") return desk_cnn_desc(input_shape, num_classes, uncertainty_width);
    if (name == "desk_cnn_pool") {
        return desk_cnn_pool_desc(input_shape, num_classes, uncertainty_width);
    }
    if (name == "desk_mlp") {
        return desk_mlp_desc(input_shape, num_classes, uncertainty_width);
    }
    if (name == "linear") return linear_probe_desc(input_shape, num_classes, uncertainty_width);
    throw InvalidConfig("unknown topology: " + name);
}

} // namespace ufp
