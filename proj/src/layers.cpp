#include "ufp/layers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ufp {

namespace {

float clamp1(float v) { return std::clamp(v, -1.0f, 1.0f); }

float binarize(float v) { return v >= 0.0f ? 1.0f : -1.0f; }

// Effective weight seen by the forward pass for a binarized tensor.
float effective_weight(float master, Mode mode) {
    return mode == Mode::grad_check ? clamp1(master) : binarize(master);
}

ParamTensor make_param(std::string name, Shape shape, bool binarized) {
    ParamTensor p;
    p.name = std::move(name);
    p.value = DenseTensor(shape);
    p.grad = DenseTensor(shape);
    p.deployed = DenseTensor(std::move(shape));
    p.binarized = binarized;
    return p;
}

} // namespace

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
    case LayerKind::linear: return "linear";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::sign_activation: return "sign";
    case LayerKind::channel_affine: return "affine";
    case LayerKind::adaptive_avg_pool: return "avgpool";
    case LayerKind::flatten: return "flatten";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// LinearLayer

LinearLayer::LinearLayer(std::size_t in, std::size_t out, bool bias, bool binarized)
    : in_(in), out_(out), bias_(bias), binarized_(binarized),
      weight_(make_param("weight", {out, in}, binarized)),
      bias_param_(make_param("bias", {out}, false)) {
    if (in == 0 || out == 0) throw InvalidShape("LinearLayer: zero extent");
}

void LinearLayer::init_he_uniform(Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in_));
    for (auto& w : weight_.value.values()) w = static_cast<float>(rng.next_uniform(-limit, limit));
    if (bias_) {
        for (auto& b : bias_param_.value.values()) b = 0.0f;
    }
    refresh_deployed();
}

Shape LinearLayer::output_shape(const Shape& in) const {
    if (shape_numel(in) != in_) {
        throw ShapeMismatch("linear: input " + shape_to_string(in) + " does not provide " +
                            std::to_string(in_) + " features");
    }
    return {out_};
}

DenseTensor LinearLayer::forward(const DenseTensor& x, Mode mode) {
    if (x.size() != in_) {
        throw ShapeMismatch("linear: input size " + std::to_string(x.size()) + ", expected " +
                            std::to_string(in_));
    }
    if (mode != Mode::deploy) {
        cached_input_ = x;
        cached_mode_ = mode;
        has_cache_ = true;
    }

    DenseTensor y({out_});
    const float* xd = x.data();
    if (mode == Mode::deploy) {
        const bool packed_path = packed_valid_ && all_plus_minus_one(x.values());
        if (packed_path) {
            const BitTensor xb = pack_signs(x.values());
            for (std::size_t r = 0; r < out_; ++r) {
                y[r] = static_cast<float>(xnor_popcount_dot(packed_rows_[r], xb));
            }
        } else {
            const float* wd = weight_.deployed.data();
            for (std::size_t r = 0; r < out_; ++r) {
                float acc = 0.0f;
                const float* row = wd + r * in_;
                for (std::size_t c = 0; c < in_; ++c) acc += row[c] * xd[c];
                y[r] = acc;
            }
        }
        if (bias_) {
            const float* bd = bias_param_.deployed.data();
            for (std::size_t r = 0; r < out_; ++r) y[r] += bd[r];
        }
        return y;
    }

    const float* wd = weight_.value.data();
    for (std::size_t r = 0; r < out_; ++r) {
        float acc = 0.0f;
        const float* row = wd + r * in_;
        if (binarized_) {
            for (std::size_t c = 0; c < in_; ++c) acc += effective_weight(row[c], mode) * xd[c];
        } else {
            for (std::size_t c = 0; c < in_; ++c) acc += row[c] * xd[c];
        }
        y[r] = acc;
    }
    if (bias_) {
        const float* bd = bias_param_.value.data();
        for (std::size_t r = 0; r < out_; ++r) y[r] += bd[r];
    }
    return y;
}

DenseTensor LinearLayer::backward(const DenseTensor& dy) {
    if (!has_cache_) throw InvalidState("linear backward without cached forward");
    if (dy.size() != out_) throw ShapeMismatch("linear backward: bad gradient size");

    const float* xd = cached_input_.data();
    const float* dyd = dy.data();
    const float* wd = weight_.value.data();
    float* gw = weight_.grad.data();

    DenseTensor dx(cached_input_.shape());
    float* dxd = dx.data();
    for (std::size_t r = 0; r < out_; ++r) {
        const float g = dyd[r];
        const float* row = wd + r * in_;
        float* grow = gw + r * in_;
        for (std::size_t c = 0; c < in_; ++c) {
            if (binarized_) {
                // STE through weight binarization: pass where |master| <= 1.
                if (std::fabs(row[c]) <= 1.0f) grow[c] += g * xd[c];
                dxd[c] += g * effective_weight(row[c], cached_mode_);
            } else {
                grow[c] += g * xd[c];
                dxd[c] += g * row[c];
            }
        }
    }
    if (bias_) {
        float* gb = bias_param_.grad.data();
        for (std::size_t r = 0; r < out_; ++r) gb[r] += dyd[r];
    }
    return dx;
}

std::vector<ParamTensor*> LinearLayer::params() {
    std::vector<ParamTensor*> ps{&weight_};
    if (bias_) ps.push_back(&bias_param_);
    return ps;
}

std::vector<const ParamTensor*> LinearLayer::params() const {
    std::vector<const ParamTensor*> ps{&weight_};
    if (bias_) ps.push_back(&bias_param_);
    return ps;
}

std::unique_ptr<Layer> LinearLayer::clone() const { return std::make_unique<LinearLayer>(*this); }

void LinearLayer::refresh_deployed() {
    const float* src = weight_.value.data();
    float* dst = weight_.deployed.data();
    for (std::size_t i = 0; i < weight_.value.size(); ++i) {
        dst[i] = binarized_ ? binarize(src[i]) : src[i];
    }
    if (bias_) bias_param_.deployed = bias_param_.value;
    sync_packed_views();
}

void LinearLayer::sync_packed_views() {
    packed_valid_ = binarized_ && all_plus_minus_one(weight_.deployed.values());
    packed_rows_.clear();
    if (!packed_valid_) return;
    packed_rows_.reserve(out_);
    const float* wd = weight_.deployed.data();
    for (std::size_t r = 0; r < out_; ++r) {
        packed_rows_.push_back(pack_signs(std::span<const float>(wd + r * in_, in_)));
    }
}

std::uint64_t LinearLayer::mac_count(const Shape&) const {
    return static_cast<std::uint64_t>(in_) * out_;
}

std::string LinearLayer::describe() const {
    std::ostringstream os;
    os << (binarized_ ? "blinear(" : "linear(") << in_ << "->" << out_
       << (bias_ ? ",bias)" : ")");
    return os.str();
}

// ---------------------------------------------------------------------------
// Conv2dLayer

Conv2dLayer::Conv2dLayer(std::size_t in_ch, std::size_t out_ch, std::size_t k,
                         std::size_t stride, std::size_t pad)
    : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad),
      weight_(make_param("weight", {out_ch, in_ch * k * k}, true)) {
    if (in_ch == 0 || out_ch == 0 || k == 0 || stride == 0) {
        throw InvalidShape("Conv2dLayer: zero extent");
    }
}

void Conv2dLayer::init_he_uniform(Rng& rng) {
    const double fan_in = static_cast<double>(in_ch_ * k_ * k_);
    const double limit = std::sqrt(6.0 / fan_in);
    for (auto& w : weight_.value.values()) w = static_cast<float>(rng.next_uniform(-limit, limit));
    refresh_deployed();
}

Shape Conv2dLayer::checked_out_dims(const Shape& in) const {
    if (in.size() != 3 || in[0] != in_ch_) {
        throw ShapeMismatch("conv2d: want [" + std::to_string(in_ch_) + ",H,W], got " +
                            shape_to_string(in));
    }
    const std::size_t h = in[1], w = in[2];
    if (h + 2 * pad_ < k_ || w + 2 * pad_ < k_) {
        throw ShapeMismatch("conv2d: input " + shape_to_string(in) + " smaller than kernel");
    }
    const std::size_t ho = (h + 2 * pad_ - k_) / stride_ + 1;
    const std::size_t wo = (w + 2 * pad_ - k_) / stride_ + 1;
    return {out_ch_, ho, wo};
}

Shape Conv2dLayer::output_shape(const Shape& in) const { return checked_out_dims(in); }

DenseTensor Conv2dLayer::forward(const DenseTensor& x, Mode mode) {
    const Shape out_shape = checked_out_dims(x.shape());
    const std::size_t h = x.shape()[1], w = x.shape()[2];
    const std::size_t ho = out_shape[1], wo = out_shape[2];
    const std::size_t patch = in_ch_ * k_ * k_;

    if (mode != Mode::deploy) {
        cached_input_ = x;
        cached_mode_ = mode;
        has_cache_ = true;
    }

    DenseTensor y(out_shape);
    const float* xd = x.data();

    const bool packed_path = mode == Mode::deploy && packed_valid_ &&
                             all_plus_minus_one(x.values());
    if (packed_path) {
        // Per output position: gather the patch into local sign/valid words,
        // masking out-of-bounds (padding) taps so they contribute zero,
        // matching dense zero-pad. One patch serves every output channel.
        const std::size_t patch_words = (patch + 63) / 64;
        std::vector<std::uint64_t> sign_words(patch_words);
        std::vector<std::uint64_t> valid_words(patch_words);
        for (std::size_t oy = 0; oy < ho; ++oy) {
            for (std::size_t ox = 0; ox < wo; ++ox) {
                std::fill(sign_words.begin(), sign_words.end(), 0);
                std::fill(valid_words.begin(), valid_words.end(), 0);
                std::size_t idx = 0;
                for (std::size_t c = 0; c < in_ch_; ++c) {
                    for (std::size_t ky = 0; ky < k_; ++ky) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(oy * stride_ + ky) -
                            static_cast<std::ptrdiff_t>(pad_);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                            idx += k_;
                            continue;
                        }
                        const float* row = xd + (c * h + iy) * w;
                        for (std::size_t kx = 0; kx < k_; ++kx, ++idx) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * stride_ + kx) -
                                static_cast<std::ptrdiff_t>(pad_);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            const std::uint64_t bit = 1ULL << (idx & 63);
                            valid_words[idx >> 6] |= bit;
                            if (row[ix] >= 0.0f) sign_words[idx >> 6] |= bit;
                        }
                    }
                }
                std::int64_t considered = 0;
                for (std::size_t wi = 0; wi < patch_words; ++wi) {
                    considered += std::popcount(valid_words[wi]);
                }
                for (std::size_t oc = 0; oc < out_ch_; ++oc) {
                    const auto fw = packed_filters_[oc].words();
                    std::int64_t matches = 0;
                    for (std::size_t wi = 0; wi < patch_words; ++wi) {
                        matches += std::popcount(~(fw[wi] ^ sign_words[wi]) & valid_words[wi]);
                    }
                    y[(oc * ho + oy) * wo + ox] =
                        static_cast<float>(2 * matches - considered);
                }
            }
        }
        return y;
    }

    const float* wd = mode == Mode::deploy ? weight_.deployed.data() : weight_.value.data();
    for (std::size_t oc = 0; oc < out_ch_; ++oc) {
        const float* filt = wd + oc * patch;
        for (std::size_t oy = 0; oy < ho; ++oy) {
            for (std::size_t ox = 0; ox < wo; ++ox) {
                float acc = 0.0f;
                std::size_t idx = 0;
                for (std::size_t c = 0; c < in_ch_; ++c) {
                    for (std::size_t ky = 0; ky < k_; ++ky) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(oy * stride_ + ky) -
                            static_cast<std::ptrdiff_t>(pad_);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                            idx += k_;
                            continue;
                        }
                        for (std::size_t kx = 0; kx < k_; ++kx, ++idx) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * stride_ + kx) -
                                static_cast<std::ptrdiff_t>(pad_);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            const float wv = mode == Mode::deploy
                                                 ? filt[idx]
                                                 : effective_weight(filt[idx], mode);
                            acc += wv * xd[(c * h + iy) * w + ix];
                        }
                    }
                }
                y[(oc * ho + oy) * wo + ox] = acc;
            }
        }
    }
    return y;
}

DenseTensor Conv2dLayer::backward(const DenseTensor& dy) {
    if (!has_cache_) throw InvalidState("conv2d backward without cached forward");
    const Shape out_shape = checked_out_dims(cached_input_.shape());
    if (dy.shape() != out_shape) throw ShapeMismatch("conv2d backward: bad gradient shape");

    const std::size_t h = cached_input_.shape()[1], w = cached_input_.shape()[2];
    const std::size_t ho = out_shape[1], wo = out_shape[2];
    const std::size_t patch = in_ch_ * k_ * k_;

    const float* xd = cached_input_.data();
    const float* dyd = dy.data();
    const float* wd = weight_.value.data();
    float* gw = weight_.grad.data();

    DenseTensor dx(cached_input_.shape());
    float* dxd = dx.data();

    for (std::size_t oc = 0; oc < out_ch_; ++oc) {
        const float* filt = wd + oc * patch;
        float* gfilt = gw + oc * patch;
        for (std::size_t oy = 0; oy < ho; ++oy) {
            for (std::size_t ox = 0; ox < wo; ++ox) {
                const float g = dyd[(oc * ho + oy) * wo + ox];
                if (g == 0.0f) continue;
                std::size_t idx = 0;
                for (std::size_t c = 0; c < in_ch_; ++c) {
                    for (std::size_t ky = 0; ky < k_; ++ky) {
                        const std::ptrdiff_t iy =
                            static_cast<std::ptrdiff_t>(oy * stride_ + ky) -
                            static_cast<std::ptrdiff_t>(pad_);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                            idx += k_;
                            continue;
                        }
                        for (std::size_t kx = 0; kx < k_; ++kx, ++idx) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * stride_ + kx) -
                                static_cast<std::ptrdiff_t>(pad_);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                            const std::size_t xin = (c * h + iy) * w + ix;
                            if (std::fabs(filt[idx]) <= 1.0f) gfilt[idx] += g * xd[xin];
                            dxd[xin] += g * effective_weight(filt[idx], cached_mode_);
                        }
                    }
                }
            }
        }
    }
    return dx;
}

std::vector<ParamTensor*> Conv2dLayer::params() { return {&weight_}; }
std::vector<const ParamTensor*> Conv2dLayer::params() const { return {&weight_}; }

std::unique_ptr<Layer> Conv2dLayer::clone() const { return std::make_unique<Conv2dLayer>(*this); }

void Conv2dLayer::refresh_deployed() {
    const float* src = weight_.value.data();
    float* dst = weight_.deployed.data();
    for (std::size_t i = 0; i < weight_.value.size(); ++i) dst[i] = binarize(src[i]);
    sync_packed_views();
}

void Conv2dLayer::sync_packed_views() {
    packed_valid_ = all_plus_minus_one(weight_.deployed.values());
    packed_filters_.clear();
    if (!packed_valid_) return;
    const std::size_t patch = in_ch_ * k_ * k_;
    packed_filters_.reserve(out_ch_);
    const float* wd = weight_.deployed.data();
    for (std::size_t oc = 0; oc < out_ch_; ++oc) {
        packed_filters_.push_back(pack_signs(std::span<const float>(wd + oc * patch, patch)));
    }
}

std::uint64_t Conv2dLayer::mac_count(const Shape& in) const {
    const Shape out = checked_out_dims(in);
    return static_cast<std::uint64_t>(out_ch_) * in_ch_ * k_ * k_ * out[1] * out[2];
}

std::string Conv2dLayer::describe() const {
    std::ostringstream os;
    os << "bconv(" << in_ch_ << "->" << out_ch_ << ",k" << k_ << ",s" << stride_ << ",p" << pad_
       << ")";
    return os.str();
}

// ---------------------------------------------------------------------------
// SignActivationLayer

DenseTensor SignActivationLayer::forward(const DenseTensor& x, Mode mode) {
    if (mode != Mode::deploy) {
        cached_input_ = x;
        has_cache_ = true;
    }
    DenseTensor y(x.shape());
    const float* xd = x.data();
    float* yd = y.data();
    if (mode == Mode::grad_check) {
        for (std::size_t i = 0; i < x.size(); ++i) yd[i] = clamp1(xd[i]);
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) yd[i] = binarize(xd[i]);
    }
    return y;
}

DenseTensor SignActivationLayer::backward(const DenseTensor& dy) {
    if (!has_cache_) throw InvalidState("sign backward without cached forward");
    if (dy.shape() != cached_input_.shape()) throw ShapeMismatch("sign backward: bad shape");
    DenseTensor dx(cached_input_.shape());
    const float* xd = cached_input_.data();
    const float* dyd = dy.data();
    float* dxd = dx.data();
    for (std::size_t i = 0; i < dx.size(); ++i) {
        dxd[i] = std::fabs(xd[i]) <= 1.0f ? dyd[i] : 0.0f;
    }
    return dx;
}

std::unique_ptr<Layer> SignActivationLayer::clone() const {
    return std::make_unique<SignActivationLayer>(*this);
}

// ---------------------------------------------------------------------------
// ChannelAffineLayer

ChannelAffineLayer::ChannelAffineLayer(std::size_t channels)
    : channels_(channels),
      gamma_(make_param("gamma", {channels}, false)),
      beta_(make_param("beta", {channels}, false)) {
    if (channels == 0) throw InvalidShape("ChannelAffineLayer: zero channels");
    for (auto& g : gamma_.value.values()) g = 1.0f;
    refresh_deployed();
}

Shape ChannelAffineLayer::output_shape(const Shape& in) const {
    if (in.empty() || in[0] != channels_) {
        throw ShapeMismatch("affine: leading extent must be " + std::to_string(channels_) +
                            ", got " + shape_to_string(in));
    }
    return in;
}

DenseTensor ChannelAffineLayer::forward(const DenseTensor& x, Mode mode) {
    output_shape(x.shape());
    if (mode != Mode::deploy) {
        cached_input_ = x;
        has_cache_ = true;
    }
    const std::size_t per = x.size() / channels_;
    const float* gd = mode == Mode::deploy ? gamma_.deployed.data() : gamma_.value.data();
    const float* bd = mode == Mode::deploy ? beta_.deployed.data() : beta_.value.data();
    DenseTensor y(x.shape());
    const float* xd = x.data();
    float* yd = y.data();
    for (std::size_t c = 0; c < channels_; ++c) {
        const float g = gd[c], b = bd[c];
        for (std::size_t i = 0; i < per; ++i) yd[c * per + i] = g * xd[c * per + i] + b;
    }
    return y;
}

DenseTensor ChannelAffineLayer::backward(const DenseTensor& dy) {
    if (!has_cache_) throw InvalidState("affine backward without cached forward");
    if (dy.shape() != cached_input_.shape()) throw ShapeMismatch("affine backward: bad shape");
    const std::size_t per = dy.size() / channels_;
    const float* xd = cached_input_.data();
    const float* dyd = dy.data();
    const float* gd = gamma_.value.data();
    float* gg = gamma_.grad.data();
    float* gb = beta_.grad.data();
    DenseTensor dx(cached_input_.shape());
    float* dxd = dx.data();
    for (std::size_t c = 0; c < channels_; ++c) {
        float sg = 0.0f, sb = 0.0f;
        for (std::size_t i = 0; i < per; ++i) {
            const float g = dyd[c * per + i];
            sg += g * xd[c * per + i];
            sb += g;
            dxd[c * per + i] = g * gd[c];
        }
        gg[c] += sg;
        gb[c] += sb;
    }
    return dx;
}

std::vector<ParamTensor*> ChannelAffineLayer::params() { return {&gamma_, &beta_}; }
std::vector<const ParamTensor*> ChannelAffineLayer::params() const { return {&gamma_, &beta_}; }

std::unique_ptr<Layer> ChannelAffineLayer::clone() const {
    return std::make_unique<ChannelAffineLayer>(*this);
}

void ChannelAffineLayer::refresh_deployed() {
    gamma_.deployed = gamma_.value;
    beta_.deployed = beta_.value;
}

std::uint64_t ChannelAffineLayer::mac_count(const Shape& in) const { return shape_numel(in); }

std::string ChannelAffineLayer::describe() const {
    return "affine(" + std::to_string(channels_) + ")";
}

// ---------------------------------------------------------------------------
// AdaptiveAvgPoolLayer

Shape AdaptiveAvgPoolLayer::output_shape(const Shape& in) const {
    if (in.size() != 3 || in[1] == 0 || in[2] == 0) {
        throw ShapeMismatch("avgpool: want rank-3 [C,H,W] with H,W >= 1, got " +
                            shape_to_string(in));
    }
    return {in[0]};
}

DenseTensor AdaptiveAvgPoolLayer::forward(const DenseTensor& x, Mode mode) {
    output_shape(x.shape());
    if (mode != Mode::deploy) cached_in_shape_ = x.shape();
    return adaptive_avg_pool(x);
}

DenseTensor AdaptiveAvgPoolLayer::backward(const DenseTensor& dy) {
    if (cached_in_shape_.size() != 3) throw InvalidState("avgpool backward without forward");
    const std::size_t c = cached_in_shape_[0];
    const std::size_t hw = cached_in_shape_[1] * cached_in_shape_[2];
    if (dy.size() != c) throw ShapeMismatch("avgpool backward: bad gradient size");
    DenseTensor dx(cached_in_shape_);
    float* dxd = dx.data();
    const float inv = 1.0f / static_cast<float>(hw);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const float g = dy[ch] * inv;
        for (std::size_t i = 0; i < hw; ++i) dxd[ch * hw + i] = g;
    }
    return dx;
}

std::unique_ptr<Layer> AdaptiveAvgPoolLayer::clone() const {
    return std::make_unique<AdaptiveAvgPoolLayer>(*this);
}

// ---------------------------------------------------------------------------
// FlattenLayer

DenseTensor FlattenLayer::forward(const DenseTensor& x, Mode mode) {
    if (mode != Mode::deploy) cached_in_shape_ = x.shape();
    return x.reshaped({x.size()});
}

DenseTensor FlattenLayer::backward(const DenseTensor& dy) {
    if (cached_in_shape_.empty() && dy.size() != 1) {
        throw InvalidState("flatten backward without forward");
    }
    return dy.reshaped(cached_in_shape_);
}

std::unique_ptr<Layer> FlattenLayer::clone() const {
    return std::make_unique<FlattenLayer>(*this);
}

// ---------------------------------------------------------------------------
// Standalone ops

DenseTensor adaptive_avg_pool(const DenseTensor& x) {
    if (x.rank() != 3 || x.shape()[1] == 0 || x.shape()[2] == 0) {
        throw ShapeMismatch("adaptive_avg_pool: want rank-3 [C,H,W], got " +
                            shape_to_string(x.shape()));
    }
    const std::size_t c = x.shape()[0];
    const std::size_t hw = x.shape()[1] * x.shape()[2];
    DenseTensor y({c});
    const float* xd = x.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t i = 0; i < hw; ++i) acc += xd[ch * hw + i];
        y[ch] = static_cast<float>(acc / static_cast<double>(hw));
    }
    return y;
}

DenseTensor sign_activation(const DenseTensor& x) {
    DenseTensor y(x.shape());
    const float* xd = x.data();
    float* yd = y.data();
    for (std::size_t i = 0; i < x.size(); ++i) yd[i] = binarize(xd[i]);
    return y;
}

DenseTensor sign_activation_backward(const DenseTensor& x, const DenseTensor& dy) {
    if (x.shape() != dy.shape()) throw ShapeMismatch("sign_activation_backward: shape mismatch");
    DenseTensor dx(x.shape());
    const float* xd = x.data();
    const float* dyd = dy.data();
    float* dxd = dx.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        dxd[i] = std::fabs(xd[i]) <= 1.0f ? dyd[i] : 0.0f;
    }
    return dx;
}

} // namespace ufp
