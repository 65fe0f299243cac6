#include "ufp/training.hpp"

#include <algorithm>
#include <cmath>

#include "ufp/rng.hpp"

namespace ufp {

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgd_momentum") return OptimizerKind::sgd_momentum;
    throw InvalidConfig("unknown optimizer: " + s);
}

void TrainConfig::validate() const {
    if (epochs_stage1 < 0 || epochs_stage2 < 0) throw InvalidConfig("negative epoch count");
    if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw InvalidConfig("learning_rate must be positive");
    if (!(alpha > 0.0)) throw InvalidConfig("alpha must be positive");
}

SplitDataset split_dataset(const Dataset& data, double ratio, std::uint64_t seed) {
    if (data.empty()) throw EmptyDataset("split_dataset: empty dataset");
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw InvalidConfig("split_dataset: ratio must lie in (0,1)");
    }

    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, 0x5D17ULL));
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.next_below(i)]);
    }

    const std::size_t head = static_cast<std::size_t>(
        std::floor(ratio * static_cast<double>(data.size())));
    SplitDataset out;
    out.seed = seed;
    out.task_split.num_classes = data.num_classes;
    out.fingerprint_split.num_classes = data.num_classes;
    out.task_split.samples.reserve(head);
    out.fingerprint_split.samples.reserve(data.size() - head);
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < head ? out.task_split : out.fingerprint_split)
            .samples.push_back(data.samples[order[i]]);
    }
    return out;
}

double fingerprint_loss(const std::vector<DenseTensor>& uncertainty_outputs, double alpha) {
    if (uncertainty_outputs.empty()) throw EmptyBatch("fingerprint_loss: empty batch");
    double acc = 0.0;
    for (const DenseTensor& u : uncertainty_outputs) {
        if (u.size() == 0) throw InvalidModel("fingerprint_loss: empty uncertainty output");
        const auto vals = u.values();
        const float m = *std::max_element(vals.begin(), vals.end());
        const double r = 1.0 - static_cast<double>(m);
        acc += r * r;
    }
    return alpha * (acc / static_cast<double>(uncertainty_outputs.size()));
}

std::pair<double, std::vector<DenseTensor>> fingerprint_loss_with_grad(
    const std::vector<DenseTensor>& uncertainty_outputs, double alpha) {
    if (uncertainty_outputs.empty()) throw EmptyBatch("fingerprint_loss: empty batch");
    const double n = static_cast<double>(uncertainty_outputs.size());
    double acc = 0.0;
    std::vector<DenseTensor> grads;
    grads.reserve(uncertainty_outputs.size());
    for (const DenseTensor& u : uncertainty_outputs) {
        if (u.size() == 0) throw InvalidModel("fingerprint_loss: empty uncertainty output");
        std::size_t arg = 0;
        for (std::size_t i = 1; i < u.size(); ++i) {
            if (u[i] > u[arg]) arg = i; // ties keep the lowest index
        }
        const double r = 1.0 - static_cast<double>(u[arg]);
        acc += r * r;
        DenseTensor g(u.shape());
        g[arg] = static_cast<float>(-2.0 * alpha * r / n);
        grads.push_back(std::move(g));
    }
    return {alpha * (acc / n), std::move(grads)};
}

double cross_entropy(const DenseTensor& logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
        throw InvalidConfig("cross_entropy: label out of range");
    }
    const auto z = logits.values();
    const float zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (float v : z) sum += std::exp(static_cast<double>(v - zmax));
    return std::log(sum) - static_cast<double>(z[static_cast<std::size_t>(label)] - zmax);
}

DenseTensor cross_entropy_grad(const DenseTensor& logits, int label) {
    const auto z = logits.values();
    const float zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (float v : z) sum += std::exp(static_cast<double>(v - zmax));
    DenseTensor g(logits.shape());
    for (std::size_t i = 0; i < z.size(); ++i) {
        g[i] = static_cast<float>(std::exp(static_cast<double>(z[i] - zmax)) / sum);
    }
    g[static_cast<std::size_t>(label)] -= 1.0f;
    return g;
}

int argmax_index(const DenseTensor& logits) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[arg]) arg = i;
    }
    return static_cast<int>(arg);
}

// ---------------------------------------------------------------------------
// Optimizer

namespace {

class Optimizer {
public:
    Optimizer(std::vector<ParamTensor*> params, const TrainConfig& cfg)
        : params_(std::move(params)), kind_(cfg.optimizer),
          lr_(static_cast<float>(cfg.learning_rate)) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i]->value.size(), 0.0f);
            v_[i].assign(params_[i]->value.size(), 0.0f);
        }
    }

    void step() {
        ++t_;
        for (std::size_t i = 0; i < params_.size(); ++i) {
            ParamTensor& p = *params_[i];
            float* w = p.value.data();
            const float* g = p.grad.data();
            if (kind_ == OptimizerKind::adam) {
                const double bc1 = 1.0 - std::pow(0.9, t_);
                const double bc2 = 1.0 - std::pow(0.999, t_);
                for (std::size_t j = 0; j < p.value.size(); ++j) {
                    m_[i][j] = 0.9f * m_[i][j] + 0.1f * g[j];
                    v_[i][j] = 0.999f * v_[i][j] + 0.001f * g[j] * g[j];
                    const double mh = m_[i][j] / bc1;
                    const double vh = v_[i][j] / bc2;
                    w[j] -= static_cast<float>(lr_ * mh / (std::sqrt(vh) + 1e-8));
                }
            } else {
                for (std::size_t j = 0; j < p.value.size(); ++j) {
                    m_[i][j] = 0.9f * m_[i][j] + g[j];
                    w[j] -= lr_ * m_[i][j];
                }
            }
            if (p.binarized) {
                // Keep masters inside the STE clip range so gradients stay live.
                for (std::size_t j = 0; j < p.value.size(); ++j) {
                    w[j] = std::clamp(w[j], -1.0f, 1.0f);
                }
            }
        }
    }

private:
    std::vector<ParamTensor*> params_;
    OptimizerKind kind_;
    float lr_;
    int t_ = 0;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
};

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.next_below(i)]);
    return idx;
}

DenseTensor hflip(const DenseTensor& x) {
    if (x.rank() != 3) return x;
    const std::size_t c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    DenseTensor y(x.shape());
    for (std::size_t ci = 0; ci < c; ++ci) {
        for (std::size_t yi = 0; yi < h; ++yi) {
            for (std::size_t xi = 0; xi < w; ++xi) {
                y[(ci * h + yi) * w + xi] = x[(ci * h + yi) * w + (w - 1 - xi)];
            }
        }
    }
    return y;
}

} // namespace

std::vector<Stage1Epoch> train_task(DualHeadModel& m, const SplitDataset& split,
                                    const TrainConfig& cfg) {
    cfg.validate();
    if (split.task_split.empty()) throw EmptyDataset("train_task: empty task split");

    std::vector<Stage1Epoch> history;
    if (cfg.epochs_stage1 == 0) {
        m.set_stage1_done(true);
        return history;
    }
    m.invalidate_deployment();

    Optimizer opt(m.stage1_params(), cfg);
    const std::size_t n = split.task_split.size();
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs_stage1; ++epoch) {
        Rng order_rng(derive_seed(cfg.seed, 0x51u, static_cast<std::uint64_t>(epoch)));
        Rng aug_rng(derive_seed(cfg.seed, 0xA6u, static_cast<std::uint64_t>(epoch)));
        const auto order = shuffled_indices(n, order_rng);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(start + batch, n);
            const double bn = static_cast<double>(stop - start);
            m.zero_grads();
            double batch_loss = 0.0;
            for (std::size_t i = start; i < stop; ++i) {
                const Sample& s = split.task_split.samples[order[i]];
                DenseTensor x = s.features;
                if (cfg.augment_stage1 && x.rank() == 3 && aug_rng.next_bernoulli(0.5)) {
                    x = hflip(x);
                }
                const ForwardRecord rec = m.forward_dual(x, Mode::train);
                batch_loss += cross_entropy(rec.prediction_logits, s.label);
                DenseTensor dlogits = cross_entropy_grad(rec.prediction_logits, s.label);
                for (auto& g : dlogits.values()) g = static_cast<float>(g / bn);
                m.backward_prediction(dlogits);
            }
            batch_loss /= bn;
            if (!std::isfinite(batch_loss)) {
                throw TrainingDiverged("train_task: loss became non-finite at epoch " +
                                       std::to_string(epoch));
            }
            epoch_loss += batch_loss * bn;
            opt.step();
        }
        epoch_loss /= static_cast<double>(n);

        Stage1Epoch e;
        e.epoch = epoch;
        e.loss = epoch_loss;
        if (!split.fingerprint_split.empty()) {
            e.val_accuracy = model_accuracy(m, split.fingerprint_split, Mode::train);
        }
        history.push_back(e);
    }

    m.set_stage1_done(true);
    m.deploy();
    return history;
}

std::vector<Stage2Epoch> train_uncertainty_head(DualHeadModel& m, const SplitDataset& split,
                                                const TrainConfig& cfg) {
    cfg.validate();
    if (!m.stage1_done()) {
        throw InvalidState("train_uncertainty_head: stage 1 has not been run");
    }
    if (!m.has_uncertainty_head()) {
        throw InvalidModel("train_uncertainty_head: model has no uncertainty head");
    }
    if (split.fingerprint_split.empty()) {
        throw EmptyDataset("train_uncertainty_head: empty fingerprint split");
    }

    std::vector<Stage2Epoch> history;
    if (cfg.epochs_stage2 == 0) {
        m.set_stage2_done(true);
        return history;
    }
    m.invalidate_deployment();

    // The backbone is frozen and augmentation is off, so its features are
    // constants; compute them once and train the head on the cached inputs.
    const std::size_t n = split.fingerprint_split.size();
    std::vector<DenseTensor> head_inputs;
    head_inputs.reserve(n);
    for (const Sample& s : split.fingerprint_split.samples) {
        const ForwardRecord rec = m.forward_dual(s.features, Mode::train);
        head_inputs.push_back(m.uncertainty_head_input(rec.backbone_features));
    }

    LinearLayer* head = m.uncertainty_head();
    Optimizer opt(m.stage2_params(), cfg);
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs_stage2; ++epoch) {
        Rng order_rng(derive_seed(cfg.seed, 0x52u, static_cast<std::uint64_t>(epoch)));
        const auto order = shuffled_indices(n, order_rng);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(start + batch, n);
            m.zero_grads();
            std::vector<DenseTensor> outputs;
            outputs.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                outputs.push_back(head->forward(head_inputs[order[i]], Mode::train));
            }
            auto [loss, grads] = fingerprint_loss_with_grad(outputs, cfg.alpha);
            if (!std::isfinite(loss)) {
                throw TrainingDiverged("train_uncertainty_head: loss became non-finite");
            }
            // Re-run each cached forward right before its backward so the
            // layer's input cache matches the sample.
            for (std::size_t i = start; i < stop; ++i) {
                (void)head->forward(head_inputs[order[i]], Mode::train);
                (void)head->backward(grads[i - start]);
            }
            epoch_loss += loss * static_cast<double>(stop - start);
            opt.step();
        }
        epoch_loss /= static_cast<double>(n);

        double mean_fp = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const DenseTensor u = head->forward(head_inputs[i], Mode::train);
            const auto vals = u.values();
            mean_fp += static_cast<double>(*std::max_element(vals.begin(), vals.end()));
        }
        mean_fp /= static_cast<double>(n);

        history.push_back({epoch, epoch_loss, mean_fp});
    }

    m.set_stage2_done(true);
    m.deploy();
    return history;
}

double model_accuracy(DualHeadModel& m, const Dataset& data, Mode mode) {
    if (data.empty()) throw EmptyDataset("model_accuracy: empty dataset");
    std::size_t correct = 0;
    for (const Sample& s : data.samples) {
        const ForwardRecord rec = m.forward_dual(s.features, mode);
        if (argmax_index(rec.prediction_logits) == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

} // namespace ufp
