#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ufp/data.hpp"
#include "ufp/model.hpp"

namespace ufp {

enum class OptimizerKind { adam, sgd_momentum };

OptimizerKind optimizer_from_string(const std::string& s);

struct TrainConfig {
    int epochs_stage1 = 15;
    int epochs_stage2 = 40;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double alpha = 1.0; // fingerprint loss strength
    std::uint64_t seed = 1;
    bool augment_stage1 = false; // horizontal flips on [C,H,W] data
    OptimizerKind optimizer = OptimizerKind::adam;

    void validate() const;
};

struct SplitDataset {
    Dataset task_split;        // ratio share (default 80%)
    Dataset fingerprint_split; // remainder (default 20%)
    std::uint64_t seed = 0;
};

// Deterministic shuffle under `seed`, then partition into floor(ratio*n) and
// the remainder.
SplitDataset split_dataset(const Dataset& data, double ratio, std::uint64_t seed);

// Fingerprint loss: alpha * (1/N) * sum_n (1 - max(u_n))^2, summed in input
// order with double accumulation.
double fingerprint_loss(const std::vector<DenseTensor>& uncertainty_outputs, double alpha);

// Loss plus the subgradient w.r.t. each uncertainty output; the gradient is
// routed to the argmax element, ties broken toward the lowest index.
std::pair<double, std::vector<DenseTensor>> fingerprint_loss_with_grad(
    const std::vector<DenseTensor>& uncertainty_outputs, double alpha);

// Cross-entropy over logits (mean reduction handled by the caller).
double cross_entropy(const DenseTensor& logits, int label);
DenseTensor cross_entropy_grad(const DenseTensor& logits, int label);

int argmax_index(const DenseTensor& logits);

struct Stage1Epoch {
    int epoch = 0;
    double loss = 0.0;
    double val_accuracy = 0.0; // on the fingerprint split (held out from stage 1)
};

struct Stage2Epoch {
    int epoch = 0;
    double loss = 0.0;
    double mean_fingerprint = 0.0;
};

struct TrainHistory {
    std::vector<Stage1Epoch> stage1;
    std::vector<Stage2Epoch> stage2;
};

// Stage 1: task loss on the task split; updates backbone + prediction head,
// never the uncertainty head.
std::vector<Stage1Epoch> train_task(DualHeadModel& m, const SplitDataset& split,
                                    const TrainConfig& cfg);

// Stage 2: fingerprint loss on the fingerprint split with everything except
// the uncertainty head frozen; augmentation and stochastic regularization off.
std::vector<Stage2Epoch> train_uncertainty_head(DualHeadModel& m, const SplitDataset& split,
                                                const TrainConfig& cfg);

// Top-1 accuracy of the deployed model.
double model_accuracy(DualHeadModel& m, const Dataset& data, Mode mode = Mode::deploy);

} // namespace ufp
