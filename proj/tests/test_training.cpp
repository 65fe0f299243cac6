#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ufp/data.hpp"
#include "ufp/training.hpp"

using namespace ufp;

namespace {

bool models_bit_equal(const DualHeadModel& a, const DualHeadModel& b) {
    const auto pa = a.all_params();
    const auto pb = b.all_params();
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (!pa[i]->value.bit_equal(pb[i]->value)) return false;
        if (!pa[i]->deployed.bit_equal(pb[i]->deployed)) return false;
    }
    return true;
}

TrainConfig quick_cfg(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.epochs_stage1 = 8;
    cfg.epochs_stage2 = 30;
    cfg.batch_size = 16;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("split_dataset sizes, determinism, and set partition") {
    const Dataset data = make_synthetic(SyntheticKind::blobs, 100, 4, 0.05, 9);
    const SplitDataset s = split_dataset(data, 0.8, 42);
    CHECK(s.task_split.size() == 80);
    CHECK(s.fingerprint_split.size() == 20);

    const SplitDataset s2 = split_dataset(data, 0.8, 42);
    REQUIRE(s.task_split.size() == s2.task_split.size());
    for (std::size_t i = 0; i < s.task_split.size(); ++i) {
        CHECK(s.task_split.samples[i].features.bit_equal(s2.task_split.samples[i].features));
        CHECK(s.task_split.samples[i].label == s2.task_split.samples[i].label);
    }

    CHECK_THROWS_AS(split_dataset(Dataset{}, 0.8, 1), EmptyDataset);
    CHECK_THROWS_AS(split_dataset(data, 0.0, 1), InvalidConfig);
    CHECK_THROWS_AS(split_dataset(data, 1.0, 1), InvalidConfig);
}

TEST_CASE("split_dataset is disjoint and exhaustive for random sizes") {
    Rng rng(555);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 2 + rng.next_below(499);
        Dataset data;
        data.num_classes = 2;
        for (std::size_t i = 0; i < n; ++i) {
            // Encode the original index in the feature so set identity survives.
            data.samples.push_back({DenseTensor({1}, {static_cast<float>(i)}),
                                    static_cast<int>(i % 2)});
        }
        const SplitDataset s = split_dataset(data, 0.8, derive_seed(1, trial));
        const std::size_t head = static_cast<std::size_t>(std::floor(0.8 * n));
        CHECK(s.task_split.size() == head);
        CHECK(s.fingerprint_split.size() == n - head);

        std::set<int> seen;
        for (const Sample& x : s.task_split.samples) {
            seen.insert(static_cast<int>(x.features[0]));
        }
        for (const Sample& x : s.fingerprint_split.samples) {
            seen.insert(static_cast<int>(x.features[0]));
        }
        CHECK(seen.size() == n); // disjoint + exhaustive
    }
}

TEST_CASE("fingerprint_loss exact values") {
    // All maxima at 1 -> zero loss regardless of alpha.
    std::vector<DenseTensor> batch{DenseTensor({2}, {0.4f, 1.0f}),
                                   DenseTensor({2}, {1.0f, 0.2f})};
    CHECK(fingerprint_loss(batch, 3.7) == 0.0);

    // alpha=1, N=2, maxima {0.5, 1.0} -> 0.5*((0.5)^2 + 0) = 0.125.
    std::vector<DenseTensor> batch2{DenseTensor({3}, {0.5f, 0.1f, -2.0f}),
                                    DenseTensor({1}, {1.0f})};
    CHECK(fingerprint_loss(batch2, 1.0) == 0.125);

    CHECK_THROWS_AS(fingerprint_loss({}, 1.0), EmptyBatch);
}

TEST_CASE("fingerprint_loss oracle on random batches, 1 ulp") {
    Rng rng(31337);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.next_below(8);
        const double alpha = rng.next_uniform(0.1, 3.0);
        std::vector<DenseTensor> batch;
        for (std::size_t i = 0; i < n; ++i) {
            DenseTensor u({1 + rng.next_below(6)});
            for (auto& v : u.values()) v = static_cast<float>(rng.next_uniform(-1.5, 1.5));
            batch.push_back(std::move(u));
        }
        // Independent evaluation following the published operation order.
        double acc = 0.0;
        for (const DenseTensor& u : batch) {
            float m = u[0];
            for (std::size_t i = 1; i < u.size(); ++i) m = std::max(m, u[i]);
            const double r = 1.0 - static_cast<double>(m);
            acc += r * r;
        }
        const double expected = alpha * (acc / static_cast<double>(n));
        const double got = fingerprint_loss(batch, alpha);
        CHECK(std::fabs(got - expected) <=
              std::fabs(expected) * std::numeric_limits<double>::epsilon());
    }
}

TEST_CASE("fingerprint_loss homogeneity in alpha and batch permutation invariance") {
    Rng rng(404);
    std::vector<DenseTensor> batch;
    for (int i = 0; i < 7; ++i) {
        DenseTensor u({5});
        for (auto& v : u.values()) v = static_cast<float>(rng.next_uniform(0.0, 1.2));
        batch.push_back(std::move(u));
    }
    const double base = fingerprint_loss(batch, 1.0);
    for (double c : {0.5, 2.0, 7.25}) {
        const double scaled = fingerprint_loss(batch, c);
        CHECK(std::fabs(scaled - c * base) <= std::fabs(scaled) * 2e-16);
    }

    std::vector<DenseTensor> reversed(batch.rbegin(), batch.rend());
    CHECK(fingerprint_loss(reversed, 1.3) == doctest::Approx(fingerprint_loss(batch, 1.3))
                                                 .epsilon(1e-15));
}

TEST_CASE("fingerprint_loss gradient matches finite differences on head weights") {
    // Head-only FD: loss as a function of the uncertainty-head weights with
    // fixed input features is smooth away from argmax ties. The oracle
    // recomputes the head forward + loss in double precision.
    Rng rng(808);
    const std::size_t feat = 6, width = 4;
    LinearLayer head(feat, width, true, false);
    Rng init(77);
    head.init_he_uniform(init);

    std::vector<DenseTensor> inputs;
    for (int i = 0; i < 3; ++i) {
        DenseTensor f({feat});
        for (auto& v : f.values()) v = rng.next_bernoulli(0.5) ? 1.0f : -1.0f;
        inputs.push_back(std::move(f));
    }
    const double alpha = 1.7;

    auto loss_double = [&](void) -> double {
        double acc = 0.0;
        for (const DenseTensor& f : inputs) {
            double best = -1e300;
            for (std::size_t r = 0; r < width; ++r) {
                double z = head.bias_param()->value[r];
                for (std::size_t c = 0; c < feat; ++c) {
                    z += static_cast<double>(head.weight().value[r * feat + c]) * f[c];
                }
                best = std::max(best, z);
            }
            const double res = 1.0 - best;
            acc += res * res;
        }
        return alpha * acc / static_cast<double>(inputs.size());
    };

    // Analytic gradient through the library path.
    head.weight().zero_grad();
    head.bias_param()->zero_grad();
    std::vector<DenseTensor> outputs;
    for (const DenseTensor& f : inputs) outputs.push_back(head.forward(f, Mode::train));
    auto [loss, grads] = fingerprint_loss_with_grad(outputs, alpha);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        (void)head.forward(inputs[i], Mode::train);
        (void)head.backward(grads[i]);
    }
    CHECK(loss == doctest::Approx(loss_double()).epsilon(1e-6));

    const double h = 1e-4;
    auto fd_check = [&](ParamTensor& p) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const float keep = p.value[i];
            p.value[i] = keep + static_cast<float>(h);
            const double hi = p.value[i];
            const double lp = loss_double();
            p.value[i] = keep - static_cast<float>(h);
            const double lo = p.value[i];
            const double lm = loss_double();
            p.value[i] = keep;
            const double fd = (lp - lm) / (hi - lo);
            const double analytic = p.grad[i];
            const double denom = std::max({std::fabs(fd), std::fabs(analytic), 1e-8});
            CHECK(std::fabs(fd - analytic) / denom <= 1e-3);
        }
    };
    fd_check(head.weight());
    fd_check(*head.bias_param());
}

TEST_CASE("train_task learns separable blobs without touching the uncertainty head") {
    const Dataset data = make_synthetic(SyntheticKind::blobs, 400, 2, 0.03, 17);
    const SplitDataset split = split_dataset(data, 0.8, 3);
    const ModelDesc desc = desk_mlp_desc(data.feature_shape(), 2, 8);

    DualHeadModel m = DualHeadModel::build(desc, 11);
    const DenseTensor unc_before = m.uncertainty_head()->weight().value;
    const auto history = train_task(m, split, quick_cfg(5));
    REQUIRE_FALSE(history.empty());

    const double acc = model_accuracy(m, split.task_split);
    CHECK(acc >= 0.95);
    CHECK(m.uncertainty_head()->weight().value.bit_equal(unc_before));
}

TEST_CASE("zero-epoch training leaves the model bit-identical") {
    const Dataset data = make_synthetic(SyntheticKind::blobs, 64, 2, 0.05, 21);
    const SplitDataset split = split_dataset(data, 0.8, 3);
    const ModelDesc desc = desk_mlp_desc(data.feature_shape(), 2, 8);

    DualHeadModel m = DualHeadModel::build(desc, 7);
    const DualHeadModel before = m;
    TrainConfig cfg = quick_cfg(5);
    cfg.epochs_stage1 = 0;
    (void)train_task(m, split, cfg);
    CHECK(models_bit_equal(m, before));
    CHECK(m.stage1_done());
}

TEST_CASE("same seed and config give bit-identical trained weights") {
    const Dataset data = make_synthetic(SyntheticKind::blobs, 200, 2, 0.05, 31);
    const SplitDataset split = split_dataset(data, 0.8, 3);
    const ModelDesc desc = desk_mlp_desc(data.feature_shape(), 2, 8);

    DualHeadModel m1 = DualHeadModel::build(desc, 13);
    DualHeadModel m2 = DualHeadModel::build(desc, 13);
    TrainConfig cfg = quick_cfg(5);
    cfg.epochs_stage1 = 4;
    cfg.epochs_stage2 = 10;
    (void)train_task(m1, split, cfg);
    (void)train_task(m2, split, cfg);
    (void)train_uncertainty_head(m1, split, cfg);
    (void)train_uncertainty_head(m2, split, cfg);
    CHECK(models_bit_equal(m1, m2));
}

TEST_CASE("stage-2 trains only the uncertainty head and descends") {
    const Dataset data = make_synthetic(SyntheticKind::blobs, 500, 3, 0.05, 47);
    const SplitDataset split = split_dataset(data, 0.8, 3);
    const ModelDesc desc = desk_mlp_desc(data.feature_shape(), 3, 12);

    DualHeadModel m = DualHeadModel::build(desc, 29);
    CHECK_THROWS_AS(train_uncertainty_head(m, split, quick_cfg(5)), InvalidState);

    (void)train_task(m, split, quick_cfg(5));

    // Bit-freeze contract for everything outside the uncertainty head.
    std::vector<DenseTensor> frozen;
    for (const ParamTensor* p : static_cast<const DualHeadModel&>(m).all_params()) {
        frozen.push_back(p->value);
    }
    const std::size_t head_params = m.stage2_params().size();

    const auto history = train_uncertainty_head(m, split, quick_cfg(5));
    REQUIRE(history.size() > 1);
    CHECK(history.back().loss < history.front().loss);

    const auto after = static_cast<const DualHeadModel&>(m).all_params();
    REQUIRE(after.size() == frozen.size());
    for (std::size_t i = 0; i + head_params < after.size(); ++i) {
        CHECK(after[i]->value.bit_equal(frozen[i]));
    }

    // Converged fingerprints sit near one on the held-out split.
    std::vector<double> fps;
    for (const Sample& s : split.fingerprint_split.samples) {
        const ForwardRecord rec = m.forward_dual(s.features, Mode::deploy);
        fps.push_back(fingerprint(rec));
    }
    std::sort(fps.begin(), fps.end());
    const double median = fps[fps.size() / 2];
    CHECK(std::fabs(median - 1.0) <= 0.15);
    const double mean_fp = history.back().mean_fingerprint;
    CHECK(mean_fp >= 0.9);
    CHECK(mean_fp <= 1.1);
}

TEST_CASE("a non-finite loss raises TrainingDiverged") {
    const Dataset data = make_synthetic(SyntheticKind::blobs, 64, 2, 0.05, 23);
    const SplitDataset split = split_dataset(data, 0.8, 3);
    ModelDesc desc = desk_mlp_desc(data.feature_shape(), 2, 4);
    DualHeadModel m = DualHeadModel::build(desc, 3);
    // Poisoned prediction-head weight: the first forward yields NaN logits.
    m.prediction_head()->weight().value[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(train_task(m, split, quick_cfg(5)), TrainingDiverged);

    // Stage 2 has the same guard.
    DualHeadModel m2 = DualHeadModel::build(desc, 3);
    (void)train_task(m2, split, quick_cfg(5));
    m2.uncertainty_head()->weight().value[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(train_uncertainty_head(m2, split, quick_cfg(5)), TrainingDiverged);
}

TEST_CASE("sgd_momentum also trains the separable task deterministically") {
    const Dataset data = make_synthetic(SyntheticKind::blobs, 300, 2, 0.03, 61);
    const SplitDataset split = split_dataset(data, 0.8, 3);
    const ModelDesc desc = desk_mlp_desc(data.feature_shape(), 2, 8);
    TrainConfig cfg = quick_cfg(5);
    cfg.optimizer = OptimizerKind::sgd_momentum;
    cfg.learning_rate = 0.01;
    DualHeadModel a = DualHeadModel::build(desc, 11);
    DualHeadModel b = DualHeadModel::build(desc, 11);
    (void)train_task(a, split, cfg);
    (void)train_task(b, split, cfg);
    CHECK(model_accuracy(a, split.task_split) >= 0.9);
    CHECK(models_bit_equal(a, b));
}

TEST_CASE("stage-1 horizontal-flip augmentation is seeded and changes the trajectory") {
    const Dataset data = make_synthetic(SyntheticKind::blobs, 200, 2, 0.1, 81);
    const SplitDataset split = split_dataset(data, 0.8, 3);
    const ModelDesc desc = desk_cnn_desc({1, 16, 16}, 2, 8);

    TrainConfig cfg;
    cfg.epochs_stage1 = 2;
    cfg.batch_size = 16;
    cfg.seed = 7;
    cfg.augment_stage1 = true;

    DualHeadModel a = DualHeadModel::build(desc, 15);
    DualHeadModel b = DualHeadModel::build(desc, 15);
    (void)train_task(a, split, cfg);
    (void)train_task(b, split, cfg);
    CHECK(models_bit_equal(a, b)); // augmentation draws come from the seed

    DualHeadModel c = DualHeadModel::build(desc, 15);
    TrainConfig no_aug = cfg;
    no_aug.augment_stage1 = false;
    (void)train_task(c, split, no_aug);
    CHECK_FALSE(models_bit_equal(a, c)); // flips actually alter the batches
}

TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    cfg = TrainConfig{};
    cfg.alpha = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    cfg = TrainConfig{};
    cfg.learning_rate = -1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    CHECK_THROWS_AS(optimizer_from_string("adagrad"), InvalidConfig);
    CHECK(optimizer_from_string("sgd_momentum") == OptimizerKind::sgd_momentum);
}
