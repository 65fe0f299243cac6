#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ufp/campaign.hpp"
#include "ufp/data.hpp"
#include "ufp/training.hpp"

using namespace ufp;

namespace {

struct Fixture {
    DualHeadModel model;
    Dataset eval_data;
    Dataset calib_data;
    FingerprintBoundary boundary;
};

// One small trained+calibrated model shared by the campaign tests.
Fixture make_fixture() {
    const Dataset pool = make_synthetic(SyntheticKind::blobs, 800, 2, 0.05, 1001);
    const auto [train, val] = partition_dataset(pool, 400);
    const SplitDataset tsplit = split_dataset(train, 0.8, 11);
    const SplitDataset vsplit = split_dataset(val, 0.8, 12);

    const ModelDesc desc = desk_mlp_desc(train.feature_shape(), 2, 8);
    DualHeadModel m = DualHeadModel::build(desc, 55);
    TrainConfig cfg;
    cfg.epochs_stage1 = 6;
    cfg.epochs_stage2 = 20;
    cfg.batch_size = 16;
    cfg.seed = 9;
    (void)train_task(m, tsplit, cfg);
    (void)train_uncertainty_head(m, tsplit, cfg);

    Fixture f{std::move(m), vsplit.task_split, vsplit.fingerprint_split, {}};
    std::vector<float> fps;
    for (const Sample& s : f.calib_data.samples) {
        fps.push_back(fingerprint(f.model.forward_dual(s.features, Mode::deploy)));
    }
    f.boundary = calibrate_boundary(fps, 0.025, 0.975, 2.0);
    return f;
}

CampaignConfig base_campaign(std::vector<double> rates, int runs) {
    CampaignConfig cfg;
    cfg.fault_rates = std::move(rates);
    cfg.runs_per_rate = runs;
    FaultSpec spec;
    spec.kind = FaultKind::bit_flip;
    spec.site = FaultSite::weights;
    spec.selector = LayerSelector::backbone;
    cfg.specs_template.push_back(spec);
    cfg.base_seed = 424242;
    return cfg;
}

} // namespace

TEST_CASE("evaluate_model degenerate boundaries and recount oracle") {
    Fixture f = make_fixture();

    // A boundary covering everything: coverage is exactly 0.
    FingerprintBoundary wide;
    wide.l = -1e30;
    wide.h = 1e30;
    const EvalResult all_in = evaluate_model(f.model, f.eval_data, wide);
    CHECK(all_in.coverage == 0.0);
    CHECK(all_in.accuracy >= 0.95); // trained separable model

    // l == h: coverage equals the fraction of fingerprints not equal to it.
    FingerprintBoundary point;
    point.l = point.h = all_in.fingerprints[0];
    const EvalResult pointr = evaluate_model(f.model, f.eval_data, point);
    std::size_t not_equal = 0;
    for (float fp : all_in.fingerprints) {
        if (fp != all_in.fingerprints[0]) ++not_equal;
    }
    CHECK(pointr.coverage ==
          static_cast<double>(not_equal) / static_cast<double>(f.eval_data.size()));

    // Recount oracle: coverage equals a brute-force recount of the verdicts.
    const EvalResult ev = evaluate_model(f.model, f.eval_data, f.boundary);
    std::size_t recount = 0;
    for (const Verdict& v : ev.verdicts) recount += v.faulty() ? 1 : 0;
    CHECK(ev.coverage == static_cast<double>(recount) / static_cast<double>(ev.verdicts.size()));
    CHECK(ev.verdicts.size() == f.eval_data.size());

    CHECK_THROWS_AS(evaluate_model(f.model, Dataset{}, f.boundary), EmptyDataset);
}

TEST_CASE("rate-0 sweep reproduces the golden run exactly") {
    Fixture f = make_fixture();
    const EvalResult golden = evaluate_model(f.model, f.eval_data, f.boundary);

    CampaignConfig cfg = base_campaign({0.0}, 5);
    const CampaignResult res = run_campaign(f.model, f.boundary, cfg, f.eval_data);
    REQUIRE(res.runs.size() == 5);
    CHECK(res.fault_free_coverage == golden.coverage);
    CHECK(res.baseline_accuracy == golden.accuracy);
    for (const RunResult& r : res.runs) {
        CHECK(r.coverage == golden.coverage); // p=0: coverage equals golden FPR
        CHECK(r.accuracy == golden.accuracy);
        CHECK_FALSE(r.nonfunctional);
    }
}

TEST_CASE("campaign is bit-reproducible and worker-count independent") {
    Fixture f = make_fixture();
    CampaignConfig cfg = base_campaign({0.0, 0.1, 0.3}, 4);

    cfg.parallel_workers = 1;
    const CampaignResult a = run_campaign(f.model, f.boundary, cfg, f.eval_data);
    const CampaignResult b = run_campaign(f.model, f.boundary, cfg, f.eval_data);
    cfg.parallel_workers = 4;
    const CampaignResult c = run_campaign(f.model, f.boundary, cfg, f.eval_data);

    REQUIRE(a.runs.size() == b.runs.size());
    REQUIRE(a.runs.size() == c.runs.size());
    for (std::size_t i = 0; i < a.runs.size(); ++i) {
        CHECK(a.runs[i].accuracy == b.runs[i].accuracy);
        CHECK(a.runs[i].coverage == b.runs[i].coverage);
        CHECK(a.runs[i].seed_used == b.runs[i].seed_used);
        CHECK(a.runs[i].accuracy == c.runs[i].accuracy);
        CHECK(a.runs[i].coverage == c.runs[i].coverage);
        CHECK(a.runs[i].seed_used == c.runs[i].seed_used);
    }
}

TEST_CASE("campaign restores the golden model (accuracy preserved bit-exactly)") {
    Fixture f = make_fixture();
    const EvalResult before = evaluate_model(f.model, f.eval_data, f.boundary);
    CampaignConfig cfg = base_campaign({0.2, 0.5}, 3);
    (void)run_campaign(f.model, f.boundary, cfg, f.eval_data);
    const EvalResult after = evaluate_model(f.model, f.eval_data, f.boundary);
    CHECK(before.accuracy == after.accuracy);
    CHECK(before.coverage == after.coverage);
    for (std::size_t i = 0; i < before.fingerprints.size(); ++i) {
        CHECK(before.fingerprints[i] == after.fingerprints[i]);
    }
}

TEST_CASE("stuck-at rate 1 on all weights collapses accuracy to chance") {
    Fixture f = make_fixture();
    CampaignConfig cfg = base_campaign({1.0}, 3);
    cfg.specs_template[0].kind = FaultKind::stuck_at;
    cfg.specs_template[0].target_state = 1;
    cfg.specs_template[0].selector = LayerSelector::all;
    const CampaignResult res = run_campaign(f.model, f.boundary, cfg, f.eval_data);
    // Constant weights: logits identical for every input; accuracy equals the
    // frequency of whichever class wins the tie-break. For a balanced 2-class
    // set that sits at chance (within 3 sigma of the binomial).
    const double n = static_cast<double>(f.eval_data.size());
    const double sigma3 = 3.0 * std::sqrt(0.25 / n);
    for (const RunResult& r : res.runs) {
        CHECK(r.accuracy >= 0.5 - sigma3 - 0.05);
        CHECK(r.accuracy <= 0.5 + sigma3 + 0.05);
        CHECK(r.nonfunctional);
    }
}

TEST_CASE("activation fault specs in a campaign run") {
    Fixture f = make_fixture();
    CampaignConfig cfg = base_campaign({0.5}, 2);
    cfg.specs_template[0].site = FaultSite::activations;
    const CampaignResult res = run_campaign(f.model, f.boundary, cfg, f.eval_data);
    // Heavy transient faults break accuracy and raise coverage well above FPR.
    for (const RunResult& r : res.runs) {
        CHECK(r.accuracy < res.baseline_accuracy);
        CHECK(r.coverage > res.fault_free_coverage);
    }
    // Bit-reproducible as well.
    const CampaignResult res2 = run_campaign(f.model, f.boundary, cfg, f.eval_data);
    for (std::size_t i = 0; i < res.runs.size(); ++i) {
        CHECK(res.runs[i].coverage == res2.runs[i].coverage);
    }
}

TEST_CASE("summarize box statistics against a sort oracle") {
    std::vector<RunResult> rows;
    Rng rng(5);
    for (int rate_i = 0; rate_i < 3; ++rate_i) {
        for (int run = 0; run < 7; ++run) {
            RunResult r;
            r.rate = 0.1 * rate_i;
            r.run_index = run;
            r.accuracy = rng.next_uniform(0.2, 1.0);
            r.coverage = rng.next_uniform(0.0, 1.0);
            r.seed_used = derive_seed(1, rate_i, run);
            rows.push_back(r);
        }
    }
    const CampaignSummary s = summarize(rows, 0.9, 0.05, 0.2);
    REQUIRE(s.per_rate.size() == 3);
    for (const RateSummary& rs : s.per_rate) {
        std::vector<double> cov;
        std::vector<double> acc;
        std::size_t nf = 0;
        double nf_cov = 0.0;
        for (const RunResult& r : rows) {
            if (r.rate != rs.rate) continue;
            cov.push_back(r.coverage);
            acc.push_back(r.accuracy);
            if (r.accuracy < 0.9 - 0.2) {
                ++nf;
                nf_cov += r.coverage;
            }
        }
        std::sort(cov.begin(), cov.end());
        CHECK(rs.cov_median == doctest::Approx(quantile_linear(cov, 0.5)).epsilon(1e-14));
        CHECK(rs.cov_q1 == doctest::Approx(quantile_linear(cov, 0.25)).epsilon(1e-14));
        CHECK(rs.cov_q3 == doctest::Approx(quantile_linear(cov, 0.75)).epsilon(1e-14));
        CHECK(rs.cov_min == cov.front());
        CHECK(rs.cov_max == cov.back());
        double mean = 0.0;
        for (double a : acc) mean += a;
        mean /= static_cast<double>(acc.size());
        CHECK(rs.acc_mean == doctest::Approx(mean).epsilon(1e-14));
        double var = 0.0;
        for (double a : acc) var += (a - mean) * (a - mean);
        CHECK(rs.acc_std ==
              doctest::Approx(std::sqrt(var / static_cast<double>(acc.size() - 1)))
                  .epsilon(1e-12));
        CHECK(rs.n_nonfunctional == nf);
        if (nf > 0) {
            CHECK(*rs.tpr_nonfunctional ==
                  doctest::Approx(nf_cov / static_cast<double>(nf)).epsilon(1e-14));
        }
    }
}

TEST_CASE("summarize trivial groups and incompleteness") {
    std::vector<RunResult> one;
    one.push_back({.rate = 0.1, .run_index = 0, .accuracy = 0.8, .coverage = 0.42,
                   .nonfunctional = false, .seed_used = 1});
    const CampaignSummary s = summarize(one, 0.9, 0.05, 0.2);
    CHECK(s.per_rate.size() == 1);
    CHECK(s.per_rate[0].cov_median == 0.42); // single run: median is that run

    std::vector<RunResult> all_one;
    for (int i = 0; i < 5; ++i) {
        all_one.push_back({.rate = 0.1, .run_index = i, .accuracy = 0.5, .coverage = 1.0,
                           .nonfunctional = true, .seed_used = 1});
    }
    const CampaignSummary s2 = summarize(all_one, 0.9, 0.05, 0.2);
    CHECK(s2.per_rate[0].cov_median == 1.0);
    CHECK(s2.per_rate[0].cov_q1 == 1.0);
    CHECK(s2.per_rate[0].cov_q3 == 1.0);

    // Missing a run in one rate group.
    std::vector<RunResult> uneven = all_one;
    uneven.push_back({.rate = 0.2, .run_index = 0, .accuracy = 0.5, .coverage = 1.0,
                      .nonfunctional = true, .seed_used = 1});
    CHECK_THROWS_AS(summarize(uneven, 0.9, 0.05, 0.2), IncompleteCampaign);
    CHECK_THROWS_AS(summarize({}, 0.9, 0.05, 0.2), IncompleteCampaign);

    // Duplicate run index.
    std::vector<RunResult> dup = all_one;
    dup[1].run_index = 0;
    CHECK_THROWS_AS(summarize(dup, 0.9, 0.05, 0.2), IncompleteCampaign);
}

TEST_CASE("nonfunctional flag is monotone in accuracy") {
    // Ascending run accuracies: the flag may flip from nonfunctional to
    // functional exactly once and never back.
    std::vector<RunResult> rows;
    for (int i = 0; i < 21; ++i) {
        rows.push_back({.rate = 0.1, .run_index = i, .accuracy = 0.05 * i, .coverage = 0.5,
                        .nonfunctional = false, .seed_used = 0});
    }
    const CampaignSummary s = summarize(rows, 0.95, 0.05, 0.2);
    bool seen_functional = false;
    for (const RunResult& r : rows) {
        const bool nf = r.accuracy < 0.95 - 0.2;
        if (!nf) seen_functional = true;
        if (seen_functional) CHECK_FALSE(nf);
    }
    CHECK(s.per_rate[0].n_nonfunctional == 15); // accuracies 0.00..0.70 strictly below 0.75
}

TEST_CASE("run_campaign rejects empty evaluation data and undeployed models") {
    Fixture f = make_fixture();
    CampaignConfig cfg = base_campaign({0.1}, 2);
    CHECK_THROWS_AS(run_campaign(f.model, f.boundary, cfg, Dataset{}), EmptyDataset);
    f.model.invalidate_deployment();
    CHECK_THROWS_AS(run_campaign(f.model, f.boundary, cfg, f.eval_data), InvalidState);
}

TEST_CASE("campaign config validation") {
    CampaignConfig cfg = base_campaign({0.1, 0.05}, 3); // unsorted
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    cfg = base_campaign({0.1}, 0);
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    cfg = base_campaign({0.1}, 3);
    cfg.specs_template.clear();
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
    cfg = base_campaign({1.5}, 3);
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
}
