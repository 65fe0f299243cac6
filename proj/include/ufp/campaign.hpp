#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ufp/data.hpp"
#include "ufp/detector.hpp"
#include "ufp/fault.hpp"
#include "ufp/model.hpp"

namespace ufp {

// Which scalar the online detector matches against the boundary.
enum class DetectorStat { fingerprint, max_logit };

struct CampaignConfig {
    std::vector<double> fault_rates;       // sorted ascending
    int runs_per_rate = 100;
    std::vector<FaultSpec> specs_template; // rate/seed substituted per run
    double nonfunctional_drop = 0.20;      // accuracy points below baseline
    std::uint64_t base_seed = 0;
    int parallel_workers = 1;
    DetectorStat statistic = DetectorStat::fingerprint;

    void validate() const;
};

struct EvalResult {
    double accuracy = 0.0;
    std::vector<float> fingerprints;
    std::vector<Verdict> verdicts;
    std::vector<int> predictions;         // top-1 class per input
    std::size_t invalid_fingerprints = 0; // non-finite, counted Faulty
    double coverage = 0.0;                // fraction of inputs flagged Faulty
};

// One forward pass per input yields prediction and fingerprint together;
// accuracy is top-1, verdicts come from classify() against the boundary.
EvalResult evaluate_model(DualHeadModel& m, const Dataset& data,
                          const FingerprintBoundary& boundary,
                          ActivationFaultHook* act_hook = nullptr,
                          DetectorStat stat = DetectorStat::fingerprint);

struct RunResult {
    double rate = 0.0;
    int run_index = 0;
    double accuracy = 0.0;
    double coverage = 0.0;
    bool nonfunctional = false;
    std::uint64_t seed_used = 0;
};

struct CampaignResult {
    std::vector<RunResult> runs;
    double baseline_accuracy = 0.0;
    double fault_free_coverage = 0.0; // golden-run FPR
};

// Monte Carlo sweep: for each (rate, run), derive the run seed as
// derive_seed(base_seed, rate_index, run_index), substitute rate and seed into
// the spec templates, inject, evaluate, restore. Results are index-ordered and
// bit-reproducible for a fixed config, independent of worker count.
CampaignResult run_campaign(DualHeadModel& m, const FingerprintBoundary& golden_boundary,
                            const CampaignConfig& cfg, const Dataset& eval_data);

struct RateSummary {
    double rate = 0.0;
    double cov_median = 0.0, cov_q1 = 0.0, cov_q3 = 0.0, cov_min = 0.0, cov_max = 0.0;
    double acc_mean = 0.0, acc_std = 0.0;
    std::size_t n_runs = 0;
    std::size_t n_nonfunctional = 0;
    // Mean coverage over nonfunctional runs; empty when none are.
    std::optional<double> tpr_nonfunctional;
};

struct CampaignSummary {
    std::vector<RateSummary> per_rate;
    double baseline_accuracy = 0.0;
    double fault_free_coverage = 0.0;
};

// Box statistics per rate; every rate group must hold the same complete run
// set. The nonfunctional flag is re-derived from the drop rule.
CampaignSummary summarize(const std::vector<RunResult>& results, double baseline_accuracy,
                          double fault_free_coverage, double nonfunctional_drop = 0.20);

} // namespace ufp
