#include "ufp/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>

#include "ufp/training.hpp"

namespace ufp {

void CampaignConfig::validate() const {
    if (fault_rates.empty()) throw InvalidConfig("campaign: no fault rates");
    if (!std::is_sorted(fault_rates.begin(), fault_rates.end())) {
        throw InvalidConfig("campaign: fault rates must be sorted ascending");
    }
    for (double r : fault_rates) {
        if (!(r >= 0.0 && r <= 1.0)) throw InvalidConfig("campaign: rate outside [0,1]");
    }
    if (runs_per_rate < 1) throw InvalidConfig("campaign: runs_per_rate must be >= 1");
    if (specs_template.empty()) throw InvalidConfig("campaign: no fault specs");
    if (parallel_workers < 1) throw InvalidConfig("campaign: workers must be >= 1");
    if (!(nonfunctional_drop > 0.0 && nonfunctional_drop < 1.0)) {
        throw InvalidConfig("campaign: nonfunctional_drop must lie in (0,1)");
    }
    for (const FaultSpec& s : specs_template) s.validate();
}

EvalResult evaluate_model(DualHeadModel& m, const Dataset& data,
                          const FingerprintBoundary& boundary, ActivationFaultHook* act_hook,
                          DetectorStat stat) {
    if (data.empty()) throw EmptyDataset("evaluate_model: empty dataset");

    EvalResult res;
    res.fingerprints.reserve(data.size());
    res.verdicts.reserve(data.size());
    res.predictions.reserve(data.size());
    std::size_t correct = 0;
    std::size_t flagged = 0;
    for (const Sample& s : data.samples) {
        const ForwardRecord rec = m.forward_dual(s.features, Mode::deploy, act_hook);
        const int predicted = argmax_index(rec.prediction_logits);
        res.predictions.push_back(predicted);
        if (predicted == s.label) ++correct;
        const float f = stat == DetectorStat::fingerprint ? fingerprint(rec)
                                                          : max_logit_score(rec);
        res.fingerprints.push_back(f);
        Verdict v;
        if (std::isfinite(f)) {
            v = classify(f, boundary);
        } else {
            // Non-finite fingerprints count as Faulty, recorded distinctly.
            v.status = Status::faulty;
            v.fingerprint = f;
            ++res.invalid_fingerprints;
        }
        if (v.faulty()) ++flagged;
        res.verdicts.push_back(v);
    }
    res.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    res.coverage = static_cast<double>(flagged) / static_cast<double>(data.size());
    return res;
}

CampaignResult run_campaign(DualHeadModel& m, const FingerprintBoundary& golden_boundary,
                            const CampaignConfig& cfg, const Dataset& eval_data) {
    cfg.validate();
    if (eval_data.empty()) throw EmptyDataset("run_campaign: empty evaluation data");
    if (!m.is_deployed()) throw InvalidState("run_campaign: model is not deployed");

    CampaignResult out;
    {
        const EvalResult golden = evaluate_model(m, eval_data, golden_boundary, nullptr,
                                                 cfg.statistic);
        out.baseline_accuracy = golden.accuracy;
        out.fault_free_coverage = golden.coverage;
    }

    const GoldenSnapshot snapshot = take_snapshot(m);
    const std::size_t n_rates = cfg.fault_rates.size();
    const std::size_t n_runs = static_cast<std::size_t>(cfg.runs_per_rate);
    const std::size_t n_tasks = n_rates * n_runs;
    out.runs.resize(n_tasks);

    std::atomic<std::size_t> next_task{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto worker_fn = [&]() {
        DualHeadModel clone(m);
        for (;;) {
            const std::size_t task = next_task.fetch_add(1);
            if (task >= n_tasks || failed.load()) break;
            const std::size_t rate_idx = task / n_runs;
            const std::size_t run_idx = task % n_runs;
            const double rate = cfg.fault_rates[rate_idx];
            const std::uint64_t run_seed = derive_seed(cfg.base_seed, rate_idx, run_idx);
            try {
                // Restoration uses the campaign-level golden snapshot; the
                // per-injection snapshots are not needed here.
                CompositeActivationFault hooks;
                for (std::size_t si = 0; si < cfg.specs_template.size(); ++si) {
                    FaultSpec spec = cfg.specs_template[si];
                    spec.rate = rate;
                    spec.seed = derive_seed(run_seed, si);
                    if (spec.site == FaultSite::weights) {
                        (void)inject_weight_faults(clone, spec);
                    } else {
                        hooks.add(make_activation_fault_hook(spec));
                    }
                }
                const EvalResult ev = evaluate_model(clone, eval_data, golden_boundary,
                                                     hooks.empty() ? nullptr : &hooks,
                                                     cfg.statistic);
                restore(clone, snapshot);

                RunResult r;
                r.rate = rate;
                r.run_index = static_cast<int>(run_idx);
                r.accuracy = ev.accuracy;
                r.coverage = ev.coverage;
                r.nonfunctional =
                    ev.accuracy < out.baseline_accuracy - cfg.nonfunctional_drop;
                r.seed_used = run_seed;
                out.runs[task] = r;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failed.store(true);
                failure = "campaign run (rate " + std::to_string(rate) + ", run " +
                          std::to_string(run_idx) + ") failed: " + e.what();
                break;
            }
        }
    };

    const int n_workers = std::min<int>(cfg.parallel_workers, static_cast<int>(n_tasks));
    if (n_workers <= 1) {
        worker_fn();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(n_workers));
        for (int i = 0; i < n_workers; ++i) threads.emplace_back(worker_fn);
        for (auto& t : threads) t.join();
    }
    if (failed.load()) throw Error(failure);

    return out;
}

namespace {

double sorted_quantile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    return quantile_linear(values, q);
}

} // namespace

CampaignSummary summarize(const std::vector<RunResult>& results, double baseline_accuracy,
                          double fault_free_coverage, double nonfunctional_drop) {
    if (results.empty()) throw IncompleteCampaign("summarize: no results");

    std::map<double, std::vector<const RunResult*>> groups;
    for (const RunResult& r : results) groups[r.rate].push_back(&r);

    std::size_t expected = 0;
    for (const auto& [rate, rows] : groups) expected = std::max(expected, rows.size());
    for (const auto& [rate, rows] : groups) {
        if (rows.size() != expected) {
            throw IncompleteCampaign("summarize: rate " + std::to_string(rate) + " has " +
                                     std::to_string(rows.size()) + " runs, expected " +
                                     std::to_string(expected));
        }
        std::vector<bool> seen(rows.size(), false);
        for (const RunResult* r : rows) {
            if (r->run_index < 0 || static_cast<std::size_t>(r->run_index) >= rows.size() ||
                seen[static_cast<std::size_t>(r->run_index)]) {
                throw IncompleteCampaign("summarize: rate " + std::to_string(rate) +
                                         " has duplicate or missing run indices");
            }
            seen[static_cast<std::size_t>(r->run_index)] = true;
        }
    }

    CampaignSummary summary;
    summary.baseline_accuracy = baseline_accuracy;
    summary.fault_free_coverage = fault_free_coverage;
    for (const auto& [rate, rows] : groups) {
        RateSummary rs;
        rs.rate = rate;
        rs.n_runs = rows.size();

        std::vector<double> cov;
        cov.reserve(rows.size());
        double acc_sum = 0.0;
        double nf_cov_sum = 0.0;
        for (const RunResult* r : rows) {
            cov.push_back(r->coverage);
            acc_sum += r->accuracy;
            if (r->accuracy < baseline_accuracy - nonfunctional_drop) {
                ++rs.n_nonfunctional;
                nf_cov_sum += r->coverage;
            }
        }
        rs.cov_median = sorted_quantile(cov, 0.5);
        rs.cov_q1 = sorted_quantile(cov, 0.25);
        rs.cov_q3 = sorted_quantile(cov, 0.75);
        rs.cov_min = *std::min_element(cov.begin(), cov.end());
        rs.cov_max = *std::max_element(cov.begin(), cov.end());
        rs.acc_mean = acc_sum / static_cast<double>(rows.size());
        double var = 0.0;
        for (const RunResult* r : rows) {
            const double d = r->accuracy - rs.acc_mean;
            var += d * d;
        }
        rs.acc_std = rows.size() > 1
                         ? std::sqrt(var / static_cast<double>(rows.size() - 1))
                         : 0.0;
        if (rs.n_nonfunctional > 0) {
            rs.tpr_nonfunctional = nf_cov_sum / static_cast<double>(rs.n_nonfunctional);
        }
        summary.per_rate.push_back(rs);
    }
    return summary;
}

} // namespace ufp
