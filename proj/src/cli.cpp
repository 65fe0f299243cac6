#include "ufp/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "ufp/campaign.hpp"
#include "ufp/checkpoint.hpp"
#include "ufp/config.hpp"
#include "ufp/report.hpp"
#include "ufp/training.hpp"

namespace ufp {

namespace {

namespace fs = std::filesystem;

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[64];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

struct GlobalArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> workers;
};

ExperimentConfig load_config(const GlobalArgs& g) {
    if (g.config_path.empty()) throw InvalidConfig("missing --config <path>");
    ExperimentConfig cfg = load_experiment_config(g.config_path);
    if (g.seed) cfg.train.seed = *g.seed;
    if (g.out_dir) cfg.output.dir = *g.out_dir;
    if (g.workers) cfg.campaign.parallel_workers = *g.workers;
    return cfg;
}

fs::path ensure_out_dir(const ExperimentConfig& cfg) {
    fs::path dir(cfg.output.dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw WriteError("cannot create output directory " + dir.string());
    return dir;
}

// Validation data splits 80:20 into evaluation and calibration halves.
struct ValSplit {
    Dataset evaluation;
    Dataset calibration;
};

ValSplit split_validation(const ExperimentConfig& cfg, const Dataset& val) {
    SplitDataset s = split_dataset(val, 0.8, derive_seed(cfg.train.seed, 3));
    return {std::move(s.task_split), std::move(s.fingerprint_split)};
}

std::vector<float> collect_fingerprints(DualHeadModel& m, const Dataset& data,
                                        DetectorStat stat) {
    std::vector<float> fps;
    fps.reserve(data.size());
    for (const Sample& s : data.samples) {
        const ForwardRecord rec = m.forward_dual(s.features, Mode::deploy);
        fps.push_back(stat == DetectorStat::fingerprint ? fingerprint(rec)
                                                        : max_logit_score(rec));
    }
    return fps;
}

int cmd_train(const GlobalArgs& g) {
    const ExperimentConfig cfg = load_config(g);
    const fs::path out = ensure_out_dir(cfg);

    const Dataset train_data = build_train_dataset(cfg);
    const Shape input_shape = train_data.feature_shape();
    const ModelDesc desc = topology_by_name(cfg.topology.name, input_shape,
                                            static_cast<std::uint32_t>(train_data.num_classes),
                                            cfg.topology.uncertainty_width);
    DualHeadModel model = DualHeadModel::build(desc, cfg.train.seed);
    model.set_train_seed(cfg.train.seed);

    const SplitDataset split = split_dataset(train_data, 0.8, derive_seed(cfg.train.seed, 4));
    std::printf("training: %zu task samples, %zu fingerprint samples\n",
                split.task_split.size(), split.fingerprint_split.size());

    const auto h1 = train_task(model, split, cfg.train);
    for (const Stage1Epoch& e : h1) {
        std::printf("  stage1 epoch %2d  loss %.4f  val_acc %.4f\n", e.epoch, e.loss,
                    e.val_accuracy);
    }
    const auto h2 = train_uncertainty_head(model, split, cfg.train);
    for (const Stage2Epoch& e : h2) {
        if (e.epoch % 10 == 0 || e.epoch + 1 == static_cast<int>(h2.size())) {
            std::printf("  stage2 epoch %2d  loss %.6f  mean_fp %.4f\n", e.epoch, e.loss,
                        e.mean_fingerprint);
        }
    }

    const fs::path ckpt = out / "model.ckpt";
    save_checkpoint(model, ckpt.string());
    std::printf("checkpoint: %s\n", ckpt.string().c_str());

    std::ofstream hist(out / "train_history.csv");
    hist << "stage,epoch,loss,metric\n";
    for (const Stage1Epoch& e : h1) {
        hist << "1," << e.epoch << ',' << format_g6(e.loss) << ',' << format_g6(e.val_accuracy)
             << '\n';
    }
    for (const Stage2Epoch& e : h2) {
        hist << "2," << e.epoch << ',' << format_g6(e.loss) << ','
             << format_g6(e.mean_fingerprint) << '\n';
    }
    return 0;
}

int cmd_calibrate(const GlobalArgs& g, const std::string& ckpt_path) {
    const ExperimentConfig cfg = load_config(g);
    const fs::path out = ensure_out_dir(cfg);

    DualHeadModel model = load_checkpoint(ckpt_path.empty()
                                              ? (out / "model.ckpt").string()
                                              : ckpt_path);
    const Dataset val = build_val_dataset(cfg);
    ValSplit vs = split_validation(cfg, val);

    const auto fps = collect_fingerprints(model, vs.calibration, DetectorStat::fingerprint);
    const FingerprintBoundary boundary = calibrate_boundary(
        fps, cfg.detector.q_low, cfg.detector.q_high, cfg.detector.z_threshold);

    const fs::path bpath = out / "boundary.json";
    save_boundary(boundary, bpath.string());
    std::printf("boundary: l=%.6g h=%.6g (n=%zu) -> %s\n", boundary.l, boundary.h,
                boundary.n_calibration, bpath.string().c_str());

    const EvalResult golden = evaluate_model(model, vs.evaluation, boundary);
    std::printf("golden: accuracy %.4f, fault-free coverage (FPR) %.4f\n", golden.accuracy,
                golden.coverage);
    return 0;
}

int cmd_campaign(const GlobalArgs& g, const std::string& ckpt_path,
                 const std::string& boundary_path, const std::string& format) {
    const ExperimentConfig cfg = load_config(g);
    const fs::path out = ensure_out_dir(cfg);
    if (cfg.campaign.specs_template.empty()) {
        throw InvalidConfig("campaign: config has no fault specs");
    }

    DualHeadModel model = load_checkpoint(ckpt_path.empty()
                                              ? (out / "model.ckpt").string()
                                              : ckpt_path);
    const FingerprintBoundary boundary = load_boundary(
        boundary_path.empty() ? (out / "boundary.json").string() : boundary_path);

    const Dataset val = build_val_dataset(cfg);
    ValSplit vs = split_validation(cfg, val);

    CampaignResult res = run_campaign(model, boundary, cfg.campaign, vs.evaluation);
    const CampaignSummary summary = summarize(res.runs, res.baseline_accuracy,
                                              res.fault_free_coverage,
                                              cfg.campaign.nonfunctional_drop);

    ReportMeta meta;
    meta.timestamp = iso_timestamp();
    meta.base_seed = cfg.campaign.base_seed;

    const ReportFormat fmt = report_format_from_string(format);
    const fs::path rpath = out / (fmt == ReportFormat::csv ? "results.csv" : "report.json");
    write_report(res.runs, summary, boundary, rpath.string(), fmt, meta);
    if (fmt == ReportFormat::csv) {
        // A JSON mirror is always emitted alongside CSV for downstream tools.
        write_report(res.runs, summary, boundary, (out / "report.json").string(),
                     ReportFormat::json, meta);
    }

    std::printf("baseline accuracy %.4f, fault-free coverage %.4f\n", res.baseline_accuracy,
                res.fault_free_coverage);
    for (const RateSummary& s : summary.per_rate) {
        std::printf("rate %-5.3g cov median %.3f [q1 %.3f q3 %.3f]  acc %.3f+-%.3f  nonfunc %zu/%zu\n",
                    s.rate, s.cov_median, s.cov_q1, s.cov_q3, s.acc_mean, s.acc_std,
                    s.n_nonfunctional, s.n_runs);
    }
    std::printf("report: %s\n", rpath.string().c_str());
    return 0;
}

int cmd_classify(const GlobalArgs& g, const std::string& ckpt_path,
                 const std::string& boundary_path, const std::string& images,
                 const std::string& labels) {
    const ExperimentConfig cfg = load_config(g);
    const fs::path out = ensure_out_dir(cfg);

    DualHeadModel model = load_checkpoint(ckpt_path.empty()
                                              ? (out / "model.ckpt").string()
                                              : ckpt_path);
    const FingerprintBoundary boundary = load_boundary(
        boundary_path.empty() ? (out / "boundary.json").string() : boundary_path);

    Dataset data;
    if (!images.empty()) {
        if (labels.empty()) throw InvalidConfig("classify: --images requires --labels");
        data = load_idx(images, labels);
    } else {
        data = split_validation(cfg, build_val_dataset(cfg)).evaluation;
    }

    const EvalResult ev = evaluate_model(model, data, boundary);
    const fs::path vpath = out / "verdicts.csv";
    std::ofstream vout(vpath);
    if (!vout) throw WriteError("classify: cannot open " + vpath.string());
    vout << "index,label,prediction,fingerprint,verdict\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        vout << i << ',' << data.samples[i].label << ',' << ev.predictions[i] << ','
             << format_g6(ev.fingerprints[i]) << ','
             << (ev.verdicts[i].faulty() ? "faulty" : "fault_free") << '\n';
    }
    std::printf("accuracy %.4f, flagged %.4f (%zu inputs) -> %s\n", ev.accuracy, ev.coverage,
                data.size(), vpath.string().c_str());
    return 0;
}

int cmd_overhead(const GlobalArgs& g, const std::string& ckpt_path) {
    const ExperimentConfig cfg = load_config(g);
    const fs::path out = ensure_out_dir(cfg);
    DualHeadModel model = load_checkpoint(ckpt_path.empty()
                                              ? (out / "model.ckpt").string()
                                              : ckpt_path);

    const ParamCounts pc = count_params(model);
    const MacCounts mc = count_macs(model, model.input_shape());

    std::printf("%s", model.summary().c_str());
    std::printf("\nparameters:\n");
    std::printf("  backbone          %10llu\n", static_cast<unsigned long long>(pc.backbone));
    std::printf("  prediction head   %10llu\n",
                static_cast<unsigned long long>(pc.prediction_head));
    std::printf("  uncertainty head  %10llu (%.4f%% of total)\n",
                static_cast<unsigned long long>(pc.uncertainty_head),
                100.0 * static_cast<double>(pc.uncertainty_head) /
                    static_cast<double>(pc.total));
    std::printf("  total             %10llu\n", static_cast<unsigned long long>(pc.total));
    std::printf("MACs (per forward pass):\n");
    for (const auto& [name, macs] : mc.per_layer) {
        std::printf("  %-28s %12llu\n", name.c_str(), static_cast<unsigned long long>(macs));
    }
    std::printf("  uncertainty head share: %.4f%%\n",
                100.0 * static_cast<double>(mc.uncertainty_head) /
                    static_cast<double>(mc.total));

    std::ofstream csv(out / "overhead.csv");
    csv << "component,params,macs\n";
    csv << "backbone," << pc.backbone << ',' << mc.backbone << '\n';
    csv << "prediction_head," << pc.prediction_head << ',' << mc.prediction_head << '\n';
    csv << "uncertainty_head," << pc.uncertainty_head << ',' << mc.uncertainty_head << '\n';
    csv << "total," << pc.total << ',' << mc.total << '\n';
    return 0;
}

int cmd_report(const GlobalArgs& g, const std::string& results_path, double baseline_accuracy,
               double fault_free_coverage) {
    const ExperimentConfig cfg = load_config(g);
    const fs::path out = ensure_out_dir(cfg);

    const std::vector<RunResult> rows = parse_results_csv(results_path);
    double baseline = baseline_accuracy;
    double fpr = fault_free_coverage;
    if (baseline < 0.0 || fpr < 0.0) {
        // Derive defaults from the rate-0 rows when present.
        double acc_sum = 0.0, cov_sum = 0.0;
        std::size_t n0 = 0;
        for (const RunResult& r : rows) {
            if (r.rate == 0.0) {
                acc_sum += r.accuracy;
                cov_sum += r.coverage;
                ++n0;
            }
        }
        if (n0 == 0) {
            throw InvalidConfig(
                "report: no rate-0 rows; pass --baseline-accuracy and --fault-free-coverage");
        }
        if (baseline < 0.0) baseline = acc_sum / static_cast<double>(n0);
        if (fpr < 0.0) fpr = cov_sum / static_cast<double>(n0);
    }

    const CampaignSummary summary =
        summarize(rows, baseline, fpr, cfg.campaign.nonfunctional_drop);
    FingerprintBoundary boundary; // not part of raw rows; emit zeros
    ReportMeta meta;
    meta.timestamp = iso_timestamp();
    meta.base_seed = cfg.campaign.base_seed;
    write_report(rows, summary, boundary, (out / "report_rows.csv").string(),
                 ReportFormat::csv, meta);
    write_report(rows, summary, boundary, (out / "report_summary.json").string(),
                 ReportFormat::json, meta);
    std::printf("summary rows: %zu rates -> %s\n", summary.per_rate.size(),
                (out / "report_rows_summary.csv").string().c_str());
    return 0;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Dual-head BNN self-test engine: train, calibrate, fault campaigns"};
    app.require_subcommand(0, 1);
    app.fallthrough(); // global flags may follow the subcommand name

    GlobalArgs g;
    std::uint64_t seed_opt = 0;
    std::string out_opt;
    int workers_opt = 0;
    app.add_option("--config", g.config_path, "experiment config (JSON)");
    auto* seed_flag = app.add_option("--seed", seed_opt, "override training seed");
    auto* out_flag = app.add_option("--out", out_opt, "override output directory");
    auto* workers_flag = app.add_option("--workers", workers_opt, "override campaign workers");

    std::string ckpt_path, boundary_path, images, labels, format = "csv";
    std::string results_path;
    double baseline_accuracy = -1.0, fault_free_coverage = -1.0;

    CLI::App* train = app.add_subcommand("train", "two-stage training -> checkpoint");
    CLI::App* calibrate =
        app.add_subcommand("calibrate", "fingerprint boundary from fault-free data");
    calibrate->add_option("--checkpoint", ckpt_path, "model checkpoint");
    CLI::App* campaign = app.add_subcommand("campaign", "seeded Monte Carlo fault campaign");
    campaign->add_option("--checkpoint", ckpt_path, "model checkpoint");
    campaign->add_option("--boundary", boundary_path, "boundary file");
    campaign->add_option("--format", format, "report format: csv or json");
    CLI::App* classify = app.add_subcommand("classify", "per-input verdicts for a batch");
    classify->add_option("--checkpoint", ckpt_path, "model checkpoint");
    classify->add_option("--boundary", boundary_path, "boundary file");
    classify->add_option("--images", images, "IDX image file");
    classify->add_option("--labels", labels, "IDX label file");
    CLI::App* overhead = app.add_subcommand("overhead", "parameter and MAC table");
    overhead->add_option("--checkpoint", ckpt_path, "model checkpoint");
    CLI::App* report = app.add_subcommand("report", "summarize raw campaign results");
    report->add_option("--results", results_path, "results CSV")->required();
    report->add_option("--baseline-accuracy", baseline_accuracy, "golden accuracy");
    report->add_option("--fault-free-coverage", fault_free_coverage, "golden FPR");

    if (argc <= 1) {
        std::cout << app.help() << std::endl;
        return 1;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help() << std::endl;
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::endl;
        return 1;
    }

    if (seed_flag->count()) g.seed = seed_opt;
    if (out_flag->count()) g.out_dir = out_opt;
    if (workers_flag->count()) g.workers = workers_opt;

    try {
        if (train->parsed()) return cmd_train(g);
        if (calibrate->parsed()) return cmd_calibrate(g, ckpt_path);
        if (campaign->parsed()) return cmd_campaign(g, ckpt_path, boundary_path, format);
        if (classify->parsed()) return cmd_classify(g, ckpt_path, boundary_path, images, labels);
        if (overhead->parsed()) return cmd_overhead(g, ckpt_path);
        if (report->parsed()) {
            return cmd_report(g, results_path, baseline_accuracy, fault_free_coverage);
        }
        std::cout << app.help() << std::endl;
        return 1;
    } catch (const InvalidConfig& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    }
}

} // namespace ufp
