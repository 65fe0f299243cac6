#pragma once

#include <string>
#include <vector>

#include "ufp/campaign.hpp"
#include "ufp/detector.hpp"

namespace ufp {

enum class ReportFormat { csv, json };

ReportFormat report_format_from_string(const std::string& s);

// Free-form metadata; the timestamp is the only non-deterministic field and
// is confined to the JSON metadata block (CSV output carries no timestamp).
struct ReportMeta {
    std::string timestamp; // empty = omit
    std::uint64_t base_seed = 0;
};

// csv: writes `path` with columns rate,run,accuracy,coverage,nonfunctional,seed
//      plus `<stem>_summary.csv` with columns rate,cov_median,cov_q1,cov_q3,
//      cov_min,cov_max,acc_mean,acc_std.
// json: one file mirroring the same schema with boundary + metadata attached.
// Numbers are rendered with 6 significant digits.
void write_report(const std::vector<RunResult>& results, const CampaignSummary& summary,
                  const FingerprintBoundary& boundary, const std::string& path,
                  ReportFormat format, const ReportMeta& meta = {});

std::string summary_csv_path(const std::string& results_path);

// Parses a results CSV written by write_report.
std::vector<RunResult> parse_results_csv(const std::string& path);

// Boundary file (JSON object with l, h, q_low, q_high, z_threshold,
// n_calibration).
void save_boundary(const FingerprintBoundary& b, const std::string& path);
FingerprintBoundary load_boundary(const std::string& path);

// 6-significant-digit rendering used across all report output.
std::string format_g6(double v);

} // namespace ufp
