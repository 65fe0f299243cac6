#include "ufp/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ufp {

using nlohmann::json;

ReportFormat report_format_from_string(const std::string& s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    throw InvalidConfig("unknown report format: " + s);
}

std::string format_g6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

namespace {

double round_g6(double v) { return std::stod(format_g6(v)); }

void write_results_csv(const std::vector<RunResult>& results, std::ostream& out) {
    out << "rate,run,accuracy,coverage,nonfunctional,seed\n";
    for (const RunResult& r : results) {
        out << format_g6(r.rate) << ',' << r.run_index << ',' << format_g6(r.accuracy) << ','
            << format_g6(r.coverage) << ',' << (r.nonfunctional ? "true" : "false") << ','
            << r.seed_used << '\n';
    }
}

void write_summary_csv(const CampaignSummary& summary, std::ostream& out) {
    out << "rate,cov_median,cov_q1,cov_q3,cov_min,cov_max,acc_mean,acc_std\n";
    for (const RateSummary& s : summary.per_rate) {
        out << format_g6(s.rate) << ',' << format_g6(s.cov_median) << ','
            << format_g6(s.cov_q1) << ',' << format_g6(s.cov_q3) << ','
            << format_g6(s.cov_min) << ',' << format_g6(s.cov_max) << ','
            << format_g6(s.acc_mean) << ',' << format_g6(s.acc_std) << '\n';
    }
}

json boundary_to_json(const FingerprintBoundary& b) {
    return json{{"l", round_g6(b.l)},
                {"h", round_g6(b.h)},
                {"q_low", round_g6(b.q_low)},
                {"q_high", round_g6(b.q_high)},
                {"z_threshold", round_g6(b.z_threshold)},
                {"n_calibration", b.n_calibration}};
}

} // namespace

std::string summary_csv_path(const std::string& results_path) {
    const std::size_t dot = results_path.rfind('.');
    const std::size_t slash = results_path.find_last_of("/\\");
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
        return results_path + "_summary.csv";
    }
    return results_path.substr(0, dot) + "_summary.csv";
}

void write_report(const std::vector<RunResult>& results, const CampaignSummary& summary,
                  const FingerprintBoundary& boundary, const std::string& path,
                  ReportFormat format, const ReportMeta& meta) {
    if (format == ReportFormat::csv) {
        {
            std::ofstream out(path, std::ios::trunc);
            if (!out) throw WriteError("write_report: cannot open " + path);
            write_results_csv(results, out);
            if (!out) throw WriteError("write_report: write failed for " + path);
        }
        {
            const std::string spath = summary_csv_path(path);
            std::ofstream out(spath, std::ios::trunc);
            if (!out) throw WriteError("write_report: cannot open " + spath);
            write_summary_csv(summary, out);
            if (!out) throw WriteError("write_report: write failed for " + spath);
        }
        return;
    }

    json doc;
    doc["meta"] = json::object();
    if (!meta.timestamp.empty()) doc["meta"]["generated_at"] = meta.timestamp;
    doc["meta"]["base_seed"] = meta.base_seed;
    doc["boundary"] = boundary_to_json(boundary);
    doc["baseline_accuracy"] = round_g6(summary.baseline_accuracy);
    doc["fault_free_coverage"] = round_g6(summary.fault_free_coverage);

    doc["results"] = json::array();
    for (const RunResult& r : results) {
        doc["results"].push_back(json{{"rate", round_g6(r.rate)},
                                      {"run", r.run_index},
                                      {"accuracy", round_g6(r.accuracy)},
                                      {"coverage", round_g6(r.coverage)},
                                      {"nonfunctional", r.nonfunctional},
                                      {"seed", r.seed_used}});
    }
    doc["summary"] = json::array();
    for (const RateSummary& s : summary.per_rate) {
        json row{{"rate", round_g6(s.rate)},
                 {"cov_median", round_g6(s.cov_median)},
                 {"cov_q1", round_g6(s.cov_q1)},
                 {"cov_q3", round_g6(s.cov_q3)},
                 {"cov_min", round_g6(s.cov_min)},
                 {"cov_max", round_g6(s.cov_max)},
                 {"acc_mean", round_g6(s.acc_mean)},
                 {"acc_std", round_g6(s.acc_std)},
                 {"n_runs", s.n_runs},
                 {"n_nonfunctional", s.n_nonfunctional}};
        if (s.tpr_nonfunctional) row["tpr_nonfunctional"] = round_g6(*s.tpr_nonfunctional);
        doc["summary"].push_back(std::move(row));
    }

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw WriteError("write_report: cannot open " + path);
    out << doc.dump(2) << '\n';
    if (!out) throw WriteError("write_report: write failed for " + path);
}

std::vector<RunResult> parse_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("parse_results_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty results file");
    if (line != "rate,run,accuracy,coverage,nonfunctional,seed") {
        throw FormatError(path + ": unexpected results header: " + line);
    }
    std::vector<RunResult> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 6) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected 6 fields");
        }
        RunResult r;
        try {
            r.rate = std::stod(fields[0]);
            r.run_index = std::stoi(fields[1]);
            r.accuracy = std::stod(fields[2]);
            r.coverage = std::stod(fields[3]);
            if (fields[4] == "true" || fields[4] == "1") {
                r.nonfunctional = true;
            } else if (fields[4] == "false" || fields[4] == "0") {
                r.nonfunctional = false;
            } else {
                throw FormatError("bad boolean");
            }
            r.seed_used = std::stoull(fields[5]);
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception&) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": malformed row");
        }
        rows.push_back(r);
    }
    return rows;
}

void save_boundary(const FingerprintBoundary& b, const std::string& path) {
    json doc = boundary_to_json(b);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw WriteError("save_boundary: cannot open " + path);
    out << doc.dump(2) << '\n';
    if (!out) throw WriteError("save_boundary: write failed for " + path);
}

FingerprintBoundary load_boundary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("load_boundary: cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw FormatError("load_boundary: " + std::string(e.what()));
    }
    FingerprintBoundary b;
    try {
        b.l = doc.at("l").get<double>();
        b.h = doc.at("h").get<double>();
        b.q_low = doc.at("q_low").get<double>();
        b.q_high = doc.at("q_high").get<double>();
        b.z_threshold = doc.at("z_threshold").get<double>();
        b.n_calibration = doc.at("n_calibration").get<std::size_t>();
    } catch (const json::exception& e) {
        throw FormatError("load_boundary: missing field: " + std::string(e.what()));
    }
    return b;
}

} // namespace ufp
