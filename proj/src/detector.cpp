#include "ufp/detector.hpp"

#include <algorithm>
#include <cmath>

namespace ufp {

double quantile_linear(std::span<const double> sorted_values, double q) {
    if (sorted_values.empty()) throw InsufficientCalibration("quantile of empty sample");
    if (sorted_values.size() == 1) return sorted_values[0];
    const double pos = q * static_cast<double>(sorted_values.size() - 1);
    const double lo = std::floor(pos);
    const std::size_t i = static_cast<std::size_t>(lo);
    if (i + 1 >= sorted_values.size()) return sorted_values.back();
    const double frac = pos - lo;
    return sorted_values[i] + frac * (sorted_values[i + 1] - sorted_values[i]);
}

FingerprintBoundary calibrate_boundary(std::span<const float> fingerprints, double q_low,
                                       double q_high, double z_threshold) {
    if (fingerprints.size() < 20) {
        throw InsufficientCalibration("calibrate_boundary: need >= 20 samples, got " +
                                      std::to_string(fingerprints.size()));
    }
    if (!(q_low > 0.0 && q_high < 1.0 && q_low < q_high)) {
        throw InvalidConfig("calibrate_boundary: need 0 < q_low < q_high < 1");
    }
    for (float f : fingerprints) {
        if (!std::isfinite(f)) {
            throw InvalidFingerprint("calibrate_boundary: non-finite fingerprint in sample");
        }
    }

    const double n = static_cast<double>(fingerprints.size());
    double mean = 0.0;
    for (float f : fingerprints) mean += f;
    mean /= n;
    double var = 0.0;
    for (float f : fingerprints) {
        const double d = f - mean;
        var += d * d;
    }
    var /= (n - 1.0);
    const double sigma = std::sqrt(var);

    std::vector<double> retained;
    retained.reserve(fingerprints.size());
    if (sigma == 0.0) {
        retained.assign(fingerprints.begin(), fingerprints.end());
    } else {
        for (float f : fingerprints) {
            if (std::fabs((f - mean) / sigma) < z_threshold) {
                retained.push_back(f);
            }
        }
        if (retained.empty()) {
            throw InsufficientCalibration(
                "calibrate_boundary: Z-filter removed every sample");
        }
    }
    std::sort(retained.begin(), retained.end());

    FingerprintBoundary b;
    b.q_low = q_low;
    b.q_high = q_high;
    b.z_threshold = z_threshold;
    b.n_calibration = fingerprints.size();
    b.l = quantile_linear(retained, q_low);
    b.h = quantile_linear(retained, q_high);
    return b;
}

Verdict classify(float fingerprint, const FingerprintBoundary& boundary) {
    if (!std::isfinite(fingerprint)) {
        throw InvalidFingerprint("classify: non-finite fingerprint");
    }
    Verdict v;
    v.fingerprint = fingerprint;
    v.status = (fingerprint < boundary.l || fingerprint > boundary.h) ? Status::faulty
                                                                      : Status::fault_free;
    return v;
}

FingerprintBoundary adjust_boundary(const FingerprintBoundary& boundary, double new_q_low,
                                    double new_q_high, std::span<const float> fingerprints) {
    return calibrate_boundary(fingerprints, new_q_low, new_q_high, boundary.z_threshold);
}

} // namespace ufp
