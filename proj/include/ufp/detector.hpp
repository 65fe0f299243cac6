#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ufp/errors.hpp"

namespace ufp {

// Calibrated normal operating range for the fingerprint: quantiles of the
// fault-free distribution after Z-score outlier removal.
struct FingerprintBoundary {
    double l = 0.0;
    double h = 0.0;
    double q_low = 0.025;
    double q_high = 0.975;
    double z_threshold = 2.0;
    std::size_t n_calibration = 0;
};

enum class Status { fault_free, faulty };

struct Verdict {
    Status status = Status::fault_free;
    float fingerprint = 0.0f;

    bool faulty() const { return status == Status::faulty; }
};

// Quantile by linear interpolation between adjacent order statistics of the
// sorted sample: position q*(n-1), fractional part interpolated. Fixed so any
// reimplementation reproduces identical boundaries.
double quantile_linear(std::span<const double> sorted_values, double q);

// Calibration: mean/std over the full sample (sample std, n-1), retain values
// with |x - mu|/sigma < z_threshold (all retained when sigma == 0), then take
// the q_low/q_high quantiles of the retained subset. Needs >= 20 samples.
FingerprintBoundary calibrate_boundary(std::span<const float> fingerprints, double q_low,
                                       double q_high, double z_threshold);

// Faulty iff F < l or F > h (strict; boundary values are fault-free).
Verdict classify(float fingerprint, const FingerprintBoundary& boundary);

// Recalibration at new quantile levels from a fault-free sample; same Z-filter.
FingerprintBoundary adjust_boundary(const FingerprintBoundary& boundary, double new_q_low,
                                    double new_q_high, std::span<const float> fingerprints);

} // namespace ufp
