#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ufp/detector.hpp"
#include "ufp/rng.hpp"

using namespace ufp;

namespace {

std::vector<float> uniform_sample(std::size_t n, std::uint64_t seed, double lo = 0.0,
                                  double hi = 1.0) {
    Rng rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.next_uniform(lo, hi));
    return v;
}

// Sort-based oracle reproducing the documented estimator.
double quantile_oracle(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= values.size()) return values.back();
    return values[i] + (pos - std::floor(pos)) * (values[i + 1] - values[i]);
}

} // namespace

TEST_CASE("constant sample collapses the boundary (sigma = 0 path)") {
    const std::vector<float> fps(50, 1.0f);
    const FingerprintBoundary b = calibrate_boundary(fps, 0.025, 0.975, 2.0);
    CHECK(b.l == 1.0);
    CHECK(b.h == 1.0);
    CHECK(b.n_calibration == 50);
}

TEST_CASE("uniform sample lands near the nominal quantiles") {
    const auto fps = uniform_sample(1000, 99);
    const FingerprintBoundary b = calibrate_boundary(fps, 0.025, 0.975, 2.0);
    CHECK(std::fabs(b.l - 0.025) <= 0.02);
    CHECK(std::fabs(b.h - 0.975) <= 0.02);

    // Against the sort-based oracle with the Z-filter applied by hand.
    double mean = 0.0;
    for (float f : fps) mean += f;
    mean /= static_cast<double>(fps.size());
    double var = 0.0;
    for (float f : fps) var += (f - mean) * (f - mean);
    var /= static_cast<double>(fps.size() - 1);
    const double sigma = std::sqrt(var);
    std::vector<double> retained;
    for (float f : fps) {
        if (std::fabs((f - mean) / sigma) < 2.0) retained.push_back(f);
    }
    CHECK(b.l == doctest::Approx(quantile_oracle(retained, 0.025)).epsilon(1e-12));
    CHECK(b.h == doctest::Approx(quantile_oracle(retained, 0.975)).epsilon(1e-12));
}

TEST_CASE("Z-filter drops a gross outlier before the quantile") {
    std::vector<float> fps = uniform_sample(200, 5, 0.9, 1.1);
    fps.push_back(10.0f);
    const FingerprintBoundary b = calibrate_boundary(fps, 0.025, 0.975, 2.0);
    CHECK(b.h < 2.0); // outlier removed by the filter

    // Manual filter oracle.
    double mean = 0.0;
    for (float f : fps) mean += f;
    mean /= static_cast<double>(fps.size());
    double var = 0.0;
    for (float f : fps) var += (f - mean) * (f - mean);
    var /= static_cast<double>(fps.size() - 1);
    const double sigma = std::sqrt(var);
    std::vector<double> retained;
    for (float f : fps) {
        if (std::fabs((f - mean) / sigma) < 2.0) retained.push_back(f);
    }
    CHECK(retained.size() == 200);
    CHECK(b.h == doctest::Approx(quantile_oracle(retained, 0.975)).epsilon(1e-12));
}

TEST_CASE("calibration preconditions") {
    CHECK_THROWS_AS(calibrate_boundary(std::vector<float>(19, 1.0f), 0.025, 0.975, 2.0),
                    InsufficientCalibration);
    std::vector<float> with_nan(30, 1.0f);
    with_nan[7] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(calibrate_boundary(with_nan, 0.025, 0.975, 2.0), InvalidFingerprint);
    CHECK_THROWS_AS(calibrate_boundary(std::vector<float>(30, 1.0f), 0.5, 0.5, 2.0),
                    InvalidConfig);
}

TEST_CASE("classify decision rule, boundary cases strict") {
    FingerprintBoundary b;
    b.l = 0.6;
    b.h = 0.95;
    CHECK(classify(0.5f, b).status == Status::faulty);      // F < l
    CHECK(classify(0.8f, b).status == Status::fault_free);  // inside
    CHECK(classify(0.6f, b).status == Status::fault_free);  // F == l
    CHECK(classify(0.95f, b).status == Status::fault_free); // F == h
    CHECK(classify(0.96f, b).status == Status::faulty);     // F > h
    CHECK_THROWS_AS(classify(std::numeric_limits<float>::quiet_NaN(), b), InvalidFingerprint);
}

TEST_CASE("classify region is exactly (-inf,l) U (h,inf)") {
    const auto fps = uniform_sample(300, 8);
    const FingerprintBoundary b = calibrate_boundary(fps, 0.1, 0.9, 2.0);
    Rng rng(10);
    for (int i = 0; i < 1000; ++i) {
        const float f = static_cast<float>(rng.next_uniform(-0.5, 1.5));
        const bool expect_faulty = f < b.l || f > b.h;
        CHECK(classify(f, b).faulty() == expect_faulty);
    }
}

TEST_CASE("calibration is order-invariant") {
    auto fps = uniform_sample(400, 12);
    const FingerprintBoundary b1 = calibrate_boundary(fps, 0.025, 0.975, 2.0);
    std::reverse(fps.begin(), fps.end());
    const FingerprintBoundary b2 = calibrate_boundary(fps, 0.025, 0.975, 2.0);
    CHECK(b1.l == b2.l);
    CHECK(b1.h == b2.h);
}

TEST_CASE("Z-filter is a no-op for infinite threshold") {
    const auto fps = uniform_sample(100, 21);
    const FingerprintBoundary with = calibrate_boundary(
        fps, 0.025, 0.975, std::numeric_limits<double>::infinity());
    std::vector<double> all(fps.begin(), fps.end());
    CHECK(with.l == doctest::Approx(quantile_oracle(all, 0.025)).epsilon(1e-12));
    CHECK(with.h == doctest::Approx(quantile_oracle(all, 0.975)).epsilon(1e-12));
}

TEST_CASE("retained fraction inside (l,h) respects the quantile mass bound") {
    Rng seeds(31);
    for (int trial = 0; trial < 10; ++trial) {
        const auto fps = uniform_sample(200 + seeds.next_below(300), derive_seed(50, trial));
        const double q_low = 0.02 + 0.03 * seeds.next_unit();
        const double q_high = 0.93 + 0.05 * seeds.next_unit();
        const FingerprintBoundary b = calibrate_boundary(fps, q_low, q_high, 2.0);

        // Recompute the retained subset.
        double mean = 0.0;
        for (float f : fps) mean += f;
        mean /= static_cast<double>(fps.size());
        double var = 0.0;
        for (float f : fps) var += (f - mean) * (f - mean);
        var /= static_cast<double>(fps.size() - 1);
        const double sigma = std::sqrt(var);
        std::size_t retained = 0, inside = 0;
        for (float f : fps) {
            if (sigma > 0 && std::fabs((f - mean) / sigma) >= 2.0) continue;
            ++retained;
            if (f > b.l && f < b.h) ++inside;
        }
        const double frac = static_cast<double>(inside) / static_cast<double>(retained);
        CHECK(frac >= (q_high - q_low) - 2.0 / static_cast<double>(b.n_calibration));
    }
}

TEST_CASE("adjust_boundary widens monotonically and is reproducible") {
    const auto fps = uniform_sample(500, 77);
    const FingerprintBoundary base = calibrate_boundary(fps, 0.025, 0.95, 2.0);

    const FingerprintBoundary wider = adjust_boundary(base, 0.015, 0.97, fps);
    CHECK(wider.l <= base.l);
    CHECK(wider.h >= base.h);

    const FingerprintBoundary same = adjust_boundary(base, 0.025, 0.95, fps);
    CHECK(same.l == base.l);
    CHECK(same.h == base.h);
}

TEST_CASE("quantile estimator matches the oracle on random samples") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(1 + rng.next_below(100));
        for (auto& x : v) x = rng.next_uniform(-5, 5);
        std::vector<double> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        for (double q : {0.0, 0.25, 0.5, 0.75, 1.0, 0.025, 0.975}) {
            CHECK(quantile_linear(sorted, q) == doctest::Approx(quantile_oracle(v, q))
                                                    .epsilon(1e-12));
        }
    }
}
