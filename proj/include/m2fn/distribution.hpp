#pragma once

#include <array>
#include <cmath>

namespace m2fn {

// Normalized histogram over 10 ordered score buckets (ratings 1..10 or
// log-normal-approximated CTR deciles).
struct ScoreDistribution {
    static constexpr int kBuckets = 10;
    std::array<double, kBuckets> buckets{};

    double sum() const {
        double s = 0;
        for (double b : buckets) s += b;
        return s;
    }

    // Moments over bucket indices 1..10.
    double mean() const {
        double m = 0;
        for (int k = 0; k < kBuckets; ++k) m += (k + 1) * buckets[k];
        return m;
    }
    double stddev() const {
        double m = mean(), m2 = 0;
        for (int k = 0; k < kBuckets; ++k) m2 += double(k + 1) * (k + 1) * buckets[k];
        return std::sqrt(std::max(0.0, m2 - m * m));
    }
};

}  // namespace m2fn
