/**
 * @file duration_stats.hpp
 * @brief Descriptive statistics and Vincentile profiles of fixation durations.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gazeskill/error.hpp"
#include "gazeskill/types.hpp"

namespace gazeskill {

struct DescriptiveStats {
    std::size_t n = 0;
    double mean_ms = 0.0;
    double median_ms = 0.0;
    std::optional<double> sd_ms;  // sample sd, absent for n < 2
    double min_ms = 0.0;
    double max_ms = 0.0;
};

struct VincentileProfile {
    std::vector<double> bin_means_ms;
    std::vector<std::size_t> bin_counts;
};

namespace detail {

inline double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Two-pass sample variance (n - 1 denominator). Requires v.size() >= 2.
inline double sample_variance(std::span<const double> v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
}

/// Median of an already sorted range.
inline double sorted_median(std::span<const double> v) {
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Linear-interpolation quantile of a sorted range (type 7).
inline double sorted_quantile(std::span<const double> v, double p) {
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

inline DescriptiveStats describe(const DurationDistribution& dist) {
    const auto& d = dist.durations_ms;
    if (d.empty()) throw Error(Errc::EmptyDistribution, "describe needs at least one duration");
    DescriptiveStats s;
    s.n = d.size();
    s.mean_ms = detail::mean_of(d);
    s.median_ms = detail::sorted_median(d);
    s.min_ms = d.front();
    s.max_ms = d.back();
    if (d.size() >= 2) s.sd_ms = std::sqrt(detail::sample_variance(d));
    return s;
}

/// Equal-count rank bins: 0-based rank r of the sorted durations goes to bin
/// floor(k * r / n).
inline VincentileProfile vincentiles(const DurationDistribution& dist, std::size_t k = 5) {
    const auto& d = dist.durations_ms;
    if (k == 0) throw Error(Errc::InvalidArgument, "vincentile bin count must be positive");
    if (d.size() < k) throw Error(Errc::TooFewObservations, "vincentiles need at least k durations");
    VincentileProfile p;
    p.bin_means_ms.assign(k, 0.0);
    p.bin_counts.assign(k, 0);
    const std::size_t n = d.size();
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t bin = (k * r) / n;
        p.bin_means_ms[bin] += d[r];
        ++p.bin_counts[bin];
    }
    for (std::size_t b = 0; b < k; ++b) p.bin_means_ms[b] /= static_cast<double>(p.bin_counts[b]);
    return p;
}

/// Fraction of durations strictly greater than `threshold_ms`.
inline double pct_over(const DurationDistribution& dist, double threshold_ms) {
    const auto& d = dist.durations_ms;
    if (d.empty()) throw Error(Errc::EmptyDistribution, "pct_over needs at least one duration");
    const auto it = std::upper_bound(d.begin(), d.end(), threshold_ms);
    return static_cast<double>(d.end() - it) / static_cast<double>(d.size());
}

}  // namespace gazeskill
