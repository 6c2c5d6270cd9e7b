/**
 * @file density.hpp
 * @brief Gaussian kernel density estimation over fixation durations, mode
 * detection, bandwidth selection and ambient/focal classification.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gazeskill/duration_stats.hpp"
#include "gazeskill/error.hpp"
#include "gazeskill/types.hpp"

namespace gazeskill {

inline constexpr double kDefaultBandwidthMs = 30.0;
inline constexpr double kDefaultMinProminenceFrac = 0.05;

struct DensityEstimate {
    std::vector<double> grid_ms;
    std::vector<double> density;
    double bandwidth_ms = 0.0;
};

struct Mode {
    double location_ms = 0.0;
    double density_value = 0.0;
    double prominence = 0.0;
};

enum class FixationClass { Ambient, Intermediate, Focal };

constexpr std::string_view to_string(FixationClass c) noexcept {
    switch (c) {
    case FixationClass::Ambient: return "ambient";
    case FixationClass::Intermediate: return "intermediate";
    case FixationClass::Focal: return "focal";
    }
    return "intermediate";
}

struct ClassBands {
    double ambient_max_ms = 150.0;
    double focal_min_ms = 250.0;
};

namespace detail {

inline constexpr double kInvSqrt2Pi = 0.3989422804014327;  // 1/sqrt(2*pi)

// Beyond this many bandwidths exp(-u^2/2) underflows to exactly 0.0, so
// skipping those terms does not change the summed value.
inline constexpr double kKernelCutoff = 38.7;

/// Peak indices with their prominence. A peak is a strict local maximum or
/// the midpoint of a plateau whose two neighbours are both lower. Prominence
/// is the height above the highest saddle leading to a strictly taller peak;
/// the global maximum's prominence is its own height.
struct Peak {
    std::size_t index;
    double height;
    double prominence;
};

inline std::vector<Peak> find_peaks(std::span<const double> y) {
    std::vector<Peak> peaks;
    const std::size_t n = y.size();
    std::size_t i = 1;
    while (i + 1 < n) {
        if (!(y[i] > y[i - 1])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && y[j + 1] == y[i]) ++j;
        if (j + 1 < n && y[j + 1] < y[i]) {
            const double v = y[i];
            bool left_higher = false, right_higher = false;
            double left_min = v, right_min = v;
            for (std::size_t a = i; a-- > 0;) {
                if (y[a] > v) {
                    left_higher = true;
                    break;
                }
                left_min = std::min(left_min, y[a]);
            }
            for (std::size_t b = j + 1; b < n; ++b) {
                if (y[b] > v) {
                    right_higher = true;
                    break;
                }
                right_min = std::min(right_min, y[b]);
            }
            double prominence = v;
            if (left_higher && right_higher)
                prominence = v - std::max(left_min, right_min);
            else if (left_higher)
                prominence = v - left_min;
            else if (right_higher)
                prominence = v - right_min;
            peaks.push_back(Peak{(i + j) / 2, v, prominence});
        }
        i = j + 1;
    }
    return peaks;
}

}  // namespace detail

/// Gaussian KDE evaluated on a 1 ms grid from 0 to max + 5 bandwidths, with
/// no boundary correction. Summation runs over the sorted sample in order so
/// the result is reproducible bit for bit.
inline DensityEstimate kde(const DurationDistribution& dist, double bandwidth_ms) {
    const auto& d = dist.durations_ms;
    if (d.empty()) throw Error(Errc::EmptyDistribution, "kde needs at least one duration");
    if (!(bandwidth_ms > 0.0) || !std::isfinite(bandwidth_ms))
        throw Error(Errc::NonPositiveBandwidth, "bandwidth must be positive");

    DensityEstimate est;
    est.bandwidth_ms = bandwidth_ms;
    const double hi = d.back() + 5.0 * bandwidth_ms;
    const auto points = static_cast<std::size_t>(std::floor(hi)) + 1;
    est.grid_ms.resize(points);
    est.density.resize(points);

    const double norm = detail::kInvSqrt2Pi / (static_cast<double>(d.size()) * bandwidth_ms);
    const double reach = detail::kKernelCutoff * bandwidth_ms;
    auto first = d.begin();
    for (std::size_t g = 0; g < points; ++g) {
        const double t = static_cast<double>(g);
        while (first != d.end() && *first < t - reach) ++first;
        double sum = 0.0;
        for (auto it = first; it != d.end() && *it <= t + reach; ++it) {
            const double u = (t - *it) / bandwidth_ms;
            sum += std::exp(-0.5 * u * u);
        }
        est.grid_ms[g] = t;
        est.density[g] = sum * norm;
    }
    return est;
}

/// Modes whose prominence reaches `min_prominence_frac` of the global maximum
/// density, ordered by location.
inline std::vector<Mode> find_modes(const DensityEstimate& est, double min_prominence_frac = kDefaultMinProminenceFrac) {
    if (est.density.empty()) throw Error(Errc::InvalidArgument, "find_modes needs a non-empty density");
    const double global_max = *std::max_element(est.density.begin(), est.density.end());
    std::vector<Mode> modes;
    for (const auto& p : detail::find_peaks(est.density)) {
        if (p.prominence >= min_prominence_frac * global_max)
            modes.push_back(Mode{est.grid_ms[p.index], p.height, p.prominence});
    }
    return modes;
}

/// Silverman's rule of thumb 0.9 * min(sd, IQR/1.34) * n^(-1/5). Falls back to
/// sd when the IQR is zero.
inline double silverman_bandwidth(std::span<const double> sorted) {
    if (sorted.size() < 2) throw Error(Errc::TooFewObservations, "silverman bandwidth needs two values");
    const double sd = std::sqrt(detail::sample_variance(sorted));
    const double iqr = detail::sorted_quantile(sorted, 0.75) - detail::sorted_quantile(sorted, 0.25);
    double scale = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    if (!(scale > 0.0)) throw Error(Errc::DegenerateDistribution, "zero spread");
    return 0.9 * scale * std::pow(static_cast<double>(sorted.size()), -0.2);
}

namespace detail {

/// Estimates of the integrated squared density derivatives used by the
/// Sheather-Jones selector, as exact pairwise Gaussian sums over a sorted
/// sample. Pairs further than the kernel cutoff contribute exactly zero.
inline double sj_phi4(std::span<const double> x, double h) {
    const std::size_t n = x.size();
    const double reach = kKernelCutoff * h;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n && x[j] - x[i] <= reach; ++j) {
            const double u = (x[j] - x[i]) / h;
            const double del = u * u;
            sum += std::exp(-0.5 * del) * (del * del - 6.0 * del + 3.0);
        }
    }
    sum = 2.0 * sum + 3.0 * static_cast<double>(n);
    const double nn = static_cast<double>(n);
    return sum / (nn * (nn - 1.0) * std::pow(h, 5.0)) * kInvSqrt2Pi;
}

inline double sj_phi6(std::span<const double> x, double h) {
    const std::size_t n = x.size();
    const double reach = kKernelCutoff * h;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n && x[j] - x[i] <= reach; ++j) {
            const double u = (x[j] - x[i]) / h;
            const double del = u * u;
            sum += std::exp(-0.5 * del) * (del * del * del - 15.0 * del * del + 45.0 * del - 15.0);
        }
    }
    sum = 2.0 * sum - 15.0 * static_cast<double>(n);
    const double nn = static_cast<double>(n);
    return sum / (nn * (nn - 1.0) * std::pow(h, 7.0)) * kInvSqrt2Pi;
}

/// The Sheather-Jones "solve-the-equation" objective; its root is the bandwidth.
struct SheatherJonesObjective {
    std::span<const double> x;
    double c1 = 0.0;
    double alpha2 = 0.0;

    static std::optional<SheatherJonesObjective> make(std::span<const double> sorted) {
        const double n = static_cast<double>(sorted.size());
        const double sd = std::sqrt(sample_variance(sorted));
        const double iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
        const double scale = iqr > 0.0 ? std::min(sd, iqr / 1.349) : sd;
        const double a = 1.24 * scale * std::pow(n, -1.0 / 7.0);
        const double b = 1.23 * scale * std::pow(n, -1.0 / 9.0);
        const double td = -sj_phi6(sorted, b);
        const double sda = sj_phi4(sorted, a);
        if (!(td > 0.0) || !(sda > 0.0)) return std::nullopt;
        SheatherJonesObjective f;
        f.x = sorted;
        f.c1 = 1.0 / (2.0 * std::sqrt(std::numbers::pi) * n);
        f.alpha2 = 1.357 * std::pow(sda / td, 1.0 / 7.0);
        return f;
    }

    double operator()(double h) const {
        const double phi4 = sj_phi4(x, alpha2 * std::pow(h, 5.0 / 7.0));
        if (!(phi4 > 0.0)) return -h;
        return std::pow(c1 / phi4, 0.2) - h;
    }
};

}  // namespace detail

/// Sheather-Jones solve-the-equation bandwidth, found by bisection on
/// [sd/1000, 10 sd] to 1e-6 relative width. Falls back to Silverman's rule
/// when the objective has no sign change on that bracket.
inline double sheather_jones_bandwidth(const DurationDistribution& dist) {
    const auto& d = dist.durations_ms;
    if (d.size() < 10) throw Error(Errc::TooFewObservations, "Sheather-Jones needs at least 10 durations");
    const double sd = std::sqrt(detail::sample_variance(d));
    if (!(sd > 0.0)) throw Error(Errc::DegenerateDistribution, "all durations are equal");

    const auto objective = detail::SheatherJonesObjective::make(d);
    if (!objective) return silverman_bandwidth(d);

    double lo = sd / 1000.0, hi = 10.0 * sd;
    double f_lo = (*objective)(lo);
    const double f_hi = (*objective)(hi);
    if (f_lo * f_hi > 0.0) return silverman_bandwidth(d);
    while (hi - lo > 1e-6 * 0.5 * (lo + hi)) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = (*objective)(mid);
        if (f_mid == 0.0) return mid;
        if ((f_mid > 0.0) == (f_lo > 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

inline void validate(const ClassBands& b) {
    if (!(b.ambient_max_ms < b.focal_min_ms)) throw Error(Errc::InvalidBands, "ambient_max must be below focal_min");
}

inline FixationClass classify_fixation(double duration_ms, const ClassBands& bands = {}) {
    validate(bands);
    if (!(duration_ms > 0.0)) throw Error(Errc::InvalidArgument, "duration must be positive");
    if (duration_ms <= bands.ambient_max_ms) return FixationClass::Ambient;
    if (duration_ms >= bands.focal_min_ms) return FixationClass::Focal;
    return FixationClass::Intermediate;
}

}  // namespace gazeskill
