/**
 * @file fixation_detect.hpp
 * @brief Adaptive velocity-threshold fixation detection.
 *
 * The detector is a chain of incremental stages so that the same code serves
 * batch analysis and live streams:
 *
 *   1. gap handling    invalid runs up to max_interpolate_gap_ms are filled by
 *                      linear interpolation, longer gaps split the recording
 *   2. smoothing       optional 3-sample median of x and y within a segment
 *   3. speed           central-difference speed in px/s (one-sided at
 *                      segment ends)
 *   4. assembly        sub-threshold samples form groups, adjacent groups are
 *                      merged, short results are dropped
 *
 * The per-subject threshold is the antimode of a kernel density over log10
 * speeds, located between the two most prominent modes.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "gazeskill/density.hpp"
#include "gazeskill/duration_stats.hpp"
#include "gazeskill/error.hpp"
#include "gazeskill/types.hpp"

namespace gazeskill {

enum class Smoothing { None, Median3 };

struct DetectorConfig {
    double min_fixation_ms = 50.0;
    double max_interpolate_gap_ms = 100.0;
    double merge_gap_ms = 75.0;
    double merge_dist_px = 30.0;
    double fallback_velocity_px_per_s = 1500.0;
    Smoothing smoothing = Smoothing::Median3;
    /// When set, used instead of the per-subject estimate.
    std::optional<double> velocity_threshold_px_per_s;
};

inline void validate(const DetectorConfig& c) {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(c.min_fixation_ms) || !positive(c.max_interpolate_gap_ms) || !positive(c.merge_gap_ms))
        throw Error(Errc::InvalidConfig, "detector durations must be positive");
    if (!positive(c.merge_dist_px) || !positive(c.fallback_velocity_px_per_s))
        throw Error(Errc::InvalidConfig, "detector distances and velocities must be positive");
    if (c.velocity_threshold_px_per_s && !positive(*c.velocity_threshold_px_per_s))
        throw Error(Errc::InvalidConfig, "fixed velocity threshold must be positive");
}

inline constexpr std::size_t kMinVelocitySamples = 100;

/// A gap-resolved sample with its smoothed speed. x/y are the unsmoothed
/// (possibly interpolated) coordinates used for centroids.
struct ProcessedSample {
    double t_ms = 0.0;
    double x_px = 0.0;
    double y_px = 0.0;
    double speed_px_per_s = 0.0;
};

/// Output of the preprocessing stages: a sample, or the end of a segment.
struct PipelineEvent {
    bool segment_end = false;
    ProcessedSample sample;
};

/// Stages 1-3. Emits each sample once the samples it depends on have arrived.
class SamplePreprocessor {
public:
    explicit SamplePreprocessor(const DetectorConfig& config) : config_(config) {}

    void push(const GazeSample& s, std::vector<PipelineEvent>& out) {
        if (!s.valid) {
            if (last_valid_) pending_invalid_.push_back(s.t_ms);
            return;
        }
        if (last_valid_) {
            const double gap = s.t_ms - last_valid_->t_ms;
            if (gap > config_.max_interpolate_gap_ms) {
                end_segment(out);
            } else {
                for (double t : pending_invalid_) {
                    const double w = (t - last_valid_->t_ms) / gap;
                    resolved(Point{t, last_valid_->x_px + w * (s.x_px - last_valid_->x_px),
                                   last_valid_->y_px + w * (s.y_px - last_valid_->y_px)},
                             out);
                }
            }
        }
        pending_invalid_.clear();
        last_valid_ = s;
        resolved(Point{s.t_ms, s.x_px, s.y_px}, out);
    }

    void finish(std::vector<PipelineEvent>& out) {
        end_segment(out);
        last_valid_.reset();
    }

private:
    struct Point {
        double t, x, y;
    };
    struct Smoothed {
        double t, x, y, sx, sy;
    };

    void end_segment(std::vector<PipelineEvent>& out) {
        pending_invalid_.clear();
        if (raw_count_ > 0) smoothed(Smoothed{raw_[1].t, raw_[1].x, raw_[1].y, raw_[1].x, raw_[1].y}, out);
        if (sm_count_ > 0) {
            const Smoothed& cur = sm_[1];
            double speed = std::numeric_limits<double>::infinity();
            if (sm_count_ > 1) speed = speed_between(sm_[0], cur);
            out.push_back(PipelineEvent{false, ProcessedSample{cur.t, cur.x, cur.y, speed}});
        }
        if (raw_count_ > 0) out.push_back(PipelineEvent{true, {}});
        raw_count_ = 0;
        sm_count_ = 0;
    }

    // raw_[1] is the newest gap-resolved point, raw_[0] the one before it.
    void resolved(const Point& p, std::vector<PipelineEvent>& out) {
        if (raw_count_ > 0) {
            const Point& cur = raw_[1];
            double sx = cur.x, sy = cur.y;
            if (config_.smoothing == Smoothing::Median3 && raw_count_ > 1) {
                sx = median3(raw_[0].x, cur.x, p.x);
                sy = median3(raw_[0].y, cur.y, p.y);
            }
            smoothed(Smoothed{cur.t, cur.x, cur.y, sx, sy}, out);
        }
        raw_[0] = raw_[1];
        raw_[1] = p;
        ++raw_count_;
    }

    void smoothed(const Smoothed& p, std::vector<PipelineEvent>& out) {
        if (sm_count_ > 0) {
            const Smoothed& cur = sm_[1];
            const double speed = sm_count_ > 1 ? speed_between(sm_[0], p) : speed_between(cur, p);
            out.push_back(PipelineEvent{false, ProcessedSample{cur.t, cur.x, cur.y, speed}});
        }
        sm_[0] = sm_[1];
        sm_[1] = p;
        ++sm_count_;
    }

    static double speed_between(const Smoothed& a, const Smoothed& b) {
        return std::hypot(b.sx - a.sx, b.sy - a.sy) / (b.t - a.t) * 1000.0;
    }

    static double median3(double a, double b, double c) {
        return std::max(std::min(a, b), std::min(std::max(a, b), c));
    }

    DetectorConfig config_;
    std::optional<GazeSample> last_valid_;
    std::vector<double> pending_invalid_;
    Point raw_[2]{};
    std::size_t raw_count_ = 0;
    Smoothed sm_[2]{};
    std::size_t sm_count_ = 0;
};

/// Stage 4. Fixations come out in order, each as soon as no later sample can
/// change it.
class FixationAssembler {
public:
    explicit FixationAssembler(const DetectorConfig& config) : config_(config) {}

    void push(const ProcessedSample& s, double threshold_px_per_s, std::vector<Fixation>& out) {
        if (s.speed_px_per_s < threshold_px_per_s) {
            open_.push_back(s);
            return;
        }
        if (!open_.empty()) close_group(out);
        if (!pending_.empty() && s.t_ms - pending_.back().t_ms > config_.merge_gap_ms) finalize(out);
    }

    void end_segment(std::vector<Fixation>& out) {
        if (!open_.empty()) close_group(out);
        finalize(out);
    }

    /// True while samples are held that may still become (part of) a fixation.
    bool has_pending() const noexcept { return !open_.empty() || !pending_.empty(); }

private:
    static void centroid(std::span<const ProcessedSample> m, double& cx, double& cy) {
        cx = 0.0;
        cy = 0.0;
        for (const auto& s : m) {
            cx += s.x_px;
            cy += s.y_px;
        }
        cx /= static_cast<double>(m.size());
        cy /= static_cast<double>(m.size());
    }

    void close_group(std::vector<Fixation>& out) {
        if (!pending_.empty() && open_.front().t_ms - pending_.back().t_ms <= config_.merge_gap_ms) {
            double px, py, gx, gy;
            centroid(pending_, px, py);
            centroid(open_, gx, gy);
            if (std::hypot(gx - px, gy - py) <= config_.merge_dist_px) {
                pending_.insert(pending_.end(), open_.begin(), open_.end());
                open_.clear();
                return;
            }
        }
        finalize(out);
        pending_.swap(open_);
        open_.clear();
    }

    void finalize(std::vector<Fixation>& out) {
        if (pending_.empty()) return;
        Fixation f;
        f.onset_ms = pending_.front().t_ms;
        f.offset_ms = pending_.back().t_ms;
        f.duration_ms = f.offset_ms - f.onset_ms;
        f.n_samples = pending_.size();
        centroid(pending_, f.cx_px, f.cy_px);
        double ss = 0.0;
        for (const auto& s : pending_) {
            const double dx = s.x_px - f.cx_px, dy = s.y_px - f.cy_px;
            ss += dx * dx + dy * dy;
        }
        f.dispersion_px = std::sqrt(ss / static_cast<double>(pending_.size()));
        pending_.clear();
        if (f.n_samples >= 2 && f.duration_ms >= config_.min_fixation_ms) out.push_back(f);
    }

    DetectorConfig config_;
    std::vector<ProcessedSample> open_;
    std::vector<ProcessedSample> pending_;
};

/// Runs stages 1-3 over a whole recording.
inline std::vector<PipelineEvent> preprocess(const GazeRecording& recording, const DetectorConfig& config = {}) {
    SamplePreprocessor pre(config);
    std::vector<PipelineEvent> events;
    events.reserve(recording.samples.size() + 8);
    for (const auto& s : recording.samples) pre.push(s, events);
    pre.finish(events);
    return events;
}

inline std::vector<double> finite_speeds(std::span<const PipelineEvent> events) {
    std::vector<double> v;
    v.reserve(events.size());
    for (const auto& e : events)
        if (!e.segment_end && std::isfinite(e.sample.speed_px_per_s)) v.push_back(e.sample.speed_px_per_s);
    return v;
}

namespace detail {

inline constexpr std::size_t kLogSpeedGrid = 512;
inline constexpr double kLogSpeedMinProminence = 0.01;
inline constexpr double kValleyTolerance = 0.02;

/// Linearly binned Gaussian KDE of `values` on an even grid.
inline void binned_kde(std::span<const double> values, double lo, double hi, double bandwidth,
                       std::vector<double>& grid, std::vector<double>& density) {
    const std::size_t m = kLogSpeedGrid;
    const double step = (hi - lo) / static_cast<double>(m - 1);
    std::vector<double> weight(m, 0.0);
    for (double v : values) {
        const double pos = (v - lo) / step;
        const auto i = std::min(static_cast<std::size_t>(pos), m - 2);
        const double frac = pos - static_cast<double>(i);
        weight[i] += 1.0 - frac;
        weight[i + 1] += frac;
    }
    grid.resize(m);
    density.assign(m, 0.0);
    std::vector<double> kernel(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double u = static_cast<double>(k) * step / bandwidth;
        kernel[k] = std::exp(-0.5 * u * u);
    }
    for (std::size_t g = 0; g < m; ++g) {
        grid[g] = lo + static_cast<double>(g) * step;
        double sum = 0.0;
        for (std::size_t i = 0; i < m; ++i) sum += weight[i] * kernel[g > i ? g - i : i - g];
        density[g] = sum;
    }
}

}  // namespace detail

/// Per-subject velocity threshold from a sample of speeds. Returns `fallback`
/// when the log-speed density has fewer than two modes.
inline double estimate_velocity_threshold_from_speeds(std::span<const double> speeds, double fallback) {
    std::size_t usable = 0;
    std::vector<double> logs;
    logs.reserve(speeds.size());
    for (double v : speeds) {
        if (!std::isfinite(v)) continue;
        ++usable;
        // Median smoothing makes some central differences exactly zero; they
        // say nothing about the saccade/fixation split.
        if (v > 0.0) logs.push_back(std::log10(v));
    }
    if (usable < kMinVelocitySamples)
        throw Error(Errc::InsufficientData, "need at least 100 velocity estimates, got " + std::to_string(usable));
    if (logs.size() < 2) return fallback;
    std::sort(logs.begin(), logs.end());
    if (logs.front() == logs.back()) return fallback;

    double h = 0.0;
    try {
        h = silverman_bandwidth(logs);
    } catch (const Error&) {
        return fallback;
    }
    std::vector<double> grid, density;
    detail::binned_kde(logs, logs.front() - 3.0 * h, logs.back() + 3.0 * h, h, grid, density);

    auto peaks = detail::find_peaks(density);
    const double global_max = *std::max_element(density.begin(), density.end());
    std::erase_if(peaks, [&](const detail::Peak& p) { return p.prominence < detail::kLogSpeedMinProminence * global_max; });
    if (peaks.size() < 2) return fallback;
    std::partial_sort(peaks.begin(), peaks.begin() + 2, peaks.end(),
                      [](const detail::Peak& a, const detail::Peak& b) { return a.prominence > b.prominence; });
    const std::size_t lo = std::min(peaks[0].index, peaks[1].index);
    const std::size_t hi = std::max(peaks[0].index, peaks[1].index);
    std::size_t arg = lo;
    for (std::size_t i = lo; i <= hi; ++i)
        if (density[i] < density[arg]) arg = i;
    // Flat valleys: the exact minimum wanders. Take the slowest point that is
    // within a small fraction of the valley depth of it.
    const double floor = density[arg] + detail::kValleyTolerance * (density[lo] - density[arg]);
    for (std::size_t i = lo; i <= arg; ++i)
        if (density[i] <= floor) {
            arg = i;
            break;
        }
    return std::pow(10.0, grid[arg]);
}

inline double estimate_velocity_threshold(const GazeRecording& recording, const DetectorConfig& config = {}) {
    validate(config);
    const auto events = preprocess(recording, config);
    return estimate_velocity_threshold_from_speeds(finite_speeds(events), config.fallback_velocity_px_per_s);
}

struct DetectionResult {
    std::vector<Fixation> fixations;
    double velocity_threshold_px_per_s = 0.0;
};

inline DetectionResult detect_fixations_ex(const GazeRecording& recording, const DetectorConfig& config = {}) {
    validate(config);
    if (recording.samples.empty()) throw Error(Errc::EmptyRecording, "recording has no samples");
    validate(recording);
    const auto events = preprocess(recording, config);
    DetectionResult result;
    result.velocity_threshold_px_per_s =
        config.velocity_threshold_px_per_s
            ? *config.velocity_threshold_px_per_s
            : estimate_velocity_threshold_from_speeds(finite_speeds(events), config.fallback_velocity_px_per_s);
    FixationAssembler assembler(config);
    for (const auto& e : events) {
        if (e.segment_end)
            assembler.end_segment(result.fixations);
        else
            assembler.push(e.sample, result.velocity_threshold_px_per_s, result.fixations);
    }
    assembler.end_segment(result.fixations);
    return result;
}

inline std::vector<Fixation> detect_fixations(const GazeRecording& recording, const DetectorConfig& config = {}) {
    return detect_fixations_ex(recording, config).fixations;
}

}  // namespace gazeskill
