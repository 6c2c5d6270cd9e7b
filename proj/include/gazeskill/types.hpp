/**
 * @file types.hpp
 * @brief Domain value types: gaze samples, recordings, fixations, skill labels.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gazeskill/error.hpp"

namespace gazeskill {

inline constexpr double kDefaultRateHz = 30.0;

enum class SkillLevel { Low = 0, High = 1, Pro = 2 };

inline constexpr SkillLevel kAllSkillLevels[] = {SkillLevel::Low, SkillLevel::High, SkillLevel::Pro};

constexpr std::string_view to_string(SkillLevel s) noexcept {
    switch (s) {
    case SkillLevel::Low: return "low";
    case SkillLevel::High: return "high";
    case SkillLevel::Pro: return "pro";
    }
    return "low";
}

inline std::optional<SkillLevel> parse_skill(std::string_view s) noexcept {
    if (s == "low") return SkillLevel::Low;
    if (s == "high") return SkillLevel::High;
    if (s == "pro") return SkillLevel::Pro;
    return std::nullopt;
}

/// NaN-aware equality: two NaNs compare equal. Used for placeholder coordinates.
inline bool same_value(double a, double b) noexcept {
    return (std::isnan(a) && std::isnan(b)) || a == b;
}

struct GazeSample {
    double t_ms = 0.0;
    double x_px = 0.0;
    double y_px = 0.0;
    bool valid = true;

    friend bool operator==(const GazeSample& a, const GazeSample& b) noexcept {
        return a.valid == b.valid && same_value(a.t_ms, b.t_ms) && same_value(a.x_px, b.x_px) &&
               same_value(a.y_px, b.y_px);
    }
};

struct GazeRecording {
    std::string subject_id;
    std::optional<SkillLevel> skill_label;
    double nominal_rate_hz = kDefaultRateHz;
    int screen_w_px = 1920;
    int screen_h_px = 1080;
    std::vector<GazeSample> samples;
    /// Unknown `#key=value` metadata, preserved in file order.
    std::vector<std::pair<std::string, std::string>> extra_metadata;

    friend bool operator==(const GazeRecording&, const GazeRecording&) = default;
};

/// Throws InvalidRecording when a recording breaks its invariants.
inline void validate(const GazeRecording& r) {
    if (!(r.nominal_rate_hz > 0.0) || !std::isfinite(r.nominal_rate_hz))
        throw Error(Errc::InvalidRecording, "nominal_rate_hz must be positive");
    if (r.screen_w_px <= 0 || r.screen_h_px <= 0)
        throw Error(Errc::InvalidRecording, "screen dimensions must be positive");
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
        const auto& s = r.samples[i];
        if (!std::isfinite(s.t_ms) || s.t_ms < 0.0)
            throw Error(Errc::InvalidRecording, "sample " + std::to_string(i) + " has invalid timestamp");
        if (s.valid && (!std::isfinite(s.x_px) || !std::isfinite(s.y_px)))
            throw Error(Errc::InvalidRecording, "valid sample " + std::to_string(i) + " has non-finite position");
        if (i > 0 && !(s.t_ms > r.samples[i - 1].t_ms))
            throw Error(Errc::InvalidRecording, "timestamps not strictly increasing at sample " + std::to_string(i));
    }
}

/// A stable-gaze event. Onset and offset are the timestamps of the first and
/// last member samples.
struct Fixation {
    double onset_ms = 0.0;
    double offset_ms = 0.0;
    double duration_ms = 0.0;
    double cx_px = 0.0;
    double cy_px = 0.0;
    double dispersion_px = 0.0;
    std::size_t n_samples = 0;

    friend bool operator==(const Fixation&, const Fixation&) = default;
};

/// One subject's fixation durations, sorted ascending.
struct DurationDistribution {
    std::string subject_id;
    std::vector<double> durations_ms;

    std::size_t size() const noexcept { return durations_ms.size(); }
    bool empty() const noexcept { return durations_ms.empty(); }

    /// Sorts and checks positivity.
    static DurationDistribution from_unsorted(std::string subject_id, std::vector<double> durations) {
        for (double d : durations)
            if (!(d > 0.0) || !std::isfinite(d))
                throw Error(Errc::InvalidArgument, "durations must be positive and finite");
        std::stable_sort(durations.begin(), durations.end());
        return DurationDistribution{std::move(subject_id), std::move(durations)};
    }
};

inline DurationDistribution durations_of(const std::vector<Fixation>& fixations, std::string subject_id = {}) {
    std::vector<double> d;
    d.reserve(fixations.size());
    for (const auto& f : fixations) d.push_back(f.duration_ms);
    return DurationDistribution::from_unsorted(std::move(subject_id), std::move(d));
}

}  // namespace gazeskill
