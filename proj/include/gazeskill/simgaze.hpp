/**
 * @file simgaze.hpp
 * @brief Synthetic gaze sessions with planted fixations, used as ground truth
 * for every stage of the pipeline.
 *
 * A session alternates fixations and saccades. Fixation durations are drawn
 * from a mixture of (optionally shifted) lognormal components; gaze during a
 * fixation is the fixation center plus isotropic Gaussian jitter. Saccades
 * follow a minimum-jerk path between centers.
 *
 * Seeds: the timeline (durations, saccades, centers) and the per-sample noise
 * come from two engines derived from the profile seed, so the same seed gives
 * the same planted fixations at any sampling rate. Cohort subject seeds are
 * derive_seed(master, group_index, subject_index).
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gazeskill/error.hpp"
#include "gazeskill/types.hpp"

namespace gazeskill {

struct DurationComponent {
    double weight = 1.0;
    std::string family = "lognormal";
    double median_ms = 250.0;
    double sigma = 0.4;
    double shift_ms = 0.0;
};

struct SimProfile {
    std::string name = "custom";
    std::optional<SkillLevel> skill;
    std::vector<DurationComponent> duration_mixture;
    double jitter_sd_px = 5.0;
    double saccade_min_ms = 30.0;
    double saccade_max_ms = 60.0;
    double amplitude_min_px = 100.0;
    double amplitude_max_px = 400.0;
    double rate_hz = 120.0;
    double session_s = 600.0;
    std::uint64_t seed = 1;
    int screen_w_px = 1920;
    int screen_h_px = 1080;
    double dropout_prob = 0.0;
    /// Between-subject variation applied by individualize(): log-sd of a
    /// multiplier on all durations, and log-sd of per-component weight noise.
    double subject_scale_sd = 0.0;
    double subject_weight_sd = 0.0;
};

struct PlantedFixation {
    double onset_ms = 0.0;
    double offset_ms = 0.0;  // exclusive end of the planted interval
    double cx_px = 0.0;
    double cy_px = 0.0;
    /// Timestamps of the first and last emitted samples inside
    /// [onset_ms, offset_ms); NaN when the interval holds no sample.
    double first_sample_ms = std::numeric_limits<double>::quiet_NaN();
    double last_sample_ms = std::numeric_limits<double>::quiet_NaN();

    double duration_ms() const noexcept { return offset_ms - onset_ms; }
};

struct GroundTruth {
    std::vector<PlantedFixation> fixations;
};

struct SimSession {
    GazeRecording recording;
    GroundTruth truth;
};

inline void validate(const SimProfile& p) {
    auto fail = [](const std::string& why) { throw Error(Errc::InvalidProfile, why); };
    if (p.duration_mixture.empty()) fail("duration mixture is empty");
    double total = 0.0;
    for (const auto& c : p.duration_mixture) {
        if (c.family != "lognormal") fail("unsupported duration family '" + c.family + "'");
        if (!(c.weight > 0.0)) fail("mixture weights must be positive");
        if (!(c.median_ms > 0.0) || !(c.sigma >= 0.0) || !(c.shift_ms >= 0.0)) fail("bad lognormal parameters");
        total += c.weight;
    }
    if (std::fabs(total - 1.0) > 1e-9) fail("mixture weights must sum to 1");
    if (!(p.jitter_sd_px >= 0.0)) fail("jitter must be non-negative");
    if (!(p.saccade_min_ms > 0.0) || !(p.saccade_max_ms >= p.saccade_min_ms)) fail("bad saccade duration range");
    if (!(p.amplitude_min_px > 0.0) || !(p.amplitude_max_px >= p.amplitude_min_px)) fail("bad saccade amplitude range");
    if (!(p.rate_hz > 0.0) || !(p.session_s > 0.0)) fail("rate and session length must be positive");
    if (p.screen_w_px <= 0 || p.screen_h_px <= 0) fail("screen must be positive");
    if (p.amplitude_max_px >= 0.9 * std::min(p.screen_w_px, p.screen_h_px)) fail("saccade amplitude exceeds screen");
    if (!(p.dropout_prob >= 0.0) || !(p.dropout_prob < 1.0)) fail("dropout probability must be in [0, 1)");
    if (!(p.subject_scale_sd >= 0.0) || !(p.subject_weight_sd >= 0.0)) fail("subject variation must be non-negative");
}

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t group, std::uint64_t subject) noexcept {
    return mix64(mix64(mix64(master) ^ group) ^ subject);
}

namespace detail {

inline double minimum_jerk(double tau) noexcept {
    const double t3 = tau * tau * tau;
    return t3 * (10.0 - 15.0 * tau + 6.0 * tau * tau);
}

/// Moves by `delta`, or by `-delta` when that would leave [lo, hi].
inline double step_within(double v, double delta, double lo, double hi) noexcept {
    const double fwd = v + delta;
    if (fwd >= lo && fwd <= hi) return fwd;
    return std::clamp(v - delta, lo, hi);
}

}  // namespace detail

/// Draws one fixation duration from the profile's mixture.
template <class Engine>
double draw_duration(const SimProfile& p, Engine& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double u = unit(rng);
    const double z = normal(rng);
    double acc = 0.0;
    const DurationComponent* comp = &p.duration_mixture.back();
    for (const auto& c : p.duration_mixture) {
        acc += c.weight;
        if (u < acc) {
            comp = &c;
            break;
        }
    }
    return comp->shift_ms + comp->median_ms * std::exp(comp->sigma * z);
}

inline SimSession gen_session(const SimProfile& p, std::string subject_id = {}) {
    validate(p);
    std::mt19937_64 timeline(mix64(p.seed ^ 0x7469'6D65'6C69'6E65ull));
    std::mt19937_64 noise(mix64(p.seed ^ 0x6E6F'6973'6531'3233ull));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    const double x_lo = 0.05 * p.screen_w_px, x_hi = 0.95 * p.screen_w_px;
    const double y_lo = 0.05 * p.screen_h_px, y_hi = 0.95 * p.screen_h_px;

    struct Event {
        double start, end;
        double x0, y0, x1, y1;  // saccade endpoints; fixations use x0/y0
        bool fixation;
    };
    std::vector<Event> events;
    SimSession session;

    const double session_ms = p.session_s * 1000.0;
    double cx = x_lo + unit(timeline) * (x_hi - x_lo);
    double cy = y_lo + unit(timeline) * (y_hi - y_lo);
    double t = 0.0;
    while (t < session_ms) {
        const double d = draw_duration(p, timeline);
        if (!events.empty() && t + d > session_ms) break;
        events.push_back(Event{t, t + d, cx, cy, cx, cy, true});
        session.truth.fixations.push_back(PlantedFixation{t, t + d, cx, cy});
        t += d;
        const double sac = p.saccade_min_ms + unit(timeline) * (p.saccade_max_ms - p.saccade_min_ms);
        const double amp = p.amplitude_min_px + unit(timeline) * (p.amplitude_max_px - p.amplitude_min_px);
        const double angle = unit(timeline) * 2.0 * 3.141592653589793;
        const double nx = detail::step_within(cx, amp * std::cos(angle), x_lo, x_hi);
        const double ny = detail::step_within(cy, amp * std::sin(angle), y_lo, y_hi);
        events.push_back(Event{t, t + sac, cx, cy, nx, ny, false});
        cx = nx;
        cy = ny;
        t += sac;
    }
    events.pop_back();  // trailing saccade
    const double end_ms = events.back().end;

    GazeRecording& rec = session.recording;
    rec.subject_id = std::move(subject_id);
    rec.skill_label = p.skill;
    rec.nominal_rate_hz = p.rate_hz;
    rec.screen_w_px = p.screen_w_px;
    rec.screen_h_px = p.screen_h_px;
    const double period = 1000.0 / p.rate_hz;
    rec.samples.reserve(static_cast<std::size_t>(end_ms / period) + 1);
    std::size_t ev = 0;
    for (std::size_t k = 0;; ++k) {
        const double tk = static_cast<double>(k) * period;
        if (!(tk < end_ms)) break;
        while (events[ev].end <= tk) ++ev;
        const Event& e = events[ev];
        if (e.fixation) {
            auto& planted = session.truth.fixations[ev / 2];
            if (std::isnan(planted.first_sample_ms)) planted.first_sample_ms = tk;
            planted.last_sample_ms = tk;
        }
        double x = e.x0, y = e.y0;
        if (!e.fixation) {
            const double s = detail::minimum_jerk((tk - e.start) / (e.end - e.start));
            x = e.x0 + s * (e.x1 - e.x0);
            y = e.y0 + s * (e.y1 - e.y0);
        }
        x += p.jitter_sd_px * normal(noise);
        y += p.jitter_sd_px * normal(noise);
        const bool dropped = p.dropout_prob > 0.0 && unit(noise) < p.dropout_prob;
        if (dropped)
            rec.samples.push_back(GazeSample{tk, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), false});
        else
            rec.samples.push_back(GazeSample{tk, x, y, true});
    }
    return session;
}

/// A per-subject variant of a group profile: all durations scaled by a common
/// lognormal factor, mixture weights jittered and renormalized.
inline SimProfile individualize(const SimProfile& group, std::uint64_t subject_seed) {
    SimProfile p = group;
    p.seed = subject_seed;
    p.subject_scale_sd = 0.0;
    p.subject_weight_sd = 0.0;
    std::mt19937_64 rng(mix64(subject_seed ^ 0x7375'626A'6563'7421ull));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = std::exp(group.subject_scale_sd * normal(rng));
    double total = 0.0;
    for (auto& c : p.duration_mixture) {
        c.median_ms *= scale;
        c.shift_ms *= scale;
        c.weight *= std::exp(group.subject_weight_sd * normal(rng));
        total += c.weight;
    }
    for (auto& c : p.duration_mixture) c.weight /= total;
    return p;
}

struct CohortGroup {
    SimProfile profile;
    std::size_t n_subjects = 0;
};

struct LabeledSession {
    std::size_t group_index = 0;
    std::optional<SkillLevel> skill;
    SimProfile profile;  // individualized
    SimSession session;
};

/// Subjects in group order. Each session is generated from an individualized
/// copy of its group profile seeded with derive_seed(master, g, s).
inline std::vector<LabeledSession> gen_cohort(const std::vector<CohortGroup>& groups, std::uint64_t master_seed) {
    for (const auto& g : groups) validate(g.profile);
    std::vector<LabeledSession> out;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (std::size_t s = 0; s < groups[g].n_subjects; ++s) {
            LabeledSession ls;
            ls.group_index = g;
            ls.skill = groups[g].profile.skill;
            ls.profile = individualize(groups[g].profile, derive_seed(master_seed, g, s));
            ls.session = gen_session(ls.profile, groups[g].profile.name + "-" + std::to_string(s + 1));
            out.push_back(std::move(ls));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Profile JSON
//
// {
//   "name": "pro", "skill": "pro",
//   "duration_mixture": [{"weight": 0.3, "family": "lognormal",
//                         "median_ms": 100, "sigma": 0.25, "shift_ms": 0}, ...],
//   "jitter_sd_px": 5, "saccade_ms": [30, 60], "amplitude_px": [100, 400],
//   "rate_hz": 120, "session_s": 600, "seed": 1, "screen": [1920, 1080],
//   "dropout_prob": 0, "subject_scale_sd": 0.2, "subject_weight_sd": 0.2
// }
//
// Every key except duration_mixture is optional.
// ---------------------------------------------------------------------------

inline nlohmann::json profile_to_json(const SimProfile& p) {
    nlohmann::json mix = nlohmann::json::array();
    for (const auto& c : p.duration_mixture)
        mix.push_back({{"weight", c.weight}, {"family", c.family}, {"median_ms", c.median_ms}, {"sigma", c.sigma}, {"shift_ms", c.shift_ms}});
    nlohmann::json j = {{"name", p.name},
                        {"duration_mixture", mix},
                        {"jitter_sd_px", p.jitter_sd_px},
                        {"saccade_ms", {p.saccade_min_ms, p.saccade_max_ms}},
                        {"amplitude_px", {p.amplitude_min_px, p.amplitude_max_px}},
                        {"rate_hz", p.rate_hz},
                        {"session_s", p.session_s},
                        {"seed", p.seed},
                        {"screen", {p.screen_w_px, p.screen_h_px}},
                        {"dropout_prob", p.dropout_prob},
                        {"subject_scale_sd", p.subject_scale_sd},
                        {"subject_weight_sd", p.subject_weight_sd}};
    j["skill"] = p.skill ? nlohmann::json(std::string(to_string(*p.skill))) : nlohmann::json(nullptr);
    return j;
}

inline SimProfile profile_from_json(const nlohmann::json& j) {
    SimProfile p;
    try {
        p.name = j.value("name", p.name);
        if (j.contains("skill") && !j.at("skill").is_null()) {
            p.skill = parse_skill(j.at("skill").get<std::string>());
            if (!p.skill) throw Error(Errc::InvalidProfile, "unknown skill label");
        }
        for (const auto& c : j.at("duration_mixture")) {
            DurationComponent dc;
            dc.weight = c.at("weight").get<double>();
            dc.family = c.value("family", dc.family);
            dc.median_ms = c.at("median_ms").get<double>();
            dc.sigma = c.at("sigma").get<double>();
            dc.shift_ms = c.value("shift_ms", 0.0);
            p.duration_mixture.push_back(dc);
        }
        p.jitter_sd_px = j.value("jitter_sd_px", p.jitter_sd_px);
        if (j.contains("saccade_ms")) {
            p.saccade_min_ms = j.at("saccade_ms").at(0).get<double>();
            p.saccade_max_ms = j.at("saccade_ms").at(1).get<double>();
        }
        if (j.contains("amplitude_px")) {
            p.amplitude_min_px = j.at("amplitude_px").at(0).get<double>();
            p.amplitude_max_px = j.at("amplitude_px").at(1).get<double>();
        }
        p.rate_hz = j.value("rate_hz", p.rate_hz);
        p.session_s = j.value("session_s", p.session_s);
        p.seed = j.value("seed", p.seed);
        if (j.contains("screen")) {
            p.screen_w_px = j.at("screen").at(0).get<int>();
            p.screen_h_px = j.at("screen").at(1).get<int>();
        }
        p.dropout_prob = j.value("dropout_prob", p.dropout_prob);
        p.subject_scale_sd = j.value("subject_scale_sd", p.subject_scale_sd);
        p.subject_weight_sd = j.value("subject_weight_sd", p.subject_weight_sd);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidProfile, e.what());
    }
    validate(p);
    return p;
}

/// The calibrated group profiles `low`, `high` and `pro`.
inline SimProfile builtin_profile(std::string_view name) {
    SimProfile p;
    p.name = std::string(name);
    if (name == "low") {
        p.skill = SkillLevel::Low;
        p.duration_mixture = {{1.0, "lognormal", 125.0, 0.4, 105.0}};
        p.subject_scale_sd = 0.15;
        p.subject_weight_sd = 0.0;
    } else if (name == "high") {
        p.skill = SkillLevel::High;
        p.duration_mixture = {{0.22, "lognormal", 100.0, 0.25, 0.0},
                              {0.63, "lognormal", 242.0, 0.3, 0.0},
                              {0.15, "lognormal", 480.0, 0.45, 0.0}};
        p.subject_scale_sd = 0.15;
        p.subject_weight_sd = 0.2;
    } else if (name == "pro") {
        p.skill = SkillLevel::Pro;
        p.duration_mixture = {{0.44, "lognormal", 100.0, 0.25, 0.0},
                              {0.43, "lognormal", 315.0, 0.2, 0.0},
                              {0.13, "lognormal", 470.0, 0.45, 0.0}};
        p.subject_scale_sd = 0.1;
        p.subject_weight_sd = 0.2;
    } else {
        throw Error(Errc::InvalidProfile, "unknown built-in profile '" + std::string(name) + "'");
    }
    validate(p);
    return p;
}

}  // namespace gazeskill
