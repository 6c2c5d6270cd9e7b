/**
 * @file stream_service.hpp
 * @brief Live per-session fixation detection and the line-delimited JSON
 * protocol served over TCP.
 *
 * Client messages, one JSON object per line:
 *
 *     {"type":"start","session_id":"s1","rate_hz":30}
 *     {"type":"sample","t_ms":0,"x_px":100,"y_px":200,"valid":true}
 *     {"type":"query"}
 *     {"type":"end"}
 *
 * `query` is answered with an `estimate` line, `end` with a `report` line.
 * Protocol errors are answered with `{"type":"error","code":...}`; only
 * unparseable input closes the connection.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gazeskill/error.hpp"
#include "gazeskill/fixation_detect.hpp"
#include "gazeskill/report.hpp"
#include "gazeskill/skill_inference.hpp"
#include "gazeskill/types.hpp"

namespace gazeskill {

struct StreamConfig {
    DetectorConfig detector{};
    AnalysisConfig analysis{};
    /// Re-estimate the velocity threshold from all speeds seen so far every
    /// `reestimate_interval_ms` of data. The starting threshold, and the only
    /// one when this is off, is `detector.velocity_threshold_px_per_s` or
    /// else the fallback.
    bool reestimate = true;
    double reestimate_interval_ms = 30000.0;
    /// Features cover finalized fixations whose onset lies within this many
    /// ms of the newest sample. Unset means the whole session.
    std::optional<double> window_ms;
};

inline void validate(const StreamConfig& c) {
    validate(c.detector);
    validate(c.analysis.bands);
    if (!(c.reestimate_interval_ms > 0.0)) throw Error(Errc::InvalidConfig, "re-estimation interval must be positive");
    if (c.window_ms && !(*c.window_ms > 0.0)) throw Error(Errc::InvalidConfig, "feature window must be positive");
}

struct ThresholdChange {
    double t_ms = 0.0;
    double threshold_px_per_s = 0.0;
};

inline nlohmann::json fixation_to_json(const Fixation& f) {
    return {{"onset_ms", f.onset_ms}, {"offset_ms", f.offset_ms}, {"duration_ms", f.duration_ms}, {"cx_px", f.cx_px},
            {"cy_px", f.cy_px},       {"dispersion_px", f.dispersion_px}, {"n_samples", f.n_samples}};
}

inline bool same_fixation(const Fixation& a, const Fixation& b, double tol = 1e-9) {
    auto close = [tol](double x, double y) { return std::fabs(x - y) <= tol * std::max(1.0, std::max(std::fabs(x), std::fabs(y))); };
    return a.n_samples == b.n_samples && close(a.onset_ms, b.onset_ms) && close(a.offset_ms, b.offset_ms) &&
           close(a.duration_ms, b.duration_ms) && close(a.cx_px, b.cx_px) && close(a.cy_px, b.cy_px) &&
           close(a.dispersion_px, b.dispersion_px);
}

/// State of one live session. Finalized fixations are never revised; a
/// threshold change only affects samples that reach the assembler afterwards.
class StreamSession {
public:
    StreamSession(std::string session_id, double rate_hz, StreamConfig config, std::shared_ptr<const SkillModel> model = {})
        : id_(std::move(session_id)), config_(std::move(config)), model_(std::move(model)), pre_(config_.detector),
          assembler_(config_.detector) {
        validate(config_);
        if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) throw Error(Errc::InvalidConfig, "rate_hz must be positive");
        recording_.subject_id = id_;
        recording_.nominal_rate_hz = rate_hz;
        threshold_ = config_.detector.velocity_threshold_px_per_s.value_or(config_.detector.fallback_velocity_px_per_s);
        history_.push_back(ThresholdChange{0.0, threshold_});
    }

    const std::string& id() const noexcept { return id_; }
    const std::vector<Fixation>& fixations() const noexcept { return fixations_; }
    const std::vector<ThresholdChange>& threshold_history() const noexcept { return history_; }
    const GazeRecording& recording() const noexcept { return recording_; }
    double threshold() const noexcept { return threshold_; }

    void push(const GazeSample& s) {
        if (finished_) throw Error(Errc::InvalidArgument, "session already ended");
        if (!std::isfinite(s.t_ms) || s.t_ms < 0.0) throw Error(Errc::MalformedRow, "t_ms must be finite and non-negative");
        if (s.valid && (!std::isfinite(s.x_px) || !std::isfinite(s.y_px)))
            throw Error(Errc::MalformedRow, "valid samples need finite coordinates");
        if (!recording_.samples.empty() && !(s.t_ms > recording_.samples.back().t_ms))
            throw Error(Errc::NonMonotoneTimestamp, "timestamp does not increase");
        GazeSample stored = s;
        if (!stored.valid) stored.x_px = stored.y_px = std::numeric_limits<double>::quiet_NaN();
        recording_.samples.push_back(stored);
        if (recording_.samples.size() == 1) next_estimate_ms_ = s.t_ms + config_.reestimate_interval_ms;

        events_.clear();
        pre_.push(stored, events_);
        consume();
        if (config_.reestimate && s.t_ms >= next_estimate_ms_) {
            while (next_estimate_ms_ <= s.t_ms) next_estimate_ms_ += config_.reestimate_interval_ms;
            if (speeds_.size() >= kMinVelocitySamples) {
                threshold_ = estimate_velocity_threshold_from_speeds(speeds_, config_.detector.fallback_velocity_px_per_s);
                history_.push_back(ThresholdChange{s.t_ms, threshold_});
            }
        }
    }

    /// Flushes held samples; every remaining candidate fixation is finalized.
    void finish() {
        if (finished_) return;
        finished_ = true;
        events_.clear();
        pre_.finish(events_);
        consume();
        assembler_.end_segment(fixations_);
    }

    /// Durations of the finalized fixations inside the feature window.
    DurationDistribution window_distribution() const {
        std::vector<double> d;
        const double newest = recording_.samples.empty() ? 0.0 : recording_.samples.back().t_ms;
        for (const auto& f : fixations_)
            if (!config_.window_ms || f.onset_ms >= newest - *config_.window_ms) d.push_back(f.duration_ms);
        return DurationDistribution::from_unsorted(id_, std::move(d));
    }

    nlohmann::json estimate() const {
        const auto dist = window_distribution();
        nlohmann::json j = {{"type", "estimate"}, {"session_id", id_}, {"n_fixations", dist.size()}};
        if (dist.size() < kMinFixationsForFeatures) {
            j["features"] = nullptr;
            j["skill"] = nullptr;
            j["scores"] = nullptr;
            j["reason"] = "too_few_fixations";
            return j;
        }
        const auto features = extract_features(
            dist, FeatureConfig{kDefaultBandwidthMs, config_.analysis.min_prominence_frac, config_.analysis.tail_threshold_ms});
        j["features"] = features_to_json(features);
        if (!model_) {
            j["skill"] = nullptr;
            j["scores"] = nullptr;
            j["reason"] = "no_model";
            return j;
        }
        const auto est = classify(features, *model_);
        nlohmann::json scores = nlohmann::json::object();
        for (const auto& [c, v] : est.scores) scores[std::string(to_string(c))] = v;
        j["skill"] = std::string(to_string(est.label));
        j["scores"] = scores;
        return j;
    }

    /// Final report. `analysis` is computed from the streamed fixations;
    /// `reanalysis` from batch detection over all received samples.
    /// Streamed fixations without an exact batch counterpart are `flagged`,
    /// batch fixations without a streamed counterpart are `unmatched_batch`.
    nlohmann::json report() {
        finish();
        SessionAnalysis live = analyze_session(durations_of(fixations_, id_), config_.analysis, model_.get());
        live.source = id_;
        nlohmann::json j = {{"type", "report"}, {"session_id", id_}, {"n_samples", recording_.samples.size()}};
        j["reestimation"] = config_.reestimate;
        nlohmann::json hist = nlohmann::json::array();
        for (const auto& h : history_) hist.push_back({{"t_ms", h.t_ms}, {"threshold_px_per_s", h.threshold_px_per_s}});
        j["threshold_history"] = hist;
        j["n_fixations"] = fixations_.size();
        j["analysis"] = to_json(live);

        nlohmann::json flagged = nlohmann::json::array(), unmatched = nlohmann::json::array();
        const auto batch = batch_detection();
        if (!batch) {
            j["reanalysis"] = nullptr;
            for (const auto& f : fixations_) flagged.push_back(fixation_to_json(f));
        } else {
            SessionAnalysis re = analyze_session(durations_of(batch->fixations, id_), config_.analysis, model_.get());
            re.source = id_;
            j["reanalysis"] = to_json(re);
            j["reanalysis"]["velocity_threshold_px_per_s"] = batch->velocity_threshold_px_per_s;
            std::vector<bool> used(batch->fixations.size(), false);
            std::size_t k = 0;
            for (const auto& f : fixations_) {
                while (k < batch->fixations.size() && batch->fixations[k].onset_ms < f.onset_ms - 1e-6) ++k;
                bool found = false;
                for (std::size_t m = k; m < batch->fixations.size() && batch->fixations[m].onset_ms <= f.onset_ms + 1e-6; ++m) {
                    if (!used[m] && same_fixation(f, batch->fixations[m])) {
                        used[m] = found = true;
                        break;
                    }
                }
                if (!found) flagged.push_back(fixation_to_json(f));
            }
            for (std::size_t m = 0; m < used.size(); ++m)
                if (!used[m]) unmatched.push_back(fixation_to_json(batch->fixations[m]));
        }
        j["flagged"] = flagged;
        j["unmatched_batch"] = unmatched;
        return j;
    }

private:
    void consume() {
        for (const auto& e : events_) {
            if (e.segment_end) {
                assembler_.end_segment(fixations_);
                continue;
            }
            if (std::isfinite(e.sample.speed_px_per_s)) speeds_.push_back(e.sample.speed_px_per_s);
            assembler_.push(e.sample, threshold_, fixations_);
        }
    }

    std::optional<DetectionResult> batch_detection() const {
        bool any_valid = false;
        for (const auto& s : recording_.samples) any_valid = any_valid || s.valid;
        if (!any_valid) return std::nullopt;
        DetectorConfig cfg = config_.detector;
        if (config_.reestimate)
            cfg.velocity_threshold_px_per_s.reset();
        else
            cfg.velocity_threshold_px_per_s = threshold_;
        try {
            return detect_fixations_ex(recording_, cfg);
        } catch (const Error& e) {
            if (e.code() != Errc::InsufficientData) throw;
            cfg.velocity_threshold_px_per_s = cfg.fallback_velocity_px_per_s;
            return detect_fixations_ex(recording_, cfg);
        }
    }

    std::string id_;
    StreamConfig config_;
    std::shared_ptr<const SkillModel> model_;
    GazeRecording recording_;
    SamplePreprocessor pre_;
    FixationAssembler assembler_;
    std::vector<PipelineEvent> events_;
    std::vector<double> speeds_;
    std::vector<Fixation> fixations_;
    std::vector<ThresholdChange> history_;
    double threshold_ = 0.0;
    double next_estimate_ms_ = 0.0;
    bool finished_ = false;
};

/// Protocol state for one connection. Holds at most one active session; a
/// new `start` is accepted after `end`.
class ProtocolHandler {
public:
    struct Reply {
        std::vector<std::string> lines;
        bool close = false;
    };

    explicit ProtocolHandler(StreamConfig config, std::shared_ptr<const SkillModel> model = {})
        : config_(std::move(config)), model_(std::move(model)) {}

    Reply handle_line(std::string_view line) {
        Reply r;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        nlohmann::json msg;
        try {
            msg = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            r.lines.push_back(error("malformed_json", "line is not valid JSON"));
            r.close = true;
            return r;
        }
        if (!msg.is_object()) {
            r.lines.push_back(error("malformed_json", "message must be a JSON object"));
            r.close = true;
            return r;
        }
        const auto type_it = msg.find("type");
        if (type_it == msg.end() || !type_it->is_string()) {
            r.lines.push_back(error("bad_type", "missing or non-string type"));
            return r;
        }
        const std::string type = type_it->get<std::string>();
        try {
            if (type == "start") {
                on_start(msg, r);
            } else if (type == "sample") {
                on_sample(msg, r);
            } else if (type == "query") {
                if (!session_) r.lines.push_back(error("no_session", "query before start"));
                else r.lines.push_back(session_->estimate().dump());
            } else if (type == "end") {
                if (!session_) {
                    r.lines.push_back(error("no_session", "end before start"));
                } else {
                    r.lines.push_back(session_->report().dump());
                    session_.reset();
                }
            } else {
                r.lines.push_back(error("bad_type", "unknown message type '" + type + "'"));
            }
        } catch (const Error& e) {
            r.lines.push_back(error("internal", e.what()));
        }
        return r;
    }

    bool has_session() const noexcept { return session_ != nullptr; }

private:
    static std::string error(std::string_view code, std::string_view message) {
        return nlohmann::json{{"type", "error"}, {"code", code}, {"message", message}}.dump();
    }

    void on_start(const nlohmann::json& msg, Reply& r) {
        if (session_) {
            r.lines.push_back(error("session_active", "a session is already running on this connection"));
            return;
        }
        const auto id = msg.find("session_id");
        double rate = kDefaultRateHz;
        if (id == msg.end() || !id->is_string()) {
            r.lines.push_back(error("bad_start", "session_id must be a string"));
            return;
        }
        if (const auto it = msg.find("rate_hz"); it != msg.end()) {
            if (!it->is_number() || !(it->get<double>() > 0.0)) {
                r.lines.push_back(error("bad_start", "rate_hz must be a positive number"));
                return;
            }
            rate = it->get<double>();
        }
        session_ = std::make_unique<StreamSession>(id->get<std::string>(), rate, config_, model_);
        r.lines.push_back(nlohmann::json{{"type", "started"}, {"session_id", session_->id()}}.dump());
    }

    void on_sample(const nlohmann::json& msg, Reply& r) {
        if (!session_) {
            r.lines.push_back(error("no_session", "sample before start"));
            return;
        }
        GazeSample s;
        const auto t = msg.find("t_ms");
        if (t == msg.end() || !t->is_number()) {
            r.lines.push_back(error("bad_sample", "t_ms must be a number"));
            return;
        }
        s.t_ms = t->get<double>();
        if (const auto v = msg.find("valid"); v != msg.end()) {
            if (!v->is_boolean()) {
                r.lines.push_back(error("bad_sample", "valid must be a boolean"));
                return;
            }
            s.valid = v->get<bool>();
        }
        auto coord = [&](const char* key, double& out) {
            const auto it = msg.find(key);
            if (it != msg.end() && it->is_number()) {
                out = it->get<double>();
                return true;
            }
            out = std::numeric_limits<double>::quiet_NaN();
            return !s.valid && (it == msg.end() || it->is_null());
        };
        if (!coord("x_px", s.x_px) || !coord("y_px", s.y_px)) {
            r.lines.push_back(error("bad_sample", "valid samples need numeric x_px and y_px"));
            return;
        }
        try {
            session_->push(s);
        } catch (const Error& e) {
            r.lines.push_back(error(e.code() == Errc::NonMonotoneTimestamp ? "non_monotone" : "bad_sample", e.what()));
        }
    }

    StreamConfig config_;
    std::shared_ptr<const SkillModel> model_;
    std::unique_ptr<StreamSession> session_;
};

}  // namespace gazeskill
