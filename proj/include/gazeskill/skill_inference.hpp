/**
 * @file skill_inference.hpp
 * @brief Distribution-shape features and a nearest-centroid skill classifier.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gazeskill/density.hpp"
#include "gazeskill/duration_stats.hpp"
#include "gazeskill/error.hpp"
#include "gazeskill/types.hpp"

namespace gazeskill {

inline constexpr std::size_t kFeatureCount = 12;
inline constexpr std::size_t kMinFixationsForFeatures = 20;

inline const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = {
        "sd_ms",       "min_ms",      "max_ms",      "mode_count",  "primary_mode_ms", "secondary_mode_ms",
        "pct_over_500", "vincentile_1", "vincentile_2", "vincentile_3", "vincentile_4",   "vincentile_5"};
    return names;
}

struct FeatureConfig {
    double bandwidth_ms = kDefaultBandwidthMs;
    double min_prominence_frac = kDefaultMinProminenceFrac;
    double tail_threshold_ms = 500.0;
};

/// `primary_mode_ms` and `secondary_mode_ms` are the two most prominent KDE
/// modes ordered by location; a unimodal density repeats the primary mode.
struct FeatureVector {
    double sd_ms = 0.0;
    double min_ms = 0.0;
    double max_ms = 0.0;
    double mode_count = 0.0;
    double primary_mode_ms = 0.0;
    double secondary_mode_ms = 0.0;
    double pct_over_500 = 0.0;
    std::array<double, 5> vincentile_means{};

    std::array<double, kFeatureCount> to_array() const {
        return {sd_ms, min_ms, max_ms, mode_count, primary_mode_ms, secondary_mode_ms, pct_over_500,
                vincentile_means[0], vincentile_means[1], vincentile_means[2], vincentile_means[3], vincentile_means[4]};
    }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline FeatureVector extract_features(const DurationDistribution& dist, const FeatureConfig& config = {}) {
    if (dist.size() < kMinFixationsForFeatures)
        throw Error(Errc::TooFewFixations, "features need at least 20 fixations, got " + std::to_string(dist.size()));
    FeatureVector f;
    const auto stats = describe(dist);
    f.sd_ms = *stats.sd_ms;
    f.min_ms = stats.min_ms;
    f.max_ms = stats.max_ms;
    const auto vin = vincentiles(dist, 5);
    std::copy(vin.bin_means_ms.begin(), vin.bin_means_ms.end(), f.vincentile_means.begin());
    f.pct_over_500 = pct_over(dist, config.tail_threshold_ms);

    auto modes = find_modes(kde(dist, config.bandwidth_ms), config.min_prominence_frac);
    f.mode_count = static_cast<double>(modes.size());
    std::stable_sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) { return a.prominence > b.prominence; });
    f.primary_mode_ms = modes[0].location_ms;
    f.secondary_mode_ms = modes.size() > 1 ? modes[1].location_ms : modes[0].location_ms;
    if (f.secondary_mode_ms < f.primary_mode_ms) std::swap(f.primary_mode_ms, f.secondary_mode_ms);
    return f;
}

/// Nearest-centroid model in z-scored feature space. Features with zero
/// training variance are dropped (`kept[i] == false`).
struct SkillModel {
    std::vector<std::string> feature_names;
    std::vector<bool> kept;
    std::vector<double> mean;
    std::vector<double> sd;
    std::vector<SkillLevel> classes;                // ascending
    std::vector<std::vector<double>> centroids;     // per class, standardized, full length

    std::vector<std::string> dropped_features() const {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < kept.size(); ++i)
            if (!kept[i]) out.push_back(feature_names[i]);
        return out;
    }

    friend bool operator==(const SkillModel&, const SkillModel&) = default;
};

struct SkillEstimate {
    SkillLevel label = SkillLevel::Low;
    std::vector<std::pair<SkillLevel, double>> scores;  // softmin of centroid distances
    std::vector<std::pair<SkillLevel, double>> distances;
};

/// Fits the model on raw feature rows. Each class needs two rows, and at
/// least two classes are required.
inline SkillModel fit_vectors(std::vector<std::string> names, const std::vector<std::vector<double>>& rows,
                              const std::vector<SkillLevel>& labels) {
    if (rows.size() != labels.size()) throw Error(Errc::InvalidArgument, "rows and labels differ in length");
    std::map<SkillLevel, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    if (by_class.size() < 2) throw Error(Errc::InsufficientTraining, "need at least two classes");
    for (const auto& [c, idx] : by_class)
        if (idx.size() < 2) throw Error(Errc::InsufficientTraining, "need at least two sessions of class " + std::string(to_string(c)));
    const std::size_t d = names.size();
    for (const auto& r : rows)
        if (r.size() != d) throw Error(Errc::ModelFeatureMismatch, "feature row has the wrong length");

    SkillModel m;
    m.feature_names = std::move(names);
    m.kept.assign(d, true);
    m.mean.assign(d, 0.0);
    m.sd.assign(d, 0.0);
    const double n = static_cast<double>(rows.size());
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (const auto& r : rows) s += r[j];
        m.mean[j] = s / n;
        double ss = 0.0;
        for (const auto& r : rows) ss += (r[j] - m.mean[j]) * (r[j] - m.mean[j]);
        m.sd[j] = std::sqrt(ss / (n - 1.0));
        if (!(m.sd[j] > 0.0)) {
            m.kept[j] = false;
            m.sd[j] = 0.0;
        }
    }
    for (const auto& [c, idx] : by_class) {
        std::vector<double> centroid(d, 0.0);
        for (std::size_t j = 0; j < d; ++j) {
            if (!m.kept[j]) continue;
            for (std::size_t i : idx) centroid[j] += (rows[i][j] - m.mean[j]) / m.sd[j];
            centroid[j] /= static_cast<double>(idx.size());
        }
        m.classes.push_back(c);
        m.centroids.push_back(std::move(centroid));
    }
    return m;
}

/// Nearest centroid in standardized space. Equal distances resolve toward the
/// lower skill level.
inline SkillEstimate classify_vector(std::span<const double> raw, const SkillModel& model) {
    if (raw.size() != model.feature_names.size())
        throw Error(Errc::ModelFeatureMismatch, "feature vector length does not match model");
    SkillEstimate est;
    std::vector<double> z(raw.size(), 0.0);
    for (std::size_t j = 0; j < raw.size(); ++j)
        if (model.kept[j]) z[j] = (raw[j] - model.mean[j]) / model.sd[j];
    double best = 0.0;
    for (std::size_t c = 0; c < model.classes.size(); ++c) {
        double ss = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j)
            if (model.kept[j]) ss += (z[j] - model.centroids[c][j]) * (z[j] - model.centroids[c][j]);
        const double dist = std::sqrt(ss);
        est.distances.emplace_back(model.classes[c], dist);
        if (c == 0 || dist < best) {
            best = dist;
            est.label = model.classes[c];
        }
    }
    double total = 0.0;
    for (const auto& [c, dist] : est.distances) total += std::exp(best - dist);
    for (const auto& [c, dist] : est.distances) est.scores.emplace_back(c, std::exp(best - dist) / total);
    return est;
}

inline SkillModel fit(const std::vector<std::pair<FeatureVector, SkillLevel>>& labeled) {
    std::vector<std::vector<double>> rows;
    std::vector<SkillLevel> labels;
    for (const auto& [f, l] : labeled) {
        const auto a = f.to_array();
        rows.emplace_back(a.begin(), a.end());
        labels.push_back(l);
    }
    const auto& names = feature_names();
    return fit_vectors(std::vector<std::string>(names.begin(), names.end()), rows, labels);
}

inline SkillEstimate classify(const FeatureVector& features, const SkillModel& model) {
    const auto& names = feature_names();
    if (!std::equal(model.feature_names.begin(), model.feature_names.end(), names.begin(), names.end()))
        throw Error(Errc::ModelFeatureMismatch, "model was fitted on a different feature set");
    const auto a = features.to_array();
    return classify_vector(a, model);
}

inline nlohmann::json features_to_json(const FeatureVector& f) {
    nlohmann::json j = nlohmann::json::object();
    const auto a = f.to_array();
    for (std::size_t i = 0; i < kFeatureCount; ++i) j[feature_names()[i]] = a[i];
    return j;
}

// Model file: {"schema": 1, "features": [...], "kept": [...], "mean": [...],
// "sd": [...], "classes": ["low", ...], "centroids": [[...], ...]}
inline nlohmann::json model_to_json(const SkillModel& m) {
    nlohmann::json classes = nlohmann::json::array();
    for (auto c : m.classes) classes.push_back(std::string(to_string(c)));
    return {{"schema", 1}, {"features", m.feature_names}, {"kept", m.kept}, {"mean", m.mean},
            {"sd", m.sd},  {"classes", classes},          {"centroids", m.centroids}};
}

inline SkillModel model_from_json(const nlohmann::json& j) {
    SkillModel m;
    try {
        if (j.at("schema").get<int>() != 1) throw Error(Errc::InvalidModel, "unsupported model schema");
        m.feature_names = j.at("features").get<std::vector<std::string>>();
        m.kept = j.at("kept").get<std::vector<bool>>();
        m.mean = j.at("mean").get<std::vector<double>>();
        m.sd = j.at("sd").get<std::vector<double>>();
        for (const auto& c : j.at("classes")) {
            const auto s = parse_skill(c.get<std::string>());
            if (!s) throw Error(Errc::InvalidModel, "unknown class label");
            m.classes.push_back(*s);
        }
        m.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidModel, e.what());
    }
    const std::size_t d = m.feature_names.size();
    if (m.kept.size() != d || m.mean.size() != d || m.sd.size() != d || m.centroids.size() != m.classes.size())
        throw Error(Errc::InvalidModel, "inconsistent model dimensions");
    for (const auto& c : m.centroids)
        if (c.size() != d) throw Error(Errc::InvalidModel, "centroid has the wrong length");
    if (!std::is_sorted(m.classes.begin(), m.classes.end())) throw Error(Errc::InvalidModel, "classes must be ascending");
    return m;
}

}  // namespace gazeskill
