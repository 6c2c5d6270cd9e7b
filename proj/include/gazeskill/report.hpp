/**
 * @file report.hpp
 * @brief Per-session analysis, cohort-level tests and the report JSON document.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gazeskill/density.hpp"
#include "gazeskill/duration_stats.hpp"
#include "gazeskill/error.hpp"
#include "gazeskill/skill_inference.hpp"
#include "gazeskill/stats_tests.hpp"
#include "gazeskill/types.hpp"

namespace gazeskill {

inline constexpr int kReportSchema = 1;

enum class BandwidthRule { Fixed, SheatherJones };

struct AnalysisConfig {
    BandwidthRule rule = BandwidthRule::Fixed;
    double bandwidth_ms = kDefaultBandwidthMs;  // used when rule == Fixed
    double min_prominence_frac = kDefaultMinProminenceFrac;
    double tail_threshold_ms = 500.0;
    std::size_t vincentile_bins = 5;
    ClassBands bands{};
};

struct DensitySummary {
    double bandwidth_ms = 0.0;
    std::vector<Mode> modes;
};

struct ClassCounts {
    std::size_t ambient = 0;
    std::size_t intermediate = 0;
    std::size_t focal = 0;
};

/// Everything computed for one duration distribution. Blocks that need more
/// data than is available are left empty.
struct SessionAnalysis {
    std::string source;
    std::string subject_id;
    std::optional<SkillLevel> skill_label;
    std::size_t n_fixations = 0;
    std::optional<DescriptiveStats> stats;
    std::optional<VincentileProfile> vincentiles;
    std::optional<DensitySummary> density;
    std::optional<double> pct_over_tail;
    ClassCounts classes;
    std::optional<FeatureVector> features;
    std::optional<SkillEstimate> skill;
    std::string skill_reason;  // why `skill` is empty, if it is
};

inline SessionAnalysis analyze_session(const DurationDistribution& dist, const AnalysisConfig& config = {},
                                       const SkillModel* model = nullptr) {
    validate(config.bands);
    SessionAnalysis a;
    a.subject_id = dist.subject_id;
    a.n_fixations = dist.size();
    for (double d : dist.durations_ms) {
        switch (classify_fixation(d, config.bands)) {
        case FixationClass::Ambient: ++a.classes.ambient; break;
        case FixationClass::Intermediate: ++a.classes.intermediate; break;
        case FixationClass::Focal: ++a.classes.focal; break;
        }
    }
    if (dist.empty()) {
        a.skill_reason = "too_few_fixations";
        return a;
    }
    a.stats = describe(dist);
    a.pct_over_tail = pct_over(dist, config.tail_threshold_ms);
    if (dist.size() >= config.vincentile_bins) a.vincentiles = vincentiles(dist, config.vincentile_bins);

    std::optional<double> h;
    if (config.rule == BandwidthRule::Fixed) {
        h = config.bandwidth_ms;
    } else if (dist.size() >= 10 && a.stats->sd_ms && *a.stats->sd_ms > 0.0) {
        h = sheather_jones_bandwidth(dist);
    }
    if (h) a.density = DensitySummary{*h, find_modes(kde(dist, *h), config.min_prominence_frac)};

    if (dist.size() < kMinFixationsForFeatures) {
        a.skill_reason = "too_few_fixations";
        return a;
    }
    a.features = extract_features(dist, FeatureConfig{kDefaultBandwidthMs, config.min_prominence_frac, config.tail_threshold_ms});
    if (model)
        a.skill = classify(*a.features, *model);
    else
        a.skill_reason = "no_model";
    return a;
}

// ---------------------------------------------------------------------------
// Cohort tests
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& descriptive_columns() {
    static const std::vector<std::string> cols = {"mean_ms", "median_ms", "sd_ms", "min_ms", "max_ms"};
    return cols;
}

struct ColumnTest {
    std::optional<AnovaResult> anova;
    std::optional<ScheffeResult> scheffe;
    std::string error;  // error code name when the test could not run
};

struct CohortTests {
    std::vector<std::pair<SkillLevel, std::size_t>> groups;  // ascending skill, subject count
    std::map<std::string, ColumnTest> columns;
    std::optional<MixedAnovaResult> vincentile_anova;
    std::string vincentile_error;
};

/// One-way ANOVA plus Scheffe on each descriptive column and a mixed ANOVA
/// on the vincentile profiles. Sessions without a skill label or without the
/// needed statistics are skipped. Needs at least two labelled groups.
inline std::optional<CohortTests> cohort_tests(const std::vector<SessionAnalysis>& sessions, double alpha = 0.05) {
    std::map<SkillLevel, std::vector<const SessionAnalysis*>> by_skill;
    for (const auto& s : sessions)
        if (s.skill_label && s.stats && s.stats->sd_ms) by_skill[*s.skill_label].push_back(&s);
    if (by_skill.size() < 2) return std::nullopt;

    CohortTests t;
    for (const auto& [skill, members] : by_skill) t.groups.emplace_back(skill, members.size());

    auto column_value = [](const DescriptiveStats& st, const std::string& col) {
        if (col == "mean_ms") return st.mean_ms;
        if (col == "median_ms") return st.median_ms;
        if (col == "sd_ms") return *st.sd_ms;
        if (col == "min_ms") return st.min_ms;
        return st.max_ms;
    };
    for (const auto& col : descriptive_columns()) {
        Groups groups;
        for (const auto& [skill, members] : by_skill) {
            groups.emplace_back();
            for (const auto* s : members) groups.back().push_back(column_value(*s->stats, col));
        }
        ColumnTest ct;
        try {
            ct.scheffe = scheffe_posthoc(groups, alpha);
            ct.anova = ct.scheffe->omnibus;
        } catch (const Error& e) {
            ct.error = std::string(errc_name(e.code()));
        }
        t.columns.emplace(col, std::move(ct));
    }

    std::vector<SubjectProfile> profiles;
    bool complete = true;
    int g = 0;
    for (const auto& [skill, members] : by_skill) {
        for (const auto* s : members) {
            if (!s->vincentiles) complete = false;
            else profiles.push_back(SubjectProfile{g, s->vincentiles->bin_means_ms});
        }
        ++g;
    }
    if (!complete) {
        t.vincentile_error = std::string(errc_name(Errc::TooFewObservations));
    } else {
        try {
            t.vincentile_anova = mixed_anova(profiles, profiles.front().values.size());
        } catch (const Error& e) {
            t.vincentile_error = std::string(errc_name(e.code()));
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline nlohmann::json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const DescriptiveStats& s) {
    return {{"n", s.n},           {"mean_ms", s.mean_ms}, {"median_ms", s.median_ms}, {"sd_ms", optional_number(s.sd_ms)},
            {"min_ms", s.min_ms}, {"max_ms", s.max_ms}};
}

inline nlohmann::json to_json(const SkillEstimate& e) {
    nlohmann::json scores = nlohmann::json::object(), distances = nlohmann::json::object();
    for (const auto& [c, v] : e.scores) scores[std::string(to_string(c))] = v;
    for (const auto& [c, v] : e.distances) distances[std::string(to_string(c))] = v;
    return {{"label", std::string(to_string(e.label))}, {"scores", scores}, {"distances", distances}};
}

inline nlohmann::json to_json(const SessionAnalysis& a) {
    nlohmann::json j;
    j["source"] = a.source;
    j["subject_id"] = a.subject_id;
    j["skill_label"] = a.skill_label ? nlohmann::json(std::string(to_string(*a.skill_label))) : nlohmann::json(nullptr);
    j["n_fixations"] = a.n_fixations;
    j["empty"] = a.n_fixations == 0;
    j["stats"] = a.stats ? to_json(*a.stats) : nlohmann::json(nullptr);
    j["vincentiles"] = a.vincentiles ? nlohmann::json{{"bin_means_ms", a.vincentiles->bin_means_ms},
                                                      {"bin_counts", a.vincentiles->bin_counts}}
                                     : nlohmann::json(nullptr);
    if (a.density) {
        nlohmann::json modes = nlohmann::json::array();
        for (const auto& m : a.density->modes)
            modes.push_back({{"location_ms", m.location_ms}, {"density", m.density_value}, {"prominence", m.prominence}});
        j["density"] = {{"bandwidth_ms", a.density->bandwidth_ms}, {"modes", modes}};
    } else {
        j["density"] = nullptr;
    }
    j["pct_over_500"] = optional_number(a.pct_over_tail);
    j["class_counts"] = {{"ambient", a.classes.ambient}, {"intermediate", a.classes.intermediate}, {"focal", a.classes.focal}};
    j["features"] = a.features ? features_to_json(*a.features) : nlohmann::json(nullptr);
    j["skill"] = a.skill ? to_json(*a.skill) : nlohmann::json(nullptr);
    if (!a.skill) j["skill_reason"] = a.skill_reason;
    return j;
}

inline nlohmann::json to_json(const AnovaResult& r) {
    return {{"f", r.f_value},   {"df_between", r.df_between}, {"df_within", r.df_within},
            {"p", r.p_value},   {"ss_between", r.ss_between}, {"ss_within", r.ss_within}};
}

inline nlohmann::json to_json(const ScheffeResult& r, const std::vector<std::pair<SkillLevel, std::size_t>>& groups) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : r.pairs)
        pairs.push_back({{"a", std::string(to_string(groups[p.group_a].first))},
                         {"b", std::string(to_string(groups[p.group_b].first))},
                         {"mean_diff", p.mean_diff},
                         {"critical_diff", p.critical_diff},
                         {"significant", p.significant}});
    return {{"alpha", r.alpha}, {"f_critical", r.f_critical}, {"pairs", pairs}};
}

inline nlohmann::json to_json(const MixedAnovaResult& r) {
    return {{"interaction", {{"f", r.interaction_f}, {"df1", r.df_interaction}, {"df2", r.df_error}, {"p", r.p_value}}},
            {"group", {{"f", r.group_f}, {"df1", r.df_group}, {"df2", r.df_error_between}, {"p", r.group_p}}},
            {"bin", {{"f", r.within_f}, {"df1", r.df_within}, {"df2", r.df_error}, {"p", r.within_p}}},
            {"ss",
             {{"group", r.ss_group},
              {"error_between", r.ss_error_between},
              {"bin", r.ss_within},
              {"interaction", r.ss_interaction},
              {"error", r.ss_error}}}};
}

inline nlohmann::json to_json(const CohortTests& t) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& [s, n] : t.groups) groups.push_back({{"skill", std::string(to_string(s))}, {"n_subjects", n}});
    nlohmann::json anova = nlohmann::json::object(), scheffe = nlohmann::json::object();
    for (const auto& [col, ct] : t.columns) {
        if (ct.anova) {
            anova[col] = to_json(*ct.anova);
            scheffe[col] = to_json(*ct.scheffe, t.groups);
        } else {
            anova[col] = {{"error", ct.error}};
            scheffe[col] = {{"error", ct.error}};
        }
    }
    nlohmann::json mixed = t.vincentile_anova ? to_json(*t.vincentile_anova) : nlohmann::json{{"error", t.vincentile_error}};
    return {{"groups", groups}, {"anova", anova}, {"scheffe", scheffe}, {"mixed_anova", mixed}};
}

inline nlohmann::json config_to_json(const AnalysisConfig& c) {
    return {{"bandwidth", c.rule == BandwidthRule::Fixed ? nlohmann::json(c.bandwidth_ms) : nlohmann::json("sj")},
            {"min_prominence_frac", c.min_prominence_frac},
            {"tail_threshold_ms", c.tail_threshold_ms},
            {"vincentile_bins", c.vincentile_bins},
            {"bands", {{"ambient_max_ms", c.bands.ambient_max_ms}, {"focal_min_ms", c.bands.focal_min_ms}}}};
}

inline AnalysisConfig config_from_json(const nlohmann::json& j) {
    AnalysisConfig c;
    try {
        const auto& bw = j.at("bandwidth");
        if (bw.is_string()) {
            if (bw.get<std::string>() != "sj") throw Error(Errc::InvalidConfig, "bandwidth must be a number or \"sj\"");
            c.rule = BandwidthRule::SheatherJones;
        } else {
            c.bandwidth_ms = bw.get<double>();
        }
        c.min_prominence_frac = j.at("min_prominence_frac").get<double>();
        c.tail_threshold_ms = j.at("tail_threshold_ms").get<double>();
        c.vincentile_bins = j.at("vincentile_bins").get<std::size_t>();
        c.bands.ambient_max_ms = j.at("bands").at("ambient_max_ms").get<double>();
        c.bands.focal_min_ms = j.at("bands").at("focal_min_ms").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidConfig, e.what());
    }
    return c;
}

inline nlohmann::json report_to_json(const AnalysisConfig& config, const std::vector<SessionAnalysis>& sessions,
                                     const std::optional<CohortTests>& cohort) {
    nlohmann::json s = nlohmann::json::array();
    for (const auto& a : sessions) s.push_back(to_json(a));
    return {{"schema", kReportSchema},
            {"config", config_to_json(config)},
            {"sessions", s},
            {"cohort", cohort ? to_json(*cohort) : nlohmann::json(nullptr)}};
}

/// Pretty-printed report text with a trailing newline.
inline std::string write_report_json(const nlohmann::json& report) { return report.dump(2) + "\n"; }

/// Largest relative difference between numeric leaves of two JSON documents,
/// |a - b| / max(1, |a|, |b|). Any structural or non-numeric mismatch gives
/// infinity. Keys listed in `ignore` are skipped at every level.
inline double max_numeric_difference(const nlohmann::json& a, const nlohmann::json& b,
                                     const std::vector<std::string>& ignore = {}) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    if (a.is_number() && b.is_number()) {
        const double x = a.get<double>(), y = b.get<double>();
        if (x == y) return 0.0;
        if (!std::isfinite(x) || !std::isfinite(y)) return kInf;
        return std::fabs(x - y) / std::max({1.0, std::fabs(x), std::fabs(y)});
    }
    if (a.type() != b.type()) return kInf;
    if (a.is_object()) {
        auto ignored = [&](const std::string& k) { return std::find(ignore.begin(), ignore.end(), k) != ignore.end(); };
        double worst = 0.0;
        for (auto it = a.begin(); it != a.end(); ++it) {
            if (ignored(it.key())) continue;
            if (!b.contains(it.key())) return kInf;
            worst = std::max(worst, max_numeric_difference(it.value(), b.at(it.key()), ignore));
        }
        for (auto it = b.begin(); it != b.end(); ++it)
            if (!ignored(it.key()) && !a.contains(it.key())) return kInf;
        return worst;
    }
    if (a.is_array()) {
        if (a.size() != b.size()) return kInf;
        double worst = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, max_numeric_difference(a[i], b[i], ignore));
        return worst;
    }
    return a == b ? 0.0 : kInf;
}

}  // namespace gazeskill
