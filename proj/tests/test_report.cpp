#include <gtest/gtest.h>

#include "gazeskill/report.hpp"
#include "gazeskill/simgaze.hpp"
#include "gazeskill/svg_plot.hpp"

using namespace gazeskill;

namespace {

DurationDistribution planted(const char* profile, std::uint64_t seed, double session_s = 300.0) {
    auto p = builtin_profile(profile);
    p.seed = seed;
    p.session_s = session_s;
    std::vector<double> d;
    for (const auto& f : gen_session(p).truth.fixations) d.push_back(f.last_sample_ms - f.first_sample_ms);
    auto dist = DurationDistribution::from_unsorted(std::string(profile) + std::to_string(seed), std::move(d));
    return dist;
}

std::vector<SessionAnalysis> small_cohort() {
    std::vector<SessionAnalysis> out;
    std::uint64_t seed = 1;
    for (const char* name : {"low", "high", "pro"}) {
        for (int i = 0; i < 4; ++i) {
            auto a = analyze_session(planted(name, seed++, 120.0));
            a.skill_label = builtin_profile(name).skill;
            out.push_back(std::move(a));
        }
    }
    return out;
}

}  // namespace

TEST(Analyze, EmptyDistribution) {
    const auto a = analyze_session(DurationDistribution{});
    EXPECT_EQ(a.n_fixations, 0u);
    EXPECT_FALSE(a.stats);
    EXPECT_FALSE(a.density);
    EXPECT_EQ(a.skill_reason, "too_few_fixations");
    const auto j = to_json(a);
    EXPECT_TRUE(j["empty"].get<bool>());
    EXPECT_TRUE(j["stats"].is_null());
    EXPECT_TRUE(j["skill"].is_null());
}

TEST(Analyze, FewFixationsGetStatsButNoSkill) {
    const auto a = analyze_session(DurationDistribution::from_unsorted("f", {150, 100, 250, 300, 200}));
    ASSERT_TRUE(a.stats);
    EXPECT_EQ(a.stats->mean_ms, 200.0);
    ASSERT_TRUE(a.vincentiles);
    EXPECT_EQ(a.vincentiles->bin_means_ms, (std::vector<double>{100, 150, 200, 250, 300}));
    EXPECT_FALSE(a.features);
    EXPECT_EQ(a.skill_reason, "too_few_fixations");
    // bands are closed at 150 and 250
    EXPECT_EQ(a.classes.ambient, 2u);
    EXPECT_EQ(a.classes.intermediate, 1u);
    EXPECT_EQ(a.classes.focal, 2u);
    ASSERT_TRUE(a.pct_over_tail);
    EXPECT_EQ(*a.pct_over_tail, 0.0);
}

TEST(Analyze, ModelGivesSkill) {
    std::vector<std::pair<FeatureVector, SkillLevel>> train;
    std::uint64_t seed = 100;
    for (const char* name : {"low", "high", "pro"})
        for (int i = 0; i < 3; ++i) train.emplace_back(extract_features(planted(name, seed++)), *builtin_profile(name).skill);
    const auto model = fit(train);
    const auto dist = planted("pro", 7, 600.0);
    const auto without = analyze_session(dist);
    EXPECT_FALSE(without.skill);
    EXPECT_EQ(without.skill_reason, "no_model");
    EXPECT_EQ(to_json(without)["skill_reason"], "no_model");
    const auto with = analyze_session(dist, {}, &model);
    ASSERT_TRUE(with.skill);
    EXPECT_EQ(with.skill->label, SkillLevel::Pro);
    EXPECT_FALSE(to_json(with).contains("skill_reason"));
    EXPECT_EQ(with.classes.ambient + with.classes.intermediate + with.classes.focal, with.n_fixations);
}

TEST(Analyze, SheatherJonesRule) {
    AnalysisConfig c;
    c.rule = BandwidthRule::SheatherJones;
    const auto a = analyze_session(planted("low", 3), c);
    ASSERT_TRUE(a.density);
    EXPECT_GT(a.density->bandwidth_ms, 0.0);
    EXPECT_NE(a.density->bandwidth_ms, kDefaultBandwidthMs);
    EXPECT_EQ(config_to_json(c)["bandwidth"], "sj");
    // too few for a data-driven bandwidth: density omitted rather than failing
    const auto tiny = analyze_session(DurationDistribution::from_unsorted("t", {100, 200, 300}), c);
    EXPECT_FALSE(tiny.density);
    EXPECT_TRUE(tiny.stats);
}

TEST(Report, JsonSurvivesTextRoundTrip) {
    const auto sessions = small_cohort();
    const auto cohort = cohort_tests(sessions);
    const auto report = report_to_json(AnalysisConfig{}, sessions, cohort);
    const auto text = write_report_json(report);
    ASSERT_EQ(text.back(), '\n');
    const auto back = nlohmann::json::parse(text);
    EXPECT_LE(max_numeric_difference(report, back), 1e-12);
    EXPECT_EQ(write_report_json(back), text);
    EXPECT_EQ(back["schema"], kReportSchema);
    const auto cfg = config_from_json(back["config"]);
    EXPECT_EQ(cfg.bandwidth_ms, kDefaultBandwidthMs);
    EXPECT_EQ(cfg.vincentile_bins, 5u);
}

TEST(Report, ConfigRejectsBadBandwidth) {
    auto j = config_to_json(AnalysisConfig{});
    j["bandwidth"] = "scott";
    EXPECT_THROW(config_from_json(j), Error);
    j.erase("bandwidth");
    EXPECT_THROW(config_from_json(j), Error);
}

TEST(Report, NumericDifference) {
    const auto a = nlohmann::json::parse(R"({"x": 1.0, "y": [1, 2000], "s": "k", "n": null})");
    auto b = a;
    EXPECT_EQ(max_numeric_difference(a, b), 0.0);
    b["y"][1] = 2001.0;
    EXPECT_NEAR(max_numeric_difference(a, b), 1.0 / 2001.0, 1e-15);
    b = a;
    b["x"] = 1.5;
    EXPECT_NEAR(max_numeric_difference(a, b), 0.5 / 1.5, 1e-15);
    EXPECT_EQ(max_numeric_difference(a, b, {"x"}), 0.0);
    b.erase("x");
    EXPECT_EQ(max_numeric_difference(a, b, {"x"}), 0.0);
    EXPECT_EQ(max_numeric_difference(b, a, {"x"}), 0.0);
    EXPECT_TRUE(std::isinf(max_numeric_difference(a, b)));
    b = a;
    b["s"] = "z";
    EXPECT_TRUE(std::isinf(max_numeric_difference(a, b)));
    b = a;
    b["y"].push_back(3);
    EXPECT_TRUE(std::isinf(max_numeric_difference(a, b)));
    b = a;
    b["n"] = 0;
    EXPECT_TRUE(std::isinf(max_numeric_difference(a, b)));
    // integer and float spellings of the same value agree
    EXPECT_EQ(max_numeric_difference(nlohmann::json(3), nlohmann::json(3.0)), 0.0);
}

TEST(Cohort, TestsStructure) {
    const auto sessions = small_cohort();
    const auto t = cohort_tests(sessions);
    ASSERT_TRUE(t);
    ASSERT_EQ(t->groups.size(), 3u);
    EXPECT_EQ(t->groups[0], (std::pair<SkillLevel, std::size_t>{SkillLevel::Low, 4}));
    EXPECT_EQ(t->columns.size(), 5u);
    for (const auto& col : descriptive_columns()) {
        const auto& ct = t->columns.at(col);
        ASSERT_TRUE(ct.anova) << col;
        EXPECT_EQ(ct.anova->df_between, 2);
        EXPECT_EQ(ct.anova->df_within, 9);
        EXPECT_EQ(ct.scheffe->pairs.size(), 3u);
    }
    ASSERT_TRUE(t->vincentile_anova);
    EXPECT_EQ(t->vincentile_anova->df_interaction, 8);
    EXPECT_EQ(t->vincentile_anova->df_error, 36);
    const auto j = to_json(*t);
    EXPECT_EQ(j["scheffe"]["sd_ms"]["pairs"][0]["a"], "low");
    EXPECT_EQ(j["scheffe"]["sd_ms"]["pairs"][0]["b"], "high");
    EXPECT_EQ(j["mixed_anova"]["interaction"]["df1"], 8);
}

TEST(Cohort, NeedsTwoLabelledGroups) {
    auto sessions = small_cohort();
    for (auto& s : sessions) s.skill_label = SkillLevel::High;
    EXPECT_FALSE(cohort_tests(sessions));
    for (auto& s : sessions) s.skill_label.reset();
    EXPECT_FALSE(cohort_tests(sessions));
    EXPECT_TRUE(report_to_json(AnalysisConfig{}, sessions, std::nullopt)["cohort"].is_null());
}

TEST(Cohort, SingletonGroupsReportErrors) {
    auto sessions = small_cohort();
    std::vector<SessionAnalysis> two = {sessions[0], sessions[4]};
    const auto t = cohort_tests(two);
    ASSERT_TRUE(t);
    EXPECT_FALSE(t->columns.at("mean_ms").anova);
    EXPECT_FALSE(t->columns.at("mean_ms").error.empty());
    EXPECT_FALSE(t->vincentile_anova);
    EXPECT_FALSE(t->vincentile_error.empty());
    EXPECT_TRUE(to_json(*t)["anova"]["mean_ms"].contains("error"));
}

TEST(Svg, DensityPlot) {
    const auto est = kde(planted("pro", 4), 30.0);
    const auto s = density_svg({{"pro", est}, {"low", kde(planted("low", 4), 30.0)}});
    EXPECT_EQ(s.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 500\"", 0), 0u);
    EXPECT_NE(s.find("Fixation duration (ms)"), std::string::npos);
    EXPECT_NE(s.find(">1000</text>"), std::string::npos);
    EXPECT_NE(s.find(">0</text>"), std::string::npos);
    EXPECT_NE(s.find(">pro</text>"), std::string::npos);
    EXPECT_NE(s.find(">low</text>"), std::string::npos);
    EXPECT_EQ(s.substr(s.size() - 7), "</svg>\n");
    EXPECT_EQ(s, density_svg({{"pro", est}, {"low", kde(planted("low", 4), 30.0)}}));
    EXPECT_THROW(density_svg({}), Error);
}

TEST(Svg, VincentilePlot) {
    const auto s = vincentile_svg({{"low <a&b>", {180, 210, 230, 260, 330}}, {"pro", {100, 130, 260, 330, 560}}});
    EXPECT_NE(s.find("viewBox=\"0 0 800 500\""), std::string::npos);
    EXPECT_NE(s.find("Mean fixation duration (ms)"), std::string::npos);
    EXPECT_NE(s.find("low &lt;a&amp;b&gt;"), std::string::npos);
    EXPECT_NE(s.find(">5</text>"), std::string::npos);
    EXPECT_NE(s.find(">600</text>"), std::string::npos);
    EXPECT_THROW(vincentile_svg({{"a", {1, 2}}, {"b", {1, 2, 3}}}), Error);
}
