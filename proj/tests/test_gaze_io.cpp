#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "gazeskill/gaze_io.hpp"
#include "gazeskill/simgaze.hpp"

using namespace gazeskill;

namespace {

const std::string kThreeRows =
    "#subject_id=s01\n"
    "#skill=pro\n"
    "#rate_hz=30\n"
    "t_ms,x_px,y_px,valid\n"
    "0,100,200,1\n"
    "33.3,101.5,199.25,1\n"
    "66.6,nan,nan,0\n";

GazeRecording random_recording(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    GazeRecording r;
    r.subject_id = "r" + std::to_string(rng() % 100000);
    const auto lab = rng() % 4;
    if (lab < 3) r.skill_label = static_cast<SkillLevel>(lab);
    r.nominal_rate_hz = 1.0 + u(rng) * 999.0;
    r.screen_w_px = 1 + static_cast<int>(rng() % 4000);
    r.screen_h_px = 1 + static_cast<int>(rng() % 3000);
    if (rng() % 3 == 0) r.extra_metadata.emplace_back("tracker", "model-" + std::to_string(rng() % 10));
    const auto n = rng() % 200;
    double t = u(rng) < 0.2 ? 0.0 : u(rng) * 1e4;
    for (std::size_t i = 0; i < n; ++i) {
        GazeSample s;
        s.t_ms = t;
        t = std::nextafter(t, 1e300) + (rng() % 2 ? u(rng) * 50.0 : 0.0);
        s.valid = rng() % 7 != 0;
        if (s.valid) {
            // extreme magnitudes and awkward fractions
            const double scale = std::pow(10.0, static_cast<double>(static_cast<int>(rng() % 40) - 20));
            s.x_px = (u(rng) - 0.3) * 3000.0 * scale;
            s.y_px = (u(rng) - 0.3) * 2000.0;
        } else {
            s.x_px = std::numeric_limits<double>::quiet_NaN();
            s.y_px = rng() % 2 ? std::numeric_limits<double>::quiet_NaN() : u(rng);
        }
        r.samples.push_back(s);
    }
    GazeSample last;
    last.t_ms = t;
    last.x_px = 0.1 + 0.2;
    last.y_px = -0.0;
    r.samples.push_back(last);  // guarantees one valid row
    return r;
}

}  // namespace

TEST(GazeCsv, ThreeRowFileParsesToSameValues) {
    const auto res = parse_gaze_csv(kThreeRows);
    const auto& r = res.recording;
    EXPECT_EQ(r.subject_id, "s01");
    ASSERT_TRUE(r.skill_label);
    EXPECT_EQ(*r.skill_label, SkillLevel::Pro);
    EXPECT_EQ(r.nominal_rate_hz, 30.0);
    ASSERT_EQ(r.samples.size(), 3u);
    EXPECT_EQ(r.samples[1].t_ms, 33.3);
    EXPECT_EQ(r.samples[1].x_px, 101.5);
    EXPECT_EQ(r.samples[1].y_px, 199.25);
    EXPECT_FALSE(r.samples[2].valid);
    EXPECT_TRUE(std::isnan(r.samples[2].x_px));
    EXPECT_EQ(parse_gaze_csv(write_gaze_csv(r)).recording, r);
}

TEST(GazeCsv, MalformedRowStrictReportsLine) {
    const std::string text = "t_ms,x_px,y_px,valid\n0,1,2,1\n33.3,abc,10,1\n";
    try {
        parse_gaze_csv(text);
        FAIL() << "expected MalformedRow";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::MalformedRow);
        ASSERT_TRUE(e.line());
        EXPECT_EQ(*e.line(), 3u);
    }
}

TEST(GazeCsv, LenientDropsAndCounts) {
    const std::string text =
        "t_ms,x_px,y_px,valid\n0,1,2,1\n33.3,abc,10,1\n20,1,1,1\n40,5,5,1\n40,6,6,1\n50,1,2,2\n60,1,1,1\n";
    const auto res = parse_gaze_csv(text, HeaderPolicy::Lenient);
    EXPECT_EQ(res.rows_in, 7u);
    EXPECT_EQ(res.rows_dropped, 3u);
    EXPECT_EQ(res.rows_in, res.recording.samples.size() + res.rows_dropped);
    EXPECT_NO_THROW(validate(res.recording));
}

TEST(GazeCsv, StrictRejectsNonMonotone) {
    try {
        parse_gaze_csv("t_ms,x_px,y_px,valid\n0,1,2,1\n10,1,2,1\n10,1,2,1\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NonMonotoneTimestamp);
        EXPECT_EQ(e.line().value_or(0), 4u);
    }
}

TEST(GazeCsv, HeaderAndEmptiness) {
    EXPECT_THROW(
        {
            try {
                parse_gaze_csv("#subject_id=a\n0,1,2,1\n");
            } catch (const Error& e) {
                EXPECT_EQ(e.code(), Errc::MissingHeader);
                throw;
            }
        },
        Error);
    try {
        parse_gaze_csv("t_ms,x_px,y_px,valid\n0,nan,nan,0\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::EmptyRecording);
    }
    try {
        parse_gaze_csv("");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::MissingHeader);
    }
}

TEST(GazeCsv, CrLfAndBlankLinesAccepted) {
    const auto r = parse_gaze_csv("#subject_id=w\r\nt_ms,x_px,y_px,valid\r\n0,1,2,1\r\n\r\n5,1,2,1\r\n").recording;
    EXPECT_EQ(r.subject_id, "w");
    EXPECT_EQ(r.samples.size(), 2u);
}

TEST(GazeCsv, UnknownMetadataPreservedInOrder) {
    const std::string text = "#zeta=1\n#subject_id=q\n#alpha=x=y\nt_ms,x_px,y_px,valid\n0,1,2,1\n";
    const auto r = parse_gaze_csv(text).recording;
    ASSERT_EQ(r.extra_metadata.size(), 2u);
    EXPECT_EQ(r.extra_metadata[0], (std::pair<std::string, std::string>{"zeta", "1"}));
    EXPECT_EQ(r.extra_metadata[1], (std::pair<std::string, std::string>{"alpha", "x=y"}));
    const auto out = write_gaze_csv(r);
    EXPECT_NE(out.find("#zeta=1\n"), std::string::npos);
    EXPECT_NE(out.find("#alpha=x=y\n"), std::string::npos);
}

TEST(GazeCsv, BadMetadataValueRejected) {
    EXPECT_THROW(parse_gaze_csv("#rate_hz=-3\nt_ms,x_px,y_px,valid\n0,1,2,1\n"), Error);
    EXPECT_THROW(parse_gaze_csv("#skill=expert\nt_ms,x_px,y_px,valid\n0,1,2,1\n"), Error);
}

TEST(GazeCsv, EmptyRecordingWritesMetadataAndHeaderOnly) {
    GazeRecording r;
    r.subject_id = "e";
    EXPECT_EQ(write_gaze_csv(r), "#subject_id=e\n#rate_hz=30\n#screen_w=1920\n#screen_h=1080\nt_ms,x_px,y_px,valid\n");
}

TEST(GazeCsv, SingleSampleRow) {
    GazeRecording r;
    r.samples.push_back({0.0, 100.0, 200.0, true});
    const auto text = write_gaze_csv(r);
    const auto header_end = text.find(std::string(kGazeHeader) + "\n") + kGazeHeader.size() + 1;
    EXPECT_EQ(text.substr(header_end), "0,100,200,1\n");
}

TEST(GazeCsv, SimulatedSessionRoundTrips) {
    auto p = builtin_profile("pro");
    p.rate_hz = 30.0;
    p.session_s = 600.0;
    p.dropout_prob = 0.02;
    const auto s = gen_session(p, "sim");
    const auto back = parse_gaze_csv(write_gaze_csv(s.recording)).recording;
    EXPECT_EQ(back, s.recording);
    EXPECT_GT(back.samples.size(), 17000u);
}

TEST(GazeCsv, RandomRecordingsRoundTrip) {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 500; ++i) {
        const auto r = random_recording(rng);
        ASSERT_NO_THROW(validate(r));
        const auto back = parse_gaze_csv(write_gaze_csv(r)).recording;
        ASSERT_EQ(back, r) << "recording " << i;
        for (std::size_t k = 0; k < r.samples.size(); ++k)
            ASSERT_EQ(std::signbit(back.samples[k].y_px), std::signbit(r.samples[k].y_px));
    }
}

TEST(GazeCsv, LenientNeverBreaksInvariants) {
    std::mt19937_64 rng(7);
    const char* junk[] = {"abc", "", "nan", "inf", "-5", "1e400", "0x10", "1,2", " 3", "2", "1"};
    for (int trial = 0; trial < 300; ++trial) {
        std::string text = "t_ms,x_px,y_px,valid\n";
        for (int row = 0; row < 40; ++row) {
            if (rng() % 4 == 0) {
                text += std::string(junk[rng() % 11]) + "," + junk[rng() % 11] + "," + junk[rng() % 11] + "," + junk[rng() % 11] + "\n";
            } else {
                text += std::to_string(rng() % 1000) + "," + std::to_string(rng() % 100) + ",5," + (rng() % 5 ? "1" : "0") + "\n";
            }
        }
        text += "5000,1,1,1\n";
        GazeParseResult res;
        try {
            res = parse_gaze_csv(text, HeaderPolicy::Lenient);
        } catch (const Error& e) {
            ASSERT_EQ(e.code(), Errc::EmptyRecording);
            continue;
        }
        ASSERT_NO_THROW(validate(res.recording));
        ASSERT_EQ(res.rows_in, res.recording.samples.size() + res.rows_dropped);
    }
}

TEST(FixationCsv, EmptyListIsHeaderOnly) {
    EXPECT_EQ(write_fixation_csv({}), std::string(kFixationHeader) + "\n");
    EXPECT_TRUE(read_fixation_csv(write_fixation_csv({})).fixations.empty());
}

TEST(FixationCsv, OneFixationRow) {
    Fixation f{0.0, 200.0, 200.0, 512.5, 300.0, 3.25, 7};
    const auto text = write_fixation_csv({f}, FixationFileMeta{"s9", SkillLevel::High});
    EXPECT_EQ(text, "#subject_id=s9\n#skill=high\n" + std::string(kFixationHeader) + "\n0,200,200,512.5,300,3.25,7,intermediate\n");
    const auto back = read_fixation_csv(text);
    ASSERT_EQ(back.fixations.size(), 1u);
    EXPECT_EQ(back.fixations[0], f);
    EXPECT_EQ(back.meta.subject_id, "s9");
    EXPECT_EQ(back.meta.skill_label, SkillLevel::High);
}

TEST(FixationCsv, RejectsBadRows) {
    const std::string h = std::string(kFixationHeader) + "\n";
    EXPECT_THROW(read_fixation_csv(h + "0,200,-1,0,0,0,2,focal\n"), Error);
    EXPECT_THROW(read_fixation_csv(h + "0,200,200,0,0,0\n"), Error);
    EXPECT_THROW(read_fixation_csv("onset_ms\n"), Error);
}

TEST(DensityCsv, TwoColumns) {
    DensityEstimate e;
    e.grid_ms = {0, 1, 2};
    e.density = {0.5, 0.25, 0.125};
    e.bandwidth_ms = 30;
    EXPECT_EQ(write_density_csv(e), "t_ms,density\n0,0.5\n1,0.25\n2,0.125\n");
}

TEST(FormatNumber, ShortestRoundTrip) {
    EXPECT_EQ(format_number(0.1 + 0.2), "0.30000000000000004");
    EXPECT_EQ(format_number(33.3), "33.3");
    EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "nan");
    EXPECT_EQ(format_number(1e21), "1e+21");
}
