// gazeskill command-line tool: extract, analyze, compare, simulate, fit,
// classify, report, serve.

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gazeskill.hpp"
#include "gazeskill/tcp_server.hpp"

namespace fs = std::filesystem;
using namespace gazeskill;

namespace {

int exit_code(Errc c) {
    switch (c) {
    case Errc::EmptyRecording:
    case Errc::InsufficientData:
    case Errc::EmptyDistribution:
    case Errc::TooFewObservations:
    case Errc::DegenerateDistribution:
    case Errc::DegenerateData:
    case Errc::TooFewGroups:
    case Errc::TooFewFixations:
    case Errc::InsufficientTraining: return 3;
    case Errc::Network: return 4;
    default: return 2;
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write '" + path + "'");
    out << text;
    if (!out) throw Error(Errc::Io, "write failed for '" + path + "'");
}

nlohmann::json read_json(const std::string& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(Errc::InvalidArgument, "'" + path + "' is not valid JSON: " + e.what());
    }
}

std::string with_context(const std::string& path, const Error& e) {
    std::string msg = path + ": " + e.what();
    if (e.line()) msg += " (line " + std::to_string(*e.line()) + ")";
    return msg;
}

/// Runs `fn` over the inputs concurrently and returns results in input order.
template <class Fn>
auto map_inputs(const std::vector<std::string>& paths, Fn fn) {
    using R = decltype(fn(paths.front()));
    std::vector<std::future<R>> futures;
    for (const auto& p : paths) futures.push_back(std::async(std::launch::async, fn, p));
    std::vector<R> out;
    for (std::size_t i = 0; i < futures.size(); ++i) {
        try {
            out.push_back(futures[i].get());
        } catch (const Error& e) {
            for (std::size_t j = i + 1; j < futures.size(); ++j) futures[j].wait();
            throw Error(e.code(), with_context(paths[i], e));
        }
    }
    return out;
}

std::vector<std::string> sorted(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
}

AnalysisConfig analysis_config(const std::string& bandwidth) {
    AnalysisConfig c;
    if (bandwidth == "sj") {
        c.rule = BandwidthRule::SheatherJones;
        return c;
    }
    try {
        std::size_t used = 0;
        c.bandwidth_ms = std::stod(bandwidth, &used);
        if (used != bandwidth.size()) throw std::invalid_argument(bandwidth);
    } catch (const std::exception&) {
        throw Error(Errc::InvalidArgument, "--bandwidth must be a number or 'sj'");
    }
    if (!(c.bandwidth_ms > 0.0)) throw Error(Errc::NonPositiveBandwidth, "--bandwidth must be positive");
    return c;
}

SessionAnalysis analyze_file(const std::string& path, const AnalysisConfig& config, const SkillModel* model) {
    const auto file = read_fixation_csv(read_file(path));
    std::vector<double> d;
    for (const auto& f : file.fixations) d.push_back(f.duration_ms);
    auto dist = DurationDistribution::from_unsorted(file.meta.subject_id, std::move(d));
    auto a = analyze_session(dist, config, model);
    a.source = path;
    a.skill_label = file.meta.skill_label;
    return a;
}

std::string group_name(const SessionAnalysis& a) {
    return a.skill_label ? std::string(to_string(*a.skill_label)) : std::string("unlabeled");
}

/// density.svg and density_<group>.csv (pooled per group), vincentiles.svg
/// (group means).
void write_svgs(const std::string& dir, const std::vector<std::string>& paths, const std::vector<SessionAnalysis>& sessions,
                const AnalysisConfig& config) {
    std::map<std::string, std::vector<double>> pooled;
    std::map<std::string, std::pair<std::vector<double>, std::size_t>> vin;
    auto order = [](const std::string& g) {
        const auto s = parse_skill(g);
        return s ? static_cast<int>(*s) : 99;
    };
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        const auto file = read_fixation_csv(read_file(paths[i]));
        auto& pool = pooled[group_name(sessions[i])];
        for (const auto& f : file.fixations) pool.push_back(f.duration_ms);
        if (sessions[i].vincentiles) {
            auto& [sum, n] = vin[group_name(sessions[i])];
            const auto& means = sessions[i].vincentiles->bin_means_ms;
            if (sum.empty()) sum.assign(means.size(), 0.0);
            for (std::size_t b = 0; b < means.size(); ++b) sum[b] += means[b];
            ++n;
        }
    }
    std::vector<std::string> groups;
    for (const auto& [g, v] : pooled) groups.push_back(g);
    std::stable_sort(groups.begin(), groups.end(), [&](const auto& a, const auto& b) { return order(a) < order(b); });

    std::vector<std::pair<std::string, DensityEstimate>> curves;
    for (const auto& g : groups) {
        if (pooled[g].empty()) continue;
        const auto dist = DurationDistribution::from_unsorted(g, pooled[g]);
        double h = config.bandwidth_ms;
        if (config.rule == BandwidthRule::SheatherJones) h = sheather_jones_bandwidth(dist);
        curves.emplace_back(g, kde(dist, h));
        write_file((fs::path(dir) / ("density_" + g + ".csv")).string(), write_density_csv(curves.back().second));
    }
    if (!curves.empty()) write_file((fs::path(dir) / "density.svg").string(), density_svg(curves));

    std::vector<std::pair<std::string, std::vector<double>>> lines;
    for (const auto& g : groups) {
        const auto it = vin.find(g);
        if (it == vin.end()) continue;
        auto means = it->second.first;
        for (auto& m : means) m /= static_cast<double>(it->second.second);
        lines.emplace_back(g, std::move(means));
    }
    if (!lines.empty()) write_file((fs::path(dir) / "vincentiles.svg").string(), vincentile_svg(lines));
}

std::shared_ptr<const SkillModel> load_model(const std::string& path) {
    if (path.empty()) return nullptr;
    return std::make_shared<const SkillModel>(model_from_json(read_json(path)));
}

SimProfile resolve_profile(const std::string& name_or_path) {
    if (fs::is_regular_file(name_or_path)) return profile_from_json(read_json(name_or_path));
    return builtin_profile(name_or_path);
}

std::string truth_csv(const GroundTruth& truth) {
    std::string s = "onset_ms,offset_ms,cx_px,cy_px,first_sample_ms,last_sample_ms\n";
    for (const auto& f : truth.fixations)
        s += format_number(f.onset_ms) + ',' + format_number(f.offset_ms) + ',' + format_number(f.cx_px) + ',' +
             format_number(f.cy_px) + ',' + format_number(f.first_sample_ms) + ',' + format_number(f.last_sample_ms) + '\n';
    return s;
}

std::atomic<TcpServer*> g_server{nullptr};

void on_signal(int) {
    if (auto* s = g_server.load()) s->interrupt();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fixation-duration analysis of eye-tracking recordings"};
    app.require_subcommand(1);

    // extract
    auto* extract = app.add_subcommand("extract", "Detect fixations in a gaze CSV");
    std::string ex_in, ex_out;
    DetectorConfig det;
    std::optional<double> ex_rate, ex_threshold;
    std::string ex_smoothing = "median3";
    bool ex_lenient = false;
    extract->add_option("--in", ex_in, "Gaze CSV")->required();
    extract->add_option("--out", ex_out, "Fixation CSV to write")->required();
    extract->add_option("--min-fix-ms", det.min_fixation_ms, "Minimum fixation duration");
    extract->add_option("--max-gap-ms", det.max_interpolate_gap_ms, "Longest gap that is interpolated");
    extract->add_option("--merge-gap-ms", det.merge_gap_ms, "Merge fixations separated by at most this");
    extract->add_option("--merge-dist-px", det.merge_dist_px, "... and whose centroids are this close");
    extract->add_option("--fallback-velocity", det.fallback_velocity_px_per_s, "Threshold when estimation fails (px/s)");
    extract->add_option("--threshold", ex_threshold, "Fixed velocity threshold (px/s); skips estimation");
    extract->add_option("--smoothing", ex_smoothing, "none or median3")->check(CLI::IsMember({"none", "median3"}));
    extract->add_option("--rate", ex_rate, "Override the recording's nominal rate (Hz)");
    extract->add_flag("--lenient", ex_lenient, "Drop malformed rows instead of failing");

    // analyze / compare
    auto* analyze = app.add_subcommand("analyze", "Describe fixation-duration distributions");
    std::vector<std::string> an_inputs;
    std::string an_bandwidth = "30", an_out, an_svg, an_model;
    analyze->add_option("--fixations", an_inputs, "Fixation CSV files")->required();
    analyze->add_option("--bandwidth", an_bandwidth, "KDE bandwidth in ms, or 'sj'");
    analyze->add_option("--out", an_out, "Report JSON (default: standard output)");
    analyze->add_option("--svg", an_svg, "Directory for density.svg and vincentiles.svg");
    analyze->add_option("--model", an_model, "Skill model JSON for per-session estimates");

    auto* compare = app.add_subcommand("compare", "Cohort tests across skill groups");
    std::vector<std::string> cmp_inputs;
    std::string cmp_out;
    double cmp_alpha = 0.05;
    compare->add_option("--fixations", cmp_inputs, "Fixation CSV files with #skill metadata")->required();
    compare->add_option("--alpha", cmp_alpha, "Scheffe family-wise alpha");
    compare->add_option("--out", cmp_out, "Output JSON (default: standard output)");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Generate synthetic gaze sessions");
    std::vector<std::string> sim_profiles;
    std::size_t sim_subjects = 1;
    std::uint64_t sim_seed = 1;
    std::string sim_outdir;
    std::optional<double> sim_rate, sim_session_s;
    simulate->add_option("--profile", sim_profiles, "Built-in name (low, high, pro) or profile JSON; repeatable")->required();
    simulate->add_option("--subjects", sim_subjects, "Subjects per profile");
    simulate->add_option("--seed", sim_seed, "Master seed");
    simulate->add_option("--outdir", sim_outdir, "Output directory")->required();
    simulate->add_option("--rate", sim_rate, "Override sampling rate (Hz)");
    simulate->add_option("--session-s", sim_session_s, "Override session length (s)");

    // fit / classify
    auto* fitc = app.add_subcommand("fit", "Fit the skill classifier on labelled fixation files");
    std::vector<std::string> fit_inputs;
    std::string fit_out;
    fitc->add_option("--fixations", fit_inputs, "Fixation CSV files with #skill metadata")->required();
    fitc->add_option("--out", fit_out, "Model JSON")->required();

    auto* classifyc = app.add_subcommand("classify", "Estimate the skill level of one session");
    std::string cl_model, cl_input;
    classifyc->add_option("--model", cl_model, "Model JSON")->required();
    classifyc->add_option("--fixations", cl_input, "Fixation CSV")->required();

    // report
    auto* reportc = app.add_subcommand("report", "Recompute a report from its inputs and check it");
    std::string rp_in, rp_out, rp_svg, rp_model;
    reportc->add_option("--in", rp_in, "Report JSON written by analyze")->required();
    reportc->add_option("--out", rp_out, "Write the recomputed report here");
    reportc->add_option("--svg", rp_svg, "Directory for regenerated SVG plots");
    reportc->add_option("--model", rp_model, "Skill model used for the original report");

    // serve
    auto* serve = app.add_subcommand("serve", "Serve live sessions over TCP");
    std::string sv_listen = "127.0.0.1:7878", sv_model;
    bool sv_fixed = false;
    std::optional<double> sv_threshold, sv_window_s;
    serve->add_option("--listen", sv_listen, "host:port");
    serve->add_option("--model", sv_model, "Skill model JSON");
    serve->add_flag("--no-reestimate", sv_fixed, "Keep the velocity threshold fixed");
    serve->add_option("--threshold", sv_threshold, "Fixed/initial velocity threshold (px/s)");
    serve->add_option("--window-s", sv_window_s, "Feature window (s); default whole session");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*extract) {
            auto parsed = parse_gaze_csv(read_file(ex_in), ex_lenient ? HeaderPolicy::Lenient : HeaderPolicy::Strict);
            if (parsed.rows_dropped > 0) std::cerr << ex_in << ": dropped " << parsed.rows_dropped << " malformed rows\n";
            if (ex_rate) parsed.recording.nominal_rate_hz = *ex_rate;
            det.smoothing = ex_smoothing == "none" ? Smoothing::None : Smoothing::Median3;
            det.velocity_threshold_px_per_s = ex_threshold;
            const auto result = detect_fixations_ex(parsed.recording, det);
            std::cerr << ex_in << ": " << result.fixations.size() << " fixations, threshold "
                      << format_number(result.velocity_threshold_px_per_s) << " px/s\n";
            write_file(ex_out, write_fixation_csv(result.fixations,
                                                  FixationFileMeta{parsed.recording.subject_id, parsed.recording.skill_label}));
            return 0;
        }

        if (*analyze) {
            const auto paths = sorted(an_inputs);
            const auto config = analysis_config(an_bandwidth);
            const auto model = load_model(an_model);
            const auto sessions = map_inputs(paths, [&](const std::string& p) { return analyze_file(p, config, model.get()); });
            const auto report = report_to_json(config, sessions, cohort_tests(sessions));
            const std::string text = write_report_json(report);
            if (an_out.empty()) std::cout << text;
            else write_file(an_out, text);
            if (!an_svg.empty()) write_svgs(an_svg, paths, sessions, config);
            return 0;
        }

        if (*compare) {
            const auto paths = sorted(cmp_inputs);
            const AnalysisConfig config;
            const auto sessions = map_inputs(paths, [&](const std::string& p) { return analyze_file(p, config, nullptr); });
            const auto tests = cohort_tests(sessions, cmp_alpha);
            if (!tests) throw Error(Errc::TooFewGroups, "need fixation files from at least two labelled skill groups");
            const std::string text = to_json(*tests).dump(2) + "\n";
            if (cmp_out.empty()) std::cout << text;
            else write_file(cmp_out, text);
            return 0;
        }

        if (*simulate) {
            std::vector<CohortGroup> groups;
            for (const auto& name : sim_profiles) {
                auto p = resolve_profile(name);
                if (sim_rate) p.rate_hz = *sim_rate;
                if (sim_session_s) p.session_s = *sim_session_s;
                groups.push_back(CohortGroup{p, sim_subjects});
            }
            const auto cohort = gen_cohort(groups, sim_seed);
            for (const auto& ls : cohort) {
                const auto& id = ls.session.recording.subject_id;
                write_file((fs::path(sim_outdir) / (id + ".csv")).string(), write_gaze_csv(ls.session.recording));
                write_file((fs::path(sim_outdir) / (id + ".truth.csv")).string(), truth_csv(ls.session.truth));
            }
            std::cerr << "wrote " << cohort.size() << " sessions to " << sim_outdir << "\n";
            return 0;
        }

        if (*fitc) {
            const auto paths = sorted(fit_inputs);
            auto rows = map_inputs(paths, [](const std::string& p) {
                const auto file = read_fixation_csv(read_file(p));
                if (!file.meta.skill_label) throw Error(Errc::InvalidArgument, "missing #skill metadata");
                return std::make_pair(extract_features(durations_of(file.fixations, file.meta.subject_id)), *file.meta.skill_label);
            });
            const auto model = fit(rows);
            write_file(fit_out, model_to_json(model).dump(2) + "\n");
            const auto dropped = model.dropped_features();
            if (!dropped.empty()) {
                std::cerr << "dropped zero-variance features:";
                for (const auto& d : dropped) std::cerr << ' ' << d;
                std::cerr << "\n";
            }
            return 0;
        }

        if (*classifyc) {
            const auto model = load_model(cl_model);
            const auto file = read_fixation_csv(read_file(cl_input));
            const auto est = classify(extract_features(durations_of(file.fixations, file.meta.subject_id)), *model);
            nlohmann::json scores = nlohmann::json::object();
            for (const auto& [c, v] : est.scores) scores[std::string(to_string(c))] = v;
            std::cout << nlohmann::json{{"skill", std::string(to_string(est.label))}, {"scores", scores}}.dump() << "\n";
            return 0;
        }

        if (*reportc) {
            const auto old = read_json(rp_in);
            if (!old.contains("schema") || old["schema"] != kReportSchema)
                throw Error(Errc::InvalidArgument, "unsupported report schema");
            const auto config = config_from_json(old.at("config"));
            std::vector<std::string> paths;
            for (const auto& s : old.at("sessions")) paths.push_back(s.at("source").get<std::string>());
            const auto model = load_model(rp_model);
            const auto sessions = map_inputs(paths, [&](const std::string& p) { return analyze_file(p, config, model.get()); });
            const auto fresh = report_to_json(config, sessions, cohort_tests(sessions));
            if (!rp_out.empty()) write_file(rp_out, write_report_json(fresh));
            if (!rp_svg.empty()) write_svgs(rp_svg, paths, sessions, config);
            const double diff = max_numeric_difference(old, fresh);
            std::cout << nlohmann::json{{"sessions", paths.size()}, {"max_difference", diff}, {"consistent", diff <= 1e-12}}.dump()
                      << "\n";
            if (diff > 1e-12) {
                std::cerr << rp_in << ": report does not match its inputs\n";
                return 2;
            }
            return 0;
        }

        if (*serve) {
            StreamConfig config;
            config.reestimate = !sv_fixed;
            config.detector.velocity_threshold_px_per_s = sv_threshold;
            if (sv_window_s) config.window_ms = *sv_window_s * 1000.0;
            validate(config);
            const auto model = load_model(sv_model);
            const auto [host, port] = parse_listen_address(sv_listen);
            TcpServer server(host, port, [config, model] { return ProtocolHandler(config, model); });
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on " << host << ":" << server.port() << "\n";
            server.run();
            g_server = nullptr;
            server.stop();
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what();
        if (e.line()) std::cerr << " (line " << *e.line() << ")";
        std::cerr << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
