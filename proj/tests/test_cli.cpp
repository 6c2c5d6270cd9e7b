#include <gtest/gtest.h>

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gazeskill/report.hpp"
#include "gazeskill/tcp_server.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(GAZESKILL_CLI) + " " + args + " 2>/dev/null";
    Run r;
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf;
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("gazeskill_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

/// simulate -> extract -> analyze/fit/classify/compare/report in `dir`;
/// returns the stdout of the commands that print.
std::string pipeline(const fs::path& dir, int seed) {
    std::string printed;
    auto must = [&](const std::string& args) {
        const auto r = run(args);
        EXPECT_EQ(r.code, 0) << args;
        printed += r.out;
        return r.out;
    };
    must("simulate --profile low --profile high --profile " + q(fs::path(GAZESKILL_PROFILES) / "pro.json") +
         " --subjects 3 --seed " + std::to_string(seed) + " --session-s 90 --rate 60 --outdir " + q(dir / "sim"));
    std::string fix;
    for (const auto& e : fs::directory_iterator(dir / "sim")) {
        const auto name = e.path().filename().string();
        if (name.find(".truth") != std::string::npos) continue;
        const auto out = dir / "fix" / name;
        must("extract --in " + q(e.path()) + " --out " + q(out));
    }
    for (const auto& e : fs::directory_iterator(dir / "fix")) fix += " " + q(e.path());
    must("analyze --fixations" + fix + " --out " + q(dir / "report.json") + " --svg " + q(dir / "svg"));
    must("analyze --bandwidth sj --fixations" + fix);
    must("fit --fixations" + fix + " --out " + q(dir / "model.json"));
    must("classify --model " + q(dir / "model.json") + " --fixations " + q(dir / "fix" / "pro-1.csv"));
    must("compare --fixations" + fix + " --out " + q(dir / "compare.json"));
    must("report --in " + q(dir / "report.json"));
    return printed;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return files;
}

}  // namespace

TEST(Cli, MissingInputIsUsageError) {
    EXPECT_EQ(run("extract --in /nonexistent/x.csv --out /tmp/never.csv").code, 2);
    EXPECT_EQ(run("analyze --fixations /nonexistent/y.csv").code, 2);
    EXPECT_EQ(run("extract --bogus").code, 2);
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, InsufficientDataExitCode) {
    const auto dir = fresh_dir("short");
    std::ofstream(dir / "g.csv") << "t_ms,x_px,y_px,valid\n0,1,1,1\n10,1,1,1\n20,2,1,1\n";
    EXPECT_EQ(run("extract --in " + q(dir / "g.csv") + " --out " + q(dir / "f.csv")).code, 3);
    // a fixed threshold needs no estimate
    EXPECT_EQ(run("extract --threshold 800 --in " + q(dir / "g.csv") + " --out " + q(dir / "f.csv")).code, 0);
    EXPECT_EQ(run("fit --fixations " + q(dir / "f.csv") + " --out " + q(dir / "m.json")).code, 2);  // no #skill
    fs::remove_all(dir);
}

TEST(Cli, FullPipeline) {
    const auto dir = fresh_dir("pipe");
    pipeline(dir, 11);
    const auto report = json::parse(slurp(dir / "report.json"));
    EXPECT_EQ(report["sessions"].size(), 9u);
    EXPECT_EQ(report["cohort"]["groups"].size(), 3u);
    EXPECT_TRUE(report["cohort"]["mixed_anova"]["interaction"].contains("f"));
    for (const char* f : {"density.svg", "vincentiles.svg", "density_low.csv", "density_high.csv", "density_pro.csv"})
        EXPECT_TRUE(fs::exists(dir / "svg" / f)) << f;
    EXPECT_EQ(slurp(dir / "svg" / "density_low.csv").rfind("t_ms,density\n", 0), 0u);

    const auto cls = json::parse(run("classify --model " + q(dir / "model.json") + " --fixations " + q(dir / "fix" / "low-1.csv")).out);
    EXPECT_TRUE(cls["skill"].is_string());
    EXPECT_EQ(cls["scores"].size(), 3u);

    const auto cmp = json::parse(slurp(dir / "compare.json"));
    EXPECT_TRUE(cmp["anova"].contains("sd_ms"));
    EXPECT_EQ(cmp["scheffe"]["sd_ms"]["pairs"].size(), 3u);

    const auto rep = json::parse(run("report --in " + q(dir / "report.json")).out);
    EXPECT_TRUE(rep["consistent"].get<bool>());
    EXPECT_EQ(rep["max_difference"], 0.0);

    // a tampered report no longer matches its inputs
    auto tampered = report;
    tampered["sessions"][0]["stats"]["mean_ms"] = tampered["sessions"][0]["stats"]["mean_ms"].get<double>() + 1.0;
    std::ofstream(dir / "bad.json") << tampered.dump(2);
    const auto bad = run("report --in " + q(dir / "bad.json"));
    EXPECT_EQ(bad.code, 2);
    EXPECT_FALSE(json::parse(bad.out)["consistent"].get<bool>());

    // one group only: nothing to compare
    EXPECT_EQ(run("compare --fixations " + q(dir / "fix" / "low-1.csv") + " " + q(dir / "fix" / "low-2.csv")).code, 3);
    EXPECT_EQ(run("analyze --bandwidth -3 --fixations " + q(dir / "fix" / "low-1.csv")).code, 2);
    EXPECT_EQ(run("classify --model " + q(dir / "report.json") + " --fixations " + q(dir / "fix" / "low-1.csv")).code, 2);
    fs::remove_all(dir);
}

TEST(Cli, ByteIdenticalAcrossRuns) {
    const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
    const auto out_a = pipeline(a, 5), out_b = pipeline(b, 5);
    // outputs name their own paths; compare after removing the directory prefix
    auto strip = [](std::string s, const fs::path& d) {
        for (std::size_t pos; (pos = s.find(d.string())) != std::string::npos;) s.replace(pos, d.string().size(), "<dir>");
        return s;
    };
    EXPECT_EQ(strip(out_a, a), strip(out_b, b));
    const auto ta = tree(a), tb = tree(b);
    ASSERT_EQ(ta.size(), tb.size());
    for (const auto& [name, text] : ta) {
        ASSERT_TRUE(tb.count(name)) << name;
        EXPECT_TRUE(strip(text, a) == strip(tb.at(name), b)) << name;
    }
    const auto c = fresh_dir("det_c");
    run("simulate --profile pro --subjects 1 --seed 6 --session-s 30 --outdir " + q(c));
    EXPECT_NE(slurp(c / "pro-1.csv"), ta.at("sim/pro-1.csv"));
    for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST(Cli, ServeOnOccupiedPortIsNetworkError) {
    gazeskill::TcpServer holder("127.0.0.1", 0, [] { return gazeskill::ProtocolHandler{gazeskill::StreamConfig{}}; });
    EXPECT_EQ(run("serve --listen 127.0.0.1:" + std::to_string(holder.port())).code, 4);
    EXPECT_EQ(run("serve --listen nonsense").code, 2);
}

TEST(Cli, ServeAnswersAndStopsOnSignal) {
    int pipefd[2];
    ASSERT_EQ(::pipe(pipefd), 0);
    const pid_t pid = ::fork();
    ASSERT_GE(pid, 0);
    if (pid == 0) {
        ::dup2(pipefd[1], 2);
        ::close(pipefd[0]);
        ::execl(GAZESKILL_CLI, GAZESKILL_CLI, "serve", "--listen", "127.0.0.1:0", "--no-reestimate", static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(pipefd[1]);
    std::string banner;
    char ch;
    while (::read(pipefd[0], &ch, 1) == 1 && ch != '\n') banner += ch;
    const auto colon = banner.rfind(':');
    ASSERT_NE(colon, std::string::npos) << banner;
    const int port = std::stoi(banner.substr(colon + 1));

    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ASSERT_EQ(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr), 0);
    const std::string msgs = "{\"type\":\"start\",\"session_id\":\"c\"}\n{\"type\":\"end\"}\n";
    ASSERT_TRUE(gazeskill::detail::send_all(fd, msgs));
    std::string got;
    char buf[4096];
    while (std::count(got.begin(), got.end(), '\n') < 2) {
        const auto n = ::recv(fd, buf, sizeof buf, 0);
        if (n <= 0) break;
        got.append(buf, static_cast<std::size_t>(n));
    }
    std::istringstream lines(got);
    std::string l1, l2;
    std::getline(lines, l1);
    std::getline(lines, l2);
    EXPECT_EQ(json::parse(l1)["type"], "started");
    EXPECT_EQ(json::parse(l2)["type"], "report");

    ::kill(pid, SIGTERM);
    int status = 0;
    ::waitpid(pid, &status, 0);
    ::close(fd);
    ::close(pipefd[0]);
    ASSERT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), 0);
}
