#include "kfp/config.hpp"
#include "kfp/errors.hpp"
#include "kfp/scenario.hpp"

#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace kfp;
namespace fs = std::filesystem;

namespace {

std::string scenario_path(const std::string& name) { return std::string(KFP_SCENARIO_DIR) + "/" + name + ".cfg"; }

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name)
{
    const fs::path d = fs::path(KFP_TEST_TMP) / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

struct Proc {
    int status = -1;
    std::string out;
};

Proc run_cli(const std::string& args)
{
    Proc p;
    const std::string cmd = std::string(KFP_CLI) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    while (std::fgets(buf, sizeof buf, pipe)) p.out += buf;
    const int st = pclose(pipe);
    p.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return p;
}

}  // namespace

TEST_CASE("config: parse errors name the line or the field")
{
    CHECK_THROWS_WITH_AS(config::parse_scenario("[scenario]\nname = a\npipeline = solve\nthis is not ini\n", "x.cfg"),
                         doctest::Contains("line 4"), ConfigError);
    CHECK_THROWS_WITH_AS(config::parse_scenario("[scenario]\nname = a\npipeline = solve\n[solver]\nnxx = 3\n", "x.cfg"),
                         doctest::Contains("solver.nxx"), ConfigError);
    CHECK_THROWS_WITH_AS(config::parse_scenario("[scenario]\nname = a\npipeline = solve\n[solver]\nnx = many\n", "x.cfg"),
                         doctest::Contains("solver.nx"), ConfigError);
    CHECK_THROWS_WITH_AS(config::parse_scenario("[scenario]\npipeline = solve\n"), doctest::Contains("scenario.name"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(config::parse_scenario("[scenario]\nname = a\npipeline = solve\n[bogus]\nk = 1\n"),
                         doctest::Contains("bogus"), ConfigError);
    CHECK_THROWS_AS(config::load_scenario("/nonexistent/file.cfg"), ConfigError);
    CHECK(config::parse_list("0, 0.5,1e-3") == std::vector<double>{0.0, 0.5, 1e-3});
    CHECK_THROWS_AS(config::parse_list("1, two"), ConfigError);
}

TEST_CASE("config: every shipped scenario parses and names a known pipeline")
{
    const auto known = scenario::pipelines();
    int n = 0;
    for (const auto& e : fs::directory_iterator(KFP_SCENARIO_DIR)) {
        if (e.path().extension() != ".cfg") continue;
        CAPTURE(e.path().string());
        const auto s = config::load_scenario(e.path().string());
        CHECK(s.name == e.path().stem().string());
        CHECK(std::find(known.begin(), known.end(), s.pipeline) != known.end());
        ++n;
    }
    CHECK(n >= 12);
}

TEST_CASE("report: config echo round-trips and the document is valid JSON")
{
    auto s = config::load_scenario(scenario_path("smoke"));
    const auto echo = scenario::config_echo(s);
    CHECK(echo["solver"]["nx"] == "32");
    CHECK(echo["initial"]["kind"] == "gaussian");
    // re-serialise the echo as INI and parse it again
    std::string ini;
    for (const auto& [sec, kv] : echo.items()) {
        ini += "[" + sec + "]\n";
        for (const auto& [k, v] : kv.items()) ini += k + " = " + v.get<std::string>() + "\n";
    }
    const auto back = config::parse_scenario(ini);
    CHECK(scenario::config_echo(back) == echo);
    CHECK(back.solver.grid.nx == s.solver.grid.nx);
    CHECK(back.solver.snapshot_times == s.solver.snapshot_times);

    scenario::ScenarioResult empty;
    const auto doc = scenario::emit_report(s, empty);
    const auto parsed = nlohmann::json::parse(doc.dump());
    CHECK(parsed["tool_version"] == scenario::kToolVersion);
    CHECK(parsed["checks"].is_array());
    CHECK(parsed["checks"].empty());
    CHECK(parsed["pass"] == false);  // no checks is not a pass
}

TEST_CASE("seed override reaches every stream")
{
    auto s = config::load_scenario(scenario_path("mp-suite"));
    config::override_seed(s, 424242);
    CHECK(s.seed == 424242);
    CHECK(s.mc.seed == 424242);
    CHECK(s.init.seed == 424242u);
    CHECK(scenario::config_echo(s)["scenario"]["seed"] == "424242");
}

TEST_CASE("smoke writes byte-identical artifacts on repeated runs")
{
    const auto s = config::load_scenario(scenario_path("smoke"));
    const auto a = fresh_dir("smoke_a"), b = fresh_dir("smoke_b");
    const auto ra = scenario::run_scenario(s, a.string());
    const auto rb = scenario::run_scenario(s, b.string());
    CHECK(ra.pass());
    CHECK(rb.pass());
    int csv = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        if (e.path().extension() != ".csv") continue;
        CAPTURE(e.path().filename().string());
        const auto x = slurp(e.path());
        CHECK(x == slurp(b / e.path().filename()));
        CHECK(x.find('\r') == std::string::npos);
        ++csv;
    }
    CHECK(csv >= 2);
    CHECK(fs::exists(a / "report.json"));
    CHECK_NOTHROW(nlohmann::json::parse(slurp(a / "report.json")));
}

TEST_CASE("zero data passes and an over-long step fails with a CFL check")
{
    const auto z = scenario::run_scenario(config::load_scenario(scenario_path("zero-data")));
    CHECK(z.pass());
    const auto c = scenario::run_scenario(config::load_scenario(scenario_path("cfl-violation")));
    CHECK(!c.pass());
    bool named = false;
    for (const auto& ch : c.checks) named = named || (ch.name == "cfl" && ch.detail.find("CFL") != std::string::npos);
    CHECK(named);
}

TEST_CASE("an unknown pipeline is a failed check, not an exception")
{
    auto s = config::parse_scenario("[scenario]\nname = x\npipeline = teleport\n");
    scenario::ScenarioResult r;
    CHECK_NOTHROW(r = scenario::run_scenario(s));
    CHECK(!r.pass());
    REQUIRE(!r.checks.empty());
    CHECK(r.checks.front().detail.find("teleport") != std::string::npos);
}

TEST_CASE("csv number format")
{
    CHECK(scenario::CsvWriter::fmt(0.1) == "0.10000000000000001");
    CHECK(scenario::CsvWriter::fmt(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(scenario::CsvWriter::fmt(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(std::stod(scenario::CsvWriter::fmt(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("cli: exit codes and outputs")
{
    CHECK(run_cli("run --config " + scenario_path("zero-data") + " --format csv").status == 0);
    const auto cfl = run_cli("run --config " + scenario_path("cfl-violation") + " --format csv");
    CHECK(cfl.status == 1);
    CHECK(cfl.out.find("cfl,false") != std::string::npos);
    CHECK(run_cli("run --config /nonexistent.cfg").status == 2);
    CHECK(run_cli("solve --config " + scenario_path("smoke") + " --format bogus").status != 0);

    const auto ev = run_cli("specfun eval --fn gamma -z 0.5 --format csv");
    CHECK(ev.status == 0);
    CHECK(ev.out.find("1.77245385090551") != std::string::npos);

    // analyze reads the mass series written by solve
    const auto d = fresh_dir("cli_analyze");
    REQUIRE(run_cli("solve --config " + scenario_path("smoke") + " --out " + d.string()).status == 0);
    const auto an = run_cli("analyze --input " + (d / "mass.csv").string() + " --out " + d.string());
    CHECK(an.status == 0);
    CHECK(nlohmann::json::parse(slurp(d / "report.json")).contains("decay"));

    // batch refuses two scenarios with the same name
    CHECK(run_cli("batch " + scenario_path("zero-data") + " " + scenario_path("zero-data")).status == 2);
    const auto b = run_cli("batch " + scenario_path("zero-data") + " " + scenario_path("smoke"));
    CHECK(b.status == 0);
    CHECK(b.out.find("PASS zero-data") != std::string::npos);
}

TEST_CASE("cli: half-line Monte Carlo report carries the survival exponent")
{
    const auto d = fresh_dir("cli_half_line");
    // a shortened copy of the shipped scenario keeps the unit test quick
    auto text = slurp(scenario_path("half-line"));
    text.replace(text.find("n = 1000000"), 11, "n = 20000");
    text.replace(text.find("t_end = 1000"), 12, "t_end = 100");
    text.replace(text.find("fit_hi = 1000"), 13, "fit_hi = 100");
    std::ofstream(d / "short.cfg") << text;
    const auto p = run_cli("mc --config " + (d / "short.cfg").string() + " --seed 3 --out " + d.string());
    CHECK((p.status == 0 || p.status == 1));
    const auto rep = nlohmann::json::parse(slurp(d / "report.json"));
    CHECK(rep["seed"] == 3);
    CHECK(rep["results"].contains("survival_exponent"));
    CHECK(fs::exists(d / "survival.csv"));
}
