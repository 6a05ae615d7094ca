// kfp: command-line front end.  Exit status 0 when every check passes, 1 when
// a check fails, 2 on configuration or usage errors.

#include "kfp/analysis.hpp"
#include "kfp/barriers.hpp"
#include "kfp/config.hpp"
#include "kfp/errors.hpp"
#include "kfp/scenario.hpp"
#include "kfp/specfun.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace {

using nlohmann::json;
namespace sc = kfp::scenario;
namespace fs = std::filesystem;

struct Common {
    std::string config;
    std::string out;
    std::string format = "json";
    std::uint64_t seed = 0;
    bool seed_given = false;
};

void add_common(CLI::App* app, Common& c, bool config_required)
{
    auto* opt = app->add_option("--config", c.config, "scenario file");
    if (config_required) opt->required();
    app->add_option("--seed", c.seed, "override every seed in the scenario")
        ->each([&c](const std::string&) { c.seed_given = true; });
    app->add_option("--out", c.out, "artifact directory");
    app->add_option("--format", c.format, "stdout format")->check(CLI::IsMember({"csv", "json"}));
}

// Scenario from --config, or a minimal one naming `pipeline` when no file is given.
kfp::config::Scenario scenario_for(const Common& c, const std::string& pipeline)
{
    kfp::config::Scenario s = c.config.empty()
                                  ? kfp::config::parse_scenario("[scenario]\nname = " + pipeline +
                                                                "\npipeline = " + pipeline + "\n")
                                  : kfp::config::load_scenario(c.config);
    if (!pipeline.empty()) s.pipeline = pipeline;
    if (c.seed_given) kfp::config::override_seed(s, c.seed);
    return s;
}

void print_result(const kfp::config::Scenario& s, const sc::ScenarioResult& r, const std::string& format)
{
    if (format == "json") {
        std::cout << sc::emit_report(s, r).dump(2) << '\n';
        return;
    }
    std::cout << "check,pass,value,limit\n";
    for (const auto& ch : r.checks)
        std::cout << ch.name << ',' << (ch.pass ? "true" : "false") << ',' << sc::CsvWriter::fmt(ch.value)
                  << ',' << sc::CsvWriter::fmt(ch.limit) << '\n';
}

int run_and_print(const Common& c, const std::string& pipeline)
{
    const auto s = scenario_for(c, pipeline);
    const auto r = sc::run_scenario(s, c.out);
    print_result(s, r, c.format);
    return r.pass() ? 0 : 1;
}

// Reads a CSV with a header row into named columns.
std::map<std::string, std::vector<double>> read_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw kfp::ConfigError("cannot open '" + path + "'");
    std::string line;
    std::getline(in, line);
    std::vector<std::string> names;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) names.push_back(cell);
    }
    std::map<std::string, std::vector<double>> cols;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t k = 0; k < names.size() && std::getline(ss, cell, ','); ++k) {
            try {
                cols[names[k]].push_back(std::stod(cell));
            } catch (const std::exception&) {
                cols[names[k]].push_back(std::numeric_limits<double>::quiet_NaN());
            }
        }
    }
    return cols;
}

int analyze(const std::string& input, const std::string& out, double rel_var, const std::string& format)
{
    const auto cols = read_csv(input);
    json rep = {{"tool_version", sc::kToolVersion}, {"input", input}};
    std::vector<double> t, y;
    if (cols.count("t") && cols.count("mass")) {
        t = cols.at("t");
        y = cols.at("mass");
    } else if (cols.count("t") && cols.count("alive_frac")) {
        t = cols.at("t");
        for (std::size_t k = 0; k < cols.at("alive_frac").size(); ++k)
            if (cols.at("alive_frac")[k] > 0.0) y.push_back(cols.at("alive_frac")[k]);
        t.resize(y.size());
    } else {
        throw kfp::ConfigError(input + ": expected columns t,mass or t,alive_frac");
    }
    const auto d = kfp::analysis::fit_exponential_auto(t, y, rel_var);
    rep["decay"] = {{"kappa", d.kappa}, {"stderr", d.stderr_}, {"r2", d.r2},
                    {"t_lo", d.t_lo},   {"t_hi", d.t_hi},      {"points", d.points}};
    std::vector<double> lt, ly;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (t[k] > 0.0 && y[k] > 0.0) {
            lt.push_back(std::log(t[k]));
            ly.push_back(std::log(y[k]));
        }
    if (lt.size() >= 2) {
        const auto lf = kfp::analysis::fit_line(lt, ly);
        rep["power_law"] = {{"exponent", lf.slope}, {"stderr", lf.slope_se}, {"r2", lf.r2}};
    }
    if (!out.empty()) {
        fs::create_directories(out);
        std::ofstream(fs::path(out) / "report.json") << rep.dump(2) << '\n';
    }
    if (format == "json")
        std::cout << rep.dump(2) << '\n';
    else
        std::cout << "kappa,stderr,r2,t_lo,t_hi\n"
                  << sc::CsvWriter::fmt(d.kappa) << ',' << sc::CsvWriter::fmt(d.stderr_) << ','
                  << sc::CsvWriter::fmt(d.r2) << ',' << sc::CsvWriter::fmt(d.t_lo) << ','
                  << sc::CsvWriter::fmt(d.t_hi) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"kinetic Fokker-Planck solvers, oracles and checks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(sc::kToolVersion));

    Common run_c, solve_c, mc_c, lim_c, lam_c, cmp_c;
    auto* run = app.add_subcommand("run", "run the pipeline named in a scenario file");
    add_common(run, run_c, true);
    auto* solve = app.add_subcommand("solve", "grid solve of a scenario");
    add_common(solve, solve_c, true);
    auto* mcs = app.add_subcommand("mc", "Monte Carlo run of a scenario");
    add_common(mcs, mc_c, true);

    auto* kern = app.add_subcommand("kernel", "fundamental-solution tools");
    kern->require_subcommand(1);
    auto* lim = kern->add_subcommand("check-limit", "boundary-limit identity");
    add_common(lim, lim_c, false);
    auto* lam = kern->add_subcommand("solve-lambda", "boundary density by Picard iteration");
    add_common(lam, lam_c, false);

    auto* sf = app.add_subcommand("specfun", "special functions");
    sf->require_subcommand(1);
    auto* ev = sf->add_subcommand("eval", "evaluate one function");
    std::string fn = "lambda";
    double a = 0.0, b = 2.0 / 3.0, z = 0.0, alpha = kfp::specfun::kDefaultAlpha;
    std::string ev_format = "json";
    ev->add_option("--fn", fn, "gamma | rgamma | kummer_m | tricomi_u | lambda | lambda_deriv | k_plus")
        ->check(CLI::IsMember({"gamma", "rgamma", "kummer_m", "tricomi_u", "lambda", "lambda_deriv", "k_plus"}));
    ev->add_option("-a", a, "first parameter");
    ev->add_option("-b", b, "second parameter");
    ev->add_option("-z", z, "argument (zeta for lambda)");
    ev->add_option("--alpha", alpha, "profile exponent");
    ev->add_option("--format", ev_format)->check(CLI::IsMember({"csv", "json"}));

    auto* bar = app.add_subcommand("barriers", "comparison functions");
    bar->require_subcommand(1);
    auto* z0c = bar->add_subcommand("build-z0", "build and validate the self-similar super-solution");
    double z0_alpha = kfp::specfun::kDefaultAlpha;
    std::string z0_format = "json";
    z0c->add_option("--alpha", z0_alpha, "profile exponent");
    z0c->add_option("--format", z0_format)->check(CLI::IsMember({"csv", "json"}));
    auto* cmp = bar->add_subcommand("check-compare", "solver run against the super-solution");
    add_common(cmp, cmp_c, false);

    auto* an = app.add_subcommand("analyze", "fits on a mass.csv or survival.csv");
    std::string an_in, an_out, an_format = "json";
    double rel_var = 0.05;
    an->add_option("--input", an_in, "CSV from solve or mc")->required();
    an->add_option("--out", an_out, "directory for report.json");
    an->add_option("--rel-var", rel_var, "window flatness for the decay fit");
    an->add_option("--format", an_format)->check(CLI::IsMember({"csv", "json"}));

    auto* batch = app.add_subcommand("batch", "run several scenario files");
    std::vector<std::string> files;
    std::string batch_out;
    batch->add_option("configs", files, "scenario files")->required();
    batch->add_option("--out", batch_out, "parent directory; one subdirectory per scenario");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return run_and_print(run_c, kfp::config::load_scenario(run_c.config).pipeline);
        if (*solve) return run_and_print(solve_c, "solve");
        if (*mcs) return run_and_print(mc_c, "mc");
        if (*lim) return run_and_print(lim_c, "boundary-limit");
        if (*lam) return run_and_print(lam_c, "boundary-density");
        if (*cmp) return run_and_print(cmp_c, "compare-fhat");
        if (*ev) {
            namespace f = kfp::specfun;
            double val = 0.0;
            if (fn == "gamma") val = f::gamma_fn(z);
            else if (fn == "rgamma") val = f::rgamma(z);
            else if (fn == "kummer_m") val = f::kummer_m(a, b, z);
            else if (fn == "tricomi_u") val = f::tricomi_u(a, b, z);
            else if (fn == "lambda") val = f::lambda_profile(alpha, z);
            else if (fn == "lambda_deriv") val = f::lambda_profile_deriv(alpha, z);
            else val = f::k_plus(alpha);
            if (ev_format == "json")
                std::cout << json{{"fn", fn}, {"a", a}, {"b", b}, {"z", z}, {"alpha", alpha}, {"value", val}}.dump()
                          << '\n';
            else
                std::cout << "fn,value\n" << fn << ',' << sc::CsvWriter::fmt(val) << '\n';
            return 0;
        }
        if (*z0c) {
            const kfp::barriers::SelfSimilarProfile prof(z0_alpha);
            const kfp::barriers::SuperSolutionZ0 z0(prof);
            const auto& w = z0.worst_sample();
            const json rep = {{"alpha", z0.alpha()},
                              {"gamma", z0.gamma()},
                              {"r_max", z0.r_max()},
                              {"K", z0.k_cap()},
                              {"worst_ratio", z0.worst_ratio()},
                              {"worst_margin", z0.worst_margin()},
                              {"worst_sample", {{"y", w.y}, {"xi", w.xi}}}};
            if (z0_format == "json")
                std::cout << rep.dump(2) << '\n';
            else
                std::cout << "alpha,r_max,K,worst_ratio,worst_margin\n"
                          << sc::CsvWriter::fmt(z0.alpha()) << ',' << sc::CsvWriter::fmt(z0.r_max()) << ','
                          << sc::CsvWriter::fmt(z0.k_cap()) << ',' << sc::CsvWriter::fmt(z0.worst_ratio())
                          << ',' << sc::CsvWriter::fmt(z0.worst_margin()) << '\n';
            return 0;
        }
        if (*an) return analyze(an_in, an_out, rel_var, an_format);
        if (*batch) {
            // names must be unique: they become the output subdirectories
            std::vector<kfp::config::Scenario> all;
            std::set<std::string> names;
            for (const auto& p : files) {
                all.push_back(kfp::config::load_scenario(p));
                if (!names.insert(all.back().name).second)
                    throw kfp::ConfigError(p + ": duplicate scenario name '" + all.back().name + "'");
            }
            int status = 0;
            for (const auto& s : all) {
                const auto r = sc::run_scenario(s, batch_out.empty() ? "" : (fs::path(batch_out) / s.name).string());
                std::cout << (r.pass() ? "PASS " : "FAIL ") << s.name << '\n';
                if (!r.pass()) status = 1;
            }
            return status;
        }
    } catch (const kfp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
