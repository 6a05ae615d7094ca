// Acceptance runner: kfp_acceptance <1-12 | all>.  Runs the named scenario
// for each criterion, writes its artifacts, and prints one PASS/FAIL line per
// criterion followed by the failing checks.

#include "kfp/config.hpp"
#include "kfp/scenario.hpp"

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

struct Criterion {
    int id;
    const char* scenario;
    const char* what;
};

const std::vector<Criterion> kCriteria = {
    {1, "mp-suite", "maximum principle, positivity and mass monotonicity"},
    {2, "solver-vs-mc", "grid survival within 3 standard errors of Monte Carlo"},
    {3, "decay", "exponential mass decay, grid and Monte Carlo rates agree"},
    {4, "half-line", "half-line survival exponent near -1/4"},
    {5, "kernel", "fundamental solution: mass, PDE residual, composition"},
    {6, "boundary-limit", "boundary-limit identity as x -> 0"},
    {7, "boundary-density", "boundary density by contracting Picard iteration"},
    {8, "specfun", "Kummer and profile equations, positivity, asymptotics"},
    {9, "compare-fhat", "solver stays below the self-similar super-solution"},
    {10, "holder", "Holder exponents at the grazing point"},
    {11, "sequence-lemma", "geometric decay of lemma sequences"},
    {12, "escape", "escape of mass through the sub-solution"},
};

bool run_one(const Criterion& c)
{
    namespace fs = std::filesystem;
    const std::string cfg = std::string(KFP_SCENARIO_DIR) + "/" + c.scenario + ".cfg";
    const fs::path out = fs::path(KFP_ARTIFACT_DIR) / c.scenario;
    const auto t0 = std::chrono::steady_clock::now();
    kfp::scenario::ScenarioResult r;
    try {
        fs::create_directories(out);
        r = kfp::scenario::run_scenario(kfp::config::load_scenario(cfg), out.string());
    } catch (const std::exception& e) {
        r.checks.push_back({"load", false, 0.0, 0.0, e.what()});
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %02d %s: %s (%zu checks, %.1f s)\n", r.pass() ? "PASS" : "FAIL", c.id, c.scenario, c.what,
                r.checks.size(), secs);
    for (const auto& ch : r.checks)
        if (!ch.pass)
            std::printf("    failed %s: value %.6g limit %.6g %s\n", ch.name.c_str(), ch.value, ch.limit,
                        ch.detail.c_str());
    std::fflush(stdout);
    return r.pass();
}

}  // namespace

int main(int argc, char** argv)
{
    if (argc != 2) {
        std::cerr << "usage: kfp_acceptance <1-12|all>\n";
        return 2;
    }
    const std::string arg = argv[1];
    std::vector<Criterion> todo;
    if (arg == "all") {
        todo = kCriteria;
    } else {
        int id = 0;
        try {
            id = std::stoi(arg);
        } catch (const std::exception&) {
        }
        for (const auto& c : kCriteria)
            if (c.id == id) todo.push_back(c);
        if (todo.empty()) {
            std::cerr << "kfp_acceptance: unknown criterion '" << arg << "'\n";
            return 2;
        }
    }
    int failed = 0;
    for (const auto& c : todo) failed += !run_one(c);
    if (todo.size() > 1) std::printf("%zu/%zu criteria pass\n", todo.size() - failed, todo.size());
    return failed == 0 ? 0 : 1;
}
