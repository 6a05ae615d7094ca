#pragma once

// Scenario pipelines: solve / Monte Carlo / checks, with CSV and JSON output.

#include "kfp/config.hpp"

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace kfp::scenario {

inline constexpr const char* kToolVersion = "0.1.0";

struct Check {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double limit = 0.0;
    std::string detail;
};

struct ScenarioResult {
    std::string name;
    std::vector<Check> checks;
    nlohmann::json report = nlohmann::json::object();  // fitted constants, margins, series
    bool pass() const;
};

// Runs the pipeline named in the scenario.  When out_dir is non-empty the
// CSV artifacts and report.json are written there.  Configuration and
// numerical errors become failed checks rather than exceptions.
ScenarioResult run_scenario(const config::Scenario& s, const std::string& out_dir = "");

// Single JSON document: config echo, results, pass/fail per check, version, seed.
nlohmann::json emit_report(const config::Scenario& s, const ScenarioResult& r);
nlohmann::json config_echo(const config::Scenario& s);

// Known pipeline names.
std::vector<std::string> pipelines();

// Fixed-format CSV (17 significant digits, LF line endings).
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    void row(const std::vector<double>& values);
    void row_mixed(const std::vector<std::string>& cells);
    static std::string fmt(double v);

private:
    std::ofstream out_;
    std::size_t columns_;
};

}  // namespace kfp::scenario
