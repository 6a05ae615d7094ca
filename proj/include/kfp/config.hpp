#pragma once

// Scenario files: INI text with [scenario], [solver], [initial], [mc] and
// [analysis] sections.  Unknown keys in the typed sections are rejected so
// typos do not silently fall back to defaults.

#include "kfp/grid_solver.hpp"
#include "kfp/particle_mc.hpp"

#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace kfp::config {

struct Scenario {
    std::string name;
    std::string pipeline;
    std::uint64_t seed = 1;
    solver::SolverConfig solver;
    solver::InitialData init;
    mc::McConfig mc;
    std::vector<double> mc_times;  // survival sample times
    boost::property_tree::ptree analysis;  // free-form numeric keys
    boost::property_tree::ptree raw;       // the file as read, for the report echo

    double num(const std::string& key, double fallback) const;
    std::string str(const std::string& key, const std::string& fallback) const;
    std::vector<double> list(const std::string& key, const std::vector<double>& fallback) const;
};

Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>");
Scenario load_scenario(const std::string& path);

// Replaces every seed in the scenario (initial data, MC stream, scenario).
void override_seed(Scenario& s, std::uint64_t seed);

// Threads for Monte Carlo, from KFP_THREADS (default 1).
int thread_count();

std::vector<double> parse_list(const std::string& text);

}  // namespace kfp::config
