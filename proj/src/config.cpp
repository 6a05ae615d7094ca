#include "kfp/config.hpp"

#include "kfp/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace kfp::config {

namespace pt = boost::property_tree;

std::vector<double> parse_list(const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto a = item.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        const auto b = item.find_last_not_of(" \t");
        const std::string tok = item.substr(a, b - a + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size()) throw ConfigError("not a number in list: '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

namespace {

const std::set<std::string> kSolverKeys = {"scheme", "nx", "nv", "vmax", "x_grading", "v_grading",
                                           "eps", "cfl", "dt", "t_end", "snapshots", "series_every"};
const std::set<std::string> kInitKeys = {"kind", "x0", "v0", "sx", "sv", "amplitude",
                                         "radius", "edge", "seed", "blobs"};
const std::set<std::string> kMcKeys = {"geometry", "scheme", "dt", "dt_max", "adapt_frac",
                                       "n", "t_end", "noise_scale", "times"};
const std::set<std::string> kScenarioKeys = {"name", "pipeline", "seed"};

void check_keys(const pt::ptree& root, const std::string& section, const std::set<std::string>& allowed,
                const std::string& origin)
{
    const auto sec = root.get_child_optional(section);
    if (!sec) return;
    for (const auto& kv : *sec)
        if (!allowed.count(kv.first))
            throw ConfigError(origin + ": unknown field '" + section + "." + kv.first + "'");
}

template <class T>
void read(const pt::ptree& root, const std::string& path, T& target, const std::string& origin)
{
    const auto v = root.get_optional<std::string>(path);
    if (!v) return;
    try {
        target = root.get<T>(path);
    } catch (const pt::ptree_bad_data&) {
        throw ConfigError(origin + ": field '" + path + "' has bad value '" + *v + "'");
    }
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin)
{
    pt::ptree root;
    std::istringstream in(text);
    try {
        pt::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(origin + ": line " + std::to_string(e.line()) + ": " + e.message());
    }
    check_keys(root, "scenario", kScenarioKeys, origin);
    check_keys(root, "solver", kSolverKeys, origin);
    check_keys(root, "initial", kInitKeys, origin);
    check_keys(root, "mc", kMcKeys, origin);
    for (const auto& kv : root)
        if (kv.first != "scenario" && kv.first != "solver" && kv.first != "initial" && kv.first != "mc" &&
            kv.first != "analysis")
            throw ConfigError(origin + ": unknown section '" + kv.first + "'");

    Scenario s;
    s.raw = root;
    s.name = root.get<std::string>("scenario.name", "");
    s.pipeline = root.get<std::string>("scenario.pipeline", "");
    if (s.name.empty()) throw ConfigError(origin + ": missing field 'scenario.name'");
    if (s.pipeline.empty()) throw ConfigError(origin + ": missing field 'scenario.pipeline'");
    read(root, "scenario.seed", s.seed, origin);

    auto& c = s.solver;
    read(root, "solver.scheme", c.scheme, origin);
    read(root, "solver.nx", c.grid.nx, origin);
    read(root, "solver.nv", c.grid.nv, origin);
    read(root, "solver.vmax", c.grid.vmax, origin);
    read(root, "solver.x_grading", c.grid.x_grading, origin);
    read(root, "solver.v_grading", c.grid.v_grading, origin);
    read(root, "solver.eps", c.eps, origin);
    read(root, "solver.cfl", c.cfl, origin);
    read(root, "solver.dt", c.dt, origin);
    read(root, "solver.t_end", c.t_end, origin);
    read(root, "solver.series_every", c.series_every, origin);
    try {
        if (auto v = root.get_optional<std::string>("solver.snapshots")) c.snapshot_times = parse_list(*v);
        if (auto v = root.get_optional<std::string>("mc.times")) s.mc_times = parse_list(*v);
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    }

    auto& d = s.init;
    read(root, "initial.kind", d.kind, origin);
    read(root, "initial.x0", d.x0, origin);
    read(root, "initial.v0", d.v0, origin);
    read(root, "initial.sx", d.sx, origin);
    read(root, "initial.sv", d.sv, origin);
    read(root, "initial.amplitude", d.amplitude, origin);
    read(root, "initial.radius", d.radius, origin);
    read(root, "initial.edge", d.edge, origin);
    read(root, "initial.seed", d.seed, origin);
    read(root, "initial.blobs", d.blobs, origin);

    auto& m = s.mc;
    read(root, "mc.geometry", m.geometry, origin);
    read(root, "mc.scheme", m.scheme, origin);
    read(root, "mc.dt", m.dt, origin);
    read(root, "mc.dt_max", m.dt_max, origin);
    read(root, "mc.adapt_frac", m.adapt_frac, origin);
    read(root, "mc.n", m.n, origin);
    read(root, "mc.t_end", m.t_end, origin);
    read(root, "mc.noise_scale", m.noise_scale, origin);
    m.seed = s.seed;
    m.threads = thread_count();

    if (auto a = root.get_child_optional("analysis")) s.analysis = *a;
    return s;
}

Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path);
}

void override_seed(Scenario& s, std::uint64_t seed)
{
    s.seed = seed;
    s.mc.seed = seed;
    s.init.seed = static_cast<unsigned>(seed);
    s.raw.put("scenario.seed", seed);
}

double Scenario::num(const std::string& key, double fallback) const
{
    const auto v = analysis.get_optional<std::string>(key);
    if (!v) return fallback;
    try {
        return analysis.get<double>(key);
    } catch (const pt::ptree_bad_data&) {
        throw ConfigError(name + ": field 'analysis." + key + "' has bad value '" + *v + "'");
    }
}

std::string Scenario::str(const std::string& key, const std::string& fallback) const
{
    return analysis.get<std::string>(key, fallback);
}

std::vector<double> Scenario::list(const std::string& key, const std::vector<double>& fallback) const
{
    const auto v = analysis.get_optional<std::string>(key);
    return v ? parse_list(*v) : fallback;
}

int thread_count()
{
    const char* e = std::getenv("KFP_THREADS");
    if (!e) return 1;
    const int n = std::atoi(e);
    return n > 0 ? n : 1;
}

}  // namespace kfp::config
