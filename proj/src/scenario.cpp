#include "kfp/scenario.hpp"

#include "kfp/analysis.hpp"
#include "kfp/barriers.hpp"
#include "kfp/errors.hpp"
#include "kfp/kernel.hpp"
#include "kfp/specfun.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>

namespace kfp::scenario {

namespace fs = std::filesystem;
using nlohmann::json;

bool ScenarioResult::pass() const
{
    // a run that checked nothing has not passed anything
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), columns_(header.size())
{
    if (!out_) throw ConfigError("cannot write '" + path + "'");
    row_mixed(header);
}

void CsvWriter::row(const std::vector<double>& values)
{
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(fmt(v));
    row_mixed(cells);
}

void CsvWriter::row_mixed(const std::vector<std::string>& cells)
{
    if (cells.size() != columns_) throw ParameterError("CsvWriter: row width does not match header");
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) out_ << ',';
        out_ << cells[k];
    }
    out_ << '\n';
}

std::string CsvWriter::fmt(double v)
{
    // printf in the "C" locale: no grouping, '.' as decimal point
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> pipelines()
{
    return {"solve",        "mc",          "mp-suite",       "solver-vs-mc", "decay",
            "half-line",    "kernel",      "boundary-limit", "boundary-density",
            "specfun",      "compare-fhat", "holder",        "sequence-lemma", "escape"};
}

json config_echo(const config::Scenario& s)
{
    json out = json::object();
    for (const auto& sec : s.raw) {
        json o = json::object();
        for (const auto& kv : sec.second) o[kv.first] = kv.second.data();
        out[sec.first] = o;
    }
    return out;
}

json emit_report(const config::Scenario& s, const ScenarioResult& r)
{
    json checks = json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"name", c.name},
                          {"pass", c.pass},
                          {"value", c.value},
                          {"limit", c.limit},
                          {"detail", c.detail}});
    return {{"tool_version", kToolVersion},
            {"scenario", s.name},
            {"pipeline", s.pipeline},
            {"seed", s.seed},
            {"config", config_echo(s)},
            {"results", r.report},
            {"checks", checks},
            {"pass", r.pass()}};
}

namespace {

struct Ctx {
    const config::Scenario& s;
    std::string out;
    ScenarioResult& r;

    void check(const std::string& name, bool pass, double value, double limit,
               const std::string& detail = "")
    {
        r.checks.push_back({name, pass, value, limit, detail});
    }
    bool writing() const { return !out.empty(); }
    std::string path(const std::string& file) const { return (fs::path(out) / file).string(); }
    json& rep() { return r.report; }
};

std::vector<double> linspace(double a, double b, int n)
{
    std::vector<double> out(n);
    for (int k = 0; k < n; ++k) out[k] = n == 1 ? a : a + (b - a) * k / (n - 1.0);
    return out;
}

std::vector<double> logspace(double a, double b, int n)
{
    std::vector<double> out(n);
    for (int k = 0; k < n; ++k) out[k] = a * std::pow(b / a, n == 1 ? 0.0 : k / (n - 1.0));
    return out;
}

std::string time_tag(double t)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", t);
    return buf;
}

PhaseField initial_field(const config::Scenario& s)
{
    PhaseField f = make_field(s.solver.grid);
    solver::fill_initial(f, s.init);
    return f;
}

void write_mass(const Ctx& c, const solver::Trajectory& tr, const std::string& file = "mass.csv")
{
    if (!c.writing()) return;
    CsvWriter w(c.path(file), {"t", "mass", "flux_left", "flux_right", "leakage"});
    for (std::size_t k = 0; k < tr.t.size(); ++k)
        w.row({tr.t[k], tr.mass[k], tr.flux_left[k], tr.flux_right[k], tr.leakage[k]});
}

void write_fields(const Ctx& c, const solver::Trajectory& tr, const std::string& prefix = "field_t")
{
    if (!c.writing()) return;
    for (const auto& f : tr.snapshots) {
        CsvWriter w(c.path(prefix + time_tag(f.t) + ".csv"), {"x", "v", "f"});
        for (int i = 0; i < f.nx(); ++i)
            for (int j = 0; j < f.nv(); ++j) w.row({f.x[i], f.v[j], f.at(i, j)});
    }
}

void write_survival(const Ctx& c, const mc::SurvivalCurve& sc, const std::string& file = "survival.csv")
{
    if (!c.writing()) return;
    CsvWriter w(c.path(file), {"t", "alive_frac", "stderr"});
    for (std::size_t k = 0; k < sc.t.size(); ++k) w.row({sc.t[k], sc.alive_frac[k], sc.stderr_[k]});
}

void write_exits(const Ctx& c, const mc::ParticleEnsemble& ens, double t_end, double vmax)
{
    if (!c.writing()) return;
    const auto te = linspace(0.0, t_end, 41), ve = linspace(-vmax, vmax, 33);
    const auto h = mc::exit_flux(ens, te, ve);
    const int nt = static_cast<int>(te.size()) - 1, nv = static_cast<int>(ve.size()) - 1;
    CsvWriter w(c.path("exits.csv"), {"t_bin", "side", "v_bin", "count"});
    for (int side = 0; side < 2; ++side)
        for (int it = 0; it < nt; ++it)
            for (int iv = 0; iv < nv; ++iv)
                w.row_mixed({CsvWriter::fmt(0.5 * (te[it] + te[it + 1])), side == 0 ? "left" : "right",
                             CsvWriter::fmt(0.5 * (ve[iv] + ve[iv + 1])),
                             std::to_string(h.counts[(side * nt + it) * nv + iv])});
}

// Largest per-step mass increase relative to M(0) over the recorded series.
double worst_mass_increase(const solver::Trajectory& tr)
{
    const double m0 = tr.mass.empty() ? 0.0 : tr.mass.front();
    double worst = 0.0;
    for (std::size_t k = 1; k < tr.mass.size(); ++k)
        worst = std::max(worst, (tr.mass[k] - tr.mass[k - 1]) / (m0 > 0.0 ? m0 : 1.0));
    return worst;
}

struct Bounds {
    double min = 0.0, sup = 0.0;
};
Bounds snapshot_bounds(const solver::Trajectory& tr)
{
    Bounds b;
    for (const auto& f : tr.snapshots)
        for (double v : f.f) {
            b.min = std::min(b.min, v);
            b.sup = std::max(b.sup, v);
        }
    for (double v : tr.sup) b.sup = std::max(b.sup, v);
    return b;
}

// Maximum principle and mass monotonicity, the checks every grid run gets.
void principle_checks(Ctx& c, const solver::Trajectory& tr, double sup0, const std::string& tag)
{
    const Bounds b = snapshot_bounds(tr);
    const double inc = worst_mass_increase(tr);
    c.check(tag + "min_nonnegative", b.min >= 0.0, b.min, 0.0);
    c.check(tag + "sup_bounded", b.sup <= sup0 + 1e-12, b.sup - sup0, 1e-12);
    c.check(tag + "mass_nonincreasing", inc <= 1e-12, inc, 1e-12);
}

json trajectory_summary(const solver::Trajectory& tr)
{
    return {{"steps", tr.steps},
            {"dt", tr.dt},
            {"mass_initial", tr.mass.empty() ? 0.0 : tr.mass.front()},
            {"mass_final", tr.mass.empty() ? 0.0 : tr.mass.back()},
            {"absorbed_left", tr.absorbed_left},
            {"absorbed_right", tr.absorbed_right},
            {"leaked", tr.leaked},
            {"bookkeeping_error", tr.bookkeeping_error}};
}

// Mass at time t from the recorded series (linear interpolation).
double mass_at(const solver::Trajectory& tr, double t)
{
    for (const auto& f : tr.snapshots)
        if (std::fabs(f.t - t) < 1e-12) return f.mass();
    for (std::size_t k = 1; k < tr.t.size(); ++k)
        if (tr.t[k] >= t) {
            const double w = (t - tr.t[k - 1]) / (tr.t[k] - tr.t[k - 1]);
            return (1 - w) * tr.mass[k - 1] + w * tr.mass[k];
        }
    return tr.mass.back();
}

void pipe_solve(Ctx& c)
{
    const auto& s = c.s;
    const PhaseField f0 = initial_field(s);
    solver::Trajectory tr;
    try {
        tr = solver::run_solve(s.solver, f0);
    } catch (const ParameterError& e) {
        const std::string what = e.what();
        c.check(what.find("CFL") != std::string::npos ? "cfl" : "parameters", false, s.solver.dt, 0.0, what);
        return;
    }
    write_mass(c, tr);
    if (s.num("write_fields", 1.0) != 0.0) write_fields(c, tr);
    c.rep()["trajectory"] = trajectory_summary(tr);
    c.rep()["sup_initial"] = f0.sup();
    principle_checks(c, tr, f0.sup(), "");
}

void pipe_mc(Ctx& c)
{
    const auto& s = c.s;
    auto ens = mc::make_ensemble(s.mc, s.init);
    mc::run_to_end(ens, s.mc);
    const bool half = s.mc.geometry == "half_line";
    std::vector<double> times = s.mc_times;
    if (times.empty())
        times = half ? logspace(std::max(s.mc.dt, 1e-3), s.mc.t_end, 41) : linspace(0.0, s.mc.t_end, 41);
    const auto sc = mc::survival_curve(ens, times);
    write_survival(c, sc);
    write_exits(c, ens, s.mc.t_end, s.num("exit_vmax", 8.0));
    bool monotone = true;
    for (std::size_t k = 1; k < sc.alive_frac.size(); ++k)
        if (sc.alive_frac[k] > sc.alive_frac[k - 1]) monotone = false;
    c.check("survival_nonincreasing", monotone, 0.0, 0.0);
    c.rep()["particles"] = ens.size();
    c.rep()["alive_at_end"] = ens.alive();
    if (half) {
        const double lo = s.num("fit_lo", 10.0), hi = s.num("fit_hi", s.mc.t_end);
        std::vector<double> lt, ls;
        for (std::size_t k = 0; k < sc.t.size(); ++k)
            if (sc.t[k] >= lo && sc.t[k] <= hi && sc.alive_frac[k] > 0.0) {
                lt.push_back(std::log(sc.t[k]));
                ls.push_back(std::log(sc.alive_frac[k]));
            }
        if (lt.size() >= 3) {
            const auto lf = analysis::fit_line(lt, ls);
            c.rep()["survival_exponent"] = lf.slope;
            c.rep()["survival_exponent_se"] = lf.slope_se;
        }
    }
}

void pipe_mp_suite(Ctx& c)
{
    const auto& s = c.s;
    const int count = static_cast<int>(s.num("count", 5));
    double worst_min = 0.0, worst_sup = -1e300, worst_inc = -1e300;
    json runs = json::array();
    for (int k = 0; k < count; ++k) {
        solver::InitialData d = s.init;
        d.seed = s.init.seed + 7919u * k;
        PhaseField f0 = make_field(s.solver.grid);
        solver::fill_initial(f0, d);
        const auto tr = solver::run_solve(s.solver, f0);
        const Bounds b = snapshot_bounds(tr);
        const double inc = worst_mass_increase(tr);
        worst_min = std::min(worst_min, b.min);
        worst_sup = std::max(worst_sup, b.sup - f0.sup());
        worst_inc = std::max(worst_inc, inc);
        runs.push_back({{"seed", d.seed},
                        {"sup_initial", f0.sup()},
                        {"min", b.min},
                        {"sup_excess", b.sup - f0.sup()},
                        {"worst_mass_increase", inc},
                        {"mass_final", tr.mass.back()},
                        {"steps", tr.steps}});
        write_mass(c, tr, "mass_run" + std::to_string(k) + ".csv");
    }
    c.rep()["runs"] = runs;
    c.check("min_nonnegative", worst_min >= 0.0, worst_min, 0.0);
    c.check("sup_bounded", worst_sup <= 1e-12, worst_sup, 1e-12);
    c.check("mass_nonincreasing", worst_inc <= 1e-12, worst_inc, 1e-12);
}

void pipe_solver_vs_mc(Ctx& c)
{
    const auto& s = c.s;
    std::vector<double> times = s.mc_times.empty() ? std::vector<double>{0.5, 1.0, 2.0} : s.mc_times;
    auto cfg = s.solver;
    cfg.t_end = *std::max_element(times.begin(), times.end());
    cfg.snapshot_times = times;
    const PhaseField f0 = initial_field(s);
    const auto tr = solver::run_solve(cfg, f0);
    write_mass(c, tr);

    auto mcc = s.mc;
    mcc.scheme = "euler";
    mcc.t_end = cfg.t_end;
    auto ens = mc::make_ensemble(mcc, s.init);
    mc::run_to_end(ens, mcc);
    const auto sc = mc::survival_curve(ens, times);
    write_survival(c, sc);

    const double m0 = f0.mass();
    json rows = json::array();
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double g = mass_at(tr, times[k]) / m0, m = sc.alive_frac[k], se = sc.stderr_[k];
        const double z = se > 0.0 ? std::fabs(g - m) / se : std::numeric_limits<double>::infinity();
        rows.push_back({{"t", times[k]}, {"grid", g}, {"mc", m}, {"stderr", se}, {"sigmas", z}});
        c.check("agree_t" + time_tag(times[k]), z <= 3.0, z, 3.0, "|grid - mc| in binomial standard errors");
    }
    c.rep()["comparison"] = rows;
    c.rep()["trajectory"] = trajectory_summary(tr);
}

json decay_json(const analysis::DecayFit& d)
{
    return {{"kappa", d.kappa}, {"stderr", d.stderr_}, {"r2", d.r2},
            {"t_lo", d.t_lo},   {"t_hi", d.t_hi},      {"points", d.points}};
}

void pipe_decay(Ctx& c)
{
    const auto& s = c.s;
    const double t_end = s.solver.t_end;
    auto coarse = s.solver;
    coarse.snapshot_times.clear();
    for (int k = 0; k <= static_cast<int>(t_end); ++k) coarse.snapshot_times.push_back(k);
    auto fine = coarse;
    fine.grid.nx *= 2;
    fine.grid.nv *= 2;
    fine.series_every = coarse.series_every * 4;  // explicit steps shrink by 4 under refinement

    PhaseField f0c = make_field(coarse.grid), f0f = make_field(fine.grid);
    solver::fill_initial(f0c, s.init);
    solver::fill_initial(f0f, s.init);
    const auto trc = solver::run_solve(coarse, f0c);
    const auto trf = solver::run_solve(fine, f0f);
    write_mass(c, trc, "mass_coarse.csv");
    write_mass(c, trf);

    const double rel_var = s.num("rel_var", 0.05);
    const auto kc = analysis::fit_exponential_auto(trc.t, trc.mass, rel_var);
    const auto kf = analysis::fit_exponential_auto(trf.t, trf.mass, rel_var);

    auto mcc = s.mc;
    auto ens = mc::make_ensemble(mcc, s.init);
    mc::run_to_end(ens, mcc);
    const auto sc = mc::survival_curve(ens, linspace(0.0, mcc.t_end, static_cast<int>(s.num("mc_points", 161))));
    write_survival(c, sc);
    const double min_alive = s.num("min_alive", 2000);
    std::vector<double> mt, my;
    for (std::size_t k = 0; k < sc.t.size(); ++k)
        if (sc.alive_frac[k] * ens.size() >= min_alive) {
            mt.push_back(sc.t[k]);
            my.push_back(sc.alive_frac[k]);
        }
    const auto km = analysis::fit_exponential_auto(mt, my, rel_var);

    c.rep()["kappa_grid_coarse"] = decay_json(kc);
    c.rep()["kappa_grid_fine"] = decay_json(kf);
    c.rep()["kappa_mc"] = decay_json(km);
    const double refine = std::fabs(kc.kappa - kf.kappa) / kf.kappa;
    const double cross = std::fabs(km.kappa - kf.kappa) / kf.kappa;
    const double comb = std::hypot(kf.stderr_, km.stderr_);
    c.rep()["grid_mc_difference_in_stderr"] = comb > 0.0 ? std::fabs(km.kappa - kf.kappa) / comb : 0.0;
    c.check("kappa_positive", kf.kappa > 0.0 && kc.kappa > 0.0 && km.kappa > 0.0, kf.kappa, 0.0);
    c.check("r2_grid", std::min(kc.r2, kf.r2) > 0.99, std::min(kc.r2, kf.r2), 0.99);
    c.check("r2_mc", km.r2 > 0.99, km.r2, 0.99);
    c.check("kappa_refinement", refine <= 0.10, refine, 0.10, "relative change under 2x refinement");
    c.check("kappa_grid_vs_mc", cross <= 0.10, cross, 0.10, "relative difference, fine grid vs MC");

    // cascade constants on unit-time snapshots, reported only
    const analysis::RegionSpec region{s.num("rho", 0.2)};
    const auto series = analysis::compute_series(trf, region);
    const auto cas = analysis::cascade_check(series, 1.0);
    c.rep()["cascade"] = {{"C_s", cas.c_s}, {"theta", cas.theta}, {"steps", cas.cascade_steps}};
    const auto tight = analysis::tightness_series(trf, 0.5);
    c.rep()["tightness"] = {{"t", tight.t},
                            {"B", tight.B},
                            {"C_fit", tight.c_fit},
                            {"growth_slope", tight.growth.slope},
                            {"verified", tight.verified}};
    json zs = json::array();
    for (std::size_t k = 0; k < series.t.size(); ++k)
        zs.push_back({{"t", series.t[k]},
                      {"mass", series.mass[k]},
                      {"zeta_s", series.zeta_s[k]},
                      {"sup_q", series.sup_q[k]},
                      {"mass_qe", series.mass_qe[k]}});
    c.rep()["series"] = zs;
}

void pipe_half_line(Ctx& c)
{
    const auto& s = c.s;
    auto mcc = s.mc;
    mcc.geometry = "half_line";
    auto ens = mc::make_ensemble(mcc, s.init);
    mc::run_to_end(ens, mcc);
    const double lo = s.num("fit_lo", 10.0), hi = s.num("fit_hi", 1000.0);
    const auto times = logspace(lo, hi, static_cast<int>(s.num("points", 31)));
    const auto sc = mc::survival_curve(ens, times);
    write_survival(c, sc);
    std::vector<double> lt, ls;
    for (std::size_t k = 0; k < sc.t.size(); ++k)
        if (sc.alive_frac[k] > 0.0) {
            lt.push_back(std::log(sc.t[k]));
            ls.push_back(std::log(sc.alive_frac[k]));
        }
    const auto lf = analysis::fit_line(lt, ls);
    c.rep()["survival_exponent"] = lf.slope;
    c.rep()["survival_exponent_se"] = lf.slope_se;
    c.rep()["r2"] = lf.r2;
    c.rep()["particles"] = ens.size();
    c.rep()["alive_at_end"] = ens.alive();
    const double target = s.num("target", -0.25), tol = s.num("tol", 0.05);
    c.check("power_law_slope", std::fabs(lf.slope - target) <= tol, lf.slope - target, tol);
}

void pipe_kernel(Ctx& c)
{
    const auto& s = c.s;
    double worst_norm = 0.0;
    json norms = json::array();
    for (double nu : {-1.0, 0.0, 0.5, 2.0})
        for (double tau : {0.1, 0.5, 1.0, 3.0}) {
            const double m = kernel::g_mass(nu, tau);
            worst_norm = std::max(worst_norm, std::fabs(m - 1.0));
            norms.push_back({{"nu", nu}, {"tau", tau}, {"mass", m}});
        }
    c.rep()["normalization"] = norms;
    c.check("normalization", worst_norm <= 1e-6, worst_norm, 1e-6);

    const auto res = kernel::g_pde_residuals(s.num("fd_step", 0.02), 4);
    std::vector<double> orders;
    for (std::size_t k = 1; k < res.size(); ++k) orders.push_back(std::log2(res[k - 1] / res[k]));
    c.rep()["pde_residuals"] = res;
    c.rep()["pde_orders"] = orders;
    const double worst_order = *std::min_element(orders.begin(), orders.end());
    c.check("pde_second_order", worst_order >= 1.8, worst_order, 1.8, "observed order per halving");

    double worst_ck = 0.0;
    json ck = json::array();
    for (auto [t, sh] : std::vector<std::pair<double, double>>{{0.5, 0.5}, {1.0, 0.5}, {0.3, 1.2}}) {
        const auto r = kernel::chapman_kolmogorov(t, sh, 0.0);
        worst_ck = std::max(worst_ck, r.max_abs_err);
        ck.push_back({{"t", t}, {"s", sh}, {"max_abs_err", r.max_abs_err}, {"peak", r.peak}});
    }
    c.rep()["chapman_kolmogorov"] = ck;
    c.check("chapman_kolmogorov", worst_ck <= 1e-5, worst_ck, 1e-5);
}

// Smooth compactly supported bump, 1 at the centre.
double bump(double u, double r)
{
    const double q = u / r;
    return std::fabs(q) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - q * q)) : 0.0;
}

void pipe_boundary_limit(Ctx& c)
{
    const auto& s = c.s;
    const double wc = s.num("w_centre", 1.0), wr = s.num("w_radius", 0.5);
    const double sc = s.num("s_centre", 0.5), sr = s.num("s_radius", 0.5);
    const kernel::DensityFn lam = [=](double w, double t) { return bump(w - wc, wr) * bump(t - sc, sr); };
    const double v = s.num("v", 1.0), t = s.num("t", 1.0), x_min = s.num("x_min", 1e-4);
    const int levels = static_cast<int>(s.num("levels", 10));
    std::vector<double> xs;
    for (int k = levels; k >= 0; --k) xs.push_back(std::ldexp(x_min, k));
    const auto chk = kernel::limit_identity_check(lam, v, t, xs);
    json rows = json::array();
    for (const auto& r : chk.rows)
        rows.push_back({{"x", r.x}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"abs_err", r.abs_err}});
    c.rep()["rows"] = rows;
    const double last = chk.rows.back().abs_err;
    c.check("limit_at_x_min", last <= 1e-3, last, 1e-3);
    c.check("monotone_decrease", chk.monotone, 0.0, 0.0);
}

void pipe_boundary_density(Ctx& c)
{
    const auto& s = c.s;
    kernel::BoundaryWindow win;
    win.v0 = s.num("v0", win.v0);
    win.delta = s.num("delta", win.delta);
    win.t0 = s.num("t0", win.t0);
    win.n_v = static_cast<int>(s.num("n_v", win.n_v));
    win.n_t = static_cast<int>(s.num("n_t", win.n_t));
    const double q0 = s.num("q", 1.0);
    const auto bd = kernel::solve_boundary_density([=](double, double) { return q0; }, win,
                                                   s.num("tol", 1e-8), static_cast<int>(s.num("max_iter", 200)));
    const auto fit = kernel::fit_kernel_bound(win);
    double worst_ratio = 0.0;
    for (double r : bd.ratios) worst_ratio = std::max(worst_ratio, r);
    c.rep()["iterations"] = bd.iterations;
    c.rep()["increments"] = bd.increments;
    c.rep()["ratios"] = bd.ratios;
    c.rep()["residual"] = bd.residual;
    c.rep()["kernel_fit"] = {{"A", fit.a}, {"C", fit.c}, {"holds", fit.holds}};
    c.check("picard_contracts", bd.converged && !bd.ratios.empty() && worst_ratio < 1.0, worst_ratio, 1.0);
    c.check("residual", bd.residual <= 1e-7, bd.residual, 1e-7);
    c.check("kernel_envelope", fit.holds && fit.a > 0.0, fit.a, 0.0, "fitted A of C exp(-A / tau)");
}

void pipe_specfun(Ctx& c)
{
    const auto& s = c.s;
    const std::vector<double> alphas = s.list("alphas", {0.05, 0.1, 0.15});
    constexpr double b = 2.0 / 3.0;
    double worst_kummer = 0.0, worst_lambda = 0.0, worst_lambda_half = 0.0;
    double min_lambda = std::numeric_limits<double>::infinity();
    double worst_minus = 0.0, worst_plus = 0.0;
    const double h = s.num("fd_step", 1e-3);
    const double far = s.num("zeta_far", 50.0);
    json per = json::array();
    for (double al : alphas) {
        // z M'' + (2/3 - z) M' + alpha M = 0, i.e. Kummer with a = -alpha
        const double a = -al;
        double wk = 0.0;
        for (double z : linspace(-20.0, 20.0, 161)) {
            const double m = specfun::kummer_m(a, b, z), m1 = specfun::kummer_m_deriv(a, b, z);
            const double m2 = (a / b) * specfun::kummer_m_deriv(a + 1.0, b + 1.0, z);
            const double scale = std::fabs(z * m2) + std::fabs((b - z) * m1) + std::fabs(a * m);
            wk = std::max(wk, std::fabs(z * m2 + (b - z) * m1 - a * m) / scale);
        }
        auto lam_res = [&](double zeta, double hh) {
            const double l0 = specfun::lambda_profile(al, zeta), lp = specfun::lambda_profile(al, zeta + hh),
                         lm = specfun::lambda_profile(al, zeta - hh);
            const double d2 = (lp - 2.0 * l0 + lm) / (hh * hh), d1 = (lp - lm) / (2.0 * hh);
            return std::fabs(d2 + 3.0 * zeta * zeta * d1 - 9.0 * al * zeta * l0);
        };
        double wl = 0.0, wl2 = 0.0;
        for (double zeta : linspace(-10.0, 10.0, 201)) {
            wl = std::max(wl, lam_res(zeta, h));
            wl2 = std::max(wl2, lam_res(zeta, 0.5 * h));
        }
        double mn = std::numeric_limits<double>::infinity();
        for (double zeta : linspace(-50.0, 50.0, 2001)) mn = std::min(mn, specfun::lambda_profile(al, zeta));
        const double p = std::pow(far, 3.0 * al);
        const double rm = specfun::lambda_profile(al, -far) / p;
        const double rp = specfun::lambda_profile(al, far) / (specfun::k_plus(al) * p);
        worst_kummer = std::max(worst_kummer, wk);
        worst_lambda = std::max(worst_lambda, wl);
        worst_lambda_half = std::max(worst_lambda_half, wl2);
        min_lambda = std::min(min_lambda, mn);
        worst_minus = std::max(worst_minus, std::fabs(rm - 1.0));
        worst_plus = std::max(worst_plus, std::fabs(rp - 1.0));
        per.push_back({{"alpha", al},
                       {"kummer_residual", wk},
                       {"lambda_residual", wl},
                       {"lambda_residual_half_step", wl2},
                       {"lambda_min", mn},
                       {"ratio_minus", rm},
                       {"ratio_plus", rp},
                       {"k_plus", specfun::k_plus(al)}});
    }
    c.rep()["alphas"] = per;
    c.check("kummer_ode", worst_kummer <= 1e-7, worst_kummer, 1e-7, "relative to the term scale");
    c.check("lambda_ode", worst_lambda <= 1e-6, worst_lambda, 1e-6, "centred differences");
    const double order = std::log2(worst_lambda / worst_lambda_half);
    c.check("lambda_ode_order", order >= 1.8, order, 1.8, "residual ratio per step halving");
    c.check("lambda_positive", min_lambda > 0.0, min_lambda, 0.0);
    c.check("asymptotic_minus", worst_minus <= 0.02, worst_minus, 0.02);
    c.check("asymptotic_plus", worst_plus <= 0.02, worst_plus, 0.02);
}

void pipe_sequence_lemma(Ctx& c)
{
    const auto& s = c.s;
    const int fams = static_cast<int>(s.num("families", 100)), n_max = static_cast<int>(s.num("n_max", 200));
    const auto r = analysis::check_decay_lemma(fams, n_max, s.seed);
    c.rep()["families"] = r.families;
    c.rep()["violations"] = r.violations;
    c.rep()["worst_ratio"] = r.worst_ratio;
    const double mu = analysis::decay_lemma_rate(0.5, 0.5, 1.0, 1.0, 1);
    c.rep()["mu_half_half_T1"] = mu;
    c.check("bound_holds", r.violations == 0 && r.families == fams, r.worst_ratio, 1.0,
            "max (z_n + M_n) / (c mu^n)");
    c.check("closed_form", std::fabs(mu - std::pow(0.5, 0.25)) <= 1e-15, mu, std::pow(0.5, 0.25));
}

void pipe_compare_fhat(Ctx& c)
{
    const auto& s = c.s;
    const barriers::SelfSimilarProfile prof(s.num("alpha", specfun::kDefaultAlpha));
    const barriers::SuperSolutionZ0 z0(prof);
    const double K = z0.k_cap(), t0 = s.num("t_shift", 1.0);
    auto fhat = [&](double x, double v, double t) { return barriers::fhat_eval(z0, K, x, v, t); };

    PhaseField f0 = make_field(s.solver.grid);
    double C = 0.0;
    long nontrivial = 0;
    for (int i = 0; i < f0.nx(); ++i)
        for (int j = 0; j < f0.nv(); ++j) {
            const double x = f0.x[i], v = f0.v[j];
            const double fh = fhat(x, v, t0);
            const double val = (j == 0 || j + 1 == f0.nv()) ? 0.0 : fh * std::exp(-0.5 * v * v);
            f0.at(i, j) = val;
            if (fh > 0.0) C = std::max(C, val / fh);
            if (fh < 1.0) ++nontrivial;
        }
    const auto tr = solver::run_solve(s.solver, f0);
    write_mass(c, tr);
    const double tol = s.num("tol", 1e-3);
    const double sup0 = f0.sup();
    const auto rep = barriers::compare_super(
        tr, sup0, [&](double x, double v, double t) { return C * fhat(x, v, t + t0); },
        [](double x, double) { return x < 0.5; }, tol);
    c.rep()["K"] = K;
    c.rep()["r_max"] = z0.r_max();
    c.rep()["C"] = C;
    c.rep()["t_shift"] = t0;
    c.rep()["nontrivial_nodes_initial"] = nontrivial;
    c.rep()["worst_excess"] = rep.worst_excess;
    c.rep()["worst_at"] = {{"x", rep.x}, {"v", rep.v}, {"t", rep.t}};
    c.rep()["nodes_checked"] = rep.nodes_checked;
    c.rep()["trajectory"] = trajectory_summary(tr);
    c.check("nontrivial_region_resolved", nontrivial > 0, static_cast<double>(nontrivial), 0.0,
            "nodes where the barrier is below its cap");
    c.check("domination", rep.pass, rep.worst_excess, tol, "max (f - C fhat) / ||f0||_inf");
}

json holder_json(const analysis::HolderFit& h)
{
    return {{"exponent_x", h.exponent_x}, {"se_x", h.se_x}, {"exponent_v", h.exponent_v},
            {"se_v", h.se_v},             {"levels_x", h.levels_x}, {"levels_v", h.levels_v}};
}

void pipe_holder(Ctx& c)
{
    const auto& s = c.s;
    const double al = s.num("alpha", specfun::kDefaultAlpha);
    const barriers::SelfSimilarProfile prof(al);
    const barriers::SuperSolutionZ0 z0(prof);
    const double K = z0.k_cap();
    const double slack = s.num("abs_slack", 1e-3);
    auto within = [&](double est, double se, double target) {
        return std::fabs(est - target) <= 3.0 * se + slack;
    };

    const auto steady = analysis::holder_fit(
        [&](double x, double v) { return barriers::steady_regular_f0(prof, x, v); }, 0);
    c.rep()["steady"] = holder_json(steady);
    c.check("steady_exponent_x", within(steady.exponent_x, steady.se_x, al), steady.exponent_x, al);
    c.check("steady_exponent_v", within(steady.exponent_v, steady.se_v, 3 * al), steady.exponent_v, 3 * al);

    analysis::HolderOptions fo;
    fo.kx_lo = static_cast<int>(s.num("fhat_kx_lo", 16));
    fo.kx_hi = static_cast<int>(s.num("fhat_kx_hi", 26));
    fo.v_lo = s.num("fhat_v_lo", std::ldexp(1.0, -12));
    fo.v_hi = s.num("fhat_v_hi", std::ldexp(1.0, -7));
    fo.x_trace = s.num("fhat_x_trace", 1e-30);
    const auto fh = analysis::holder_fit(
        [&](double x, double v) { return barriers::fhat_eval(z0, K, x, v, 1.0); }, 0, fo);
    c.rep()["fhat"] = holder_json(fh);
    c.check("fhat_exponent_x", within(fh.exponent_x, fh.se_x, al), fh.exponent_x, al);
    c.check("fhat_exponent_v", within(fh.exponent_v, fh.se_v, 3 * al), fh.exponent_v, 3 * al);
    const double ratio = fh.exponent_v / fh.exponent_x;
    c.check("fhat_ratio", std::fabs(ratio - 3.0) <= 0.5, ratio, 3.0, "v/x exponent ratio, +-0.5");

    const double t_snap = s.num("t_snapshot", 1.0);
    auto cfg = s.solver;
    cfg.t_end = t_snap;
    cfg.snapshot_times = {t_snap};
    const PhaseField f0 = initial_field(s);
    const auto tr = solver::run_solve(cfg, f0);
    analysis::HolderOptions so;
    so.kx_lo = static_cast<int>(s.num("kx_lo", 4));
    so.kx_hi = static_cast<int>(s.num("kx_hi", 12));
    so.v_lo = s.num("v_lo", so.v_lo);
    so.v_hi = s.num("v_hi", so.v_hi);
    const int wall = static_cast<int>(s.num("wall", 0));
    const auto sol = analysis::holder_fit(tr.snapshots.back(), wall, so);
    c.rep()["solver"] = holder_json(sol);
    c.rep()["solver_first_cell"] = tr.snapshots.back().wx.front();
    const double floor_x = s.num("solver_min_exponent_x", 0.10);
    c.check("solver_exponent_x", sol.exponent_x >= floor_x, sol.exponent_x, floor_x);
    if (s.num("write_fields", 0.0) != 0.0) write_fields(c, tr);
}

void pipe_escape(Ctx& c)
{
    const auto& s = c.s;
    barriers::EscapeSubSolution sub;
    sub.x0 = s.init.x0;
    sub.v0 = s.init.v0;
    sub.rho = s.num("rho", s.init.radius);
    sub.delta = s.num("delta", 0.5 * s.init.edge);
    sub.level = s.num("level", s.init.amplitude);
    auto cfg = s.solver;
    if (cfg.snapshot_times.empty()) cfg.snapshot_times = {0.0, 0.01, 0.1, 0.5, 1.0};
    cfg.t_end = std::max(cfg.t_end, 1.0);
    const PhaseField f0 = initial_field(s);
    const auto tr = solver::run_solve(cfg, f0);
    write_mass(c, tr);
    const double tol = s.num("tol", 1e-3);
    const auto rep = barriers::escape_check(sub, tr, tol);
    c.rep()["alpha_mass_ratio"] = rep.mass_ratio;
    c.rep()["shape_bound"] = rep.shape_bound;
    c.rep()["worst_inequality"] = rep.worst_inequality;
    c.rep()["worst_domination"] = rep.worst_domination;
    c.rep()["lambda"] = sub.lam();
    c.rep()["vacuous"] = rep.vacuous;
    c.rep()["trajectory"] = trajectory_summary(tr);
    c.check("mass_ratio_below_one", rep.decay_ok, rep.mass_ratio, 1.0, "M(1)/M(0)");
    c.check("subsolution_inequality", rep.inequality_ok, rep.worst_inequality, -tol);
    c.check("subsolution_domination", rep.domination_ok && !rep.vacuous, rep.worst_domination, tol);
}

const std::map<std::string, std::function<void(Ctx&)>>& table()
{
    static const std::map<std::string, std::function<void(Ctx&)>> t = {
        {"solve", pipe_solve},
        {"mc", pipe_mc},
        {"mp-suite", pipe_mp_suite},
        {"solver-vs-mc", pipe_solver_vs_mc},
        {"decay", pipe_decay},
        {"half-line", pipe_half_line},
        {"kernel", pipe_kernel},
        {"boundary-limit", pipe_boundary_limit},
        {"boundary-density", pipe_boundary_density},
        {"specfun", pipe_specfun},
        {"compare-fhat", pipe_compare_fhat},
        {"holder", pipe_holder},
        {"sequence-lemma", pipe_sequence_lemma},
        {"escape", pipe_escape},
    };
    return t;
}

}  // namespace

ScenarioResult run_scenario(const config::Scenario& s, const std::string& out_dir)
{
    ScenarioResult r;
    r.name = s.name;
    Ctx c{s, out_dir, r};
    if (c.writing()) fs::create_directories(out_dir);
    const auto start = std::chrono::steady_clock::now();
    const auto it = table().find(s.pipeline);
    try {
        if (it == table().end()) throw ConfigError(s.name + ": unknown pipeline '" + s.pipeline + "'");
        it->second(c);
    } catch (const NumericalAbort& e) {
        c.check("numerical_abort", false, e.time(), 0.0, e.what());
        if (c.writing()) {
            std::ofstream d(c.path("diagnostics.json"));
            d << json{{"error", e.what()}, {"t", e.time()}, {"ix", e.ix()}, {"iv", e.iv()}}.dump(2) << '\n';
        }
    } catch (const std::exception& e) {
        c.check("error", false, 0.0, 0.0, e.what());
    }
    r.report["runtime_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.writing()) {
        std::ofstream o(c.path("report.json"), std::ios::binary);
        o << emit_report(s, r).dump(2) << '\n';
    }
    return r;
}

}  // namespace kfp::scenario
