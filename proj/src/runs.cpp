#include "nfsf/runs.hpp"

#include "nfsf/gridcell.hpp"
#include "nfsf/io.hpp"
#include "nfsf/special.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

namespace nfsf {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void ensure_dir(const std::string& dir)
{
    fs::create_directories(dir);
}

void write_resolved(const RunContext& ctx)
{
    write_text_atomic(ctx.out_dir + "/resolved_config.json", ctx.cfg.resolved);
}

std::string index_name(int k, const char* ext)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "snapshot_%06d.%s", k, ext);
    return buf;
}

void write_monitor(const std::string& dir, const RunMonitor& m)
{
    json j;
    j["max_mass_drift"] = m.max_mass_drift;
    j["min_rho"] = m.min_rho;
    j["wall_mass"] = m.wall_mass;
    write_text_atomic(dir + "/monitor.json", j.dump(2) + "\n");
}

} // namespace

DensityField build_ic(const RunConfig& cfg, uint64_t seed)
{
    const ModelParams& p = cfg.params;
    switch (cfg.ic.kind) {
    case IcSpec::Kind::Equilibrium:
        return homogeneous_branch(p, cfg.xg, cfg.sg).profile;
    case IcSpec::Kind::Gaussian:
        return gaussian_density(cfg.xg, cfg.sg, p.Ld(), cfg.ic.center, cfg.ic.width);
    case IcSpec::Kind::PerturbedEquilibrium: {
        auto st = homogeneous_branch(p, cfg.xg, cfg.sg);
        DensityField f = st.profile;
        int nx = f.xg.size(), ns = f.sg.n;
        double ds = f.sg.ds(), Ld = p.Ld();
        // moment-shaped perturbation (s - m1(x)) keeps per-x mass exact
        std::vector<double> m1(nx), var(nx);
        for (int x = 0; x < nx; ++x) {
            double m = 0.0, mass = 0.0;
            for (int j = 0; j < ns; ++j) {
                m += f.sg.center(j) * f.at(x, j);
                mass += f.at(x, j);
            }
            m1[x] = m / mass;
            double v = 0.0;
            for (int j = 0; j < ns; ++j) {
                double d = f.sg.center(j) - m1[x];
                v += d * d * f.at(x, j);
            }
            var[x] = v * ds;
        }
        double eps = cfg.ic.eps;
        auto cosx = [&](int x) {
            double x1 = f.xg.d == 1 ? f.xg.coord(x) : f.xg.coord(x / f.xg.n);
            return std::cos(2.0 * kPi * cfg.ic.mode * x1 / p.L);
        };
        if (cfg.ic.target_re > 0.0) {
            double quad = 0.0;
            for (int x = 0; x < nx; ++x) {
                double c = cosx(x);
                quad += c * c * var[x] * Ld; // ((rho-ri)/ri)^2 ri integrates eps^2 c^2 (s-m1)^2 ri
            }
            quad *= f.xg.cell_volume();
            eps = std::sqrt(cfg.ic.target_re / quad);
        }
        for (int x = 0; x < nx; ++x) {
            double c = cosx(x);
            for (int j = 0; j < ns; ++j)
                f.at(x, j) *= 1.0 + eps * c * (f.sg.center(j) - m1[x]);
        }
        if (f.min_value() < 0.0)
            throw std::runtime_error("build_ic: perturbation too large, density negative");
        return f;
    }
    case IcSpec::Kind::RandomMixture: {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        int nc = std::max(1, cfg.ic.components);
        std::vector<double> amp(nc), cen(nc), wid(nc), xphase(nc), xamp(nc);
        for (int i = 0; i < nc; ++i) {
            amp[i] = 0.3 + U(rng);
            cen[i] = U(rng) * 0.5 * cfg.sg.s_max;
            wid[i] = (0.3 + 0.7 * U(rng)) * std::sqrt(p.sigma);
            xphase[i] = 2.0 * kPi * U(rng);
            xamp[i] = 0.3 * U(rng);
        }
        return sample_density(cfg.xg, cfg.sg, p.Ld(), [&](double x1, double, double s) {
            double v = 0.0;
            for (int i = 0; i < nc; ++i) {
                double u = (s - cen[i]) / wid[i];
                double xm = 1.0 + xamp[i] * std::cos(2.0 * kPi * x1 / p.L + xphase[i]);
                v += amp[i] * xm * std::exp(-0.5 * u * u);
            }
            return v;
        });
    }
    }
    throw std::logic_error("build_ic: unreachable");
}

int cmd_simulate(const RunContext& ctx)
{
    ensure_dir(ctx.out_dir);
    write_resolved(ctx);
    DensityField ic = build_ic(ctx.cfg, ctx.seed);

    int snap_count = 0;
    std::string snap_index = "file,t\n";
    auto on_snap = [&](const DensityField& f, double t) {
        std::string base = index_name(snap_count, "csv");
        write_text_atomic(ctx.out_dir + "/" + base, snapshot_csv(f));
        write_snapshot_binary(ctx.out_dir + "/" + index_name(snap_count, "nfsf"), f);
        snap_index += index_name(snap_count, "nfsf") + ("," + format_double(t)) + "\n";
        ++snap_count;
    };

    SolverConfig scfg = ctx.cfg.solver;
    scfg.keep_snapshots = false;
    DirectRun run = run_direct(ic, ctx.cfg.params, scfg, on_snap);

    std::vector<std::vector<double>> rb_rows, bd_rows;
    for (size_t i = 0; i < run.times.size(); ++i)
        for (size_t x = 0; x < run.rhobar[i].size(); ++x) {
            rb_rows.push_back({run.times[i], (double)x, run.rhobar[i][x]});
            bd_rows.push_back({run.times[i], (double)x, run.boundary[i][x]});
        }
    write_text_atomic(ctx.out_dir + "/rhobar.csv", csv_table({"t", "ix", "rhobar"}, rb_rows));
    write_text_atomic(ctx.out_dir + "/boundary.csv", csv_table({"t", "ix", "rho0"}, bd_rows));
    write_text_atomic(ctx.out_dir + "/snapshots.csv", snap_index);
    write_monitor(ctx.out_dir, run.monitor);
    return 0;
}

int cmd_stefan(const RunContext& ctx)
{
    ensure_dir(ctx.out_dir);
    write_resolved(ctx);
    DensityField ic = build_ic(ctx.cfg, ctx.seed);

    // sample the (gridded) initial condition when handing to the Stefan backend
    const DensityField icc = ic;
    auto ic_fn = [&icc](double x1, double x2, double s) {
        const SpatialGrid& g = icc.xg;
        int ix = g.d == 1 ? g.wrap((int)std::llround(x1 / g.dx()))
                          : g.index((int)std::llround(x1 / g.dx()), (int)std::llround(x2 / g.dx()));
        double u = s / icc.sg.ds() - 0.5;
        int j = std::max(0, std::min(icc.sg.n - 2, (int)std::floor(u)));
        double fr = std::max(0.0, std::min(1.0, u - j));
        return icc.at(ix, j) + fr * (icc.at(ix, j + 1) - icc.at(ix, j));
    };

    StefanRun run = run_stefan(ic_fn, ctx.cfg.params, ctx.cfg.xg, ctx.cfg.sg, ctx.cfg.stefan);
    if (!run.converged) {
        write_text_atomic(ctx.out_dir + "/error.txt", run.error + "\n");
        std::fprintf(stderr, "stefan: %s\n", run.error.c_str());
        return 3;
    }

    // per-window node tables
    int wmax = run.window_count;
    for (int w = 0; w <= wmax; ++w) {
        std::vector<std::vector<double>> rows;
        for (size_t n = 0; n < run.tau_nodes.size(); ++n) {
            if (run.node_window[n] != w) continue;
            for (size_t x = 0; x < run.pops[0].v.size(); ++x)
                rows.push_back({(double)x, run.tau_nodes[n], run.t_nodes[n],
                                run.pops[0].v[x][n], run.pops[0].gamma[x][n],
                                run.pops[0].ubar[x][n], run.pops[0].psi[x][n],
                                run.pops[0].rho0[x][n], run.pops[0].rhobar[x][n]});
        }
        if (rows.empty()) continue;
        char name[64];
        std::snprintf(name, sizeof(name), "/stefan_window%03d.csv", w);
        write_text_atomic(ctx.out_dir + name,
                          csv_table({"ix", "tau", "t", "v", "gamma", "ubar", "psi", "rho0",
                                     "rhobar"},
                                    rows));
    }

    std::string snap_index = "file,t\n";
    for (size_t i = 0; i < run.snapshots.size(); ++i) {
        write_text_atomic(ctx.out_dir + "/" + index_name((int)i, "csv"),
                          snapshot_csv(run.snapshots[i]));
        write_snapshot_binary(ctx.out_dir + "/" + index_name((int)i, "nfsf"), run.snapshots[i]);
        snap_index += index_name((int)i, "nfsf") + ("," + format_double(run.snap_times[i])) + "\n";
    }
    write_text_atomic(ctx.out_dir + "/snapshots.csv", snap_index);

    json j;
    j["windows"] = run.window_count;
    j["picard_iterations"] = run.total_iterations;
    j["max_mass_err"] = run.max_mass_err;
    write_text_atomic(ctx.out_dir + "/stefan_summary.json", j.dump(2) + "\n");
    return 0;
}

int cmd_equilibrium(const RunContext& ctx)
{
    ensure_dir(ctx.out_dir);
    write_resolved(ctx);
    BranchResult br = solve_homogeneous_fixed_point(ctx.cfg.params);
    EquilibriumState st = homogeneous_branch(ctx.cfg.params, ctx.cfg.xg, ctx.cfg.sg);

    std::vector<std::vector<double>> rows{{st.Phi0, st.Phi0_prime, st.rho_bar_inf, st.M_inf,
                                           st.Z_rho}};
    write_text_atomic(ctx.out_dir + "/equilibrium.csv",
                      csv_table({"Phi0", "Phi0_prime", "rho_bar_inf", "M_inf", "Z_rho"}, rows));

    std::vector<std::vector<double>> rts;
    for (double r : br.roots) rts.push_back({r});
    write_text_atomic(ctx.out_dir + "/roots.csv", csv_table({"Phi0_root"}, rts));
    write_text_atomic(ctx.out_dir + "/profile.csv", snapshot_csv(st.profile));
    return 0;
}

int cmd_stability_check(const RunContext& ctx)
{
    ensure_dir(ctx.out_dir);
    write_resolved(ctx);
    const RunConfig& cfg = ctx.cfg;
    EquilibriumState st = homogeneous_branch(cfg.params, cfg.xg, cfg.sg);
    auto rep = check_prop_stab1(st, cfg.params, cfg.stability.poincare);
    auto modes = fourier_modes(cfg.params.W, cfg.stability.k_max);
    auto margins = linear_fourier_threshold(st, modes);
    auto pred = decay_rate_prediction(st, cfg.params, 0.0, 0.0, cfg.stability.poincare);

    json j;
    auto dump_record = [](const ConditionRecord& r) {
        json o;
        o["name"] = r.name;
        o["lhs"] = r.lhs;
        o["rhs"] = r.rhs;
        o["pass"] = r.pass;
        for (auto& kv : r.operands) o["operands"][kv.first] = kv.second;
        return o;
    };
    j["poincare_estimate"] = dump_record(rep.poincare_estimate);
    j["stabcond2"] = dump_record(rep.stabcond2);
    j["stabcond3"] = dump_record(rep.stabcond3);
    j["gamma_tilde"] = rep.gamma_tilde;
    j["Phi0"] = st.Phi0;
    j["M_inf"] = st.M_inf;
    j["linear_threshold_stable"] = margins.stable;
    j["linear_threshold_min_margin"] = margins.min_margin;
    if (pred.valid) {
        j["K"] = pred.K;
        j["K_eps"] = pred.K_eps;
    }
    try {
        auto nl = check_nonlinear_condition(st, cfg.params, cfg.stability.alpha,
                                            cfg.stability.k_max);
        j["nonlinear_check"] = {{"pass", nl.pass},
                                {"linearized_only", nl.linearized_only},
                                {"min_mode", nl.min_mode},
                                {"alpha", nl.alpha},
                                {"argmin_k", {nl.argmin_k1, nl.argmin_k2}}};
    } catch (const std::invalid_argument& e) {
        j["nonlinear_check"] = {{"error", e.what()}};
    }
    write_text_atomic(ctx.out_dir + "/stability_report.json", j.dump(2) + "\n");

    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < margins.margin.size(); ++i)
        rows.push_back({(double)margins.k1[i], (double)margins.k2[i], margins.margin[i]});
    write_text_atomic(ctx.out_dir + "/margins.csv", csv_table({"k1", "k2", "margin"}, rows));
    return 0;
}

int cmd_entropy_track(const std::string& run_dir, const std::string& out_dir)
{
    ensure_dir(out_dir);
    RunConfig cfg = parse_config_file(run_dir + "/resolved_config.json");

    std::ifstream idx(run_dir + "/snapshots.csv");
    if (!idx) throw std::runtime_error("no snapshots.csv in " + run_dir);
    std::string line;
    std::getline(idx, line); // header
    std::vector<DensityField> snaps;
    std::vector<double> times;
    while (std::getline(idx, line)) {
        auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        snaps.push_back(read_snapshot_binary(run_dir + "/" + line.substr(0, comma)));
        times.push_back(std::stod(line.substr(comma + 1)));
    }
    if (snaps.size() < 3) throw std::runtime_error("not enough snapshots for an entropy trace");

    EquilibriumState st = homogeneous_branch(cfg.params, snaps[0].xg, snaps[0].sg);
    EntropyTrace tr = entropy_trace(snaps, times, st, cfg.params);

    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < tr.times.size(); ++i)
        rows.push_back({tr.times[i], tr.re[i], tr.q[i], tr.excluded_mass[i]});
    write_text_atomic(out_dir + "/entropy.csv",
                      csv_table({"t", "re", "q", "excluded_mass"}, rows));

    json j;
    try {
        DecayFit fit = measure_decay(tr.times, tr.re);
        j["rate"] = fit.rate;
        j["r2"] = fit.r2;
        j["n_used"] = fit.n_used;
    } catch (const std::exception& e) {
        j["error"] = e.what();
    }
    auto pred = decay_rate_prediction(st, cfg.params, tr.re0());
    if (pred.valid) j["K"] = pred.K;
    write_text_atomic(out_dir + "/decay.json", j.dump(2) + "\n");
    return 0;
}

int cmd_gridcell(const RunContext& ctx)
{
    ensure_dir(ctx.out_dir);
    write_resolved(ctx);
    const RunConfig& cfg = ctx.cfg;
    if (!cfg.has_gridcell) throw ConfigError("gridcell section missing from config");

    PopulationSet set;
    set.shifts = cfg.shifts;
    set.inputs = cfg.inputs4;
    DensityField ic = build_ic(cfg, ctx.seed);
    for (int b = 0; b < 4; ++b) set.rho.push_back(ic);

    GridCellRun run = run_gridcell(set, cfg.params, cfg.solver);

    std::vector<std::vector<double>> rows;
    for (size_t i = 0; i < run.times.size(); ++i)
        for (int b = 0; b < 4; ++b)
            for (size_t x = 0; x < run.rhobar[i][b].size(); ++x)
                rows.push_back({run.times[i], (double)b, (double)x, run.rhobar[i][b][x]});
    write_text_atomic(ctx.out_dir + "/rhobar4.csv",
                      csv_table({"t", "beta", "ix", "rhobar"}, rows));

    rows.clear();
    try {
        EquilibriumState st = homogeneous_branch(cfg.params, cfg.xg, cfg.sg);
        for (size_t i = 0; i < run.snapshots.size(); ++i) {
            double sum = 0.0;
            std::vector<double> row{run.snap_times[i]};
            for (int b = 0; b < 4; ++b) {
                double re = relative_entropy(run.snapshots[i][b], st.profile);
                row.push_back(re);
                sum += re;
            }
            row.push_back(sum);
            rows.push_back(std::move(row));
        }
        write_text_atomic(ctx.out_dir + "/entropy4.csv",
                          csv_table({"t", "re_N", "re_W", "re_S", "re_E", "re_sum"}, rows));
    } catch (const std::exception&) {
        // equilibrium may not exist for this config; entropy table skipped
    }
    write_monitor(ctx.out_dir, run.monitor);
    return 0;
}

int cmd_crosscheck(const RunContext& ctx)
{
    ensure_dir(ctx.out_dir);
    write_resolved(ctx);
    const RunConfig& cfg = ctx.cfg;
    DensityField ic = build_ic(cfg, ctx.seed);

    StefanConfig stc = cfg.stefan;
    if (stc.snapshot_times.empty()) {
        int nsnap = 10;
        for (int i = 1; i <= nsnap; ++i)
            stc.snapshot_times.push_back(cfg.solver.t_end * i / nsnap);
    }
    stc.t_end = cfg.solver.t_end;

    SolverConfig scfg = cfg.solver;
    scfg.keep_snapshots = true;
    scfg.snapshot_stride = std::max(1, (int)std::llround(stc.snapshot_times.front() / scfg.dt));

    // direct snapshots exactly at the stefan snapshot times
    std::vector<DensityField> dsnaps;
    std::vector<double> dtimes;
    {
        DensityField state = ic;
        size_t next = 0;
        int nsteps = (int)std::llround(scfg.t_end / scfg.dt);
        std::vector<DensityField> pops{state};
        auto drift = [&](const std::vector<DensityField>& s, double t) {
            return std::vector<std::vector<double>>{drift_field(s[0], cfg.params, t)};
        };
        for (int k = 1; k <= nsteps && next < stc.snapshot_times.size(); ++k) {
            direct_step(pops, cfg.params, scfg, (k - 1) * scfg.dt, drift);
            double t = k * scfg.dt;
            if (t + 1e-12 >= stc.snapshot_times[next]) {
                dsnaps.push_back(pops[0]);
                dtimes.push_back(t);
                ++next;
            }
        }
    }

    const DensityField icc = ic;
    auto ic_fn = [&icc](double x1, double x2, double s) {
        const SpatialGrid& g = icc.xg;
        int ix = g.d == 1 ? g.wrap((int)std::llround(x1 / g.dx()))
                          : g.index((int)std::llround(x1 / g.dx()), (int)std::llround(x2 / g.dx()));
        double u = s / icc.sg.ds() - 0.5;
        int j = std::max(0, std::min(icc.sg.n - 2, (int)std::floor(u)));
        double fr = std::max(0.0, std::min(1.0, u - j));
        return icc.at(ix, j) + fr * (icc.at(ix, j + 1) - icc.at(ix, j));
    };
    StefanRun srun = run_stefan(ic_fn, cfg.params, cfg.xg, cfg.sg, stc);
    if (!srun.converged) {
        std::fprintf(stderr, "crosscheck: stefan backend diverged: %s\n", srun.error.c_str());
        return 3;
    }

    std::vector<std::vector<double>> rows;
    double max_l1 = 0.0;
    size_t n = std::min(dsnaps.size(), srun.snapshots.size());
    for (size_t i = 0; i < n; ++i) {
        double l1 = 0.0;
        const DensityField& a = dsnaps[i];
        const DensityField& b = srun.snapshots[i];
        for (size_t k = 0; k < a.rho.size(); ++k) l1 += std::fabs(a.rho[k] - b.rho[k]);
        l1 *= a.sg.ds() * a.xg.cell_volume();
        rows.push_back({dtimes[i], l1});
        max_l1 = std::max(max_l1, l1);
    }
    write_text_atomic(ctx.out_dir + "/agreement.csv", csv_table({"t", "l1"}, rows));
    json j;
    j["max_l1"] = max_l1;
    j["snapshots"] = n;
    write_text_atomic(ctx.out_dir + "/crosscheck.json", j.dump(2) + "\n");
    std::printf("crosscheck: max L1 discrepancy %.3e over %zu snapshots\n", max_l1, n);
    return 0;
}

} // namespace nfsf
