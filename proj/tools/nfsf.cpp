#include "nfsf/runs.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <string>

using namespace nfsf;

int main(int argc, char** argv)
{
    CLI::App app{"neural-field Fokker-Planck / Stefan solver suite"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", run_dir;
    uint64_t seed = 0;
    int threads = 0;
    int snapshot_stride = -1;

    app.add_option("--threads", threads, "OpenMP thread count (default: NFSF_THREADS or all)");

    auto add_common = [&](CLI::App* sub, bool needs_config = true) {
        if (needs_config)
            sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "RNG seed for generated initial data");
        sub->add_option("--snapshot-stride", snapshot_stride, "override solver.snapshot_stride");
    };

    auto* sim = app.add_subcommand("simulate", "direct finite-volume solver run");
    add_common(sim);
    auto* stf = app.add_subcommand("stefan", "free-boundary integral-equation solver run");
    add_common(stf);
    auto* eq = app.add_subcommand("equilibrium", "homogeneous stationary state");
    add_common(eq);
    auto* stab = app.add_subcommand("stability-check", "evaluate stability conditions");
    add_common(stab);
    auto* ent = app.add_subcommand("entropy-track", "entropy trace of a finished run");
    ent->add_option("--run", run_dir, "run directory with snapshots")->required();
    ent->add_option("--out", out_dir, "output directory");
    auto* gc = app.add_subcommand("gridcell", "four-population run");
    add_common(gc);
    auto* cc = app.add_subcommand("crosscheck", "run both backends and compare");
    add_common(cc);

    CLI11_PARSE(app, argc, argv);

    if (threads <= 0) {
        const char* env = std::getenv("NFSF_THREADS");
        if (env) threads = std::atoi(env);
    }
    if (threads > 0) omp_set_num_threads(threads);

    try {
        if (app.got_subcommand(ent))
            return cmd_entropy_track(run_dir, out_dir);

        RunContext ctx;
        ctx.cfg = parse_config_file(config_path);
        if (snapshot_stride >= 0) ctx.cfg.solver.snapshot_stride = snapshot_stride;
        ctx.out_dir = out_dir;
        ctx.seed = seed;

        if (app.got_subcommand(sim)) return cmd_simulate(ctx);
        if (app.got_subcommand(stf)) return cmd_stefan(ctx);
        if (app.got_subcommand(eq)) return cmd_equilibrium(ctx);
        if (app.got_subcommand(stab)) return cmd_stability_check(ctx);
        if (app.got_subcommand(gc)) return cmd_gridcell(ctx);
        if (app.got_subcommand(cc)) return cmd_crosscheck(ctx);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 3;
    }
    return 0;
}
