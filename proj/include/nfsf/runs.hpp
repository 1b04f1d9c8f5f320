#pragma once

#include "nfsf/config.hpp"
#include "nfsf/equilibrium.hpp"

#include <cstdint>
#include <string>

namespace nfsf {

struct RunContext {
    RunConfig cfg;
    std::string out_dir;
    uint64_t seed = 0;
};

// Initial condition factory; all randomness drawn from the given seed.
DensityField build_ic(const RunConfig& cfg, uint64_t seed);

// Subcommand bodies. Return the process exit code (0 ok, 3 solver divergence).
int cmd_simulate(const RunContext& ctx);
int cmd_stefan(const RunContext& ctx);
int cmd_equilibrium(const RunContext& ctx);
int cmd_stability_check(const RunContext& ctx);
int cmd_entropy_track(const std::string& run_dir, const std::string& out_dir);
int cmd_gridcell(const RunContext& ctx);
int cmd_crosscheck(const RunContext& ctx);

} // namespace nfsf
