#pragma once

#include "nfsf/direct_solver.hpp"
#include "nfsf/stability.hpp"
#include "nfsf/stefan.hpp"

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace nfsf {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IcSpec {
    enum class Kind { Equilibrium, Gaussian, PerturbedEquilibrium, RandomMixture };
    Kind kind = Kind::Equilibrium;
    double center = 0.0, width = 1.0;     // gaussian
    int mode = 1;                         // perturbed-equilibrium spatial mode
    double eps = 1e-3;                    // perturbation size
    double target_re = 0.0;              // >0: eps chosen to hit this relative entropy
    int components = 3;                   // random-mixture
};

struct StabilityOptions {
    double alpha = 0.5;
    double xi = 0.1;
    int k_max = 32;
    PoincareMethod poincare = PoincareMethod::Conservative;
};

struct RunConfig {
    ModelParams params;
    SpatialGrid xg;
    ActivityGrid sg;
    SolverConfig solver;
    StefanConfig stefan;
    IcSpec ic;
    StabilityOptions stability;
    bool has_gridcell = false;
    std::vector<std::array<int, 2>> shifts;   // 4 entries when has_gridcell
    std::vector<ExternalInput> inputs4;
    std::string resolved;                     // canonical config echo (JSON)
};

// Parses and validates a config file. Unknown keys are rejected; messages
// carry the JSON path or the line of a syntax error. Throws ConfigError.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");

} // namespace nfsf
