#pragma once

#include "nfsf/direct_solver.hpp"
#include "nfsf/stability.hpp"
#include "nfsf/stefan.hpp"

#include <array>
#include <vector>

namespace nfsf {

// Four orientation populations (N, W, S, E) with shifted connectivities
// W^b(x) = W(x - r^b) and per-population inputs.
struct PopulationSet {
    std::vector<DensityField> rho;              // 4 fields
    std::vector<std::array<int, 2>> shifts;     // grid-snapped shift indices
    std::vector<ExternalInput> inputs;          // B^b

    void validate(const ModelParams& p) const;
    static std::array<int, 2> snap_shift(const SpatialGrid& g, double r1, double r2);
    // minimal-image Euclidean length of the index vector
    static double shift_norm(const SpatialGrid& g, int i1, int i2);
};

// Phi^b[x] = Phi( (1/4) sum_b' (W^{b'} * rhobar^{b'})[x] + B^b(t) )
std::vector<std::vector<double>> coupled_drift(const PopulationSet& set, const ModelParams& p,
                                               double t);

// one implicit step of all four populations (componentwise scheme, shared drift)
void step4(PopulationSet& set, const ModelParams& p, const SolverConfig& cfg, double t);

struct GridCellRun {
    std::vector<double> times;
    std::vector<std::vector<std::vector<double>>> rhobar;   // [time][pop][x]
    std::vector<std::vector<std::vector<double>>> boundary; // [time][pop][x]
    std::vector<double> snap_times;
    std::vector<std::vector<DensityField>> snapshots;       // [snap][pop]
    RunMonitor monitor;
};

GridCellRun run_gridcell(const PopulationSet& ic, const ModelParams& p, const SolverConfig& cfg);

// Stefan backend lifted componentwise; coupling only inside Psi^b.
StefanRun stefan4(const std::vector<std::function<double(double, double, double)>>& rho0,
                  const PopulationSet& proto, const ModelParams& p, const SpatialGrid& xg,
                  const ActivityGrid& sg, const StefanConfig& cfg);

struct ShiftConditionRecord {
    ConditionRecord symmetric;  // max |r^b + r^j| <= a^{3/2}(2-4xi) g^{1/2} sigma / (|gradW| |Phi'| M)
    ConditionRecord asymmetric; // 2 L^d <= a^{3/2}(2-xi) g^{1/2} sigma / (|gradW| |Phi'| sqrt(M))
};

ShiftConditionRecord shift_condition(const EquilibriumState& st, const ModelParams& p,
                                     const PopulationSet& set, double alpha, double xi,
                                     PoincareMethod method = PoincareMethod::Conservative);

} // namespace nfsf
