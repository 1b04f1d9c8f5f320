#pragma once

#include "nfsf/field.hpp"

#include <functional>
#include <vector>

namespace nfsf {

enum class Scheme { ChangCooper, UpwindImplicit };

struct SolverConfig {
    double dt = 1e-3;
    double t_end = 1.0;
    Scheme scheme = Scheme::ChangCooper;
    int picard_max_iter = 1;    // 1 = nonlinearity frozen at t
    double picard_tol = 1e-10;
    int snapshot_stride = 0;    // 0 = no snapshots (initial/final only)
    bool keep_snapshots = true;

    void validate() const;
};

struct RunMonitor {
    double max_mass_drift = 0.0;  // max relative per-x mass deviation from start
    double min_rho = 0.0;         // most negative value seen
    double wall_mass = 0.0;       // max mass sitting in the top cell (truncation wall)
    void absorb(const RunMonitor& o)
    {
        max_mass_drift = std::max(max_mass_drift, o.max_mass_drift);
        min_rho = std::min(min_rho, o.min_rho);
        wall_mass = std::max(wall_mass, o.wall_mass);
    }
};

// Per-population drift fields at time t; index [pop][x].
using DriftProvider =
    std::function<std::vector<std::vector<double>>(const std::vector<DensityField>&, double)>;

// One implicit Euler step of the flux-form finite volume scheme for every
// population; per-x tridiagonal solves, exact per-x mass conservation.
void direct_step(std::vector<DensityField>& pops, const ModelParams& p, const SolverConfig& cfg,
                 double t, const DriftProvider& drift);

// Single-population convenience step with the standard drift Phi(W*rhobar + B).
DensityField step(const DensityField& f, const ModelParams& p, const SolverConfig& cfg);

// Discrete right-hand side -(1/tau_c) div F of the scheme at the given state,
// same face fluxes as the implicit step.
std::vector<double> flux_divergence(const DensityField& f, const ModelParams& p,
                                    Scheme scheme, double t);

// Explicit positivity bound for the Chang-Cooper scheme (the implicit solve
// preserves positivity for any dt; this is the documented reference bound).
double positivity_dt_bound(const DensityField& f, const ModelParams& p, double t);

struct DirectRun {
    std::vector<double> snap_times;
    std::vector<DensityField> snapshots;        // if cfg.keep_snapshots
    std::vector<double> times;                  // every step (including t=0)
    std::vector<std::vector<double>> rhobar;    // [time][x]
    std::vector<std::vector<double>> boundary;  // [time][x], extrapolated rho(x,0,t)
    RunMonitor monitor;
    const DensityField& final_state() const { return snapshots.back(); }
};

DirectRun run_direct(const DensityField& ic, const ModelParams& p, const SolverConfig& cfg,
                     const std::function<void(const DensityField&, double)>& on_snapshot = {});

// Time series of the extrapolated rho(x,0,t) face values of a run.
std::vector<std::vector<double>> boundary_trace(const DirectRun& run);

struct MomentResidual {
    std::vector<double> times;        // interior snapshot times
    std::vector<double> sup_residual; // sup over x of the weak-form residual
    double sup() const;
};

// Residual of tau_c d/dt int h rho ds = int [(Phi-s) h' + sigma h''] rho ds
// + sigma h'(0) rho(x,0,t), centered differences over consecutive snapshots.
MomentResidual weak_moment_residual(const std::vector<DensityField>& snaps,
                                    const std::vector<double>& snap_times,
                                    const ModelParams& p,
                                    const std::function<double(double)>& h,
                                    const std::function<double(double)>& hp,
                                    const std::function<double(double)>& hpp);

// h used in the global-existence argument: C^2, increasing, h(s)=s for s>=1,
// h(0)=h'(0)=h''(0)=0.
double smoothed_linear_h(double s);
double smoothed_linear_hp(double s);
double smoothed_linear_hpp(double s);

namespace reference {
// Serial single-population step, straightforward loops; testing oracle for
// the OpenMP production path.
DensityField step_fokker_planck(const DensityField& f, const ModelParams& p,
                                const SolverConfig& cfg);
} // namespace reference

} // namespace nfsf
