#pragma once

#include "nfsf/field.hpp"

#include <functional>
#include <string>
#include <vector>

namespace nfsf {

// Selfsimilar time change: tau = (e^{2t}-1)/2, alpha(tau) = (2 tau + 1)^{-1/2} = e^{-t}.
double stefan_alpha(double tau);
double stefan_tau_of_t(double t_norm);
double stefan_t_of_tau(double tau);

// Uniform node mesh on one window, absolute origin tau0.
struct TauMesh {
    double tau0 = 0.0;
    double dtau = 1e-3;
    int M = 100; // nodes 0..M
    double local(int m) const { return m * dtau; }
    double absolute(int m) const { return tau0 + m * dtau; }
    double length() const { return M * dtau; }
};

// Initial data of a window on a boundary-anchored grid: cell centers
// z0 + (j+1/2) dz, where z0 is the boundary position at window start.
struct ZRow {
    double z0 = 0.0;
    double dz = 0.0;
    std::vector<double> vals;
    double center(int j) const { return z0 + (j + 0.5) * dz; }
    int n() const { return (int)vals.size(); }
    double mass() const;
    double first_moment() const; // int z u dz
    double boundary_value() const
    {
        return vals.size() > 1 ? 1.5 * vals[0] - 0.5 * vals[1] : vals.empty() ? 0.0 : vals[0];
    }
};

struct StefanConfig {
    double dtau = 1e-3;
    double window = 0.1;     // target window length (<= 1)
    double picard_tol = 1e-10;
    int max_iter = 200;
    int max_halvings = 8;
    double dz = 0.02;        // normalized units
    double z_max = 0.0;      // 0 = auto
    double t_end = 1.0;      // original time units
    std::vector<double> snapshot_times; // original time units
    double blowup_threshold = 1e8;

    void validate() const;
};

// Per-population drift: fills psi[pop][x] at absolute time tau from the
// current qbar[pop][x] = ubar - gamma/L^d.
using StefanDrift = std::function<void(double tau_abs,
                                       const std::vector<std::vector<double>>& qbar,
                                       std::vector<std::vector<double>>& psi)>;

// Standard one-population drift Psi = Phi(alpha W*qbar + B(t(tau))) alpha for
// normalized parameters.
StefanDrift one_population_drift(const ModelParams& pnorm);

struct GammaPath {
    std::vector<std::vector<std::vector<double>>> gamma, psi; // [pop][x][node]
    bool blowup = false;
    int blowup_node = -1;
};

// RK4 integration of dgamma/dtau = -Psi on the mesh, ubar paths linearly
// interpolated at half nodes. Multi-population (coupled through drift).
GammaPath integrate_gamma(const std::vector<std::vector<std::vector<double>>>& ubar,
                          const std::vector<std::vector<double>>& gamma0,
                          const TauMesh& mesh, double inv_Ld, const StefanDrift& drift,
                          double blowup_threshold = 1e8);

// Convenience single-population wrapper returning [x][node] paths.
struct GammaPath1 {
    std::vector<std::vector<double>> gamma, psi;
    bool blowup = false;
    int blowup_node = -1;
};
GammaPath1 integrate_gamma(const std::vector<std::vector<double>>& ubar,
                           const std::vector<double>& gamma0, const ModelParams& pnorm,
                           const TauMesh& mesh);

struct WindowResult {
    TauMesh mesh;
    // [pop][x][node]; gamma is window-local (gamma[..][0] = start offset)
    std::vector<std::vector<std::vector<double>>> v, gamma, ubar, psi;
    bool converged = false;
    bool blowup = false;
    int iterations = 0;
    std::vector<double> update_history; // sup-norm Picard updates
};

// Picard fixed point of (v, ubar) -> (F_v, F_ubar) with gamma from
// integrate_gamma, on one window. u0 rows are the window initial data.
WindowResult picard_window(const std::vector<std::vector<ZRow>>& u0, const TauMesh& mesh,
                           double inv_Ld, const StefanDrift& drift, const StefanConfig& cfg);

// Single-population wrapper.
WindowResult picard_window(const std::vector<ZRow>& u0, const TauMesh& mesh,
                           const ModelParams& pnorm, const StefanConfig& cfg);

// u(x, z, tau_node) at arbitrary z targets from the Duhamel representation.
std::vector<double> reconstruct_u(const WindowResult& w, int pop, int x, int node,
                                  const ZRow& u0_row, const std::vector<double>& z_targets);

// rho(x,0,t) = (1/sqrt(sigma)) e^{t/tau_c} v(x, tau(t/tau_c))
double boundary_density_from_v(double v, double t_orig, const RescaleMap& map);
// rhobar(x,t) = sqrt(sigma) alpha(tau) (ubar - gamma/L^d)
double mean_from_triple(double ubar, double gamma, double t_orig, double inv_Ld,
                        const RescaleMap& map);

struct StefanRun {
    std::vector<double> tau_nodes; // absolute normalized tau
    std::vector<double> t_nodes;   // original time
    std::vector<int> node_window;  // window index each node was solved in
    struct PopTrace {
        // [x][node]; original-variable traces alongside the Stefan unknowns
        std::vector<std::vector<double>> v, gamma, ubar, psi, rho0, rhobar;
    };
    std::vector<PopTrace> pops;
    std::vector<DensityField> snapshots; // original variables, per pop contiguous
    std::vector<double> snap_times;
    std::vector<int> snap_pop; // population index per snapshot
    bool converged = true;
    bool blowup = false;
    std::string error;
    int window_count = 0;
    int total_iterations = 0;
    double max_mass_err = 0.0; // selfsimilar per-x mass deviation
};

// Full windowed run for one population. rho0(x1, x2, s) is sampled in original
// variables; outputs are in original variables.
StefanRun run_stefan(const std::function<double(double, double, double)>& rho0,
                     const ModelParams& p, const SpatialGrid& xg, const ActivityGrid& sg,
                     const StefanConfig& cfg);

// Multi-population run with per-population initial data and a caller-supplied
// drift in normalized variables (see gridcell).
StefanRun run_stefan_multi(const std::vector<std::function<double(double, double, double)>>& rho0,
                           const ModelParams& p, const SpatialGrid& xg, const ActivityGrid& sg,
                           const StefanConfig& cfg, const StefanDrift& drift_norm);

} // namespace nfsf
