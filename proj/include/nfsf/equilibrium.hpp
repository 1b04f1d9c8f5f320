#pragma once

#include "nfsf/field.hpp"

#include <vector>

namespace nfsf {

// Variance ratio of the half-line truncated Gaussian:
// M_inf / sigma = (1/L^d) g(Phi0 / sqrt(2 sigma)),
// g(eta) = 1 - (2/sqrt(pi)) E [ (1/sqrt(pi)) E + eta ],  E = exp(-eta^2)/(1+erf(eta)).
double g_variance_ratio(double eta);

struct TruncatedGaussianStats {
    double Z_rho;       // normalisation: rho = (1/Z) exp(-(s-Phi0)^2/(2 sigma)), per-x mass 1/L^d
    double rho_bar_inf; // first moment
    double M_inf;       // int (s - L^d rho_bar)^2 rho ds
};

TruncatedGaussianStats truncated_gaussian_stats(double phi0, double sigma, double Ld);

struct EquilibriumState {
    bool homogeneous = true;
    double sigma = 1.0; // noise strength the state was computed for
    double Phi0 = 0.0;
    double Phi0_prime = 0.0;
    double rho_bar_inf = 0.0;
    double M_inf = 0.0;
    double Z_rho = 0.0;
    DensityField profile; // grid-sampled, per-x mass exactly 1/L^d
    // per-x views (constant in the homogeneous case)
    std::vector<double> Phi0_x, rho_bar_x, M_inf_x;
    double sup_M_inf() const;
};

struct BranchResult {
    std::vector<double> roots; // all bracketed fixed points of c = Phi(W0 rho_bar(c) + B)
    double residual = 0.0;     // residual at the selected root
    int iterations = 0;
};

// Scalar fixed point Phi0 = Phi(W0 rho_bar_inf(Phi0) + B) by scan + bisection
// with secant refinement. Requires increasing Phi and constant B.
BranchResult solve_homogeneous_fixed_point(const ModelParams& p, double tol = 1e-12);

EquilibriumState homogeneous_branch(const ModelParams& p, const SpatialGrid& xg,
                                    const ActivityGrid& sg, double tol = 1e-12);

// x-dependent state assembled from a (typically long-time solver) profile.
EquilibriumState equilibrium_from_profile(const DensityField& f, const ModelParams& p);

struct StationarityResidual {
    double first_order = 0.0; // sup |sigma d_s rho + (s - Phi(W*rhobar+B)) rho|
    double solver_rhs = 0.0;  // sup of the discrete scheme RHS applied to the profile
    double sup() const { return first_order > solver_rhs ? first_order : solver_rhs; }
};

StationarityResidual stationarity_residual(const EquilibriumState& st, const ModelParams& p);

} // namespace nfsf
