#pragma once

#include "nfsf/convolution.hpp"
#include "nfsf/equilibrium.hpp"
#include "nfsf/field.hpp"

#include <string>
#include <vector>

namespace nfsf {

// chi^2-type relative entropy int int ((rho-rho_inf)/rho_inf)^2 rho_inf ds dx.
// Cells with rho_inf below 1e-300 are excluded; their rho-mass is reported.
double relative_entropy(const DensityField& rho, const DensityField& rho_inf,
                        double* excluded_mass = nullptr);

struct EntropyTrace {
    std::vector<double> times;
    std::vector<double> re;            // relative entropy
    std::vector<double> q;             // int 2E - H/sigma dx
    std::vector<double> excluded_mass;
    double re0() const { return re.empty() ? 0.0 : re.front(); }
};

EntropyTrace entropy_trace(const std::vector<DensityField>& snaps,
                           const std::vector<double>& times, const EquilibriumState& st,
                           const ModelParams& p);

enum class PoincareMethod { Conservative, Numeric };

// Poincare constant of the measure rho_inf(x) in s. Conservative returns the
// generic bound 1/sigma; Numeric returns the smallest nonzero eigenvalue of
// the no-flux weighted Sturm-Liouville operator -(1/rho) d_s (rho d_s .).
double poincare_constant_profile(const std::vector<double>& rho_row, const ActivityGrid& sg,
                                 PoincareMethod method, double sigma);
// inf over x for a full state
double poincare_constant(const EquilibriumState& st, const ModelParams& p, PoincareMethod method);

struct ConditionRecord {
    std::string name;
    double lhs = 0.0, rhs = 0.0;
    bool pass = false;
    std::vector<std::pair<std::string, double>> operands;
};

struct PropStab1Report {
    ConditionRecord poincare_estimate; // |Phi'| |W|_2 / L^{d/2} sup sqrt(M) < (sigma/2) sqrt(gamma~)
    ConditionRecord stabcond2;         // same lhs < sqrt(sigma)/2
    ConditionRecord stabcond3;         // |Phi'| |W|_2 / L^d < 1/2
    double gamma_tilde = 0.0;
    double C = 0.0; // the lhs constant of the proposition
};

PropStab1Report check_prop_stab1(const EquilibriumState& st, const ModelParams& p,
                                 PoincareMethod method = PoincareMethod::Conservative);

struct DecayPrediction {
    bool valid = false;
    double K = 0.0;
    double K_eps = 0.0;
};

// K = sqrt(g~) ((sigma/2) sqrt(g~) - C) - C^2 RE0 / (2 L^d sigma); only defined
// when the proposition condition holds.
DecayPrediction decay_rate_prediction(const EquilibriumState& st, const ModelParams& p,
                                      double re0, double eps = 0.0,
                                      PoincareMethod method = PoincareMethod::Conservative);

struct FourierMargins {
    std::vector<int> k1, k2;
    std::vector<double> margin; // sigma/M_inf - Phi0' Re(W_k)
    bool stable = false;
    double min_margin = 0.0;
    int argmin_k1 = 0, argmin_k2 = 0;
};

FourierMargins linear_fourier_threshold(const EquilibriumState& st, const FourierModes& modes);

struct NonlinearConditionRecord {
    bool pass = false;
    bool linearized_only = true; // Fourier criterion up to K_max, not the full L^2 form
    double alpha = 0.0;
    int K_max = 0;
    double min_mode = 0.0; // min over k of (1-alpha) - (M/sigma) Phi0' Re(W_k)
    int argmin_k1 = 0, argmin_k2 = 0;
};

// Linearized sufficient check: nonnegativity of (1-alpha) - (M/sigma) Phi0' W_k
// over |k| <= K_max (H-stability of the linearized quadratic form kernel).
// Refuses asymmetric W.
NonlinearConditionRecord check_nonlinear_condition(const EquilibriumState& st,
                                                   const ModelParams& p, double alpha,
                                                   int K_max);

struct MeanOdeRun {
    std::vector<double> times;
    std::vector<std::vector<double>> rhobar; // [time][x]
};

// RK4 for tau_c d rhobar/dt = -rhobar + Phi(W*rhobar + B)/L^d (noiseless mean field).
MeanOdeRun integrate_mean_ode(const ModelParams& p, std::vector<double> rhobar0, double dt,
                              double t_end);

// E[zeta] = -(1/2L^d) int int W(x-y) zeta(x) zeta(y) + int int_0^zeta (Phi^{-1}(w) - B) dw dx
double lyapunov_functional(const std::vector<double>& zeta, const ModelParams& p);
// E[Phi_rhobar(t)] along a mean-field trajectory
std::vector<double> lyapunov_values(const MeanOdeRun& run, const ModelParams& p);

struct DecayFit {
    double rate = 0.0; // positive = decay; slope of -log RE
    double r2 = 0.0;
    int n_used = 0;
};

// Least-squares slope of log RE(t) over the last half of the pre-floor samples.
DecayFit measure_decay(const std::vector<double>& times, const std::vector<double>& re,
                       double floor = 1e-15);

} // namespace nfsf
