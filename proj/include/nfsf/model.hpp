#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace nfsf {

// Uniform periodic grid on the torus [0,L)^d, nodes x_i = i*dx.
struct SpatialGrid {
    int d = 1;
    double L = 1.0;
    int n = 1; // points per dimension

    SpatialGrid() = default;
    SpatialGrid(int d_, double L_, int n_);

    double dx() const { return L / n; }
    double cell_volume() const { return d == 1 ? dx() : dx() * dx(); }
    int size() const { return d == 1 ? n : n * n; }
    int wrap(int i) const { int m = i % n; return m < 0 ? m + n : m; }
    int index(int i, int j = 0) const { return d == 1 ? wrap(i) : wrap(i) * n + wrap(j); }
    double coord(int i) const { return wrap(i) * dx(); }
    bool operator==(const SpatialGrid& o) const { return d == o.d && L == o.L && n == o.n; }
};

// Cell-centered grid on the truncated activity interval [0, s_max],
// centers s_j = (j+1/2)*ds, faces at j*ds.
struct ActivityGrid {
    int n = 0;
    double s_max = 0.0;

    ActivityGrid() = default;
    ActivityGrid(int n_, double s_max_);

    double ds() const { return s_max / n; }
    double center(int j) const { return (j + 0.5) * ds(); }
    double face(int j) const { return j * ds(); }
    bool operator==(const ActivityGrid& o) const { return n == o.n && s_max == o.s_max; }

    // validates s_max >= phi_max + 10 sqrt(sigma) and n >= 32
    static ActivityGrid sized(double phi_max, double sigma, double ds_target);
};

enum class PhiKind { Linear, SmoothedRectifier, Sigmoid, Tabulated };

// Modulation nonlinearity Phi and its first two derivatives, defined on all of R.
struct ModulationFn {
    PhiKind kind = PhiKind::Linear;
    double p0 = 1.0, p1 = 0.0, p2 = 1.0; // meaning depends on kind
    std::vector<double> tab_x, tab_y;    // Tabulated only

    double operator()(double p) const;
    double deriv(double p) const;
    double deriv2(double p) const;
    double lipschitz() const;   // sup |Phi'|
    double deriv2_sup() const;  // sup |Phi''|
    int sign() const;           // +1 nonneg, -1 nonpos, 0 mixed
    bool increasing() const;

    bool invertible() const;
    double inverse(double v) const;
    // \int_0^{zeta} Phi^{-1}(w) dw for strictly increasing Phi (Lyapunov functional)
    double inverse_primitive(double zeta) const;

    ModulationFn scaled(double a) const; // a * Phi

    static ModulationFn linear(double gain, double offset = 0.0);
    // gain * nu * log(1 + exp(p/nu)); increasing, nonnegative, ~0 for p << -nu
    static ModulationFn rectifier(double gain, double nu);
    // amplitude / (1 + exp(-(p-center)/width))
    static ModulationFn sigmoid(double amplitude, double center, double width);
    static ModulationFn tabulated(std::vector<double> x, std::vector<double> y);
};

enum class KernelKind { Constant, Cosine, GaussianDiff, Tabulated };

// Periodic connectivity kernel sampled on a SpatialGrid, with grid-estimated norms.
struct ConnectivityKernel {
    SpatialGrid grid;
    KernelKind kind = KernelKind::Constant;
    std::vector<double> samples; // indexed like fields on grid
    double W0 = 0.0;             // rectangle sum * cell volume
    double norm_l1 = 0.0, norm_l2 = 0.0;
    double grad_sup = 0.0;       // sup |grad W|, grid estimate
    bool symmetric = true;       // W(x) == W(-x) on the grid to 1e-12

    double at(int i, int j = 0) const { return samples[grid.index(i, j)]; }

    static ConnectivityKernel constant(const SpatialGrid& g, double c);
    // mean + amp * cos(2 pi mode x1 / L)  (d=2: amp/d * sum_i cos(2 pi mode x_i / L))
    static ConnectivityKernel cosine(const SpatialGrid& g, double mean, double amp, int mode = 1);
    // periodicised a1 N(0,s1^2) - a2 N(0,s2^2)
    static ConnectivityKernel gaussian_diff(const SpatialGrid& g, double a1, double s1,
                                            double a2, double s2);
    static ConnectivityKernel tabulated(const SpatialGrid& g, std::vector<double> samples);

    ConnectivityKernel scaled(double a) const;

private:
    void finalize();
};

// External input B(t): constant or piecewise-linear in time.
struct ExternalInput {
    std::vector<double> times, values; // empty times => constant values[0]

    double operator()(double t) const;
    double sup_abs(double t_end) const;

    static ExternalInput constant(double b);
    static ExternalInput tabulated(std::vector<double> t, std::vector<double> v);
};

struct ModelParams; // fwd

// Two-way maps between original and normalized (tau_c = sigma = 1) variables:
// rho(x,s,t) = (1/sqrt(sigma)) rho~(x, s/sqrt(sigma), t/tau_c).
struct RescaleMap {
    double tau_c = 1.0, sigma = 1.0;
    double t_to_normalized(double t) const { return t / tau_c; }
    double t_to_original(double tn) const { return tn * tau_c; }
    double s_to_normalized(double s) const { return s / std::sqrt(sigma); }
    double s_to_original(double sn) const { return sn * std::sqrt(sigma); }
    double rho_to_normalized(double rho) const { return rho * std::sqrt(sigma); }
    double rho_to_original(double rhon) const { return rhon / std::sqrt(sigma); }
};

struct ModelParams {
    double tau_c = 1.0;
    double sigma = 1.0;
    double L = 1.0;
    int d = 1;
    ModulationFn phi;
    ConnectivityKernel W;
    ExternalInput B;

    void validate() const; // tau_c, sigma, L > 0; d in {1,2}; W grid consistent
    double inv_Ld() const; // 1 / L^d
    double Ld() const;
};

// Equivalent parameters with tau_c = 1, sigma = 1. Phi and W absorb the noise
// scale so that the drift argument W*rhobar + B is preserved:
// Phi~ = Phi/sqrt(sigma), W~ = sqrt(sigma) W, B~ = B.
std::pair<ModelParams, RescaleMap> normalize_parameters(const ModelParams& p);

} // namespace nfsf
