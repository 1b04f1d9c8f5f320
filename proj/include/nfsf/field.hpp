#pragma once

#include "nfsf/model.hpp"

#include <functional>
#include <vector>

namespace nfsf {

// rho(x, s) on SpatialGrid x ActivityGrid at one time; x-major storage.
struct DensityField {
    SpatialGrid xg;
    ActivityGrid sg;
    std::vector<double> rho; // [x * sg.n + j]
    double time = 0.0;

    DensityField() = default;
    DensityField(const SpatialGrid& x, const ActivityGrid& s)
        : xg(x), sg(s), rho(x.size() * s.n, 0.0) {}

    double& at(int x, int j) { return rho[(size_t)x * sg.n + j]; }
    double at(int x, int j) const { return rho[(size_t)x * sg.n + j]; }
    const double* row(int x) const { return rho.data() + (size_t)x * sg.n; }
    double* row(int x) { return rho.data() + (size_t)x * sg.n; }

    double per_x_mass(int x) const;
    double total_mass() const;
    double min_value() const;
    // face value at s=0 by linear extrapolation from the first two cells
    double boundary_value(int x) const { return 1.5 * at(x, 0) - 0.5 * at(x, 1); }

    // scale all per-x rows so that per-x mass is exactly target (default 1/L^d)
    void normalize_per_x(double target);
};

// rhobar(x) = sum_j s_j rho[x,j] ds
std::vector<double> mean_activity(const DensityField& f);

// Phi(W * rhobar + B(t)) on the spatial grid
std::vector<double> drift_field(const DensityField& f, const ModelParams& p, double t);

// Discrete proxy for fast decay: sup over the last 10% of cells of |rho s^4|
// and |d_s rho s^4|.
struct DecayCertificate {
    double tail_sup_rho_s4 = 0.0;
    double tail_sup_drho_s4 = 0.0;
    bool passes(double threshold) const
    {
        return tail_sup_rho_s4 <= threshold && tail_sup_drho_s4 <= threshold;
    }
};

DecayCertificate decay_certificate(const DensityField& f);

struct CompatibleCheck {
    bool nonnegative = false;
    double max_mass_error = 0.0; // relative per-x mass deviation from 1/L^d
    DecayCertificate decay;
    bool ok(double mass_tol = 1e-10, double decay_threshold = 1e-8) const
    {
        return nonnegative && max_mass_error <= mass_tol && decay.passes(decay_threshold);
    }
};

CompatibleCheck check_compatible(const DensityField& f, const ModelParams& p);

// Builders. All renormalize per-x mass to 1/L^d exactly on the grid.
DensityField sample_density(const SpatialGrid& xg, const ActivityGrid& sg, double Ld,
                            const std::function<double(double x1, double x2, double s)>& fn);
// x-homogeneous truncated Gaussian exp(-(s-center)^2 / (2 width^2))
DensityField gaussian_density(const SpatialGrid& xg, const ActivityGrid& sg, double Ld,
                              double center, double width);

} // namespace nfsf
