#include "nfsf/gridcell.hpp"

#include "nfsf/convolution.hpp"
#include "nfsf/special.hpp"

#include <cmath>
#include <stdexcept>

namespace nfsf {

void PopulationSet::validate(const ModelParams& p) const
{
    if (rho.size() != 4 || shifts.size() != 4 || inputs.size() != 4)
        throw std::invalid_argument("PopulationSet: four populations required");
    for (const auto& f : rho)
        if (!(f.xg == rho[0].xg) || !(f.sg == rho[0].sg))
            throw std::invalid_argument("PopulationSet: grid mismatch between populations");
    if (rho[0].xg.d != p.d)
        throw std::invalid_argument("PopulationSet: dimension mismatch");
}

std::array<int, 2> PopulationSet::snap_shift(const SpatialGrid& g, double r1, double r2)
{
    int i1 = (int)std::llround(r1 / g.dx());
    int i2 = g.d == 2 ? (int)std::llround(r2 / g.dx()) : 0;
    return {i1, i2};
}

double PopulationSet::shift_norm(const SpatialGrid& g, int i1, int i2)
{
    auto wrap_half = [&](int i) {
        int m = ((i % g.n) + g.n) % g.n;
        if (m > g.n / 2) m -= g.n;
        return m;
    };
    double a = wrap_half(i1) * g.dx();
    double b = g.d == 2 ? wrap_half(i2) * g.dx() : 0.0;
    return std::hypot(a, b);
}

std::vector<std::vector<double>> coupled_drift(const PopulationSet& set, const ModelParams& p,
                                               double t)
{
    set.validate(p);
    int nx = set.rho[0].xg.size();
    std::vector<double> coupling(nx, 0.0);
    for (int b = 0; b < 4; ++b) {
        auto rb = mean_activity(set.rho[b]);
        auto conv = periodic_convolve_shifted(p.W, rb, set.shifts[b][0], set.shifts[b][1]);
        for (int x = 0; x < nx; ++x) coupling[x] += conv[x];
    }
    std::vector<std::vector<double>> out(4, std::vector<double>(nx));
    for (int b = 0; b < 4; ++b) {
        double bb = set.inputs[b](t);
        for (int x = 0; x < nx; ++x)
            out[b][x] = p.phi(0.25 * coupling[x] + bb);
    }
    return out;
}

void step4(PopulationSet& set, const ModelParams& p, const SolverConfig& cfg, double t)
{
    direct_step(set.rho, p, cfg, t,
                [&](const std::vector<DensityField>& pops, double tt) {
                    PopulationSet tmp = set;
                    tmp.rho = pops;
                    return coupled_drift(tmp, p, tt);
                });
}

GridCellRun run_gridcell(const PopulationSet& ic, const ModelParams& p, const SolverConfig& cfg)
{
    cfg.validate();
    ic.validate(p);
    GridCellRun run;
    PopulationSet set = ic;
    int nx = set.rho[0].xg.size();

    std::vector<std::vector<double>> mass0(4, std::vector<double>(nx));
    for (int b = 0; b < 4; ++b)
        for (int x = 0; x < nx; ++x) mass0[b][x] = set.rho[b].per_x_mass(x);

    auto record = [&](double t) {
        run.times.push_back(t);
        std::vector<std::vector<double>> rb(4), bv(4, std::vector<double>(nx));
        for (int b = 0; b < 4; ++b) {
            rb[b] = mean_activity(set.rho[b]);
            for (int x = 0; x < nx; ++x) bv[b][x] = set.rho[b].boundary_value(x);
        }
        run.rhobar.push_back(std::move(rb));
        run.boundary.push_back(std::move(bv));
    };
    auto snap = [&](double t) {
        run.snap_times.push_back(t);
        run.snapshots.push_back(set.rho);
    };

    record(0.0);
    snap(0.0);
    int nsteps = (int)std::llround(cfg.t_end / cfg.dt);
    for (int k = 1; k <= nsteps; ++k) {
        step4(set, p, cfg, (k - 1) * cfg.dt);
        record(k * cfg.dt);
        for (int b = 0; b < 4; ++b) {
            for (int x = 0; x < nx; ++x) {
                double m = set.rho[b].per_x_mass(x);
                run.monitor.max_mass_drift = std::max(
                    run.monitor.max_mass_drift, std::fabs(m - mass0[b][x]) / mass0[b][x]);
                run.monitor.wall_mass = std::max(
                    run.monitor.wall_mass, set.rho[b].at(x, set.rho[b].sg.n - 1) * set.rho[b].sg.ds());
            }
            run.monitor.min_rho = std::min(run.monitor.min_rho, set.rho[b].min_value());
        }
        if ((cfg.snapshot_stride > 0 && k % cfg.snapshot_stride == 0) || k == nsteps)
            snap(k * cfg.dt);
    }
    return run;
}

StefanRun stefan4(const std::vector<std::function<double(double, double, double)>>& rho0,
                  const PopulationSet& proto, const ModelParams& p, const SpatialGrid& xg,
                  const ActivityGrid& sg, const StefanConfig& cfg)
{
    if (rho0.size() != 4)
        throw std::invalid_argument("stefan4: four initial conditions required");
    auto [pnorm, map] = normalize_parameters(p);
    (void)map;
    auto shifts = proto.shifts;
    // inputs on the normalized time axis
    std::vector<ExternalInput> inputs = proto.inputs;
    for (auto& in : inputs)
        for (double& t : in.times) t /= p.tau_c;

    StefanDrift drift = [pnorm = pnorm, shifts, inputs](double tau_abs,
                                                        const std::vector<std::vector<double>>& qbar,
                                                        std::vector<std::vector<double>>& psi) {
        double a = stefan_alpha(tau_abs);
        double tn = stefan_t_of_tau(tau_abs);
        int nx = (int)qbar[0].size();
        std::vector<double> coupling(nx, 0.0);
        for (int b = 0; b < 4; ++b) {
            auto conv = periodic_convolve_shifted(pnorm.W, qbar[b], shifts[b][0], shifts[b][1]);
            for (int x = 0; x < nx; ++x) coupling[x] += conv[x];
        }
        psi.assign(4, std::vector<double>(nx));
        for (int b = 0; b < 4; ++b) {
            double bb = inputs[b](tn);
            for (int x = 0; x < nx; ++x)
                psi[b][x] = pnorm.phi(a * 0.25 * coupling[x] + bb) * a;
        }
    };
    return run_stefan_multi(rho0, p, xg, sg, cfg, drift);
}

ShiftConditionRecord shift_condition(const EquilibriumState& st, const ModelParams& p,
                                     const PopulationSet& set, double alpha, double xi,
                                     PoincareMethod method)
{
    ShiftConditionRecord rec;
    const SpatialGrid& g = p.W.grid;
    double gamma = poincare_constant(st, p, method);
    double lip = p.phi.lipschitz();
    double gradW = p.W.grad_sup;
    double M = st.sup_M_inf();
    double a32 = std::pow(alpha, 1.5);

    double lhs = 0.0;
    for (int b = 0; b < 4; ++b)
        for (int j = 0; j < 4; ++j)
            lhs = std::max(lhs, PopulationSet::shift_norm(g, set.shifts[b][0] + set.shifts[j][0],
                                                          set.shifts[b][1] + set.shifts[j][1]));
    double denom = gradW * lip * M;
    rec.symmetric.name = "shift-condition";
    rec.symmetric.lhs = lhs;
    rec.symmetric.rhs = denom > 0.0 ? a32 * (2.0 - 4.0 * xi) * std::sqrt(gamma) * p.sigma / denom
                                    : HUGE_VAL;
    rec.symmetric.pass = rec.symmetric.lhs <= rec.symmetric.rhs;
    rec.symmetric.operands = {{"alpha", alpha},     {"xi", xi},       {"gamma", gamma},
                              {"sigma", p.sigma},   {"gradW", gradW}, {"phi_lip", lip},
                              {"M_inf", M}};

    double denom2 = gradW * lip * std::sqrt(M);
    rec.asymmetric.name = "shift-condition-asymmetric-W";
    rec.asymmetric.lhs = 2.0 * p.Ld();
    rec.asymmetric.rhs = denom2 > 0.0
                             ? a32 * (2.0 - xi) * std::sqrt(gamma) * p.sigma / denom2
                             : HUGE_VAL;
    rec.asymmetric.pass = rec.asymmetric.lhs <= rec.asymmetric.rhs;
    rec.asymmetric.operands = rec.symmetric.operands;
    return rec;
}

} // namespace nfsf
