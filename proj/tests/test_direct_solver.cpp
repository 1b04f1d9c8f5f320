#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nfsf/direct_solver.hpp"
#include "nfsf/special.hpp"
#include "support.hpp"

#include <cmath>
#include <random>

using namespace nfsf;

namespace {

ModelParams ou_params(const SpatialGrid& g, double sigma = 1.0, double B = 1.0)
{
    // W == 0, Phi(p) = p: per-x decoupled Ornstein-Uhlenbeck toward B
    ModelParams p;
    p.sigma = sigma;
    p.L = g.L;
    p.d = g.d;
    p.phi = ModulationFn::linear(1.0);
    p.W = ConnectivityKernel::constant(g, 0.0);
    p.B = ExternalInput::constant(B);
    return p;
}

ModelParams const_phi_params(const SpatialGrid& g, double phi_value, double sigma = 1.0)
{
    ModelParams p;
    p.sigma = sigma;
    p.L = g.L;
    p.d = g.d;
    p.phi = ModulationFn::linear(0.0, phi_value);
    p.W = ConnectivityKernel::constant(g, 0.0);
    p.B = ExternalInput::constant(0.0);
    return p;
}

} // namespace

TEST_CASE("half-Gaussian is a discrete steady state when Phi == 0")
{
    double sigma = 1.0;
    SpatialGrid g(1, 1.0, 4);
    int ns = 500; // ds = sqrt(sigma)/50
    ActivityGrid sg(ns, 10.0 * std::sqrt(sigma));
    ModelParams p = const_phi_params(g, 0.0, sigma);

    DensityField ic = gaussian_density(g, sg, 1.0, 0.0, std::sqrt(sigma));
    SolverConfig cfg;
    cfg.dt = 2e-3;
    cfg.t_end = 5.0;
    DirectRun run = run_direct(ic, p, cfg);

    double sup = 0.0;
    const DensityField& fin = run.snapshots.back();
    for (size_t i = 0; i < fin.rho.size(); ++i)
        sup = std::max(sup, std::fabs(fin.rho[i] - ic.rho[i]));
    CHECK(sup < 1e-6);
    CHECK(run.monitor.max_mass_drift < 1e-12);
}

TEST_CASE("OU case: rhobar trace solves the mean ODE driven by the boundary trace")
{
    SpatialGrid g(1, 1.0, 2);
    ActivityGrid sg(300, 11.0);
    ModelParams p = ou_params(g);
    DensityField ic = gaussian_density(g, sg, 1.0, 2.0, 0.8);

    SolverConfig cfg;
    cfg.dt = 5e-4;
    cfg.t_end = 1.0;
    DirectRun run = run_direct(ic, p, cfg);

    // integrate tau_c rbar' = -rbar + B/L^d + sigma rho(0,t) with the recorded trace
    double rbar = run.rhobar[0][0];
    double maxerr = 0.0;
    for (size_t i = 1; i < run.times.size(); ++i) {
        double dt = run.times[i] - run.times[i - 1];
        double f0 = -run.rhobar[i - 1][0] + p.B(0.0) + p.sigma * run.boundary[i - 1][0];
        double f1 = -run.rhobar[i][0] + p.B(0.0) + p.sigma * run.boundary[i][0];
        rbar += 0.5 * dt * (f0 + f1) / p.tau_c;
        maxerr = std::max(maxerr, std::fabs(rbar - run.rhobar[i][0]));
    }
    CHECK(maxerr < 2e-3);
}

TEST_CASE("one tiny step matches the discrete right-hand side")
{
    SpatialGrid g(1, 1.0, 4);
    ActivityGrid sg(200, 10.0);
    ModelParams p = ou_params(g);
    DensityField f = gaussian_density(g, sg, 1.0, 1.0, 0.9);

    SolverConfig cfg;
    cfg.dt = 1e-8;
    DensityField f2 = step(f, p, cfg);
    auto rhs = flux_divergence(f, p, cfg.scheme, 0.0);

    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < f.rho.size(); ++i) {
        double d = (f2.rho[i] - f.rho[i]) / cfg.dt;
        num = std::max(num, std::fabs(d - rhs[i]));
        den = std::max(den, std::fabs(rhs[i]));
    }
    CHECK(num / den < 1e-4);
}

TEST_CASE("per-step mass conservation and positivity")
{
    SpatialGrid g(1, 1.0, 8);
    ActivityGrid sg(160, 9.0);
    ModelParams p;
    p.sigma = 0.8;
    p.L = 1.0;
    p.d = 1;
    p.phi = ModulationFn::rectifier(1.0, 0.05);
    p.W = ConnectivityKernel::cosine(g, -0.4, 0.3);
    p.B = ExternalInput::constant(0.8);

    DensityField f = gaussian_density(g, sg, 1.0, 0.5, 0.7);
    SolverConfig cfg;
    cfg.dt = positivity_dt_bound(f, p, 0.0);
    double m0 = f.per_x_mass(0);
    for (int k = 0; k < 50; ++k) {
        f = step(f, p, cfg);
        CHECK(std::fabs(f.per_x_mass(0) - m0) / m0 < 1e-13);
        CHECK(f.min_value() >= 0.0);
    }

    // implicit solve keeps positivity well beyond the explicit bound too
    DensityField h = gaussian_density(g, sg, 1.0, 0.5, 0.7);
    cfg.dt = 50.0 * positivity_dt_bound(h, p, 0.0);
    for (int k = 0; k < 10; ++k) {
        h = step(h, p, cfg);
        CHECK(h.min_value() >= 0.0);
    }

    // upwind-implicit scheme conserves and stays positive as well
    DensityField u = gaussian_density(g, sg, 1.0, 0.5, 0.7);
    cfg.scheme = Scheme::UpwindImplicit;
    cfg.dt = 1e-3;
    for (int k = 0; k < 20; ++k) {
        u = step(u, p, cfg);
        CHECK(std::fabs(u.per_x_mass(0) - m0) / m0 < 1e-13);
        CHECK(u.min_value() >= 0.0);
    }
}

TEST_CASE("boundary trace: stationary value, universal bound, zero start")
{
    double sigma = 1.2, L = 1.0;
    SpatialGrid g(1, L, 4);
    ActivityGrid sg(400, 10.0 * std::sqrt(sigma));
    ModelParams p = const_phi_params(g, 0.0, sigma);

    // half-Gaussian stationary: rho(0) = (1/L^d) sqrt(2/(pi sigma)) within 2%
    DensityField ic = gaussian_density(g, sg, L, 0.0, std::sqrt(sigma));
    SolverConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 0.5;
    DirectRun run = run_direct(ic, p, cfg);
    double expect = std::sqrt(2.0 / (kPi * sigma)) / L;
    CHECK(run.boundary.back()[0] == doctest::Approx(expect).epsilon(0.02));

    // Phi >= 0 run: universal bound with 5% slack at every recorded time
    ModelParams pr = p;
    pr.phi = ModulationFn::rectifier(0.8, 0.05);
    pr.W = ConnectivityKernel::cosine(g, -0.5, 0.4);
    pr.B = ExternalInput::constant(0.7);
    DensityField ic2 = gaussian_density(g, sg, L, 1.0, 0.6);
    DirectRun run2 = run_direct(ic2, pr, cfg);
    for (size_t i = 1; i < run2.times.size(); ++i) {
        double t = run2.times[i];
        double bound = std::sqrt(2.0 / (kPi * sigma)) / L /
                       std::sqrt(1.0 - std::exp(-2.0 * t / pr.tau_c));
        for (double v : run2.boundary[i]) CHECK(v <= bound * 1.05);
    }

    // rho0 vanishing at s=0 gives a zero initial trace
    DensityField ic3 = gaussian_density(g, sg, L, 3.0, 0.4);
    SolverConfig quick;
    quick.dt = 1e-3;
    quick.t_end = 1e-3;
    DirectRun run3 = run_direct(ic3, p, quick);
    CHECK(std::fabs(run3.boundary.front()[0]) < 1e-12);
}

TEST_CASE("weak moment residual: mass is exact, first moment converges at order ~2")
{
    SpatialGrid g(1, 1.0, 2);
    ModelParams p = ou_params(g);

    auto run_residual = [&](int ns, double dt) {
        ActivityGrid sg(ns, 10.0);
        DensityField ic = gaussian_density(g, sg, 1.0, 1.5, 0.8);
        SolverConfig cfg;
        cfg.dt = dt;
        cfg.t_end = 0.2;
        cfg.snapshot_stride = 1;
        DirectRun run = run_direct(ic, p, cfg);
        auto res_mass = weak_moment_residual(run.snapshots, run.snap_times, p,
                                             [](double) { return 1.0; },
                                             [](double) { return 0.0; },
                                             [](double) { return 0.0; });
        auto res_s = weak_moment_residual(run.snapshots, run.snap_times, p,
                                          [](double s) { return s; },
                                          [](double) { return 1.0; },
                                          [](double) { return 0.0; });
        // the Gaussian start violates the no-flux condition at t=0; measure
        // past the start-up layer
        double sup_s = 0.0;
        for (size_t i = 0; i < res_s.times.size(); ++i)
            if (res_s.times[i] >= 0.05) sup_s = std::max(sup_s, res_s.sup_residual[i]);
        return std::pair{res_mass.sup(), sup_s};
    };

    // refine ds with dt ~ ds^2 so both error sources shrink at second order
    auto [m1, r1] = run_residual(64, 4e-3);
    auto [m2, r2] = run_residual(128, 1e-3);
    auto [m3, r3] = run_residual(256, 2.5e-4);
    CHECK(m1 < 1e-12);
    CHECK(m2 < 1e-12);
    CHECK(m3 < 1e-11); // centered differences divide machine noise by 2 dt
    double order1 = std::log2(r1 / r2), order2 = std::log2(r2 / r3);
    CHECK(order1 > 1.8);
    CHECK(order2 > 1.8);
}

TEST_CASE("second moment obeys the Gronwall bound for nonpositive Phi")
{
    SpatialGrid g(1, 1.0, 2);
    double sigma = 1.0;
    ActivityGrid sg(300, 12.0);
    ModelParams p = const_phi_params(g, -0.5, sigma); // Phi <= 0

    DensityField ic = gaussian_density(g, sg, 1.0, 2.5, 0.7);
    SolverConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 2.0;
    cfg.snapshot_stride = 100;
    DirectRun run = run_direct(ic, p, cfg);

    auto m2_of = [&](const DensityField& f) {
        double acc = 0.0;
        for (int j = 0; j < f.sg.n; ++j)
            acc += f.sg.center(j) * f.sg.center(j) * f.at(0, j);
        return acc * f.sg.ds();
    };
    double M20 = m2_of(run.snapshots.front());
    for (size_t i = 0; i < run.snapshots.size(); ++i) {
        double t = run.snap_times[i];
        double bound = sigma / p.Ld() * (1.0 - std::exp(-2.0 * t / p.tau_c)) +
                       M20 * std::exp(-2.0 * t / p.tau_c);
        CHECK(m2_of(run.snapshots[i]) <= bound * 1.05);
    }

    // rhobar bound for nonpositive Phi (with 5% slack)
    for (size_t i = 0; i < run.times.size(); ++i) {
        double t = run.times[i];
        double bound = (1.0 + sigma - sigma * std::exp(-2.0 * t / p.tau_c)) / p.Ld() +
                       std::exp(-2.0 * t / p.tau_c) * M20;
        CHECK(run.rhobar[i][0] <= bound * 1.05);
    }
}

TEST_CASE("grid self-convergence: order ~2 in ds, order ~1 in dt")
{
    SpatialGrid g(1, 1.0, 2);
    ModelParams p = ou_params(g);

    auto m2_at_end = [&](int ns, double dt) {
        ActivityGrid sg(ns, 10.0);
        DensityField ic = gaussian_density(g, sg, 1.0, 1.5, 0.8);
        SolverConfig cfg;
        cfg.dt = dt;
        cfg.t_end = 0.5;
        DirectRun run = run_direct(ic, p, cfg);
        const DensityField& f = run.snapshots.back();
        double acc = 0.0;
        for (int j = 0; j < f.sg.n; ++j)
            acc += f.sg.center(j) * f.sg.center(j) * f.at(0, j);
        return acc * f.sg.ds();
    };

    // ds refinement at tiny fixed dt
    double a1 = m2_at_end(50, 2e-5), a2 = m2_at_end(100, 2e-5), a3 = m2_at_end(200, 2e-5);
    double order_ds = std::log2(std::fabs(a1 - a2) / std::fabs(a2 - a3));
    CHECK(order_ds > 1.8);

    // dt refinement at fixed ds
    double b1 = m2_at_end(200, 8e-3), b2 = m2_at_end(200, 4e-3), b3 = m2_at_end(200, 2e-3);
    double order_dt = std::log2(std::fabs(b1 - b2) / std::fabs(b2 - b3));
    CHECK(order_dt > 0.9);
}

TEST_CASE("production OpenMP step equals the serial reference")
{
    SpatialGrid g(1, 1.0, 16);
    ActivityGrid sg(120, 9.0);
    ModelParams p;
    p.sigma = 1.0;
    p.L = 1.0;
    p.d = 1;
    p.phi = ModulationFn::sigmoid(1.5, 0.2, 0.3);
    p.W = ConnectivityKernel::cosine(g, -0.6, 0.4);
    p.B = ExternalInput::constant(0.9);
    DensityField f = gaussian_density(g, sg, 1.0, 0.8, 0.6);
    // x-dependent start
    for (int x = 0; x < g.size(); ++x)
        for (int j = 0; j < sg.n; ++j)
            f.at(x, j) *= 1.0 + 0.1 * std::cos(2.0 * kPi * g.coord(x));
    f.normalize_per_x(1.0);

    SolverConfig cfg;
    cfg.dt = 1e-3;
    DensityField a = f, b = f;
    for (int k = 0; k < 10; ++k) {
        a = step(a, p, cfg);
        b = reference::step_fokker_planck(b, p, cfg);
    }
    for (size_t i = 0; i < a.rho.size(); ++i)
        CHECK(a.rho[i] == doctest::Approx(b.rho[i]).epsilon(1e-13));
}

TEST_CASE("Picard-iterated coupling agrees with frozen coupling as dt -> 0")
{
    SpatialGrid g(1, 1.0, 8);
    ActivityGrid sg(100, 9.0);
    ModelParams p;
    p.sigma = 1.0;
    p.L = 1.0;
    p.d = 1;
    p.phi = ModulationFn::rectifier(0.8, 0.05);
    p.W = ConnectivityKernel::cosine(g, -0.3, 0.5);
    p.B = ExternalInput::constant(0.9);
    DensityField f = gaussian_density(g, sg, 1.0, 0.6, 0.7);

    SolverConfig frozen;
    frozen.dt = 1e-4;
    frozen.t_end = 0.05;
    SolverConfig picard = frozen;
    picard.picard_max_iter = 5;

    DirectRun rf = run_direct(f, p, frozen);
    DirectRun rp = run_direct(f, p, picard);
    double diff = 0.0;
    for (size_t i = 0; i < rf.snapshots.back().rho.size(); ++i)
        diff = std::max(diff, std::fabs(rf.snapshots.back().rho[i] - rp.snapshots.back().rho[i]));
    CHECK(diff < 1e-5);
    CHECK(rp.monitor.max_mass_drift < 1e-12);
}
