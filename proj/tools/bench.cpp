// Benchmark comparing the OpenMP kernels against their serial references.
#include "nfsf/convolution.hpp"
#include "nfsf/direct_solver.hpp"
#include "nfsf/stability.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <random>

using namespace nfsf;
using clk = std::chrono::high_resolution_clock;

static double ms_since(clk::time_point t0)
{
    return std::chrono::duration<double, std::milli>(clk::now() - t0).count();
}

int main()
{
    std::printf("threads: %d\n\n", omp_get_max_threads());
    std::printf("%-28s %10s %10s %8s\n", "kernel", "serial ms", "omp ms", "speedup");

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);

    { // periodic convolution, d=2
        SpatialGrid g(2, 1.0, 96);
        std::vector<double> f(g.size());
        for (double& v : f) v = U(rng);
        auto W = ConnectivityKernel::cosine(g, -0.4, 0.6);
        auto t0 = clk::now();
        auto a = reference::convolve(W, f);
        double ts = ms_since(t0);
        t0 = clk::now();
        auto b = periodic_convolve(W, f);
        double tp = ms_since(t0);
        double diff = 0.0;
        for (size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::fabs(a[i] - b[i]));
        std::printf("%-28s %10.2f %10.2f %8.2f   (max diff %.2e)\n", "periodic_convolve 96x96",
                    ts, tp, ts / tp, diff);
    }

    { // direct solver step
        SpatialGrid xg(1, 1.0, 256);
        ActivityGrid sg(512, 12.0);
        ModelParams p;
        p.sigma = 1.0;
        p.W = ConnectivityKernel::cosine(xg, -0.5, 0.3);
        p.B = ExternalInput::constant(1.0);
        p.phi = ModulationFn::rectifier(1.0, 0.05);
        DensityField f = gaussian_density(xg, sg, 1.0, 1.0, 1.0);
        SolverConfig cfg;
        cfg.dt = 1e-3;
        const int reps = 50;
        auto t0 = clk::now();
        DensityField fs = f;
        for (int i = 0; i < reps; ++i) fs = reference::step_fokker_planck(fs, p, cfg);
        double ts = ms_since(t0);
        t0 = clk::now();
        DensityField fp = f;
        for (int i = 0; i < reps; ++i) fp = step(fp, p, cfg);
        double tp = ms_since(t0);
        double diff = 0.0;
        for (size_t i = 0; i < fs.rho.size(); ++i)
            diff = std::max(diff, std::fabs(fs.rho[i] - fp.rho[i]));
        std::printf("%-28s %10.2f %10.2f %8.2f   (max diff %.2e)\n",
                    "direct step 256x512 x50", ts, tp, ts / tp, diff);
    }

    { // relative entropy reduction
        SpatialGrid xg(1, 1.0, 512);
        ActivityGrid sg(1024, 10.0);
        DensityField a = gaussian_density(xg, sg, 1.0, 1.0, 1.0);
        DensityField b = gaussian_density(xg, sg, 1.0, 1.1, 1.0);
        const int reps = 50;
        auto t0 = clk::now();
        double acc = 0.0;
        for (int i = 0; i < reps; ++i) acc += relative_entropy(a, b);
        double ts = ms_since(t0);
        std::printf("%-28s %10.2f %10s %8s   (value %.3e)\n", "relative_entropy 512x1024", ts,
                    "-", "-", acc / reps);
    }
    return 0;
}
