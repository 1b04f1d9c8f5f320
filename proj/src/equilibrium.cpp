#include "nfsf/equilibrium.hpp"

#include "nfsf/convolution.hpp"
#include "nfsf/direct_solver.hpp"
#include "nfsf/special.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nfsf {

double g_variance_ratio(double eta)
{
    double E = 1.0 / erfcx(-eta); // exp(-eta^2) / (1 + erf(eta))
    return 1.0 - (2.0 * kInvSqrtPi) * E * (kInvSqrtPi * E + eta);
}

TruncatedGaussianStats truncated_gaussian_stats(double phi0, double sigma, double Ld)
{
    if (!(sigma > 0.0)) throw std::domain_error("truncated_gaussian_stats: sigma must be positive");
    double eta = phi0 / std::sqrt(2.0 * sigma);
    double I0 = std::sqrt(kPi * sigma / 2.0) * erfc(-eta);
    TruncatedGaussianStats st;
    st.Z_rho = Ld * I0;
    double E = 1.0 / erfcx(-eta);
    st.rho_bar_inf = (phi0 + std::sqrt(2.0 * sigma / kPi) * E) / Ld;
    st.M_inf = sigma * g_variance_ratio(eta) / Ld;
    return st;
}

double EquilibriumState::sup_M_inf() const
{
    if (homogeneous || M_inf_x.empty()) return M_inf;
    double m = M_inf_x[0];
    for (double v : M_inf_x) m = std::max(m, v);
    return m;
}

BranchResult solve_homogeneous_fixed_point(const ModelParams& p, double tol)
{
    p.validate();
    if (!p.phi.increasing())
        throw std::invalid_argument("homogeneous_branch: Phi must be increasing");
    if (!p.B.times.empty())
        throw std::invalid_argument("homogeneous_branch: B must be constant");

    double B = p.B(0.0), W0 = p.W.W0, Ld = p.Ld();
    auto T = [&](double c) {
        return p.phi(W0 * truncated_gaussian_stats(c, p.sigma, Ld).rho_bar_inf + B);
    };
    auto resid = [&](double c) { return c - T(c); };

    BranchResult br;

    // the rectified high-noise regime pins Phi0 = 0 exactly; probe it first
    if (resid(0.0) == 0.0) {
        br.roots.push_back(0.0);
        br.residual = 0.0;
        return br;
    }

    double scale = 1.0 + std::sqrt(p.sigma) + std::fabs(p.phi(B));
    double lo = -50.0 * scale, hi = 50.0 * scale;
    const int nscan = 4096;
    double prev_c = lo, prev_r = resid(lo);
    for (int i = 1; i <= nscan; ++i) {
        double c = lo + (hi - lo) * i / nscan;
        double r = resid(c);
        if (r == 0.0) {
            br.roots.push_back(c);
        } else if (prev_r * r < 0.0) {
            double a = prev_c, b = c, ra = prev_r;
            for (int it = 0; it < 200; ++it) {
                ++br.iterations;
                double mid = 0.5 * (a + b);
                // secant proposal, kept if it stays in the bracket
                double rb = resid(b);
                if (rb != ra) {
                    double sec = b - rb * (b - a) / (rb - ra);
                    if (sec > a && sec < b) mid = sec;
                }
                double rm = resid(mid);
                if (std::fabs(rm) < tol || b - a < 1e-15 * (1.0 + std::fabs(mid))) {
                    a = b = mid;
                    break;
                }
                if (ra * rm <= 0.0) { b = mid; }
                else { a = mid; ra = rm; }
            }
            br.roots.push_back(0.5 * (a + b));
        }
        prev_c = c;
        prev_r = r;
    }
    if (br.roots.empty())
        throw std::runtime_error("homogeneous_branch: no root bracketed in the scan range");
    br.residual = std::fabs(resid(br.roots.front()));
    return br;
}

EquilibriumState homogeneous_branch(const ModelParams& p, const SpatialGrid& xg,
                                    const ActivityGrid& sg, double tol)
{
    BranchResult br = solve_homogeneous_fixed_point(p, tol);
    double phi0 = br.roots.front();

    EquilibriumState st;
    st.homogeneous = true;
    st.sigma = p.sigma;
    st.Phi0 = phi0;
    auto tg = truncated_gaussian_stats(phi0, p.sigma, p.Ld());
    st.rho_bar_inf = tg.rho_bar_inf;
    st.M_inf = tg.M_inf;
    st.Z_rho = tg.Z_rho;
    st.Phi0_prime = p.phi.deriv(p.W.W0 * tg.rho_bar_inf + p.B(0.0));

    double sigma = p.sigma;
    st.profile = sample_density(xg, sg, p.Ld(), [=](double, double, double s) {
        double u = s - phi0;
        return std::exp(-0.5 * u * u / sigma);
    });
    int nx = xg.size();
    st.Phi0_x.assign(nx, st.Phi0);
    st.rho_bar_x.assign(nx, st.rho_bar_inf);
    st.M_inf_x.assign(nx, st.M_inf);
    return st;
}

EquilibriumState equilibrium_from_profile(const DensityField& f, const ModelParams& p)
{
    EquilibriumState st;
    st.homogeneous = false;
    st.sigma = p.sigma;
    st.profile = f;
    int nx = f.xg.size(), ns = f.sg.n;
    double ds = f.sg.ds(), Ld = p.Ld();
    st.rho_bar_x = mean_activity(f);
    auto conv = periodic_convolve(p.W, st.rho_bar_x);
    double B = p.B(0.0);
    st.Phi0_x.resize(nx);
    st.M_inf_x.resize(nx);
    for (int x = 0; x < nx; ++x) {
        st.Phi0_x[x] = p.phi(conv[x] + B);
        double m1 = Ld * st.rho_bar_x[x];
        double acc = 0.0;
        for (int j = 0; j < ns; ++j) {
            double d = f.sg.center(j) - m1;
            acc += d * d * f.at(x, j);
        }
        st.M_inf_x[x] = acc * ds;
    }
    st.Phi0 = st.Phi0_x[0];
    st.rho_bar_inf = st.rho_bar_x[0];
    st.M_inf = *std::max_element(st.M_inf_x.begin(), st.M_inf_x.end());
    st.Phi0_prime = p.phi.deriv(conv[0] + B);
    return st;
}

StationarityResidual stationarity_residual(const EquilibriumState& st, const ModelParams& p)
{
    StationarityResidual r;
    const DensityField& f = st.profile;
    int nx = f.xg.size(), ns = f.sg.n;
    double ds = f.sg.ds();

    auto rb = mean_activity(f);
    auto conv = periodic_convolve(p.W, rb);
    double B = p.B(0.0);
    for (int x = 0; x < nx; ++x) {
        double phi = p.phi(conv[x] + B);
        for (int j = 1; j + 1 < ns; ++j) {
            double drho = (f.at(x, j + 1) - f.at(x, j - 1)) / (2.0 * ds);
            double val = p.sigma * drho + (f.sg.center(j) - phi) * f.at(x, j);
            r.first_order = std::max(r.first_order, std::fabs(val));
        }
    }
    auto rhs = flux_divergence(f, p, Scheme::ChangCooper, 0.0);
    for (double v : rhs) r.solver_rhs = std::max(r.solver_rhs, std::fabs(v));
    return r;
}

} // namespace nfsf
