#include "nfsf/stability.hpp"

#include "nfsf/special.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nfsf {

double relative_entropy(const DensityField& rho, const DensityField& rho_inf,
                        double* excluded_mass)
{
    if (!(rho.xg == rho_inf.xg) || !(rho.sg == rho_inf.sg))
        throw std::invalid_argument("relative_entropy: grid mismatch");
    const double floor = 1e-300;
    double acc = 0.0, excl = 0.0;
    double cell = rho.sg.ds() * rho.xg.cell_volume();
    for (size_t i = 0; i < rho.rho.size(); ++i) {
        double ri = rho_inf.rho[i];
        if (ri < floor) {
            if (ri < -floor)
                throw std::invalid_argument("relative_entropy: rho_inf negative on bulk cells");
            excl += std::fabs(rho.rho[i]) * cell;
            continue;
        }
        double d = rho.rho[i] - ri;
        acc += d * d / ri * cell;
    }
    if (excluded_mass) *excluded_mass = excl;
    return acc;
}

EntropyTrace entropy_trace(const std::vector<DensityField>& snaps,
                           const std::vector<double>& times, const EquilibriumState& st,
                           const ModelParams& p)
{
    EntropyTrace tr;
    double B = p.B(0.0);
    for (size_t i = 0; i < snaps.size(); ++i) {
        const DensityField& f = snaps[i];
        double excl = 0.0;
        double re = relative_entropy(f, st.profile, &excl);
        // Q = int 2E - H/sigma dx; 2 int E dx equals the relative entropy
        auto rb = mean_activity(f);
        auto conv = periodic_convolve(p.W, rb);
        double H = 0.0;
        for (int x = 0; x < f.xg.size(); ++x) {
            double phid = p.phi(conv[x] + B) - st.Phi0_x[x];
            double rbd = rb[x] - st.rho_bar_x[x];
            H += phid * rbd;
        }
        H *= f.xg.cell_volume();
        tr.times.push_back(times[i]);
        tr.re.push_back(re);
        tr.q.push_back(re - H / p.sigma);
        tr.excluded_mass.push_back(excl);
    }
    return tr;
}

double poincare_constant_profile(const std::vector<double>& rho_row, const ActivityGrid& sg,
                                 PoincareMethod method, double sigma)
{
    if (method == PoincareMethod::Conservative)
        return 1.0 / sigma;

    int n = sg.n;
    if ((int)rho_row.size() != n)
        throw std::invalid_argument("poincare_constant_profile: row size mismatch");
    double ds = sg.ds();

    // generalized problem L g = lambda D g symmetrised to a tridiagonal
    // C = D^{-1/2} L D^{-1/2}; no-flux ends drop the boundary faces.
    std::vector<double> diag(n), off(n - 1);
    auto wface = [&](int f) { return 0.5 * (rho_row[f - 1] + rho_row[f]); }; // f = 1..n-1
    for (int j = 0; j < n; ++j) {
        double wl = j > 0 ? wface(j) : 0.0;
        double wr = j + 1 < n ? wface(j + 1) : 0.0;
        double dj = std::max(rho_row[j], 1e-300) * ds;
        diag[j] = (wl + wr) / ds / dj;
        if (j + 1 < n) {
            double djp = std::max(rho_row[j + 1], 1e-300) * ds;
            off[j] = -wface(j + 1) / ds / std::sqrt(dj * djp);
        }
    }
    std::vector<double> w(n), z(2 * n);
    std::vector<lapack_int> isuppz(2 * 2);
    lapack_int m = 0;
    lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', 'I', n, diag.data(), off.data(),
                                     0.0, 0.0, 1, 2, 1e-14, &m, w.data(), z.data(), n,
                                     isuppz.data());
    if (info != 0 || m < 2)
        throw std::runtime_error("poincare_constant_profile: eigen-solver failure");
    return std::max(w[1], 0.0); // w[0] ~ 0 (constants)
}

double poincare_constant(const EquilibriumState& st, const ModelParams& p, PoincareMethod method)
{
    if (method == PoincareMethod::Conservative)
        return 1.0 / p.sigma;
    const DensityField& f = st.profile;
    int nx = st.homogeneous ? 1 : f.xg.size();
    double g = HUGE_VAL;
    for (int x = 0; x < nx; ++x) {
        std::vector<double> row(f.row(x), f.row(x) + f.sg.n);
        g = std::min(g, poincare_constant_profile(row, f.sg, method, p.sigma));
    }
    return g;
}

PropStab1Report check_prop_stab1(const EquilibriumState& st, const ModelParams& p,
                                 PoincareMethod method)
{
    PropStab1Report rep;
    double lip = p.phi.lipschitz();
    double wl2 = p.W.norm_l2;
    double supM = st.sup_M_inf();
    double Ld = p.Ld();
    double Lhalf = std::pow(p.L, 0.5 * p.d);
    rep.gamma_tilde = poincare_constant(st, p, method);
    rep.C = lip * wl2 / Lhalf * std::sqrt(supM);

    rep.poincare_estimate.name = "poincare-estimate";
    rep.poincare_estimate.lhs = rep.C;
    rep.poincare_estimate.rhs = 0.5 * p.sigma * std::sqrt(rep.gamma_tilde);
    rep.poincare_estimate.pass = rep.poincare_estimate.lhs < rep.poincare_estimate.rhs;
    rep.poincare_estimate.operands = {{"phi_lip", lip}, {"W_l2", wl2},
                                      {"sup_M_inf", supM}, {"gamma_tilde", rep.gamma_tilde},
                                      {"sigma", p.sigma}, {"L", p.L}, {"d", (double)p.d}};

    rep.stabcond2.name = "stabcond2";
    rep.stabcond2.lhs = rep.C;
    rep.stabcond2.rhs = 0.5 * std::sqrt(p.sigma);
    rep.stabcond2.pass = rep.stabcond2.lhs < rep.stabcond2.rhs;
    rep.stabcond2.operands = rep.poincare_estimate.operands;

    rep.stabcond3.name = "stabcond3";
    rep.stabcond3.lhs = lip * wl2 / Ld;
    rep.stabcond3.rhs = 0.5;
    rep.stabcond3.pass = rep.stabcond3.lhs < rep.stabcond3.rhs;
    rep.stabcond3.operands = {{"phi_lip", lip}, {"W_l2", wl2}, {"L", p.L}, {"d", (double)p.d}};
    return rep;
}

DecayPrediction decay_rate_prediction(const EquilibriumState& st, const ModelParams& p,
                                      double re0, double eps, PoincareMethod method)
{
    DecayPrediction pr;
    PropStab1Report rep = check_prop_stab1(st, p, method);
    if (!rep.poincare_estimate.pass)
        return pr; // no prediction when the condition fails
    double sg = std::sqrt(rep.gamma_tilde);
    double base = sg * (0.5 * p.sigma * sg - rep.C);
    pr.K = base - rep.C * rep.C / (2.0 * p.Ld() * p.sigma) * re0;
    pr.K_eps = base - eps;
    pr.valid = true;
    return pr;
}

FourierMargins linear_fourier_threshold(const EquilibriumState& st, const FourierModes& modes)
{
    if (!st.homogeneous)
        throw std::invalid_argument("linear_fourier_threshold: state must be homogeneous");
    FourierMargins out;
    out.min_margin = HUGE_VAL;
    double base = st.sigma / st.M_inf;
    for (int k1 = -modes.K; k1 <= modes.K; ++k1) {
        int k2lo = modes.d == 2 ? -modes.K : 0;
        int k2hi = modes.d == 2 ? modes.K : 0;
        for (int k2 = k2lo; k2 <= k2hi; ++k2) {
            double margin = base - st.Phi0_prime * modes.at(k1, k2).real();
            out.k1.push_back(k1);
            out.k2.push_back(k2);
            out.margin.push_back(margin);
            if (margin < out.min_margin) {
                out.min_margin = margin;
                out.argmin_k1 = k1;
                out.argmin_k2 = k2;
            }
        }
    }
    out.stable = out.min_margin > 0.0;
    return out;
}

NonlinearConditionRecord check_nonlinear_condition(const EquilibriumState& st,
                                                   const ModelParams& p, double alpha,
                                                   int K_max)
{
    if (!st.homogeneous)
        throw std::invalid_argument("check_nonlinear_condition: state must be homogeneous");
    if (!p.W.symmetric)
        throw std::invalid_argument("check_nonlinear_condition: W must be componentwise symmetric");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("check_nonlinear_condition: alpha must lie in (0,1)");

    NonlinearConditionRecord rec;
    rec.alpha = alpha;
    rec.K_max = K_max;
    auto modes = fourier_modes(p.W, K_max);
    rec.min_mode = HUGE_VAL;
    double c = st.M_inf / p.sigma * st.Phi0_prime;
    for (int k1 = -K_max; k1 <= K_max; ++k1) {
        int k2lo = p.d == 2 ? -K_max : 0;
        int k2hi = p.d == 2 ? K_max : 0;
        for (int k2 = k2lo; k2 <= k2hi; ++k2) {
            double mode = (1.0 - alpha) - c * modes.at(k1, k2).real();
            if (mode < rec.min_mode) {
                rec.min_mode = mode;
                rec.argmin_k1 = k1;
                rec.argmin_k2 = k2;
            }
        }
    }
    rec.pass = rec.min_mode >= 0.0;
    return rec;
}

MeanOdeRun integrate_mean_ode(const ModelParams& p, std::vector<double> rhobar0, double dt,
                              double t_end)
{
    p.validate();
    if ((int)rhobar0.size() != p.W.grid.size())
        throw std::invalid_argument("integrate_mean_ode: initial size mismatch");
    MeanOdeRun run;
    double invLd = p.inv_Ld();
    auto rate = [&](const std::vector<double>& rb, double t) {
        auto conv = periodic_convolve(p.W, rb);
        double b = p.B(t);
        std::vector<double> r(rb.size());
        for (size_t i = 0; i < rb.size(); ++i)
            r[i] = (-rb[i] + p.phi(conv[i] + b) * invLd) / p.tau_c;
        return r;
    };
    int nsteps = (int)std::llround(t_end / dt);
    std::vector<double> rb = std::move(rhobar0);
    run.times.push_back(0.0);
    run.rhobar.push_back(rb);
    std::vector<double> st(rb.size());
    for (int k = 1; k <= nsteps; ++k) {
        double t = (k - 1) * dt;
        auto k1 = rate(rb, t);
        for (size_t i = 0; i < rb.size(); ++i) st[i] = rb[i] + 0.5 * dt * k1[i];
        auto k2 = rate(st, t + 0.5 * dt);
        for (size_t i = 0; i < rb.size(); ++i) st[i] = rb[i] + 0.5 * dt * k2[i];
        auto k3 = rate(st, t + 0.5 * dt);
        for (size_t i = 0; i < rb.size(); ++i) st[i] = rb[i] + dt * k3[i];
        auto k4 = rate(st, t + dt);
        for (size_t i = 0; i < rb.size(); ++i)
            rb[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        run.times.push_back(k * dt);
        run.rhobar.push_back(rb);
    }
    return run;
}

double lyapunov_functional(const std::vector<double>& zeta, const ModelParams& p)
{
    if (!p.phi.invertible())
        throw std::domain_error("lyapunov_functional: Phi must be strictly increasing");
    auto conv = periodic_convolve(p.W, zeta);
    double vol = p.W.grid.cell_volume();
    double B = p.B(0.0);
    double quad = 0.0, pot = 0.0;
    for (size_t i = 0; i < zeta.size(); ++i) {
        quad += zeta[i] * conv[i];
        pot += p.phi.inverse_primitive(zeta[i]) - B * zeta[i];
    }
    return -0.5 * p.inv_Ld() * quad * vol + pot * vol;
}

std::vector<double> lyapunov_values(const MeanOdeRun& run, const ModelParams& p)
{
    std::vector<double> out;
    out.reserve(run.times.size());
    double B = p.B(0.0);
    for (size_t i = 0; i < run.times.size(); ++i) {
        auto conv = periodic_convolve(p.W, run.rhobar[i]);
        std::vector<double> zeta(conv.size());
        for (size_t x = 0; x < conv.size(); ++x) zeta[x] = p.phi(conv[x] + B);
        out.push_back(lyapunov_functional(zeta, p));
    }
    return out;
}

DecayFit measure_decay(const std::vector<double>& times, const std::vector<double>& re,
                       double floor)
{
    if (times.size() != re.size() || times.size() < 3)
        throw std::invalid_argument("measure_decay: need matching series with >= 3 samples");
    // pre-floor segment
    size_t end = 0;
    while (end < re.size() && re[end] > floor) ++end;
    if (end < 3) throw std::invalid_argument("measure_decay: series at the floor");
    size_t begin = end / 2; // last half of the usable samples
    DecayFit fit;
    fit.n_used = (int)(end - begin);
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (size_t i = begin; i < end; ++i) {
        double x = times[i], y = std::log(re[i]);
        sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
    }
    double n = (double)fit.n_used;
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.rate = -slope;
    double denom = (n * sxx - sx * sx) * (n * syy - sy * sy);
    double corr = denom > 0.0 ? (n * sxy - sx * sy) * (n * sxy - sx * sy) / denom : 1.0;
    fit.r2 = corr;
    return fit;
}

} // namespace nfsf
