#include "nfsf/stefan.hpp"

#include "nfsf/convolution.hpp"
#include "nfsf/special.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nfsf {

double stefan_alpha(double tau) { return 1.0 / std::sqrt(2.0 * tau + 1.0); }
double stefan_tau_of_t(double t_norm) { return 0.5 * std::expm1(2.0 * t_norm); }
double stefan_t_of_tau(double tau) { return 0.5 * std::log1p(2.0 * tau); }

namespace {

// One-sided derivative at the lower cell edge from the first three cell values.
inline double edge_deriv(double f0, double f1, double f2, double dz)
{
    return (-2.0 * f0 + 3.0 * f1 - f2) / dz;
}

} // namespace

double ZRow::mass() const
{
    double m = 0.0;
    for (double v : vals) m += v;
    m *= dz;
    // Euler-Maclaurin edge correction at z0 (the integrand does not vanish there)
    if (n() >= 3) m -= dz * dz / 24.0 * edge_deriv(vals[0], vals[1], vals[2], dz);
    return m;
}

double ZRow::first_moment() const
{
    double m = 0.0;
    for (int j = 0; j < n(); ++j) m += center(j) * vals[j];
    m *= dz;
    if (n() >= 3)
        m -= dz * dz / 24.0 * edge_deriv(center(0) * vals[0], center(1) * vals[1],
                                         center(2) * vals[2], dz);
    return m;
}

void StefanConfig::validate() const
{
    if (!(dtau > 0.0)) throw std::invalid_argument("StefanConfig: dtau must be positive");
    if (!(window > 0.0) || window > 1.0)
        throw std::invalid_argument("StefanConfig: window must lie in (0, 1]");
    if (!(dz > 0.0)) throw std::invalid_argument("StefanConfig: dz must be positive");
    if (!(picard_tol > 0.0)) throw std::invalid_argument("StefanConfig: picard_tol must be positive");
}

namespace {

constexpr double kGL4x[4] = {-0.8611363115940526, -0.3399810435848563,
                             0.3399810435848563, 0.8611363115940526};
constexpr double kGL4w[4] = {0.3478548451374538, 0.6521451548625461,
                             0.6521451548625461, 0.3478548451374538};
constexpr double kGL8x[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                             -0.1834346424956498, 0.1834346424956498, 0.5255324099163290,
                             0.7966664774136267, 0.9602898564975363};
constexpr double kGL8w[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                             0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                             0.2223810344533745, 0.1012285362903763};

// Cubic Hermite data for the boundary path on one subinterval [t0, t1],
// slopes are -psi at the nodes.
struct HermiteSeg {
    double t0, h, g0, g1, s0, s1;
    double eval(double t) const
    {
        double u = (t - t0) / h;
        double u2 = u * u, u3 = u2 * u;
        return (2 * u3 - 3 * u2 + 1) * g0 + (u3 - 2 * u2 + u) * h * s0 +
               (-2 * u3 + 3 * u2) * g1 + (u3 - u2) * h * s1;
    }
    // (g(t1) - g(t1 - theta)) / theta without cancellation near theta = 0
    double end_diff_over(double theta) const
    {
        double d1 = s1;
        double d2 = (6 * g0 - 6 * g1 + 2 * h * s0 + 4 * h * s1) / (h * h);
        double d3 = (12 * (g0 - g1) + 6 * h * (s0 + s1)) / (h * h * h);
        return d1 - 0.5 * d2 * theta + d3 * theta * theta / 6.0;
    }
};

inline HermiteSeg segment(const std::vector<double>& g, const std::vector<double>& psi,
                          double dtau, int i)
{
    return HermiteSeg{i * dtau, dtau, g[i], g[i + 1], -psi[i], -psi[i + 1]};
}

inline double lerp_path(const std::vector<double>& f, double dtau, double eta)
{
    double u = eta / dtau;
    int i = std::min((int)f.size() - 2, std::max(0, (int)u));
    double frac = u - i;
    return f[i] + frac * (f[i + 1] - f[i]);
}

// Catmull-Rom interpolation of a node path; one-sided at the segment ends.
inline double cubic_path(const std::vector<double>& f, double dtau, double eta)
{
    int n = (int)f.size();
    if (n < 4) return lerp_path(f, dtau, eta);
    double u = eta / dtau;
    int i = std::min(n - 3, std::max(1, (int)u));
    double t = u - i;
    double fm = f[i - 1], f0 = f[i], f1 = f[i + 1], f2 = f[i + 2];
    double a0 = -0.5 * fm + 1.5 * f0 - 1.5 * f1 + 0.5 * f2;
    double a1 = fm - 2.5 * f0 + 2.0 * f1 - 0.5 * f2;
    double a2 = -0.5 * fm + 0.5 * f1;
    return ((a0 * t + a1) * t + a2) * t + f0;
}

// sum of G(zc, tl, xi, 0) u0(xi) dxi over the band where the kernel is alive
double kernel_sum(const ZRow& u0, double zc, double tl)
{
    double w = std::sqrt(tl);
    double rad = 18.0 * w + 2.0 * u0.dz;
    int jlo = std::max(0, (int)std::floor((zc - rad - u0.z0) / u0.dz - 0.5));
    int jhi = std::min(u0.n() - 1, (int)std::ceil((zc + rad - u0.z0) / u0.dz - 0.5));
    double inv4t = 1.0 / (4.0 * tl);
    double norm = 1.0 / std::sqrt(4.0 * kPi * tl);
    double acc = 0.0;
    for (int j = jlo; j <= jhi; ++j) {
        double d = zc - u0.center(j);
        acc += std::exp(-d * d * inv4t) * u0.vals[j];
    }
    acc *= u0.dz;
    if (jlo == 0 && jhi >= 2) {
        // midpoint-rule edge term; kernel derivative taken analytically, the
        // data derivative by a one-sided difference
        double d0 = zc - u0.z0;
        double G0 = std::exp(-d0 * d0 * inv4t);
        double Gp = d0 / (2.0 * tl) * G0;
        double ub = u0.boundary_value();
        double up = edge_deriv(u0.vals[0], u0.vals[1], u0.vals[2], u0.dz);
        acc -= u0.dz * u0.dz / 24.0 * (Gp * ub + G0 * up);
    }
    return acc * norm;
}

// brick1 integral against u0: int (int_{g}^inf z G(z,tl,xi,0) dz) u0(xi) dxi,
// with the far field xi >> g reduced to the precomputed suffix moment sums.
double moment_source(const ZRow& u0, const std::vector<double>& suffix_zmom, double g, double tl)
{
    double w = std::sqrt(tl);
    double rad = 18.0 * w + 2.0 * u0.dz;
    int jlo = std::max(0, (int)std::floor((g - rad - u0.z0) / u0.dz - 0.5));
    int jhi = std::min(u0.n() - 1, (int)std::ceil((g + rad - u0.z0) / u0.dz - 0.5));
    auto f = [&](int j) {
        double xi = u0.center(j);
        double d = xi - g;
        double brick = std::sqrt(tl / kPi) * std::exp(-d * d / (4.0 * tl)) +
                       0.5 * xi * erfc(-d / (2.0 * w));
        return brick * u0.vals[j];
    };
    double acc = 0.0;
    for (int j = jlo; j <= jhi; ++j) acc += f(j);
    acc *= u0.dz;
    if (jlo == 0 && jhi >= 2) {
        double d0 = u0.z0 - g;
        double e0 = std::exp(-d0 * d0 / (4.0 * tl));
        double brick0 = std::sqrt(tl / kPi) * e0 + 0.5 * u0.z0 * erfc(-d0 / (2.0 * w));
        double brickp = -d0 / (2.0 * tl) * std::sqrt(tl / kPi) * e0 +
                        0.5 * erfc(-d0 / (2.0 * w)) + 0.5 * u0.z0 * e0 / std::sqrt(kPi * tl);
        double ub = u0.boundary_value();
        double up = edge_deriv(u0.vals[0], u0.vals[1], u0.vals[2], u0.dz);
        acc -= u0.dz * u0.dz / 24.0 * (brickp * ub + brick0 * up);
    }
    if (jhi + 1 < u0.n()) acc += suffix_zmom[jhi + 1];
    return acc;
}

struct NodeArrays {
    // [x][node]
    std::vector<std::vector<double>> v, g, ub, psi;
};

} // namespace

StefanDrift one_population_drift(const ModelParams& pnorm)
{
    return [pnorm](double tau_abs, const std::vector<std::vector<double>>& qbar,
                   std::vector<std::vector<double>>& psi) {
        double a = stefan_alpha(tau_abs);
        double b = pnorm.B(stefan_t_of_tau(tau_abs));
        auto conv = periodic_convolve(pnorm.W, qbar[0]);
        psi.resize(1);
        psi[0].resize(conv.size());
        for (size_t x = 0; x < conv.size(); ++x)
            psi[0][x] = pnorm.phi(a * conv[x] + b) * a;
    };
}

GammaPath integrate_gamma(const std::vector<std::vector<std::vector<double>>>& ubar,
                          const std::vector<std::vector<double>>& gamma0,
                          const TauMesh& mesh, double inv_Ld, const StefanDrift& drift,
                          double blowup_threshold)
{
    const int npop = (int)ubar.size();
    const int nx = (int)ubar[0].size();
    GammaPath out;
    out.gamma.assign(npop, std::vector<std::vector<double>>(nx, std::vector<double>(mesh.M + 1, 0.0)));
    out.psi = out.gamma;

    std::vector<std::vector<double>> qbar(npop, std::vector<double>(nx)),
        psi_eval(npop, std::vector<double>(nx)),
        gcur(npop, std::vector<double>(nx)), gstage(npop, std::vector<double>(nx));
    std::vector<std::vector<std::vector<double>>> k(4);

    for (int b = 0; b < npop; ++b)
        for (int x = 0; x < nx; ++x) {
            out.gamma[b][x][0] = gamma0[b][x];
            gcur[b][x] = gamma0[b][x];
        }

    auto rate = [&](double tau_abs, double tloc, const std::vector<std::vector<double>>& g)
        -> std::vector<std::vector<double>> {
        for (int b = 0; b < npop; ++b)
            for (int x = 0; x < nx; ++x)
                qbar[b][x] = lerp_path(ubar[b][x], mesh.dtau, tloc) - g[b][x] * inv_Ld;
        drift(tau_abs, qbar, psi_eval);
        auto r = psi_eval;
        for (auto& pv : r)
            for (double& vv : pv) vv = -vv;
        return r;
    };

    double h = mesh.dtau;
    for (int m = 0; m < mesh.M; ++m) {
        double ta = mesh.absolute(m), tl = mesh.local(m);
        k[0] = rate(ta, tl, gcur);
        for (int b = 0; b < npop; ++b)
            for (int x = 0; x < nx; ++x) {
                out.psi[b][x][m] = -k[0][b][x];
                gstage[b][x] = gcur[b][x] + 0.5 * h * k[0][b][x];
            }
        k[1] = rate(ta + 0.5 * h, tl + 0.5 * h, gstage);
        for (int b = 0; b < npop; ++b)
            for (int x = 0; x < nx; ++x)
                gstage[b][x] = gcur[b][x] + 0.5 * h * k[1][b][x];
        k[2] = rate(ta + 0.5 * h, tl + 0.5 * h, gstage);
        for (int b = 0; b < npop; ++b)
            for (int x = 0; x < nx; ++x)
                gstage[b][x] = gcur[b][x] + h * k[2][b][x];
        k[3] = rate(ta + h, tl + h, gstage);
        for (int b = 0; b < npop; ++b)
            for (int x = 0; x < nx; ++x) {
                gcur[b][x] += h / 6.0 *
                              (k[0][b][x] + 2 * k[1][b][x] + 2 * k[2][b][x] + k[3][b][x]);
                out.gamma[b][x][m + 1] = gcur[b][x];
                if (!std::isfinite(gcur[b][x]) || std::fabs(gcur[b][x]) > blowup_threshold) {
                    out.blowup = true;
                    out.blowup_node = m + 1;
                }
            }
        if (out.blowup) return out;
    }
    auto kf = rate(mesh.absolute(mesh.M), mesh.length(), gcur);
    for (int b = 0; b < npop; ++b)
        for (int x = 0; x < nx; ++x) out.psi[b][x][mesh.M] = -kf[b][x];
    return out;
}

GammaPath1 integrate_gamma(const std::vector<std::vector<double>>& ubar,
                           const std::vector<double>& gamma0, const ModelParams& pnorm,
                           const TauMesh& mesh)
{
    auto gp = integrate_gamma({ubar}, {gamma0}, mesh, pnorm.inv_Ld(),
                              one_population_drift(pnorm));
    GammaPath1 r;
    r.gamma = gp.gamma[0];
    r.psi = gp.psi[0];
    r.blowup = gp.blowup;
    r.blowup_node = gp.blowup_node;
    return r;
}

namespace {

// Picard right-hand sides for the boundary value and the half-line moment of
// one x at node m, given the boundary path of the current iterate.
// v_m   = 2 int G(g_m, tl, xi, 0) u0 dxi + 2 int_0^tl dG/dxi(g_m,tl,g(eta),eta) v(eta) deta
// ub_m  = int brick1(xi; g_m, tl) u0 dxi + int_0^tl brick2(g_m, tl, g(eta), eta) v(eta) deta
// Both Volterra kernels carry a 1/sqrt(tl-eta) factor; substituting
// zeta = sqrt(tl-eta) makes the integrands smooth and GL4 per subinterval
// recovers product-integration accuracy.
void node_update(const ZRow& u0, const std::vector<double>& suffix_zmom,
                 const std::vector<double>& vold, const std::vector<double>& g,
                 const std::vector<double>& psi, double dtau, int m,
                 double& v_out, double& ub_out)
{
    double tl = m * dtau;
    double gm = g[m];
    double volterra_v = 0.0, volterra_u = 0.0;

    for (int i = 0; i < m; ++i) {
        HermiteSeg seg = segment(g, psi, dtau, i);
        double zlo = std::sqrt(tl - (i + 1) * dtau);
        double zhi = std::sqrt(tl - i * dtau);
        double half = 0.5 * (zhi - zlo), mid = 0.5 * (zhi + zlo);
        bool diag = (i == m - 1);
        for (int q = 0; q < 4; ++q) {
            double zeta = mid + half * kGL4x[q];
            double theta = zeta * zeta;      // tl - eta
            double eta = tl - theta;
            double dgr;                      // (g_m - g(eta)) / theta
            if (diag) {
                dgr = seg.end_diff_over(theta);
            } else {
                dgr = (gm - seg.eval(eta)) / theta;
            }
            double expf = std::exp(-dgr * dgr * theta * 0.25);
            double veta = lerp_path(vold, dtau, eta);
            double wq = kGL4w[q] * half;
            // dG/dxi kernel: S = dgr * expf / (4 sqrt(pi)); deta = 2 zeta dzeta
            volterra_v += wq * (dgr * expf * 0.25 * kInvSqrtPi) * 2.0 * veta;
            // brick2 kernel under the same substitution
            volterra_u += wq * (gm * expf * kInvSqrtPi + zeta * erfc(dgr * zeta * 0.5)) * veta;
        }
    }

    v_out = 2.0 * kernel_sum(u0, gm, tl) + 2.0 * volterra_v;
    ub_out = moment_source(u0, suffix_zmom, gm, tl) + volterra_u;
}

void shift_back(WindowResult& res, const std::vector<std::vector<double>>& z0, double inv_Ld)
{
    for (size_t b = 0; b < res.gamma.size(); ++b)
        for (size_t x = 0; x < res.gamma[b].size(); ++x)
            for (size_t m = 0; m < res.gamma[b][x].size(); ++m) {
                res.gamma[b][x][m] += z0[b][x];
                res.ubar[b][x][m] += z0[b][x] * inv_Ld;
            }
}

} // namespace

WindowResult picard_window(const std::vector<std::vector<ZRow>>& u0_in, const TauMesh& mesh,
                           double inv_Ld, const StefanDrift& drift, const StefanConfig& cfg)
{
    const int npop = (int)u0_in.size();
    const int nx = (int)u0_in[0].size();
    const int M = mesh.M;

    // Solve in boundary-relative coordinates: identical data then produce
    // identical iterates for any frame offset, and qbar = ubar - gamma/L^d
    // is unchanged. Outputs are shifted back at the end.
    std::vector<std::vector<double>> z0(npop, std::vector<double>(nx));
    auto u0 = u0_in;
    for (int b = 0; b < npop; ++b)
        for (int x = 0; x < nx; ++x) {
            z0[b][x] = u0[b][x].z0;
            u0[b][x].z0 = 0.0;
        }

    WindowResult res;
    res.mesh = mesh;
    auto alloc = [&]() {
        return std::vector<std::vector<std::vector<double>>>(
            npop, std::vector<std::vector<double>>(nx, std::vector<double>(M + 1, 0.0)));
    };
    res.v = alloc(); res.ubar = alloc();

    // suffix moment sums of the initial data, reused for every node update
    std::vector<std::vector<std::vector<double>>> suffix(npop,
        std::vector<std::vector<double>>(nx));
    std::vector<std::vector<double>> gamma0(npop, std::vector<double>(nx));
    for (int b = 0; b < npop; ++b)
        for (int x = 0; x < nx; ++x) {
            const ZRow& row = u0[b][x];
            auto& s = suffix[b][x];
            s.assign(row.n() + 1, 0.0);
            for (int j = row.n() - 1; j >= 0; --j)
                s[j] = s[j + 1] + row.center(j) * row.vals[j] * row.dz;
            gamma0[b][x] = row.z0;
            double v0 = row.boundary_value(), ub0 = row.first_moment();
            for (int m = 0; m <= M; ++m) {
                res.v[b][x][m] = v0;
                res.ubar[b][x][m] = ub0;
            }
        }

    auto vnew = res.v, ubnew = res.ubar;
    double prev_update = HUGE_VAL;
    double damping = 1.0;
    int grow_count = 0;

    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
        GammaPath gp = integrate_gamma(res.ubar, gamma0, mesh, inv_Ld, drift,
                                       cfg.blowup_threshold);
        if (gp.blowup) {
            res.gamma = std::move(gp.gamma);
            res.psi = std::move(gp.psi);
            res.blowup = true;
            res.iterations = iter;
            shift_back(res, z0, inv_Ld);
            return res;
        }

#pragma omp parallel for schedule(static) collapse(2)
        for (int b = 0; b < npop; ++b)
            for (int x = 0; x < nx; ++x) {
                vnew[b][x][0] = res.v[b][x][0];
                ubnew[b][x][0] = res.ubar[b][x][0];
                for (int m = 1; m <= M; ++m)
                    node_update(u0[b][x], suffix[b][x], res.v[b][x], gp.gamma[b][x],
                                gp.psi[b][x], mesh.dtau, m, vnew[b][x][m], ubnew[b][x][m]);
            }

        double update = 0.0;
        for (int b = 0; b < npop; ++b)
            for (int x = 0; x < nx; ++x)
                for (int m = 1; m <= M; ++m) {
                    update = std::max(update, std::fabs(vnew[b][x][m] - res.v[b][x][m]));
                    update = std::max(update, std::fabs(ubnew[b][x][m] - res.ubar[b][x][m]));
                }
        res.update_history.push_back(update);

        if (damping == 1.0) {
            res.v.swap(vnew);
            res.ubar.swap(ubnew);
        } else {
            for (int b = 0; b < npop; ++b)
                for (int x = 0; x < nx; ++x)
                    for (int m = 1; m <= M; ++m) {
                        res.v[b][x][m] += damping * (vnew[b][x][m] - res.v[b][x][m]);
                        res.ubar[b][x][m] += damping * (ubnew[b][x][m] - res.ubar[b][x][m]);
                    }
        }
        res.gamma = std::move(gp.gamma);
        res.psi = std::move(gp.psi);
        res.iterations = iter;

        if (update < cfg.picard_tol) {
            res.converged = true;
            // final boundary path consistent with the converged moments
            GammaPath gf = integrate_gamma(res.ubar, gamma0, mesh, inv_Ld, drift,
                                           cfg.blowup_threshold);
            res.gamma = std::move(gf.gamma);
            res.psi = std::move(gf.psi);
            shift_back(res, z0, inv_Ld);
            return res;
        }
        if (update > prev_update && iter > 2) {
            if (++grow_count == 1) {
                damping = 0.5;
            } else {
                shift_back(res, z0, inv_Ld);
                return res; // diverging; caller halves the window
            }
        }
        prev_update = update;
    }
    shift_back(res, z0, inv_Ld);
    return res;
}

WindowResult picard_window(const std::vector<ZRow>& u0, const TauMesh& mesh,
                           const ModelParams& pnorm, const StefanConfig& cfg)
{
    return picard_window({u0}, mesh, pnorm.inv_Ld(), one_population_drift(pnorm), cfg);
}

std::vector<double> reconstruct_u(const WindowResult& w, int pop, int x, int node,
                                  const ZRow& u0_row, const std::vector<double>& z_targets)
{
    const std::vector<double>& g = w.gamma[pop][x];
    const std::vector<double>& psi = w.psi[pop][x];
    const std::vector<double>& v = w.v[pop][x];
    double dtau = w.mesh.dtau;
    double tl = node * dtau;
    std::vector<double> out(z_targets.size(), 0.0);

    if (node == 0) {
        // initial trace: sample u0 (linear interpolation between cell centers)
        for (size_t i = 0; i < z_targets.size(); ++i) {
            double u = (z_targets[i] - u0_row.z0) / u0_row.dz - 0.5;
            int j = std::max(0, std::min(u0_row.n() - 2, (int)std::floor(u)));
            double frac = u - j;
            frac = std::max(0.0, std::min(1.0, frac));
            out[i] = u0_row.vals[j] + frac * (u0_row.vals[j + 1] - u0_row.vals[j]);
        }
        return out;
    }

#pragma omp parallel for schedule(static)
    for (int ti = 0; ti < (int)z_targets.size(); ++ti) {
        double z = z_targets[ti];
        double acc = kernel_sum(u0_row, z, tl);

        for (int i = 0; i < node; ++i) {
            HermiteSeg seg = segment(g, psi, dtau, i);
            double r_hi = tl - i * dtau;       // larger r at the left edge
            double r_lo = tl - (i + 1) * dtau;
            double gbar = seg.eval(seg.t0 + 0.5 * seg.h);
            double dbar = z - gbar;
            bool diag = (i == node - 1);

            if (dbar > 1e-8) {
                // substitution w = dbar / (2 sqrt(tl - eta)); the kernel spike is
                // resolved in w. Long w-ranges (near-boundary targets on the
                // diagonal subinterval) are paneled so GL8 stays resolved.
                double w_lo = dbar / (2.0 * std::sqrt(r_hi));
                double w_hi = r_lo > 0.0 ? dbar / (2.0 * std::sqrt(r_lo)) : 8.6;
                w_hi = std::min(w_hi, 8.6);
                if (w_lo >= w_hi) continue;
                int panels = 1 + (int)((w_hi - w_lo) / 1.2);
                double pw = (w_hi - w_lo) / panels;
                for (int pi = 0; pi < panels; ++pi) {
                    double a = w_lo + pi * pw, b = a + pw;
                    double half = 0.5 * (b - a), mid = 0.5 * (b + a);
                    for (int q = 0; q < 8; ++q) {
                        double ww = mid + half * kGL8x[q];
                        double r = dbar * dbar / (4.0 * ww * ww);
                        double eta = tl - r;
                        double ge = diag && (tl - eta) < dtau * 1e-6
                                        ? g[node] - seg.end_diff_over(tl - eta) * (tl - eta)
                                        : seg.eval(eta);
                        double d = z - ge;
                        double kern = d / (2.0 * r) * std::exp(-d * d / (4.0 * r)) /
                                      std::sqrt(4.0 * kPi * r);
                        double jac = dbar * dbar / (2.0 * ww * ww * ww);
                        acc += kGL8w[q] * half * kern * cubic_path(v, dtau, eta) * jac;
                    }
                }
            } else if (diag) {
                // target at/below the boundary: zeta substitution as in the node updates
                double zlo = std::sqrt(std::max(r_lo, 0.0)), zhi = std::sqrt(r_hi);
                double half = 0.5 * (zhi - zlo), mid = 0.5 * (zhi + zlo);
                for (int q = 0; q < 8; ++q) {
                    double zeta = mid + half * kGL8x[q];
                    double theta = zeta * zeta;
                    double eta = tl - theta;
                    double dgr = seg.end_diff_over(theta) + (z - g[node]) / theta;
                    double expf = std::exp(-dgr * dgr * theta * 0.25);
                    acc += kGL8w[q] * half * (dgr * expf * 0.25 * kInvSqrtPi) * 2.0 *
                           cubic_path(v, dtau, eta);
                }
            } else {
                double half = 0.5 * dtau, mid = (i + 0.5) * dtau;
                for (int q = 0; q < 8; ++q) {
                    double eta = mid + half * kGL8x[q];
                    double r = tl - eta;
                    double d = z - seg.eval(eta);
                    double kern = d / (2.0 * r) * std::exp(-d * d / (4.0 * r)) /
                                  std::sqrt(4.0 * kPi * r);
                    acc += kGL8w[q] * half * kern * cubic_path(v, dtau, eta);
                }
            }
        }
        out[ti] = acc;
    }
    return out;
}

double boundary_density_from_v(double v, double t_orig, const RescaleMap& map)
{
    double tn = map.t_to_normalized(t_orig);
    return std::exp(tn) * v / std::sqrt(map.sigma);
}

double mean_from_triple(double ubar, double gamma, double t_orig, double inv_Ld,
                        const RescaleMap& map)
{
    double tn = map.t_to_normalized(t_orig);
    return std::sqrt(map.sigma) * std::exp(-tn) * (ubar - gamma * inv_Ld);
}

namespace {

struct EngineState {
    std::vector<std::vector<ZRow>> u0; // [pop][x]
    double tau0 = 0.0;
    double z_top = 0.0; // fixed absolute upper edge of the grid
};

} // namespace

StefanRun run_stefan_multi(const std::vector<std::function<double(double, double, double)>>& rho0,
                           const ModelParams& p, const SpatialGrid& xg, const ActivityGrid& sg,
                           const StefanConfig& cfg, const StefanDrift& drift_norm)
{
    cfg.validate();
    p.validate();
    auto [pnorm, map] = normalize_parameters(p);
    const int npop = (int)rho0.size();
    const int nx = xg.size();
    const double rs = std::sqrt(p.sigma);
    const double inv_Ld = p.inv_Ld();

    StefanRun run;
    run.pops.resize(npop);

    double t_end_norm = cfg.t_end / p.tau_c;
    double tau_end = stefan_tau_of_t(t_end_norm);
    double smax_norm = sg.s_max / rs;
    double z_top = cfg.z_max > 0.0 ? cfg.z_max : (smax_norm + 4.0) * std::exp(t_end_norm) + 4.0;

    EngineState st;
    st.z_top = z_top;
    st.u0.assign(npop, std::vector<ZRow>(nx));
    for (int b = 0; b < npop; ++b)
        for (int x = 0; x < nx; ++x) {
            ZRow& row = st.u0[b][x];
            row.z0 = 0.0;
            row.dz = cfg.dz;
            row.vals.resize((int)std::ceil(z_top / cfg.dz));
            double x1, x2 = 0.0;
            if (xg.d == 1) x1 = xg.coord(x);
            else { x1 = xg.coord(x / xg.n); x2 = xg.coord(x % xg.n); }
            for (int j = 0; j < row.n(); ++j)
                row.vals[j] = rs * rho0[b](x1, x2, rs * row.center(j));
            double m = row.mass();
            if (!(m > 0.0)) throw std::runtime_error("run_stefan: nonpositive initial mass");
            for (double& vv : row.vals) vv *= inv_Ld / m;
        }

    // node bookkeeping
    auto push_node = [&](double tau_abs, const WindowResult& w, int m) {
        run.tau_nodes.push_back(tau_abs);
        run.node_window.push_back(run.window_count);
        double t_orig = map.t_to_original(stefan_t_of_tau(tau_abs));
        run.t_nodes.push_back(t_orig);
        for (int b = 0; b < npop; ++b) {
            auto& tr = run.pops[b];
            if (tr.v.empty()) {
                tr.v.resize(nx); tr.gamma.resize(nx); tr.ubar.resize(nx);
                tr.psi.resize(nx); tr.rho0.resize(nx); tr.rhobar.resize(nx);
            }
            for (int x = 0; x < nx; ++x) {
                double vv = w.v[b][x][m], gg = w.gamma[b][x][m], uu = w.ubar[b][x][m];
                tr.v[x].push_back(vv);
                tr.gamma[x].push_back(gg);
                tr.ubar[x].push_back(uu);
                tr.psi[x].push_back(w.psi[b][x][m]);
                tr.rho0[x].push_back(boundary_density_from_v(vv, t_orig, map));
                tr.rhobar[x].push_back(mean_from_triple(uu, gg, t_orig, inv_Ld, map));
            }
        }
    };

    // snapshot taus, sorted ascending
    std::vector<double> snap_tau;
    for (double ts : cfg.snapshot_times)
        snap_tau.push_back(stefan_tau_of_t(ts / p.tau_c));
    std::sort(snap_tau.begin(), snap_tau.end());
    size_t next_snap = 0;
    while (next_snap < snap_tau.size() && snap_tau[next_snap] <= 1e-15) ++next_snap;

    auto take_snapshot = [&](const WindowResult& w, int m, double tau_abs) {
        double tn = stefan_t_of_tau(tau_abs);
        double et = std::exp(tn);
        for (int b = 0; b < npop; ++b) {
            DensityField f(xg, sg);
            f.time = map.t_to_original(tn);
            for (int x = 0; x < nx; ++x) {
                std::vector<double> ztargets(sg.n);
                for (int j = 0; j < sg.n; ++j)
                    ztargets[j] = et * (sg.center(j) / rs) + w.gamma[b][x][m];
                auto uvals = reconstruct_u(w, b, x, m, st.u0[b][x], ztargets);
                for (int j = 0; j < sg.n; ++j)
                    f.at(x, j) = et * uvals[j] / rs;
            }
            run.snapshots.push_back(std::move(f));
            run.snap_times.push_back(map.t_to_original(tn));
            run.snap_pop.push_back(b);
        }
    };

    int M_target = std::max(2, (int)std::llround(cfg.window / cfg.dtau));
    int total_nodes = (int)std::llround(tau_end / cfg.dtau);
    int node_cursor = 0;

    // initial node (tau = 0): values straight from the data
    {
        WindowResult w0;
        w0.mesh = TauMesh{0.0, cfg.dtau, 0};
        w0.v.assign(npop, std::vector<std::vector<double>>(nx, std::vector<double>(1)));
        w0.gamma = w0.v; w0.ubar = w0.v; w0.psi = w0.v;
        std::vector<std::vector<std::vector<double>>> ub(npop,
            std::vector<std::vector<double>>(nx, std::vector<double>(1)));
        std::vector<std::vector<double>> g0(npop, std::vector<double>(nx));
        for (int b = 0; b < npop; ++b)
            for (int x = 0; x < nx; ++x) {
                ub[b][x][0] = st.u0[b][x].first_moment();
                g0[b][x] = st.u0[b][x].z0;
            }
        TauMesh m0{0.0, cfg.dtau, 0};
        // psi at tau=0 from the drift with the initial data
        GammaPath gp = integrate_gamma(ub, g0, m0, inv_Ld, drift_norm, cfg.blowup_threshold);
        for (int b = 0; b < npop; ++b)
            for (int x = 0; x < nx; ++x) {
                w0.v[b][x][0] = st.u0[b][x].boundary_value();
                w0.gamma[b][x][0] = st.u0[b][x].z0;
                w0.ubar[b][x][0] = ub[b][x][0];
                w0.psi[b][x][0] = gp.psi[b][x][0];
            }
        push_node(0.0, w0, 0);
    }

    while (node_cursor < total_nodes) {
        int M = std::min(M_target, total_nodes - node_cursor);
        TauMesh mesh{node_cursor * cfg.dtau, cfg.dtau, M};
        WindowResult w;
        int halvings = 0;
        for (;;) {
            mesh.M = M;
            w = picard_window(st.u0, mesh, inv_Ld, drift_norm, cfg);
            run.total_iterations += w.iterations;
            if (w.blowup) {
                run.blowup = true;
                run.converged = false;
                run.error = "free boundary blow-up detected at tau ~= " +
                            std::to_string(mesh.absolute(w.mesh.M));
                return run;
            }
            if (w.converged) break;
            if (M <= 2 || ++halvings > cfg.max_halvings) {
                run.converged = false;
                run.error = "Picard iteration failed to contract after window halving";
                return run;
            }
            M = std::max(2, M / 2);
        }
        run.window_count++;

        for (int m = 1; m <= M; ++m)
            push_node(mesh.absolute(m), w, m);

        while (next_snap < snap_tau.size() &&
               snap_tau[next_snap] <= mesh.absolute(M) + 0.5 * cfg.dtau) {
            int m = std::max(1, std::min(M, (int)std::llround((snap_tau[next_snap] - mesh.tau0) / cfg.dtau)));
            take_snapshot(w, m, mesh.absolute(m));
            ++next_snap;
        }

        node_cursor += M;
        if (node_cursor >= total_nodes) break;

        // window handoff: new initial data on a boundary-anchored grid
        for (int b = 0; b < npop; ++b)
            for (int x = 0; x < nx; ++x) {
                double gend = w.gamma[b][x][M];
                int nznew = (int)std::ceil((st.z_top - gend) / cfg.dz);
                std::vector<double> zt(nznew);
                for (int j = 0; j < nznew; ++j) zt[j] = gend + (j + 0.5) * cfg.dz;
                auto uvals = reconstruct_u(w, b, x, M, st.u0[b][x], zt);
                ZRow nrow;
                nrow.z0 = gend;
                nrow.dz = cfg.dz;
                nrow.vals = std::move(uvals);
                double merr = std::fabs(nrow.mass() - inv_Ld) / inv_Ld;
                run.max_mass_err = std::max(run.max_mass_err, merr);
                st.u0[b][x] = std::move(nrow);
            }
        st.tau0 = node_cursor * cfg.dtau;
    }

    return run;
}

StefanRun run_stefan(const std::function<double(double, double, double)>& rho0,
                     const ModelParams& p, const SpatialGrid& xg, const ActivityGrid& sg,
                     const StefanConfig& cfg)
{
    auto [pnorm, map] = normalize_parameters(p);
    (void)map;
    return run_stefan_multi({rho0}, p, xg, sg, cfg, one_population_drift(pnorm));
}

} // namespace nfsf
