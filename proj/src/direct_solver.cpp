#include "nfsf/direct_solver.hpp"

#include "nfsf/convolution.hpp"

#include <cmath>
#include <stdexcept>

namespace nfsf {

void SolverConfig::validate() const
{
    if (!(dt > 0.0)) throw std::invalid_argument("SolverConfig: dt must be positive");
    if (!(picard_tol > 0.0)) throw std::invalid_argument("SolverConfig: picard_tol must be positive");
    if (picard_max_iter < 1) throw std::invalid_argument("SolverConfig: picard_max_iter >= 1");
}

namespace {

// Chang-Cooper face weight: theta(w) = 1/(1-exp(-w)) - 1/w. The exponential
// fitting makes the cell-sampled Gaussian exp(-(s-phi)^2/(2 sigma)) an exact
// discrete steady state.
inline double cc_theta(double w)
{
    if (std::fabs(w) < 1e-5)
        return 0.5 + w / 12.0 - w * w * w / 720.0;
    return -1.0 / std::expm1(-w) - 1.0 / w;
}

struct FaceCoeffs {
    // F_f = Pρ below + Q ρ above
    std::vector<double> P, Q; // index f = 1 .. n-1 (interior faces)
};

void face_coeffs(double phi, const ActivityGrid& sg, double sigma, Scheme scheme, FaceCoeffs& fc)
{
    int n = sg.n;
    double ds = sg.ds();
    fc.P.resize(n); fc.Q.resize(n);
    for (int f = 1; f < n; ++f) {
        double a = phi - sg.face(f);
        double theta;
        if (scheme == Scheme::ChangCooper) {
            theta = cc_theta(a * ds / sigma);
        } else {
            theta = a > 0.0 ? 1.0 : 0.0;
        }
        fc.P[f] = a * theta + sigma / ds;
        fc.Q[f] = a * (1.0 - theta) - sigma / ds;
    }
}

// Thomas solve of (I + lam * div F) rho_new = rho_old for one x-row.
void implicit_row_solve(const FaceCoeffs& fc, double lam, const double* rho_old, double* rho_new,
                        int n, std::vector<double>& cw, std::vector<double>& dw)
{
    // rows: j=0: [1 + lam P1, lam Q1]; interior j: [-lam Pj, 1 + lam(P_{j+1}-Q_j), lam Q_{j+1}];
    // j=n-1: [-lam P_{n-1}, 1 - lam Q_{n-1}]
    cw.resize(n); dw.resize(n);
    double diag0 = 1.0 + lam * fc.P[1];
    cw[0] = lam * fc.Q[1] / diag0;
    dw[0] = rho_old[0] / diag0;
    for (int j = 1; j < n; ++j) {
        double lower = -lam * fc.P[j];
        double diag = (j == n - 1) ? 1.0 - lam * fc.Q[j] : 1.0 + lam * (fc.P[j + 1] - fc.Q[j]);
        double upper = (j == n - 1) ? 0.0 : lam * fc.Q[j + 1];
        double denom = diag - lower * cw[j - 1];
        if (denom == 0.0) throw std::runtime_error("direct_step: tridiagonal solve failed");
        cw[j] = upper / denom;
        dw[j] = (rho_old[j] - lower * dw[j - 1]) / denom;
    }
    rho_new[n - 1] = dw[n - 1];
    for (int j = n - 2; j >= 0; --j)
        rho_new[j] = dw[j] - cw[j] * rho_new[j + 1];
}

std::vector<std::vector<double>> default_drift(const std::vector<DensityField>& pops,
                                               const ModelParams& p, double t)
{
    return {drift_field(pops[0], p, t)};
}

} // namespace

void direct_step(std::vector<DensityField>& pops, const ModelParams& p, const SolverConfig& cfg,
                 double t, const DriftProvider& drift)
{
    const int npop = (int)pops.size();
    const int nx = pops[0].xg.size();
    const int ns = pops[0].sg.n;
    double lam = cfg.dt / (p.tau_c * pops[0].sg.ds());

    std::vector<std::vector<double>> old_rho(npop);
    for (int b = 0; b < npop; ++b) old_rho[b] = pops[b].rho;

    auto phis = drift(pops, t);
    for (int it = 0;; ++it) {
#pragma omp parallel
        {
            FaceCoeffs fc;
            std::vector<double> cw, dw;
#pragma omp for schedule(static) collapse(2)
            for (int b = 0; b < npop; ++b)
                for (int x = 0; x < nx; ++x) {
                    face_coeffs(phis[b][x], pops[b].sg, p.sigma, cfg.scheme, fc);
                    implicit_row_solve(fc, lam, old_rho[b].data() + (size_t)x * ns,
                                       pops[b].row(x), ns, cw, dw);
                }
        }
        if (it + 1 >= cfg.picard_max_iter) break;
        // Picard update of the frozen nonlinearity
        auto phis_new = drift(pops, t);
        double diff = 0.0;
        for (int b = 0; b < npop; ++b)
            for (int x = 0; x < nx; ++x)
                diff = std::max(diff, std::fabs(phis_new[b][x] - phis[b][x]));
        phis.swap(phis_new);
        if (diff < cfg.picard_tol) break;
    }
    for (auto& f : pops) f.time = t + cfg.dt;
}

DensityField step(const DensityField& f, const ModelParams& p, const SolverConfig& cfg)
{
    cfg.validate();
    std::vector<DensityField> pops{f};
    direct_step(pops, p, cfg, f.time,
                [&](const std::vector<DensityField>& s, double t) { return default_drift(s, p, t); });
    return std::move(pops[0]);
}

std::vector<double> flux_divergence(const DensityField& f, const ModelParams& p,
                                    Scheme scheme, double t)
{
    auto phi = drift_field(f, p, t);
    int n = f.sg.n;
    double ds = f.sg.ds();
    std::vector<double> out((size_t)f.xg.size() * n, 0.0);
    FaceCoeffs fc;
    for (int x = 0; x < f.xg.size(); ++x) {
        face_coeffs(phi[x], f.sg, p.sigma, scheme, fc);
        const double* r = f.row(x);
        for (int j = 0; j < n; ++j) {
            double Fhi = j + 1 < n ? fc.P[j + 1] * r[j] + fc.Q[j + 1] * r[j + 1] : 0.0;
            double Flo = j > 0 ? fc.P[j] * r[j - 1] + fc.Q[j] * r[j] : 0.0;
            out[(size_t)x * n + j] = -(Fhi - Flo) / (p.tau_c * ds);
        }
    }
    return out;
}

double positivity_dt_bound(const DensityField& f, const ModelParams& p, double t)
{
    auto phi = drift_field(f, p, t);
    double amax = 0.0;
    for (int x = 0; x < f.xg.size(); ++x)
        for (int j = 0; j <= f.sg.n; ++j)
            amax = std::max(amax, std::fabs(phi[x] - f.sg.face(j)));
    double ds = f.sg.ds();
    return ds * ds / (2.0 * p.sigma + ds * amax);
}

namespace {

void observe(const DensityField& f, const std::vector<double>& mass0, RunMonitor& mon)
{
    for (int x = 0; x < f.xg.size(); ++x) {
        double m = f.per_x_mass(x);
        mon.max_mass_drift = std::max(mon.max_mass_drift,
                                      std::fabs(m - mass0[x]) / std::fabs(mass0[x]));
        mon.wall_mass = std::max(mon.wall_mass, f.at(x, f.sg.n - 1) * f.sg.ds());
    }
    mon.min_rho = std::min(mon.min_rho, f.min_value());
}

} // namespace

DirectRun run_direct(const DensityField& ic, const ModelParams& p, const SolverConfig& cfg,
                     const std::function<void(const DensityField&, double)>& on_snapshot)
{
    cfg.validate();
    p.validate();
    DirectRun run;
    std::vector<double> mass0(ic.xg.size());
    for (int x = 0; x < ic.xg.size(); ++x) mass0[x] = ic.per_x_mass(x);

    std::vector<DensityField> pops{ic};
    pops[0].time = 0.0;
    int nsteps = (int)std::llround(cfg.t_end / cfg.dt);

    auto record_trace = [&](const DensityField& f, double t) {
        run.times.push_back(t);
        run.rhobar.push_back(mean_activity(f));
        std::vector<double> bv(f.xg.size());
        for (int x = 0; x < f.xg.size(); ++x) bv[x] = f.boundary_value(x);
        run.boundary.push_back(std::move(bv));
    };
    auto record_snap = [&](const DensityField& f, double t) {
        run.snap_times.push_back(t);
        if (cfg.keep_snapshots) run.snapshots.push_back(f);
        if (on_snapshot) on_snapshot(f, t);
    };

    record_trace(pops[0], 0.0);
    record_snap(pops[0], 0.0);
    auto drift = [&](const std::vector<DensityField>& s, double t) { return default_drift(s, p, t); };

    for (int k = 1; k <= nsteps; ++k) {
        direct_step(pops, p, cfg, (k - 1) * cfg.dt, drift);
        double t = k * cfg.dt;
        record_trace(pops[0], t);
        observe(pops[0], mass0, run.monitor);
        if ((cfg.snapshot_stride > 0 && k % cfg.snapshot_stride == 0) || k == nsteps)
            record_snap(pops[0], t);
    }
    return run;
}

std::vector<std::vector<double>> boundary_trace(const DirectRun& run) { return run.boundary; }

double MomentResidual::sup() const
{
    double m = 0.0;
    for (double v : sup_residual) m = std::max(m, std::fabs(v));
    return m;
}

MomentResidual weak_moment_residual(const std::vector<DensityField>& snaps,
                                    const std::vector<double>& snap_times,
                                    const ModelParams& p,
                                    const std::function<double(double)>& h,
                                    const std::function<double(double)>& hp,
                                    const std::function<double(double)>& hpp)
{
    MomentResidual res;
    if (snaps.size() < 3) return res;
    int nx = snaps[0].xg.size(), ns = snaps[0].sg.n;
    double ds = snaps[0].sg.ds();

    auto moment = [&](const DensityField& f, int x) {
        double acc = 0.0;
        for (int j = 0; j < ns; ++j) acc += h(f.sg.center(j)) * f.at(x, j);
        return acc * ds;
    };

    for (size_t i = 1; i + 1 < snaps.size(); ++i) {
        const DensityField& f = snaps[i];
        auto phi = drift_field(f, p, snap_times[i]);
        double dtm = snap_times[i + 1] - snap_times[i - 1];
        double sup = 0.0;
        for (int x = 0; x < nx; ++x) {
            double lhs = p.tau_c * (moment(snaps[i + 1], x) - moment(snaps[i - 1], x)) / dtm;
            double rhs = 0.0;
            for (int j = 0; j < ns; ++j) {
                double s = f.sg.center(j);
                rhs += ((phi[x] - s) * hp(s) + p.sigma * hpp(s)) * f.at(x, j);
            }
            rhs *= ds;
            rhs += p.sigma * hp(0.0) * f.boundary_value(x);
            sup = std::max(sup, std::fabs(lhs - rhs));
        }
        res.times.push_back(snap_times[i]);
        res.sup_residual.push_back(sup);
    }
    return res;
}

// quintic 6s^3 - 8s^4 + 3s^5 on [0,1], identity above; C^2 with flat start
double smoothed_linear_h(double s)
{
    if (s >= 1.0) return s;
    if (s <= 0.0) return 0.0;
    return s * s * s * (6.0 - 8.0 * s + 3.0 * s * s);
}
double smoothed_linear_hp(double s)
{
    if (s >= 1.0) return 1.0;
    if (s <= 0.0) return 0.0;
    return s * s * (18.0 - 32.0 * s + 15.0 * s * s);
}
double smoothed_linear_hpp(double s)
{
    if (s >= 1.0 || s <= 0.0) return 0.0;
    return s * (36.0 - 96.0 * s + 60.0 * s * s);
}

namespace reference {

DensityField step_fokker_planck(const DensityField& f, const ModelParams& p,
                                const SolverConfig& cfg)
{
    DensityField out = f;
    auto phi = drift_field(f, p, f.time);
    int n = f.sg.n;
    double ds = f.sg.ds();
    double lam = cfg.dt / (p.tau_c * ds);
    std::vector<double> P(n), Q(n), cw(n), dw(n), newrow(n);
    for (int x = 0; x < f.xg.size(); ++x) {
        for (int fc = 1; fc < n; ++fc) {
            double a = phi[x] - f.sg.face(fc);
            double w = a * ds / p.sigma;
            double theta = cfg.scheme == Scheme::ChangCooper
                               ? (std::fabs(w) < 1e-5 ? 0.5 + w / 12.0 : -1.0 / std::expm1(-w) - 1.0 / w)
                               : (a > 0.0 ? 1.0 : 0.0);
            P[fc] = a * theta + p.sigma / ds;
            Q[fc] = a * (1.0 - theta) - p.sigma / ds;
        }
        const double* r = f.row(x);
        double diag0 = 1.0 + lam * P[1];
        cw[0] = lam * Q[1] / diag0;
        dw[0] = r[0] / diag0;
        for (int j = 1; j < n; ++j) {
            double lower = -lam * P[j];
            double diag = (j == n - 1) ? 1.0 - lam * Q[j] : 1.0 + lam * (P[j + 1] - Q[j]);
            double upper = (j == n - 1) ? 0.0 : lam * Q[j + 1];
            double denom = diag - lower * cw[j - 1];
            cw[j] = upper / denom;
            dw[j] = (r[j] - lower * dw[j - 1]) / denom;
        }
        newrow[n - 1] = dw[n - 1];
        for (int j = n - 2; j >= 0; --j) newrow[j] = dw[j] - cw[j] * newrow[j + 1];
        for (int j = 0; j < n; ++j) out.at(x, j) = newrow[j];
    }
    out.time = f.time + cfg.dt;
    return out;
}

} // namespace reference

} // namespace nfsf
