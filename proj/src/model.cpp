#include "nfsf/model.hpp"

#include "nfsf/special.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nfsf {

SpatialGrid::SpatialGrid(int d_, double L_, int n_) : d(d_), L(L_), n(n_)
{
    if (d != 1 && d != 2) throw std::invalid_argument("SpatialGrid: d must be 1 or 2");
    if (!(L > 0.0)) throw std::invalid_argument("SpatialGrid: L must be positive");
    if (n < 1) throw std::invalid_argument("SpatialGrid: n must be >= 1");
}

ActivityGrid::ActivityGrid(int n_, double s_max_) : n(n_), s_max(s_max_)
{
    if (n < 2) throw std::invalid_argument("ActivityGrid: n must be >= 2");
    if (!(s_max > 0.0)) throw std::invalid_argument("ActivityGrid: s_max must be positive");
}

ActivityGrid ActivityGrid::sized(double phi_max, double sigma, double ds_target)
{
    double smax = phi_max + 10.0 * std::sqrt(sigma);
    int n = std::max(32, (int)std::ceil(smax / ds_target));
    return ActivityGrid(n, smax);
}

// ---- ModulationFn ------------------------------------------------------

double ModulationFn::operator()(double p) const
{
    switch (kind) {
    case PhiKind::Linear: return p0 * p + p1;
    case PhiKind::SmoothedRectifier: {
        double u = p / p1;
        // log1p(exp(u)) without overflow
        double sp = u > 36.0 ? u : (u < -745.0 ? 0.0 : std::log1p(std::exp(u)));
        return p0 * p1 * sp;
    }
    case PhiKind::Sigmoid: {
        double u = (p - p1) / p2;
        return p0 / (1.0 + std::exp(-u));
    }
    case PhiKind::Tabulated: {
        if (p <= tab_x.front())
            return tab_y.front();
        if (p >= tab_x.back())
            return tab_y.back();
        auto it = std::upper_bound(tab_x.begin(), tab_x.end(), p);
        size_t i = it - tab_x.begin() - 1;
        double t = (p - tab_x[i]) / (tab_x[i + 1] - tab_x[i]);
        return tab_y[i] + t * (tab_y[i + 1] - tab_y[i]);
    }
    }
    return 0.0;
}

double ModulationFn::deriv(double p) const
{
    switch (kind) {
    case PhiKind::Linear: return p0;
    case PhiKind::SmoothedRectifier: {
        double u = p / p1;
        if (u > 36.0) return p0;
        if (u < -745.0) return 0.0;
        return p0 / (1.0 + std::exp(-u));
    }
    case PhiKind::Sigmoid: {
        double u = (p - p1) / p2;
        double s = 1.0 / (1.0 + std::exp(-std::fabs(u)));
        s = u >= 0 ? s : 1.0 - s;
        return p0 * s * (1.0 - s) / p2;
    }
    case PhiKind::Tabulated: {
        double h = tab_x.size() > 1 ? (tab_x[1] - tab_x[0]) * 0.5 : 1e-4;
        return ((*this)(p + h) - (*this)(p - h)) / (2.0 * h);
    }
    }
    return 0.0;
}

double ModulationFn::deriv2(double p) const
{
    switch (kind) {
    case PhiKind::Linear: return 0.0;
    case PhiKind::SmoothedRectifier: {
        double u = p / p1;
        if (std::fabs(u) > 36.0) return 0.0;
        double s = 1.0 / (1.0 + std::exp(-u));
        return p0 * s * (1.0 - s) / p1;
    }
    case PhiKind::Sigmoid: {
        double u = (p - p1) / p2;
        if (std::fabs(u) > 36.0) return 0.0;
        double s = 1.0 / (1.0 + std::exp(-u));
        return p0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (p2 * p2);
    }
    case PhiKind::Tabulated: {
        double h = tab_x.size() > 1 ? (tab_x[1] - tab_x[0]) : 1e-3;
        return ((*this)(p + h) - 2.0 * (*this)(p) + (*this)(p - h)) / (h * h);
    }
    }
    return 0.0;
}

double ModulationFn::lipschitz() const
{
    switch (kind) {
    case PhiKind::Linear: return std::fabs(p0);
    case PhiKind::SmoothedRectifier: return std::fabs(p0);
    case PhiKind::Sigmoid: return std::fabs(p0) / (4.0 * p2);
    case PhiKind::Tabulated: {
        double m = 0.0;
        for (size_t i = 0; i + 1 < tab_x.size(); ++i)
            m = std::max(m, std::fabs((tab_y[i + 1] - tab_y[i]) / (tab_x[i + 1] - tab_x[i])));
        return m;
    }
    }
    return 0.0;
}

double ModulationFn::deriv2_sup() const
{
    switch (kind) {
    case PhiKind::Linear: return 0.0;
    case PhiKind::SmoothedRectifier: return std::fabs(p0) / (4.0 * p1);
    case PhiKind::Sigmoid: return std::fabs(p0) / (p2 * p2) * 0.09622504486493763; // max |s(1-s)(1-2s)|
    case PhiKind::Tabulated: return 0.0; // piecewise linear
    }
    return 0.0;
}

int ModulationFn::sign() const
{
    switch (kind) {
    case PhiKind::Linear:
        if (p0 == 0.0) return p1 >= 0.0 ? 1 : -1;
        return 0;
    case PhiKind::SmoothedRectifier: return p0 >= 0.0 ? 1 : -1;
    case PhiKind::Sigmoid: return p0 >= 0.0 ? 1 : -1;
    case PhiKind::Tabulated: {
        bool nonneg = true, nonpos = true;
        for (double v : tab_y) { nonneg &= v >= 0.0; nonpos &= v <= 0.0; }
        return nonneg ? 1 : (nonpos ? -1 : 0);
    }
    }
    return 0;
}

bool ModulationFn::increasing() const
{
    switch (kind) {
    case PhiKind::Linear: return p0 > 0.0;
    case PhiKind::SmoothedRectifier: return p0 > 0.0;
    case PhiKind::Sigmoid: return p0 > 0.0;
    case PhiKind::Tabulated:
        for (size_t i = 0; i + 1 < tab_y.size(); ++i)
            if (tab_y[i + 1] <= tab_y[i]) return false;
        return true;
    }
    return false;
}

bool ModulationFn::invertible() const { return increasing(); }

double ModulationFn::inverse(double v) const
{
    if (!invertible())
        throw std::domain_error("ModulationFn::inverse: Phi is not strictly increasing");
    switch (kind) {
    case PhiKind::Linear: return (v - p1) / p0;
    case PhiKind::SmoothedRectifier: {
        double y = v / (p0 * p1);
        if (y <= 0.0) throw std::domain_error("rectifier inverse: value out of range");
        return p1 * (y > 36.0 ? y : std::log(std::expm1(y)));
    }
    case PhiKind::Sigmoid: {
        double y = v / p0;
        if (y <= 0.0 || y >= 1.0) throw std::domain_error("sigmoid inverse: value out of range");
        return p1 + p2 * std::log(y / (1.0 - y));
    }
    case PhiKind::Tabulated: {
        // monotone bisection to 1e-12
        double lo = tab_x.front(), hi = tab_x.back();
        if (v < tab_y.front() || v > tab_y.back())
            throw std::domain_error("tabulated inverse: value out of range");
        for (int it = 0; it < 200 && hi - lo > 1e-12 * (1.0 + std::fabs(lo)); ++it) {
            double mid = 0.5 * (lo + hi);
            ((*this)(mid) < v ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }
    }
    return 0.0;
}

double ModulationFn::inverse_primitive(double zeta) const
{
    if (zeta == 0.0) return 0.0;
    double q = inverse(zeta);
    switch (kind) {
    case PhiKind::Linear: {
        double q0 = -p1 / p0; // Phi(q0) = 0
        return q * zeta - (0.5 * p0 * (q * q - q0 * q0) + p1 * (q - q0));
    }
    case PhiKind::SmoothedRectifier:
        return q * zeta - p0 * p1 * p1 * softplus_antiderivative(q / p1);
    case PhiKind::Sigmoid: {
        double u = (q - p1) / p2;
        double sp = u > 36.0 ? u : std::log1p(std::exp(u));
        return q * zeta - p0 * p2 * sp;
    }
    case PhiKind::Tabulated: {
        // trapezoid on the inverse over [min(tab_yy>0) .. zeta]
        int n = 512;
        double acc = 0.0, lo = std::max(tab_y.front(), 1e-300);
        double h = (zeta - lo) / n;
        for (int i = 0; i <= n; ++i) {
            double w = (i == 0 || i == n) ? 0.5 : 1.0;
            acc += w * inverse(lo + i * h);
        }
        return acc * h;
    }
    }
    return 0.0;
}

ModulationFn ModulationFn::scaled(double a) const
{
    ModulationFn r = *this;
    switch (kind) {
    case PhiKind::Linear: r.p0 *= a; r.p1 *= a; break;
    case PhiKind::SmoothedRectifier: r.p0 *= a; break;
    case PhiKind::Sigmoid: r.p0 *= a; break;
    case PhiKind::Tabulated:
        for (double& v : r.tab_y) v *= a;
        break;
    }
    return r;
}

ModulationFn ModulationFn::linear(double gain, double offset)
{
    ModulationFn m; m.kind = PhiKind::Linear; m.p0 = gain; m.p1 = offset;
    return m;
}

ModulationFn ModulationFn::rectifier(double gain, double nu)
{
    if (!(nu > 0.0)) throw std::invalid_argument("rectifier: nu must be positive");
    ModulationFn m; m.kind = PhiKind::SmoothedRectifier; m.p0 = gain; m.p1 = nu;
    return m;
}

ModulationFn ModulationFn::sigmoid(double amplitude, double center, double width)
{
    if (!(width > 0.0)) throw std::invalid_argument("sigmoid: width must be positive");
    ModulationFn m; m.kind = PhiKind::Sigmoid; m.p0 = amplitude; m.p1 = center; m.p2 = width;
    return m;
}

ModulationFn ModulationFn::tabulated(std::vector<double> x, std::vector<double> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("tabulated: need matching x/y with >= 2 points");
    for (size_t i = 0; i + 1 < x.size(); ++i)
        if (x[i + 1] <= x[i]) throw std::invalid_argument("tabulated: x must be increasing");
    ModulationFn m; m.kind = PhiKind::Tabulated;
    m.tab_x = std::move(x); m.tab_y = std::move(y);
    return m;
}

// ---- ConnectivityKernel ------------------------------------------------

void ConnectivityKernel::finalize()
{
    double vol = grid.cell_volume();
    W0 = 0.0; norm_l1 = 0.0; norm_l2 = 0.0;
    for (double v : samples) {
        W0 += v; norm_l1 += std::fabs(v); norm_l2 += v * v;
    }
    W0 *= vol; norm_l1 *= vol; norm_l2 = std::sqrt(norm_l2 * vol);

    symmetric = true;
    if (grid.d == 1) {
        for (int i = 0; i < grid.n; ++i)
            if (std::fabs(at(i) - at(-i)) > 1e-12) { symmetric = false; break; }
    } else {
        for (int i = 0; i < grid.n && symmetric; ++i)
            for (int j = 0; j < grid.n; ++j)
                if (std::fabs(at(i, j) - at(-i, -j)) > 1e-12) { symmetric = false; break; }
    }

    // centered-difference gradient sup
    grad_sup = 0.0;
    double h = grid.dx();
    if (grid.d == 1) {
        for (int i = 0; i < grid.n; ++i)
            grad_sup = std::max(grad_sup, std::fabs(at(i + 1) - at(i - 1)) / (2.0 * h));
    } else {
        for (int i = 0; i < grid.n; ++i)
            for (int j = 0; j < grid.n; ++j) {
                double gx = (at(i + 1, j) - at(i - 1, j)) / (2.0 * h);
                double gy = (at(i, j + 1) - at(i, j - 1)) / (2.0 * h);
                grad_sup = std::max(grad_sup, std::hypot(gx, gy));
            }
    }
}

ConnectivityKernel ConnectivityKernel::constant(const SpatialGrid& g, double c)
{
    ConnectivityKernel k; k.grid = g; k.kind = KernelKind::Constant;
    k.samples.assign(g.size(), c);
    k.finalize();
    return k;
}

ConnectivityKernel ConnectivityKernel::cosine(const SpatialGrid& g, double mean, double amp, int mode)
{
    ConnectivityKernel k; k.grid = g; k.kind = KernelKind::Cosine;
    k.samples.resize(g.size());
    double w = 2.0 * kPi * mode / g.L;
    if (g.d == 1) {
        for (int i = 0; i < g.n; ++i)
            k.samples[i] = mean + amp * std::cos(w * g.coord(i));
    } else {
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                k.samples[g.index(i, j)] =
                    mean + 0.5 * amp * (std::cos(w * g.coord(i)) + std::cos(w * g.coord(j)));
    }
    k.finalize();
    return k;
}

ConnectivityKernel ConnectivityKernel::gaussian_diff(const SpatialGrid& g, double a1, double s1,
                                                     double a2, double s2)
{
    ConnectivityKernel k; k.grid = g; k.kind = KernelKind::GaussianDiff;
    k.samples.assign(g.size(), 0.0);
    auto bump = [&](double r2, double a, double s) {
        return a * std::exp(-0.5 * r2 / (s * s)) / std::pow(2.0 * kPi * s * s, 0.5 * g.d);
    };
    int images = 3;
    if (g.d == 1) {
        for (int i = 0; i < g.n; ++i) {
            double x = g.coord(i), v = 0.0;
            for (int m = -images; m <= images; ++m) {
                double r = x + m * g.L;
                v += bump(r * r, a1, s1) - bump(r * r, a2, s2);
            }
            k.samples[i] = v;
        }
    } else {
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j) {
                double x = g.coord(i), y = g.coord(j), v = 0.0;
                for (int mx = -images; mx <= images; ++mx)
                    for (int my = -images; my <= images; ++my) {
                        double r2 = (x + mx * g.L) * (x + mx * g.L) + (y + my * g.L) * (y + my * g.L);
                        v += bump(r2, a1, s1) - bump(r2, a2, s2);
                    }
                k.samples[g.index(i, j)] = v;
            }
    }
    k.finalize();
    return k;
}

ConnectivityKernel ConnectivityKernel::tabulated(const SpatialGrid& g, std::vector<double> s)
{
    if ((int)s.size() != g.size())
        throw std::invalid_argument("ConnectivityKernel::tabulated: sample count mismatch");
    ConnectivityKernel k; k.grid = g; k.kind = KernelKind::Tabulated;
    k.samples = std::move(s);
    k.finalize();
    return k;
}

ConnectivityKernel ConnectivityKernel::scaled(double a) const
{
    ConnectivityKernel k = *this;
    for (double& v : k.samples) v *= a;
    k.finalize();
    return k;
}

// ---- ExternalInput -----------------------------------------------------

double ExternalInput::operator()(double t) const
{
    if (times.empty()) return values[0];
    if (t <= times.front()) return values.front();
    if (t >= times.back()) return values.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    size_t i = it - times.begin() - 1;
    double u = (t - times[i]) / (times[i + 1] - times[i]);
    return values[i] + u * (values[i + 1] - values[i]);
}

double ExternalInput::sup_abs(double t_end) const
{
    if (times.empty()) return std::fabs(values[0]);
    double m = 0.0;
    for (size_t i = 0; i < times.size(); ++i)
        if (times[i] <= t_end || i == 0) m = std::max(m, std::fabs(values[i]));
    m = std::max(m, std::fabs((*this)(t_end)));
    return m;
}

ExternalInput ExternalInput::constant(double b)
{
    ExternalInput e; e.values = {b};
    return e;
}

ExternalInput ExternalInput::tabulated(std::vector<double> t, std::vector<double> v)
{
    if (t.size() != v.size() || t.size() < 2)
        throw std::invalid_argument("ExternalInput::tabulated: need matching t/v with >= 2 points");
    for (size_t i = 0; i + 1 < t.size(); ++i)
        if (t[i + 1] <= t[i]) throw std::invalid_argument("ExternalInput: times must be increasing");
    ExternalInput e; e.times = std::move(t); e.values = std::move(v);
    return e;
}

// ---- ModelParams -------------------------------------------------------

void ModelParams::validate() const
{
    if (!(tau_c > 0.0)) throw std::invalid_argument("ModelParams: tau_c must be positive");
    if (!(sigma > 0.0)) throw std::invalid_argument("ModelParams: sigma must be positive");
    if (!(L > 0.0)) throw std::invalid_argument("ModelParams: L must be positive");
    if (d != 1 && d != 2) throw std::invalid_argument("ModelParams: d must be 1 or 2");
    if (W.grid.d != d || W.grid.L != L)
        throw std::invalid_argument("ModelParams: kernel grid does not match (d, L)");
    if (B.values.empty()) throw std::invalid_argument("ModelParams: external input not set");
}

double ModelParams::Ld() const { return d == 1 ? L : L * L; }
double ModelParams::inv_Ld() const { return 1.0 / Ld(); }

std::pair<ModelParams, RescaleMap> normalize_parameters(const ModelParams& p)
{
    p.validate();
    RescaleMap map{p.tau_c, p.sigma};
    ModelParams q = p;
    q.tau_c = 1.0;
    q.sigma = 1.0;
    double rs = std::sqrt(p.sigma);
    // Phi~ = Phi/sqrt(sigma); W~ = sqrt(sigma) W keeps the drift argument
    // W*rhobar + B invariant since rhobar~ = rhobar/sqrt(sigma).
    q.phi = p.phi.scaled(1.0 / rs);
    q.W = p.W.scaled(rs);
    // B enters the drift argument unscaled, but its time axis follows t~ = t/tau_c
    q.B = p.B;
    for (double& t : q.B.times) t /= p.tau_c;
    return {q, map};
}

} // namespace nfsf
