#include "nfsf/special.hpp"

#include <algorithm>
#include <cfloat>

namespace nfsf {

namespace {

// Coefficients from W. J. Cody, "Rational Chebyshev approximation for the
// error function", Math. Comp. 23 (1969). Same scheme as netlib CALERF.
constexpr double A[5] = {3.16112374387056560e00, 1.13864154151050156e02,
                         3.77485237685302021e02, 3.20937758913846947e03,
                         1.85777706184603153e-1};
constexpr double Bc[4] = {2.36012909523441209e01, 2.44024637934444173e02,
                          1.28261652607737228e03, 2.84423683343917062e03};
constexpr double C[9] = {5.64188496988670089e-1, 8.88314979438837594e00,
                         6.61191906371416295e01, 2.98635138197400131e02,
                         8.81952221241769090e02, 1.71204761263407058e03,
                         2.05107837782607147e03, 1.23033935479799725e03,
                         2.15311535474403846e-8};
constexpr double D[8] = {1.57449261107098347e01, 1.17693950891312499e02,
                         5.37181101862009858e02, 1.62138957456669019e03,
                         3.29079923573345963e03, 4.36261909014324716e03,
                         3.43936767414372164e03, 1.23033935480374942e03};
constexpr double P[6] = {3.05326634961232344e-1, 3.60344899949804439e-1,
                         1.25781726111229246e-1, 1.60837851487422766e-2,
                         6.58749161529837803e-4, 1.63153871373020978e-2};
constexpr double Q[5] = {2.56852019228982242e00, 1.87295284992346047e00,
                         5.27905102951428412e-1, 6.05183413124413191e-2,
                         2.33520497626869185e-3};

// erfcx(y) for y >= 0.46875 (the exp(-y^2) factor removed analytically).
double erfcx_core(double y)
{
    if (y <= 4.0) {
        double xnum = C[8] * y, xden = y;
        for (int i = 0; i < 7; ++i) {
            xnum = (xnum + C[i]) * y;
            xden = (xden + D[i]) * y;
        }
        return (xnum + C[7]) / (xden + D[7]);
    }
    double z = 1.0 / (y * y);
    double xnum = P[5] * z, xden = z;
    for (int i = 0; i < 4; ++i) {
        xnum = (xnum + P[i]) * z;
        xden = (xden + Q[i]) * z;
    }
    double r = z * (xnum + P[4]) / (xden + Q[4]);
    return (kInvSqrtPi - r) / y;
}

// exp(-y^2) with the split-argument trick to avoid the rounding of y*y.
double exp_neg_sq(double y)
{
    double ysq = std::floor(y * 16.0) / 16.0;
    double del = (y - ysq) * (y + ysq);
    return std::exp(-ysq * ysq) * std::exp(-del);
}

} // namespace

double erf(double x)
{
    double y = std::fabs(x);
    if (y <= 0.46875) {
        double z = y > DBL_EPSILON ? y * y : 0.0;
        double xnum = A[4] * z, xden = z;
        for (int i = 0; i < 3; ++i) {
            xnum = (xnum + A[i]) * z;
            xden = (xden + Bc[i]) * z;
        }
        return x * (xnum + A[3]) / (xden + Bc[3]);
    }
    double r = 1.0 - exp_neg_sq(y) * erfcx_core(y);
    return x < 0.0 ? -r : r;
}

double erfc(double x)
{
    double y = std::fabs(x);
    if (y <= 0.46875)
        return 1.0 - nfsf::erf(x);
    double r = y < 26.7 ? exp_neg_sq(y) * erfcx_core(y) : 0.0;
    return x < 0.0 ? 2.0 - r : r;
}

double erfcx(double x)
{
    if (x >= 0.46875)
        return erfcx_core(x);
    if (x >= -26.0)
        return std::exp(x * x) * nfsf::erfc(x);
    return HUGE_VAL; // 2 exp(x^2) overflows
}

double halfline_gaussian_mass(double mu, double scale)
{
    if (!(scale > 0.0))
        throw std::domain_error("halfline_gaussian_mass: scale must be positive");
    return std::sqrt(kPi * scale / 2.0) * nfsf::erfc(-mu / std::sqrt(2.0 * scale));
}

double heat_kernel(double z, double tau, double xi, double eta)
{
    double r = tau - eta;
    if (!(r > 0.0))
        throw std::domain_error("heat_kernel: requires tau > eta");
    double d = z - xi;
    return std::exp(-d * d / (4.0 * r)) / std::sqrt(4.0 * kPi * r);
}

double heat_kernel_dxi(double z, double tau, double xi, double eta)
{
    double r = tau - eta;
    if (!(r > 0.0))
        throw std::domain_error("heat_kernel_dxi: requires tau > eta");
    return (z - xi) / (2.0 * r) * heat_kernel(z, tau, xi, eta);
}

double halfline_z_moment(double gamma_tau, double tau, double xi, double eta)
{
    double r = tau - eta;
    if (!(r >= 0.0) || tau == eta)
        throw std::domain_error("halfline_z_moment: requires tau > eta");
    if (r < 1e-14) {
        // analytic limit: the kernel collapses to a point mass at xi
        if (xi > gamma_tau) return xi;
        if (xi < gamma_tau) return 0.0;
        return 0.5 * xi;
    }
    double d = xi - gamma_tau;
    double sr = std::sqrt(r);
    return std::sqrt(r / kPi) * std::exp(-d * d / (4.0 * r)) +
           0.5 * xi * nfsf::erfc(-d / (2.0 * sr));
}

double halfline_z_moment_dxi(double gamma_tau, double tau, double gamma_eta, double eta)
{
    double r = tau - eta;
    if (!(r >= 0.0) || tau == eta)
        throw std::domain_error("halfline_z_moment_dxi: requires tau > eta");
    if (r < 1e-14) {
        // analytic indicator / one-half limit instead of a near-singular kernel
        if (gamma_eta > gamma_tau) return 1.0;
        if (gamma_eta < gamma_tau) return 0.0;
        return 0.5 + gamma_tau / std::sqrt(4.0 * kPi * std::max(r, 1e-14));
    }
    double d = gamma_tau - gamma_eta;
    return gamma_tau * std::exp(-d * d / (4.0 * r)) / std::sqrt(4.0 * kPi * r) +
           0.5 * nfsf::erfc(d / (2.0 * std::sqrt(r)));
}

namespace {

// Gauss-Legendre 64 on [-1,1]; nodes/weights generated by Newton iteration once.
struct GL64 {
    double x[64], w[64];
    GL64()
    {
        const int n = 64;
        for (int i = 0; i < n / 2; ++i) {
            double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
            double p0, p1, dp;
            for (int it = 0; it < 100; ++it) {
                p0 = 1.0; p1 = t;
                for (int k = 2; k <= n; ++k) {
                    double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
                    p0 = p1; p1 = p2;
                }
                dp = n * (t * p1 - p0) / (t * t - 1.0);
                double dt = p1 / dp;
                t -= dt;
                if (std::fabs(dt) < 1e-16) break;
            }
            x[i] = -t; x[n - 1 - i] = t;
            w[i] = w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
        }
    }
};
const GL64 gl64;

double alt_dilog_series(double q) // sum_{k>=1} (-1)^{k+1} e^{k q} / k^2, q <= -6
{
    double e = std::exp(q), term = e, s = 0.0;
    for (int k = 1; k <= 30 && std::fabs(term) > 1e-18; ++k) {
        s += (k % 2 ? term : -term) / (double(k) * k);
        term *= e;
    }
    return s;
}

} // namespace

double softplus_antiderivative(double q)
{
    const double pi2_6 = kPi * kPi / 6.0;
    if (q <= -6.0)
        return alt_dilog_series(q);
    if (q >= 6.0)
        return 0.5 * q * q + pi2_6 - alt_dilog_series(-q);
    // middle region: I(-6) + GL64 of the smooth integrand on [-6, q]
    double s = alt_dilog_series(-6.0);
    double a = -6.0, half = 0.5 * (q - a), mid = 0.5 * (q + a);
    double acc = 0.0;
    for (int i = 0; i < 64; ++i)
        acc += gl64.w[i] * std::log1p(std::exp(mid + half * gl64.x[i]));
    return s + half * acc;
}

} // namespace nfsf
