#pragma once

// Test-only helpers: independent quadrature oracles and small utilities.
// Deliberately built on std:: primitives only, so the oracles stay
// independent of the library code they check.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace testsupport {

// adaptive Simpson with absolute/relative tolerance
inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth)
{
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12, int depth = 40)
{
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

// integral over [a, inf) of a function decaying at least like a Gaussian:
// truncate where the caller says it is dead
inline double integrate_halfline(const std::function<double(double)>& f, double a, double cutoff,
                                 double tol = 1e-12)
{
    return integrate(f, a, cutoff, tol);
}

// erf by series/continued fraction, independent of the library implementation
inline double erf_oracle(double x)
{
    double ax = std::fabs(x);
    double r;
    if (ax < 2.0) { // series cancellation grows like e^{x^2}; switch early
        // Maclaurin series erf(x) = 2/sqrt(pi) sum (-1)^n x^{2n+1} / (n! (2n+1))
        double term = ax, sum = ax;
        for (int n = 1; n < 200; ++n) {
            term *= -ax * ax / n;
            double add = term / (2 * n + 1);
            sum += add;
            if (std::fabs(add) < 1e-18 * std::fabs(sum)) break;
        }
        r = 2.0 / std::sqrt(M_PI) * sum;
    } else {
        // continued fraction for erfc
        double cf = 0.0;
        for (int k = 60; k >= 1; --k) cf = 0.5 * k / (ax + cf);
        double erfc = std::exp(-ax * ax) / (std::sqrt(M_PI) * (ax + cf));
        r = 1.0 - erfc;
    }
    return x < 0 ? -r : r;
}

struct LinFit {
    double slope, intercept, r2;
};

inline LinFit linear_fit(const std::vector<double>& x, const std::vector<double>& y)
{
    double n = (double)x.size(), sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i]; sy += y[i]; sxx += x[i] * x[i]; sxy += x[i] * y[i]; syy += y[i] * y[i];
    }
    LinFit f;
    f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    f.intercept = (sy - f.slope * sx) / n;
    double denom = (n * sxx - sx * sx) * (n * syy - sy * sy);
    f.r2 = denom > 0 ? (n * sxy - sx * sy) * (n * sxy - sx * sy) / denom : 1.0;
    return f;
}

} // namespace testsupport
