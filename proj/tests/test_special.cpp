#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nfsf/special.hpp"
#include "support.hpp"

#include <cmath>
#include <random>

using namespace nfsf;

TEST_CASE("erf matches the series/continued-fraction oracle to 1e-14")
{
    CHECK(nfsf::erf(0.0) == 0.0);
    CHECK(std::fabs(nfsf::erf(10.0) - 1.0) < 1e-14);
    CHECK(std::fabs(nfsf::erf(1.0) - 0.8427007929497149) < 1e-12);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(-8.0, 8.0);
    for (int i = 0; i < 5000; ++i) {
        double x = U(rng);
        CHECK(std::fabs(nfsf::erf(x) - testsupport::erf_oracle(x)) < 1e-14);
        CHECK(nfsf::erf(-x) == doctest::Approx(-nfsf::erf(x)).epsilon(1e-15)); // odd
    }
    // cross-check against the libm implementation as well
    for (int i = 0; i < 5000; ++i) {
        double x = U(rng);
        CHECK(std::fabs(nfsf::erf(x) - std::erf(x)) < 1e-14);
        CHECK(std::fabs(nfsf::erfc(x) - std::erfc(x)) < 1e-14);
    }
}

TEST_CASE("erfcx is the scaled complement and stays finite for large x")
{
    for (double x : {0.5, 1.0, 3.0, 8.0, 20.0, 100.0, 1e4}) {
        double v = erfcx(x);
        CHECK(v > 0.0);
        CHECK(std::isfinite(v));
        // asymptotic erfcx(x) ~ 1/(x sqrt(pi))
        if (x >= 20.0)
            CHECK(v == doctest::Approx(1.0 / (x * kSqrtPi)).epsilon(1e-3));
    }
    CHECK(erfcx(2.0) == doctest::Approx(std::exp(4.0) * std::erfc(2.0)).epsilon(1e-13));
}

TEST_CASE("half-line Gaussian mass closed form")
{
    // mu=0, scale=1: sqrt(pi/2)
    CHECK(halfline_gaussian_mass(0.0, 1.0) ==
          doctest::Approx(std::sqrt(kPi / 2.0)).epsilon(1e-14));
    // quadrature oracle
    double q = testsupport::integrate([](double y) { return std::exp(-0.5 * y * y); }, 0.0, 40.0);
    CHECK(halfline_gaussian_mass(0.0, 1.0) == doctest::Approx(q).epsilon(1e-12));
    // vanishing tail
    CHECK(halfline_gaussian_mass(-50.0, 1.0) < 1e-300);
    // mu >> 0: the full Gaussian mass
    CHECK(halfline_gaussian_mass(50.0, 1.0) ==
          doctest::Approx(std::sqrt(2.0 * kPi)).epsilon(1e-13));
    CHECK_THROWS_AS(halfline_gaussian_mass(0.0, -1.0), std::domain_error);

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> M(-3.0, 3.0), S(0.1, 4.0);
    for (int i = 0; i < 200; ++i) {
        double mu = M(rng), sc = S(rng);
        double oracle = testsupport::integrate(
            [&](double y) {
                double d = y - mu;
                return std::exp(-d * d / (2.0 * sc));
            },
            0.0, mu + 30.0 * std::sqrt(sc));
        CHECK(halfline_gaussian_mass(mu, sc) == doctest::Approx(oracle).epsilon(1e-11));
    }
}

TEST_CASE("heat kernel value, symmetry and normalization")
{
    double tau = 1.3, eta = 0.3;
    CHECK(heat_kernel(0.7, tau, 0.7, eta) ==
          doctest::Approx(1.0 / std::sqrt(4.0 * kPi * (tau - eta))).epsilon(1e-15));
    CHECK(heat_kernel_dxi(0.7, tau, 0.7, eta) == 0.0);
    CHECK(heat_kernel(1.0, 0.25, 0.0, 0.0) == doctest::Approx(std::exp(-1.0) / kSqrtPi).epsilon(1e-14));

    double q = testsupport::integrate([&](double xi) { return heat_kernel(0.2, tau, xi, eta); },
                                      0.2 - 30.0, 0.2 + 30.0, 1e-13);
    CHECK(q == doctest::Approx(1.0).epsilon(1e-10));

    CHECK_THROWS_AS(heat_kernel(0.0, 1.0, 0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(heat_kernel_dxi(0.0, 0.5, 0.0, 1.0), std::domain_error);
}

TEST_CASE("heat kernel xi-derivative matches central differences at O(h^2)")
{
    double z = 0.8, tau = 1.0, eta = 0.2;
    std::vector<double> hs{1e-3, 5e-4, 2.5e-4}, errs;
    for (double h : hs) {
        double fd = (heat_kernel(z, tau, 0.4 + h, eta) - heat_kernel(z, tau, 0.4 - h, eta)) /
                    (2.0 * h);
        errs.push_back(std::fabs(fd - heat_kernel_dxi(z, tau, 0.4, eta)));
    }
    CHECK(errs[2] < errs[0]);
    // order check: error ratio ~ 4 per halving
    CHECK(errs[0] / errs[1] > 3.0);
}

TEST_CASE("half-line first moment of G (closed form vs trivial anchors)")
{
    double tau = 0.9, eta = 0.1;
    // gamma=0, xi=0: sqrt((tau-eta)/pi)
    CHECK(halfline_z_moment(0.0, tau, 0.0, eta) ==
          doctest::Approx(std::sqrt((tau - eta) / kPi)).epsilon(1e-14));
    // far boundary: everything dies (44 standard deviations out)
    double far = 1.0 + 44.0 * std::sqrt(tau - eta);
    CHECK(std::fabs(halfline_z_moment(far, tau, 1.0, eta)) < 1e-200);
    CHECK_THROWS_AS(halfline_z_moment(0.0, 0.2, 0.0, 0.5), std::domain_error);
}

TEST_CASE("half-line moment of dG/dxi (closed form vs trivial anchors)")
{
    double tau = 0.75, eta = 0.25;
    CHECK(halfline_z_moment_dxi(0.0, tau, 0.0, eta) == doctest::Approx(0.5).epsilon(1e-14));
    double c = 0.7;
    CHECK(halfline_z_moment_dxi(c, tau, c, eta) ==
          doctest::Approx(c / std::sqrt(4.0 * kPi * (tau - eta)) + 0.5).epsilon(1e-14));
    CHECK_THROWS_AS(halfline_z_moment_dxi(0.0, 0.2, 0.0, 0.5), std::domain_error);
}

TEST_CASE("brick identities vs adaptive quadrature on random draws")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> G(-1.5, 1.5), R(0.05, 2.0);
    for (int i = 0; i < 500; ++i) {
        double gt = G(rng), ge = G(rng), xi = G(rng), r = R(rng);
        double tau = r, eta = 0.0;
        double hi = std::max(gt, xi) + 30.0 * std::sqrt(r);

        double m1 = testsupport::integrate(
            [&](double z) { return z * heat_kernel(z, tau, xi, eta); }, gt, hi, 1e-11);
        CHECK(halfline_z_moment(gt, tau, xi, eta) == doctest::Approx(m1).epsilon(1e-8));

        double hi2 = std::max(gt, ge) + 30.0 * std::sqrt(r);
        double m2 = testsupport::integrate(
            [&](double z) { return z * heat_kernel_dxi(z, tau, ge, eta); }, gt, hi2, 1e-11);
        CHECK(halfline_z_moment_dxi(gt, tau, ge, eta) == doctest::Approx(m2).epsilon(1e-8));
    }
}

TEST_CASE("near-singular moments return analytic limits")
{
    double tau = 1.0;
    // indicator limits
    CHECK(halfline_z_moment(0.0, tau, 1.0, tau - 1e-15) == doctest::Approx(1.0));
    CHECK(halfline_z_moment(2.0, tau, 1.0, tau - 1e-15) == 0.0);
    CHECK(halfline_z_moment_dxi(0.0, tau, 1.0, tau - 1e-15) == 1.0);
    CHECK(halfline_z_moment_dxi(1.0, tau, 0.0, tau - 1e-15) == 0.0);
}

TEST_CASE("softplus antiderivative: series, middle and quadratic regimes agree")
{
    // I(q) = int_-inf^q log1p(e^u) du; oracle by quadrature from a dead tail
    for (double q : {-8.0, -2.0, -0.5, 0.0, 0.7, 3.0, 9.0}) {
        double oracle = testsupport::integrate(
            [](double u) { return std::log1p(std::exp(u)); }, -45.0, q, 1e-13);
        CHECK(softplus_antiderivative(q) == doctest::Approx(oracle).epsilon(1e-10));
    }
}
