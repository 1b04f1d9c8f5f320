#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nfsf/convolution.hpp"
#include "nfsf/field.hpp"
#include "nfsf/special.hpp"
#include "support.hpp"

#include <cmath>
#include <random>

using namespace nfsf;

namespace {

ModelParams make_params(double tau_c, double sigma, const SpatialGrid& g,
                        ModulationFn phi, ConnectivityKernel W, double B)
{
    ModelParams p;
    p.tau_c = tau_c;
    p.sigma = sigma;
    p.L = g.L;
    p.d = g.d;
    p.phi = std::move(phi);
    p.W = std::move(W);
    p.B = ExternalInput::constant(B);
    return p;
}

} // namespace

TEST_CASE("modulation families: values, derivatives, Lipschitz property")
{
    auto lin = ModulationFn::linear(2.0, 0.3);
    CHECK(lin(1.0) == doctest::Approx(2.3));
    CHECK(lin.deriv(5.0) == 2.0);
    CHECK(lin.lipschitz() == 2.0);
    CHECK(lin.sign() == 0);

    auto rect = ModulationFn::rectifier(1.5, 0.1);
    CHECK(rect.increasing());
    CHECK(rect.sign() == 1);
    // ~0 for arguments below -5 nu (relative to the gain*nu scale)
    CHECK(std::fabs(rect(-0.5)) <= 1e-2 * 1.5 * 0.1);
    CHECK(rect(-800.0) == 0.0);
    // large arguments: identity times the gain
    CHECK(rect(3.0) == doctest::Approx(4.5).epsilon(1e-10));

    auto sig = ModulationFn::sigmoid(2.0, 0.5, 0.2);
    CHECK(sig(0.5) == doctest::Approx(1.0));
    CHECK(sig.lipschitz() == doctest::Approx(2.0 / 0.8));

    // Lipschitz bound property-tested on sampled pairs
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-4.0, 4.0);
    for (const auto& phi : {lin, rect, sig}) {
        double lip = phi.lipschitz();
        for (int i = 0; i < 2000; ++i) {
            double a = U(rng), b = U(rng);
            CHECK(std::fabs(phi(a) - phi(b)) <= lip * std::fabs(a - b) + 1e-12);
        }
    }

    // finite-difference derivatives agree with the analytic ones
    for (const auto& phi : {lin, rect, sig}) {
        for (double x : {-1.0, -0.2, 0.0, 0.4, 2.0}) {
            double h = 1e-6;
            double fd = (phi(x + h) - phi(x - h)) / (2 * h);
            CHECK(phi.deriv(x) == doctest::Approx(fd).epsilon(1e-5));
        }
    }

    auto tab = ModulationFn::tabulated({-1.0, 0.0, 1.0, 2.0}, {0.0, 0.1, 0.9, 1.0});
    CHECK(tab(0.5) == doctest::Approx(0.5));
    CHECK(tab(-5.0) == 0.0);   // clamped extension
    CHECK(tab.increasing());
    CHECK(tab.inverse(0.5) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("modulation inverse and inverse primitive")
{
    auto sig = ModulationFn::sigmoid(2.0, 0.3, 0.4);
    for (double v : {0.2, 0.9, 1.7}) {
        CHECK(sig(sig.inverse(v)) == doctest::Approx(v).epsilon(1e-12));
        // d/dzeta int_0^zeta Phi^{-1} = Phi^{-1}
        double h = 1e-6;
        double fd = (sig.inverse_primitive(v + h) - sig.inverse_primitive(v - h)) / (2 * h);
        CHECK(fd == doctest::Approx(sig.inverse(v)).epsilon(1e-6));
    }
    // quadrature oracle for the primitive
    auto rect = ModulationFn::rectifier(1.2, 0.3);
    double zeta = 0.8;
    double oracle = testsupport::integrate([&](double w) { return rect.inverse(w); }, 1e-12, zeta,
                                           1e-11);
    CHECK(rect.inverse_primitive(zeta) == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("connectivity kernel invariants")
{
    SpatialGrid g(1, 2.0, 64);
    auto W = ConnectivityKernel::cosine(g, -1.0, 0.5, 1);
    // periodicity is structural; W0 equals the rectangle sum
    double s = 0.0;
    for (double v : W.samples) s += v;
    CHECK(W.W0 == doctest::Approx(s * g.cell_volume()).epsilon(1e-15));
    CHECK(W.W0 == doctest::Approx(-1.0 * g.L).epsilon(1e-12));
    CHECK(W.symmetric);
    CHECK(W.grad_sup > 0.0);

    // asymmetric tabulated kernel is flagged
    std::vector<double> samples(g.size());
    for (int i = 0; i < g.n; ++i) samples[i] = std::sin(2.0 * kPi * g.coord(i) / g.L) + 0.01 * i;
    auto Wa = ConnectivityKernel::tabulated(g, samples);
    CHECK_FALSE(Wa.symmetric);

    SpatialGrid g2(2, 1.0, 16);
    auto W2 = ConnectivityKernel::gaussian_diff(g2, 1.0, 0.08, 0.8, 0.15);
    CHECK(W2.symmetric);
    CHECK(W2.norm_l1 > 0.0);
}

TEST_CASE("normalize_parameters: identity, rescaling and round trip")
{
    SpatialGrid g(1, 1.0, 32);
    auto p = make_params(1.0, 1.0, g, ModulationFn::linear(1.0),
                         ConnectivityKernel::constant(g, -1.0), 1.0);

    auto [pn, map] = normalize_parameters(p);
    CHECK(pn.tau_c == 1.0);
    CHECK(pn.sigma == 1.0);
    CHECK(pn.phi(0.7) == doctest::Approx(p.phi(0.7))); // sigma=1: identity

    // sigma=4, Phi(p)=p: scaled modulation is p/2 and the s-axis compresses by 2
    auto p4 = make_params(2.0, 4.0, g, ModulationFn::linear(1.0),
                          ConnectivityKernel::constant(g, -1.0), 1.0);
    auto [pn4, map4] = normalize_parameters(p4);
    CHECK(pn4.phi(1.0) == doctest::Approx(0.5));
    CHECK(map4.s_to_normalized(2.0) == doctest::Approx(1.0));
    CHECK(map4.t_to_normalized(2.0) == doctest::Approx(1.0));
    // drift argument W*rhobar + B is preserved: W~ rhobar~ = W rhobar
    double rhobar = 0.37;
    CHECK(pn4.W.W0 * (rhobar / std::sqrt(4.0)) ==
          doctest::Approx(p4.W.W0 * rhobar).epsilon(1e-14));

    // field round trip to 1e-14
    ActivityGrid sg(64, 8.0);
    DensityField f = gaussian_density(g, sg, 1.0, 1.0, 0.7);
    DensityField fn = f;
    for (auto& v : fn.rho) v = map4.rho_to_normalized(v);
    DensityField fb = fn;
    for (auto& v : fb.rho) v = map4.rho_to_original(v);
    for (size_t i = 0; i < f.rho.size(); ++i)
        CHECK(fb.rho[i] == doctest::Approx(f.rho[i]).epsilon(1e-14));
}

TEST_CASE("mean_activity examples")
{
    SpatialGrid g(1, 1.0, 8);

    // uniform on [0,1], zero after
    ActivityGrid sg(200, 4.0);
    DensityField f(g, sg);
    for (int x = 0; x < g.size(); ++x)
        for (int j = 0; j < sg.n; ++j)
            f.at(x, j) = sg.center(j) < 1.0 ? 1.0 : 0.0;
    auto rb = mean_activity(f);
    CHECK(rb[0] == doctest::Approx(0.5).epsilon(1e-12));

    // narrow peak at s=2 with mass 1: mean ~ 2, error O(ds^2)
    DensityField g1 = gaussian_density(g, ActivityGrid(400, 8.0), 1.0, 2.0, 0.05);
    CHECK(mean_activity(g1)[0] == doctest::Approx(2.0).epsilon(1e-6));

    // half-Gaussian: mean sqrt(2 sigma / pi)
    double sigma = 0.8;
    DensityField g2 = gaussian_density(g, ActivityGrid(4000, 12.0), 1.0, 0.0, std::sqrt(sigma));
    CHECK(mean_activity(g2)[0] == doctest::Approx(std::sqrt(2.0 * sigma / kPi)).epsilon(1e-6));
}

TEST_CASE("mean_activity is linear and monotone")
{
    SpatialGrid g(1, 1.0, 4);
    ActivityGrid sg(64, 6.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    DensityField a(g, sg), b(g, sg);
    for (auto& v : a.rho) v = U(rng);
    for (size_t i = 0; i < b.rho.size(); ++i) b.rho[i] = a.rho[i] + U(rng); // b >= a
    auto ra = mean_activity(a), rb = mean_activity(b);
    for (int x = 0; x < g.size(); ++x) CHECK(rb[x] >= ra[x]);

    DensityField c(g, sg);
    for (size_t i = 0; i < c.rho.size(); ++i) c.rho[i] = 2.0 * a.rho[i] + 3.0 * b.rho[i];
    auto rc = mean_activity(c);
    for (int x = 0; x < g.size(); ++x)
        CHECK(rc[x] == doctest::Approx(2.0 * ra[x] + 3.0 * rb[x]).epsilon(1e-12));
}

TEST_CASE("drift_field examples and Lipschitz property")
{
    SpatialGrid g(1, 2.0, 16);
    ActivityGrid sg(64, 6.0);
    DensityField f = gaussian_density(g, sg, 2.0, 1.0, 0.5);

    // Phi == 0
    auto p0 = make_params(1.0, 1.0, g, ModulationFn::linear(0.0, 0.0),
                          ConnectivityKernel::cosine(g, 0.0, 1.0), 1.0);
    for (double v : drift_field(f, p0, 0.0)) CHECK(v == 0.0);

    // W == 0, B=1, Phi(p)=p
    auto p1 = make_params(1.0, 1.0, g, ModulationFn::linear(1.0),
                          ConnectivityKernel::constant(g, 0.0), 1.0);
    for (double v : drift_field(f, p1, 0.0)) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));

    // constant W: field = w * int rhobar + B, checked against a direct sum
    double w = 0.7, B = 0.25;
    auto p2 = make_params(1.0, 1.0, g, ModulationFn::linear(1.0),
                          ConnectivityKernel::constant(g, w), B);
    auto rb = mean_activity(f);
    double direct = 0.0;
    for (int x = 0; x < g.size(); ++x) direct += rb[x];
    direct *= w * g.cell_volume();
    for (double v : drift_field(f, p2, 0.0))
        CHECK(v == doctest::Approx(direct + B).epsilon(1e-12));

    // sup |drift(f1) - drift(f2)| <= lip |W|_L1 sup |rb1 - rb2|
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> U(0.5, 1.5);
    auto p3 = make_params(1.0, 1.0, g, ModulationFn::sigmoid(2.0, 0.0, 0.3),
                          ConnectivityKernel::cosine(g, -0.5, 0.8), 0.5);
    for (int rep = 0; rep < 20; ++rep) {
        DensityField f1 = gaussian_density(g, sg, 2.0, U(rng), 0.3 + 0.3 * U(rng));
        DensityField f2 = gaussian_density(g, sg, 2.0, U(rng), 0.3 + 0.3 * U(rng));
        for (int x = 0; x < g.size(); ++x)
            for (int j = 0; j < sg.n; ++j) {
                f1.at(x, j) *= 1.0 + 0.2 * std::cos(2.0 * kPi * g.coord(x) / g.L);
                f2.at(x, j) *= 1.0 + 0.2 * std::sin(2.0 * kPi * g.coord(x) / g.L);
            }
        auto r1 = mean_activity(f1), r2 = mean_activity(f2);
        double dr = 0.0;
        for (int x = 0; x < g.size(); ++x) dr = std::max(dr, std::fabs(r1[x] - r2[x]));
        auto d1 = drift_field(f1, p3, 0.0), d2 = drift_field(f2, p3, 0.0);
        double dd = 0.0;
        for (int x = 0; x < g.size(); ++x) dd = std::max(dd, std::fabs(d1[x] - d2[x]));
        CHECK(dd <= p3.phi.lipschitz() * p3.W.norm_l1 * dr + 1e-12);
    }
}

TEST_CASE("density invariants and the compatibility check")
{
    SpatialGrid g(1, 2.0, 16);
    ActivityGrid sg(128, 9.0);
    double Ld = 2.0;
    DensityField f = gaussian_density(g, sg, Ld, 1.0, 0.8);
    for (int x = 0; x < g.size(); ++x)
        CHECK(f.per_x_mass(x) == doctest::Approx(1.0 / Ld).epsilon(1e-14));
    CHECK(f.total_mass() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(f.min_value() >= 0.0);

    ModelParams p = make_params(1.0, 1.0, g, ModulationFn::linear(1.0),
                                ConnectivityKernel::constant(g, 0.0), 0.0);
    auto chk = check_compatible(f, p);
    CHECK(chk.ok());

    // a fat tail fails the decay certificate
    DensityField bad = f;
    for (int x = 0; x < g.size(); ++x)
        for (int j = 0; j < sg.n; ++j)
            bad.at(x, j) += 1e-3;
    bad.normalize_per_x(1.0 / Ld);
    CHECK_FALSE(check_compatible(bad, p).decay.passes(1e-8));
}

TEST_CASE("external input interpolation is continuous")
{
    auto in = ExternalInput::tabulated({0.0, 1.0, 2.0}, {1.0, 3.0, 2.0});
    CHECK(in(0.5) == doctest::Approx(2.0));
    CHECK(in(1.5) == doctest::Approx(2.5));
    CHECK(in(-1.0) == 1.0);
    CHECK(in(5.0) == 2.0);
    for (double t : {0.0, 0.999999, 1.0, 1.000001})
        CHECK(std::fabs(in(t) - in(t + 1e-9)) < 1e-6);
}

TEST_CASE("parameter validation")
{
    SpatialGrid g(1, 1.0, 8);
    auto p = make_params(1.0, 1.0, g, ModulationFn::linear(1.0),
                         ConnectivityKernel::constant(g, 0.0), 0.0);
    CHECK_NOTHROW(p.validate());
    auto bad = p;
    bad.sigma = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = p;
    bad.L = 3.0; // kernel grid no longer matches
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_THROWS_AS(ActivityGrid(1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(SpatialGrid(3, 1.0, 8), std::invalid_argument);
}
