#include "nfsf/field.hpp"

#include "nfsf/convolution.hpp"

#include <cmath>
#include <stdexcept>

namespace nfsf {

double DensityField::per_x_mass(int x) const
{
    const double* r = row(x);
    double m = 0.0;
    for (int j = 0; j < sg.n; ++j) m += r[j];
    return m * sg.ds();
}

double DensityField::total_mass() const
{
    double m = 0.0;
    for (int x = 0; x < xg.size(); ++x) m += per_x_mass(x);
    return m * xg.cell_volume();
}

double DensityField::min_value() const
{
    double m = rho.empty() ? 0.0 : rho[0];
    for (double v : rho) m = std::min(m, v);
    return m;
}

void DensityField::normalize_per_x(double target)
{
    for (int x = 0; x < xg.size(); ++x) {
        double m = per_x_mass(x);
        if (!(m > 0.0)) throw std::runtime_error("normalize_per_x: nonpositive mass");
        double c = target / m;
        double* r = row(x);
        for (int j = 0; j < sg.n; ++j) r[j] *= c;
    }
}

std::vector<double> mean_activity(const DensityField& f)
{
    std::vector<double> out(f.xg.size());
    double ds = f.sg.ds();
#pragma omp parallel for schedule(static)
    for (int x = 0; x < f.xg.size(); ++x) {
        const double* r = f.row(x);
        double acc = 0.0;
        for (int j = 0; j < f.sg.n; ++j) acc += f.sg.center(j) * r[j];
        out[x] = acc * ds;
    }
    return out;
}

std::vector<double> drift_field(const DensityField& f, const ModelParams& p, double t)
{
    auto rb = mean_activity(f);
    auto conv = periodic_convolve(p.W, rb);
    double b = p.B(t);
    std::vector<double> out(conv.size());
    for (size_t i = 0; i < conv.size(); ++i) out[i] = p.phi(conv[i] + b);
    return out;
}

DecayCertificate decay_certificate(const DensityField& f)
{
    DecayCertificate c;
    int j0 = (int)std::floor(0.9 * f.sg.n);
    double ds = f.sg.ds();
    for (int x = 0; x < f.xg.size(); ++x) {
        const double* r = f.row(x);
        for (int j = j0; j < f.sg.n; ++j) {
            double s4 = std::pow(f.sg.center(j), 4);
            c.tail_sup_rho_s4 = std::max(c.tail_sup_rho_s4, std::fabs(r[j]) * s4);
            int jm = std::max(j - 1, 0), jp = std::min(j + 1, f.sg.n - 1);
            double dr = (r[jp] - r[jm]) / ((jp - jm) * ds);
            c.tail_sup_drho_s4 = std::max(c.tail_sup_drho_s4, std::fabs(dr) * s4);
        }
    }
    return c;
}

CompatibleCheck check_compatible(const DensityField& f, const ModelParams& p)
{
    CompatibleCheck c;
    c.nonnegative = f.min_value() >= 0.0;
    double target = p.inv_Ld();
    for (int x = 0; x < f.xg.size(); ++x)
        c.max_mass_error = std::max(c.max_mass_error,
                                    std::fabs(f.per_x_mass(x) - target) / target);
    c.decay = decay_certificate(f);
    return c;
}

DensityField sample_density(const SpatialGrid& xg, const ActivityGrid& sg, double Ld,
                            const std::function<double(double, double, double)>& fn)
{
    DensityField f(xg, sg);
    for (int x = 0; x < xg.size(); ++x) {
        double x1, x2 = 0.0;
        if (xg.d == 1) {
            x1 = xg.coord(x);
        } else {
            x1 = xg.coord(x / xg.n);
            x2 = xg.coord(x % xg.n);
        }
        for (int j = 0; j < sg.n; ++j)
            f.at(x, j) = fn(x1, x2, sg.center(j));
    }
    f.normalize_per_x(1.0 / Ld);
    return f;
}

DensityField gaussian_density(const SpatialGrid& xg, const ActivityGrid& sg, double Ld,
                              double center, double width)
{
    return sample_density(xg, sg, Ld, [=](double, double, double s) {
        double u = (s - center) / width;
        return std::exp(-0.5 * u * u);
    });
}

} // namespace nfsf
