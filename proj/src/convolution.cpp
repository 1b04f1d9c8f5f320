#include "nfsf/convolution.hpp"

#include "nfsf/special.hpp"

#include <cmath>
#include <stdexcept>

namespace nfsf {

static void check_size(const ConnectivityKernel& W, const std::vector<double>& f)
{
    if ((int)f.size() != W.grid.size())
        throw std::invalid_argument("periodic_convolve: field/kernel grid mismatch");
}

std::vector<double> periodic_convolve_shifted(const ConnectivityKernel& W,
                                              const std::vector<double>& f,
                                              int shift_i, int shift_j)
{
    check_size(W, f);
    const SpatialGrid& g = W.grid;
    std::vector<double> out(f.size());
    double vol = g.cell_volume();
    if (g.d == 1) {
        int n = g.n;
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int y = 0; y < n; ++y)
                acc += W.samples[g.wrap(i - y - shift_i)] * f[y];
            out[i] = acc * vol;
        }
    } else {
        int n = g.n;
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int yi = 0; yi < n; ++yi) {
                    int wi = g.wrap(i - yi - shift_i) * n;
                    const double* frow = f.data() + yi * n;
                    for (int yj = 0; yj < n; ++yj)
                        acc += W.samples[wi + g.wrap(j - yj - shift_j)] * frow[yj];
                }
                out[i * n + j] = acc * vol;
            }
    }
    return out;
}

std::vector<double> periodic_convolve(const ConnectivityKernel& W, const std::vector<double>& f)
{
    return periodic_convolve_shifted(W, f, 0, 0);
}

double FourierModes::max_imag() const
{
    double m = 0.0;
    for (auto& c : modes) m = std::max(m, std::fabs(c.imag()));
    return m;
}

FourierModes fourier_modes(const SpatialGrid& g, const std::vector<double>& f, int K)
{
    if (K < 0) throw std::invalid_argument("fourier_modes: K must be >= 0");
    FourierModes fm;
    fm.d = g.d; fm.K = K; fm.L = g.L;
    int m = 2 * K + 1;
    fm.modes.assign(g.d == 1 ? m : m * m, {0.0, 0.0});
    double vol = g.cell_volume();
    if (g.d == 1) {
        for (int k = -K; k <= K; ++k) {
            std::complex<double> acc{0.0, 0.0};
            double w = -2.0 * kPi * k / g.L;
            for (int x = 0; x < g.n; ++x)
                acc += f[x] * std::polar(1.0, w * g.coord(x));
            fm.modes[k + K] = acc * vol;
        }
    } else {
        for (int k1 = -K; k1 <= K; ++k1)
            for (int k2 = -K; k2 <= K; ++k2) {
                std::complex<double> acc{0.0, 0.0};
                for (int i = 0; i < g.n; ++i)
                    for (int j = 0; j < g.n; ++j) {
                        double ph = -2.0 * kPi * (k1 * g.coord(i) + k2 * g.coord(j)) / g.L;
                        acc += f[g.index(i, j)] * std::polar(1.0, ph);
                    }
                fm.modes[(k1 + K) * m + (k2 + K)] = acc * vol;
            }
    }
    return fm;
}

FourierModes fourier_modes(const ConnectivityKernel& W, int K)
{
    return fourier_modes(W.grid, W.samples, K);
}

namespace reference {

std::vector<double> convolve(const ConnectivityKernel& W, const std::vector<double>& f)
{
    check_size(W, f);
    const SpatialGrid& g = W.grid;
    std::vector<double> out(f.size(), 0.0);
    double vol = g.cell_volume();
    if (g.d == 1) {
        for (int i = 0; i < g.n; ++i) {
            double acc = 0.0;
            for (int y = 0; y < g.n; ++y)
                acc += W.samples[g.wrap(i - y)] * f[y];
            out[i] = acc * vol;
        }
    } else {
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j) {
                double acc = 0.0;
                for (int yi = 0; yi < g.n; ++yi)
                    for (int yj = 0; yj < g.n; ++yj)
                        acc += W.samples[g.index(i - yi, j - yj)] * f[g.index(yi, yj)];
                out[g.index(i, j)] = acc * vol;
            }
    }
    return out;
}

} // namespace reference

} // namespace nfsf
