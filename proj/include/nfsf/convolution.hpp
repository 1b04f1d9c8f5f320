#pragma once

#include "nfsf/model.hpp"

#include <complex>
#include <vector>

namespace nfsf {

// (W * f)[x] = sum_y W[x-y] f[y] dx^d with periodic indexing. OpenMP over x.
std::vector<double> periodic_convolve(const ConnectivityKernel& W, const std::vector<double>& f);

// Same but with the kernel translated by a grid shift: sum_y W[x-y-shift] f[y] dx^d.
std::vector<double> periodic_convolve_shifted(const ConnectivityKernel& W,
                                              const std::vector<double>& f,
                                              int shift_i, int shift_j = 0);

// Unnormalised Fourier modes f_k = sum_x f[x] exp(-2 pi i k.x / L) dx^d,
// |k_i| <= K. The k=0 mode equals the rectangle-rule integral.
struct FourierModes {
    int d = 1;
    int K = 0;
    double L = 1.0;
    std::vector<std::complex<double>> modes; // (2K+1)^d entries

    std::complex<double> at(int k1, int k2 = 0) const
    {
        int m = 2 * K + 1;
        return d == 1 ? modes[k1 + K] : modes[(k1 + K) * m + (k2 + K)];
    }
    double max_imag() const;
};

FourierModes fourier_modes(const SpatialGrid& g, const std::vector<double>& f, int K);
FourierModes fourier_modes(const ConnectivityKernel& W, int K);

namespace reference {
// Plain serial direct summation, kept as the testing oracle for the
// OpenMP kernels above.
std::vector<double> convolve(const ConnectivityKernel& W, const std::vector<double>& f);
} // namespace reference

} // namespace nfsf
