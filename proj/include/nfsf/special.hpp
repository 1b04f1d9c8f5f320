#pragma once

#include <cmath>
#include <stdexcept>

// Special functions and heat-kernel identities used by both solver backends.
// All functions are pure and reentrant.

namespace nfsf {

// Error function via Cody's rational Chebyshev approximations (abs error < 1e-14).
double erf(double x);
double erfc(double x);
// exp(x^2) * erfc(x), stable for large positive x.
double erfcx(double x);

// \int_0^inf exp(-(y-mu)^2/(2*scale)) dy = sqrt(pi*scale/2) * (1 + erf(mu/sqrt(2*scale))).
// Evaluated through erfc so the mu -> -inf tail underflows gracefully.
double halfline_gaussian_mass(double mu, double scale);

// G(z,tau,xi,eta) = exp(-(z-xi)^2/(4(tau-eta))) / sqrt(4 pi (tau-eta)), tau > eta.
double heat_kernel(double z, double tau, double xi, double eta);
// dG/dxi = (z-xi)/(2(tau-eta)) * G
double heat_kernel_dxi(double z, double tau, double xi, double eta);

// \int_{gamma_tau}^inf z G(z,tau,xi,eta) dz
//   = sqrt((tau-eta)/pi) e^{-(xi-gamma_tau)^2/(4(tau-eta))}
//   + (xi/2) (1 + erf((xi-gamma_tau)/(2 sqrt(tau-eta))))
double halfline_z_moment(double gamma_tau, double tau, double xi, double eta);

// \int_{gamma_tau}^inf z dG/dxi(z,tau,gamma_eta,eta) dz
//   = gamma_tau e^{-(gamma_tau-gamma_eta)^2/(4(tau-eta))} / sqrt(4 pi (tau-eta))
//   + (1/2) (1 + erf((gamma_eta-gamma_tau)/(2 sqrt(tau-eta))))
double halfline_z_moment_dxi(double gamma_tau, double tau, double gamma_eta, double eta);

// I(q) = \int_{-inf}^{q} log1p(exp(u)) du, used for closed-form integrals of
// inverse rectifier nonlinearities.
double softplus_antiderivative(double q);

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrtPi = 1.7724538509055160273;
inline constexpr double kInvSqrtPi = 0.5641895835477562869;

} // namespace nfsf
