#pragma once

#include <cmath>
#include <functional>
#include <numbers>

namespace mvsde {

/// Adaptive Simpson quadrature on [a, b].
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-10, double abs_tol = 1e-14, int max_depth = 40);

/// Scaled modified Bessel function I0(x) * exp(-x), stable for large x.
double i0e(double x);

/// sinh(x)/x with the removable singularity handled.
inline double sinhc(double x) {
    if (std::abs(x) < 1e-4) return 1.0 + x * x / 6.0;
    return std::sinh(x) / x;
}

/// Surface measure of the unit sphere S^{d-1}: 2 pi^{d/2} / Gamma(d/2).
double sphere_surface(int d);

/// Isotropic Gaussian density in R^d with per-coordinate variance var.
inline double gaussian_density(int d, double var, double r2) {
    const double two_pi_var = 2.0 * std::numbers::pi * var;
    return std::exp(-r2 / (2.0 * var)) / std::pow(two_pi_var, 0.5 * d);
}

/// Radial density of |Z| at r, Z ~ N(mu, var I_d) with |mu| = m, d in {1,2,3}.
double noncentral_radial_density(int d, double m, double var, double r);

/// Largest root of f on [lo, hi] by bisection; f must change sign.
double bisect_root(const std::function<double(double)>& f, double lo, double hi,
                   double tol = 1e-13, int max_iter = 200);

}  // namespace mvsde
