#pragma once

// Singular integral kernels and initial vorticity fields, plus convolution of
// kernels against empirical laws and lattice-discretized measures.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mvsde/geometry.hpp"

namespace mvsde {

enum class BuiltinKernel { biot_savart_3d, biot_savart_2d, riesz, green, zero, custom };
enum class KernelNormalization { quarter_pi, unnormalized };

/// Matrix-valued kernel K(x) with growth metadata |K(x)| <= C0/|x|^gamma1 on
/// 0 < |x| < 1 and |K(x)| <= C0/|x|^gamma2 on |x| >= 1 (operator 2-norm).
struct SingularKernel {
    int d = 0;
    std::function<Mat(const Vec&)> eval;
    double C0 = 0;
    double gamma1 = 0;
    double gamma2 = 0;
    double delta = 1e-3;  // desingularization cutoff: contributions with |x-u| < delta are dropped
    BuiltinKernel builtin = BuiltinKernel::custom;
    KernelNormalization normalization = KernelNormalization::quarter_pi;

    Mat operator()(const Vec& x) const { return eval(x); }
};

SingularKernel make_builtin_kernel(BuiltinKernel name, int d, double gamma = 0.0,
                                   KernelNormalization normalization = KernelNormalization::quarter_pi,
                                   double delta = 1e-3);

struct GrowthReport {
    double max_violation_inner = 0;  // sup of |K(x)| |x|^gamma1 / C0 over sampled 0 < |x| < 1
    double max_violation_outer = 0;  // sup of |K(x)| |x|^gamma2 / C0 over sampled |x| >= 1
    Vec argmax_inner, argmax_outer;
};

GrowthReport check_growth(const SingularKernel& kernel, int n_samples, uint64_t seed,
                          double r_min = 1e-6, double r_max = 1e3);

/// Empirical law: weighted point cloud, weights nonnegative and summing to 1.
struct LawSample {
    std::vector<Vec> points;
    std::vector<double> weights;

    LawSample(std::vector<Vec> pts, std::vector<double> w);
    static LawSample equal_weights(std::vector<Vec> pts);
    static LawSample point_mass(const Vec& p) { return equal_weights({p}); }
};

struct ConvolveResult {
    Mat value;
    std::size_t dropped = 0;  // terms inside the singular cutoff
};

/// (K * law)(x) = sum_m w_m K(x - u_m), terms with |x - u_m| < delta dropped.
ConvolveResult convolve_with_law(const SingularKernel& kernel, const LawSample& law, const Vec& x);

/// Initial vorticity omega0 with L1/Linf norms and compact-support truncation.
/// In d = 2 the scalar vorticity is embedded in component 0.
struct VorticityField {
    int d = 0;
    std::function<Vec(const Vec&)> omega0;
    double C1 = 0;             // ||omega0||_L1
    double Cinf = 0;           // ||omega0||_inf
    double support_radius = 1;  // treated as zero beyond this radius
};

VorticityField zero_vorticity(int d);
VorticityField lamb_oseen_vorticity(double circulation, double t0, double nu, double support_radius = 0);
VorticityField gaussian_blob_vorticity(int d, double amplitude, double sigma, const Vec& center,
                                       double support_radius = 0);

/// Square lattice (epsilon Z^d) restricted to the support ball of omega0,
/// carrying the quadrature weights epsilon^d omega0(y_k).
struct Lattice {
    double epsilon = 0;
    std::vector<Vec> points;
    std::vector<std::array<int, kMaxDim>> multi_index;
    std::vector<Vec> weights;  // epsilon^d * omega0(y_k)
};

Lattice build_lattice(const VorticityField& omega0, double epsilon);
Lattice single_point_lattice(const Vec& point, const Vec& weight, double epsilon);

/// Quadrature-discretized drift sum_k eps^d [K * clouds_k](x) . omega0(y_k).
Vec drift_from_ensemble(const SingularKernel& kernel, const VorticityField& omega0, const Lattice& lattice,
                        std::span<const LawSample> clouds, const Vec& x);

/// K(z) . w with specialized closed forms for the builtin kernels; this is the
/// inner operation of every N-body summation loop.
inline Vec kernel_apply(const SingularKernel& kernel, const Vec& z, const Vec& w) {
    switch (kernel.builtin) {
        case BuiltinKernel::biot_savart_2d: {
            const double s = kernel.C0 * w[0] / z.norm2();
            Vec r(2);
            r[0] = -s * z[1];
            r[1] = s * z[0];
            return r;
        }
        case BuiltinKernel::biot_savart_3d: {
            const double r2 = z.norm2();
            const double s = -kernel.C0 / (r2 * std::sqrt(r2));
            Vec r(3);  // g x w with g = s z
            r[0] = s * (z[1] * w[2] - z[2] * w[1]);
            r[1] = s * (z[2] * w[0] - z[0] * w[2]);
            r[2] = s * (z[0] * w[1] - z[1] * w[0]);
            return r;
        }
        case BuiltinKernel::riesz:
            return w * std::pow(z.norm(), -kernel.gamma1);
        case BuiltinKernel::zero:
            return Vec::zero(kernel.d);
        default:
            return kernel.eval(z).apply(w);
    }
}


}  // namespace mvsde
