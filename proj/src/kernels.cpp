#include "mvsde/kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mvsde/numerics.hpp"
#include "mvsde/rng.hpp"

namespace mvsde {

namespace {

constexpr int kLeviCivita[3][3][3] = {
    {{0, 0, 0}, {0, 0, 1}, {0, -1, 0}},
    {{0, 0, -1}, {0, 0, 0}, {1, 0, 0}},
    {{0, 1, 0}, {-1, 0, 0}, {0, 0, 0}},
};

Mat biot_savart_3d_eval(const Vec& x, double scale) {
    // K^i_j = eps^{ikj} G^k with G = -scale * x / |x|^3
    const double r2 = x.norm2();
    const double r3 = r2 * std::sqrt(r2);
    Vec g = x * (-scale / r3);
    Mat k(3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double v = 0;
            for (int c = 0; c < 3; ++c) v += kLeviCivita[i][c][j] * g[c];
            k(i, j) = v;
        }
    return k;
}

Mat biot_savart_2d_eval(const Vec& x, double scale) {
    // first column carries K2D(x) = scale * (-x2, x1)/|x|^2; scalar vorticity sits in component 0
    const double r2 = x.norm2();
    Mat k(2);
    k(0, 0) = -scale * x[1] / r2;
    k(1, 0) = scale * x[0] / r2;
    return k;
}

Mat scalar_kernel_eval(int d, const Vec& x, const std::function<double(double)>& radial) {
    Mat k = Mat::identity(d);
    return k * radial(x.norm());
}

}  // namespace

SingularKernel make_builtin_kernel(BuiltinKernel name, int d, double gamma,
                                   KernelNormalization normalization, double delta) {
    if (d < 1 || d > kMaxDim) throw std::invalid_argument("make_builtin_kernel: d must be 1..3");
    if (delta <= 0) throw std::invalid_argument("make_builtin_kernel: delta must be positive");
    SingularKernel k;
    k.d = d;
    k.delta = delta;
    k.builtin = name;
    k.normalization = normalization;
    switch (name) {
        case BuiltinKernel::biot_savart_3d: {
            if (d != 3) throw std::invalid_argument("biot_savart_3d requires d = 3");
            const double scale =
                normalization == KernelNormalization::quarter_pi ? 1.0 / (4.0 * std::numbers::pi) : 1.0;
            k.eval = [scale](const Vec& x) { return biot_savart_3d_eval(x, scale); };
            k.C0 = scale;
            k.gamma1 = k.gamma2 = 2.0;
            break;
        }
        case BuiltinKernel::biot_savart_2d: {
            if (d != 2) throw std::invalid_argument("biot_savart_2d requires d = 2");
            const double scale =
                normalization == KernelNormalization::quarter_pi ? 1.0 / (2.0 * std::numbers::pi) : 1.0;
            k.eval = [scale](const Vec& x) { return biot_savart_2d_eval(x, scale); };
            k.C0 = scale;
            k.gamma1 = k.gamma2 = 1.0;
            break;
        }
        case BuiltinKernel::riesz: {
            if (gamma < 0 || gamma >= d) throw std::invalid_argument("riesz requires 0 <= gamma < d");
            k.eval = [d, gamma](const Vec& x) {
                return scalar_kernel_eval(d, x, [gamma](double r) { return std::pow(r, -gamma); });
            };
            k.C0 = 1.0;
            k.gamma1 = k.gamma2 = gamma;
            break;
        }
        case BuiltinKernel::green: {
            if (d == 1) throw std::invalid_argument("green kernel requires d >= 2");
            if (d == 2) {
                // ln|x| admits no pure power bound at 0; gamma1 = 1/2 dominates with
                // C0 = sup_{0<r<1} |ln r| sqrt(r) = 2/e.  No global outer power bound exists.
                k.eval = [](const Vec& x) {
                    return scalar_kernel_eval(2, x, [](double r) { return std::log(r); });
                };
                k.C0 = 2.0 / std::numbers::e;
                k.gamma1 = 0.5;
                k.gamma2 = 0.0;
            } else {
                k.eval = [d](const Vec& x) {
                    return scalar_kernel_eval(d, x, [d](double r) { return std::pow(r, -(d - 2.0)); });
                };
                k.C0 = 1.0;
                k.gamma1 = k.gamma2 = d - 2.0;
            }
            break;
        }
        case BuiltinKernel::zero: {
            k.eval = [d](const Vec&) { return Mat::zero(d); };
            k.C0 = 0.0;
            k.gamma1 = k.gamma2 = 0.0;
            break;
        }
        case BuiltinKernel::custom:
            throw std::invalid_argument("make_builtin_kernel: custom is not a builtin");
    }
    return k;
}

GrowthReport check_growth(const SingularKernel& kernel, int n_samples, uint64_t seed, double r_min,
                          double r_max) {
    if (n_samples < 1) throw std::invalid_argument("check_growth: n_samples must be >= 1");
    GrowthReport rep;
    rep.argmax_inner = Vec::zero(kernel.d);
    rep.argmax_outer = Vec::zero(kernel.d);
    RngStream rng(seed, /*tag=*/0x6772777468ull);
    const double c0 = kernel.C0;
    for (int s = 0; s < n_samples; ++s) {
        Vec dir(kernel.d);
        double n2 = 0;
        do {
            for (int i = 0; i < kernel.d; ++i) dir[i] = rng.normal();
            n2 = dir.norm2();
        } while (n2 == 0);
        dir *= 1.0 / std::sqrt(n2);

        const double u_in = rng.uniform();
        const double r_in = std::exp(std::log(r_min) + u_in * (std::log(1.0) - std::log(r_min)));
        const Vec x_in = dir * r_in;
        const double ratio_in =
            c0 > 0 ? spectral_norm(kernel.eval(x_in)) * std::pow(r_in, kernel.gamma1) / c0
                   : (spectral_norm(kernel.eval(x_in)) > 0 ? std::numeric_limits<double>::infinity() : 0.0);
        if (ratio_in > rep.max_violation_inner) {
            rep.max_violation_inner = ratio_in;
            rep.argmax_inner = x_in;
        }

        const double u_out = rng.uniform();
        const double r_out = std::exp(u_out * std::log(r_max));
        const Vec x_out = dir * r_out;
        const double ratio_out =
            c0 > 0 ? spectral_norm(kernel.eval(x_out)) * std::pow(r_out, kernel.gamma2) / c0
                   : (spectral_norm(kernel.eval(x_out)) > 0 ? std::numeric_limits<double>::infinity() : 0.0);
        if (ratio_out > rep.max_violation_outer) {
            rep.max_violation_outer = ratio_out;
            rep.argmax_outer = x_out;
        }
    }
    return rep;
}

LawSample::LawSample(std::vector<Vec> pts, std::vector<double> w)
    : points(std::move(pts)), weights(std::move(w)) {
    if (points.size() != weights.size() || points.empty())
        throw std::invalid_argument("LawSample: points/weights size mismatch or empty");
    double sum = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!points[i].finite()) throw std::invalid_argument("LawSample: non-finite point");
        if (weights[i] < 0) throw std::invalid_argument("LawSample: negative weight");
        sum += weights[i];
    }
    if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("LawSample: weights must sum to 1");
}

LawSample LawSample::equal_weights(std::vector<Vec> pts) {
    const std::size_t n = pts.size();
    return LawSample(std::move(pts), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

ConvolveResult convolve_with_law(const SingularKernel& kernel, const LawSample& law, const Vec& x) {
    if (!x.finite()) throw std::invalid_argument("convolve_with_law: x must be finite");
    if (x.d != kernel.d) throw std::invalid_argument("convolve_with_law: dimension mismatch");
    ConvolveResult res;
    res.value = Mat::zero(kernel.d);
    for (std::size_t m = 0; m < law.points.size(); ++m) {
        const Vec diff = x - law.points[m];
        if (diff.norm() < kernel.delta) {
            ++res.dropped;
            continue;
        }
        res.value += kernel.eval(diff) * law.weights[m];
    }
    return res;
}

VorticityField zero_vorticity(int d) {
    VorticityField f;
    f.d = d;
    f.omega0 = [d](const Vec&) { return Vec::zero(d); };
    f.C1 = 0;
    f.Cinf = 0;
    f.support_radius = 1.0;
    return f;
}

VorticityField lamb_oseen_vorticity(double circulation, double t0, double nu, double support_radius) {
    if (t0 <= 0 || nu <= 0) throw std::invalid_argument("lamb_oseen_vorticity: t0 and nu must be positive");
    const double four_nu_t0 = 4.0 * nu * t0;
    VorticityField f;
    f.d = 2;
    const double peak = circulation / (std::numbers::pi * four_nu_t0);
    f.omega0 = [circulation, four_nu_t0](const Vec& x) {
        Vec w(2);
        w[0] = circulation / (std::numbers::pi * four_nu_t0) * std::exp(-x.norm2() / four_nu_t0);
        return w;
    };
    f.C1 = std::abs(circulation);
    f.Cinf = std::abs(peak);
    // default truncation keeps all but ~1e-4 of the circulation
    f.support_radius = support_radius > 0 ? support_radius : std::sqrt(four_nu_t0 * std::log(1e4));
    return f;
}

VorticityField gaussian_blob_vorticity(int d, double amplitude, double sigma, const Vec& center,
                                       double support_radius) {
    if (sigma <= 0) throw std::invalid_argument("gaussian_blob_vorticity: sigma must be positive");
    if (center.d != d) throw std::invalid_argument("gaussian_blob_vorticity: center dimension mismatch");
    VorticityField f;
    f.d = d;
    // scalar profile in component 0 for d <= 2, aligned with the last axis in 3d
    const int comp = d == 3 ? 2 : 0;
    f.omega0 = [d, amplitude, sigma, center, comp](const Vec& x) {
        Vec w(d);
        w[comp] = amplitude * std::exp(-(x - center).norm2() / (2.0 * sigma * sigma));
        return w;
    };
    f.C1 = std::abs(amplitude) * std::pow(2.0 * std::numbers::pi * sigma * sigma, 0.5 * d);
    f.Cinf = std::abs(amplitude);
    f.support_radius = support_radius > 0 ? support_radius : center.norm() + sigma * std::sqrt(2.0 * std::log(1e4));
    return f;
}

Lattice build_lattice(const VorticityField& omega0, double epsilon) {
    if (epsilon <= 0) throw std::invalid_argument("build_lattice: epsilon must be positive");
    Lattice lat;
    lat.epsilon = epsilon;
    const double R = omega0.support_radius + 0.5 * epsilon;
    const int kmax = static_cast<int>(std::floor(R / epsilon));
    const int d = omega0.d;
    double cell = 1;
    for (int i = 0; i < d; ++i) cell *= epsilon;
    std::array<int, kMaxDim> k{};
    std::array<int, kMaxDim> lo{}, hi{};
    for (int i = 0; i < d; ++i) {
        lo[i] = -kmax;
        hi[i] = kmax;
    }
    k = lo;
    while (true) {
        Vec y(d);
        for (int i = 0; i < d; ++i) y[i] = k[i] * epsilon;
        if (y.norm() <= R) {
            lat.points.push_back(y);
            lat.multi_index.push_back(k);
            lat.weights.push_back(omega0.omega0(y) * cell);
        }
        int axis = 0;
        while (axis < d) {
            if (++k[axis] <= hi[axis]) break;
            k[axis] = lo[axis];
            ++axis;
        }
        if (axis == d) break;
    }
    return lat;
}

Lattice single_point_lattice(const Vec& point, const Vec& weight, double epsilon) {
    Lattice lat;
    lat.epsilon = epsilon;
    lat.points = {point};
    lat.multi_index = {{0, 0, 0}};
    lat.weights = {weight};
    return lat;
}

Vec drift_from_ensemble(const SingularKernel& kernel, const VorticityField& omega0, const Lattice& lattice,
                        std::span<const LawSample> clouds, const Vec& x) {
    if (lattice.points.empty()) throw std::invalid_argument("drift_from_ensemble: empty lattice");
    if (clouds.size() != lattice.points.size())
        throw std::invalid_argument("drift_from_ensemble: one cloud per lattice point required");
    if (kernel.d != omega0.d) throw std::invalid_argument("drift_from_ensemble: dimension mismatch");
    Vec drift = Vec::zero(kernel.d);
    for (std::size_t k = 0; k < lattice.points.size(); ++k) {
        const Mat conv = convolve_with_law(kernel, clouds[k], x).value;
        drift += conv.apply(lattice.weights[k]);
    }
    return drift;
}

}  // namespace mvsde
