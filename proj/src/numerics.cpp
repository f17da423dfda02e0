#include "mvsde/numerics.hpp"

#include <stdexcept>

#include "mvsde/geometry.hpp"

namespace mvsde {

namespace {

double simpson_rule(double fa, double fm, double fb, double h) { return h / 6.0 * (fa + 4.0 * fm + fb); }

double adaptive_step(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                     double fb, double whole, double rel_tol, double abs_tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson_rule(fa, flm, fm, m - a);
    const double right = simpson_rule(fm, frm, fb, b - m);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * (abs_tol + rel_tol * std::abs(left + right)))
        return left + right + delta / 15.0;
    return adaptive_step(f, a, m, fa, flm, fm, left, rel_tol, 0.5 * abs_tol, depth - 1) +
           adaptive_step(f, m, b, fm, frm, fb, right, rel_tol, 0.5 * abs_tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double rel_tol,
                        double abs_tol, int max_depth) {
    if (a == b) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = simpson_rule(fa, fm, fb, b - a);
    return adaptive_step(f, a, b, fa, fm, fb, whole, rel_tol, abs_tol, max_depth);
}

double i0e(double x) {
    x = std::abs(x);
    if (x < 18.0) {
        // power series, scaled at the end
        double term = 1.0, sum = 1.0;
        const double q = 0.25 * x * x;
        for (int k = 1; k < 90; ++k) {
            term *= q / (static_cast<double>(k) * k);
            sum += term;
            if (term < 1e-18 * sum) break;
        }
        return sum * std::exp(-x);
    }
    // asymptotic expansion of I0(x) e^{-x} ~ (2 pi x)^{-1/2} sum ((2k-1)!!)^2/(k! (8x)^k)
    const double ix = 1.0 / (8.0 * x);
    double term = 1.0, sum = 1.0;
    for (int k = 1; k <= 8; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= odd * odd * ix / static_cast<double>(k);
        sum += term;
    }
    return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

double sphere_surface(int d) {
    if (d <= 0) throw std::invalid_argument("sphere_surface: d must be positive");
    return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

double noncentral_radial_density(int d, double m, double var, double r) {
    if (r < 0) return 0.0;
    const double sigma = std::sqrt(var);
    switch (d) {
        case 1: {
            const double a = (r - m) / sigma, b = (r + m) / sigma;
            const double c = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
            return c * (std::exp(-0.5 * a * a) + std::exp(-0.5 * b * b));
        }
        case 2: {
            const double x = r * m / var;
            const double e = std::exp(-0.5 * (r - m) * (r - m) / var);
            return r / var * e * i0e(x);
        }
        case 3: {
            // (r / (m sigma sqrt(2 pi))) (e^{-(r-m)^2/2v} - e^{-(r+m)^2/2v}), stable near m = 0
            const double c = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
            const double x = r * m / var;
            if (x < 1e-6) return c * (2.0 * r * r / var) * std::exp(-0.5 * (r * r + m * m) / var) * sinhc(x);
            return c * (r / m) * std::exp(-0.5 * (r - m) * (r - m) / var) * (1.0 - std::exp(-2.0 * x));
        }
        default:
            throw std::invalid_argument("noncentral_radial_density: d must be 1..3");
    }
}

double bisect_root(const std::function<double(double)>& f, double lo, double hi, double tol, int max_iter) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0) return lo;
    if (fhi == 0) return hi;
    if (flo * fhi > 0) throw std::invalid_argument("bisect_root: no sign change on interval");
    for (int i = 0; i < max_iter && hi - lo > tol * std::max(1.0, std::abs(lo)); ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0) return mid;
        if (flo * fm < 0) {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    return 0.5 * (lo + hi);
}

double spectral_norm(const Mat& a) {
    const int d = a.d;
    // S = A^T A, symmetric PSD
    Mat s(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double v = 0;
            for (int k = 0; k < d; ++k) v += a(k, i) * a(k, j);
            s(i, j) = v;
        }
    if (d == 1) return std::sqrt(std::max(0.0, s(0, 0)));
    if (d == 2) {
        const double tr = s(0, 0) + s(1, 1);
        const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
        const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
        return std::sqrt(std::max(0.0, 0.5 * tr + disc));
    }
    // cyclic Jacobi for the 3x3 case
    for (int sweep = 0; sweep < 32; ++sweep) {
        double off = 0;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q) off += s(p, q) * s(p, q);
        if (off < 1e-30) break;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q) {
                if (std::abs(s(p, q)) < 1e-300) continue;
                const double theta = 0.5 * (s(q, q) - s(p, p)) / s(p, q);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (int k = 0; k < d; ++k) {
                    const double skp = s(k, p), skq = s(k, q);
                    s(k, p) = c * skp - sn * skq;
                    s(k, q) = sn * skp + c * skq;
                }
                for (int k = 0; k < d; ++k) {
                    const double spk = s(p, k), sqk = s(q, k);
                    s(p, k) = c * spk - sn * sqk;
                    s(q, k) = sn * spk + c * sqk;
                }
            }
    }
    double lam = 0;
    for (int i = 0; i < d; ++i) lam = std::max(lam, s(i, i));
    return std::sqrt(std::max(0.0, lam));
}

}  // namespace mvsde
