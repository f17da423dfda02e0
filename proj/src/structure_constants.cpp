#include "mvsde/structure_constants.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "mvsde/numerics.hpp"

namespace mvsde {

namespace {

void check_q(int d, double q) {
    if (!(q > 1.0) || !(q < q_upper(d)))
        throw std::invalid_argument("q must lie in (1, d/(d-1))");
}

}  // namespace

double q_upper(int d) {
    if (d <= 0) throw std::invalid_argument("q_upper: d must be positive");
    if (d == 1) return std::numeric_limits<double>::infinity();
    return static_cast<double>(d) / (d - 1.0);
}

double kappa1_closed_form(int d, double q, double kappa) {
    if (d < 1) throw std::invalid_argument("kappa1: d must be >= 1");
    check_q(d, q);
    if (kappa < 0) throw std::invalid_argument("kappa1: kappa must be nonnegative");
    // E|Z| for a standard d-dim normal is sqrt(2) Gamma((d+1)/2) / Gamma(d/2)
    const double moment = std::sqrt(2.0 * q) * std::tgamma(0.5 * (d + 1)) / std::tgamma(0.5 * d);
    const double integral = std::pow(q, 0.5 * d) * (1.0 + moment);
    return std::max(sphere_surface(d), kappa * integral);
}

double kappa1_quadrature(int d, double q, double kappa) {
    if (d < 1) throw std::invalid_argument("kappa1: d must be >= 1");
    check_q(d, q);
    const double surf = sphere_surface(d);
    const double norm = std::pow(2.0 * std::numbers::pi, -0.5 * d);
    const double upper = 20.0 * std::sqrt(q);
    const double integral = surf * norm *
                            adaptive_simpson(
                                [d, q](double r) {
                                    return (1.0 + r) * std::pow(r, d - 1) * std::exp(-r * r / (2.0 * q));
                                },
                                0.0, upper, 1e-12, 1e-16);
    return std::max(surf, kappa * integral);
}

CKTK compute_ck_tk(double C0, double C1, double Cinf, double gamma1, int d, double q, double kappa) {
    if (gamma1 < 0 || gamma1 >= d) throw std::invalid_argument("compute_ck_tk: gamma1 must be in [0, d)");
    if (C0 < 0 || C1 < 0 || Cinf < 0) throw std::invalid_argument("compute_ck_tk: norms must be nonnegative");
    check_q(d, q);
    const double k1 = kappa1_closed_form(d, q, kappa);
    CKTK r;
    r.C_K = C0 * (k1 * Cinf / (d - gamma1) * (1.0 + std::exp(1.0 / (2.0 * (q - 1.0)))) + C1);
    if (r.C_K == 0) {
        r.T_K = std::numeric_limits<double>::infinity();
        r.unbounded = true;
    } else {
        r.T_K = 1.0 / (r.C_K * r.C_K);
    }
    return r;
}

LipschitzResult lipschitz_constant(const StructureConstants& sc) {
    if (!(sc.alpha > 1.0)) throw std::invalid_argument("lipschitz_constant: alpha must exceed 1");
    if (sc.alpha * sc.gamma1 >= sc.d)
        throw std::invalid_argument("lipschitz_constant: alpha * gamma1 must be below d");
    const double a = sc.alpha, b = sc.beta;
    const double e_q = std::exp(1.0 / (2.0 * (sc.q - 1.0)));

    const double term1 = sc.C0 * sc.C1 * std::sqrt(std::exp(0.5 * (a * a - 1.0))) * (sc.C_K + 1.0);
    const double term2 = sc.C0 * sc.Cinf * sc.C_K * sc.kappa1 * (1.0 + e_q) / (sc.d - sc.gamma1);
    const double term3 = sc.C0 * std::pow(sc.C1 * sc.C_beta, 1.0 / b) *
                         std::exp((a * a - 1.0) / (2.0 * a)) *
                         std::pow(sc.kappa1 * (1.0 + a * std::exp(a * a / (2.0 * (sc.q - 1.0)))) /
                                      (sc.d - a * sc.gamma1),
                                  1.0 / a);

    LipschitzResult r;
    r.C_L = term1 + term2 + term3;
    if (r.C_L == 0) {
        r.T_L_derived = sc.T_K;
    } else {
        // largest t with (t + sqrt(t)) C_L <= 1/2: quadratic in s = sqrt(t),
        // written in the cancellation-free form
        const double s = 1.0 / (r.C_L * (1.0 + std::sqrt(1.0 + 2.0 / r.C_L)));
        r.T_L_derived = std::min(sc.T_K, s * s);
    }
    r.T_L_paper_literal = std::min(r.C_L / 4.0, 1.0);
    return r;
}

StructureConstants make_structure_constants(double C0, double C1, double Cinf, double gamma1, int d,
                                            const ConstantOverrides& overrides) {
    StructureConstants sc;
    sc.d = d;
    sc.C0 = C0;
    sc.C1 = C1;
    sc.Cinf = Cinf;
    sc.gamma1 = gamma1;
    sc.q = overrides.q.value_or(d == 1 ? 2.0 : 0.5 * (1.0 + q_upper(d)));
    sc.kappa = overrides.kappa.value_or(1.0);
    sc.alpha = overrides.alpha.value_or(gamma1 > 0 ? 0.5 * (1.0 + d / gamma1) : 2.0);
    sc.beta = sc.alpha / (sc.alpha - 1.0);
    sc.C_beta = overrides.C_beta.value_or(std::pow(2.0 * sc.beta, sc.beta));
    sc.kappa1 = kappa1_closed_form(d, sc.q, sc.kappa);
    const CKTK ck = compute_ck_tk(C0, C1, Cinf, gamma1, d, sc.q, sc.kappa);
    sc.C_K = ck.C_K;
    sc.T_K = ck.T_K;
    sc.T_K_unbounded = ck.unbounded;
    const LipschitzResult lr = lipschitz_constant(sc);
    sc.C_L = lr.C_L;
    sc.T_L_derived = lr.T_L_derived;
    sc.T_L_paper_literal = lr.T_L_paper_literal;
    return sc;
}

double sharp_density_bound(double A, double t, double r, const StructureConstants& sc) {
    if (t <= 0) throw std::invalid_argument("sharp_density_bound: t must be positive");
    if (A < 0 || r < 0) throw std::invalid_argument("sharp_density_bound: A and r must be nonnegative");
    const double gauss = gaussian_density(sc.d, t, r * r);
    const double envelope =
        1.0 + sc.kappa * A * (std::sqrt(t) + r) *
                  std::exp((sc.q - 1.0) / (2.0 * sc.q * t) * r * r + A * A * t / (2.0 * (sc.q - 1.0)));
    return gauss * envelope;
}

double calibrate_kappa(double A, const std::vector<double>& t_grid, const std::vector<double>& r_grid,
                       const StructureConstants& sc) {
    if (A <= 0) throw std::invalid_argument("calibrate_kappa: A must be positive");
    double kappa_min = 0;
    for (double t : t_grid)
        for (double r : r_grid) {
            // worst-case constant-drift density at distance r: drift aligned with x - y
            const double excess = std::expm1(r * A - 0.5 * A * A * t);
            if (excess <= 0) continue;
            const double denom = A * (std::sqrt(t) + r) *
                                 std::exp((sc.q - 1.0) / (2.0 * sc.q * t) * r * r +
                                          A * A * t / (2.0 * (sc.q - 1.0)));
            kappa_min = std::max(kappa_min, excess / denom);
        }
    return kappa_min;
}

AronsonEnvelope aronson_envelope(double M, double t, double r, int d) {
    if (t <= 0) throw std::invalid_argument("aronson_envelope: t must be positive");
    if (M < 1.0) throw std::invalid_argument("aronson_envelope: M must be >= 1");
    AronsonEnvelope e;
    const double td = std::pow(t, 0.5 * d);
    e.lower = std::exp(-M * r * r / t) / (M * td);
    e.upper = M / td * std::exp(-r * r / (M * t));
    return e;
}

}  // namespace mvsde
