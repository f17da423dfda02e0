#pragma once

// Explicit constants of the contraction framework (kappa1, C_K, T_K, C_L, T_L)
// and the sharp heat-kernel / Aronson envelopes used by the bound audits.

#include <optional>

#include "mvsde/geometry.hpp"

namespace mvsde {

struct StructureConstants {
    int d = 2;
    double q = 1.5;       // in (1, d/(d-1))
    double kappa = 1.0;   // sharp-bound universal constant (not derivable here; configurable)
    double kappa1 = 0;
    double C0 = 0, C1 = 0, Cinf = 0;
    double gamma1 = 0;
    double C_K = 0;
    double T_K = 0;       // 1/C_K^2; +inf when C_K = 0
    bool T_K_unbounded = false;
    double alpha = 2.0, beta = 2.0;
    double C_beta = 0;    // Burkholder-Davis-Gundy constant (configurable)
    double C_L = 0;
    double T_L_derived = 0;        // min(T_K, sup{t : (t+sqrt(t)) C_L <= 1/2})
    double T_L_paper_literal = 0;  // min(C_L/4, 1), reported for reference only
};

/// Admissible upper end of the q-range, d/(d-1) (+inf for d = 1).
double q_upper(int d);

/// kappa1 = max{Vol(S^{d-1}), kappa * q^{d/2} (1 + sqrt(2q) Gamma((d+1)/2)/Gamma(d/2))}.
double kappa1_closed_form(int d, double q, double kappa);

/// Same quantity with the Gaussian moment integral evaluated by radial quadrature.
double kappa1_quadrature(int d, double q, double kappa);

struct CKTK {
    double C_K = 0;
    double T_K = 0;
    bool unbounded = false;
};

/// C_K = C0 (kappa1 Cinf / (d - gamma1) (1 + e^{1/(2(q-1))}) + C1), T_K = 1/C_K^2.
CKTK compute_ck_tk(double C0, double C1, double Cinf, double gamma1, int d, double q, double kappa);

struct LipschitzResult {
    double C_L = 0;
    double T_L_derived = 0;
    double T_L_paper_literal = 0;
};

LipschitzResult lipschitz_constant(const StructureConstants& sc);

struct ConstantOverrides {
    std::optional<double> q;
    std::optional<double> kappa;
    std::optional<double> alpha;
    std::optional<double> C_beta;
};

/// Full constant set with documented defaults: q midpoint of (1, d/(d-1)),
/// alpha midpoint of the admissible range, C_beta = (2 beta)^beta.
StructureConstants make_structure_constants(double C0, double C1, double Cinf, double gamma1, int d,
                                            const ConstantOverrides& overrides = {});

/// Sharp transition-density upper bound for |b| <= A at time t and radius r.
double sharp_density_bound(double A, double t, double r, const StructureConstants& sc);

/// Smallest kappa making the sharp bound dominate the exact constant-drift
/// density over the given (t, r) grid.
double calibrate_kappa(double A, const std::vector<double>& t_grid, const std::vector<double>& r_grid,
                       const StructureConstants& sc);

struct AronsonEnvelope {
    double lower = 0;
    double upper = 0;
};

/// Two-sided Gaussian envelope (1/(M t^{d/2})) e^{-M r^2/t} <= p <= (M/t^{d/2}) e^{-r^2/(M t)}.
AronsonEnvelope aronson_envelope(double M, double t, double r, int d);

}  // namespace mvsde
