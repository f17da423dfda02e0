#pragma once

// Monte Carlo audits of the singular-integral inequalities: the inner-ball
// bound I(f,x,t,rho,gamma) and the outer bound J(f,x,t,rho,gamma), estimated
// over simulated unit-diffusion endpoints and compared against their
// closed-form right-hand sides.

#include <cstdint>
#include <functional>

#include "mvsde/drift_field.hpp"
#include "mvsde/geometry.hpp"
#include "mvsde/kernels.hpp"
#include "mvsde/structure_constants.hpp"

namespace mvsde {

struct BoundReport {
    double lhs_estimate = 0;
    double lhs_std_error = 0;
    double rhs_bound = 0;
    bool satisfied = false;  // lhs - 3 se <= rhs
    double margin = 0;       // rhs - (lhs - 3 se)
};

BoundReport make_bound_report(double lhs, double se, double rhs);

/// Scalar field with the norms the bounds consume.
struct ScalarField {
    int d = 0;
    std::function<double(const Vec&)> value;
    double sup_norm = 0;
    double l1_norm = 0;
    double support_radius = 1;
};

/// |omega0| as a scalar field (pointwise Euclidean norm).
ScalarField magnitude_field(const VorticityField& omega0);
ScalarField indicator_ball(int d, double radius);

struct McParams {
    int n_paths = 10000;
    double dt = 0.01;
    uint64_t seed = 1;
    int threads = 0;
};

/// I(f,x,t,rho,gamma) = int int_{|z|<rho} |z|^-gamma |f(y)| p_b(0,y,t,x-z) dz dy
/// vs rho^{d-gamma}/(d-gamma) kappa1 ||f||_inf (1 + A sqrt(t) e^{A^2 t / (2(q-1))}).
/// The singular z-integral over the final Gaussian step is done by exact radial
/// quadrature; only the path up to the penultimate step is sampled.
BoundReport verify_I_bound(const ScalarField& f, const Vec& x, double t, double rho, double gamma,
                           const DriftField& b, const StructureConstants& sc, const McParams& mc);

/// J(f,x,t,rho,gamma) = int int_{|z|>=rho} |z|^-gamma |f(y)| p_b(0,y,t,x-z) dz dy
/// vs ||f||_L1 / rho^gamma.
BoundReport verify_J_bound(const ScalarField& f, const Vec& x, double t, double rho, double gamma,
                           const DriftField& b, const McParams& mc);

}  // namespace mvsde
