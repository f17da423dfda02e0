#pragma once

// Recovery of vorticity and velocity fields from particle laws, the residual
// of the non-local vorticity transport PDE, divergence checks, and comparison
// against the closed-form Lamb-Oseen solution.

#include <string>
#include <vector>

#include "mvsde/geometry.hpp"
#include "mvsde/kernels.hpp"
#include "mvsde/particle_system.hpp"

namespace mvsde {

struct FieldGrid {
    GridSpec grid;
    double t = 0;
    int n_comp = 0;
    std::vector<double> values;  // [node][component]
    std::string name;

    FieldGrid() = default;
    FieldGrid(GridSpec g, double time, int comps, std::string label = "")
        : grid(g), t(time), n_comp(comps), values(g.node_count() * comps, 0.0), name(std::move(label)) {}

    double value(std::size_t node, int comp) const { return values[node * n_comp + comp]; }
    double& value(std::size_t node, int comp) { return values[node * n_comp + comp]; }
    Vec vec_at(std::size_t node) const {
        Vec v(n_comp);
        for (int i = 0; i < n_comp; ++i) v[i] = values[node * n_comp + i];
        return v;
    }
};

/// Signed vorticity on the grid: sum_k eps^d omega0(y_k) x KDE of the copies
/// of X(y_k, t).  One KDE per lattice point (sign-changing omega0 forbids a
/// single global density estimate).  min_copies guards the KDE sample count;
/// only the internal half-sample noise estimator lowers it.
FieldGrid recover_vorticity(const ParticleSystemState& state, const GridSpec& grid,
                            double bandwidth_mult = 1.0, int threads = 0, int min_copies = 1000);

/// Velocity via cell-weighted midpoint convolution of the kernel with a
/// vorticity grid (delta-desingularized).
FieldGrid recover_velocity(const FieldGrid& omega, const SingularKernel& kernel, int threads = 0);

/// Velocity via direct particle summation (1/N) sum K(x - X^{n,k}) . w_k.
FieldGrid recover_velocity_from_particles(const ParticleSystemState& state, const SingularKernel& kernel,
                                          const GridSpec& grid, int threads = 0);

struct ResidualReport {
    FieldGrid residual;   // interior nodes; margin left zero
    double l2_norm = 0;   // sqrt(sum |res|^2 h^d) over the interior window
    double sup_norm = 0;
};

/// Residual of d/dt omega + u . grad omega = nu Lap omega - (div u) omega,
/// central differences in time (three snapshots) and space (interior nodes).
ResidualReport pde_residual(const FieldGrid& omega_prev, const FieldGrid& omega_mid,
                            const FieldGrid& omega_next, const FieldGrid& u_mid, double nu);

struct DivergenceReport {
    double max_abs = 0;
    double l2 = 0;
    double max_grad = 0;  // max Frobenius norm of the velocity Jacobian
};

DivergenceReport divergence_check(const FieldGrid& u);

/// Closed-form Lamb-Oseen vortex (2d, radially symmetric exact solution).
struct LambOseen {
    double circulation = 1;
    double t0 = 1;
    double nu = 0.5;

    double core_scale(double t) const { return 4.0 * nu * (t + t0); }
    double vorticity(double r, double t) const;
    double u_theta(double r, double t) const;
    Vec velocity(const Vec& x, double t) const;
    double peak_radius(double t) const;  // argmax_r u_theta
};

struct LambOseenErrors {
    double omega_l1_rel = 0;        // cell-weighted relative L1 error of omega
    double u_l2_rel = 0;            // relative L2 error of u on the annulus
    double peak_location_error = 0; // |argmax_r |u|| vs the analytic peak radius
};

LambOseenErrors compare_lamb_oseen(const FieldGrid& omega, const FieldGrid& u, double circulation,
                                   double t0, double nu, double t, double annulus_lo = 0.2,
                                   double annulus_hi = 3.0);

void write_field_ndjson(const std::vector<FieldGrid>& fields, const std::string& path);
std::vector<FieldGrid> read_field_ndjson(const std::string& path);

/// Radial profile CSV `r,omega,omega_exact,u_theta,u_exact` (annulus averages).
void write_radial_profile_csv(const FieldGrid& omega, const FieldGrid& u, const LambOseen& exact,
                              double t, const std::string& path);

/// Split the copies of a run into two halves (noise-floor estimation).
std::pair<ParticleSystemState, ParticleSystemState> split_copies(const ParticleSystemState& state);

}  // namespace mvsde
