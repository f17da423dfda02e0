#pragma once

// The non-linear map b -> K<>b and the Picard iteration whose fixed point
// solves the distribution-dependent SDE, with contraction and boundedness
// diagnostics.

#include <cstdint>
#include <vector>

#include "mvsde/drift_field.hpp"
#include "mvsde/kernels.hpp"
#include "mvsde/structure_constants.hpp"

namespace mvsde {

enum class DiamondEstimator { direct_simulation, cameron_martin_weighted };

struct DiamondConfig {
    double epsilon = 0.25;      // lattice mesh
    int paths_per_point = 100;  // M
    double dt = 0.01;           // solver step
    uint64_t seed = 1;
    DiamondEstimator estimator = DiamondEstimator::direct_simulation;
    int threads = 0;
};

struct DiamondDiagnostics {
    double dropped_fraction = 0;  // singular terms inside the cutoff
    bool singular_warning = false;  // dropped fraction above 1%
};

/// (K<>b)(x, t_j) ~ sum_k eps^d [ (1/M) sum_m K(x - Z_m(y_k, t_j)) ] . omega0(y_k)
/// on the grid of b; one trajectory per (lattice point, sample) is reused
/// across all grid times.  The Cameron-Martin estimator reweights raw Brownian
/// paths instead of simulating the drifted diffusion.
DriftField apply_K_diamond(const DriftField& b, const SingularKernel& kernel, const VorticityField& omega0,
                           double nu, const DiamondConfig& cfg, DiamondDiagnostics* diag = nullptr);

enum class PicardStatus { converged, max_iter_reached, nan_detected };

struct PicardState {
    PicardStatus status = PicardStatus::max_iter_reached;
    int n_iterations = 0;
    std::vector<double> residuals;        // r_n = |b_{n+1} - b_n|_sup
    std::vector<double> ratios;           // r_n / r_{n-1}, recorded above the noise floor
    std::vector<int> ratio_iteration;     // iteration index of each recorded ratio
    std::vector<double> sup_norms;        // |b_{n+1}|_sup
    std::vector<double> seconds;          // wall clock per iteration
    double noise_floor = 0;               // two-seed grid-sup difference of one application
    double certification_residual = 0;    // fresh-seed |K<>b* - b*|_sup on success
    bool beyond_guaranteed_horizon = false;  // T > T_L_derived when constants supplied
    double dropped_fraction = 0;          // singular terms inside the cutoff, last iteration
    bool singular_warning = false;        // dropped fraction above 1%
};

struct PicardResult {
    DriftField b;
    PicardState state;
};

/// Picard iteration b_{n+1} = K<>b_n from b_0 = 0 with common random numbers;
/// stops when the grid-sup residual falls below tol_fp.
PicardResult picard_solve(const SingularKernel& kernel, const VorticityField& omega0, double nu,
                          const GridSpec& grid, double T, double dt_grid, const DiamondConfig& cfg,
                          double tol_fp, int max_iter,
                          const StructureConstants* sc = nullptr);

struct ContractionRow {
    double t = 0;
    double empirical_ratio = 0;  // |K<>b - K<>b~|_sup(t) / |b - b~|_sup([0,t])
    double bound = 0;            // (t + sqrt(t)) C_L
    bool satisfied = false;
};

std::vector<ContractionRow> contraction_diagnostics(const SingularKernel& kernel,
                                                    const VorticityField& omega0, double nu,
                                                    const DriftField& b, const DriftField& b_tilde,
                                                    const StructureConstants& sc, const DiamondConfig& cfg);

struct HoelderWindow {
    Vec lo, hi;      // spatial window corners (inside the grid)
    double t_min = 0, t_max = 0;
};

struct HoelderFit {
    double exponent = 1;   // clamped to (0, 1]
    double constant = 0;
    double raw_slope = 1;  // unclamped least-squares slope
    int n_lags = 0;
};

/// Least-squares fit of log sup-increments against log lags; spatial lags are
/// multiples of h, temporal lags enter through sqrt(k dt_grid).
HoelderFit hoelder_modulus(const DriftField& b, const HoelderWindow& window,
                           const std::vector<int>& space_lags, const std::vector<int>& time_lags);

/// Richardson-style quadrature diagnostic: grid-sup difference between the
/// t = 0 lattice convolutions at mesh eps and eps/2.
double lattice_refinement_check(const SingularKernel& kernel, const VorticityField& omega0,
                                double epsilon, const GridSpec& grid, int threads = 0);

void write_picard_csv(const PicardState& state, const std::string& path);

}  // namespace mvsde
