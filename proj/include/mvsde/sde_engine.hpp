#pragma once

// Euler-Maruyama simulation of dX = b(X,t) dt + sqrt(2 nu) dB, Cameron-Martin
// weights along Brownian paths, Feynman-Kac estimators, and kernel density
// estimates of transition densities.
//
// Unit conventions: the engine always integrates with sqrt(2 nu) noise.  The
// Cameron-Martin / Feynman-Kac operations work in the unit-diffusion regime
// (nu = 1/2, noise dB); general nu is reached through the exact rescaling
// y = x / sqrt(2 nu), b~(y,t) = b(sqrt(2 nu) y, t) / sqrt(2 nu).

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mvsde/drift_field.hpp"
#include "mvsde/geometry.hpp"

namespace mvsde {

struct PathBatch {
    std::vector<Vec> starts;
    int n_paths_per_start = 0;
    double nu = 0.5;
    double dt = 0;
    uint64_t seed = 0;
    std::vector<double> observe_times;  // snapped to the solver grid
    std::vector<Vec> positions;         // [start][path][observation]
    int d = 0;

    std::size_t n_paths() const { return starts.size() * static_cast<std::size_t>(n_paths_per_start); }
    const Vec& position(std::size_t start, int path, std::size_t obs) const {
        return positions[(start * static_cast<std::size_t>(n_paths_per_start) + static_cast<std::size_t>(path)) *
                             observe_times.size() +
                         obs];
    }
};

/// Normal increments for path `path_id` are addressable by (seed, path_id, step),
/// so any path regenerates in isolation.
Vec brownian_increment(int d, uint64_t path_key, std::size_t step, double std_dev);

PathBatch simulate_paths(const DriftField& b, std::vector<Vec> starts, double nu, double dt,
                         std::vector<double> observe_times, uint64_t seed, int n_paths_per_start,
                         int threads = 0);

struct CMWeight {
    double value = 1;             // R_b = exp(N_b)
    double log_value = 0;         // N_b
    double stochastic_part = 0;   // int b . dB
    double quadratic_part = 0;    // int |b|^2 dt
};

/// Cameron-Martin weight for one unit-diffusion Brownian path given by its
/// increments over [tau, t] with step dt (left-point Ito discretization):
///   N_b = sum b(x + B_k - B_tau, t_k) . dB_k - 1/2 sum |b|^2 dt.
CMWeight cameron_martin_weight(std::span<const Vec> increments, double dt, const DriftField& b, double tau,
                               const Vec& x, double t);

struct MCEstimate {
    double estimate = 0;
    double std_error = 0;
};

/// int f(y) p_b(tau, x, t, y) dy estimated as E[R_b f(x + B_t - B_tau)] over
/// raw unit-diffusion Brownian paths.
MCEstimate feynman_kac_expectation(const std::function<double(const Vec&)>& f, const DriftField& b,
                                   double tau, const Vec& x, double t, int n_paths, double dt,
                                   uint64_t seed, int threads = 0);

struct DensityGrid {
    GridSpec grid;
    double t = 0;
    std::vector<double> p;
    double mass_on_grid = 0;  // grid quadrature of the estimate; ~1 up to leakage
    std::vector<double> bandwidth;
};

/// Gaussian-product KDE of the batch law at an observation time.  Bandwidth
/// per coordinate: sigma_hat * n^{-1/(d+4)} * bandwidth_mult.
DensityGrid density_kde(const PathBatch& batch, double observe_time, const GridSpec& grid,
                        double bandwidth_mult = 1.0, int threads = 0);

/// Exact rescaling between engine units (noise sqrt(2 nu) dB) and the
/// unit-diffusion regime: b~(y, t) = b(sqrt(2 nu) y, t) / sqrt(2 nu) on the
/// correspondingly scaled grid.  rescale_from_unit_diffusion is the inverse.
DriftField rescale_to_unit_diffusion(const DriftField& b, double nu);
DriftField rescale_from_unit_diffusion(const DriftField& b_unit, double nu);

void write_pathbatch_csv(const PathBatch& batch, const std::string& path);
void write_density_ndjson(const DensityGrid& density, const std::string& path);

}  // namespace mvsde
