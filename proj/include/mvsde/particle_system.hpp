#pragma once

// Lattice interacting-particle system: N copies of the epsilon-lattice cloud,
// evolved either under a frozen mean-field drift or under the running
// empirical-measure drift (pairwise kernel summation, self-terms dropped).

#include <cstdint>
#include <string>
#include <vector>

#include "mvsde/drift_field.hpp"
#include "mvsde/kernels.hpp"

namespace mvsde {

enum class ParticleMode { mean_field, empirical_coupled };

struct ParticleSystemState {
    Lattice lattice;
    int n_copies = 0;
    double nu = 0;
    double t = 0;
    uint64_t seed = 0;
    ParticleMode mode = ParticleMode::mean_field;
    std::vector<Vec> positions;  // [copy][lattice point]

    const Vec& position(int copy, std::size_t k) const {
        return positions[static_cast<std::size_t>(copy) * lattice.points.size() + k];
    }
    std::size_t n_particles() const { return positions.size(); }
};

struct ParticleRunConfig {
    double epsilon = 0.25;
    int n_copies = 1;
    double nu = 0.5;
    double dt = 0.01;
    double T = 0.1;
    uint64_t seed = 1;
    ParticleMode mode = ParticleMode::mean_field;
    const DriftField* mean_field_drift = nullptr;  // required in mean_field mode
    std::vector<double> snapshot_times;            // snapped to the step grid
    double blowup_radius_factor = 100.0;           // abort when |X| exceeds factor * R_omega
    int threads = 0;
};

struct BlowUpError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<ParticleSystemState> run_particle_system(const SingularKernel& kernel,
                                                     const VorticityField& omega0,
                                                     const ParticleRunConfig& cfg);

/// Same dynamics started from an explicit lattice (e.g. a single point vortex).
std::vector<ParticleSystemState> run_particle_system_from_lattice(const SingularKernel& kernel,
                                                                  const Lattice& lattice,
                                                                  double support_radius,
                                                                  const ParticleRunConfig& cfg);

/// omega0-weighted mean drift over all particles at the current positions
/// (zero for odd kernels by pairwise antisymmetry).
Vec empirical_mean_drift(const SingularKernel& kernel, const ParticleSystemState& state, int threads = 0);

void write_snapshots_csv(const std::vector<ParticleSystemState>& states, const std::string& path);

}  // namespace mvsde
