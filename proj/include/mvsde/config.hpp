#pragma once

// Typed run configuration: flat key = value sections (kernel, omega0, grids,
// solver, constants, tolerances).  Unknown keys and out-of-range values are
// fatal with field-precise messages; a canonical re-serialization backs the
// config hash and the round-trip contract.

#include <cstdint>
#include <optional>
#include <string>

#include "mvsde/geometry.hpp"
#include "mvsde/kernels.hpp"
#include "mvsde/structure_constants.hpp"

namespace mvsde {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Omega0Kind { lamb_oseen, gaussian_blob, zero, point_vortex };

struct RunConfig {
    // [kernel]
    int dimension = 2;
    BuiltinKernel kernel_name = BuiltinKernel::biot_savart_2d;
    double kernel_gamma = 0.0;  // riesz only
    KernelNormalization normalization = KernelNormalization::quarter_pi;
    double delta = 0;  // 0 = auto (epsilon / 4)

    // [omega0]
    Omega0Kind omega0_kind = Omega0Kind::lamb_oseen;
    double circulation = 1.0;   // lamb_oseen / point_vortex
    double t0 = 1.0;            // lamb_oseen
    double amplitude = 1.0;     // gaussian_blob
    double sigma = 1.0;         // gaussian_blob
    Vec center = Vec(2);        // gaussian_blob / point_vortex
    double support_radius = 0;  // 0 = auto

    // [grids]
    double box_radius = 3.0;
    double h = 0.25;
    double T = 0.1;
    double dt_grid = 0.025;
    double recovery_box_radius = 0;  // 0 = box_radius
    double recovery_h = 0;           // 0 = h
    std::vector<double> snapshot_times;

    // [solver]
    double nu = 0.5;
    double dt = 0.0125;
    double epsilon = 0.25;
    int n_copies = 1000;        // N
    int paths_per_point = 100;  // M
    int bound_paths = 20000;    // MC paths for the bound audits
    double kde_bandwidth_mult = 1.0;
    uint64_t seed = 1;

    // [constants]
    ConstantOverrides overrides;

    // [tolerances]
    double tol_fp = 0.005;
    int max_iter = 8;

    SingularKernel make_kernel() const;
    VorticityField make_omega0() const;
    double effective_delta() const { return delta > 0 ? delta : epsilon / 4.0; }
    double effective_recovery_box() const { return recovery_box_radius > 0 ? recovery_box_radius : box_radius; }
    double effective_recovery_h() const { return recovery_h > 0 ? recovery_h : h; }
    GridSpec drift_grid() const { return GridSpec(dimension, box_radius, h); }
    GridSpec recovery_grid() const { return GridSpec(dimension, effective_recovery_box(), effective_recovery_h()); }
    /// Structure constants from the kernel/omega0 metadata plus overrides.
    StructureConstants structure_constants() const;
};

RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::string& path);

/// Canonical serialization: fixed section and key order, 17 significant digits.
std::string canonical_config(const RunConfig& cfg);

}  // namespace mvsde
