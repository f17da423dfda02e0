#pragma once

// The five batch workflows behind the CLI subcommands, written as library
// functions so tests can drive them directly.  Every workflow writes a
// manifest recording config hash, seed, status and file checksums.

#include <string>
#include <vector>

#include "mvsde/bound_audit.hpp"
#include "mvsde/config.hpp"
#include "mvsde/kdiamond.hpp"
#include "mvsde/particle_system.hpp"

namespace mvsde {

inline constexpr const char* kCodeVersion = "0.1.0";

// exit codes shared by the workflows and the CLI
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNoConvergence = 3;
inline constexpr int kExitNan = 4;
inline constexpr int kExitBlowUp = 5;
inline constexpr int kExitBoundViolated = 6;

struct WorkflowResult {
    int exit_code = kExitOk;
    std::string message;
    std::vector<std::string> files;  // paths written (relative to out_dir)
};

struct RunOptions {
    std::string out_dir = ".";
    int threads = 0;                  // 0 = hardware default
    bool allow_beyond_tk = false;     // solve-drift past T_K
    bool emit_plot_data = false;
    ParticleMode mode = ParticleMode::mean_field;
    std::string drift_file;           // simulate: fixed-point drift input
    std::string omega_file;           // compare inputs
    std::string velocity_file;
};

WorkflowResult cmd_constants(const RunConfig& cfg, const RunOptions& opt);
WorkflowResult cmd_solve_drift(const RunConfig& cfg, const RunOptions& opt);
WorkflowResult cmd_simulate(const RunConfig& cfg, const RunOptions& opt);
WorkflowResult cmd_verify_bounds(const RunConfig& cfg, const RunOptions& opt);
WorkflowResult cmd_compare(const RunConfig& cfg, const RunOptions& opt);

/// Flat key=value constants block (exact key set of the external interface).
std::string constants_text_block(const StructureConstants& sc);
std::string constants_ndjson_record(const StructureConstants& sc);

/// Bound-audit rows of the verify-bounds workflow (also used by tests).
struct AuditRow {
    std::string name;
    double t = 0, r = 0;
    BoundReport report;
    double diagnostic = 0;  // calibrated kappa / envelope M where applicable
};
std::vector<AuditRow> run_bound_audit(const RunConfig& cfg, int threads);

}  // namespace mvsde
