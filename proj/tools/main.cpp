// Batch front door: parses the run config, dispatches the five workflows and
// writes deterministic machine-readable outputs.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mvsde/parallel.hpp"
#include "mvsde/workflows.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run configuration file")->required();
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "override the configured seed")->each([&](const std::string&) {
        args.seed_set = true;
    });
    cmd->add_option("--threads", args.threads, "worker cap (1 = bit-exact reference mode)");
}

int dispatch(const CommonArgs& args, mvsde::RunOptions opt,
             mvsde::WorkflowResult (*fn)(const mvsde::RunConfig&, const mvsde::RunOptions&)) {
    mvsde::RunConfig cfg;
    try {
        cfg = mvsde::parse_config_file(args.config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return mvsde::kExitConfig;
    }
    if (args.seed_set) cfg.seed = args.seed;
    if (args.threads > 0) mvsde::set_max_threads(args.threads);
    opt.out_dir = args.out_dir;
    opt.threads = args.threads;
    const mvsde::WorkflowResult res = fn(cfg, opt);
    if (!res.message.empty()) {
        (res.exit_code == 0 ? std::cout : std::cerr) << res.message << "\n";
    }
    return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic particle engine for distribution-dependent SDEs with singular kernels"};
    app.require_subcommand(1);

    CommonArgs args;
    mvsde::RunOptions opt;

    CLI::App* constants = app.add_subcommand("constants", "emit the structure-constant block");
    add_common(constants, args);

    CLI::App* solve = app.add_subcommand("solve-drift", "Picard-iterate the drift fixed point");
    add_common(solve, args);
    solve->add_flag("--allow-beyond-TK", opt.allow_beyond_tk, "proceed when T exceeds T_K");

    CLI::App* simulate = app.add_subcommand("simulate", "run the lattice particle system and recover fields");
    add_common(simulate, args);
    std::string mode = "meanfield";
    simulate->add_option("--drift", opt.drift_file, "fixed-point drift field (NDJSON)");
    simulate->add_option("--mode", mode, "meanfield | empirical")
        ->check(CLI::IsMember({"meanfield", "empirical"}));
    simulate->add_flag("--emit-plot-data", opt.emit_plot_data, "write radial-profile CSV");

    CLI::App* verify = app.add_subcommand("verify-bounds", "audit the density and integral bounds");
    add_common(verify, args);

    CLI::App* compare = app.add_subcommand("compare", "compare recovered fields against the exact vortex");
    add_common(compare, args);
    compare->add_option("--omega", opt.omega_file, "vorticity field file")->required();
    compare->add_option("--velocity", opt.velocity_file, "velocity field file")->required();

    CLI11_PARSE(app, argc, argv);

    if (constants->parsed()) return dispatch(args, opt, mvsde::cmd_constants);
    if (solve->parsed()) return dispatch(args, opt, mvsde::cmd_solve_drift);
    if (simulate->parsed()) {
        opt.mode = mode == "empirical" ? mvsde::ParticleMode::empirical_coupled
                                       : mvsde::ParticleMode::mean_field;
        return dispatch(args, opt, mvsde::cmd_simulate);
    }
    if (verify->parsed()) return dispatch(args, opt, mvsde::cmd_verify_bounds);
    if (compare->parsed()) return dispatch(args, opt, mvsde::cmd_compare);
    return mvsde::kExitConfig;
}
