// Acceptance suite: runs every acceptance criterion end to end at the stated
// tolerances and prints one pass/fail line per criterion.  Exit code is the
// number of failed checks.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mvsde/field_ops.hpp"
#include "mvsde/io_util.hpp"
#include "mvsde/kdiamond.hpp"
#include "mvsde/sde_engine.hpp"
#include "mvsde/sha256.hpp"
#include "mvsde/workflows.hpp"

using namespace mvsde;

namespace {

int g_failures = 0;

void record(const std::string& name, bool ok, const std::string& detail = "") {
    std::printf("[%s] %s%s%s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.empty() ? "" : "  ",
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

class Timer {
public:
    explicit Timer(std::string label) : label_(std::move(label)), start_(std::chrono::steady_clock::now()) {}
    ~Timer() {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::printf("       (%s: %.1f s)\n", label_.c_str(), s);
    }

private:
    std::string label_;
    std::chrono::steady_clock::time_point start_;
};

std::string work_dir(const std::string& tag) {
    const std::string dir = "/tmp/mvsde_acceptance/" + tag;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MVSDE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

double parse_key(const std::string& block, const std::string& key) {
    const auto pos = block.find(key + "=");
    if (pos == std::string::npos) throw std::runtime_error("missing key " + key);
    return std::stod(block.substr(pos + key.size() + 1));
}

double json_number(const std::string& line, const std::string& key) {
    const auto pos = line.find("\"" + key + "\":");
    if (pos == std::string::npos) throw std::runtime_error("missing json key " + key);
    return std::stod(line.substr(pos + key.size() + 3));
}

// ---------------------------------------------------------------------------
// shared configurations

// kernel/omega0 with C0 = C1 = Cinf = 1, gamma1 = 1 in d = 2 (criteria 1, 2)
std::string unit_constants_config() {
    const double sigma = 1.0 / std::sqrt(2.0 * std::numbers::pi);  // 2 pi sigma^2 = 1
    std::ostringstream out;
    out << "[kernel]\ndimension = 2\nname = riesz\ngamma = 1.0\ndelta = 0.0625\n";
    out << "[omega0]\ntype = gaussian_blob\namplitude = 1.0\nsigma = " << fmt17(sigma)
        << "\nsupport_radius = 3.0\n";
    out << "[grids]\nbox_radius = 3.0\nh = 0.25\nT = 0.1\ndt_grid = 0.025\n";
    out << "[solver]\nnu = 0.5\ndt = 0.0125\nepsilon = 0.25\nn_copies = 1000\npaths_per_point = 50\n"
           "bound_paths = 20000\nseed = 9001\n";
    out << "[constants]\nq = 1.5\nkappa = 1.0\n";
    out << "[tolerances]\ntol_fp = 0.005\nmax_iter = 8\n";
    return out.str();
}

// Lamb-Oseen configuration of criteria 3 and 4
RunConfig lamb_oseen_config(double T, double box_radius, uint64_t seed) {
    std::ostringstream out;
    out << "[kernel]\ndimension = 2\nname = biot_savart_2d\nnormalization = quarter_pi\ndelta = auto\n";
    out << "[omega0]\ntype = lamb_oseen\ncirculation = 1.0\nt0 = 1.0\n";
    out << "[grids]\nbox_radius = " << fmt17(box_radius) << "\nh = 0.25\nT = " << fmt17(T)
        << "\ndt_grid = " << fmt17(T / 4.0) << "\n";
    out << "[solver]\nnu = 0.5\ndt = " << fmt17(T / 8.0)
        << "\nepsilon = 0.25\nn_copies = 1000\npaths_per_point = 200\nseed = " << seed << "\n";
    out << "[tolerances]\ntol_fp = 0.005\nmax_iter = 8\n";
    return parse_config(out.str());
}

// ---------------------------------------------------------------------------

void criterion_1_constants() {
    Timer timer("criterion 1");
    const std::string dir = work_dir("c1");
    write_text_file(dir + "/run.cfg", unit_constants_config());
    const int code = run_cli("constants --config " + dir + "/run.cfg --out " + dir);
    if (code != 0) {
        record("criterion 1: constants reproduction", false, "cli exit " + std::to_string(code));
        return;
    }
    const std::string block = read_text_file(dir + "/constants.txt");
    const double kappa1 = parse_key(block, "kappa1");
    const double ck = parse_key(block, "C_K");
    const double tk = parse_key(block, "T_K");

    const double kappa1_hand = 2.0 * std::numbers::pi;
    const double ck_hand = 2.0 * std::numbers::pi * (1.0 + std::numbers::e) + 1.0;
    const double tk_hand = 1.0 / (ck_hand * ck_hand);
    const bool ok = std::abs(kappa1 - kappa1_hand) <= 1e-10 * kappa1_hand &&
                    std::abs(ck - ck_hand) <= 1e-10 * ck_hand && std::abs(tk - tk_hand) <= 1e-10 * tk_hand;
    record("criterion 1: constants reproduction (kappa1 = 2pi, C_K = 2pi(1+e)+1, T_K = C_K^-2)", ok,
           "C_K=" + fmt(ck) + " T_K=" + fmt(tk));
}

void criterion_2_bound_audit() {
    Timer timer("criterion 2");
    const RunConfig cfg = parse_config(unit_constants_config());
    const std::vector<AuditRow> rows = run_bound_audit(cfg, 0);
    bool all_ok = !rows.empty();
    double min_margin = 1e300;
    std::string worst;
    for (const AuditRow& row : rows) {
        if (!row.report.satisfied) {
            all_ok = false;
            worst = row.name;
        }
        min_margin = std::min(min_margin, row.report.margin);
    }
    record("criterion 2: bound audit suite (sharp, Aronson, I/J) all satisfied", all_ok,
           "rows=" + std::to_string(rows.size()) + " min_margin=" + fmt(min_margin) +
               (worst.empty() ? "" : " violated=" + worst));
}

struct PicardArtifacts {
    PicardResult sol;
    StructureConstants sc;
    RunConfig cfg;
};

PicardArtifacts criterion_3_contraction() {
    Timer timer("criterion 3");
    RunConfig probe = lamb_oseen_config(0.2, 3.0, 777);
    const StructureConstants sc = probe.structure_constants();
    const double T = std::min(sc.T_L_derived, 0.2);
    PicardArtifacts art{{}, sc, lamb_oseen_config(T, 3.0, 777)};

    DiamondConfig dc;
    dc.epsilon = art.cfg.epsilon;
    dc.paths_per_point = art.cfg.paths_per_point;
    dc.dt = art.cfg.dt;
    dc.seed = art.cfg.seed;
    art.sol = picard_solve(art.cfg.make_kernel(), art.cfg.make_omega0(), art.cfg.nu, art.cfg.drift_grid(),
                           T, art.cfg.dt_grid, dc, art.cfg.tol_fp, art.cfg.max_iter, &sc);

    const PicardState& st = art.sol.state;
    bool monotone = true;
    for (std::size_t i = 1; i < st.residuals.size(); ++i)
        monotone = monotone && st.residuals[i] <= st.residuals[i - 1];
    bool ratios_ok = !st.ratios.empty();
    for (double rho : st.ratios) ratios_ok = ratios_ok && rho < 1.0 && rho <= 0.5 + 0.15;

    const bool ok = st.status == PicardStatus::converged && st.n_iterations <= 8 && monotone &&
                    ratios_ok && art.cfg.tol_fp > st.noise_floor &&
                    st.residuals.back() <= art.cfg.tol_fp &&
                    st.certification_residual <= art.cfg.tol_fp + 4.0 * st.noise_floor;
    std::string detail = "iters=" + std::to_string(st.n_iterations) + " residuals=";
    for (double r : st.residuals) detail += fmt(r) + ",";
    detail += " ratios=";
    for (double r : st.ratios) detail += fmt(r) + ",";
    detail += " floor=" + fmt(st.noise_floor) + " cert=" + fmt(st.certification_residual);
    record("criterion 3: Picard contraction at T = min(T_L, 0.2), eps = 0.25, M = 200", ok, detail);
    return art;
}

void criterion_4_fixed_point_vs_exact(const PicardArtifacts& art) {
    Timer timer("criterion 4");
    const LambOseen exact{1.0, 1.0, 0.5};
    const DriftField& b = art.sol.b;
    double num = 0, den = 0;
    for (int j = 1; j < b.n_times; ++j) {
        const double t = b.time_of(j);
        for (std::size_t node = 0; node < b.grid.node_count(); ++node) {
            const Vec x = b.grid.node(node);
            const double r = x.norm();
            if (r < 0.2 || r > 3.0) continue;
            num += (b.node_value(j, node) - exact.velocity(x, t)).norm2();
            den += exact.velocity(x, t).norm2();
        }
    }
    const double err = std::sqrt(num / den);
    record("criterion 4: converged drift vs analytic vortex velocity, rel L2 < 5% on the annulus",
           err < 0.05, "rel_l2=" + fmt(err));
}

void criterion_5_pde_recovery() {
    Timer timer("criterion 5");
    const std::string dir = work_dir("c5");

    // stage 1: fixed-point drift over [0, 0.2] (beyond T_L: warn-and-proceed regime)
    std::ostringstream solve_cfg;
    solve_cfg << "[kernel]\ndimension = 2\nname = biot_savart_2d\ndelta = auto\n";
    solve_cfg << "[omega0]\ntype = lamb_oseen\ncirculation = 1.0\nt0 = 1.0\n";
    solve_cfg << "[grids]\nbox_radius = 4.5\nh = 0.25\nT = 0.2\ndt_grid = 0.025\n";
    solve_cfg << "[solver]\nnu = 0.5\ndt = 0.0125\nepsilon = 0.25\nn_copies = 1000\n"
                 "paths_per_point = 200\nseed = 555\n";
    solve_cfg << "[tolerances]\ntol_fp = 0.005\nmax_iter = 8\n";
    write_text_file(dir + "/solve.cfg", solve_cfg.str());
    {
        RunOptions opt;
        opt.out_dir = dir + "/drift";
        const WorkflowResult res = cmd_solve_drift(parse_config(solve_cfg.str()), opt);
        if (res.exit_code != 0) {
            record("criterion 5: PDE recovery", false, "solve-drift exit " + std::to_string(res.exit_code));
            return;
        }
    }

    // stage 2: 1e5-sample mean-field run; lattice coarsened so each lattice
    // point keeps >= 1000 copies
    std::ostringstream sim_cfg;
    sim_cfg << "[kernel]\ndimension = 2\nname = biot_savart_2d\ndelta = 0.0625\n";
    sim_cfg << "[omega0]\ntype = lamb_oseen\ncirculation = 1.0\nt0 = 1.0\n";
    sim_cfg << "[grids]\nbox_radius = 4.5\nh = 0.25\nT = 0.2\ndt_grid = 0.025\n"
               "recovery_box_radius = 6.0\nrecovery_h = 0.25\nsnapshot_times = 0.1,0.15,0.2\n";
    sim_cfg << "[solver]\nnu = 0.5\ndt = 0.005\nepsilon = 0.85\nn_copies = 1030\n"
               "paths_per_point = 200\nseed = 556\n";
    sim_cfg << "[tolerances]\ntol_fp = 0.005\nmax_iter = 8\n";
    write_text_file(dir + "/sim.cfg", sim_cfg.str());
    const RunConfig scfg = parse_config(sim_cfg.str());
    {
        RunOptions opt;
        opt.out_dir = dir + "/sim";
        opt.mode = ParticleMode::mean_field;
        opt.drift_file = dir + "/drift/drift_field.ndjson";
        opt.emit_plot_data = true;
        const WorkflowResult res = cmd_simulate(scfg, opt);
        if (res.exit_code != 0) {
            record("criterion 5: PDE recovery", false, "simulate exit " + std::to_string(res.exit_code));
            return;
        }
    }

    // residual / mass / divergence checks from the report
    std::ifstream rep(dir + "/sim/pde_residual.ndjson");
    std::string line;
    bool found = false, ok = true;
    std::string detail;
    while (std::getline(rep, line)) {
        if (line.empty()) continue;
        found = true;
        const double l2 = json_number(line, "l2");
        const double noise = json_number(line, "noise_l2");
        const double mass = json_number(line, "mass");
        const double lattice_mass = json_number(line, "lattice_mass");
        const double div_max = json_number(line, "div_max");
        const double grad_max = json_number(line, "grad_max");
        const bool row_ok = l2 <= 3.0 * noise && std::abs(mass - lattice_mass) <= 0.02 * std::abs(lattice_mass) &&
                            div_max <= 0.02 * grad_max;
        ok = ok && row_ok;
        detail = "l2=" + fmt(l2) + " noise=" + fmt(noise) + " mass_err=" +
                 fmt(std::abs(mass / lattice_mass - 1.0)) + " div/grad=" + fmt(div_max / grad_max);
    }
    ok = ok && found;
    record("criterion 5: PDE residual < 3x noise, mass within 2%, divergence < 0.02 max|grad u|", ok,
           detail);

    // recovered fields against the closed forms (compare workflow)
    RunOptions copt;
    copt.out_dir = dir + "/compare";
    copt.omega_file = dir + "/sim/omega_fields.ndjson";
    copt.velocity_file = dir + "/sim/velocity_fields.ndjson";
    const WorkflowResult cres = cmd_compare(scfg, copt);
    bool cmp_ok = cres.exit_code == 0;
    std::string cdetail = "exit=" + std::to_string(cres.exit_code);
    if (cmp_ok) {
        const std::string summary = read_text_file(dir + "/compare/compare_summary.ndjson");
        const double w_err = json_number(summary, "omega_l1_rel");
        const double u_err = json_number(summary, "u_l2_rel");
        cmp_ok = w_err < 0.05 && u_err < 0.05;
        cdetail = "omega_l1=" + fmt(w_err) + " u_l2=" + fmt(u_err);
    }
    record("criterion 5b: recovered fields within 5% of the exact vortex", cmp_ok, cdetail);
}

void criterion_6_trivial_limits() {
    Timer timer("criterion 6");
    SingularKernel kernel = make_builtin_kernel(BuiltinKernel::biot_savart_2d, 2);
    kernel.delta = 0.0625;
    const VorticityField w0 = zero_vorticity(2);

    // b* = 0 in one iteration
    DiamondConfig dc;
    dc.epsilon = 0.25;
    dc.paths_per_point = 50;
    dc.dt = 0.0125;
    dc.seed = 60;
    const PicardResult sol =
        picard_solve(kernel, w0, 0.5, GridSpec(2, 3.0, 0.25), 0.1, 0.025, dc, 0.005, 8);
    const bool picard_ok = sol.state.status == PicardStatus::converged && sol.state.n_iterations == 1 &&
                           sol.state.residuals[0] == 0.0 && sol.b.sup_norm == 0.0;

    // pure Brownian particle statistics
    const DriftField zero_field = DriftField::zero(GridSpec(2, 2.0, 1.0), 0.05, 3);
    ParticleRunConfig pc;
    pc.epsilon = 0.5;
    pc.n_copies = 4000;
    pc.nu = 0.5;
    pc.dt = 0.005;
    pc.T = 0.1;
    pc.seed = 61;
    pc.mode = ParticleMode::mean_field;
    pc.mean_field_drift = &zero_field;
    pc.snapshot_times = {0.1};
    const auto snaps = run_particle_system(kernel, w0, pc);
    double var = 0;
    std::size_t count = 0;
    const std::size_t n_lat = snaps[0].lattice.points.size();
    for (int c = 0; c < pc.n_copies; ++c)
        for (std::size_t k = 0; k < n_lat; ++k) {
            var += (snaps[0].position(c, k) - snaps[0].lattice.points[k]).norm2();
            ++count;
        }
    var /= 2.0 * count;
    const double expect = 2.0 * pc.nu * pc.T;
    const double se = expect * std::sqrt(2.0 / (2.0 * count));
    const bool brownian_ok = std::abs(var - expect) < 4.0 * se;

    // zero vorticity and zero residual
    const GridSpec rec(2, 3.0, 0.25);
    const FieldGrid omega = recover_vorticity(snaps[0], rec, 1.0);
    double w_max = 0;
    for (double v : omega.values) w_max = std::max(w_max, std::abs(v));
    FieldGrid a = omega, c = omega;
    a.t = 0.05;
    c.t = 0.15;
    const ResidualReport rr = pde_residual(a, omega, c, FieldGrid(rec, 0.1, 2, "velocity"), 0.5);
    const bool zero_ok = w_max == 0.0 && rr.l2_norm == 0.0;

    record("criterion 6: trivial limits (b* = 0 in 1 iter, Brownian variance 2 nu t, zero fields)",
           picard_ok && brownian_ok && zero_ok,
           "var=" + fmt(var) + " expect=" + fmt(expect) + " omega_max=" + fmt(w_max));
}

void criterion_7_determinism() {
    Timer timer("criterion 7");
    const std::string dir = work_dir("c7");

    // solve-drift determinism on the contraction configuration
    RunConfig probe = lamb_oseen_config(0.2, 3.0, 777);
    const StructureConstants sc = probe.structure_constants();
    const double T = std::min(sc.T_L_derived, 0.2);
    write_text_file(dir + "/solve.cfg", canonical_config(lamb_oseen_config(T, 3.0, 777)));

    bool ok = true;
    std::string detail;
    for (const char* run : {"a", "b"}) {
        const int code = run_cli("solve-drift --config " + dir + "/solve.cfg --out " + dir + "/" + run +
                                 " --threads 2");
        if (code != 0) {
            ok = false;
            detail = "solve exit " + std::to_string(code);
        }
    }
    if (ok) {
        ok = sha256_file_hex(dir + "/a/drift_field.ndjson") == sha256_file_hex(dir + "/b/drift_field.ndjson");
        detail = "drift_field " + std::string(ok ? "identical" : "differs");
        // diagnostics CSV identical apart from the wall-clock column
        auto strip_seconds = [](const std::string& path) {
            std::ifstream in(path);
            std::string line, out;
            while (std::getline(in, line)) {
                const auto pos = line.rfind(',');
                out += line.substr(0, pos) + "\n";
            }
            return out;
        };
        const bool csv_ok = strip_seconds(dir + "/a/picard_diagnostics.csv") ==
                            strip_seconds(dir + "/b/picard_diagnostics.csv");
        ok = ok && csv_ok;
        if (!csv_ok) detail += ", diagnostics differ";
    }

    // simulate determinism (zero vorticity config, both interface modes)
    std::ostringstream zcfg;
    zcfg << "[kernel]\ndimension = 2\nname = biot_savart_2d\ndelta = 0.0625\n";
    zcfg << "[omega0]\ntype = zero\n";
    zcfg << "[grids]\nbox_radius = 3.0\nh = 0.25\nT = 0.1\ndt_grid = 0.025\n"
            "snapshot_times = 0.05,0.075,0.1\n";
    zcfg << "[solver]\nnu = 0.5\ndt = 0.005\nepsilon = 0.5\nn_copies = 1000\npaths_per_point = 50\nseed = 70\n";
    zcfg << "[tolerances]\ntol_fp = 0.005\nmax_iter = 8\n";
    write_text_file(dir + "/zero.cfg", zcfg.str());
    {
        const int code = run_cli("solve-drift --config " + dir + "/zero.cfg --out " + dir + "/zdrift");
        if (code != 0) {
            ok = false;
            detail += " zero-solve exit " + std::to_string(code);
        }
    }
    for (const char* mode : {"meanfield", "empirical"}) {
        for (const char* run : {"s1", "s2"}) {
            const int code = run_cli("simulate --config " + dir + "/zero.cfg --mode " + mode + " --drift " +
                                     dir + "/zdrift/drift_field.ndjson --out " + dir + "/" + mode + run +
                                     " --threads 2");
            if (code != 0) {
                ok = false;
                detail += std::string(" simulate(") + mode + ") exit " + std::to_string(code);
            }
        }
        for (const char* file : {"snapshots.csv", "omega_fields.ndjson", "velocity_fields.ndjson",
                                 "pde_residual.ndjson"}) {
            const bool same = sha256_file_hex(dir + "/" + mode + "s1/" + file) ==
                              sha256_file_hex(dir + "/" + mode + "s2/" + file);
            ok = ok && same;
            if (!same) detail += std::string(" ") + mode + "/" + file + " differs";
        }
    }
    record("criterion 7: byte-identical outputs for identical (config, seed, threads)", ok, detail);
}

void criterion_8_mean_field_vs_empirical() {
    Timer timer("criterion 8");
    SingularKernel kernel = make_builtin_kernel(BuiltinKernel::biot_savart_2d, 2);
    kernel.delta = 0.0625;  // eps / 4
    const double nu = 0.5, T = 0.1, dt = 0.0025;
    const Lattice vortex = single_point_lattice(Vec(0.0, 0.0), Vec(1.0, 0.0), 0.25);

    // mean-field reference: the exact self-similar drift of a point vortex,
    // sampled at slice midpoints on a fine grid
    const LambOseen lo{1.0, 0.0, nu};
    const double dt_grid = 0.005;
    const int nt = static_cast<int>(std::llround(T / dt_grid)) + 1;
    const DriftField drift = DriftField::from_function(
        GridSpec(2, 3.0, 0.1), dt_grid, nt,
        [&](const Vec& x, double t) { return lo.velocity(x, std::min(t + 0.5 * dt_grid, T)); });

    auto run_mode = [&](ParticleMode mode, int n_copies, uint64_t seed) {
        ParticleRunConfig pc;
        pc.epsilon = 0.25;
        pc.n_copies = n_copies;
        pc.nu = nu;
        pc.dt = dt;
        pc.T = T;
        pc.seed = seed;
        pc.mode = mode;
        pc.mean_field_drift = &drift;
        pc.snapshot_times = {T};
        return run_particle_system_from_lattice(kernel, vortex, 1.0, pc);
    };

    const GridSpec grid(2, 2.5, 0.25);
    const auto reference = run_mode(ParticleMode::mean_field, 128000, 801);
    const FieldGrid u_ref = recover_velocity_from_particles(reference[0], kernel, grid);

    std::vector<double> diffs;
    for (int n : {2000, 8000, 32000}) {
        const auto emp = run_mode(ParticleMode::empirical_coupled, n, 800 + n);
        const FieldGrid u_emp = recover_velocity_from_particles(emp[0], kernel, grid);
        double num = 0;
        std::size_t cnt = 0;
        for (std::size_t node = 0; node < grid.node_count(); ++node) {
            const double r = grid.node(node).norm();
            if (r < 0.5 || r > 2.0) continue;
            num += (u_emp.vec_at(node) - u_ref.vec_at(node)).norm2();
            ++cnt;
        }
        diffs.push_back(std::sqrt(num / cnt));
    }
    const bool ok = diffs[0] > diffs[1] && diffs[1] > diffs[2];
    record("criterion 8: empirical system approaches the mean-field run (monotone in N)", ok,
           "diffs=" + fmt(diffs[0]) + "," + fmt(diffs[1]) + "," + fmt(diffs[2]));
}

}  // namespace

int main() {
    std::printf("acceptance suite\n================\n");
    auto guarded = [](const char* name, auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            record(std::string(name) + " aborted", false, e.what());
        }
    };
    guarded("criterion 1", criterion_1_constants);
    guarded("criterion 2", criterion_2_bound_audit);
    guarded("criteria 3+4", [] {
        const PicardArtifacts art = criterion_3_contraction();
        criterion_4_fixed_point_vs_exact(art);
    });
    guarded("criterion 6", criterion_6_trivial_limits);
    guarded("criterion 7", criterion_7_determinism);
    guarded("criterion 5", criterion_5_pde_recovery);
    guarded("criterion 8", criterion_8_mean_field_vs_empirical);
    std::printf("================\n%s (%d failures)\n", g_failures == 0 ? "ALL CRITERIA PASS" : "FAILURES",
                g_failures);
    return g_failures;
}
