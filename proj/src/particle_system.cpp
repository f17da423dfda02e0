#include "mvsde/particle_system.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mvsde/io_util.hpp"
#include "mvsde/parallel.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/sde_engine.hpp"

namespace mvsde {

namespace {

// drift on one particle from the running empirical measure:
// (1/N) sum over sources of K(x - X_source) . w_source, self-term and
// near-singular terms dropped; sources carry nonzero vorticity only
Vec empirical_drift_at(const SingularKernel& kernel, const std::vector<Vec>& positions,
                       const std::vector<Vec>& weights_per_particle,
                       const std::vector<std::size_t>& sources, std::size_t self, const Vec& x,
                       double inv_copies, double delta) {
    Vec acc = Vec::zero(kernel.d);
    for (std::size_t p : sources) {
        if (p == self) continue;
        const Vec z = x - positions[p];
        if (z.norm() < delta) continue;
        acc += kernel_apply(kernel, z, weights_per_particle[p]);
    }
    return acc * inv_copies;
}

std::vector<std::size_t> active_sources(const std::vector<Vec>& weights) {
    std::vector<std::size_t> src;
    for (std::size_t p = 0; p < weights.size(); ++p)
        if (weights[p].norm() > 0) src.push_back(p);
    return src;
}

}  // namespace

std::vector<ParticleSystemState> run_particle_system_from_lattice(const SingularKernel& kernel,
                                                                  const Lattice& lattice,
                                                                  double support_radius,
                                                                  const ParticleRunConfig& cfg) {
    if (cfg.n_copies < 1) throw std::invalid_argument("run_particle_system: n_copies must be >= 1");
    if (cfg.dt <= 0 || cfg.T < 0) throw std::invalid_argument("run_particle_system: bad time parameters");
    if (cfg.mode == ParticleMode::mean_field && cfg.mean_field_drift == nullptr)
        throw std::invalid_argument("run_particle_system: mean_field mode requires a drift field");
    const int d = kernel.d;
    const std::size_t n_lat = lattice.points.size();
    const std::size_t n_particles = n_lat * static_cast<std::size_t>(cfg.n_copies);

    ParticleSystemState state;
    state.lattice = lattice;
    state.n_copies = cfg.n_copies;
    state.nu = cfg.nu;
    state.t = 0;
    state.seed = cfg.seed;
    state.mode = cfg.mode;
    state.positions.resize(n_particles);
    for (int n = 0; n < cfg.n_copies; ++n)
        for (std::size_t k = 0; k < n_lat; ++k)
            state.positions[static_cast<std::size_t>(n) * n_lat + k] = lattice.points[k];

    // per-particle omega weights, aligned with the position layout
    std::vector<Vec> weights(n_particles);
    for (int n = 0; n < cfg.n_copies; ++n)
        for (std::size_t k = 0; k < n_lat; ++k)
            weights[static_cast<std::size_t>(n) * n_lat + k] = lattice.weights[k];

    std::vector<std::size_t> snap_steps;
    for (double t : cfg.snapshot_times)
        snap_steps.push_back(static_cast<std::size_t>(std::llround(t / cfg.dt)));
    const std::size_t n_steps = static_cast<std::size_t>(std::llround(cfg.T / cfg.dt));

    std::vector<ParticleSystemState> snapshots;
    auto maybe_snapshot = [&](std::size_t step) {
        for (std::size_t i = 0; i < snap_steps.size(); ++i)
            if (snap_steps[i] == step) {
                ParticleSystemState s = state;
                s.t = static_cast<double>(step) * cfg.dt;
                snapshots.push_back(std::move(s));
            }
    };
    maybe_snapshot(0);

    const double sigma = std::sqrt(2.0 * cfg.nu * cfg.dt);
    const double inv_copies = 1.0 / static_cast<double>(cfg.n_copies);
    const double blowup = cfg.blowup_radius_factor * std::max(support_radius, 1.0);
    const std::vector<std::size_t> sources = active_sources(weights);
    const bool fast_bs2d =
        cfg.mode == ParticleMode::empirical_coupled && kernel.builtin == BuiltinKernel::biot_savart_2d && d == 2;
    std::vector<double> sx(fast_bs2d ? sources.size() : 0), sy(sx.size()), coef(sx.size());
    if (fast_bs2d)
        for (std::size_t i = 0; i < sources.size(); ++i)
            coef[i] = kernel.C0 * weights[sources[i]][0];
    const double delta2 = kernel.delta * kernel.delta;
    std::vector<Vec> next(n_particles);

    for (std::size_t step = 0; step < n_steps; ++step) {
        const double t = static_cast<double>(step) * cfg.dt;
        if (fast_bs2d)
            for (std::size_t i = 0; i < sources.size(); ++i) {
                sx[i] = state.positions[sources[i]][0];
                sy[i] = state.positions[sources[i]][1];
            }
        // Jacobi update: drift from the frozen position snapshot of this step
        parallel_for(n_particles, cfg.threads, [&](std::size_t p) {
            const Vec& x = state.positions[p];
            Vec drift(d);
            if (cfg.mode == ParticleMode::mean_field) {
                drift = cfg.mean_field_drift->eval(x, t);
            } else if (fast_bs2d) {
                const double x0 = x[0], x1 = x[1];
                double acc0 = 0, acc1 = 0;
                for (std::size_t i = 0; i < sources.size(); ++i) {
                    if (sources[i] == p) continue;
                    const double dx = x0 - sx[i];
                    const double dy = x1 - sy[i];
                    const double r2 = dx * dx + dy * dy;
                    if (r2 < delta2) continue;
                    const double c = coef[i] / r2;
                    acc0 -= c * dy;
                    acc1 += c * dx;
                }
                drift[0] = acc0 * inv_copies;
                drift[1] = acc1 * inv_copies;
            } else {
                drift = empirical_drift_at(kernel, state.positions, weights, sources, p, x, inv_copies,
                                           kernel.delta);
            }
            const uint64_t key = substream(cfg.seed, p);
            next[p] = x + drift * cfg.dt + brownian_increment(d, key, step, sigma);
        });
        state.positions.swap(next);
        state.t = static_cast<double>(step + 1) * cfg.dt;

        for (const Vec& x : state.positions) {
            if (!x.finite() || x.norm() > blowup)
                throw BlowUpError("particle blow-up at t = " + std::to_string(state.t));
        }
        maybe_snapshot(step + 1);
    }
    return snapshots;
}

std::vector<ParticleSystemState> run_particle_system(const SingularKernel& kernel,
                                                     const VorticityField& omega0,
                                                     const ParticleRunConfig& cfg) {
    if (kernel.d != omega0.d) throw std::invalid_argument("run_particle_system: dimension mismatch");
    const Lattice lattice = build_lattice(omega0, cfg.epsilon);
    return run_particle_system_from_lattice(kernel, lattice, omega0.support_radius, cfg);
}

Vec empirical_mean_drift(const SingularKernel& kernel, const ParticleSystemState& state, int threads) {
    const std::size_t n_lat = state.lattice.points.size();
    const std::size_t n = state.n_particles();
    std::vector<Vec> weights(n);
    for (int c = 0; c < state.n_copies; ++c)
        for (std::size_t k = 0; k < n_lat; ++k)
            weights[static_cast<std::size_t>(c) * n_lat + k] = state.lattice.weights[k];
    const double inv_copies = 1.0 / static_cast<double>(state.n_copies);
    const std::vector<std::size_t> sources = active_sources(weights);

    std::vector<Vec> drifts(n);
    parallel_for(n, threads, [&](std::size_t p) {
        drifts[p] = empirical_drift_at(kernel, state.positions, weights, sources, p, state.positions[p],
                                       inv_copies, kernel.delta);
    });
    // omega-weighted mean, fixed summation order
    Vec acc = Vec::zero(kernel.d);
    double wsum = 0;
    for (std::size_t p = 0; p < n; ++p) {
        const double w = weights[p].norm();
        acc += drifts[p] * weights[p][0];  // signed scalar weight (component 0 in 2d)
        wsum += std::abs(w);
    }
    return wsum > 0 ? acc * (1.0 / wsum) : acc;
}

void write_snapshots_csv(const std::vector<ParticleSystemState>& states, const std::string& path) {
    if (states.empty()) throw std::invalid_argument("write_snapshots_csv: no snapshots");
    const int d = states.front().lattice.points.empty() ? 0 : states.front().lattice.points.front().d;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "t,copy";
    for (int i = 0; i < d; ++i) out << ",k" << (i + 1);
    for (int i = 0; i < d; ++i) out << ",x" << (i + 1);
    out << "\n";
    for (const auto& s : states) {
        const std::size_t n_lat = s.lattice.points.size();
        for (int c = 0; c < s.n_copies; ++c)
            for (std::size_t k = 0; k < n_lat; ++k) {
                out << fmt17(s.t) << ',' << c;
                for (int i = 0; i < d; ++i) out << ',' << s.lattice.multi_index[k][i];
                const Vec& x = s.position(c, k);
                for (int i = 0; i < d; ++i) out << ',' << fmt17(x[i]);
                out << "\n";
            }
    }
}

}  // namespace mvsde
