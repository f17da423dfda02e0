#include "mvsde/sde_engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "mvsde/io_util.hpp"
#include "mvsde/parallel.hpp"
#include "mvsde/rng.hpp"

namespace mvsde {

Vec brownian_increment(int d, uint64_t path_key, std::size_t step, double std_dev) {
    Vec dz(d);
    const int n_blocks = (d + 1) / 2;
    for (int blk = 0; blk < n_blocks; ++blk) {
        const uint64_t counter = static_cast<uint64_t>(step) * static_cast<uint64_t>(n_blocks) + blk;
        const NormalPair p = philox_normals(path_key, counter);
        dz[2 * blk] = std_dev * p.z0;
        if (2 * blk + 1 < d) dz[2 * blk + 1] = std_dev * p.z1;
    }
    return dz;
}

PathBatch simulate_paths(const DriftField& b, std::vector<Vec> starts, double nu, double dt,
                         std::vector<double> observe_times, uint64_t seed, int n_paths_per_start,
                         int threads) {
    if (dt <= 0) throw std::invalid_argument("simulate_paths: dt must be positive");
    if (nu <= 0) throw std::invalid_argument("simulate_paths: nu must be positive");
    if (starts.empty() || n_paths_per_start < 1)
        throw std::invalid_argument("simulate_paths: need at least one start and one path");
    const double T = b.horizon();
    for (double t : observe_times)
        if (t < 0 || t > T + 1e-12)
            throw std::invalid_argument("simulate_paths: observe time beyond drift horizon");

    PathBatch batch;
    batch.d = b.grid.d;
    batch.starts = std::move(starts);
    batch.n_paths_per_start = n_paths_per_start;
    batch.nu = nu;
    batch.dt = dt;
    batch.seed = seed;
    batch.observe_times.reserve(observe_times.size());
    std::vector<std::size_t> obs_steps;
    std::size_t max_step = 0;
    for (double t : observe_times) {
        const std::size_t k = static_cast<std::size_t>(std::llround(t / dt));
        obs_steps.push_back(k);
        batch.observe_times.push_back(static_cast<double>(k) * dt);
        max_step = std::max(max_step, k);
    }
    for (std::size_t i = 1; i < obs_steps.size(); ++i)
        if (obs_steps[i] < obs_steps[i - 1])
            throw std::invalid_argument("simulate_paths: observe_times must be nondecreasing");
    const int d = batch.d;
    const double sigma = std::sqrt(2.0 * nu * dt);
    const std::size_t n_obs = obs_steps.size();
    batch.positions.assign(batch.n_paths() * n_obs, Vec::zero(d));

    parallel_for(batch.n_paths(), threads, [&](std::size_t pid) {
        const std::size_t s = pid / static_cast<std::size_t>(n_paths_per_start);
        const uint64_t key = substream(seed, pid);
        Vec x = batch.starts[s];
        std::size_t step = 0;
        for (std::size_t o = 0; o < n_obs; ++o) {
            const std::size_t target = obs_steps[o];
            while (step < target) {
                const double t = static_cast<double>(step) * dt;
                x += b.eval(x, t) * dt + brownian_increment(d, key, step, sigma);
                ++step;
            }
            batch.positions[pid * n_obs + o] = x;
        }
    });
    return batch;
}

CMWeight cameron_martin_weight(std::span<const Vec> increments, double dt, const DriftField& b, double tau,
                               const Vec& x, double t) {
    CMWeight w;
    const std::size_t n_steps = static_cast<std::size_t>(std::llround((t - tau) / dt));
    if (n_steps > increments.size())
        throw std::invalid_argument("cameron_martin_weight: path does not cover [tau, t]");
    Vec pos = x;  // x + B_{t_k} - B_tau
    double stoch = 0, quad = 0;
    for (std::size_t k = 0; k < n_steps; ++k) {
        const double tk = tau + static_cast<double>(k) * dt;
        const Vec bv = b.eval(pos, tk);
        stoch += bv.dot(increments[k]);
        quad += bv.norm2() * dt;
        pos += increments[k];
    }
    w.stochastic_part = stoch;
    w.quadratic_part = quad;
    w.log_value = stoch - 0.5 * quad;
    w.value = std::exp(w.log_value);
    return w;
}

MCEstimate feynman_kac_expectation(const std::function<double(const Vec&)>& f, const DriftField& b,
                                   double tau, const Vec& x, double t, int n_paths, double dt,
                                   uint64_t seed, int threads) {
    if (n_paths < 100) throw std::invalid_argument("feynman_kac_expectation: n_paths must be >= 100");
    if (t <= tau) throw std::invalid_argument("feynman_kac_expectation: need t > tau");
    const int d = b.grid.d;
    const std::size_t n_steps = static_cast<std::size_t>(std::llround((t - tau) / dt));
    const double dt_eff = (t - tau) / static_cast<double>(n_steps);
    const double sig = std::sqrt(dt_eff);

    const std::size_t n = static_cast<std::size_t>(n_paths);
    std::vector<double> vals(n);
    parallel_for(n, threads, [&](std::size_t pid) {
        const uint64_t key = substream(seed, pid);
        Vec pos = x;
        double stoch = 0, quad = 0;
        for (std::size_t k = 0; k < n_steps; ++k) {
            const double tk = tau + static_cast<double>(k) * dt_eff;
            const Vec bv = b.eval(pos, tk);
            const Vec db = brownian_increment(d, key, k, sig);
            stoch += bv.dot(db);
            quad += bv.norm2() * dt_eff;
            pos += db;
        }
        vals[pid] = std::exp(stoch - 0.5 * quad) * f(pos);
    });
    const double sum = chunked_sum(n, threads, [&](std::size_t i) { return vals[i]; });
    const double mean = sum / static_cast<double>(n);
    const double ss = chunked_sum(n, threads, [&](std::size_t i) { return (vals[i] - mean) * (vals[i] - mean); });
    MCEstimate e;
    e.estimate = mean;
    e.std_error = std::sqrt(ss / (static_cast<double>(n) - 1.0) / static_cast<double>(n));
    return e;
}

DensityGrid density_kde(const PathBatch& batch, double observe_time, const GridSpec& grid,
                        double bandwidth_mult, int threads) {
    // locate the observation slot
    std::size_t obs = batch.observe_times.size();
    for (std::size_t i = 0; i < batch.observe_times.size(); ++i)
        if (std::abs(batch.observe_times[i] - observe_time) < 0.5 * batch.dt) obs = i;
    if (obs == batch.observe_times.size())
        throw std::invalid_argument("density_kde: observation time not recorded in batch");
    const std::size_t n = batch.n_paths();
    if (n < 1000) throw std::invalid_argument("density_kde: need at least 1000 paths");
    const int d = batch.d;
    const std::size_t n_obs = batch.observe_times.size();

    // per-coordinate sample std
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
        const Vec& x = batch.positions[p * n_obs + obs];
        for (int i = 0; i < d; ++i) mean[i] += x[i];
    }
    for (int i = 0; i < d; ++i) mean[i] /= static_cast<double>(n);
    for (std::size_t p = 0; p < n; ++p) {
        const Vec& x = batch.positions[p * n_obs + obs];
        for (int i = 0; i < d; ++i) var[i] += (x[i] - mean[i]) * (x[i] - mean[i]);
    }
    DensityGrid out;
    out.grid = grid;
    out.t = batch.observe_times[obs];
    out.bandwidth.resize(d);
    const double rate = std::pow(static_cast<double>(n), -1.0 / (d + 4.0));
    for (int i = 0; i < d; ++i) {
        const double sd = std::sqrt(var[i] / (static_cast<double>(n) - 1.0));
        if (sd <= 0) throw std::invalid_argument("density_kde: degenerate (zero-variance) samples");
        out.bandwidth[i] = bandwidth_mult * sd * rate;
    }

    const std::size_t n_nodes = grid.node_count();
    out.p.assign(n_nodes, 0.0);
    double norm = 1.0 / static_cast<double>(n);
    for (int i = 0; i < d; ++i) norm /= out.bandwidth[i] * std::sqrt(2.0 * std::numbers::pi);
    parallel_for(n_nodes, threads, [&](std::size_t node) {
        const Vec xg = grid.node(node);
        double acc = 0;
        for (std::size_t p = 0; p < n; ++p) {
            const Vec& xp = batch.positions[p * n_obs + obs];
            double e = 0;
            for (int i = 0; i < d; ++i) {
                const double z = (xg[i] - xp[i]) / out.bandwidth[i];
                e += z * z;
            }
            acc += std::exp(-0.5 * e);
        }
        out.p[node] = acc * norm;
    });

    out.mass_on_grid = 0;
    for (double v : out.p) out.mass_on_grid += v;
    out.mass_on_grid *= grid.cell_volume();
    return out;
}

namespace {

DriftField rescale_field(const DriftField& b, double space_scale, double value_scale) {
    const GridSpec g(b.grid.d, b.grid.half_width * space_scale, b.grid.h * space_scale);
    DriftField out(g, b.dt_grid, b.n_times);
    for (std::size_t i = 0; i < b.values.size(); ++i) out.values[i] = b.values[i] * value_scale;
    out.recompute_sup_norm();
    return out;
}

}  // namespace

DriftField rescale_to_unit_diffusion(const DriftField& b, double nu) {
    if (nu <= 0) throw std::invalid_argument("rescale_to_unit_diffusion: nu must be positive");
    const double s = std::sqrt(2.0 * nu);
    return rescale_field(b, 1.0 / s, 1.0 / s);
}

DriftField rescale_from_unit_diffusion(const DriftField& b_unit, double nu) {
    if (nu <= 0) throw std::invalid_argument("rescale_from_unit_diffusion: nu must be positive");
    const double s = std::sqrt(2.0 * nu);
    return rescale_field(b_unit, s, s);
}

void write_pathbatch_csv(const PathBatch& batch, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "path_id,start_id,t";
    for (int i = 0; i < batch.d; ++i) out << ",x" << (i + 1);
    out << "\n";
    const std::size_t n_obs = batch.observe_times.size();
    for (std::size_t p = 0; p < batch.n_paths(); ++p) {
        const std::size_t s = p / static_cast<std::size_t>(batch.n_paths_per_start);
        for (std::size_t o = 0; o < n_obs; ++o) {
            out << p << ',' << s << ',' << fmt17(batch.observe_times[o]);
            const Vec& x = batch.positions[p * n_obs + o];
            for (int i = 0; i < batch.d; ++i) out << ',' << fmt17(x[i]);
            out << "\n";
        }
    }
}

void write_density_ndjson(const DensityGrid& density, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    const std::size_t n_nodes = density.grid.node_count();
    for (std::size_t node = 0; node < n_nodes; ++node) {
        const Vec x = density.grid.node(node);
        out << "{\"t\":" << fmt17(density.t) << ",\"x\":[";
        for (int i = 0; i < density.grid.d; ++i) {
            if (i) out << ',';
            out << fmt17(x[i]);
        }
        out << "],\"p\":" << fmt17(density.p[node]) << "}\n";
    }
}

}  // namespace mvsde
