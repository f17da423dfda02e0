#include "mvsde/kdiamond.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mvsde/io_util.hpp"
#include "mvsde/parallel.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/sde_engine.hpp"

namespace mvsde {

namespace {

struct SourceSet {
    // per time slice: positions and (for the CM estimator) weights, laid out
    // [time][source]; source index = lattice_point * M + sample
    std::vector<Vec> positions;
    std::vector<double> cm_weights;  // empty in direct mode
    std::vector<Vec> lattice_weight_over_m;  // omega weight / M per source
    std::size_t n_sources = 0;
    int n_times = 0;

    const Vec& pos(int j, std::size_t s) const { return positions[static_cast<std::size_t>(j) * n_sources + s]; }
    double weight(int j, std::size_t s) const {
        return cm_weights.empty() ? 1.0 : cm_weights[static_cast<std::size_t>(j) * n_sources + s];
    }
};

SourceSet simulate_sources(const DriftField& b, const VorticityField& omega0, const Lattice& lattice,
                           double nu, const DiamondConfig& cfg) {
    SourceSet src;
    const int d = omega0.d;
    const int M = cfg.paths_per_point;
    const int n_times = b.n_times;
    const double dt_grid = b.dt_grid;

    // keep only lattice points carrying vorticity
    std::vector<std::size_t> active;
    for (std::size_t k = 0; k < lattice.points.size(); ++k)
        if (lattice.weights[k].norm() > 0) active.push_back(k);

    src.n_times = n_times;
    src.n_sources = active.size() * static_cast<std::size_t>(M);
    src.positions.assign(static_cast<std::size_t>(n_times) * src.n_sources, Vec::zero(d));
    src.lattice_weight_over_m.resize(src.n_sources, Vec::zero(d));
    const bool cm = cfg.estimator == DiamondEstimator::cameron_martin_weighted;
    if (cm) src.cm_weights.assign(static_cast<std::size_t>(n_times) * src.n_sources, 1.0);

    const std::size_t steps_per_slice =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(dt_grid / cfg.dt)));
    const double dt_eff = dt_grid / static_cast<double>(steps_per_slice);
    const double sigma = std::sqrt(2.0 * nu * dt_eff);

    parallel_for(src.n_sources, cfg.threads, [&](std::size_t s) {
        const std::size_t k = active[s / static_cast<std::size_t>(M)];
        src.lattice_weight_over_m[s] = lattice.weights[k] * (1.0 / static_cast<double>(M));
        const uint64_t key = substream(cfg.seed, (static_cast<uint64_t>(k) << 24) ^ (s % M));
        Vec x = lattice.points[k];
        src.positions[s] = x;  // slice j = 0 holds the start point (delta law)
        double stoch = 0, quad = 0;
        std::size_t step = 0;
        for (int j = 1; j < n_times; ++j) {
            for (std::size_t q = 0; q < steps_per_slice; ++q, ++step) {
                const double t = static_cast<double>(step) * dt_eff;
                const Vec db = brownian_increment(d, key, step, sigma);
                if (cm) {
                    // Girsanov weight for dX = sqrt(2 nu) dB~ reweighted to the
                    // L_b diffusion: dN = b.dX/(2 nu) - |b|^2 dt/(2 nu) / 2
                    const Vec bv = b.eval(x, t);
                    stoch += bv.dot(db) / (2.0 * nu);
                    quad += bv.norm2() * dt_eff / (2.0 * nu);
                    x += db;
                } else {
                    x += b.eval(x, t) * dt_eff + db;
                }
            }
            src.positions[static_cast<std::size_t>(j) * src.n_sources + s] = x;
            if (cm) src.cm_weights[static_cast<std::size_t>(j) * src.n_sources + s] = std::exp(stoch - 0.5 * quad);
        }
    });
    return src;
}

}  // namespace

DriftField apply_K_diamond(const DriftField& b, const SingularKernel& kernel, const VorticityField& omega0,
                           double nu, const DiamondConfig& cfg, DiamondDiagnostics* diag) {
    if (kernel.d != omega0.d || kernel.d != b.grid.d)
        throw std::invalid_argument("apply_K_diamond: dimension mismatch between kernel, omega0 and grid");
    if (cfg.paths_per_point < 1) throw std::invalid_argument("apply_K_diamond: paths_per_point must be >= 1");

    const Lattice lattice = build_lattice(omega0, cfg.epsilon);
    const SourceSet src = simulate_sources(b, omega0, lattice, nu, cfg);

    DriftField out(b.grid, b.dt_grid, b.n_times);
    const std::size_t n_nodes = b.grid.node_count();
    const double delta = kernel.delta;
    std::atomic<std::size_t> dropped{0};
    const bool fast_bs2d = kernel.builtin == BuiltinKernel::biot_savart_2d && b.grid.d == 2;

    std::vector<double> sx, sy, coef;
    for (int j = 0; j < b.n_times; ++j) {
        if (fast_bs2d) {
            // flat per-slice source arrays keep the N-body loop scalar
            sx.resize(src.n_sources);
            sy.resize(src.n_sources);
            coef.resize(src.n_sources);
            for (std::size_t s = 0; s < src.n_sources; ++s) {
                const Vec& p = src.pos(j, s);
                sx[s] = p[0];
                sy[s] = p[1];
                coef[s] = kernel.C0 * src.lattice_weight_over_m[s][0] * src.weight(j, s);
            }
            const double delta2 = delta * delta;
            parallel_for(n_nodes, cfg.threads, [&](std::size_t node) {
                const Vec x = b.grid.node(node);
                const double x0 = x[0], x1 = x[1];
                double acc0 = 0, acc1 = 0;
                std::size_t local_dropped = 0;
                for (std::size_t s = 0; s < src.n_sources; ++s) {
                    const double dx = x0 - sx[s];
                    const double dy = x1 - sy[s];
                    const double r2 = dx * dx + dy * dy;
                    if (r2 < delta2) {
                        ++local_dropped;
                        continue;
                    }
                    const double c = coef[s] / r2;
                    acc0 -= c * dy;
                    acc1 += c * dx;
                }
                Vec acc(acc0, acc1);
                out.set_node_value(j, node, acc);
                if (local_dropped) dropped.fetch_add(local_dropped, std::memory_order_relaxed);
            });
            continue;
        }
        parallel_for(n_nodes, cfg.threads, [&](std::size_t node) {
            const Vec x = b.grid.node(node);
            Vec acc = Vec::zero(b.grid.d);
            std::size_t local_dropped = 0;
            for (std::size_t s = 0; s < src.n_sources; ++s) {
                const Vec z = x - src.pos(j, s);
                if (z.norm() < delta) {
                    ++local_dropped;
                    continue;
                }
                const double w = src.weight(j, s);
                acc += kernel_apply(kernel, z, src.lattice_weight_over_m[s]) * w;
            }
            out.set_node_value(j, node, acc);
            if (local_dropped) dropped.fetch_add(local_dropped, std::memory_order_relaxed);
        });
    }
    out.recompute_sup_norm();

    if (diag) {
        const double total = static_cast<double>(src.n_sources) * static_cast<double>(n_nodes) *
                             static_cast<double>(b.n_times);
        diag->dropped_fraction = total > 0 ? static_cast<double>(dropped.load()) / total : 0.0;
        diag->singular_warning = diag->dropped_fraction > 0.01;
    }
    return out;
}

PicardResult picard_solve(const SingularKernel& kernel, const VorticityField& omega0, double nu,
                          const GridSpec& grid, double T, double dt_grid, const DiamondConfig& cfg,
                          double tol_fp, int max_iter, const StructureConstants* sc) {
    if (T <= 0 || dt_grid <= 0) throw std::invalid_argument("picard_solve: T and dt_grid must be positive");
    const int n_times = static_cast<int>(std::llround(T / dt_grid)) + 1;

    PicardResult res;
    res.state.beyond_guaranteed_horizon = sc != nullptr && T > sc->T_L_derived;

    DriftField current = DriftField::zero(grid, dt_grid, n_times);

    // noise-floor probe: the first application under an independent seed
    DiamondConfig alt = cfg;
    alt.seed = mix64(cfg.seed ^ 0x6e6f697365ull);
    const DriftField probe = apply_K_diamond(current, kernel, omega0, nu, alt);

    double prev_residual = -1;
    for (int n = 0; n < max_iter; ++n) {
        const auto t_start = std::chrono::steady_clock::now();
        DriftField next = apply_K_diamond(current, kernel, omega0, nu, cfg);
        const auto t_end = std::chrono::steady_clock::now();
        res.state.seconds.push_back(std::chrono::duration<double>(t_end - t_start).count());
        if (n == 0) res.state.noise_floor = grid_sup_distance(next, probe);

        if (!next.finite()) {
            res.state.status = PicardStatus::nan_detected;
            res.state.n_iterations = n + 1;
            res.b = std::move(next);
            return res;
        }
        const double r = grid_sup_distance(next, current);
        res.state.residuals.push_back(r);
        res.state.sup_norms.push_back(next.sup_norm);
        if (prev_residual > 10.0 * res.state.noise_floor && prev_residual > 0) {
            res.state.ratios.push_back(r / prev_residual);
            res.state.ratio_iteration.push_back(n);
        }
        prev_residual = r;
        current = next;
        res.state.n_iterations = n + 1;
        if (r <= tol_fp) {
            res.state.status = PicardStatus::converged;
            break;
        }
    }

    if (res.state.status == PicardStatus::converged) {
        DiamondConfig fresh = cfg;
        fresh.seed = mix64(cfg.seed ^ 0x6365727469ull);
        DiamondDiagnostics diag;
        const DriftField check = apply_K_diamond(current, kernel, omega0, nu, fresh, &diag);
        res.state.certification_residual = grid_sup_distance(check, current);
        res.state.dropped_fraction = diag.dropped_fraction;
        res.state.singular_warning = diag.singular_warning;
    }
    res.b = std::move(current);
    return res;
}

std::vector<ContractionRow> contraction_diagnostics(const SingularKernel& kernel,
                                                    const VorticityField& omega0, double nu,
                                                    const DriftField& b, const DriftField& b_tilde,
                                                    const StructureConstants& sc, const DiamondConfig& cfg) {
    if (grid_sup_distance(b, b_tilde) == 0)
        throw std::invalid_argument("contraction_diagnostics: drifts are identical");
    const DriftField kb = apply_K_diamond(b, kernel, omega0, nu, cfg);
    const DriftField kbt = apply_K_diamond(b_tilde, kernel, omega0, nu, cfg);

    std::vector<ContractionRow> rows;
    const std::size_t n_nodes = b.grid.node_count();
    double den = 0;  // |b - b~|_sup over [0, t]
    for (int j = 0; j < b.n_times; ++j) {
        for (std::size_t n = 0; n < n_nodes; ++n)
            den = std::max(den, (b.node_value(j, n) - b_tilde.node_value(j, n)).norm());
        double num = 0;
        for (std::size_t n = 0; n < n_nodes; ++n)
            num = std::max(num, (kb.node_value(j, n) - kbt.node_value(j, n)).norm());
        ContractionRow row;
        row.t = b.time_of(j);
        row.bound = (row.t + std::sqrt(row.t)) * sc.C_L;
        row.empirical_ratio = den > 0 ? num / den : 0.0;
        row.satisfied = num <= row.bound * den;
        rows.push_back(row);
    }
    return rows;
}

namespace {

HoelderFit hoelderfit_from_points(const std::vector<double>& log_lag, const std::vector<double>& log_inc) {
    HoelderFit fit;
    fit.n_lags = static_cast<int>(log_lag.size());
    const std::size_t n = log_lag.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += log_lag[i];
        sy += log_inc[i];
        sxx += log_lag[i] * log_lag[i];
        sxy += log_lag[i] * log_inc[i];
    }
    const double denom = n * sxx - sx * sx;
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / static_cast<double>(n);
    fit.raw_slope = slope;
    if (slope > 1.0) {
        fit.exponent = 1.0;
        double c = 0;
        for (std::size_t i = 0; i < n; ++i) c = std::max(c, std::exp(log_inc[i] - log_lag[i]));
        fit.constant = c;
    } else {
        fit.exponent = slope;
        fit.constant = std::exp(intercept);
    }
    return fit;
}

}  // namespace

HoelderFit hoelder_modulus(const DriftField& b, const HoelderWindow& window,
                           const std::vector<int>& space_lags, const std::vector<int>& time_lags) {
    if (space_lags.size() + time_lags.size() < 4)
        throw std::invalid_argument("hoelder_modulus: need at least 4 lags");
    const GridSpec& g = b.grid;
    const int n = g.per_axis();
    const int d = g.d;

    // window in node indices
    std::array<int, kMaxDim> ilo{}, ihi{};
    for (int i = 0; i < d; ++i) {
        ilo[i] = std::max(0, static_cast<int>(std::ceil((window.lo[i] + g.half_width) / g.h)));
        ihi[i] = std::min(n - 1, static_cast<int>(std::floor((window.hi[i] + g.half_width) / g.h)));
        if (ilo[i] > ihi[i]) throw std::invalid_argument("hoelder_modulus: empty window");
    }
    int jlo = std::max(0, static_cast<int>(std::ceil(window.t_min / b.dt_grid)));
    int jhi = std::min(b.n_times - 1, static_cast<int>(std::floor(window.t_max / b.dt_grid)));
    if (jlo > jhi) throw std::invalid_argument("hoelder_modulus: empty time window");

    auto for_window_nodes = [&](auto&& fn) {
        std::array<int, kMaxDim> mi = ilo;
        while (true) {
            fn(mi);
            int axis = 0;
            while (axis < d) {
                if (++mi[axis] <= ihi[axis]) break;
                mi[axis] = ilo[axis];
                ++axis;
            }
            if (axis == d) break;
        }
    };

    std::vector<double> log_lag, log_inc;
    for (int lag : space_lags) {
        double inc = 0;
        for (int j = jlo; j <= jhi; ++j) {
            for_window_nodes([&](const std::array<int, kMaxDim>& mi) {
                for (int axis = 0; axis < d; ++axis) {
                    std::array<int, kMaxDim> mj = mi;
                    mj[axis] += lag;
                    if (mj[axis] > ihi[axis]) continue;
                    const double diff = (b.node_value(j, g.index(mj)) - b.node_value(j, g.index(mi))).norm();
                    inc = std::max(inc, diff);
                }
            });
        }
        if (inc > 0) {
            log_lag.push_back(std::log(lag * g.h));
            log_inc.push_back(std::log(inc));
        }
    }
    for (int lag : time_lags) {
        double inc = 0;
        for (int j = jlo; j + lag <= jhi; ++j) {
            for_window_nodes([&](const std::array<int, kMaxDim>& mi) {
                const std::size_t node = g.index(mi);
                const double diff = (b.node_value(j + lag, node) - b.node_value(j, node)).norm();
                inc = std::max(inc, diff);
            });
        }
        if (inc > 0) {
            log_lag.push_back(0.5 * std::log(lag * b.dt_grid));  // sqrt-time lag metric
            log_inc.push_back(std::log(inc));
        }
    }

    if (log_lag.empty()) {  // flat field convention
        HoelderFit fit;
        fit.exponent = 1.0;
        fit.constant = 0.0;
        fit.raw_slope = 1.0;
        fit.n_lags = static_cast<int>(space_lags.size() + time_lags.size());
        return fit;
    }
    if (log_lag.size() < 2) throw std::invalid_argument("hoelder_modulus: not enough usable lags");
    return hoelderfit_from_points(log_lag, log_inc);
}

double lattice_refinement_check(const SingularKernel& kernel, const VorticityField& omega0,
                                double epsilon, const GridSpec& grid, int threads) {
    auto convolution = [&](double eps) {
        const Lattice lat = build_lattice(omega0, eps);
        std::vector<Vec> field(grid.node_count(), Vec::zero(grid.d));
        parallel_for(grid.node_count(), threads, [&](std::size_t node) {
            const Vec x = grid.node(node);
            Vec acc = Vec::zero(grid.d);
            for (std::size_t k = 0; k < lat.points.size(); ++k) {
                const Vec z = x - lat.points[k];
                if (z.norm() < kernel.delta) continue;
                acc += kernel_apply(kernel, z, lat.weights[k]);
            }
            field[node] = acc;
        });
        return field;
    };
    const std::vector<Vec> coarse = convolution(epsilon);
    const std::vector<Vec> fine = convolution(0.5 * epsilon);
    double sup = 0;
    for (std::size_t n = 0; n < coarse.size(); ++n) sup = std::max(sup, (coarse[n] - fine[n]).norm());
    return sup;
}

void write_picard_csv(const PicardState& state, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "iter,residual,ratio,sup_norm,seconds\n";
    std::size_t ratio_pos = 0;
    for (std::size_t n = 0; n < state.residuals.size(); ++n) {
        out << n << ',' << fmt17(state.residuals[n]) << ',';
        if (ratio_pos < state.ratios.size() &&
            state.ratio_iteration[ratio_pos] == static_cast<int>(n)) {
            out << fmt17(state.ratios[ratio_pos]);
            ++ratio_pos;
        }
        out << ',' << fmt17(state.sup_norms[n]) << ',' << fmt17(state.seconds[n]) << "\n";
    }
}

}  // namespace mvsde
