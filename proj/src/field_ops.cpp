#include "mvsde/field_ops.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "mvsde/io_util.hpp"
#include "mvsde/numerics.hpp"
#include "mvsde/parallel.hpp"

namespace mvsde {

FieldGrid recover_vorticity(const ParticleSystemState& state, const GridSpec& grid, double bandwidth_mult,
                            int threads, int min_copies) {
    const int d = grid.d;
    const std::size_t n_lat = state.lattice.points.size();
    const int N = state.n_copies;
    if (N < std::max(min_copies, 2))
        throw std::invalid_argument("recover_vorticity: need at least 1000 copies for the KDE");
    if (!(bandwidth_mult > 0)) throw std::invalid_argument("recover_vorticity: degenerate bandwidth");

    // positions transposed to [lattice point][copy] and per-point bandwidths
    std::vector<Vec> by_point(n_lat * static_cast<std::size_t>(N));
    std::vector<std::array<double, kMaxDim>> bw(n_lat);
    const double rate = std::pow(static_cast<double>(N), -1.0 / (d + 4.0));
    for (std::size_t k = 0; k < n_lat; ++k) {
        std::array<double, kMaxDim> mean{}, var{};
        for (int n = 0; n < N; ++n) {
            const Vec& x = state.position(n, k);
            by_point[k * N + n] = x;
            for (int i = 0; i < d; ++i) mean[i] += x[i];
        }
        for (int i = 0; i < d; ++i) mean[i] /= N;
        for (int n = 0; n < N; ++n) {
            const Vec& x = state.position(n, k);
            for (int i = 0; i < d; ++i) var[i] += (x[i] - mean[i]) * (x[i] - mean[i]);
        }
        for (int i = 0; i < d; ++i) {
            const double sd = std::sqrt(var[i] / (N - 1.0));
            if (!(sd > 0)) throw std::invalid_argument("recover_vorticity: degenerate bandwidth");
            bw[k][i] = bandwidth_mult * sd * rate;
        }
    }

    FieldGrid out(grid, state.t, d, "omega");
    const std::size_t n_nodes = grid.node_count();
    parallel_for(n_nodes, threads, [&](std::size_t node) {
        const Vec xg = grid.node(node);
        Vec acc = Vec::zero(d);
        for (std::size_t k = 0; k < n_lat; ++k) {
            const Vec& w = state.lattice.weights[k];
            if (w.norm() == 0) continue;
            double norm = 1.0 / static_cast<double>(N);
            for (int i = 0; i < d; ++i) norm /= bw[k][i] * std::sqrt(2.0 * std::numbers::pi);
            double kde = 0;
            for (int n = 0; n < N; ++n) {
                const Vec& xp = by_point[k * N + n];
                double e = 0;
                for (int i = 0; i < d; ++i) {
                    const double z = (xg[i] - xp[i]) / bw[k][i];
                    e += z * z;
                }
                kde += std::exp(-0.5 * e);
            }
            acc += w * (kde * norm);
        }
        for (int i = 0; i < d; ++i) out.value(node, i) = acc[i];
    });
    return out;
}

FieldGrid recover_velocity(const FieldGrid& omega, const SingularKernel& kernel, int threads) {
    if (omega.grid.d != kernel.d) throw std::invalid_argument("recover_velocity: dimension mismatch");
    const GridSpec& grid = omega.grid;
    const std::size_t n_nodes = grid.node_count();
    const double cell = grid.cell_volume();
    FieldGrid out(grid, omega.t, grid.d, "velocity");
    parallel_for(n_nodes, threads, [&](std::size_t node) {
        const Vec x = grid.node(node);
        Vec acc = Vec::zero(grid.d);
        for (std::size_t c = 0; c < n_nodes; ++c) {
            const Vec z = x - grid.node(c);
            if (z.norm() < kernel.delta) continue;
            acc += kernel_apply(kernel, z, omega.vec_at(c));
        }
        acc *= cell;
        for (int i = 0; i < grid.d; ++i) out.value(node, i) = acc[i];
    });
    return out;
}

FieldGrid recover_velocity_from_particles(const ParticleSystemState& state, const SingularKernel& kernel,
                                          const GridSpec& grid, int threads) {
    const std::size_t n_lat = state.lattice.points.size();
    const int N = state.n_copies;
    FieldGrid out(grid, state.t, grid.d, "velocity");
    const std::size_t n_nodes = grid.node_count();
    parallel_for(n_nodes, threads, [&](std::size_t node) {
        const Vec x = grid.node(node);
        Vec acc = Vec::zero(grid.d);
        for (int n = 0; n < N; ++n)
            for (std::size_t k = 0; k < n_lat; ++k) {
                const Vec z = x - state.position(n, k);
                if (z.norm() < kernel.delta) continue;
                acc += kernel_apply(kernel, z, state.lattice.weights[k]);
            }
        acc *= 1.0 / static_cast<double>(N);
        for (int i = 0; i < grid.d; ++i) out.value(node, i) = acc[i];
    });
    return out;
}

namespace {

void require_same_grid(const FieldGrid& a, const FieldGrid& b, const char* who) {
    if (!(a.grid == b.grid) || a.n_comp != b.n_comp) throw std::invalid_argument(std::string(who) + ": grid mismatch");
}

}  // namespace

ResidualReport pde_residual(const FieldGrid& omega_prev, const FieldGrid& omega_mid,
                            const FieldGrid& omega_next, const FieldGrid& u_mid, double nu) {
    require_same_grid(omega_prev, omega_mid, "pde_residual");
    require_same_grid(omega_mid, omega_next, "pde_residual");
    if (!(u_mid.grid == omega_mid.grid)) throw std::invalid_argument("pde_residual: grid mismatch");
    const double dt_minus = omega_mid.t - omega_prev.t;
    const double dt_plus = omega_next.t - omega_mid.t;
    if (dt_minus <= 0 || std::abs(dt_plus - dt_minus) > 1e-9 * dt_minus)
        throw std::invalid_argument("pde_residual: snapshots must be equally spaced in time");

    const GridSpec& g = omega_mid.grid;
    const int d = g.d;
    const int n = g.per_axis();
    const double inv2h = 1.0 / (2.0 * g.h);
    const double invh2 = 1.0 / (g.h * g.h);
    const double inv2dt = 1.0 / (2.0 * dt_minus);

    ResidualReport rep;
    rep.residual = FieldGrid(g, omega_mid.t, d, "pde_residual");

    // iterate interior nodes (one-cell margin)
    std::array<int, kMaxDim> mi{};
    for (int i = 0; i < d; ++i) mi[i] = 1;
    double sum2 = 0;
    std::size_t count = 0;
    while (true) {
        const std::size_t node = g.index(mi);
        const Vec u = u_mid.vec_at(node);
        double divu = 0;
        std::array<std::size_t, 2 * kMaxDim> nb{};
        for (int ax = 0; ax < d; ++ax) {
            std::array<int, kMaxDim> mp = mi, mm = mi;
            ++mp[ax];
            --mm[ax];
            nb[2 * ax] = g.index(mp);
            nb[2 * ax + 1] = g.index(mm);
            divu += (u_mid.value(nb[2 * ax], ax) - u_mid.value(nb[2 * ax + 1], ax)) * inv2h;
        }
        for (int comp = 0; comp < d; ++comp) {
            double ddt = (omega_next.value(node, comp) - omega_prev.value(node, comp)) * inv2dt;
            double advect = 0, lap = 0;
            for (int ax = 0; ax < d; ++ax) {
                const double wp = omega_mid.value(nb[2 * ax], comp);
                const double wm = omega_mid.value(nb[2 * ax + 1], comp);
                advect += u[ax] * (wp - wm) * inv2h;
                lap += (wp - 2.0 * omega_mid.value(node, comp) + wm) * invh2;
            }
            const double res = ddt + advect - nu * lap + divu * omega_mid.value(node, comp);
            rep.residual.value(node, comp) = res;
            sum2 += res * res;
            rep.sup_norm = std::max(rep.sup_norm, std::abs(res));
        }
        ++count;
        int axis = 0;
        while (axis < d) {
            if (++mi[axis] <= n - 2) break;
            mi[axis] = 1;
            ++axis;
        }
        if (axis == d) break;
    }
    rep.l2_norm = std::sqrt(sum2 * g.cell_volume());
    return rep;
}

DivergenceReport divergence_check(const FieldGrid& u) {
    const GridSpec& g = u.grid;
    const int d = g.d;
    const int n = g.per_axis();
    const double inv2h = 1.0 / (2.0 * g.h);
    DivergenceReport rep;
    std::array<int, kMaxDim> mi{};
    for (int i = 0; i < d; ++i) mi[i] = 1;
    double sum2 = 0;
    while (true) {
        double divu = 0, grad2 = 0;
        for (int ax = 0; ax < d; ++ax) {
            std::array<int, kMaxDim> mp = mi, mm = mi;
            ++mp[ax];
            --mm[ax];
            const std::size_t p = g.index(mp), m = g.index(mm);
            for (int comp = 0; comp < d; ++comp) {
                const double der = (u.value(p, comp) - u.value(m, comp)) * inv2h;
                grad2 += der * der;
                if (comp == ax) divu += der;
            }
        }
        rep.max_abs = std::max(rep.max_abs, std::abs(divu));
        rep.max_grad = std::max(rep.max_grad, std::sqrt(grad2));
        sum2 += divu * divu;
        int axis = 0;
        while (axis < d) {
            if (++mi[axis] <= n - 2) break;
            mi[axis] = 1;
            ++axis;
        }
        if (axis == d) break;
    }
    rep.l2 = std::sqrt(sum2 * g.cell_volume());
    return rep;
}

double LambOseen::vorticity(double r, double t) const {
    const double a = core_scale(t);
    return circulation / (std::numbers::pi * a) * std::exp(-r * r / a);
}

double LambOseen::u_theta(double r, double t) const {
    const double a = core_scale(t);
    if (r < 1e-12) return 0.0;
    return circulation / (2.0 * std::numbers::pi * r) * (-std::expm1(-r * r / a));
}

Vec LambOseen::velocity(const Vec& x, double t) const {
    const double r = x.norm();
    Vec v(2);
    if (r < 1e-12) return v;
    const double ut = u_theta(r, t);
    v[0] = -ut * x[1] / r;
    v[1] = ut * x[0] / r;
    return v;
}

double LambOseen::peak_radius(double t) const {
    // u_theta peaks where 2 xi e^{-xi} = 1 - e^{-xi}, xi = r^2 / core_scale
    const double xi = bisect_root([](double x) { return 2.0 * x * std::exp(-x) - 1.0 + std::exp(-x); },
                                  0.5, 3.0);
    return std::sqrt(xi * core_scale(t));
}

LambOseenErrors compare_lamb_oseen(const FieldGrid& omega, const FieldGrid& u, double circulation,
                                   double t0, double nu, double t, double annulus_lo, double annulus_hi) {
    if (omega.grid.d != 2 || u.grid.d != 2)
        throw std::invalid_argument("compare_lamb_oseen: d = 2 fields required");
    const LambOseen lo{circulation, t0, nu};
    LambOseenErrors err;

    // cell-weighted relative L1 error of the scalar vorticity (component 0)
    {
        const GridSpec& g = omega.grid;
        double num = 0, den = 0;
        for (std::size_t node = 0; node < g.node_count(); ++node) {
            const double exact = lo.vorticity(g.node(node).norm(), t);
            num += std::abs(omega.value(node, 0) - exact);
            den += std::abs(exact);
        }
        err.omega_l1_rel = num / den;
    }

    // relative L2 error of the velocity on the annulus
    {
        const GridSpec& g = u.grid;
        double num = 0, den = 0;
        for (std::size_t node = 0; node < g.node_count(); ++node) {
            const Vec x = g.node(node);
            const double r = x.norm();
            if (r < annulus_lo || r > annulus_hi) continue;
            const Vec exact = lo.velocity(x, t);
            num += (u.vec_at(node) - exact).norm2();
            den += exact.norm2();
        }
        err.u_l2_rel = std::sqrt(num / den);
    }

    // peak radius of |u| from annulus-averaged profile vs analytic peak
    {
        const GridSpec& g = u.grid;
        std::map<long, std::pair<double, int>> bins;  // radius bin -> (sum |u|, count)
        for (std::size_t node = 0; node < g.node_count(); ++node) {
            const Vec x = g.node(node);
            const long bin = std::lround(x.norm() / g.h);
            auto& b = bins[bin];
            b.first += u.vec_at(node).norm();
            b.second += 1;
        }
        double best = -1, best_r = 0;
        for (const auto& [bin, acc] : bins) {
            if (bin == 0) continue;
            const double mean = acc.first / acc.second;
            if (mean > best) {
                best = mean;
                best_r = bin * g.h;
            }
        }
        err.peak_location_error = std::abs(best_r - lo.peak_radius(t));
    }
    return err;
}

void write_field_ndjson(const std::vector<FieldGrid>& fields, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const FieldGrid& f : fields) {
        out << "{\"type\":\"field_grid\",\"field\":\"" << f.name << "\",\"d\":" << f.grid.d
            << ",\"half_width\":" << fmt17(f.grid.half_width) << ",\"h\":" << fmt17(f.grid.h)
            << ",\"t\":" << fmt17(f.t) << ",\"n_comp\":" << f.n_comp << "}\n";
        out << "{\"values\":[";
        for (std::size_t i = 0; i < f.values.size(); ++i) {
            if (i) out << ',';
            out << fmt17(f.values[i]);
        }
        out << "]}\n";
    }
}

std::vector<FieldGrid> read_field_ndjson(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<FieldGrid> fields;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto header = nlohmann::json::parse(line);
        if (header.value("type", "") != "field_grid") throw std::runtime_error("not a field grid record");
        const GridSpec grid(header.at("d").get<int>(), header.at("half_width").get<double>(),
                            header.at("h").get<double>());
        FieldGrid f(grid, header.at("t").get<double>(), header.at("n_comp").get<int>(),
                    header.value("field", ""));
        if (!std::getline(in, line)) throw std::runtime_error("truncated field grid file");
        const auto rec = nlohmann::json::parse(line);
        const auto& vals = rec.at("values");
        if (vals.size() != f.values.size()) throw std::runtime_error("field grid size mismatch");
        for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = vals[i].get<double>();
        fields.push_back(std::move(f));
    }
    return fields;
}

void write_radial_profile_csv(const FieldGrid& omega, const FieldGrid& u, const LambOseen& exact,
                              double t, const std::string& path) {
    const GridSpec& g = omega.grid;
    std::map<long, std::array<double, 3>> bins;  // bin -> (sum omega, sum u_theta, count)
    for (std::size_t node = 0; node < g.node_count(); ++node) {
        const Vec x = g.node(node);
        const double r = x.norm();
        const long bin = std::lround(r / g.h);
        auto& b = bins[bin];
        b[0] += omega.value(node, 0);
        if (r > 1e-12) {
            const Vec uv = u.vec_at(node);
            b[1] += (-uv[0] * x[1] + uv[1] * x[0]) / r;  // azimuthal component
        }
        b[2] += 1;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "r,omega,omega_exact,u_theta,u_exact\n";
    for (const auto& [bin, acc] : bins) {
        const double r = bin * g.h;
        out << fmt17(r) << ',' << fmt17(acc[0] / acc[2]) << ',' << fmt17(exact.vorticity(r, t)) << ','
            << fmt17(acc[1] / acc[2]) << ',' << fmt17(exact.u_theta(r, t)) << "\n";
    }
}

std::pair<ParticleSystemState, ParticleSystemState> split_copies(const ParticleSystemState& state) {
    const std::size_t n_lat = state.lattice.points.size();
    const int half = state.n_copies / 2;
    ParticleSystemState a = state, b = state;
    a.n_copies = half;
    b.n_copies = state.n_copies - half;
    a.positions.assign(state.positions.begin(), state.positions.begin() + half * n_lat);
    b.positions.assign(state.positions.begin() + half * n_lat, state.positions.end());
    return {std::move(a), std::move(b)};
}

}  // namespace mvsde
