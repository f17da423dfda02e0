#include "mvsde/bound_audit.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mvsde/numerics.hpp"
#include "mvsde/parallel.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/sde_engine.hpp"

namespace mvsde {

BoundReport make_bound_report(double lhs, double se, double rhs) {
    BoundReport r;
    r.lhs_estimate = lhs;
    r.lhs_std_error = se;
    r.rhs_bound = rhs;
    r.margin = rhs - (lhs - 3.0 * se);
    r.satisfied = r.margin >= 0.0;
    return r;
}

ScalarField magnitude_field(const VorticityField& omega0) {
    ScalarField f;
    f.d = omega0.d;
    auto fn = omega0.omega0;
    f.value = [fn](const Vec& x) { return fn(x).norm(); };
    f.sup_norm = omega0.Cinf;
    f.l1_norm = omega0.C1;
    f.support_radius = omega0.support_radius;
    return f;
}

ScalarField indicator_ball(int d, double radius) {
    ScalarField f;
    f.d = d;
    f.value = [radius](const Vec& x) { return x.norm() <= radius ? 1.0 : 0.0; };
    f.sup_norm = 1.0;
    const double vol_unit = sphere_surface(d) / d;  // volume of the unit ball
    f.l1_norm = vol_unit * std::pow(radius, d);
    f.support_radius = radius;
    return f;
}

namespace {

// Smoothed singular mass H(m) = E[ 1_{|Z|<rho} |Z|^{-gamma} ], Z ~ N(mu, var I_d),
// |mu| = m.  The radial integral is substituted to remove the endpoint
// singularity and tabulated in m for interpolation.
class SmoothedInnerMass {
public:
    SmoothedInnerMass(int d, double var, double rho, double gamma, double m_max) : d_(d) {
        const double sigma = std::sqrt(var);
        m_cut_ = rho + 8.0 * sigma;
        m_max_ = std::min(m_max, m_cut_);
        n_ = 2049;
        table_.resize(n_);
        const double p = d - gamma;
        for (std::size_t i = 0; i < n_; ++i) {
            const double m = m_max_ * static_cast<double>(i) / static_cast<double>(n_ - 1);
            // int_0^rho r^{-gamma} f_radial(r) dr with f = r^{d-1} g(r); u = r^p
            const double u_hi = std::pow(rho, p);
            table_[i] = adaptive_simpson(
                            [&](double u) {
                                const double r = std::pow(u, 1.0 / p);
                                return radial_smooth_part(d, m, var, r);
                            },
                            0.0, u_hi, 1e-9, 1e-14) /
                        p;
        }
    }

    double operator()(double m) const {
        if (m >= m_cut_) return 0.0;
        if (m >= m_max_) return table_.back();
        const double s = m / m_max_ * static_cast<double>(n_ - 1);
        const std::size_t i = std::min(static_cast<std::size_t>(s), n_ - 2);
        const double f = s - static_cast<double>(i);
        return (1.0 - f) * table_[i] + f * table_[i + 1];
    }

private:
    // noncentral radial density divided by r^{d-1} (smooth through r = 0)
    static double radial_smooth_part(int d, double m, double var, double r) {
        if (r <= 0) r = 0;
        const double dens = noncentral_radial_density(d, m, var, r);
        double rd1 = 1.0;
        for (int i = 0; i < d - 1; ++i) rd1 *= r;
        if (rd1 == 0.0) {
            // expand f(r)/r^{d-1} at r = 0
            const double sigma = std::sqrt(var);
            const double base = std::exp(-0.5 * m * m / var);
            if (d == 1) return 2.0 * base / (sigma * std::sqrt(2.0 * std::numbers::pi));
            if (d == 2) return base / var;
            return 2.0 * base / (var * sigma * std::sqrt(2.0 * std::numbers::pi));
        }
        return dens / rd1;
    }

    int d_;
    double m_max_ = 0, m_cut_ = 0;
    std::size_t n_ = 0;
    std::vector<double> table_;
};

// Sample y with density |f| / ||f||_1 by rejection from the support box.
Vec sample_from_field(const ScalarField& f, RngStream& rng) {
    const double R = f.support_radius;
    for (int attempt = 0; attempt < 100000; ++attempt) {
        Vec y(f.d);
        for (int i = 0; i < f.d; ++i) y[i] = R * (2.0 * rng.uniform() - 1.0);
        if (rng.uniform() * f.sup_norm <= f.value(y)) return y;
    }
    throw std::runtime_error("sample_from_field: rejection sampling failed (field nearly zero?)");
}

struct EndpointPlan {
    std::size_t n_steps = 0;
    double dt_eff = 0;
};

EndpointPlan plan_steps(double t, double dt) {
    EndpointPlan p;
    p.n_steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(t / dt)));
    p.dt_eff = t / static_cast<double>(p.n_steps);
    return p;
}

}  // namespace

BoundReport verify_I_bound(const ScalarField& f, const Vec& x, double t, double rho, double gamma,
                           const DriftField& b, const StructureConstants& sc, const McParams& mc) {
    if (mc.n_paths < 100) throw std::invalid_argument("verify_I_bound: n_paths must be >= 100");
    if (gamma < 0 || gamma >= f.d) throw std::invalid_argument("verify_I_bound: gamma must be in [0, d)");
    if (rho <= 0 || t <= 0) throw std::invalid_argument("verify_I_bound: rho and t must be positive");
    if (f.l1_norm == 0) return make_bound_report(0.0, 0.0, 0.0);  // zero field: I = 0 <= 0
    const int d = f.d;
    const double A = b.sup_norm;
    const EndpointPlan plan = plan_steps(t, mc.dt);
    const double m_max = f.support_radius + x.norm() + A * t + 10.0 * std::sqrt(t) + rho;
    const SmoothedInnerMass H(d, plan.dt_eff, rho, gamma, m_max);

    const std::size_t n = static_cast<std::size_t>(mc.n_paths);
    std::vector<double> vals(n);
    parallel_for(n, mc.threads, [&](std::size_t pid) {
        RngStream rng(substream(mc.seed, pid));
        const Vec y = sample_from_field(f, rng);
        const uint64_t key = substream(substream(mc.seed, pid), 0x70617468ull);
        Vec pos = y;
        const double sig = std::sqrt(plan.dt_eff);
        for (std::size_t k = 0; k + 1 < plan.n_steps; ++k) {
            const double tk = static_cast<double>(k) * plan.dt_eff;
            pos += b.eval(pos, tk) * plan.dt_eff + brownian_increment(d, key, k, sig);
        }
        // exact Gaussian last step: mean mu, variance dt_eff per coordinate
        const double t_last = static_cast<double>(plan.n_steps - 1) * plan.dt_eff;
        const Vec mu = pos + b.eval(pos, t_last) * plan.dt_eff;
        vals[pid] = H((x - mu).norm());
    });
    const double mean = chunked_sum(n, mc.threads, [&](std::size_t i) { return vals[i]; }) / static_cast<double>(n);
    const double ss =
        chunked_sum(n, mc.threads, [&](std::size_t i) { return (vals[i] - mean) * (vals[i] - mean); });
    const double se = std::sqrt(ss / (static_cast<double>(n) - 1.0) / static_cast<double>(n));

    const double lhs = f.l1_norm * mean;
    const double lhs_se = f.l1_norm * se;
    const double rhs = std::pow(rho, d - gamma) / (d - gamma) * sc.kappa1 * f.sup_norm *
                       (1.0 + A * std::sqrt(t) * std::exp(A * A * t / (2.0 * (sc.q - 1.0))));
    return make_bound_report(lhs, lhs_se, rhs);
}

BoundReport verify_J_bound(const ScalarField& f, const Vec& x, double t, double rho, double gamma,
                           const DriftField& b, const McParams& mc) {
    if (mc.n_paths < 100) throw std::invalid_argument("verify_J_bound: n_paths must be >= 100");
    if (rho <= 0 || gamma < 0) throw std::invalid_argument("verify_J_bound: rho must be positive, gamma >= 0");
    if (f.l1_norm == 0) return make_bound_report(0.0, 0.0, 0.0);
    const int d = f.d;
    const EndpointPlan plan = plan_steps(t, mc.dt);

    const std::size_t n = static_cast<std::size_t>(mc.n_paths);
    std::vector<double> vals(n);
    parallel_for(n, mc.threads, [&](std::size_t pid) {
        RngStream rng(substream(mc.seed, pid));
        const Vec y = sample_from_field(f, rng);
        const uint64_t key = substream(substream(mc.seed, pid), 0x70617468ull);
        Vec pos = y;
        const double sig = std::sqrt(plan.dt_eff);
        for (std::size_t k = 0; k < plan.n_steps; ++k) {
            const double tk = static_cast<double>(k) * plan.dt_eff;
            pos += b.eval(pos, tk) * plan.dt_eff + brownian_increment(d, key, k, sig);
        }
        const double r = (x - pos).norm();
        vals[pid] = r >= rho ? std::pow(r, -gamma) : 0.0;
    });
    const double mean = chunked_sum(n, mc.threads, [&](std::size_t i) { return vals[i]; }) / static_cast<double>(n);
    const double ss =
        chunked_sum(n, mc.threads, [&](std::size_t i) { return (vals[i] - mean) * (vals[i] - mean); });
    const double se = std::sqrt(ss / (static_cast<double>(n) - 1.0) / static_cast<double>(n));

    const double lhs = f.l1_norm * mean;
    const double rhs = f.l1_norm / std::pow(rho, gamma);
    return make_bound_report(lhs, f.l1_norm * se, rhs);
}

}  // namespace mvsde
