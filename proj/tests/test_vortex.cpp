#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "mvsde/field_ops.hpp"
#include "mvsde/io_util.hpp"
#include "mvsde/particle_system.hpp"

using namespace mvsde;

namespace {

DriftField analytic_lo_drift(double circulation, double t0, double nu, double T, double box = 6.0,
                             double h = 0.25, double dt_grid = 0.02) {
    const LambOseen lo{circulation, t0, nu};
    const int nt = static_cast<int>(std::llround(T / dt_grid)) + 1;
    // slice values at midpoint times to cancel the left-constant bias
    return DriftField::from_function(GridSpec(2, box, h), dt_grid, nt, [&](const Vec& x, double t) {
        return lo.velocity(x, std::min(t + 0.5 * dt_grid, T));
    });
}

}  // namespace

TEST_CASE("zero interaction: particles are pure Brownian motions") {
    SingularKernel kernel = make_builtin_kernel(BuiltinKernel::biot_savart_2d, 2);
    kernel.delta = 0.125;
    const VorticityField w0 = zero_vorticity(2);
    const DriftField zero = DriftField::zero(GridSpec(2, 2.0, 1.0), 0.1, 3);

    for (ParticleMode mode : {ParticleMode::mean_field, ParticleMode::empirical_coupled}) {
        ParticleRunConfig cfg;
        cfg.epsilon = 0.5;
        cfg.n_copies = 4000;
        cfg.nu = 0.5;
        cfg.dt = 0.01;
        cfg.T = 0.2;
        cfg.seed = 5;
        cfg.mode = mode;
        cfg.mean_field_drift = &zero;
        cfg.snapshot_times = {0.2};
        const auto snaps = run_particle_system(kernel, w0, cfg);
        REQUIRE(snaps.size() == 1);
        const auto& s = snaps[0];
        const std::size_t n_lat = s.lattice.points.size();
        double var = 0;
        std::size_t count = 0;
        for (int c = 0; c < s.n_copies; ++c)
            for (std::size_t k = 0; k < n_lat; ++k) {
                var += (s.position(c, k) - s.lattice.points[k]).norm2();
                ++count;
            }
        var /= 2.0 * count;  // per coordinate
        const double expect = 2.0 * cfg.nu * cfg.T;
        const double se = expect * std::sqrt(2.0 / (2.0 * count));
        CHECK(std::abs(var - expect) < 4.0 * se);
    }
}

TEST_CASE("single point vortex: odd-kernel cancellation at a common start") {
    SingularKernel kernel = make_builtin_kernel(BuiltinKernel::biot_savart_2d, 2);
    kernel.delta = 0.0625;
    const Lattice lat = single_point_lattice(Vec(0.0, 0.0), Vec(1.0, 0.0), 0.25);

    ParticleRunConfig cfg;
    cfg.epsilon = 0.25;
    cfg.n_copies = 2000;
    cfg.nu = 0.5;
    cfg.dt = 0.002;
    cfg.T = 0.05;
    cfg.seed = 6;
    cfg.mode = ParticleMode::empirical_coupled;
    cfg.snapshot_times = {0.0, 0.05};
    const auto snaps = run_particle_system_from_lattice(kernel, lat, 1.0, cfg);
    REQUIRE(snaps.size() == 2);

    // at the common start every pairwise term is inside the cutoff: zero drift
    CHECK(empirical_mean_drift(kernel, snaps[0]).norm() == 0.0);

    // early-time spread stays at the Brownian rate
    double var = 0;
    for (int c = 0; c < cfg.n_copies; ++c) var += snaps[1].position(c, 0).norm2();
    var /= 2.0 * cfg.n_copies;
    const double expect = 2.0 * cfg.nu * 0.05;
    CHECK(var == doctest::Approx(expect).epsilon(0.10));

    // omega-weighted mean drift vanishes by pairwise antisymmetry
    const Vec mean_drift = empirical_mean_drift(kernel, snaps[1]);
    CHECK(mean_drift.norm() < 1e-12);
}

TEST_CASE("mean-field Lamb-Oseen run reproduces the radial second moment") {
    SingularKernel kernel = make_builtin_kernel(BuiltinKernel::biot_savart_2d, 2);
    kernel.delta = 0.125;
    const VorticityField w0 = lamb_oseen_vorticity(1.0, 1.0, 0.5);
    const DriftField drift = analytic_lo_drift(1.0, 1.0, 0.5, 0.2);

    ParticleRunConfig cfg;
    cfg.epsilon = 0.5;
    cfg.n_copies = 200;
    cfg.nu = 0.5;
    cfg.dt = 0.005;
    cfg.T = 0.2;
    cfg.seed = 7;
    cfg.mode = ParticleMode::mean_field;
    cfg.mean_field_drift = &drift;
    cfg.snapshot_times = {0.2};
    const auto snaps = run_particle_system(kernel, w0, cfg);
    const auto& s = snaps[0];

    double wsum = 0, m2 = 0;
    const std::size_t n_lat = s.lattice.points.size();
    for (int c = 0; c < s.n_copies; ++c)
        for (std::size_t k = 0; k < n_lat; ++k) {
            const double w = s.lattice.weights[k][0];
            m2 += w * s.position(c, k).norm2();
            wsum += w;
        }
    m2 /= wsum;
    // int r^2 omega(r, t) dr / Gamma = 4 nu (t0 + t)
    const double expect = 4.0 * 0.5 * (1.0 + 0.2);
    CHECK(m2 == doctest::Approx(expect).epsilon(0.05));
}

TEST_CASE("vorticity recovery against the exact heat evolution (zero drift)") {
    SingularKernel kernel = make_builtin_kernel(BuiltinKernel::biot_savart_2d, 2);
    kernel.delta = 0.1875;
    const double A = 0.3, sigma = 0.8, nu = 0.5, T = 0.2;
    const VorticityField w0 = gaussian_blob_vorticity(2, A, sigma, Vec(0.0, 0.0));
    const DriftField zero = DriftField::zero(GridSpec(2, 2.0, 1.0), 0.1, 3);
    const GridSpec grid(2, 6.0, 0.25);
    const double st2 = sigma * sigma + 2.0 * nu * T;  // heat widening of the blob

    auto run_case = [&](double epsilon, int n_copies) {
        ParticleRunConfig cfg;
        cfg.epsilon = epsilon;
        cfg.n_copies = n_copies;
        cfg.nu = nu;
        cfg.dt = 0.01;
        cfg.T = T;
        cfg.seed = 8;
        cfg.mode = ParticleMode::mean_field;
        cfg.mean_field_drift = &zero;
        cfg.snapshot_times = {T};
        return run_particle_system(kernel, w0, cfg);
    };
    auto rel_l1 = [&](const FieldGrid& omega) {
        double l1 = 0, l1_exact = 0;
        for (std::size_t node = 0; node < grid.node_count(); ++node) {
            const double exact = A * sigma * sigma / st2 * std::exp(-grid.node(node).norm2() / (2.0 * st2));
            l1 += std::abs(omega.value(node, 0) - exact);
            l1_exact += exact;
        }
        return l1 / l1_exact;
    };

    // the documented operating point: N x lattice = 1e5 samples
    {
        const auto snaps = run_case(0.75, 1235);
        CHECK(snaps[0].n_particles() == 100035);
        const FieldGrid omega = recover_vorticity(snaps[0], grid, 1.0);
        CHECK(rel_l1(omega) < 0.05);
    }

    // finer lattice, mass conservation and degenerate-bandwidth rejection
    {
        const auto snaps = run_case(0.5, 1000);
        const FieldGrid omega = recover_vorticity(snaps[0], grid, 1.0);
        CHECK(rel_l1(omega) < 0.05);

        double mass = 0;
        for (std::size_t node = 0; node < grid.node_count(); ++node) mass += omega.value(node, 0);
        double lattice_mass = 0;
        for (const Vec& w : snaps[0].lattice.weights) lattice_mass += w[0];
        CHECK(mass * grid.cell_volume() == doctest::Approx(lattice_mass).epsilon(0.02));

        CHECK_THROWS(recover_vorticity(snaps[0], grid, 0.0));  // degenerate bandwidth
    }
}

TEST_CASE("velocity recovery: grid convolution vs particle summation vs closed form") {
    SingularKernel kernel = make_builtin_kernel(BuiltinKernel::biot_savart_2d, 2);
    kernel.delta = 0.125;
    const double nu = 0.5, T = 0.2;
    const VorticityField w0 = lamb_oseen_vorticity(1.0, 1.0, nu);
    const DriftField drift = analytic_lo_drift(1.0, 1.0, nu, T);
    const LambOseen exact{1.0, 1.0, nu};

    ParticleRunConfig cfg;
    cfg.epsilon = 0.5;
    cfg.n_copies = 1000;
    cfg.nu = nu;
    cfg.dt = 0.005;
    cfg.T = T;
    cfg.seed = 9;
    cfg.mode = ParticleMode::mean_field;
    cfg.mean_field_drift = &drift;
    cfg.snapshot_times = {T};
    const auto snaps = run_particle_system(kernel, w0, cfg);

    const GridSpec grid(2, 6.0, 0.25);
    const FieldGrid omega = recover_vorticity(snaps[0], grid, 1.0);
    const FieldGrid u_grid = recover_velocity(omega, kernel);
    const FieldGrid u_part = recover_velocity_from_particles(snaps[0], kernel, grid);

    auto annulus_err = [&](const FieldGrid& u, auto&& ref) {
        double num = 0, den = 0;
        for (std::size_t node = 0; node < grid.node_count(); ++node) {
            const Vec x = grid.node(node);
            const double r = x.norm();
            if (r < 0.2 || r > 3.0) continue;
            num += (u.vec_at(node) - ref(node)).norm2();
            den += ref(node).norm2();
        }
        return std::sqrt(num / den);
    };
    CHECK(annulus_err(u_grid, [&](std::size_t n) { return exact.velocity(grid.node(n), T); }) < 0.05);
    CHECK(annulus_err(u_part, [&](std::size_t n) { return exact.velocity(grid.node(n), T); }) < 0.05);
    CHECK(annulus_err(u_grid, [&](std::size_t n) { return u_part.vec_at(n); }) < 0.05);
}

TEST_CASE("pde residual on analytic fields converges at second order") {
    const LambOseen exact{1.0, 1.0, 0.5};
    const double t = 0.5;

    auto residual_at = [&](double h, double dt) {
        const GridSpec grid(2, 4.0, h);
        auto omega_at = [&](double tt) {
            FieldGrid f(grid, tt, 2, "omega");
            for (std::size_t n = 0; n < grid.node_count(); ++n)
                f.value(n, 0) = exact.vorticity(grid.node(n).norm(), tt);
            return f;
        };
        FieldGrid u(grid, t, 2, "velocity");
        for (std::size_t n = 0; n < grid.node_count(); ++n) {
            const Vec v = exact.velocity(grid.node(n), t);
            u.value(n, 0) = v[0];
            u.value(n, 1) = v[1];
        }
        return pde_residual(omega_at(t - dt), omega_at(t), omega_at(t + dt), u, 0.5);
    };

    const ResidualReport coarse = residual_at(0.4, 0.08);
    const ResidualReport fine = residual_at(0.2, 0.04);
    CHECK(coarse.l2_norm / fine.l2_norm > 3.0);  // O(h^2 + dt^2)
    CHECK(fine.l2_norm < 0.01);

    SUBCASE("zero fields give an identically zero residual") {
        const GridSpec grid(2, 2.0, 0.5);
        const FieldGrid a(grid, 0.05, 2, "omega"), b(grid, 0.10, 2, "omega"), c(grid, 0.15, 2, "omega");
        const ResidualReport rep = pde_residual(a, b, c, FieldGrid(grid, 0.10, 2, "velocity"), 0.5);
        CHECK(rep.l2_norm == 0.0);
        CHECK(rep.sup_norm == 0.0);
    }

    SUBCASE("unequal snapshot spacing is rejected") {
        const GridSpec grid(2, 2.0, 0.5);
        FieldGrid a(grid, 0.10, 2, "omega"), b(grid, 0.20, 2, "omega"), c(grid, 0.35, 2, "omega");
        CHECK_THROWS(pde_residual(a, b, c, FieldGrid(grid, 0.2, 2, "velocity"), 0.5));
    }
}

TEST_CASE("divergence checks") {
    const GridSpec grid(2, 3.0, 0.25);

    SUBCASE("constant field: exactly zero") {
        FieldGrid u(grid, 0, 2, "velocity");
        for (std::size_t n = 0; n < grid.node_count(); ++n) {
            u.value(n, 0) = 0.7;
            u.value(n, 1) = -0.2;
        }
        const DivergenceReport rep = divergence_check(u);
        CHECK(rep.max_abs == 0.0);
        CHECK(rep.max_grad == 0.0);
    }

    SUBCASE("linear solenoidal field (x, -y): zero to machine precision") {
        FieldGrid u(grid, 0, 2, "velocity");
        for (std::size_t n = 0; n < grid.node_count(); ++n) {
            const Vec x = grid.node(n);
            u.value(n, 0) = x[0];
            u.value(n, 1) = -x[1];
        }
        const DivergenceReport rep = divergence_check(u);
        CHECK(rep.max_abs < 1e-13);
        CHECK(rep.max_grad == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    }

    SUBCASE("analytic vortex velocity is discretely divergence-free up to grid noise") {
        const LambOseen exact{1.0, 1.0, 0.5};
        FieldGrid u(grid, 0.2, 2, "velocity");
        for (std::size_t n = 0; n < grid.node_count(); ++n) {
            const Vec v = exact.velocity(grid.node(n), 0.2);
            u.value(n, 0) = v[0];
            u.value(n, 1) = v[1];
        }
        const DivergenceReport rep = divergence_check(u);
        CHECK(rep.max_abs < 0.02 * rep.max_grad);
    }
}

TEST_CASE("lamb-oseen comparison") {
    const LambOseen exact{1.0, 1.0, 0.5};
    const double t = 0.0;
    CHECK(exact.vorticity(0.0, 0.0) == doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-12));
    CHECK(exact.u_theta(1.0, 0.0) == doctest::Approx(0.0626177).epsilon(1e-5));

    const GridSpec grid(2, 5.0, 0.25);
    FieldGrid omega(grid, t, 2, "omega"), u(grid, t, 2, "velocity");
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
        omega.value(n, 0) = exact.vorticity(grid.node(n).norm(), t);
        const Vec v = exact.velocity(grid.node(n), t);
        u.value(n, 0) = v[0];
        u.value(n, 1) = v[1];
    }

    SUBCASE("self comparison has zero errors") {
        const LambOseenErrors err = compare_lamb_oseen(omega, u, 1.0, 1.0, 0.5, t);
        CHECK(err.omega_l1_rel < 1e-12);
        CHECK(err.u_l2_rel < 1e-12);
        CHECK(err.peak_location_error <= grid.h);
    }

    SUBCASE("fields scaled by 1.05 report exactly 5%") {
        FieldGrid omega2 = omega, u2 = u;
        for (double& v : omega2.values) v *= 1.05;
        for (double& v : u2.values) v *= 1.05;
        const LambOseenErrors err = compare_lamb_oseen(omega2, u2, 1.0, 1.0, 0.5, t);
        CHECK(err.omega_l1_rel == doctest::Approx(0.05).epsilon(1e-10));
        CHECK(err.u_l2_rel == doctest::Approx(0.05).epsilon(1e-10));
    }

    SUBCASE("peak radius solves the transcendental condition") {
        const double r = exact.peak_radius(0.0);
        CHECK(r == doctest::Approx(1.12091 * std::sqrt(2.0)).epsilon(1e-4));
    }
}

TEST_CASE("field grid serialization round-trips") {
    const GridSpec grid(2, 1.0, 0.5);
    FieldGrid f(grid, 0.125, 2, "omega");
    for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = std::sin(static_cast<double>(i));
    const std::string path = "/tmp/mvsde_test_field.ndjson";
    write_field_ndjson({f, f}, path);
    const auto back = read_field_ndjson(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].t == f.t);
    CHECK(back[0].name == "omega");
    for (std::size_t i = 0; i < f.values.size(); ++i) CHECK(back[0].values[i] == f.values[i]);
    std::filesystem::remove(path);
}

TEST_CASE("blow-up aborts with a diagnostic") {
    SingularKernel kernel = make_builtin_kernel(BuiltinKernel::biot_savart_2d, 2);
    const VorticityField w0 = gaussian_blob_vorticity(2, 1.0, 0.5, Vec(0.0, 0.0));
    const DriftField runaway = DriftField::from_function(GridSpec(2, 200.0, 100.0), 0.05, 3,
                                                         [](const Vec&, double) { return Vec(1e5, 0.0); });
    ParticleRunConfig cfg;
    cfg.epsilon = 0.5;
    cfg.n_copies = 2;
    cfg.nu = 0.5;
    cfg.dt = 0.01;
    cfg.T = 0.05;
    cfg.seed = 10;
    cfg.mode = ParticleMode::mean_field;
    cfg.mean_field_drift = &runaway;
    cfg.snapshot_times = {0.05};
    CHECK_THROWS_AS(static_cast<void>(run_particle_system(kernel, w0, cfg)), BlowUpError);
}

TEST_CASE("snapshot csv and copy splitting") {
    SingularKernel kernel = make_builtin_kernel(BuiltinKernel::biot_savart_2d, 2);
    kernel.delta = 0.125;
    const VorticityField w0 = gaussian_blob_vorticity(2, 1.0, 0.5, Vec(0.0, 0.0));
    const DriftField zero = DriftField::zero(GridSpec(2, 2.0, 1.0), 0.05, 3);
    ParticleRunConfig cfg;
    cfg.epsilon = 0.5;
    cfg.n_copies = 10;
    cfg.nu = 0.5;
    cfg.dt = 0.01;
    cfg.T = 0.1;
    cfg.seed = 11;
    cfg.mode = ParticleMode::mean_field;
    cfg.mean_field_drift = &zero;
    cfg.snapshot_times = {0.05, 0.1};
    const auto snaps = run_particle_system(kernel, w0, cfg);
    REQUIRE(snaps.size() == 2);

    const std::string path = "/tmp/mvsde_test_snapshots.csv";
    write_snapshots_csv(snaps, path);
    const std::string text = read_text_file(path);
    CHECK(text.rfind("t,copy,k1,k2,x1,x2", 0) == 0);
    std::filesystem::remove(path);

    const auto [a, b] = split_copies(snaps[0]);
    CHECK(a.n_copies == 5);
    CHECK(b.n_copies == 5);
    CHECK(a.positions.size() + b.positions.size() == snaps[0].positions.size());
    CHECK(a.position(0, 0)[0] == snaps[0].position(0, 0)[0]);
    CHECK(b.position(0, 0)[0] == snaps[0].position(5, 0)[0]);
}
