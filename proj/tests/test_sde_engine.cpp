#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mvsde/numerics.hpp"
#include "mvsde/parallel.hpp"
#include "mvsde/rng.hpp"
#include "mvsde/sde_engine.hpp"
#include "mvsde/structure_constants.hpp"

using namespace mvsde;

namespace {

DriftField constant_drift(double bx, double by, double box = 12.0, double T = 1.0) {
    return DriftField::from_function(GridSpec(2, box, box / 4.0), T / 4.0, 5,
                                     [bx, by](const Vec&, double) { return Vec(bx, by); });
}

DriftField ou_drift(double box = 12.0, double T = 1.0, double dt_grid = 0.25) {
    const int nt = static_cast<int>(std::llround(T / dt_grid)) + 1;
    return DriftField::from_function(GridSpec(2, box, 0.25), dt_grid, nt,
                                     [](const Vec& x, double) { return -x; });
}

}  // namespace

TEST_CASE("pure Brownian statistics: mean 0, per-coordinate variance 2 nu t") {
    const DriftField zero = DriftField::zero(GridSpec(2, 2.0, 1.0), 0.5, 3);
    const int n = 100000;
    const PathBatch batch = simulate_paths(zero, {Vec(0.0, 0.0)}, 0.5, 0.01, {1.0}, 11, n);
    double mean0 = 0, var0 = 0, var1 = 0;
    for (int p = 0; p < n; ++p) {
        const Vec& x = batch.position(0, p, 0);
        mean0 += x[0];
        var0 += x[0] * x[0];
        var1 += x[1] * x[1];
    }
    mean0 /= n;
    var0 /= n;
    var1 /= n;
    const double se_mean = 1.0 / std::sqrt(static_cast<double>(n));
    const double se_var = std::sqrt(2.0 / static_cast<double>(n));
    CHECK(std::abs(mean0) < 4.0 * se_mean);
    CHECK(std::abs(var0 - 1.0) < 4.0 * se_var);
    CHECK(std::abs(var1 - 1.0) < 4.0 * se_var);
}

TEST_CASE("constant drift shifts the mean") {
    const DriftField b = constant_drift(1.0, 0.0);
    const int n = 50000;
    const PathBatch batch = simulate_paths(b, {Vec(0.0, 0.0)}, 0.5, 0.01, {1.0}, 12, n);
    double m0 = 0, m1 = 0;
    for (int p = 0; p < n; ++p) {
        m0 += batch.position(0, p, 0)[0];
        m1 += batch.position(0, p, 0)[1];
    }
    m0 /= n;
    m1 /= n;
    const double se = 1.0 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(m0 - 1.0) < 4.0 * se);
    CHECK(std::abs(m1) < 4.0 * se);
}

TEST_CASE("Ornstein-Uhlenbeck variance matches the closed form") {
    const DriftField b = ou_drift(10.0);
    const int n = 100000;
    const PathBatch batch = simulate_paths(b, {Vec(0.0, 0.0)}, 0.5, 0.005, {1.0}, 13, n);
    double var = 0;
    for (int p = 0; p < n; ++p) {
        const double x = batch.position(0, p, 0)[0];
        var += x * x;
    }
    var /= n;
    const double exact = (1.0 - std::exp(-2.0)) / 2.0;  // 0.43233...
    CHECK(exact == doctest::Approx(0.43233).epsilon(1e-4));
    const double se = exact * std::sqrt(2.0 / static_cast<double>(n));
    // 4 standard errors plus the first-order Euler bias at dt = 0.005
    CHECK(std::abs(var - exact) < 4.0 * se + 0.002);
}

TEST_CASE("determinism: identical seeds give bit-identical positions, any thread count") {
    const DriftField b = ou_drift(10.0);
    const PathBatch b1 = simulate_paths(b, {Vec(0.5, -0.25)}, 0.5, 0.01, {0.5, 1.0}, 77, 2000, 1);
    const PathBatch b2 = simulate_paths(b, {Vec(0.5, -0.25)}, 0.5, 0.01, {0.5, 1.0}, 77, 2000, 4);
    REQUIRE(b1.positions.size() == b2.positions.size());
    for (std::size_t i = 0; i < b1.positions.size(); ++i) {
        CHECK(b1.positions[i][0] == b2.positions[i][0]);
        CHECK(b1.positions[i][1] == b2.positions[i][1]);
    }
    const PathBatch b3 = simulate_paths(b, {Vec(0.5, -0.25)}, 0.5, 0.01, {0.5, 1.0}, 78, 2000, 1);
    CHECK(b3.positions[0][0] != b1.positions[0][0]);
}

TEST_CASE("weak order: Euler bias decreases linearly in dt (coupled paths)") {
    // OU mean from x0 = 5: exact e^{-1} x0; euler (1 - dt)^{1/dt} x0.
    // Common increments across the three resolutions keep the noise shared.
    const double x0 = 5.0;
    const int n = 400000;
    const int fine_steps = 200;  // dt = 0.005
    std::vector<double> sums(3, 0.0);
    const std::array<int, 3> strides = {4, 2, 1};  // dt = 0.02, 0.01, 0.005
    std::vector<double> partial(3 * 64, 0.0);
    parallel_for(64, 0, [&](std::size_t chunk) {
        const int lo = static_cast<int>(chunk) * (n / 64);
        const int hi = lo + n / 64;
        double local[3] = {0, 0, 0};
        for (int p = lo; p < hi; ++p) {
            const uint64_t key = substream(99, static_cast<uint64_t>(p));
            double fine_inc[200];
            for (int k = 0; k < fine_steps; k += 2) {
                const NormalPair z = philox_normals(key, static_cast<uint64_t>(k / 2));
                fine_inc[k] = std::sqrt(0.005) * z.z0;
                fine_inc[k + 1] = std::sqrt(0.005) * z.z1;
            }
            for (int lev = 0; lev < 3; ++lev) {
                const int stride = strides[lev];
                const double dt = 0.005 * stride;
                double x = x0;
                for (int k = 0; k < fine_steps; k += stride) {
                    double dB = 0;
                    for (int j = 0; j < stride; ++j) dB += fine_inc[k + j];
                    x += -x * dt + dB;
                }
                local[lev] += x;
            }
        }
        for (int lev = 0; lev < 3; ++lev) partial[chunk * 3 + lev] = local[lev];
    });
    for (std::size_t c = 0; c < 64; ++c)
        for (int lev = 0; lev < 3; ++lev) sums[lev] += partial[c * 3 + lev];

    const double exact = x0 * std::exp(-1.0);
    std::vector<double> log_dt, log_bias;
    for (int lev = 0; lev < 3; ++lev) {
        const double bias = std::abs(sums[lev] / n - exact);
        log_dt.push_back(std::log(0.005 * strides[lev]));
        log_bias.push_back(std::log(bias));
    }
    // least-squares slope over the three levels
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < 3; ++i) {
        sx += log_dt[i];
        sy += log_bias[i];
        sxx += log_dt[i] * log_dt[i];
        sxy += log_dt[i] * log_bias[i];
    }
    const double slope = (3.0 * sxy - sx * sy) / (3.0 * sxx - sx * sx);
    CHECK(slope > 0.7);
    CHECK(slope < 1.3);
}

TEST_CASE("Cameron-Martin weights") {
    SUBCASE("zero drift gives weight exactly 1") {
        const DriftField zero = DriftField::zero(GridSpec(2, 2.0, 1.0), 0.5, 3);
        std::vector<Vec> inc(10, Vec(0.03, -0.01));
        const CMWeight w = cameron_martin_weight(inc, 0.1, zero, 0.0, Vec(0.0, 0.0), 1.0);
        CHECK(w.value == 1.0);
        CHECK(w.log_value == 0.0);
    }
    SUBCASE("constant drift, crafted path with B_1 = (0.5, -0.2)") {
        const DriftField b = constant_drift(1.0, 0.0);
        std::vector<Vec> inc(10, Vec(0.05, -0.02));
        const CMWeight w = cameron_martin_weight(inc, 0.1, b, 0.0, Vec(0.0, 0.0), 1.0);
        CHECK(w.stochastic_part == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(w.quadratic_part == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(w.log_value == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(w.value == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("weight components satisfy value = exp(log_value)") {
        const DriftField b = ou_drift(10.0);
        RngStream rng(5, 1);
        std::vector<Vec> inc;
        for (int k = 0; k < 50; ++k) inc.emplace_back(0.1 * rng.normal(), 0.1 * rng.normal());
        const CMWeight w = cameron_martin_weight(inc, 0.02, b, 0.0, Vec(1.0, 0.0), 1.0);
        CHECK(w.value == doctest::Approx(std::exp(w.log_value)).epsilon(1e-14));
        CHECK(w.log_value ==
              doctest::Approx(w.stochastic_part - 0.5 * w.quadratic_part).epsilon(1e-14));
        CHECK(w.value > 0.0);
    }
}

TEST_CASE("Feynman-Kac estimator") {
    SUBCASE("constant observable is weight-normalized: E R_b = 1") {
        for (const DriftField& b : {constant_drift(1.0, 0.0), ou_drift(10.0)}) {
            const MCEstimate e = feynman_kac_expectation([](const Vec&) { return 1.0; }, b, 0.0,
                                                         Vec(0.0, 0.0), 1.0, 100000, 0.01, 21);
            CHECK(std::abs(e.estimate - 1.0) < 4.0 * e.std_error);
        }
    }
    SUBCASE("Girsanov shift: b = (1,0), f = y1 -> 1.0") {
        const DriftField b = constant_drift(1.0, 0.0);
        const MCEstimate e = feynman_kac_expectation([](const Vec& y) { return y[0]; }, b, 0.0,
                                                     Vec(0.0, 0.0), 1.0, 100000, 0.01, 22);
        CHECK(std::abs(e.estimate - 1.0) < 4.0 * e.std_error);
    }
    SUBCASE("agrees with direct simulation for the OU drift") {
        const DriftField b = ou_drift(10.0);
        auto f = [](const Vec& y) { return y[0] * y[0]; };
        const MCEstimate fk = feynman_kac_expectation(f, b, 0.0, Vec(0.0, 0.0), 1.0, 200000, 0.005, 23);
        const PathBatch direct = simulate_paths(b, {Vec(0.0, 0.0)}, 0.5, 0.005, {1.0}, 24, 200000);
        double mean = 0, m2 = 0;
        for (std::size_t p = 0; p < direct.n_paths(); ++p) {
            const double v = f(direct.position(0, static_cast<int>(p), 0));
            mean += v;
            m2 += v * v;
        }
        mean /= static_cast<double>(direct.n_paths());
        const double se_direct =
            std::sqrt((m2 / static_cast<double>(direct.n_paths()) - mean * mean) /
                      (static_cast<double>(direct.n_paths()) - 1.0));
        const double combined = std::sqrt(fk.std_error * fk.std_error + se_direct * se_direct);
        CHECK(std::abs(fk.estimate - mean) < 4.0 * combined);
    }
    SUBCASE("path-count precondition") {
        const DriftField b = constant_drift(0.0, 0.0);
        CHECK_THROWS(
            feynman_kac_expectation([](const Vec&) { return 1.0; }, b, 0.0, Vec(0.0, 0.0), 1.0, 50, 0.01, 1));
    }
}

TEST_CASE("kernel density estimate of the transition density") {
    const DriftField zero = DriftField::zero(GridSpec(2, 2.0, 1.0), 0.5, 3);
    const int n = 100000;
    const PathBatch batch = simulate_paths(zero, {Vec(0.0, 0.0)}, 0.5, 0.01, {1.0}, 31, n);
    const GridSpec grid(2, 5.0, 0.25);
    const DensityGrid kde = density_kde(batch, 1.0, grid);

    SUBCASE("nonnegative, unit mass within 1e-2, L1-close to the exact Gaussian") {
        double l1 = 0;
        for (std::size_t node = 0; node < grid.node_count(); ++node) {
            CHECK(kde.p[node] >= 0.0);
            const double exact = gaussian_density(2, 1.0, grid.node(node).norm2());
            l1 += std::abs(kde.p[node] - exact) * grid.cell_volume();
        }
        CHECK(std::abs(kde.mass_on_grid - 1.0) < 1e-2);
        CHECK(l1 < 0.05);
    }

    SUBCASE("KDE lies inside the Aronson envelope at 1.1 x the calibrated M") {
        const double M = 1.1 * 2.0 * std::numbers::pi;  // calibrated M for the exact density is 2 pi
        for (std::size_t node = 0; node < grid.node_count(); ++node) {
            const AronsonEnvelope env = aronson_envelope(M, 1.0, grid.node(node).norm(), 2);
            CHECK(kde.p[node] <= env.upper);
            CHECK(kde.p[node] >= env.lower * 0.999 - 1e-9);
        }
    }

    SUBCASE("degenerate inputs are rejected") {
        CHECK_THROWS(density_kde(batch, 0.123, grid));  // time not recorded
        PathBatch tiny = batch;
        tiny.n_paths_per_start = 500;
        tiny.positions.resize(500);
        CHECK_THROWS(density_kde(tiny, 1.0, grid));  // too few paths
    }
}

TEST_CASE("unit-diffusion rescaling round-trips and is the identity at nu = 1/2") {
    const DriftField b = ou_drift(10.0);
    SUBCASE("nu = 1/2 is the identity") {
        const DriftField u = rescale_to_unit_diffusion(b, 0.5);
        CHECK(u.grid.half_width == b.grid.half_width);
        for (std::size_t i = 0; i < b.values.size(); ++i) CHECK(u.values[i] == b.values[i]);
    }
    SUBCASE("round trip at nu = 0.8") {
        const DriftField u = rescale_to_unit_diffusion(b, 0.8);
        const DriftField back = rescale_from_unit_diffusion(u, 0.8);
        CHECK(back.grid.half_width == doctest::Approx(b.grid.half_width).epsilon(1e-15));
        for (std::size_t i = 0; i < b.values.size(); ++i)
            CHECK(back.values[i] == doctest::Approx(b.values[i]).epsilon(1e-14));
    }
    SUBCASE("rescaled field drives the expected unit-diffusion law") {
        // engine OU at nu = 0.8 observed through the rescaling equals the
        // unit-diffusion OU: Y = X / sqrt(2 nu) has drift -Y and noise dB
        const double nu = 0.8;
        const DriftField u = rescale_to_unit_diffusion(b, nu);
        const int n = 100000;
        const PathBatch engine = simulate_paths(b, {Vec(0.0, 0.0)}, nu, 0.005, {1.0}, 41, n);
        const PathBatch unit = simulate_paths(u, {Vec(0.0, 0.0)}, 0.5, 0.005, {1.0}, 42, n);
        double var_engine = 0, var_unit = 0;
        for (int p = 0; p < n; ++p) {
            var_engine += engine.position(0, p, 0).norm2();
            var_unit += unit.position(0, p, 0).norm2();
        }
        var_engine /= n;
        var_unit /= n;
        CHECK(var_engine / (2.0 * nu) == doctest::Approx(var_unit).epsilon(0.03));
    }
}

TEST_CASE("observation times beyond the horizon are rejected") {
    const DriftField b = constant_drift(0.0, 0.0, 12.0, 1.0);
    CHECK_THROWS(simulate_paths(b, {Vec(0.0, 0.0)}, 0.5, 0.01, {2.0}, 1, 100));
}

TEST_CASE("drift field NDJSON serialization round-trips bit-exactly") {
    const DriftField b = ou_drift(10.0, 1.0, 0.25);
    const std::string path = "/tmp/mvsde_test_drift.ndjson";
    write_drift_field_ndjson(b, path);
    const DriftField back = read_drift_field_ndjson(path);
    CHECK(back.grid.half_width == b.grid.half_width);
    CHECK(back.grid.h == b.grid.h);
    CHECK(back.dt_grid == b.dt_grid);
    CHECK(back.n_times == b.n_times);
    REQUIRE(back.values.size() == b.values.size());
    for (std::size_t i = 0; i < b.values.size(); ++i) CHECK(back.values[i] == b.values[i]);
    CHECK(back.sup_norm == b.sup_norm);
    std::remove(path.c_str());
}

TEST_CASE("path batch CSV and density NDJSON exports carry the declared columns") {
    const DriftField zero = DriftField::zero(GridSpec(2, 2.0, 1.0), 0.5, 3);
    const PathBatch batch = simulate_paths(zero, {Vec(0.0, 0.0), Vec(1.0, 0.0)}, 0.5, 0.01, {0.5, 1.0}, 3, 600);
    const std::string csv_path = "/tmp/mvsde_test_paths.csv";
    write_pathbatch_csv(batch, csv_path);
    {
        std::ifstream in(csv_path);
        std::string header;
        std::getline(in, header);
        CHECK(header == "path_id,start_id,t,x1,x2");
        std::string first;
        std::getline(in, first);
        CHECK(first.rfind("0,0,0.5,", 0) == 0);
        std::size_t lines = 1;
        std::string line;
        while (std::getline(in, line)) ++lines;
        CHECK(lines == batch.n_paths() * 2);
    }
    std::remove(csv_path.c_str());

    const PathBatch big = simulate_paths(zero, {Vec(0.0, 0.0)}, 0.5, 0.01, {1.0}, 4, 2000);
    const DensityGrid kde = density_kde(big, 1.0, GridSpec(2, 4.0, 0.5));
    const std::string nd_path = "/tmp/mvsde_test_density.ndjson";
    write_density_ndjson(kde, nd_path);
    {
        std::ifstream in(nd_path);
        std::string line;
        std::size_t records = 0;
        while (std::getline(in, line)) {
            if (records == 0) {
                CHECK(line.find("\"t\":1") != std::string::npos);
                CHECK(line.find("\"x\":[") != std::string::npos);
                CHECK(line.find("\"p\":") != std::string::npos);
            }
            ++records;
        }
        CHECK(records == kde.grid.node_count());
    }
    std::remove(nd_path.c_str());
}
