#include "mvsde/drift_field.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "mvsde/io_util.hpp"

namespace mvsde {

DriftField::DriftField(GridSpec g, double dt, int nt) : grid(g), dt_grid(dt), n_times(nt) {
    if (dt <= 0 || nt < 1) throw std::invalid_argument("DriftField: dt_grid must be positive, n_times >= 1");
    values.assign(static_cast<std::size_t>(nt) * g.node_count() * g.d, 0.0);
}

DriftField DriftField::from_function(GridSpec g, double dt, int nt,
                                     const std::function<Vec(const Vec&, double)>& fn) {
    DriftField f(g, dt, nt);
    const std::size_t nodes = g.node_count();
    for (int j = 0; j < nt; ++j) {
        const double t = f.time_of(j);
        for (std::size_t n = 0; n < nodes; ++n) f.set_node_value(j, n, fn(g.node(n), t));
    }
    f.recompute_sup_norm();
    return f;
}

Vec DriftField::eval(const Vec& x, double t) const {
    const int d = grid.d;
    int j = static_cast<int>(std::floor(t / dt_grid));
    if (j < 0) j = 0;
    if (j > n_times - 1) j = n_times - 1;

    const int n = grid.per_axis();
    int base[kMaxDim];
    double frac[kMaxDim];
    for (int i = 0; i < d; ++i) {
        const double s = (x[i] + grid.half_width) / grid.h;
        if (s < 0.0 || s > static_cast<double>(n - 1)) return Vec::zero(d);
        int i0 = static_cast<int>(std::floor(s));
        double f = s - i0;
        if (i0 >= n - 1) {  // x exactly on the upper face
            i0 = n - 2;
            f = 1.0;
        }
        base[i] = i0;
        frac[i] = f;
    }

    Vec out(d);
    const int corners = 1 << d;
    for (int c = 0; c < corners; ++c) {
        double w = 1;
        std::array<int, kMaxDim> mi{};
        for (int i = 0; i < d; ++i) {
            const int bit = (c >> i) & 1;
            mi[i] = base[i] + bit;
            w *= bit ? frac[i] : 1.0 - frac[i];
        }
        if (w == 0.0) continue;
        const std::size_t node = grid.index(mi);
        const std::size_t o = offset(j, node);
        for (int i = 0; i < d; ++i) out[i] += w * values[o + i];
    }
    return out;
}

void DriftField::recompute_sup_norm() {
    double s = 0;
    const std::size_t nodes = grid.node_count();
    for (int j = 0; j < n_times; ++j)
        for (std::size_t n = 0; n < nodes; ++n) s = std::max(s, node_value(j, n).norm());
    sup_norm = s;
}

bool DriftField::finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

double grid_sup_distance(const DriftField& a, const DriftField& b) {
    if (!(a.grid == b.grid) || a.n_times != b.n_times || a.dt_grid != b.dt_grid)
        throw std::invalid_argument("grid_sup_distance: incompatible fields");
    double s = 0;
    const std::size_t nodes = a.grid.node_count();
    for (int j = 0; j < a.n_times; ++j)
        for (std::size_t n = 0; n < nodes; ++n) s = std::max(s, (a.node_value(j, n) - b.node_value(j, n)).norm());
    return s;
}

void write_drift_field_ndjson(const DriftField& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "{\"type\":\"drift_field\",\"d\":" << f.grid.d << ",\"half_width\":" << fmt17(f.grid.half_width)
        << ",\"h\":" << fmt17(f.grid.h) << ",\"dt_grid\":" << fmt17(f.dt_grid) << ",\"n_times\":" << f.n_times
        << ",\"sup_norm\":" << fmt17(f.sup_norm) << "}\n";
    const std::size_t per_slice = f.grid.node_count() * f.grid.d;
    for (int j = 0; j < f.n_times; ++j) {
        out << "{\"t\":" << fmt17(f.time_of(j)) << ",\"values\":[";
        const std::size_t o = f.offset(j, 0);
        for (std::size_t i = 0; i < per_slice; ++i) {
            if (i) out << ',';
            out << fmt17(f.values[o + i]);
        }
        out << "]}\n";
    }
}

DriftField read_drift_field_ndjson(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty drift field file: " + path);
    const auto header = nlohmann::json::parse(line);
    if (header.value("type", "") != "drift_field")
        throw std::runtime_error("not a drift field file: " + path);
    const GridSpec grid(header.at("d").get<int>(), header.at("half_width").get<double>(),
                        header.at("h").get<double>());
    DriftField f(grid, header.at("dt_grid").get<double>(), header.at("n_times").get<int>());
    const std::size_t per_slice = grid.node_count() * grid.d;
    for (int j = 0; j < f.n_times; ++j) {
        if (!std::getline(in, line)) throw std::runtime_error("truncated drift field file: " + path);
        const auto rec = nlohmann::json::parse(line);
        const auto& vals = rec.at("values");
        if (vals.size() != per_slice) throw std::runtime_error("slice size mismatch in " + path);
        const std::size_t o = f.offset(j, 0);
        for (std::size_t i = 0; i < per_slice; ++i) f.values[o + i] = vals[i].get<double>();
    }
    f.recompute_sup_norm();
    return f;
}

}  // namespace mvsde
