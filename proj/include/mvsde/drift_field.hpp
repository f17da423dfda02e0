#pragma once

// Space-time grid of drift vectors b(x, t): multilinear interpolation in
// space, piecewise-constant (left) in time, zero outside the box.  The
// interpolant is a convex combination of node values, so the recorded
// sup-norm bounds |b| everywhere.

#include <functional>
#include <string>
#include <vector>

#include "mvsde/geometry.hpp"

namespace mvsde {

struct DriftField {
    GridSpec grid;
    double dt_grid = 0;
    int n_times = 0;  // slices at t_j = j * dt_grid, j = 0 .. n_times-1
    std::vector<double> values;  // [time][node][component]
    double sup_norm = 0;

    DriftField() = default;
    DriftField(GridSpec g, double dt, int nt);

    static DriftField zero(GridSpec g, double dt, int nt) { return DriftField(g, dt, nt); }
    static DriftField from_function(GridSpec g, double dt, int nt,
                                    const std::function<Vec(const Vec&, double)>& fn);

    double horizon() const { return dt_grid * (n_times - 1); }
    double time_of(int j) const { return dt_grid * j; }

    std::size_t offset(int time_idx, std::size_t node) const {
        return (static_cast<std::size_t>(time_idx) * grid.node_count() + node) * grid.d;
    }
    Vec node_value(int time_idx, std::size_t node) const {
        Vec v(grid.d);
        const std::size_t o = offset(time_idx, node);
        for (int i = 0; i < grid.d; ++i) v[i] = values[o + i];
        return v;
    }
    void set_node_value(int time_idx, std::size_t node, const Vec& v) {
        const std::size_t o = offset(time_idx, node);
        for (int i = 0; i < grid.d; ++i) values[o + i] = v[i];
    }

    /// b(x, t); zero outside the spatial box, slices clamped to [0, n_times-1].
    Vec eval(const Vec& x, double t) const;

    void recompute_sup_norm();

    bool finite() const;
};

/// Grid-sup distance max over nodes and slices of |a - b| (same layout required).
double grid_sup_distance(const DriftField& a, const DriftField& b);

void write_drift_field_ndjson(const DriftField& f, const std::string& path);
DriftField read_drift_field_ndjson(const std::string& path);

}  // namespace mvsde
