#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvsde {

inline constexpr int kMaxDim = 3;

/// Small vector with runtime dimension d in {1,2,3}, fixed storage.
struct Vec {
    int d = 0;
    std::array<double, kMaxDim> c{0.0, 0.0, 0.0};

    Vec() = default;
    explicit Vec(int dim) : d(dim) {
        if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("Vec: dimension must be 1..3");
    }
    Vec(double x, double y) : d(2), c{x, y, 0.0} {}
    Vec(double x, double y, double z) : d(3), c{x, y, z} {}

    static Vec zero(int dim) { return Vec(dim); }
    static Vec axis(int dim, int i, double v = 1.0) {
        Vec r(dim);
        r.c[i] = v;
        return r;
    }

    double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

    Vec& operator+=(const Vec& o) {
        for (int i = 0; i < d; ++i) c[i] += o.c[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        for (int i = 0; i < d; ++i) c[i] -= o.c[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (int i = 0; i < d; ++i) c[i] *= s;
        return *this;
    }

    friend Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend Vec operator*(Vec a, double s) { return a *= s; }
    friend Vec operator*(double s, Vec a) { return a *= s; }
    friend Vec operator-(Vec a) { return a *= -1.0; }

    double dot(const Vec& o) const {
        double s = 0;
        for (int i = 0; i < d; ++i) s += c[i] * o.c[i];
        return s;
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }

    bool finite() const {
        for (int i = 0; i < d; ++i)
            if (!std::isfinite(c[i])) return false;
        return true;
    }
};

/// d x d matrix, row-major, fixed storage.
struct Mat {
    int d = 0;
    std::array<double, kMaxDim * kMaxDim> m{};

    Mat() = default;
    explicit Mat(int dim) : d(dim) {
        if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("Mat: dimension must be 1..3");
        m.fill(0.0);
    }
    static Mat zero(int dim) { return Mat(dim); }
    static Mat identity(int dim) {
        Mat r(dim);
        for (int i = 0; i < dim; ++i) r(i, i) = 1.0;
        return r;
    }

    double& operator()(int i, int j) { return m[static_cast<std::size_t>(i * d + j)]; }
    double operator()(int i, int j) const { return m[static_cast<std::size_t>(i * d + j)]; }

    Mat& operator+=(const Mat& o) {
        for (int i = 0; i < d * d; ++i) m[i] += o.m[i];
        return *this;
    }
    Mat& operator-=(const Mat& o) {
        for (int i = 0; i < d * d; ++i) m[i] -= o.m[i];
        return *this;
    }
    Mat& operator*=(double s) {
        for (int i = 0; i < d * d; ++i) m[i] *= s;
        return *this;
    }
    friend Mat operator+(Mat a, const Mat& b) { return a += b; }
    friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
    friend Mat operator*(Mat a, double s) { return a *= s; }
    friend Mat operator*(double s, Mat a) { return a *= s; }

    Vec apply(const Vec& v) const {
        Vec r(d);
        for (int i = 0; i < d; ++i) {
            double s = 0;
            for (int j = 0; j < d; ++j) s += (*this)(i, j) * v[j];
            r[i] = s;
        }
        return r;
    }

    double max_abs() const {
        double r = 0;
        for (int i = 0; i < d * d; ++i) r = std::max(r, std::abs(m[i]));
        return r;
    }

    bool finite() const {
        for (int i = 0; i < d * d; ++i)
            if (!std::isfinite(m[i])) return false;
        return true;
    }
};

/// Operator 2-norm (largest singular value) via Jacobi eigensolve of A^T A.
double spectral_norm(const Mat& a);

/// Uniform node grid over the box [-half_width, half_width]^d with spacing h.
struct GridSpec {
    int d = 0;
    double half_width = 0;
    double h = 0;

    GridSpec() = default;
    GridSpec(int dim, double half_width_, double h_) : d(dim), half_width(half_width_), h(h_) {
        if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("GridSpec: dimension must be 1..3");
        if (h_ <= 0 || half_width_ <= 0) throw std::invalid_argument("GridSpec: h and half_width must be positive");
        const double ratio = 2.0 * half_width_ / h_;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
            throw std::invalid_argument("GridSpec: 2*half_width must be an integer multiple of h");
    }

    int per_axis() const { return static_cast<int>(std::llround(2.0 * half_width / h)) + 1; }

    std::size_t node_count() const {
        std::size_t n = 1;
        for (int i = 0; i < d; ++i) n *= static_cast<std::size_t>(per_axis());
        return n;
    }

    double coord(int i) const { return -half_width + i * h; }

    Vec node(std::size_t idx) const {
        const std::size_t n = static_cast<std::size_t>(per_axis());
        Vec r(d);
        for (int i = 0; i < d; ++i) {
            r[i] = coord(static_cast<int>(idx % n));
            idx /= n;
        }
        return r;
    }

    std::size_t index(const std::array<int, kMaxDim>& mi) const {
        const std::size_t n = static_cast<std::size_t>(per_axis());
        std::size_t idx = 0;
        for (int i = d - 1; i >= 0; --i) idx = idx * n + static_cast<std::size_t>(mi[i]);
        return idx;
    }

    double cell_volume() const {
        double v = 1;
        for (int i = 0; i < d; ++i) v *= h;
        return v;
    }

    bool operator==(const GridSpec& o) const {
        return d == o.d && half_width == o.half_width && h == o.h;
    }
};

}  // namespace mvsde
