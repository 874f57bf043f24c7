#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "hjb/errors.hpp"

namespace hjb {

struct GridSpec {
    double dt = 0.04;
    double dx = 0.0333;
    double dr = 0.833;
    int n_t = 250;
    int i_max = 30;
    int k_min = -60;
    int k_max = 60;
    double x_offset = 0.0;
    double r_offset = 0.0;
};

inline void validate(const GridSpec& s)
{
    if (!(s.dt > 0.0 && s.dx > 0.0 && s.dr > 0.0))
        fail(ErrorKind::config, "grid steps must be positive");
    if (!(std::isfinite(s.dt) && std::isfinite(s.dx) && std::isfinite(s.dr)))
        fail(ErrorKind::config, "grid steps must be finite");
    if (s.n_t < 2) fail(ErrorKind::config, "n_t must be at least 2");
    if (s.i_max < 1) fail(ErrorKind::config, "i_max must be at least 1");
    if (s.k_max <= s.k_min) fail(ErrorKind::config, "k_max must exceed k_min");
}

inline double mesh_h(const GridSpec& s)
{
    return std::max({s.dt, s.dx, s.dr});
}

class Grid {
public:
    explicit Grid(const GridSpec& s) : spec_(s) { validate(s); }

    const GridSpec& spec() const { return spec_; }

    // coordinates are affine in the integer index, never accumulated
    double x_of(int i) const { return i * spec_.dx + spec_.x_offset; }
    double r_of(int k) const { return k * spec_.dr + spec_.r_offset; }
    double t_of(int n) const { return n * spec_.dt; }

    int i_max() const { return spec_.i_max; }
    int k_min() const { return spec_.k_min; }
    int k_max() const { return spec_.k_max; }
    int nx() const { return 2 * spec_.i_max + 1; }
    int nr() const { return spec_.k_max - spec_.k_min + 1; }
    std::size_t size() const { return std::size_t(nx()) * nr(); }

    std::size_t index(int i, int k) const
    {
        return std::size_t(i + spec_.i_max) * nr() + std::size_t(k - spec_.k_min);
    }
    bool is_boundary(int i, int k) const
    {
        return i == -spec_.i_max || i == spec_.i_max || k == spec_.k_min || k == spec_.k_max;
    }
    // largest |x| on the lattice
    double x_abs_max() const
    {
        return std::max(std::abs(x_of(-spec_.i_max)), std::abs(x_of(spec_.i_max)));
    }

private:
    GridSpec spec_;
};

inline Grid build_grid(const GridSpec& s) { return Grid(s); }

// One time layer, row-major in i with k contiguous.
class Field {
public:
    Field() = default;
    Field(const Grid& g, int n, double fill = 0.0)
        : n_(n), i_max_(g.i_max()), k_min_(g.k_min()), k_max_(g.k_max()),
          values_(g.size(), fill) {}

    int layer() const { return n_; }
    void set_layer(int n) { n_ = n; }
    int i_max() const { return i_max_; }
    int k_min() const { return k_min_; }
    int k_max() const { return k_max_; }
    int nr() const { return k_max_ - k_min_ + 1; }
    int nx() const { return 2 * i_max_ + 1; }

    double& operator()(int i, int k) { return values_[offset(i, k)]; }
    double operator()(int i, int k) const { return values_[offset(i, k)]; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    bool same_shape(const Field& o) const
    {
        return i_max_ == o.i_max_ && k_min_ == o.k_min_ && k_max_ == o.k_max_;
    }
    bool same_shape(const Grid& g) const
    {
        return i_max_ == g.i_max() && k_min_ == g.k_min() && k_max_ == g.k_max();
    }

    bool all_finite() const
    {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    double max_abs() const
    {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    std::size_t offset(int i, int k) const
    {
        return std::size_t(i + i_max_) * std::size_t(nr()) + std::size_t(k - k_min_);
    }

    int n_ = 0;
    int i_max_ = 0;
    int k_min_ = 0;
    int k_max_ = 0;
    std::vector<double> values_;
};

// Dirichlet data on the lattice edge: x_lo/x_hi indexed by k, r_lo/r_hi indexed by i.
struct BoundarySlice {
    int n = 0;
    std::vector<double> x_lo, x_hi;
    std::vector<double> r_lo, r_hi;
};

inline BoundarySlice constant_boundary(const Grid& g, int n, double v)
{
    BoundarySlice b;
    b.n = n;
    b.x_lo.assign(g.nr(), v);
    b.x_hi.assign(g.nr(), v);
    b.r_lo.assign(g.nx(), v);
    b.r_hi.assign(g.nx(), v);
    return b;
}

// boundary taken from an existing layer
inline BoundarySlice boundary_of(const Field& f)
{
    BoundarySlice b;
    b.n = f.layer();
    int im = f.i_max();
    for (int k = f.k_min(); k <= f.k_max(); ++k) {
        b.x_lo.push_back(f(-im, k));
        b.x_hi.push_back(f(im, k));
    }
    for (int i = -im; i <= im; ++i) {
        b.r_lo.push_back(f(i, f.k_min()));
        b.r_hi.push_back(f(i, f.k_max()));
    }
    return b;
}

inline void apply_boundary(const BoundarySlice& b, Field& f)
{
    int im = f.i_max();
    if (int(b.x_lo.size()) != f.nr() || int(b.r_lo.size()) != f.nx())
        fail(ErrorKind::usage, "boundary slice does not match field shape");
    for (int i = -im; i <= im; ++i) {
        f(i, f.k_min()) = b.r_lo[i + im];
        f(i, f.k_max()) = b.r_hi[i + im];
    }
    for (int k = f.k_min(); k <= f.k_max(); ++k) {
        f(-im, k) = b.x_lo[k - f.k_min()];
        f(im, k) = b.x_hi[k - f.k_min()];
    }
}

} // namespace hjb
