#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hjb/errors.hpp"
#include "hjb/explicit_scheme.hpp"
#include "hjb/grid.hpp"
#include "hjb/model.hpp"
#include "hjb/oracle.hpp"
#include "hjb/run.hpp"
#include "hjb/stencil.hpp"

namespace hjb {

struct SchemeReport {
    double cfl_lhs = 0.0;
    double k_o_used = 0.0;
    double max_abs_error = 0.0;
    double max_rel_error_small_t = 0.0;
    double max_rel_error_large_t = 0.0;
    long probe_pass = 0;
    long probe_fail = 0;
    double stability_bound = 0.0;
    double max_abs_observed = 0.0;
    double runtime = 0.0;
};

using ScalarField3 = std::function<double(double t, double x, double r)>;

// ---------------------------------------------------------------- error metrics

struct ErrorOptions {
    double split_t = 2.0;
    double abs_floor = 1e-8;       // absolute error is used where |exact| is below this
    std::optional<int> k_slice;    // restrict to one r index
    int x_margin = 0;              // skip this many x indices next to the boundary
};

struct LayerError {
    int n;
    double t;
    double max_abs;
    double max_rel;
    double boundary_max_abs;
};

struct ErrorProfile {
    std::vector<LayerError> layers;
    double max_abs = 0.0;
    double max_rel_small_t = 0.0;
    double max_rel_large_t = 0.0;
    double boundary_max_abs = 0.0;
};

class ErrorAccumulator {
public:
    ErrorAccumulator(const Grid& g, ScalarField3 exact, ErrorOptions opt = {})
        : grid_(g), exact_(std::move(exact)), opt_(opt) {}

    void add(const Field& w)
    {
        if (!w.same_shape(grid_)) fail(ErrorKind::usage, "history layer does not match grid");
        const Grid& g = grid_;
        double t = g.t_of(w.layer());
        LayerError le{w.layer(), t, 0.0, 0.0, 0.0};
        for (int i = -g.i_max(); i <= g.i_max(); ++i)
            for (int k = g.k_min(); k <= g.k_max(); ++k) {
                double ex = exact_(t, g.x_of(i), g.r_of(k));
                double err = std::abs(w(i, k) - ex);
                if (g.is_boundary(i, k)) {
                    le.boundary_max_abs = std::max(le.boundary_max_abs, err);
                    continue;
                }
                if (std::abs(i) > g.i_max() - 1 - opt_.x_margin) continue;
                if (opt_.k_slice && k != *opt_.k_slice) continue;
                double rel = std::abs(ex) < opt_.abs_floor ? err : err / std::abs(ex);
                le.max_abs = std::max(le.max_abs, err);
                le.max_rel = std::max(le.max_rel, rel);
            }
        prof_.layers.push_back(le);
        prof_.max_abs = std::max(prof_.max_abs, le.max_abs);
        prof_.boundary_max_abs = std::max(prof_.boundary_max_abs, le.boundary_max_abs);
        if (t <= opt_.split_t) prof_.max_rel_small_t = std::max(prof_.max_rel_small_t, le.max_rel);
        else prof_.max_rel_large_t = std::max(prof_.max_rel_large_t, le.max_rel);
    }

    const ErrorProfile& profile() const { return prof_; }

private:
    Grid grid_;
    ScalarField3 exact_;
    ErrorOptions opt_;
    ErrorProfile prof_;
};

inline ErrorProfile relative_error_profile(const std::vector<Field>& history, const ScalarField3& exact,
                                           const Grid& g, ErrorOptions opt = {})
{
    ErrorAccumulator acc(g, exact, opt);
    for (const auto& w : history) acc.add(w);
    return acc.profile();
}

// ---------------------------------------------------------------- monotonicity probe

struct ProbeSetup {
    SchemeKind kind = SchemeKind::explicit_simple;
    ModelParams params;
    GridSpec grid;           // dt, dx, dr and i_max are used
    double k_o = 1.0;        // premise: r-slopes at most -k_o
    double delta = 0.5;      // premise: neighbour gaps at most delta
    double value_range = 5.0;
};

struct ProbeCounterexample {
    Stencil stencil;
    double w_other; // w_next for explicit, w_prev for implicit
    int i;
    int argument;   // 0 c/prev, 1 left, 2 right, 3 down, 4 up
    double eps;
    double s_before, s_after;
};

struct ProbeReport {
    long trials = 0;
    long checks = 0;
    long skipped = 0;
    long failures = 0;
    double cfl_lhs = 0.0;
    std::vector<ProbeCounterexample> counterexamples; // first few only
};

inline const char* probe_argument_name(SchemeKind k, int a)
{
    static const char* names[] = {"center", "left", "right", "down", "up"};
    if (a == 0 && is_implicit(k)) return "previous";
    return names[a];
}

namespace detail {

inline bool probe_premise(const Stencil& s, double k_o, double dr, double delta)
{
    double d = s.c - s.down, e = s.c - s.up;
    if (!(d <= -k_o * dr && d >= -delta)) return false;
    if (!(e >= k_o * dr && e <= delta)) return false;
    return std::abs(s.c - s.left) <= delta && std::abs(s.c - s.right) <= delta;
}

} // namespace detail

// Samples stencils inside the premise region and checks that the scheme value does not
// increase when any single argument increases.
inline ProbeReport probe_delta_monotonicity(const ProbeSetup& setup, long trials, std::uint64_t seed)
{
    ProbeReport rep;
    const GridSpec& gs = setup.grid;
    const double dt = gs.dt, dr = gs.dr;
    if (setup.k_o * dr >= setup.delta)
        fail(ErrorKind::config, "probe premise is empty: k_o * dr must be below delta");
    ExplicitConfig ec{setup.params, gs, setup.k_o};
    if (!is_implicit(setup.kind)) {
        rep.cfl_lhs = setup.kind == SchemeKind::explicit_simple ? cfl_simple(ec) : cfl_general_max(ec);
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double eps_set[] = {1e-6, 1e-3, 0.05};
    Grid g(gs);

    with_operator(setup.params, gs.dr, gs.dx, 0.0, false, [&](const auto& op) {
        auto value = [&](const CellCoeffs& cc, const Stencil& s, double other) {
            return is_implicit(setup.kind) ? implicit_scheme_value(op, cc, dt, other, s)
                                           : explicit_scheme_value(op, cc, dt, other, s);
        };
        for (long t = 0; t < trials; ++t) {
            ++rep.trials;
            int i = -g.i_max() + int(unit(rng) * (2 * g.i_max() + 1));
            i = std::clamp(i, -g.i_max(), g.i_max());
            CellCoeffs cc = cell_coeffs(g.x_of(i), setup.params.sigma, setup.params.b, dr);
            double lo = setup.k_o * dr, hi = setup.delta;
            Stencil s;
            s.c = setup.value_range * (2.0 * unit(rng) - 1.0);
            s.down = s.c + lo + (hi - lo) * unit(rng);
            s.up = s.c - lo - (hi - lo) * unit(rng);
            s.left = s.c + setup.delta * (2.0 * unit(rng) - 1.0);
            s.right = s.c + setup.delta * (2.0 * unit(rng) - 1.0);
            double other = s.c + setup.delta * (2.0 * unit(rng) - 1.0);
            double base = value(cc, s, other);
            for (int a = 0; a < 5; ++a)
                for (double eps : eps_set) {
                    Stencil p = s;
                    double po = other;
                    if (a == 0) {
                        if (is_implicit(setup.kind)) po += eps;
                        else p.c += eps;
                    } else if (a == 1) p.left += eps;
                    else if (a == 2) p.right += eps;
                    else if (a == 3) p.down += eps;
                    else p.up += eps;
                    if (!detail::probe_premise(p, setup.k_o, dr, setup.delta)) {
                        ++rep.skipped;
                        continue;
                    }
                    ++rep.checks;
                    double after = value(cc, p, po);
                    double tol = 1e-12 * (1.0 + std::abs(base) + (std::abs(s.c) + std::abs(other)) / dt);
                    if (after > base + tol) {
                        ++rep.failures;
                        if (rep.counterexamples.size() < 8)
                            rep.counterexamples.push_back({s, other, i, a, eps, base, after});
                    }
                }
        }
        return 0;
    });
    return rep;
}

// ---------------------------------------------------------------- consistency order

struct TestFunction {
    std::function<double(double, double, double)> phi;
    std::function<double(double, double, double)> phi_t, phi_x, phi_r, phi_rr;
};

// phi = -r + c x^2 (1 + t)
inline TestFunction manufactured_quadratic(double c = 0.1)
{
    return {
        [c](double t, double x, double r) { return -r + c * x * x * (1.0 + t); },
        [c](double, double x, double) { return c * x * x; },
        [c](double t, double x, double) { return 2.0 * c * x * (1.0 + t); },
        [](double, double, double) { return -1.0; },
        [](double, double, double) { return 0.0; },
    };
}

struct OrderStudy {
    std::vector<double> h;
    std::vector<double> residual;
    double slope = 0.0;
    bool degenerate = false; // residuals vanish: the function is an exact discrete solution
};

inline double least_squares_slope(const std::vector<double>& xs, const std::vector<double>& ys)
{
    double n = double(xs.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
        sx += xs[j];
        sy += ys[j];
        sxx += xs[j] * xs[j];
        sxy += xs[j] * ys[j];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Explicit scheme truncation at (t, x, r) with dt = dx = dr = h.
inline OrderStudy consistency_order_study(const ModelParams& p, const TestFunction& f, double t, double x,
                                          double r, const std::vector<double>& hs)
{
    if (hs.size() < 3) fail(ErrorKind::usage, "order study needs at least three mesh sizes");
    for (std::size_t j = 1; j < hs.size(); ++j)
        if (!(hs[j] < hs[j - 1])) fail(ErrorKind::usage, "mesh sizes must be strictly decreasing");
    OrderStudy st;
    double exact = continuous_operator(p, x, f.phi_t(t, x, r), f.phi_x(t, x, r), f.phi_r(t, x, r),
                                       f.phi_rr(t, x, r));
    for (double h : hs) {
        Stencil s{f.phi(t, x, r), f.phi(t, x - h, r), f.phi(t, x + h, r), f.phi(t, x, r - h),
                  f.phi(t, x, r + h)};
        double next = f.phi(t + h, x, r);
        double sv = with_operator(p, h, h, 0.0, false, [&](const auto& op) {
            CellCoeffs cc = cell_coeffs(x, p.sigma, p.b, h);
            return explicit_scheme_value(op, cc, h, next, s);
        });
        st.h.push_back(h);
        st.residual.push_back(std::abs(sv - exact));
    }
    if (std::all_of(st.residual.begin(), st.residual.end(), [](double v) { return v < 1e-13; })) {
        st.degenerate = true;
        return st;
    }
    std::vector<double> lx, ly;
    for (std::size_t j = 0; j < hs.size(); ++j) {
        lx.push_back(std::log(st.h[j]));
        ly.push_back(std::log(std::max(st.residual[j], 1e-300)));
    }
    st.slope = least_squares_slope(lx, ly);
    return st;
}

// Largest one-step defect dt * S of the explicit scheme on exact layers n -> n+1 for
// source layers n in [n_lo, n_hi), interior cells only.
inline double scheme_defect_on_exact(const ExplicitConfig& cfg, const ScalarField3& exact, int n_lo, int n_hi,
                                     double* max_raw = nullptr)
{
    Grid g(cfg.grid);
    double worst = 0.0, worst_raw = 0.0;
    with_operator(cfg.params, g.spec().dr, g.spec().dx, cfg.quotient_floor, cfg.clamp_denominator,
                  [&](const auto& op) {
        Field a(g, 0), b(g, 0);
        for (int n = n_lo; n < n_hi; ++n) {
            double t = g.t_of(n), t1 = g.t_of(n + 1);
            for (int i = -g.i_max(); i <= g.i_max(); ++i)
                for (int k = g.k_min(); k <= g.k_max(); ++k) {
                    a(i, k) = exact(t, g.x_of(i), g.r_of(k));
                    b(i, k) = exact(t1, g.x_of(i), g.r_of(k));
                }
            for (int i = -g.i_max() + 1; i < g.i_max(); ++i) {
                CellCoeffs cc = cell_coeffs(g.x_of(i), cfg.params.sigma, cfg.params.b, g.spec().dr);
                for (int k = g.k_min() + 1; k < g.k_max(); ++k) {
                    Stencil s{a(i, k), a(i - 1, k), a(i + 1, k), a(i, k - 1), a(i, k + 1)};
                    double sv = explicit_scheme_value(op, cc, g.spec().dt, b(i, k), s);
                    worst_raw = std::max(worst_raw, std::abs(sv));
                    worst = std::max(worst, std::abs(sv) * g.spec().dt);
                }
            }
        }
        return 0;
    });
    if (max_raw) *max_raw = worst_raw;
    return worst;
}

// ---------------------------------------------------------------- conjugate lemma

struct LemmaReport {
    std::vector<double> values;
    bool decreasing = true;
    bool subgradient = true;
    bool pass() const { return decreasing && subgradient; }
};

// t -> t f*(-x/t) strictly decreasing, and a (f*)'(a) > f*(a) at a = -x/t
inline LemmaReport check_lemma_sgi(const CostSpec& cost, double x, const std::vector<double>& ts)
{
    if (x == 0.0) fail(ErrorKind::usage, "x must be nonzero");
    if (ts.empty()) fail(ErrorKind::usage, "t grid is empty");
    for (std::size_t j = 0; j < ts.size(); ++j) {
        if (!(ts[j] > 0.0)) fail(ErrorKind::usage, "t grid must be positive");
        if (j && !(ts[j] > ts[j - 1])) fail(ErrorKind::usage, "t grid must be strictly increasing");
    }
    LemmaReport rep;
    for (double t : ts) {
        double a = -x / t;
        double v = t * fenchel_conjugate(cost, a);
        if (!rep.values.empty() && !(v < rep.values.back())) rep.decreasing = false;
        rep.values.push_back(v);
        if (!(a * fenchel_conjugate_prime(cost, a) > fenchel_conjugate(cost, a))) rep.subgradient = false;
    }
    return rep;
}

// ---------------------------------------------------------------- growth sandwich

struct SandwichReport {
    long cells = 0;
    long upper_violations = 0;
    long lower_violations = 0;
    long combo_violations = 0;
    long vacuous_lower = 0;      // cells where the lower bound is -inf
    double max_over_upper = -std::numeric_limits<double>::infinity();
    double max_under_lower = -std::numeric_limits<double>::infinity();
    double max_under_combo = -std::numeric_limits<double>::infinity();
    double worst_upper_t = 0.0;
    int worst_upper_i = 0, worst_upper_k = 0;
    double last_violation_t = 0.0; // latest layer time with any violation
    long violations() const { return upper_violations + lower_violations + combo_violations; }
};

class SandwichAccumulator {
public:
    SandwichAccumulator(ModelParams p, const Grid& g, double tol, int x_margin = 3)
        : p_(std::move(p)), grid_(g), tol_(tol), margin_(x_margin) {}

    void add(const Field& w)
    {
        const Grid& g = grid_;
        double t = g.t_of(w.layer());
        for (int i = -g.i_max() + 1; i < g.i_max(); ++i) {
            if (std::abs(i) > g.i_max() - margin_) continue;
            for (int k = g.k_min() + 1; k < g.k_max(); ++k) {
                double x = g.x_of(i), r = g.r_of(k), v = w(i, k);
                Sandwich sw = sandwich_bounds(p_, t, x, r);
                double combo = combo_supersolution_w(p_, t, x, r);
                ++rep_.cells;
                double over = v - sw.upper;
                if (over > rep_.max_over_upper) {
                    rep_.max_over_upper = over;
                    rep_.worst_upper_t = t;
                    rep_.worst_upper_i = i;
                    rep_.worst_upper_k = k;
                }
                if (over > tol_) ++rep_.upper_violations;
                if (std::isinf(sw.lower)) ++rep_.vacuous_lower;
                else {
                    rep_.max_under_lower = std::max(rep_.max_under_lower, sw.lower - v);
                    if (sw.lower - v > tol_) ++rep_.lower_violations;
                }
                rep_.max_under_combo = std::max(rep_.max_under_combo, combo - v);
                if (combo - v > tol_) ++rep_.combo_violations;
                if (!std::isfinite(v)) ++rep_.upper_violations;
                if (over > tol_ || !std::isfinite(v) || combo - v > tol_
                    || (!std::isinf(sw.lower) && sw.lower - v > tol_))
                    rep_.last_violation_t = t;
            }
        }
    }

    const SandwichReport& report() const { return rep_; }

private:
    ModelParams p_;
    Grid grid_;
    double tol_;
    int margin_;
    SandwichReport rep_;
};

// x_margin: cells with |i| > i_max - x_margin are exempt (outermost x indices)
inline SandwichReport sandwich_check(const std::vector<Field>& history, const ModelParams& p, const Grid& g,
                                     double tol, int x_margin = 3)
{
    SandwichAccumulator acc(p, g, tol, x_margin);
    for (const auto& w : history) acc.add(w);
    return acc.report();
}

// ---------------------------------------------------------------- convergence

struct ConvergenceRow {
    double h;
    double max_rel_error;
    double max_abs_error;
    int steps;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    bool nonincreasing = true; // within 10% slack
    bool partial = false;
    std::string note;
};

// Runs the scheme on each grid (same window) from the envelope layer to t_end and records the
// largest interior error against exact on layers with t >= t_eval.
inline ConvergenceTable convergence_study(const SolverSettings& base, const ModelParams& p,
                                          const std::vector<GridSpec>& grids, const ScalarField3& exact,
                                          double t_end, double t_eval, ErrorOptions opt = {})
{
    ConvergenceTable tab;
    for (const auto& gs : grids) {
        SolverSettings s = base;
        s.ex.params = s.im.params = p;
        s.ex.grid = s.im.grid = gs;
        Grid g(gs);
        TransformContext ctx(p, g);
        int n_end = int(std::lround(t_end / gs.dt));
        ConvergenceRow row{mesh_h(gs), 0.0, 0.0, 0};
        ErrorOptions o = opt;
        o.split_t = std::numeric_limits<double>::infinity();
        ErrorAccumulator acc(g, exact, o);
        try {
            auto rr = run_scheme(s, ctx, initial_layer(ctx), n_end, [&](const Field& w) {
                if (g.t_of(w.layer()) >= t_eval - 1e-12) acc.add(w);
            });
            row.steps = rr.steps;
        } catch (const Error& e) {
            tab.partial = true;
            tab.note = e.what();
            break;
        }
        row.max_rel_error = acc.profile().max_rel_small_t;
        row.max_abs_error = acc.profile().max_abs;
        tab.rows.push_back(row);
    }
    for (std::size_t j = 1; j < tab.rows.size(); ++j)
        if (tab.rows[j].max_rel_error > 1.1 * tab.rows[j - 1].max_rel_error) tab.nonincreasing = false;
    return tab;
}

} // namespace hjb
