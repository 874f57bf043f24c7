#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "hjb/errors.hpp"
#include "hjb/explicit_scheme.hpp"
#include "hjb/grid.hpp"
#include "hjb/implicit_scheme.hpp"
#include "hjb/transform.hpp"

namespace hjb {

enum class SchemeKind { explicit_simple, explicit_general, implicit_simple, implicit_general };

inline const char* scheme_name(SchemeKind k)
{
    switch (k) {
    case SchemeKind::explicit_simple: return "explicit-simple";
    case SchemeKind::explicit_general: return "explicit-general";
    case SchemeKind::implicit_simple: return "implicit-simple";
    case SchemeKind::implicit_general: return "implicit-general";
    }
    return "?";
}

inline SchemeKind parse_scheme(const std::string& s)
{
    if (s == "explicit-simple") return SchemeKind::explicit_simple;
    if (s == "explicit-general") return SchemeKind::explicit_general;
    if (s == "implicit-simple") return SchemeKind::implicit_simple;
    if (s == "implicit-general") return SchemeKind::implicit_general;
    fail(ErrorKind::config, "unknown scheme '" + s + "'");
}

inline bool is_implicit(SchemeKind k)
{
    return k == SchemeKind::implicit_simple || k == SchemeKind::implicit_general;
}

// Discrete analogues of the local bounds: max |w_r|, max |w_rr|, max |w_x| and min -w_r
// over interior one-sided differences.
struct DiscreteBounds {
    double k_bar = 0.0;
    double k_bar_prime = 0.0;
    double l_o = 0.0;
    double k_min = std::numeric_limits<double>::infinity();

    void update(const Grid& g, const Field& w)
    {
        const double dr = g.spec().dr, dx = g.spec().dx;
        for (int i = -g.i_max() + 1; i < g.i_max(); ++i)
            for (int k = g.k_min() + 1; k < g.k_max(); ++k) {
                double c = w(i, k);
                double dn = (c - w(i, k - 1)) / dr, up = (w(i, k + 1) - c) / dr;
                k_bar = std::max({k_bar, std::abs(dn), std::abs(up)});
                k_min = std::min({k_min, -dn, -up});
                k_bar_prime = std::max(k_bar_prime, std::abs(up - dn) / dr);
                l_o = std::max({l_o, std::abs(c - w(i - 1, k)) / dx, std::abs(c - w(i + 1, k)) / dx});
            }
    }
};

struct RunResult {
    Field last;
    int steps = 0;
    double max_abs_initial = 0.0;
    double max_abs = 0.0;
    DiscreteBounds bounds;
    long newton_iterations = 0;
    int newton_iterations_max = 0;
    long newton_roundoff_stops = 0;
    double seconds = 0.0;
};

using LayerObserver = std::function<void(const Field&)>;

struct SolverSettings {
    SchemeKind kind = SchemeKind::explicit_simple;
    ExplicitConfig ex;
    ImplicitConfig im;
};

// Steps from `start` until layer n_end, calling observe on every layer including the start.
inline RunResult run_scheme(const SolverSettings& s, const TransformContext& ctx, Field start, int n_end,
                            const LayerObserver& observe = {})
{
    auto t0 = std::chrono::steady_clock::now();
    const Grid& g = ctx.grid;
    RunResult out;
    out.max_abs_initial = start.max_abs();
    out.max_abs = out.max_abs_initial;
    out.bounds.update(g, start);
    if (observe) observe(start);
    std::optional<ImplicitStepper> stepper;
    if (is_implicit(s.kind)) {
        if (s.kind == SchemeKind::implicit_simple
            && (!std::holds_alternative<QuadraticCost>(s.im.params.cost) || s.im.params.b != 0.0))
            fail(ErrorKind::config, "simple scheme needs a quadratic cost and b = 0");
        stepper.emplace(s.im);
    }
    Field w = std::move(start);
    while (w.layer() < n_end) {
        BoundarySlice bnd = boundary_values(ctx, w.layer() + 1);
        Field next;
        switch (s.kind) {
        case SchemeKind::explicit_simple: next = step_simple(s.ex, w, bnd); break;
        case SchemeKind::explicit_general: next = step_general(s.ex, w, bnd); break;
        default: {
            StepResult r = stepper->step(w, bnd);
            if (!r.w.all_finite()) fail(ErrorKind::overflow, "non-finite implicit layer");
            out.newton_iterations += r.report.iterations;
            out.newton_iterations_max = std::max(out.newton_iterations_max, r.report.iterations);
            out.newton_roundoff_stops += r.report.at_roundoff;
            next = std::move(r.w);
        }
        }
        w = std::move(next);
        ++out.steps;
        out.max_abs = std::max(out.max_abs, w.max_abs());
        out.bounds.update(g, w);
        if (observe) observe(w);
    }
    out.last = std::move(w);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// max|w^1| + T [(X sigma)^2 (K' + K^2) + |b| X K + K f*(L / K_min)]
inline double explicit_stability_bound(const ModelParams& p, double x_o, double horizon, double w1_max,
                                       const DiscreteBounds& b)
{
    double xs = x_o * p.sigma;
    double kmin = std::max(b.k_min, std::numeric_limits<double>::min());
    return w1_max + horizon * (xs * xs * (b.k_bar_prime + b.k_bar * b.k_bar) + std::abs(p.b) * x_o * b.k_bar
                               + b.k_bar * fenchel_conjugate(p.cost, b.l_o / kmin));
}

// max|w^1| + 3 T |I| C^2 / 8 + T L^2 / K, with |I| = i_max^2 and C = sigma dx / dr
inline double implicit_stability_bound(const ModelParams& p, const GridSpec& g, double horizon, double w1_max,
                                       const DiscreteBounds& b)
{
    double c = p.sigma * g.dx / g.dr;
    double io = double(g.i_max) * g.i_max;
    return w1_max + 3.0 * horizon * io * c * c / 8.0 + horizon * b.l_o * b.l_o / b.k_bar;
}

} // namespace hjb
