#pragma once

#include <cmath>
#include <sstream>
#include <variant>

#include "hjb/errors.hpp"
#include "hjb/grid.hpp"
#include "hjb/model.hpp"
#include "hjb/numeric.hpp"
#include "hjb/parallel.hpp"
#include "hjb/stencil.hpp"
#include "hjb/transform.hpp"

namespace hjb {

struct ExplicitConfig {
    ModelParams params;
    GridSpec grid;
    double k_o = 1.0;          // lower bound on -w_r
    double l_o = 1.0;          // Lipschitz bound in x
    bool enforce_cfl = false;
    bool strict = false;       // monotonicity loss in k is fatal
    double quotient_floor = 1e-12;
    bool clamp_denominator = false;
};

// (3 dt / 8 lambda) ((X sigma)^2 dx^2 K^2 + dr) / (dr^2 dx^2 K^2)
inline double cfl_simple(const ExplicitConfig& cfg, double x_o)
{
    const auto* q = std::get_if<QuadraticCost>(&cfg.params.cost);
    if (!q) fail(ErrorKind::config, "cfl_simple needs a quadratic cost");
    const auto& g = cfg.grid;
    double k2 = cfg.k_o * cfg.k_o;
    double xs = x_o * cfg.params.sigma;
    return 3.0 * g.dt / (8.0 * q->lambda) * (xs * xs * g.dx * g.dx * k2 + g.dr)
        / (g.dr * g.dr * g.dx * g.dx * k2);
}

inline double cfl_simple(const ExplicitConfig& cfg)
{
    return cfl_simple(cfg, Grid(cfg.grid).x_abs_max());
}

// dt (3/2 (x sigma/dr)^2 + |b x|/dr + (f*)'(1/(2 dx K)) / (dx dr K)) at x = x_of(i)
inline double cfl_general(const ExplicitConfig& cfg, int i)
{
    const auto& g = cfg.grid;
    double x = Grid(g).x_of(i);
    double a = x * cfg.params.sigma / g.dr;
    double fp = fenchel_conjugate_prime(cfg.params.cost, 1.0 / (2.0 * g.dx * cfg.k_o));
    return g.dt * (1.5 * a * a + std::abs(cfg.params.b * x) / g.dr + fp / (g.dx * g.dr * cfg.k_o));
}

inline double cfl_general_max(const ExplicitConfig& cfg)
{
    return std::max(cfl_general(cfg, -cfg.grid.i_max), cfl_general(cfg, cfg.grid.i_max));
}

// largest dt for which the left-hand side equals one (both are linear in dt)
inline double cfl_limit_dt_simple(const ExplicitConfig& cfg)
{
    return cfg.grid.dt / cfl_simple(cfg);
}
inline double cfl_limit_dt_general(const ExplicitConfig& cfg)
{
    return cfg.grid.dt / cfl_general_max(cfg);
}

struct KoDomain {
    double t_min, t_max;
    double x_abs_min, x_abs_max;
    double r_min, r_max;
};

// Lower bound K_O on -w_r over the window, for the families with a closed form.
inline double estimate_k_o(const ModelParams& p, const KoDomain& dom)
{
    const auto* q = std::get_if<QuadraticCost>(&p.cost);
    if (auto* u = std::get_if<ExponentialUtility>(&p.utility)) {
        if (p.big_b == 0.0) return u->a;
        if (!q) fail(ErrorKind::not_implemented, "K_O estimate needs a quadratic cost when B > 0");
        double s2 = p.sigma * p.sigma;
        double c1 = std::sqrt(q->lambda * u->a * u->a * u->a * s2 / 2.0);
        double c2 = std::sqrt(u->a * s2 / (2.0 * q->lambda));
        double e = -u->a * dom.r_max + dom.x_abs_min * dom.x_abs_min * c1 * coth(dom.t_max * c2);
        // A e^E / (1 + e^E) = A / (1 + B e^{-E})
        return u->a / (1.0 + std::exp(std::log(p.big_b) - e));
    }
    const auto& u = std::get<ConvexComboUtility>(p.utility);
    if (p.big_b != 1.0 || !q)
        fail(ErrorKind::not_implemented, "K_O estimate for the convex combination needs B=1 and quadratic cost");
    double s2 = p.sigma * p.sigma;
    double c1 = std::sqrt(q->lambda * u.a2 * u.a2 * u.a2 * s2 / 2.0);
    double c2 = std::sqrt(u.a2 * s2 / (2.0 * q->lambda));
    double num = 1.0 + std::exp(-u.a1 * dom.r_max);
    double e = -u.a2 * dom.r_max + dom.x_abs_max * dom.x_abs_max * c1 * coth(dom.t_max * c2);
    if (e > exp_limit) return 0.0;
    return num / (1.0 + std::exp(e));
}

namespace detail {

inline void check_shape(const Grid& g, const Field& w)
{
    if (!w.same_shape(g)) fail(ErrorKind::usage, "field shape does not match grid");
}

inline void check_monotone_in_k(const Grid& g, const Field& w, const char* where)
{
    for (int i = -g.i_max() + 1; i < g.i_max(); ++i)
        for (int k = g.k_min() + 1; k < g.k_max(); ++k)
            if (!(w(i, k) - w(i, k - 1) < 0.0)) {
                std::ostringstream os;
                os << where << ": w not decreasing in r at i=" << i << " k=" << k
                   << " (layer " << w.layer() << ")";
                fail(ErrorKind::domain, os.str());
            }
}

inline void check_finite(const Field& w)
{
    if (!w.all_finite()) {
        std::ostringstream os;
        os << "non-finite value in layer " << w.layer();
        fail(ErrorKind::overflow, os.str());
    }
}

} // namespace detail

// One explicit step for any symmetric cost and drift b.
inline Field step_general(const ExplicitConfig& cfg, const Field& w_n, const BoundarySlice& next_boundary)
{
    Grid g(cfg.grid);
    detail::check_shape(g, w_n);
    if (cfg.enforce_cfl) {
        double lhs = cfl_general_max(cfg);
        if (lhs > 1.0) {
            std::ostringstream os;
            os << "CFL violated: left-hand side " << lhs << " > 1";
            fail(ErrorKind::cfl_violation, os.str());
        }
    }
    if (cfg.strict) detail::check_monotone_in_k(g, w_n, "step input");
    Field out(g, w_n.layer() + 1);
    const double dt = cfg.grid.dt;
    with_operator(cfg.params, cfg.grid.dr, cfg.grid.dx, cfg.quotient_floor, cfg.clamp_denominator,
                  [&](const auto& op) {
        parallel_rows(-g.i_max() + 1, g.i_max(), [&](int i) {
            CellCoeffs cc = cell_coeffs(g.x_of(i), cfg.params.sigma, cfg.params.b, cfg.grid.dr);
            for (int k = g.k_min() + 1; k < g.k_max(); ++k) {
                Stencil s{w_n(i, k), w_n(i - 1, k), w_n(i + 1, k), w_n(i, k - 1), w_n(i, k + 1)};
                out(i, k) = s.c + dt * op.apply(s, cc);
            }
        });
        return 0;
    });
    apply_boundary(next_boundary, out);
    detail::check_finite(out);
    if (cfg.strict) detail::check_monotone_in_k(g, out, "step output");
    return out;
}

// b = 0 and quadratic cost; the same kernel as step_general.
inline Field step_simple(const ExplicitConfig& cfg, const Field& w_n, const BoundarySlice& next_boundary)
{
    if (!std::holds_alternative<QuadraticCost>(cfg.params.cost))
        fail(ErrorKind::config, "simple scheme needs a quadratic cost");
    if (cfg.params.b != 0.0) fail(ErrorKind::config, "simple scheme needs b = 0");
    return step_general(cfg, w_n, next_boundary);
}

inline Field step_general(const ExplicitConfig& cfg, const TransformContext& ctx, const Field& w_n)
{
    return step_general(cfg, w_n, boundary_values(ctx, w_n.layer() + 1));
}

inline Field step_simple(const ExplicitConfig& cfg, const TransformContext& ctx, const Field& w_n)
{
    return step_simple(cfg, w_n, boundary_values(ctx, w_n.layer() + 1));
}

} // namespace hjb
