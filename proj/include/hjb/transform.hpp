#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "hjb/errors.hpp"
#include "hjb/grid.hpp"
#include "hjb/model.hpp"
#include "hjb/numeric.hpp"

namespace hjb {

struct TransformContext {
    TransformContext(ModelParams p, const Grid& g) : params(std::move(p)), grid(g)
    {
        validate(params, g.r_of(g.k_min()), g.r_of(g.k_max()));
    }

    ModelParams params;
    Grid grid;
};

inline double to_w(double v, double big_b)
{
    double gap = big_b - v;
    if (!(gap > 0.0)) fail(ErrorKind::domain, "to_w: B - v must be positive");
    return std::log(gap);
}

inline double to_v(double w, double big_b)
{
    if (w > exp_limit) fail(ErrorKind::overflow, "to_v: exp(w) overflows");
    return big_b - std::exp(w);
}

// t f(x/t), exact for the quadratic family
inline double time_scaled_cost(const CostSpec& c, double t, double x)
{
    if (auto* q = std::get_if<QuadraticCost>(&c)) return q->lambda * x * x / t;
    return t * eval_cost(c, x / t);
}

inline double u_tilde(const ModelParams& p, double t, double x, double r)
{
    if (!(t > 0.0)) fail(ErrorKind::domain, "u_tilde: t must be positive");
    double w = log_b_minus_u(p, r - time_scaled_cost(p.cost, t, x));
    if (std::isnan(w) || w == -std::numeric_limits<double>::infinity())
        fail(ErrorKind::domain, "u_tilde: B - u must be positive");
    return w;
}

inline double u_tilde(const TransformContext& ctx, double t, double x, double r)
{
    return u_tilde(ctx.params, t, x, r);
}

// envelope sampled on a whole layer
inline Field envelope_layer(const TransformContext& ctx, int n)
{
    const Grid& g = ctx.grid;
    Field f(g, n);
    double t = g.t_of(n);
    for (int i = -g.i_max(); i <= g.i_max(); ++i)
        for (int k = g.k_min(); k <= g.k_max(); ++k)
            f(i, k) = u_tilde(ctx, t, g.x_of(i), g.r_of(k));
    return f;
}

inline Field initial_layer(const TransformContext& ctx)
{
    return envelope_layer(ctx, 1);
}

inline BoundarySlice boundary_values(const TransformContext& ctx, int n)
{
    if (n < 1) fail(ErrorKind::domain, "boundary layer index must be at least 1");
    const Grid& g = ctx.grid;
    double t = g.t_of(n);
    BoundarySlice b;
    b.n = n;
    double xl = g.x_of(-g.i_max()), xh = g.x_of(g.i_max());
    for (int k = g.k_min(); k <= g.k_max(); ++k) {
        b.x_lo.push_back(u_tilde(ctx, t, xl, g.r_of(k)));
        b.x_hi.push_back(u_tilde(ctx, t, xh, g.r_of(k)));
    }
    double rl = g.r_of(g.k_min()), rh = g.r_of(g.k_max());
    for (int i = -g.i_max(); i <= g.i_max(); ++i) {
        b.r_lo.push_back(u_tilde(ctx, t, g.x_of(i), rl));
        b.r_hi.push_back(u_tilde(ctx, t, g.x_of(i), rh));
    }
    return b;
}

} // namespace hjb
