#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <variant>

#include "hjb/errors.hpp"
#include "hjb/model.hpp"
#include "hjb/numeric.hpp"

namespace hjb {

// Closed form for u(x) = -exp(-A x), f(x) = lambda x^2, b = 0.
struct ExponentialOracle {
    double a;
    double lambda;
    double sigma;
    double big_b = 0.0;

    double c1() const { return std::sqrt(lambda * a * a * a * sigma * sigma / 2.0); }
    double c2() const { return std::sqrt(a * sigma * sigma / (2.0 * lambda)); }

    // E = -A r + x^2 c1 coth(c2 t), so that V = -exp(E)
    double exponent(double t, double x, double r) const
    {
        if (!(t > 0.0)) fail(ErrorKind::domain, "oracle needs t > 0");
        return -a * r + x * x * c1() * coth(c2() * t);
    }
};

inline ExponentialOracle oracle_from(const ModelParams& p)
{
    auto* u = std::get_if<ExponentialUtility>(&p.utility);
    auto* q = std::get_if<QuadraticCost>(&p.cost);
    if (!u || !q || p.b != 0.0)
        fail(ErrorKind::not_implemented, "closed form needs exponential utility, quadratic cost and b = 0");
    return {u->a, q->lambda, p.sigma, p.big_b};
}

inline double exact_v(const ExponentialOracle& o, double t, double x, double r)
{
    double e = o.exponent(t, x, r);
    if (e > exp_limit) fail(ErrorKind::overflow, "exact_v: exponent overflows, use exact_w");
    return -std::exp(e);
}

inline double exact_w(const ExponentialOracle& o, double t, double x, double r)
{
    double e = o.exponent(t, x, r);
    if (o.big_b == 0.0) return e;
    return logaddexp(std::log(o.big_b), e);
}

// s = e^E / (B + e^E)
inline double oracle_weight(const ExponentialOracle& o, double e)
{
    if (o.big_b == 0.0) return 1.0;
    double z = std::log(o.big_b) - e;
    if (z > exp_limit) return 0.0;
    return 1.0 / (1.0 + std::exp(z));
}

inline double exact_w_r(const ExponentialOracle& o, double t, double x, double r)
{
    return -o.a * oracle_weight(o, o.exponent(t, x, r));
}

struct OracleDerivatives {
    double w, w_t, w_x, w_r, w_rr;
};

inline OracleDerivatives exact_derivatives(const ExponentialOracle& o, double t, double x, double r)
{
    double e = o.exponent(t, x, r);
    double s = oracle_weight(o, e);
    double z = o.c2() * t;
    double e_t = -x * x * o.c1() * o.c2() * csch2(z);
    double e_x = 2.0 * x * o.c1() * coth(z);
    return {exact_w(o, t, x, r), s * e_t, s * e_x, -o.a * s, o.a * o.a * s * (1.0 - s)};
}

// W_t - b X W_r - (X sigma)^2/2 (W_rr + W_r^2) - W_r f*(-W_x/W_r)
inline double continuous_operator(const ModelParams& p, double x, double w_t, double w_x, double w_r,
                                  double w_rr)
{
    double xs = x * p.sigma;
    return w_t - p.b * x * w_r - 0.5 * xs * xs * (w_rr + w_r * w_r)
        - w_r * fenchel_conjugate(p.cost, -w_x / w_r);
}

namespace detail {

inline const ConvexComboUtility& combo_of(const ModelParams& p)
{
    auto* u = std::get_if<ConvexComboUtility>(&p.utility);
    if (!u) fail(ErrorKind::usage, "expected a convex combination utility");
    if (!std::holds_alternative<QuadraticCost>(p.cost))
        fail(ErrorKind::not_implemented, "reference values need a quadratic cost");
    return *u;
}

inline double combo_exponent(const ModelParams& p, double a, double t, double x, double r)
{
    ExponentialOracle o{a, std::get<QuadraticCost>(p.cost).lambda, p.sigma, 0.0};
    return o.exponent(t, x, r);
}

} // namespace detail

struct Sandwich {
    double lower;
    double upper;
};

// lower = log(B - V1), upper = log(B - V2) with V1 = 1/A1 - exp(E1), V2 = -exp(E2).
// The lower end is -inf where B - V1 <= 0 (the bound carries no information there).
inline Sandwich sandwich_bounds(const ModelParams& p, double t, double x, double r)
{
    if (!(t > 0.0)) fail(ErrorKind::domain, "sandwich bounds need t > 0");
    const auto& u = detail::combo_of(p);
    double e1 = detail::combo_exponent(p, u.a1, t, x, r);
    double e2 = detail::combo_exponent(p, u.a2, t, x, r);
    double lower = log_const_plus_exps(p.big_b - 1.0 / u.a1, {{1.0, e1}});
    if (std::isnan(lower)) lower = -std::numeric_limits<double>::infinity();
    double upper = log_const_plus_exps(p.big_b, {{1.0, e2}});
    return {lower, upper};
}

// log(B - mu V1 - (1 - mu) V2)
inline double combo_supersolution_w(const ModelParams& p, double t, double x, double r)
{
    if (!(t > 0.0)) fail(ErrorKind::domain, "combination reference needs t > 0");
    const auto& u = detail::combo_of(p);
    double e1 = detail::combo_exponent(p, u.a1, t, x, r);
    double e2 = detail::combo_exponent(p, u.a2, t, x, r);
    double v = log_const_plus_exps(p.big_b - u.mu / u.a1, {{u.mu, e1}, {1.0 - u.mu, e2}});
    if (std::isnan(v) || v == -std::numeric_limits<double>::infinity())
        fail(ErrorKind::domain, "combination reference: B - V must be positive");
    return v;
}

} // namespace hjb
