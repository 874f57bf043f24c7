#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "hjb/errors.hpp"
#include "hjb/numeric.hpp"

namespace hjb {

// u(x) = -exp(-A x)
struct ExponentialUtility {
    double a;
};

// u(x) = mu (1/A1 - exp(-A1 x)) - (1 - mu) exp(-A2 x)
struct ConvexComboUtility {
    double a1;
    double a2;
    double mu;
};

using UtilitySpec = std::variant<ExponentialUtility, ConvexComboUtility>;

// f(x) = lambda x^2
struct QuadraticCost {
    double lambda;
};

// f must be symmetric with f(0) = 0; f* and (f*)' are supplied, not computed.
struct CustomCost {
    std::function<double(double)> f;
    std::function<double(double)> f_star;
    std::function<double(double)> f_star_prime;
    std::string name = "custom";
};

using CostSpec = std::variant<QuadraticCost, CustomCost>;

struct ModelParams {
    double sigma = 0.1;
    double b = 0.0;
    double big_b = 0.0;
    CostSpec cost = QuadraticCost{0.1};
    UtilitySpec utility = ExponentialUtility{1.0};
};

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline double eval_utility(const UtilitySpec& spec, double x)
{
    return std::visit(overloaded{
        [&](const ExponentialUtility& u) { return -std::exp(-u.a * x); },
        [&](const ConvexComboUtility& u) {
            return u.mu * (1.0 / u.a1 - std::exp(-u.a1 * x)) - (1.0 - u.mu) * std::exp(-u.a2 * x);
        },
    }, spec);
}

inline double eval_utility_prime(const UtilitySpec& spec, double x)
{
    return std::visit(overloaded{
        [&](const ExponentialUtility& u) { return u.a * std::exp(-u.a * x); },
        [&](const ConvexComboUtility& u) {
            return u.mu * u.a1 * std::exp(-u.a1 * x) + (1.0 - u.mu) * u.a2 * std::exp(-u.a2 * x);
        },
    }, spec);
}

inline double eval_utility_second(const UtilitySpec& spec, double x)
{
    return std::visit(overloaded{
        [&](const ExponentialUtility& u) { return -u.a * u.a * std::exp(-u.a * x); },
        [&](const ConvexComboUtility& u) {
            return -u.mu * u.a1 * u.a1 * std::exp(-u.a1 * x)
                - (1.0 - u.mu) * u.a2 * u.a2 * std::exp(-u.a2 * x);
        },
    }, spec);
}

// -u''/u', evaluated as a weighted mean so it stays finite for large |x|
inline double absolute_risk_aversion(const UtilitySpec& spec, double x)
{
    return std::visit(overloaded{
        [&](const ExponentialUtility& u) { return u.a; },
        [&](const ConvexComboUtility& u) {
            double l1 = std::log(u.mu * u.a1) - u.a1 * x;
            double l2 = std::log((1.0 - u.mu) * u.a2) - u.a2 * x;
            double m = std::max(l1, l2);
            double w1 = std::exp(l1 - m), w2 = std::exp(l2 - m);
            return (w1 * u.a1 + w2 * u.a2) / (w1 + w2);
        },
    }, spec);
}

struct RiskAversionBand {
    double lo;
    double hi;
};

inline RiskAversionBand declared_band(const UtilitySpec& spec)
{
    return std::visit(overloaded{
        [](const ExponentialUtility& u) { return RiskAversionBand{u.a, u.a}; },
        [](const ConvexComboUtility& u) { return RiskAversionBand{u.a1, u.a2}; },
    }, spec);
}

struct BandReport {
    double min_ratio;
    double max_ratio;
    RiskAversionBand band;
    bool pass;
};

inline BandReport check_risk_aversion_band(const UtilitySpec& spec, std::span<const double> xs,
                                           RiskAversionBand band)
{
    if (xs.empty()) fail(ErrorKind::usage, "risk aversion check needs at least one sample");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double x : xs) {
        double q = absolute_risk_aversion(spec, x);
        lo = std::min(lo, q);
        hi = std::max(hi, q);
    }
    constexpr double tol = 1e-12;
    bool pass = lo >= band.lo * (1.0 - tol) && hi <= band.hi * (1.0 + tol);
    return {lo, hi, band, pass};
}

inline BandReport check_risk_aversion_band(const UtilitySpec& spec, std::span<const double> xs)
{
    return check_risk_aversion_band(spec, xs, declared_band(spec));
}

inline std::vector<double> uniform_samples(double lo, double hi, int n = 1001)
{
    std::vector<double> xs(n);
    for (int j = 0; j < n; ++j)
        xs[j] = n == 1 ? lo : lo + (hi - lo) * j / (n - 1);
    return xs;
}

inline double eval_cost(const CostSpec& spec, double x)
{
    return std::visit(overloaded{
        [&](const QuadraticCost& c) { return c.lambda * x * x; },
        [&](const CustomCost& c) { return c.f(x); },
    }, spec);
}

inline double fenchel_conjugate(const CostSpec& spec, double y)
{
    return std::visit(overloaded{
        [&](const QuadraticCost& c) { return y * y / (4.0 * c.lambda); },
        [&](const CustomCost& c) {
            if (!c.f_star) fail(ErrorKind::config, "custom cost has no conjugate");
            double v = c.f_star(y);
            if (!std::isfinite(v)) fail(ErrorKind::domain, "conjugate diverges at y=" + std::to_string(y));
            return v;
        },
    }, spec);
}

inline double fenchel_conjugate_prime(const CostSpec& spec, double y)
{
    return std::visit(overloaded{
        [&](const QuadraticCost& c) { return y / (2.0 * c.lambda); },
        [&](const CustomCost& c) {
            if (!c.f_star_prime) fail(ErrorKind::config, "custom cost has no conjugate derivative");
            double v = c.f_star_prime(y);
            if (!std::isfinite(v))
                fail(ErrorKind::domain, "conjugate derivative diverges at y=" + std::to_string(y));
            return v;
        },
    }, spec);
}

// sup_x (x y - f(x)) over a uniform grid on [-x_max, x_max]; test use only
inline double brute_force_conjugate(const CostSpec& spec, double y, double x_max = 50.0, int n = 2000001)
{
    double best = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
        double x = -x_max + 2.0 * x_max * j / (n - 1);
        best = std::max(best, x * y - eval_cost(spec, x));
    }
    return best;
}

// f(x) = c x^4 with its closed form conjugate
inline CustomCost quartic_cost(double c)
{
    double s = std::cbrt(1.0 / (4.0 * c));
    CustomCost cost;
    cost.f = [c](double x) { return c * x * x * x * x; };
    cost.f_star = [s](double y) { return 0.75 * std::pow(std::abs(y), 4.0 / 3.0) * s; };
    cost.f_star_prime = [s](double y) {
        return std::copysign(std::cbrt(std::abs(y)) * s, y);
    };
    cost.name = "quartic";
    return cost;
}

inline void validate_cost(const CostSpec& spec)
{
    if (auto* q = std::get_if<QuadraticCost>(&spec)) {
        if (!(q->lambda > 0.0)) fail(ErrorKind::config, "cost lambda must be positive");
        return;
    }
    const auto& c = std::get<CustomCost>(spec);
    if (!c.f || !c.f_star || !c.f_star_prime)
        fail(ErrorKind::config, "custom cost needs f, f_star and f_star_prime");
    if (c.f(0.0) != 0.0) fail(ErrorKind::config, "custom cost must satisfy f(0)=0");
    if (c.f_star(0.0) != 0.0) fail(ErrorKind::config, "custom conjugate must satisfy f*(0)=0");
    for (double x : {0.1, 0.5, 1.0, 2.0, 7.5}) {
        double a = c.f(x), b = c.f(-x);
        if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a)))
            fail(ErrorKind::config, "custom cost must be symmetric");
        if (!(a > 0.0)) fail(ErrorKind::config, "custom cost must be positive away from 0");
    }
}

inline void validate_utility(const UtilitySpec& spec)
{
    std::visit(overloaded{
        [](const ExponentialUtility& u) {
            if (!(u.a > 0.0)) fail(ErrorKind::config, "risk aversion A must be positive");
        },
        [](const ConvexComboUtility& u) {
            if (!(u.a1 > 0.0 && u.a1 < 1.0 && u.a2 > 1.0))
                fail(ErrorKind::config, "convex combination needs 0 < A1 < 1 < A2");
            if (!(u.mu > 0.0 && u.mu < 1.0))
                fail(ErrorKind::config, "convex combination needs 0 < mu < 1");
        },
    }, spec);
}

// log(B - u(z)) without forming exp of large arguments; NaN if B - u(z) <= 0
inline double log_b_minus_u(const ModelParams& p, double z)
{
    return std::visit(overloaded{
        [&](const ExponentialUtility& u) {
            return log_const_plus_exps(p.big_b, {{1.0, -u.a * z}});
        },
        [&](const ConvexComboUtility& u) {
            return log_const_plus_exps(p.big_b - u.mu / u.a1,
                                       {{u.mu, -u.a1 * z}, {1.0 - u.mu, -u.a2 * z}});
        },
    }, p.utility);
}

// Checks the standing assumptions on r in [r_lo, r_hi].
inline void validate(const ModelParams& p, double r_lo, double r_hi)
{
    if (!(p.sigma > 0.0)) fail(ErrorKind::config, "sigma must be positive");
    if (!(p.big_b >= 0.0)) fail(ErrorKind::config, "B must be nonnegative");
    if (!std::isfinite(p.b)) fail(ErrorKind::config, "drift must be finite");
    validate_cost(p.cost);
    validate_utility(p.utility);
    if (auto* u = std::get_if<ConvexComboUtility>(&p.utility)) {
        if (p.big_b == 1.0 && !(u->mu / u->a1 < 1.0))
            fail(ErrorKind::config, "convex combination with B=1 needs mu/A1 < 1");
    }
    // B - u is decreasing in r, so the upper end is the binding one
    double l = log_b_minus_u(p, r_hi);
    if (std::isnan(l) || l == -std::numeric_limits<double>::infinity()) {
        std::ostringstream os;
        os << "B - u(r) must be positive on [" << r_lo << ", " << r_hi << "]";
        fail(ErrorKind::config, os.str());
    }
}

} // namespace hjb
