#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <utility>

namespace hjb {

// largest x with exp(x) finite
inline constexpr double exp_limit = 709.782712893384;

inline double logaddexp(double a, double b)
{
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

// coth(z) = 1 + 2/(e^{2z} - 1), accurate for small z > 0
inline double coth(double z)
{
    if (z > 20.0) return 1.0 + 2.0 * std::exp(-2.0 * z);
    return 1.0 + 2.0 / std::expm1(2.0 * z);
}

// csch(z)^2 for z > 0
inline double csch2(double z)
{
    double em = std::expm1(-2.0 * z);
    return 4.0 * std::exp(-2.0 * z) / (em * em);
}

// log(c0 + sum_j a_j exp(e_j)) with a_j > 0; NaN if the argument is not positive.
inline double log_const_plus_exps(double c0, std::initializer_list<std::pair<double, double>> terms)
{
    double m = -std::numeric_limits<double>::infinity();
    for (auto [a, e] : terms)
        if (a > 0.0) m = std::max(m, e + std::log(a));
    if (c0 > 0.0) {
        double lc = std::log(c0);
        double mm = std::max(m, lc);
        double s = std::exp(lc - mm);
        for (auto [a, e] : terms)
            if (a > 0.0) s += std::exp(e + std::log(a) - mm);
        return mm + std::log(s);
    }
    if (m == -std::numeric_limits<double>::infinity())
        return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (auto [a, e] : terms)
        if (a > 0.0) s += std::exp(e + std::log(a) - m);
    if (c0 < 0.0) {
        double scaled = -m > exp_limit ? -std::numeric_limits<double>::infinity() : c0 * std::exp(-m);
        s += scaled;
    }
    if (!(s > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return m + std::log(s);
}

} // namespace hjb
