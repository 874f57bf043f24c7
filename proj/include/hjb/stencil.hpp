#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "hjb/errors.hpp"
#include "hjb/model.hpp"

namespace hjb {

// Five-point stencil around (i,k): left/right are i-1/i+1, down/up are k-1/k+1.
struct Stencil {
    double c, left, right, down, up;
};

struct Partials {
    double c = 0.0, left = 0.0, right = 0.0, down = 0.0, up = 0.0;
};

inline double upwind_sq(double c, double left, double right)
{
    double m = std::max({c - left, c - right, 0.0});
    return m * m;
}

// max(c-left, c-right, 0) with the active branch; ties go to the left difference.
struct UpwindMax {
    double m;
    int branch; // -1 left, +1 right, 0 none
};

inline UpwindMax upwind_max(double c, double left, double right)
{
    double dl = c - left, dr = c - right;
    if (dl >= dr) {
        if (dl > 0.0) return {dl, -1};
    } else if (dr > 0.0) {
        return {dr, 1};
    }
    return {0.0, 0};
}

// Coefficients that depend on the x index only.
struct CellCoeffs {
    double a2;    // (x sigma / dr)^2
    double drift; // b x
};

inline CellCoeffs cell_coeffs(double x, double sigma, double b, double dr)
{
    double a = x * sigma / dr;
    return {a * a, b * x};
}

// H(M, d) = dr M^2 / (4 lambda dx^2 d)
struct QuadraticHamiltonian {
    double kappa;

    QuadraticHamiltonian(double lambda, double dr, double dx) : kappa(dr / (4.0 * lambda * dx * dx)) {}

    double value(double m, double d) const { return kappa * m * m / d; }
    void partials(double m, double d, double& hm, double& hd) const
    {
        hm = 2.0 * kappa * m / d;
        hd = -kappa * m * m / (d * d);
    }
};

// H(M, d) = (d / dr) f*((dr/dx) M / d)
struct ConjugateHamiltonian {
    const CostSpec* cost;
    double dr, dx;

    double value(double m, double d) const
    {
        double y = (dr / dx) * m / d;
        return d / dr * fenchel_conjugate(*cost, y);
    }
    void partials(double m, double d, double& hm, double& hd) const
    {
        double y = (dr / dx) * m / d;
        double fp = fenchel_conjugate_prime(*cost, y);
        hm = fp / dx;
        hd = (fenchel_conjugate(*cost, y) - y * fp) / dr;
    }
};

// The shared spatial operator L; explicit: w+ = c + dt L, implicit: (c - prev)/dt - L = 0.
//   L = -a^2/2 [(c-down) + (c-up) - (c-up)^2] + b x F + H(M, c-down)
template <class Ham>
struct SpatialOperator {
    Ham ham;
    double dr;
    double quotient_floor = 1e-12;
    bool clamp_denominator = false;

    double denominator(double d) const
    {
        if (d < -quotient_floor) return d;
        if (clamp_denominator) return -quotient_floor;
        std::ostringstream os;
        os << "degenerate denominator w(i,k)-w(i,k-1) = " << d;
        throw Error(ErrorKind::degenerate_denominator, os.str());
    }

    double apply(const Stencil& s, const CellCoeffs& cc) const
    {
        double e = s.c - s.up;
        double diff = -0.5 * cc.a2 * ((s.c - s.down) + e - e * e);
        double adv = 0.0;
        if (cc.drift != 0.0) {
            double f = cc.drift > 0.0 ? (s.up - s.c) / dr : (s.c - s.down) / dr;
            adv = cc.drift * f;
        }
        double m = std::max({s.c - s.left, s.c - s.right, 0.0});
        double h = m == 0.0 ? 0.0 : ham.value(m, denominator(s.c - s.down));
        return diff + adv + h;
    }

    double apply(const Stencil& s, const CellCoeffs& cc, Partials& p) const
    {
        double e = s.c - s.up;
        double diff = -0.5 * cc.a2 * ((s.c - s.down) + e - e * e);
        p = Partials{};
        p.c = -0.5 * cc.a2 * (2.0 - 2.0 * e);
        p.down = 0.5 * cc.a2;
        p.up = 0.5 * cc.a2 * (1.0 - 2.0 * e);
        double adv = 0.0;
        if (cc.drift != 0.0) {
            double g = cc.drift / dr;
            if (cc.drift > 0.0) {
                adv = cc.drift * ((s.up - s.c) / dr);
                p.up += g;
                p.c -= g;
            } else {
                adv = cc.drift * ((s.c - s.down) / dr);
                p.c += g;
                p.down -= g;
            }
        }
        auto um = upwind_max(s.c, s.left, s.right);
        double h = 0.0;
        if (um.branch != 0) {
            double d = denominator(s.c - s.down);
            h = ham.value(um.m, d);
            double hm, hd;
            ham.partials(um.m, d, hm, hd);
            p.c += hm + hd;
            p.down -= hd;
            (um.branch < 0 ? p.left : p.right) -= hm;
        }
        return diff + adv + h;
    }
};

// Calls fn(op) with the operator matching the cost variant.
template <class Fn>
decltype(auto) with_operator(const ModelParams& p, double dr, double dx, double quotient_floor,
                             bool clamp, Fn&& fn)
{
    if (auto* q = std::get_if<QuadraticCost>(&p.cost)) {
        SpatialOperator<QuadraticHamiltonian> op{QuadraticHamiltonian(q->lambda, dr, dx), dr,
                                                 quotient_floor, clamp};
        return fn(op);
    }
    SpatialOperator<ConjugateHamiltonian> op{ConjugateHamiltonian{&p.cost, dr, dx}, dr,
                                             quotient_floor, clamp};
    return fn(op);
}

// Scheme values in the S(...) <= 0 convention used by the monotonicity analysis.
template <class Op>
double explicit_scheme_value(const Op& op, const CellCoeffs& cc, double dt, double w_next,
                             const Stencil& prev)
{
    return (w_next - prev.c) / dt - op.apply(prev, cc);
}

template <class Op>
double implicit_scheme_value(const Op& op, const CellCoeffs& cc, double dt, double w_prev,
                             const Stencil& next)
{
    return (next.c - w_prev) / dt - op.apply(next, cc);
}

} // namespace hjb
