#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <variant>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "hjb/errors.hpp"
#include "hjb/grid.hpp"
#include "hjb/model.hpp"
#include "hjb/parallel.hpp"
#include "hjb/stencil.hpp"
#include "hjb/transform.hpp"

namespace hjb {

struct ImplicitConfig {
    ModelParams params;
    GridSpec grid;
    double newton_tol = 1e-10;
    int newton_max_iter = 50;
    double damping = 0.5;
    int max_backtracks = 40;
    double quotient_floor = 1e-12;
    bool clamp_denominator = false;
};

inline void validate(const ImplicitConfig& cfg)
{
    if (!(cfg.newton_tol > 0.0)) fail(ErrorKind::config, "newton_tol must be positive");
    if (!(cfg.damping > 0.0 && cfg.damping < 1.0)) fail(ErrorKind::config, "damping must lie in (0,1)");
    if (cfg.newton_max_iter < 1) fail(ErrorKind::config, "newton_max_iter must be at least 1");
}

struct NewtonReport {
    int iterations = 0;
    double residual_norm = 0.0;
    bool at_roundoff = false; // stopped because the update is below the resolution of w
};

struct StepResult {
    Field w;
    NewtonReport report;
};

namespace detail {

// Residual of the implicit scheme; with jac != nullptr also the five partials per cell.
inline double assemble(const ImplicitConfig& cfg, const Grid& g, const Field& w_next, const Field& w_n,
                       const BoundarySlice& bnd, Field& res, std::vector<Partials>* jac)
{
    const double dt = cfg.grid.dt;
    const int im = g.i_max();
    with_operator(cfg.params, cfg.grid.dr, cfg.grid.dx, cfg.quotient_floor, cfg.clamp_denominator,
                  [&](const auto& op) {
        parallel_rows(-im, im + 1, [&](int i) {
            CellCoeffs cc = cell_coeffs(g.x_of(i), cfg.params.sigma, cfg.params.b, cfg.grid.dr);
            for (int k = g.k_min(); k <= g.k_max(); ++k) {
                if (g.is_boundary(i, k)) {
                    double b;
                    if (k == g.k_min()) b = bnd.r_lo[i + im];
                    else if (k == g.k_max()) b = bnd.r_hi[i + im];
                    else if (i == -im) b = bnd.x_lo[k - g.k_min()];
                    else b = bnd.x_hi[k - g.k_min()];
                    res(i, k) = w_next(i, k) - b;
                    if (jac) (*jac)[g.index(i, k)] = Partials{1.0, 0, 0, 0, 0};
                    continue;
                }
                Stencil s{w_next(i, k), w_next(i - 1, k), w_next(i + 1, k), w_next(i, k - 1),
                          w_next(i, k + 1)};
                if (jac) {
                    Partials p;
                    double l = op.apply(s, cc, p);
                    res(i, k) = (s.c - w_n(i, k)) / dt - l;
                    (*jac)[g.index(i, k)] =
                        Partials{1.0 / dt - p.c, -p.left, -p.right, -p.down, -p.up};
                } else {
                    res(i, k) = (s.c - w_n(i, k)) / dt - op.apply(s, cc);
                }
            }
        });
        return 0;
    });
    return res.max_abs();
}

// Explicit zeros are kept so the pattern is identical for every iterate.
inline Eigen::SparseMatrix<double> build_matrix(const Grid& g, const std::vector<Partials>& jac)
{
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(5 * g.size());
    for (int i = -g.i_max(); i <= g.i_max(); ++i)
        for (int k = g.k_min(); k <= g.k_max(); ++k) {
            int row = int(g.index(i, k));
            const Partials& p = jac[row];
            trip.emplace_back(row, row, p.c);
            if (g.is_boundary(i, k)) continue;
            trip.emplace_back(row, int(g.index(i - 1, k)), p.left);
            trip.emplace_back(row, int(g.index(i + 1, k)), p.right);
            trip.emplace_back(row, int(g.index(i, k - 1)), p.down);
            trip.emplace_back(row, int(g.index(i, k + 1)), p.up);
        }
    Eigen::SparseMatrix<double> m(int(g.size()), int(g.size()));
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return m;
}

inline void check_step_inputs(const Grid& g, const Field& a, const Field& b)
{
    if (!a.same_shape(g) || !b.same_shape(g)) fail(ErrorKind::usage, "field shape does not match grid");
}

} // namespace detail

inline Field residual_general(const ImplicitConfig& cfg, const Field& w_next, const Field& w_n,
                              const BoundarySlice& next_boundary)
{
    Grid g(cfg.grid);
    detail::check_step_inputs(g, w_next, w_n);
    Field res(g, w_next.layer());
    detail::assemble(cfg, g, w_next, w_n, next_boundary, res, nullptr);
    return res;
}

inline Field residual_simple(const ImplicitConfig& cfg, const Field& w_next, const Field& w_n,
                             const BoundarySlice& next_boundary)
{
    if (!std::holds_alternative<QuadraticCost>(cfg.params.cost))
        fail(ErrorKind::config, "simple scheme needs a quadratic cost");
    if (cfg.params.b != 0.0) fail(ErrorKind::config, "simple scheme needs b = 0");
    return residual_general(cfg, w_next, w_n, next_boundary);
}

// Analytic Jacobian of the residual as a sparse matrix with a fixed five-point pattern.
inline Eigen::SparseMatrix<double> residual_jacobian(const ImplicitConfig& cfg, const Field& w_next,
                                                    const Field& w_n, const BoundarySlice& bnd)
{
    Grid g(cfg.grid);
    detail::check_step_inputs(g, w_next, w_n);
    Field res(g, w_next.layer());
    std::vector<Partials> jac(g.size());
    detail::assemble(cfg, g, w_next, w_n, bnd, res, &jac);
    return detail::build_matrix(g, jac);
}

// Damped Newton for one implicit layer. The sparsity pattern never changes, so the
// symbolic analysis is done once and reused by every factorization.
class ImplicitStepper {
public:
    explicit ImplicitStepper(ImplicitConfig cfg) : cfg_(std::move(cfg)), grid_(cfg_.grid)
    {
        validate(cfg_);
    }

    const ImplicitConfig& config() const { return cfg_; }

    StepResult step(const Field& w_n, const BoundarySlice& next_boundary)
    {
        const Grid& g = grid_;
        detail::check_step_inputs(g, w_n, w_n);
        Field w = w_n;
        w.set_layer(w_n.layer() + 1);
        Field res(g, w.layer());
        Field trial_res(g, w.layer());
        std::vector<Partials> jac(g.size());
        Eigen::VectorXd rhs(g.size());

        double norm = detail::assemble(cfg_, g, w, w_n, next_boundary, res, &jac);
        for (int iter = 1;; ++iter) {
            if (!std::isfinite(norm)) fail(ErrorKind::overflow, "non-finite Newton residual");
            if (norm <= cfg_.newton_tol) return {std::move(w), {iter, norm}};
            if (iter >= cfg_.newton_max_iter) {
                std::ostringstream os;
                os << "Newton did not converge in " << iter << " iterations, residual " << norm;
                throw NonConvergenceError(os.str(), w.values(), norm, iter);
            }
            factorize(jac);
            for (std::size_t j = 0; j < g.size(); ++j) rhs[j] = -res.values()[j];
            Eigen::VectorXd delta = lu_.solve(rhs);
            if (lu_.info() != Eigen::Success || !delta.allFinite())
                fail(ErrorKind::degenerate_denominator, "singular Newton system");
            // an update below a few ulps of w cannot lower the residual any further
            double w_scale = std::max(1.0, w.max_abs());
            if (delta.lpNorm<Eigen::Infinity>() <= 8.0 * std::numeric_limits<double>::epsilon() * w_scale)
                return {std::move(w), {iter, norm, true}};

            double alpha = 1.0;
            bool accepted = false;
            Field trial = w;
            for (int bt = 0; bt <= cfg_.max_backtracks; ++bt, alpha *= cfg_.damping) {
                for (std::size_t j = 0; j < g.size(); ++j)
                    trial.values()[j] = w.values()[j] + alpha * delta[j];
                double tn;
                try {
                    tn = detail::assemble(cfg_, g, trial, w_n, next_boundary, trial_res, &jac);
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::degenerate_denominator) throw;
                    continue;
                }
                if (std::isfinite(tn) && tn < norm) {
                    accepted = true;
                    norm = tn;
                    break;
                }
            }
            if (!accepted) {
                std::ostringstream os;
                os << "Newton line search stalled at residual " << norm;
                throw NonConvergenceError(os.str(), w.values(), norm, iter);
            }
            std::swap(w, trial);
            std::swap(res, trial_res);
        }
    }

private:
    void factorize(const std::vector<Partials>& jac)
    {
        mat_ = detail::build_matrix(grid_, jac);
        if (!analyzed_) {
            lu_.analyzePattern(mat_);
            analyzed_ = true;
        }
        lu_.factorize(mat_);
        if (lu_.info() != Eigen::Success) fail(ErrorKind::degenerate_denominator, "singular Newton Jacobian");
    }

    ImplicitConfig cfg_;
    Grid grid_;
    Eigen::SparseMatrix<double> mat_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
    bool analyzed_ = false;
};

inline StepResult solve_step(const ImplicitConfig& cfg, const Field& w_n, const BoundarySlice& next_boundary)
{
    ImplicitStepper s(cfg);
    return s.step(w_n, next_boundary);
}

inline StepResult solve_step(const ImplicitConfig& cfg, const TransformContext& ctx, const Field& w_n)
{
    return solve_step(cfg, w_n, boundary_values(ctx, w_n.layer() + 1));
}

} // namespace hjb
