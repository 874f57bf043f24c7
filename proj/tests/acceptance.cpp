// Acceptance run: one PASS/FAIL line per criterion, followed by diagnostics.
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hjb/analysis.hpp"

using namespace hjb;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

struct Verdict {
    bool pass = false;
    std::string detail;
};

void report(int id, const char* name, double limit_s, const std::function<Verdict()>& body)
{
    auto t0 = Clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const Error& e) {
        v.pass = false;
        v.detail = std::string("error kind=") + kind_name(e.kind()) + ": " + e.what();
    }
    double s = std::chrono::duration<double>(Clock::now() - t0).count();
    bool in_time = s < limit_s;
    bool ok = v.pass && in_time;
    if (!ok) ++failures;
    std::printf("[%s] %2d %s (%.3f s, limit %.0f s)%s\n      %s\n", ok ? "PASS" : "FAIL", id, name, s, limit_s,
                in_time ? "" : " TIMEOUT", v.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...)
{
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

ModelParams exponential_b0()
{
    ModelParams p;
    p.sigma = 0.1;
    p.cost = QuadraticCost{0.1};
    p.utility = ExponentialUtility{1.0};
    return p;
}

ModelParams combo_b1()
{
    ModelParams p;
    p.sigma = 0.1;
    p.big_b = 1.0;
    p.cost = QuadraticCost{0.1};
    p.utility = ConvexComboUtility{0.5, 2.0, 0.25};
    return p;
}

GridSpec base_grid() { return GridSpec{0.04, 0.0333, 0.833, 250, 30, -60, 60}; }

double interior_gap(const Grid& g, const Field& a, const Field& b)
{
    double m = 0.0;
    for (int i = -g.i_max() + 1; i < g.i_max(); ++i)
        for (int k = g.k_min() + 1; k < g.k_max(); ++k) m = std::max(m, std::abs(a(i, k) - b(i, k)));
    return m;
}

// ------------------------------------------------------------------ criteria

Verdict cfl_constant()
{
    ExplicitConfig cfg{exponential_b0(), base_grid(), 1.0, 1.0};
    double v = cfl_simple(cfg, 1.0);
    double rel = std::abs(v - 162.0043) / 162.0043;
    return {rel <= 0.01, fmt("cfl_simple=%.6f target=162.0043 rel_dev=%.4f%% (tol 1%%)", v, 100 * rel)};
}

Verdict consistency_on_oracle()
{
    ModelParams p = exponential_b0();
    ExplicitConfig cfg{p, base_grid(), 1.0, 1.0};
    ExponentialOracle o = oracle_from(p);
    double raw = 0.0;
    // source layers strictly inside the window t > 0.04
    double d = scheme_defect_on_exact(cfg, [&](double t, double x, double r) { return exact_w(o, t, x, r); }, 2,
                                      cfg.grid.n_t, &raw);
    return {d <= 0.18, fmt("max dt*|S| over source layers t_n in ]0.04,9.96] = %.4f (tol 0.18); max |S| = %.4f", d,
                           raw)};
}

Verdict error_reproduction()
{
    ModelParams p = exponential_b0();
    Grid g(base_grid());
    TransformContext ctx(p, g);
    SolverSettings s;
    s.kind = SchemeKind::explicit_simple;
    s.ex = ExplicitConfig{p, g.spec(), 1.0, 1.0};
    ExponentialOracle o = oracle_from(p);
    ScalarField3 ex = [&](double t, double x, double r) { return exact_w(o, t, x, r); };
    ErrorOptions slice;
    slice.k_slice = -52;
    ErrorAccumulator on_slice(g, ex, slice), full(g, ex);
    auto rr = run_scheme(s, ctx, initial_layer(ctx), g.spec().n_t, [&](const Field& w) {
        on_slice.add(w);
        full.add(w);
    });
    const auto& e = on_slice.profile();
    bool ok = e.max_rel_small_t <= 0.03 && e.max_rel_large_t <= 0.001;
    return {ok, fmt("slice r=%.4f: t<=2 max rel %.4f%% (tol 3%%), t>2 max rel %.5f%% (tol 0.1%%); "
                    "full interior: %.1f%% / %.4f%%, max abs %.4g; %d steps",
                    g.r_of(-52), 100 * e.max_rel_small_t, 100 * e.max_rel_large_t,
                    100 * full.profile().max_rel_small_t, 100 * full.profile().max_rel_large_t,
                    full.profile().max_abs, rr.steps)};
}

Verdict vanishing_singularity()
{
    ModelParams p = exponential_b0();
    ExponentialOracle o = oracle_from(p);
    std::vector<double> gaps;
    for (double t : {1e-2, 1e-3, 1e-4}) gaps.push_back(std::abs(exact_w(o, t, 1.0, 0.0) - u_tilde(p, t, 1.0, 0.0)));
    bool ok = gaps[1] < gaps[0] && gaps[2] < gaps[1] && gaps[2] < 1e-4;
    return {ok, fmt("|w - u~| at (1,0): t=1e-2 %.3e, t=1e-3 %.3e, t=1e-4 %.3e (tol 1e-4)", gaps[0], gaps[1],
                    gaps[2])};
}

Verdict monotonicity_probes()
{
    auto setup = [](SchemeKind k) {
        ProbeSetup ps;
        ps.kind = k;
        ps.params.sigma = 0.1;
        ps.params.cost = QuadraticCost{0.1};
        if (k == SchemeKind::explicit_general) ps.params.b = 0.5;
        ps.grid = GridSpec{1.0, 0.0333, 0.2, 2, 30, -10, 10};
        return ps;
    };
    auto explicit_at = [&](SchemeKind k, double factor) {
        ProbeSetup ps = setup(k);
        ExplicitConfig ec{ps.params, ps.grid, ps.k_o};
        ps.grid.dt = factor * (k == SchemeKind::explicit_simple ? cfl_limit_dt_simple(ec) : cfl_limit_dt_general(ec));
        return probe_delta_monotonicity(ps, 10000, 1);
    };
    auto implicit_at = [&](SchemeKind k, double dt) {
        ProbeSetup ps = setup(k);
        ps.grid.dt = dt;
        return probe_delta_monotonicity(ps, 10000, 2);
    };
    ProbeReport a = explicit_at(SchemeKind::explicit_simple, 0.9);
    ProbeReport b = explicit_at(SchemeKind::explicit_general, 0.9);
    ProbeReport c1 = implicit_at(SchemeKind::implicit_simple, 1.0);
    ProbeReport c2 = implicit_at(SchemeKind::implicit_general, 1.0);
    ProbeReport neg = explicit_at(SchemeKind::explicit_simple, 10.0);
    bool ok = a.failures == 0 && b.failures == 0 && c1.failures == 0 && c2.failures == 0 && neg.failures >= 1;
    return {ok, fmt("violations: explicit-simple %ld/%ld (cfl %.2f), explicit-general %ld/%ld (cfl %.2f), "
                    "implicit-simple %ld/%ld, implicit-general %ld/%ld (dt 1); negative control at 10x: %ld",
                    a.failures, a.checks, a.cfl_lhs, b.failures, b.checks, b.cfl_lhs, c1.failures, c1.checks,
                    c2.failures, c2.checks, neg.failures)};
}

Verdict lemma_property()
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ux(-3.0, 3.0);
    std::vector<double> ts;
    for (int j = 0; j < 100; ++j) ts.push_back(std::pow(10.0, -3.0 + 5.0 * j / 99.0));
    std::vector<CostSpec> costs{QuadraticCost{0.1}, quartic_cost(0.5)};
    int bad = 0;
    double worst_halving = 0.0;
    for (int j = 0; j < 20; ++j) {
        double x = ux(rng);
        if (x == 0.0) x = 1.0;
        for (const auto& c : costs)
            if (!check_lemma_sgi(c, x, ts).decreasing) ++bad;
        for (double t : ts) {
            double v1 = t * fenchel_conjugate(costs[0], -x / t);
            double v2 = 2 * t * fenchel_conjugate(costs[0], -x / (2 * t));
            worst_halving = std::max(worst_halving, std::abs(v2 - v1 / 2) / std::abs(v1 / 2));
        }
    }
    return {bad == 0 && worst_halving <= 1e-12,
            fmt("non-decreasing sequences: %d of 40; worst halving deviation %.2e (tol 1e-12)", bad, worst_halving)};
}

Verdict transform_round_trip()
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ue(-300.0, 300.0), ub(-300.0, 300.0), u01(0.0, 1.0);
    const long n = 1000000;
    long bad = 0;
    double worst = 0.0, worst_v = 0.0, worst_b = 0.0;
    for (long j = 0; j < n; ++j) {
        double gap = std::pow(10.0, ue(rng));     // B - v in [1e-300, 1e300]
        double big_b = u01(rng) < 0.1 ? 0.0 : std::pow(10.0, ub(rng));
        double v = big_b - gap;
        if (!(big_b - v > 0.0)) continue;
        double back = to_v(to_w(v, big_b), big_b);
        double rel = v == 0.0 ? std::abs(back) : std::abs(back - v) / std::abs(v);
        if (!(rel <= 1e-14)) ++bad;
        if (!(rel <= worst)) {
            worst = rel;
            worst_v = v;
            worst_b = big_b;
        }
    }
    // the same check restricted to pairs where B does not dominate |v| and |log(B - v)| is moderate
    long bad_tame = 0, tame = 0;
    for (long j = 0; j < 100000; ++j) {
        double v = -std::pow(10.0, 20.0 * u01(rng) - 10.0);
        double big_b = u01(rng) * std::abs(v);
        ++tame;
        double back = to_v(to_w(v, big_b), big_b);
        if (!(std::abs(back - v) <= 1e-14 * std::abs(v))) ++bad_tame;
    }
    return {bad == 0, fmt("%ld of %ld pairs exceed 1e-14 relative; worst %.3g at v=%.3g B=%.3g; "
                          "pairs with B<=|v|, |v| in [1e-10,1e10]: %ld of %ld exceed",
                          bad, n, worst, worst_v, worst_b, bad_tame, tame)};
}

Verdict cross_validation()
{
    ModelParams p = exponential_b0();
    ExponentialOracle o = oracle_from(p);
    std::vector<double> gaps;
    for (double dt : {1e-3, 5e-4}) {
        int n0 = int(std::lround(1.0 / dt));
        GridSpec gs = base_grid();
        gs.dt = dt;
        gs.n_t = n0 + 1;
        Grid g(gs);
        TransformContext ctx(p, g);
        Field start(g, n0);
        for (int i = -g.i_max(); i <= g.i_max(); ++i)
            for (int k = g.k_min(); k <= g.k_max(); ++k) start(i, k) = exact_w(o, g.t_of(n0), g.x_of(i), g.r_of(k));
        ExplicitConfig ec{p, gs, 1.0, 1.0};
        ImplicitConfig ic;
        ic.params = p;
        ic.grid = gs;
        Field e = step_simple(ec, ctx, start);
        Field m = solve_step(ic, ctx, start).w;
        gaps.push_back(interior_gap(g, e, m));
    }
    double ratio = gaps[0] / gaps[1];
    bool part_a = ratio >= 3.0 && ratio <= 5.0;

    GridSpec gs = base_grid();
    ExplicitConfig ec0{p, gs, 1.0, 1.0};
    gs.dt = 10.0 * cfl_limit_dt_simple(ec0);
    gs.n_t = int(std::ceil(10.0 / gs.dt));
    Grid g(gs);
    TransformContext ctx(p, g);
    SolverSettings s;
    s.kind = SchemeKind::implicit_simple;
    s.im.params = p;
    s.im.grid = gs;
    RunResult rr = run_scheme(s, ctx, initial_layer(ctx), gs.n_t);
    double bound = implicit_stability_bound(p, gs, g.t_of(gs.n_t), rr.max_abs_initial, rr.bounds);
    bool part_b = rr.last.all_finite() && rr.steps == gs.n_t - 1 && rr.max_abs <= bound;
    return {part_a && part_b,
            fmt("one step from t=1: gap(1e-3)=%.4e gap(5e-4)=%.4e ratio=%.3f (tol [3,5]); implicit at dt=%.5g "
                "(10x explicit limit): %d steps to t=%.3f, max|w|=%.4f (initial %.4f, bound %.4f), "
                "Newton iterations mean %.2f max %d, roundoff stops %ld, %.1f s",
                gaps[0], gaps[1], ratio, gs.dt, rr.steps, g.t_of(gs.n_t), rr.max_abs, rr.max_abs_initial, bound,
                double(rr.newton_iterations) / std::max(rr.steps, 1), rr.newton_iterations_max, rr.newton_roundoff_stops, rr.seconds)};
}

std::string sandwich_summary(const SandwichReport& r)
{
    return fmt("cells %ld, over upper %ld (worst %+.4f at t=%.3f i=%d k=%d), under lower %ld (worst %+.4f, "
               "vacuous %ld), under combo %ld (worst %+.4f), last violation at t=%.3f",
               r.cells, r.upper_violations, r.max_over_upper, r.worst_upper_t, r.worst_upper_i, r.worst_upper_k,
               r.lower_violations, r.max_under_lower, r.vacuous_lower, r.combo_violations, r.max_under_combo, r.last_violation_t);
}

SandwichReport combo_run(SchemeKind kind, GridSpec gs, double k_o, std::string* note)
{
    ModelParams p = combo_b1();
    Grid g(gs);
    TransformContext ctx(p, g);
    SolverSettings s;
    s.kind = kind;
    s.ex = ExplicitConfig{p, gs, k_o, 1.0};
    s.im.params = p;
    s.im.grid = gs;
    SandwichAccumulator acc(p, g, 0.05, 3);
    try {
        run_scheme(s, ctx, initial_layer(ctx), gs.n_t, [&](const Field& w) { acc.add(w); });
    } catch (const Error& e) {
        *note = fmt("aborted (%s: %s) after %ld checked cells", kind_name(e.kind()), e.what(), acc.report().cells);
        SandwichReport r = acc.report();
        ++r.upper_violations;
        return r;
    }
    *note = "completed";
    return acc.report();
}

Verdict growth_sandwich()
{
    ModelParams p = combo_b1();
    GridSpec gs{0.013, 0.1, 0.8, 769, 20, 0, 25};
    Grid g(gs);
    KoDomain dom{g.t_of(1), g.t_of(gs.n_t), 0.0, g.x_abs_max(), g.r_of(gs.k_min), g.r_of(gs.k_max)};
    double k_o = estimate_k_o(p, dom);
    ExplicitConfig ec{p, gs, k_o, 1.0};
    double lhs = cfl_simple(ec);

    std::string note;
    SandwichReport lit = combo_run(SchemeKind::explicit_simple, gs, k_o, &note);
    bool ok = lit.violations() == 0;
    std::string out = fmt("dt=0.013 explicit-simple (cfl %.3f, K_O %.4g): %s; %s", lhs, k_o, note.c_str(),
                          sandwich_summary(lit).c_str());

    // diagnostics: the same window at a CFL-satisfying step, and the implicit scheme at dt = 0.013
    GridSpec st = gs;
    st.dt = 0.9 * cfl_limit_dt_simple(ec);
    st.n_t = int(std::ceil(10.0 / st.dt));
    std::string n1, n2;
    SandwichReport r1 = combo_run(SchemeKind::explicit_simple, st, k_o, &n1);
    SandwichReport r2 = combo_run(SchemeKind::implicit_simple, gs, k_o, &n2);
    out += fmt("\n      diagnostic explicit at dt=%.4g: %s; %s", st.dt, n1.c_str(), sandwich_summary(r1).c_str());
    out += fmt("\n      diagnostic implicit at dt=0.013: %s; %s", n2.c_str(), sandwich_summary(r2).c_str());
    return {ok, out};
}

Verdict consistency_order()
{
    auto st = consistency_order_study(exponential_b0(), manufactured_quadratic(0.1), 0.5, 0.5, 0.0,
                                      {0.1, 0.05, 0.025, 0.0125});
    std::string res;
    for (std::size_t j = 0; j < st.h.size(); ++j) res += fmt(" h=%.4g:%.4e", st.h[j], st.residual[j]);
    return {!st.degenerate && st.slope >= 0.8 && st.slope <= 1.2,
            fmt("slope %.4f (tol [0.8,1.2]);%s", st.slope, res.c_str())};
}

} // namespace

int main()
{
    std::printf("threads: %d\n", thread_count());
    report(1, "CFL constant on the reference grid", 1, cfl_constant);
    report(2, "scheme consistency on the closed form", 60, consistency_on_oracle);
    report(3, "explicit run error profile", 300, error_reproduction);
    report(4, "vanishing initial singularity", 1, vanishing_singularity);
    report(5, "delta-monotonicity probes", 60, monotonicity_probes);
    report(6, "conjugate decrease and halving law", 1, lemma_property);
    report(7, "transform round trip", 10, transform_round_trip);
    report(8, "explicit/implicit cross-validation", 300, cross_validation);
    report(9, "growth sandwich for the convex combination", 600, growth_sandwich);
    report(10, "consistency order", 60, consistency_order);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
