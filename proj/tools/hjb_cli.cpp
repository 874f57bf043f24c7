// Command line driver: solve | oracle | compare | cfl | probe | study
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hjb/analysis.hpp"
#include "hjb/errors.hpp"
#include "hjb/explicit_scheme.hpp"
#include "hjb/io.hpp"
#include "hjb/oracle.hpp"
#include "hjb/run.hpp"
#include "hjb/transform.hpp"

namespace fs = std::filesystem;
using namespace hjb;

namespace {

// Files are collected in memory and written only once the whole command succeeded.
class OutputSet {
public:
    std::ostringstream& open(const std::string& name) { return files_[name]; }

    void commit(const std::string& dir) const
    {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) fail(ErrorKind::overflow, "cannot create output directory " + dir);
        for (const auto& [name, body] : files_) {
            std::ofstream f(fs::path(dir) / name, std::ios::binary);
            f << body.str();
            if (!f) fail(ErrorKind::overflow, "cannot write " + name);
        }
    }

private:
    std::map<std::string, std::ostringstream> files_;
};

std::string layer_name(const char* stem, int n)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_n%05d.csv", stem, n);
    return buf;
}

KoDomain domain_of(const Grid& g)
{
    double xl = g.x_of(-g.i_max()), xh = g.x_of(g.i_max());
    double xmin = (xl <= 0.0 && xh >= 0.0) ? 0.0 : std::min(std::abs(xl), std::abs(xh));
    return {g.t_of(1), g.t_of(g.spec().n_t), xmin, g.x_abs_max(), g.r_of(g.k_min()), g.r_of(g.k_max())};
}

double resolve_k_o(const RunConfig& rc, const Grid& g)
{
    if (rc.k_o) return *rc.k_o;
    return estimate_k_o(rc.model, domain_of(g));
}

SolverSettings settings_of(const RunConfig& rc, double k_o, bool strict, bool enforce_cfl)
{
    SolverSettings s;
    s.kind = rc.scheme;
    s.ex = ExplicitConfig{rc.model, rc.grid, k_o, rc.l_o, enforce_cfl, strict, rc.quotient_floor,
                          rc.clamp_denominator};
    s.im.params = rc.model;
    s.im.grid = rc.grid;
    s.im.newton_tol = rc.newton_tol;
    s.im.newton_max_iter = rc.newton_max_iter;
    s.im.damping = rc.damping;
    s.im.quotient_floor = rc.quotient_floor;
    s.im.clamp_denominator = rc.clamp_denominator;
    return s;
}

bool has_oracle(const ModelParams& p)
{
    return std::holds_alternative<ExponentialUtility>(p.utility)
        && std::holds_alternative<QuadraticCost>(p.cost) && p.b == 0.0;
}

double cfl_lhs_of(const SolverSettings& s)
{
    if (s.kind == SchemeKind::explicit_simple || s.kind == SchemeKind::implicit_simple)
        return cfl_simple(s.ex);
    return cfl_general_max(s.ex);
}

int cmd_solve(const std::string& config, const std::string& out, bool strict, bool enforce_cfl)
{
    RunConfig rc = load_config(config);
    Grid g(rc.grid);
    TransformContext ctx(rc.model, g);
    double k_o = resolve_k_o(rc, g);
    SolverSettings s = settings_of(rc, k_o, strict || rc.strict, enforce_cfl || rc.enforce_cfl);
    double lhs = cfl_lhs_of(s);
    if (!is_implicit(s.kind) && lhs > 1.0 && !s.ex.enforce_cfl)
        std::cerr << "warning: CFL left-hand side " << lhs << " exceeds 1\n";

    OutputSet files;
    std::set<int> dump(rc.outputs.layers.begin(), rc.outputs.layers.end());
    bool oracle = has_oracle(rc.model);
    std::optional<ExponentialOracle> orc;
    if (oracle) orc = oracle_from(rc.model);
    ScalarField3 exact = [&](double t, double x, double r) { return exact_w(*orc, t, x, r); };
    ErrorOptions eo;
    eo.k_slice = rc.outputs.k_slice;
    eo.x_margin = rc.outputs.x_margin;
    std::optional<ErrorAccumulator> errors;
    if (rc.outputs.error_profile) {
        if (!oracle) fail(ErrorKind::config, "error_profile needs the closed-form model");
        errors.emplace(g, exact, eo);
    }
    std::optional<SandwichAccumulator> sandwich;
    if (rc.outputs.sandwich) sandwich.emplace(rc.model, g, 0.05, 3);
    long overflow_cells = 0;

    auto observe = [&](const Field& w) {
        if (errors) errors->add(w);
        if (sandwich) sandwich->add(w);
        if (!dump.count(w.layer())) return;
        write_surface_csv(files.open(layer_name("surface", w.layer())), g, w);
        double t = g.t_of(w.layer());
        if (rc.outputs.comparison) {
            if (!oracle) fail(ErrorKind::config, "compare output needs the closed-form model");
            auto& os = files.open(layer_name("compare", w.layer()));
            write_comparison_header(os);
            for (int i = -g.i_max(); i <= g.i_max(); ++i)
                for (int k = g.k_min(); k <= g.k_max(); ++k) {
                    double x = g.x_of(i), r = g.r_of(k);
                    write_comparison_row(os, make_comparison(t, x, r, w(i, k), exact_w(*orc, t, x, r)));
                }
        }
        if (rc.outputs.value_surface) {
            auto& os = files.open(layer_name("value", w.layer()));
            os << "t,x,r,v\n";
            for (int i = -g.i_max(); i <= g.i_max(); ++i)
                for (int k = g.k_min(); k <= g.k_max(); ++k) {
                    double v;
                    if (w(i, k) > exp_limit) {
                        v = -std::numeric_limits<double>::infinity();
                        ++overflow_cells;
                    } else {
                        v = to_v(w(i, k), rc.model.big_b);
                    }
                    os << format_double(t) << ',' << format_double(g.x_of(i)) << ',' << format_double(g.r_of(k))
                       << ',' << format_double(v) << '\n';
                }
        }
    };

    RunResult rr = run_scheme(s, ctx, initial_layer(ctx), rc.grid.n_t, observe);

    SchemeReport rep;
    rep.cfl_lhs = lhs;
    rep.k_o_used = k_o;
    rep.runtime = rr.seconds;
    rep.max_abs_observed = rr.max_abs;
    rep.stability_bound = is_implicit(s.kind)
        ? implicit_stability_bound(rc.model, rc.grid, g.t_of(rc.grid.n_t), rr.max_abs_initial, rr.bounds)
        : explicit_stability_bound(rc.model, g.x_abs_max(), g.t_of(rc.grid.n_t), rr.max_abs_initial, rr.bounds);
    if (errors) {
        const auto& p = errors->profile();
        rep.max_abs_error = p.max_abs;
        rep.max_rel_error_small_t = p.max_rel_small_t;
        rep.max_rel_error_large_t = p.max_rel_large_t;
        auto& os = files.open("error_profile.csv");
        os << "n,t,max_abs,max_rel,boundary_max_abs\n";
        for (const auto& le : p.layers)
            os << le.n << ',' << format_double(le.t) << ',' << format_double(le.max_abs) << ','
               << format_double(le.max_rel) << ',' << format_double(le.boundary_max_abs) << '\n';
    }
    auto& r = files.open("report.txt");
    r << "scheme=" << scheme_name(s.kind) << '\n'
      << "steps=" << rr.steps << '\n'
      << "cfl_lhs=" << format_double(rep.cfl_lhs) << '\n'
      << "k_o_used=" << format_double(rep.k_o_used) << '\n'
      << "max_abs_error=" << format_double(rep.max_abs_error) << '\n'
      << "max_rel_error_small_t=" << format_double(rep.max_rel_error_small_t) << '\n'
      << "max_rel_error_large_t=" << format_double(rep.max_rel_error_large_t) << '\n'
      << "stability_bound=" << format_double(rep.stability_bound) << '\n'
      << "max_abs_observed=" << format_double(rep.max_abs_observed) << '\n'
      << "k_bar=" << format_double(rr.bounds.k_bar) << '\n'
      << "k_bar_prime=" << format_double(rr.bounds.k_bar_prime) << '\n'
      << "l_o_observed=" << format_double(rr.bounds.l_o) << '\n'
      << "k_min_observed=" << format_double(rr.bounds.k_min) << '\n'
      << "newton_iterations=" << rr.newton_iterations << '\n'
      << "value_overflow_cells=" << overflow_cells << '\n';
    if (sandwich) {
        const auto& sw = sandwich->report();
        r << "sandwich_cells=" << sw.cells << '\n'
          << "sandwich_upper_violations=" << sw.upper_violations << '\n'
          << "sandwich_lower_violations=" << sw.lower_violations << '\n'
          << "sandwich_combo_violations=" << sw.combo_violations << '\n'
          << "sandwich_max_over_upper=" << format_double(sw.max_over_upper) << '\n'
          << "sandwich_max_under_combo=" << format_double(sw.max_under_combo) << '\n';
    }
    r << "runtime_seconds=" << format_double(rep.runtime) << '\n';
    files.commit(out);
    std::cout << r.str();
    return 0;
}

int cmd_oracle(const std::string& config, const std::string& out)
{
    RunConfig rc = load_config(config);
    Grid g(rc.grid);
    ExponentialOracle o = oracle_from(rc.model);
    OutputSet files;
    std::vector<int> layers = rc.outputs.layers;
    if (layers.empty()) layers = {1, rc.grid.n_t};
    for (int n : layers) {
        double t = g.t_of(n);
        auto& ws = files.open(layer_name("exact_w", n));
        auto& vs = files.open(layer_name("exact_v", n));
        ws << "t,x,r,w\n";
        vs << "t,x,r,v\n";
        for (int i = -g.i_max(); i <= g.i_max(); ++i)
            for (int k = g.k_min(); k <= g.k_max(); ++k) {
                double x = g.x_of(i), r = g.r_of(k);
                double w = exact_w(o, t, x, r);
                double v = w > exp_limit ? -std::numeric_limits<double>::infinity() : to_v(w, o.big_b);
                std::string pre = format_double(t) + ',' + format_double(x) + ',' + format_double(r) + ',';
                ws << pre << format_double(w) << '\n';
                vs << pre << format_double(v) << '\n';
            }
    }
    files.commit(out);
    return 0;
}

int cmd_compare(const std::string& approx, const std::string& reference, const std::string& out)
{
    std::ifstream a(approx), b(reference);
    if (!a) fail(ErrorKind::config, "cannot open " + approx);
    if (!b) fail(ErrorKind::config, "cannot open " + reference);
    auto rows = compare_surfaces(read_surface_csv(a), read_surface_csv(b));
    std::ostringstream os;
    write_comparison_header(os);
    double worst = 0.0;
    for (const auto& c : rows) {
        write_comparison_row(os, c);
        worst = std::max(worst, c.abs_err);
    }
    std::ofstream f(out, std::ios::binary);
    f << os.str();
    if (!f) fail(ErrorKind::overflow, "cannot write " + out);
    std::cout << "rows=" << rows.size() << " max_abs_err=" << format_double(worst) << '\n';
    return 0;
}

int cmd_cfl(const std::string& config, std::optional<double> x_o, std::optional<double> k_o_flag)
{
    RunConfig rc = load_config(config);
    Grid g(rc.grid);
    double k_o = k_o_flag ? *k_o_flag : resolve_k_o(rc, g);
    ExplicitConfig ec{rc.model, rc.grid, k_o, rc.l_o};
    double xo = x_o ? *x_o : g.x_abs_max();
    std::cout << "k_o=" << format_double(k_o) << '\n';
    if (std::holds_alternative<QuadraticCost>(rc.model.cost))
        std::cout << "cfl_simple=" << format_double(cfl_simple(ec, xo)) << '\n';
    std::cout << "cfl_general=" << format_double(cfl_general_max(ec)) << '\n';
    return 0;
}

int cmd_probe(const std::string& scheme, long trials, std::uint64_t seed, double dt_factor,
              const std::string& config)
{
    ProbeSetup ps;
    ps.kind = parse_scheme(scheme);
    ps.params.sigma = 0.1;
    ps.params.cost = QuadraticCost{0.1};
    ps.grid = GridSpec{1.0, 0.0333, 0.2, 2, 30, -10, 10};
    if (!config.empty()) {
        RunConfig rc = load_config(config);
        ps.params = rc.model;
        ps.grid = rc.grid;
        if (rc.k_o) ps.k_o = *rc.k_o;
    }
    if (ps.kind == SchemeKind::explicit_general && ps.params.b == 0.0 && config.empty()) ps.params.b = 0.5;
    if (!is_implicit(ps.kind)) {
        ExplicitConfig ec{ps.params, ps.grid, ps.k_o};
        double limit = ps.kind == SchemeKind::explicit_simple ? cfl_limit_dt_simple(ec) : cfl_limit_dt_general(ec);
        ps.grid.dt = dt_factor * limit;
    } else {
        ps.grid.dt = dt_factor;
    }
    ProbeReport rep = probe_delta_monotonicity(ps, trials, seed);
    std::cout << "scheme=" << scheme << " trials=" << rep.trials << " checks=" << rep.checks
              << " skipped=" << rep.skipped << " failures=" << rep.failures
              << " dt=" << format_double(ps.grid.dt) << " cfl_lhs=" << format_double(rep.cfl_lhs) << '\n';
    for (const auto& ce : rep.counterexamples)
        std::cout << "  violation i=" << ce.i << " arg=" << probe_argument_name(ps.kind, ce.argument)
                  << " eps=" << ce.eps << " c=" << format_double(ce.stencil.c)
                  << " left=" << format_double(ce.stencil.left) << " right=" << format_double(ce.stencil.right)
                  << " down=" << format_double(ce.stencil.down) << " up=" << format_double(ce.stencil.up)
                  << " S " << format_double(ce.s_before) << " -> " << format_double(ce.s_after) << '\n';
    return 0;
}

int cmd_study(const std::string& kind, const std::string& config)
{
    if (kind == "order") {
        ModelParams p;
        p.sigma = 0.1;
        p.cost = QuadraticCost{0.1};
        auto st = consistency_order_study(p, manufactured_quadratic(0.1), 0.5, 0.5, 0.0, {0.1, 0.05, 0.025, 0.0125});
        std::cout << "h,residual\n";
        for (std::size_t j = 0; j < st.h.size(); ++j)
            std::cout << format_double(st.h[j]) << ',' << format_double(st.residual[j]) << '\n';
        std::cout << "slope=" << format_double(st.slope) << (st.degenerate ? " (degenerate)" : "") << '\n';
        return 0;
    }
    if (kind == "convergence") {
        if (config.empty()) fail(ErrorKind::usage, "convergence study needs --config");
        RunConfig rc = load_config(config);
        Grid g(rc.grid);
        ExponentialOracle o = oracle_from(rc.model);
        SolverSettings s = settings_of(rc, resolve_k_o(rc, g), rc.strict, false);
        GridSpec fine = rc.grid;
        fine.dx /= 2;
        fine.dr /= 2;
        fine.dt /= 8;
        fine.i_max *= 2;
        fine.k_min *= 2;
        fine.k_max *= 2;
        fine.n_t *= 8;
        double t_end = g.t_of(rc.grid.n_t);
        ErrorOptions eo;
        eo.x_margin = rc.outputs.x_margin;
        auto tab = convergence_study(s, rc.model, {rc.grid, fine},
                                     [&](double t, double x, double r) { return exact_w(o, t, x, r); }, t_end,
                                     t_end);
        std::cout << "h,max_rel_error,max_abs_error,steps\n";
        for (const auto& row : tab.rows)
            std::cout << format_double(row.h) << ',' << format_double(row.max_rel_error) << ','
                      << format_double(row.max_abs_error) << ',' << row.steps << '\n';
        if (tab.partial) std::cout << "partial: " << tab.note << '\n';
        return 0;
    }
    fail(ErrorKind::usage, "unknown study '" + kind + "'");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Finite-difference solver for the log-transformed liquidation HJB equation"};
    app.require_subcommand(1);

    std::string config, out = "out";
    bool strict = false, enforce_cfl = false;
    auto* solve = app.add_subcommand("solve", "run a scheme from a config file");
    solve->add_option("--config", config, "INI config")->required();
    solve->add_option("--out", out, "output directory");
    solve->add_flag("--strict", strict, "monotonicity loss is fatal");
    solve->add_flag("--enforce-cfl", enforce_cfl, "reject steps that violate the CFL condition");

    auto* oracle = app.add_subcommand("oracle", "dump closed-form surfaces");
    oracle->add_option("--config", config, "INI config")->required();
    oracle->add_option("--out", out, "output directory");

    std::string approx, reference, compare_out = "compare.csv";
    auto* compare = app.add_subcommand("compare", "join two surfaces and write errors");
    compare->add_option("--approx", approx)->required();
    compare->add_option("--reference", reference)->required();
    compare->add_option("--out", compare_out);

    std::optional<double> x_o, k_o;
    auto* cfl = app.add_subcommand("cfl", "print CFL left-hand sides");
    cfl->add_option("--config", config, "INI config")->required();
    cfl->add_option("--x-o", x_o, "max |x| (default: grid)");
    cfl->add_option("--k-o", k_o, "override K_O");

    std::string scheme = "explicit-simple";
    long trials = 10000;
    std::uint64_t seed = 42;
    double dt_factor = 0.9;
    auto* probe = app.add_subcommand("probe", "randomized monotonicity probe");
    probe->add_option("--scheme", scheme);
    probe->add_option("--trials", trials);
    probe->add_option("--seed", seed);
    probe->add_option("--dt-factor", dt_factor, "explicit: dt as a multiple of the CFL limit; implicit: dt");
    probe->add_option("--config", config, "take model and grid from a config");

    std::string study_kind = "order";
    auto* study = app.add_subcommand("study", "consistency order or convergence study");
    study->add_option("--kind", study_kind)->check(CLI::IsMember({"order", "convergence"}));
    study->add_option("--config", config);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*solve) return cmd_solve(config, out, strict, enforce_cfl);
        if (*oracle) return cmd_oracle(config, out);
        if (*compare) return cmd_compare(approx, reference, compare_out);
        if (*cfl) return cmd_cfl(config, x_o, k_o);
        if (*probe) return cmd_probe(scheme, trials, seed, dt_factor, config);
        if (*study) return cmd_study(study_kind, config);
    } catch (const Error& e) {
        std::cerr << "error: code=" << exit_code(e.kind()) << " kind=" << kind_name(e.kind())
                  << " message=" << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: code=5 kind=internal message=" << e.what() << '\n';
        return 5;
    }
    return 0;
}
