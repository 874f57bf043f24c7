#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <tuple>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hjb/errors.hpp"
#include "hjb/grid.hpp"
#include "hjb/model.hpp"
#include "hjb/run.hpp"

namespace hjb {

// ---------------------------------------------------------------- numbers

// shortest text with 17 significant digits; locale independent
inline std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s)
{
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const char* b = s.data();
    const char* e = b + s.size();
    if (b != e && *b == '+') ++b;
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e) fail(ErrorKind::config, "not a number: '" + s + "'");
    return v;
}

// ---------------------------------------------------------------- surfaces

struct SurfaceRow {
    double t, x, r, w;
};

inline void write_surface_header(std::ostream& os) { os << "t,x,r,w\n"; }

inline void write_surface_rows(std::ostream& os, const Grid& g, const Field& f)
{
    double t = g.t_of(f.layer());
    for (int i = -g.i_max(); i <= g.i_max(); ++i)
        for (int k = g.k_min(); k <= g.k_max(); ++k)
            os << format_double(t) << ',' << format_double(g.x_of(i)) << ',' << format_double(g.r_of(k)) << ','
               << format_double(f(i, k)) << '\n';
}

inline void write_surface_csv(std::ostream& os, const Grid& g, const Field& f)
{
    write_surface_header(os);
    write_surface_rows(os, g, f);
}

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

inline std::vector<SurfaceRow> read_surface_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) fail(ErrorKind::config, "empty surface file");
    auto head = split_csv_line(line);
    if (head.size() < 4 || head[0] != "t" || head[1] != "x" || head[2] != "r" || head[3] != "w")
        fail(ErrorKind::config, "surface header must start with t,x,r,w");
    std::vector<SurfaceRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto c = split_csv_line(line);
        if (c.size() < 4) fail(ErrorKind::config, "short surface row: " + line);
        rows.push_back({parse_double(c[0]), parse_double(c[1]), parse_double(c[2]), parse_double(c[3])});
    }
    return rows;
}

// Fills a field from rows of one layer; every lattice point must be present.
inline Field field_from_rows(const Grid& g, int n, const std::vector<SurfaceRow>& rows)
{
    Field f(g, n, std::numeric_limits<double>::quiet_NaN());
    std::vector<char> seen(g.size(), 0);
    for (const auto& row : rows) {
        int i = int(std::lround((row.x - g.spec().x_offset) / g.spec().dx));
        int k = int(std::lround((row.r - g.spec().r_offset) / g.spec().dr));
        if (i < -g.i_max() || i > g.i_max() || k < g.k_min() || k > g.k_max()) continue;
        if (row.t != g.t_of(n)) continue;
        f(i, k) = row.w;
        seen[g.index(i, k)] = 1;
    }
    for (char s : seen)
        if (!s) fail(ErrorKind::config, "surface does not cover the grid");
    return f;
}

struct ComparisonRow {
    double t, x, r, w_h, w_exact, abs_err, rel_err;
};

inline void write_comparison_header(std::ostream& os) { os << "t,x,r,w_h,w_exact,abs_err,rel_err\n"; }

inline ComparisonRow make_comparison(double t, double x, double r, double wh, double we, double abs_floor = 1e-8)
{
    double err = std::abs(wh - we);
    double rel = std::abs(we) < abs_floor ? err : err / std::abs(we);
    return {t, x, r, wh, we, err, rel};
}

inline void write_comparison_row(std::ostream& os, const ComparisonRow& c)
{
    os << format_double(c.t) << ',' << format_double(c.x) << ',' << format_double(c.r) << ','
       << format_double(c.w_h) << ',' << format_double(c.w_exact) << ',' << format_double(c.abs_err) << ','
       << format_double(c.rel_err) << '\n';
}

// Joins two surfaces on identical (t,x,r) keys.
inline std::vector<ComparisonRow> compare_surfaces(const std::vector<SurfaceRow>& approx,
                                                   const std::vector<SurfaceRow>& reference)
{
    std::map<std::tuple<double, double, double>, double> ref;
    for (const auto& r : reference) ref[{r.t, r.x, r.r}] = r.w;
    std::vector<ComparisonRow> out;
    for (const auto& a : approx) {
        auto it = ref.find({a.t, a.x, a.r});
        if (it == ref.end()) continue;
        out.push_back(make_comparison(a.t, a.x, a.r, a.w, it->second));
    }
    if (out.empty() && !approx.empty()) fail(ErrorKind::config, "surfaces share no (t,x,r) points");
    return out;
}

// ---------------------------------------------------------------- run configuration

struct OutputSpec {
    std::vector<int> layers;      // surfaces to dump
    bool error_profile = false;   // needs the closed form
    bool comparison = false;      // per-cell comparison for the dumped layers
    bool value_surface = false;   // back-transformed V for the dumped layers
    bool sandwich = false;        // growth bounds for the convex combination
    std::optional<int> k_slice;
    int x_margin = 0;
};

struct RunConfig {
    SchemeKind scheme = SchemeKind::explicit_simple;
    ModelParams model;
    GridSpec grid;
    std::optional<double> k_o;    // empty: estimate from the model
    double l_o = 1.0;
    bool enforce_cfl = false;
    bool strict = false;
    double quotient_floor = 1e-12;
    bool clamp_denominator = false;
    double newton_tol = 1e-10;
    int newton_max_iter = 50;
    double damping = 0.5;
    OutputSpec outputs;
};

namespace detail {

inline bool parse_bool(const std::string& s)
{
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    fail(ErrorKind::config, "not a boolean: '" + s + "'");
}

inline int parse_int(const std::string& s)
{
    int v = 0;
    const char* b = s.data();
    const char* e = b + s.size();
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e) fail(ErrorKind::config, "not an integer: '" + s + "'");
    return v;
}

inline std::string trim(const std::string& s)
{
    auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

class Section {
public:
    Section(const boost::property_tree::ptree* t, std::string name) : t_(t), name_(std::move(name)) {}

    std::optional<std::string> get(const std::string& key)
    {
        used_.insert(key);
        if (!t_) return std::nullopt;
        auto v = t_->get_optional<std::string>(key);
        if (!v) return std::nullopt;
        return trim(*v);
    }
    double num(const std::string& key, double def)
    {
        auto v = get(key);
        return v ? parse_double(*v) : def;
    }
    double num(const std::string& key)
    {
        auto v = get(key);
        if (!v) fail(ErrorKind::config, "missing key " + name_ + "." + key);
        return parse_double(*v);
    }
    int integer(const std::string& key, int def)
    {
        auto v = get(key);
        return v ? parse_int(*v) : def;
    }
    bool flag(const std::string& key, bool def)
    {
        auto v = get(key);
        return v ? parse_bool(*v) : def;
    }
    std::string str(const std::string& key, const std::string& def)
    {
        auto v = get(key);
        return v ? *v : def;
    }
    void reject_unknown() const
    {
        if (!t_) return;
        for (const auto& kv : *t_)
            if (!used_.count(kv.first)) fail(ErrorKind::config, "unknown key " + name_ + "." + kv.first);
    }

private:
    const boost::property_tree::ptree* t_;
    std::string name_;
    std::set<std::string> used_;
};

} // namespace detail

inline RunConfig parse_config(std::istream& is)
{
    boost::property_tree::ptree pt;
    try {
        boost::property_tree::ini_parser::read_ini(is, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        fail(ErrorKind::config, std::string("config parse error: ") + e.what());
    }
    for (const auto& kv : pt) {
        static const std::set<std::string> known{"model", "grid", "scheme", "outputs"};
        if (!known.count(kv.first)) fail(ErrorKind::config, "unknown section [" + kv.first + "]");
    }
    auto section = [&](const char* name) {
        auto c = pt.get_child_optional(name);
        return detail::Section(c ? &*c : nullptr, name);
    };

    RunConfig cfg;
    auto m = section("model");
    cfg.model.sigma = m.num("sigma", 0.1);
    cfg.model.b = m.num("b", 0.0);
    cfg.model.big_b = m.num("big_b", 0.0);
    std::string util = m.str("utility", "exponential");
    if (util == "exponential") {
        cfg.model.utility = ExponentialUtility{m.num("a", 1.0)};
    } else if (util == "convex_combo") {
        cfg.model.utility = ConvexComboUtility{m.num("a1"), m.num("a2"), m.num("mu")};
    } else {
        fail(ErrorKind::config, "unknown utility '" + util + "'");
    }
    std::string cost = m.str("cost", "quadratic");
    if (cost == "quadratic") cfg.model.cost = QuadraticCost{m.num("lambda", 0.1)};
    else if (cost == "quartic") cfg.model.cost = quartic_cost(m.num("quartic_c"));
    else fail(ErrorKind::config, "unknown cost '" + cost + "'");
    m.reject_unknown();

    auto g = section("grid");
    cfg.grid.dt = g.num("dt", cfg.grid.dt);
    cfg.grid.dx = g.num("dx", cfg.grid.dx);
    cfg.grid.dr = g.num("dr", cfg.grid.dr);
    cfg.grid.n_t = g.integer("n_t", cfg.grid.n_t);
    cfg.grid.i_max = g.integer("i_max", cfg.grid.i_max);
    cfg.grid.k_min = g.integer("k_min", cfg.grid.k_min);
    cfg.grid.k_max = g.integer("k_max", cfg.grid.k_max);
    cfg.grid.x_offset = g.num("x_offset", 0.0);
    cfg.grid.r_offset = g.num("r_offset", 0.0);
    g.reject_unknown();

    auto s = section("scheme");
    cfg.scheme = parse_scheme(s.str("type", "explicit-simple"));
    std::string ko = s.str("k_o", "auto");
    if (ko != "auto") cfg.k_o = parse_double(ko);
    cfg.l_o = s.num("l_o", 1.0);
    cfg.enforce_cfl = s.flag("enforce_cfl", false);
    cfg.strict = s.flag("strict", false);
    cfg.quotient_floor = s.num("quotient_floor", 1e-12);
    cfg.clamp_denominator = s.flag("clamp_denominator", false);
    cfg.newton_tol = s.num("newton_tol", 1e-10);
    cfg.newton_max_iter = s.integer("newton_max_iter", 50);
    cfg.damping = s.num("damping", 0.5);
    s.reject_unknown();

    auto o = section("outputs");
    std::string layers = o.str("layers", "");
    if (layers == "all") {
        for (int n = 1; n <= cfg.grid.n_t; ++n) cfg.outputs.layers.push_back(n);
    } else if (!layers.empty()) {
        std::stringstream ls(layers);
        std::string item;
        while (std::getline(ls, item, ',')) cfg.outputs.layers.push_back(detail::parse_int(detail::trim(item)));
    }
    cfg.outputs.error_profile = o.flag("error_profile", false);
    cfg.outputs.comparison = o.flag("compare", false);
    cfg.outputs.value_surface = o.flag("value_surface", false);
    cfg.outputs.sandwich = o.flag("sandwich", false);
    if (auto ks = o.get("k_slice")) cfg.outputs.k_slice = detail::parse_int(*ks);
    cfg.outputs.x_margin = o.integer("x_margin", 0);
    o.reject_unknown();

    validate(cfg.grid);
    for (int n : cfg.outputs.layers)
        if (n < 1 || n > cfg.grid.n_t) fail(ErrorKind::config, "output layer out of range: " + std::to_string(n));
    if (cfg.k_o && !(*cfg.k_o > 0.0)) fail(ErrorKind::config, "k_o must be positive");
    if (!(cfg.l_o > 0.0)) fail(ErrorKind::config, "l_o must be positive");
    return cfg;
}

inline RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) fail(ErrorKind::config, "cannot open config " + path);
    return parse_config(in);
}

} // namespace hjb
