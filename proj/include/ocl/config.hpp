#pragma once

#include "ocl/compatibility.hpp"
#include "ocl/convergence.hpp"
#include "ocl/errors.hpp"
#include "ocl/model.hpp"
#include "ocl/penalized_solver.hpp"
#include "ocl/verifier.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ocl {

using json = nlohmann::ordered_json;

struct CompatSettings {
    std::optional<double> gamma;     // default theta_lower / 2
    std::optional<double> zeta;      // default 1e-8 * ||v0||_inf
    std::optional<double> T;         // default solver T
    CompatibilityOptions options;
};

struct PicardSettings {
    PicardOptions options;
    double seed_scale = 2.0;         // second seed is seed_scale * u0
    std::size_t snapshots = 10;
};

struct CheckSettings {
    double mass_tolerance = 5e-3;
    double multiplier_tau_factor = 10.0;   // tau = factor / n
    double multiplier_zeta = 1e-3;
    double multiplier_gap_limit = 0.2;
    double linf_tolerance = 1e-12;
    double comparison_tv_factor = 2.0;     // tol = factor * dx * TV(u0)
    std::size_t c_theta_times = 64;
};

struct ParsedConfig {
    ProblemSpec problem;
    SolverConfig solver;
    std::size_t snapshots = 40;
    std::size_t w11_stride = 1;
    std::optional<SweepConfig> sweep;
    std::optional<EntropyTestConfig> entropy;
    CompatSettings compat;
    PicardSettings picard;
    CheckSettings checks;
    json resolved;   // every value after defaults, echoed into manifests

    [[nodiscard]] std::vector<double> output_times() const { return uniform_times(solver.T, snapshots); }
};

namespace detail {

/// Walks one JSON object, remembering which keys were read so unknown keys
/// can be reported with their full path.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigurationError("config: '" + display() + "' must be an object");
    }

    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    [[nodiscard]] std::string child(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    double number(const std::string& key, std::optional<double> def = std::nullopt) {
        seen_.insert(key);
        if (!has(key)) {
            if (def) return *def;
            throw ConfigurationError("config: missing required key '" + child(key) + "'");
        }
        const auto& v = j_.at(key);
        if (!v.is_number()) throw ConfigurationError("config: '" + child(key) + "' must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigurationError("config: '" + child(key) + "' must be finite");
        return d;
    }

    std::optional<double> optional_number(const std::string& key) {
        if (!has(key)) {
            seen_.insert(key);
            return std::nullopt;
        }
        return number(key);
    }

    std::optional<std::size_t> optional_count(const std::string& key) {
        if (!has(key)) {
            seen_.insert(key);
            return std::nullopt;
        }
        return count(key);
    }

    std::size_t count(const std::string& key, std::optional<std::size_t> def = std::nullopt) {
        seen_.insert(key);
        if (!has(key)) {
            if (def) return *def;
            throw ConfigurationError("config: missing required key '" + child(key) + "'");
        }
        const auto& v = j_.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            throw ConfigurationError("config: '" + child(key) + "' must be a nonnegative integer");
        }
        return v.get<std::size_t>();
    }

    std::string text(const std::string& key, std::optional<std::string> def = std::nullopt) {
        seen_.insert(key);
        if (!has(key)) {
            if (def) return *def;
            throw ConfigurationError("config: missing required key '" + child(key) + "'");
        }
        const auto& v = j_.at(key);
        if (!v.is_string()) throw ConfigurationError("config: '" + child(key) + "' must be a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) {
        seen_.insert(key);
        if (!has(key)) throw ConfigurationError("config: missing required key '" + child(key) + "'");
        const auto& v = j_.at(key);
        if (!v.is_array()) throw ConfigurationError("config: '" + child(key) + "' must be an array");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigurationError("config: '" + child(key) + "' must hold numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::optional<ObjectReader> object(const std::string& key) {
        seen_.insert(key);
        if (!has(key)) return std::nullopt;
        return ObjectReader(j_.at(key), child(key));
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) {
                throw ConfigurationError("config: unknown key '" + child(it.key()) + "'");
            }
        }
    }

private:
    [[nodiscard]] std::string display() const { return path_.empty() ? "<root>" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline FluxSpec parse_flux(ObjectReader r, json& out) {
    const std::string kind = r.text("kind");
    const double range = r.number("range", 4.0);
    out = {{"kind", kind}, {"range", range}};
    FluxSpec f = FluxSpec::burgers(range);
    if (kind == "burgers") {
        f = FluxSpec::burgers(range);
    } else if (kind == "linear") {
        const double a = r.number("a");
        out["a"] = a;
        f = FluxSpec::linear(a, range);
    } else if (kind == "cubic") {
        const double c = r.number("c");
        out["c"] = c;
        f = FluxSpec::cubic(c, range);
    } else {
        throw ConfigurationError("config: unknown flux kind '" + kind + "' at '" + r.child("kind") + "'");
    }
    r.finish();
    return f;
}

inline ObstacleSpec parse_obstacle(ObjectReader r, json& out) {
    const std::string family = r.text("family");
    ObstacleSpec s;
    if (family == "constant") {
        s = constant_obstacle(r.number("value"));
    } else if (family == "moving_dip") {
        const double lower = r.number("lower");
        const double amp = r.number("amplitude");
        const double center = r.number("center");
        const double speed = r.number("speed", 0.0);
        const double width = r.number("width");
        s = moving_dip(lower, amp, center, speed, width);
    } else if (family == "ramp") {
        const double lower = r.number("lower");
        const double slope = r.number("slope");
        const double lo = r.number("window_lo");
        const double hi = r.number("window_hi");
        const double sm = r.number("smoothing", 0.05);
        s = ramp_obstacle(lower, slope, lo, hi, sm);
    } else {
        throw ConfigurationError("config: unknown obstacle family '" + family + "' at '" +
                                 r.child("family") + "'");
    }
    r.finish();
    out = {{"family", family}};
    for (const auto& [k, v] : s.parameters) out[k] = v;
    return s;
}

inline InitialData parse_datum(ObjectReader r, json& out) {
    const std::string family = r.text("family");
    InitialData d;
    out = {{"family", family}};
    if (family == "box") {
        const double lo = r.number("lo");
        const double hi = r.number("hi");
        d = box_datum(lo, hi);
        out["lo"] = lo;
        out["hi"] = hi;
    } else if (family == "bump") {
        const double c = r.number("center");
        const double h = r.number("half_width");
        d = bump_datum(c, h);
        out["center"] = c;
        out["half_width"] = h;
    } else if (family == "piecewise_constant") {
        auto b = r.numbers("breaks");
        auto v = r.numbers("values");
        d = piecewise_constant_datum(b, v);
        out["breaks"] = b;
        out["values"] = v;
    } else if (family == "custom_table") {
        auto x = r.numbers("x");
        auto v = r.numbers("values");
        d = table_datum(x, v);
        out["x"] = x;
        out["values"] = v;
    } else {
        throw ConfigurationError("config: unknown datum family '" + family + "' at '" + r.child("family") + "'");
    }
    r.finish();
    return d;
}

inline Splitting parse_splitting(const std::string& s) {
    if (s == "lie") return Splitting::lie;
    if (s == "strang") return Splitting::strang;
    throw ConfigurationError("config: solver.splitting must be 'lie' or 'strang'");
}

inline MultiplierCoupling parse_coupling(const std::string& s) {
    if (s == "implicit") return MultiplierCoupling::implicit;
    if (s == "frozen") return MultiplierCoupling::frozen;
    throw ConfigurationError("config: solver.coupling must be 'implicit' or 'frozen'");
}

} // namespace detail

/// Parses and validates a JSON config.  Unknown keys raise ConfigurationError
/// naming the key path; broken invariants raise ValidationError.
inline ParsedConfig parse_config_json(const json& root) {
    using detail::ObjectReader;
    ParsedConfig cfg;
    ObjectReader top(root, "");
    json& res = cfg.resolved;

    // problem
    {
        auto pr = top.object("problem");
        if (!pr) throw ConfigurationError("config: missing required key 'problem'");
        json flux_j, obs_j, datum_j;
        auto dom = pr->object("domain");
        if (!dom) throw ConfigurationError("config: missing required key 'problem.domain'");
        const double x_min = dom->number("x_min");
        const double x_max = dom->number("x_max");
        const auto n_cells = dom->optional_count("n_cells");
        const auto dx = dom->optional_number("dx");
        dom->finish();
        if (n_cells.has_value() == dx.has_value()) {
            throw ConfigurationError("config: give exactly one of 'problem.domain.n_cells' and 'problem.domain.dx'");
        }
        std::size_t cells = 0;
        if (n_cells) {
            cells = *n_cells;
        } else {
            if (!(*dx > 0.0)) throw ValidationError("config: problem.domain.dx must be > 0");
            const double q = (x_max - x_min) / *dx;
            cells = static_cast<std::size_t>(std::llround(q));
            if (std::abs(q - static_cast<double>(cells)) > 1e-6 * q) {
                throw ValidationError("config: domain length is not a whole number of dx");
            }
        }
        cfg.problem.x_min = x_min;
        cfg.problem.x_max = x_max;
        cfg.problem.n_cells = cells;
        (void)cfg.problem.grid();   // Grid1D invariants

        auto fl = pr->object("flux");
        if (!fl) throw ConfigurationError("config: missing required key 'problem.flux'");
        cfg.problem.flux = detail::parse_flux(*fl, flux_j);
        auto ob = pr->object("obstacle");
        if (!ob) throw ConfigurationError("config: missing required key 'problem.obstacle'");
        cfg.problem.obstacle = detail::parse_obstacle(*ob, obs_j);
        auto da = pr->object("datum");
        if (!da) throw ConfigurationError("config: missing required key 'problem.datum'");
        cfg.problem.datum = detail::parse_datum(*da, datum_j);
        pr->finish();
        res["problem"] = {{"domain", {{"x_min", x_min}, {"x_max", x_max}, {"n_cells", cells}}},
                          {"flux", flux_j},
                          {"obstacle", obs_j},
                          {"datum", datum_j}};
    }

    // solver
    double eps_coupling = 1.0;
    {
        auto so = top.object("solver");
        json empty = json::object();
        ObjectReader r = so ? *so : ObjectReader(empty, "solver");
        SolverConfig& s = cfg.solver;
        s.n = r.number("n", 1.0);
        eps_coupling = r.number("eps_coupling", 1.0);
        const auto eps = r.optional_number("eps");
        s.eps = eps ? *eps : eps_coupling / s.n;
        s.cfl = r.number("cfl", 0.5);
        s.T = r.number("T", 1.0);
        s.splitting = detail::parse_splitting(r.text("splitting", "lie"));
        s.coupling = detail::parse_coupling(r.text("coupling", "implicit"));
        s.reaction_dt_cap = r.number("reaction_dt_cap", 0.5);
        s.boundary_leak_tol = r.number("boundary_leak_tol", 1e-6);
        cfg.snapshots = r.count("snapshots", 40);
        cfg.w11_stride = r.count("w11_stride", 1);
        r.finish();
        s.validate();
        if (cfg.snapshots == 0) throw ValidationError("config: solver.snapshots must be >= 1");
        if (cfg.w11_stride == 0) throw ValidationError("config: solver.w11_stride must be >= 1");
        res["solver"] = {{"n", s.n},
                         {"eps", s.eps},
                         {"eps_coupling", eps_coupling},
                         {"cfl", s.cfl},
                         {"T", s.T},
                         {"splitting", to_string(s.splitting)},
                         {"coupling", to_string(s.coupling)},
                         {"reaction_dt_cap", s.reaction_dt_cap},
                         {"boundary_leak_tol", s.boundary_leak_tol},
                         {"snapshots", cfg.snapshots},
                         {"w11_stride", cfg.w11_stride}};
    }
    cfg.problem.validate(cfg.solver.T);

    // entropy
    if (auto en = top.object("entropy")) {
        const auto window = en->numbers("window");
        if (window.size() != 2) throw ConfigurationError("config: entropy.window must be [x_lo, x_hi]");
        const double tol = en->number("tolerance", 1e-2);
        en->finish();
        EntropyTestConfig ec = default_entropy_config(cfg.solver.T, window[0], window[1]);
        ec.tolerance = tol;
        ec.validate();
        const Grid1D g = cfg.problem.grid();
        for (const auto& b : ec.bumps) validate_bump(b, g, cfg.solver.T);
        cfg.entropy = ec;
        res["entropy"] = {{"window", window}, {"tolerance", tol}};
    }

    // sweep
    if (auto sw = top.object("sweep")) {
        const auto ns = sw->numbers("n");
        const double c = sw->number("eps_coupling", eps_coupling);
        const std::size_t levels = sw->count("grid_levels", 1);
        sw->finish();
        if (levels == 0) throw ValidationError("config: sweep.grid_levels must be >= 1");
        SweepConfig sc;
        sc.points = coupled_ladder(ns, c);
        for (std::size_t l = 0; l < levels; ++l) sc.grid_levels.push_back(cfg.problem.n_cells << l);
        sc.problem = cfg.problem;
        sc.solver = cfg.solver;
        sc.output_times = cfg.output_times();
        sc.entropy = cfg.entropy;
        sc.w11_stride = cfg.w11_stride;
        sc.validate();
        cfg.sweep = sc;
        res["sweep"] = {{"n", ns}, {"eps_coupling", c}, {"grid_levels", levels}};
    }

    // compat
    {
        auto co = top.object("compat");
        json empty = json::object();
        ObjectReader r = co ? *co : ObjectReader(empty, "compat");
        cfg.compat.gamma = r.optional_number("gamma");
        cfg.compat.zeta = r.optional_number("zeta");
        cfg.compat.T = r.optional_number("T");
        cfg.compat.options.margin = r.number("margin", 0.05);
        cfg.compat.options.output_count = r.count("output_count", 50);
        r.finish();
        const double lower = cfg.problem.obstacle.lower;
        if (cfg.compat.gamma && !(*cfg.compat.gamma > 0.0 && *cfg.compat.gamma < lower)) {
            throw ValidationError("config: compat.gamma requires 0 < gamma < theta_lower");
        }
        if (cfg.compat.zeta && !(*cfg.compat.zeta > 0.0)) throw ValidationError("config: compat.zeta must be > 0");
        if (!(cfg.compat.options.margin >= 0.0)) throw ValidationError("config: compat.margin must be >= 0");
        if (cfg.compat.options.output_count == 0) throw ValidationError("config: compat.output_count must be >= 1");
        json cj = {{"margin", cfg.compat.options.margin}, {"output_count", cfg.compat.options.output_count}};
        // null keeps the data-dependent defaults (theta_lower / 2 and 1e-8 ||v0||_inf)
        cj["gamma"] = cfg.compat.gamma ? json(*cfg.compat.gamma) : json(nullptr);
        cj["zeta"] = cfg.compat.zeta ? json(*cfg.compat.zeta) : json(nullptr);
        cj["T"] = cfg.compat.T ? json(*cfg.compat.T) : json(cfg.solver.T);
        res["compat"] = cj;
    }

    // picard
    {
        auto pc = top.object("picard");
        json empty = json::object();
        ObjectReader r = pc ? *pc : ObjectReader(empty, "picard");
        auto& p = cfg.picard;
        p.options.R = r.number("R", 2.0);
        p.options.target_factor = r.number("target_factor", 0.5);
        p.options.iterations = r.count("iterations", 5);
        p.seed_scale = r.number("seed_scale", 2.0);
        p.snapshots = r.count("snapshots", 10);
        r.finish();
        if (!(p.options.R > 0.0) || !(p.options.target_factor > 0.0 && p.options.target_factor < 1.0)) {
            throw ValidationError("config: picard requires R > 0 and 0 < target_factor < 1");
        }
        if (p.snapshots < 1 || p.options.iterations < 1) {
            throw ValidationError("config: picard.snapshots and picard.iterations must be >= 1");
        }
        res["picard"] = {{"R", p.options.R}, {"target_factor", p.options.target_factor},
                         {"iterations", p.options.iterations}, {"seed_scale", p.seed_scale},
                         {"snapshots", p.snapshots}};
    }

    // checks
    {
        auto ch = top.object("checks");
        json empty = json::object();
        ObjectReader r = ch ? *ch : ObjectReader(empty, "checks");
        auto& c = cfg.checks;
        c.mass_tolerance = r.number("mass_tolerance", c.mass_tolerance);
        c.multiplier_tau_factor = r.number("multiplier_tau_factor", c.multiplier_tau_factor);
        c.multiplier_zeta = r.number("multiplier_zeta", c.multiplier_zeta);
        c.multiplier_gap_limit = r.number("multiplier_gap_limit", c.multiplier_gap_limit);
        c.linf_tolerance = r.number("linf_tolerance", c.linf_tolerance);
        c.comparison_tv_factor = r.number("comparison_tv_factor", c.comparison_tv_factor);
        c.c_theta_times = r.count("c_theta_times", c.c_theta_times);
        r.finish();
        if (!(c.multiplier_tau_factor > 0.0) || !(c.multiplier_zeta > 0.0) || c.c_theta_times == 0) {
            throw ValidationError("config: checks.multiplier_tau_factor, multiplier_zeta, c_theta_times must be > 0");
        }
        res["checks"] = {{"mass_tolerance", c.mass_tolerance},
                         {"multiplier_tau_factor", c.multiplier_tau_factor},
                         {"multiplier_zeta", c.multiplier_zeta},
                         {"multiplier_gap_limit", c.multiplier_gap_limit},
                         {"linf_tolerance", c.linf_tolerance},
                         {"comparison_tv_factor", c.comparison_tv_factor},
                         {"c_theta_times", c.c_theta_times}};
    }

    top.finish();
    return cfg;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("config: cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigurationError("config: '" + path + "' is not valid JSON: " + e.what());
    }
}

inline ParsedConfig parse_config(const std::string& path) { return parse_config_json(read_json_file(path)); }

} // namespace ocl
