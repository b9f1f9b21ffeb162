#pragma once

#include "ocl/compatibility.hpp"
#include "ocl/config.hpp"
#include "ocl/convergence.hpp"
#include "ocl/io.hpp"
#include "ocl/penalized_solver.hpp"
#include "ocl/verifier.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <string>
#include <vector>

namespace ocl::cli {

enum ExitCode : int { pass = 0, execution_error = 1, check_failure = 2 };

struct CommonOptions {
    std::string config;
    std::string out;
    std::size_t threads = 1;
    bool seedless = false;
};

inline fs::path resolve_out(const CommonOptions& o) {
    if (!o.out.empty()) return o.out;
    if (const char* env = std::getenv("OCL_OUT_DIR"); env != nullptr && *env != '\0') return env;
    return "ocl_out";
}

inline json base_manifest(const std::string& command, const ParsedConfig& cfg, const CommonOptions& o) {
    json m;
    m["tool"] = kVersion;
    m["command"] = command;
    m["config"] = cfg.resolved;
    m["problem_hash"] = problem_hash(cfg.resolved);
    m["threads"] = resolve_threads(o.threads);
    if (!o.seedless) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        m["wall_clock"] = buf;
    }
    m["files"] = json::array();
    return m;
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// Every scalar check for one trajectory; computed identically by `run` and
/// by `verify` from the persisted files.
inline json trajectory_checks(const ParsedConfig& cfg, const Trajectory& tr, std::size_t threads, bool& ok) {
    const ProblemSpec& p = cfg.problem;
    const Grid1D g = p.grid();
    const Field u0 = p.initial_field();
    json c;

    const double mass = check_mass(tr);
    const bool mass_ok = mass <= cfg.checks.mass_tolerance;
    c["mass"] = {{"max_deviation", mass}, {"tolerance", cfg.checks.mass_tolerance}, {"pass", mass_ok}};

    c["obstacle_violation"] = obstacle_violation(tr, p.obstacle);
    const double alpha = alpha_estimate(tr, p.obstacle);
    c["alpha_hat"] = alpha;
    const double partition = mass_partition_excess(tr, p.obstacle);
    const bool partition_ok = partition <= 1e-12;
    c["mass_partition"] = {{"max_excess", partition}, {"pass", partition_ok}};

    const double C = c_theta_estimate(p.obstacle, p.flux, g, cfg.solver.T, cfg.checks.c_theta_times);
    c["C_theta"] = C;
    bool linf_ok = false;
    if (alpha > 0.0) {
        const auto L = linf_bound_check(tr, u0, C, alpha, cfg.checks.linf_tolerance);
        linf_ok = L.pass;
        c["linf_bound"] = {{"margin", L.margin}, {"violations", L.violations}, {"pass", L.pass}};
    } else {
        c["linf_bound"] = {{"margin", nullptr}, {"violations", nullptr}, {"pass", false},
                           {"reason", "alpha_hat is not positive"}};
    }

    const double gamma = cfg.compat.gamma.value_or(0.5 * p.obstacle.lower);
    const Field v0 = construct_v0(u0, p.obstacle.lower, gamma);
    HomogeneousOptions ho;
    ho.cfl = cfg.solver.cfl;
    const Trajectory v = solve_homogeneous(v0, p.flux, cfg.solver.eps, cfg.solver.T, tr.snapshot_times(), ho);
    const auto cmp = check_comparison(tr, v, cfg.checks.comparison_tv_factor * g.dx() * total_variation(u0));
    c["comparison"] = {{"gamma", gamma}, {"max_violation", cmp.max_violation}, {"time_of_max", cmp.time_of_max},
                       {"tolerance", cmp.tol}, {"pass", cmp.pass}};

    bool entropy_ok = true;
    if (cfg.entropy) {
        const auto er = entropy_check(tr, p.obstacle, p.flux, u0, *cfg.entropy, threads);
        entropy_ok = er.pass;
        const auto& b = cfg.entropy->bumps[er.min_bump];
        c["entropy"] = {{"family_version", er.family_version},
                        {"min_residual", er.min_residual},
                        {"at_k", er.min_k},
                        {"at_test_function", {{"t_center", b.t_center}, {"x_center", b.x_center},
                                              {"t_radius", b.t_radius}, {"x_radius", b.x_radius}}},
                        {"tolerance", er.tolerance},
                        {"pass", er.pass}};
    } else {
        c["entropy"] = nullptr;
    }

    const double tau = cfg.checks.multiplier_tau_factor / cfg.solver.n;
    const auto rec = reconstruct_multiplier(tr, p.obstacle, p.flux, tau);
    const auto gap = multiplier_consistency(tr.lambda_series, rec, cfg.checks.multiplier_zeta);
    c["multiplier"] = {{"tau", tau}, {"zeta", cfg.checks.multiplier_zeta},
                       {"mean_relative_gap", gap.mean_relative_gap}, {"max_relative_gap", gap.max_relative_gap},
                       {"limit", cfg.checks.multiplier_gap_limit},
                       {"within_limit", gap.mean_relative_gap <= cfg.checks.multiplier_gap_limit}};

    const auto w = w11_diagnostics(tr);
    c["w11"] = {{"tv_max", w.tv.max_value()}, {"dt_l1_max", max_dt_l1(tr, cfg.w11_stride)},
                {"stride", cfg.w11_stride}};
    c["ic_recovery_l1"] = ic_recovery_check(tr, u0);

    ok = mass_ok && partition_ok && linf_ok && cmp.pass && entropy_ok;
    c["pass"] = ok;
    return c;
}

inline void write_trajectory(const fs::path& dir, const std::string& prefix, const Trajectory& tr,
                             const ObstacleSpec& theta, json& files) {
    write_tracked(dir, prefix + "snapshots.csv", snapshots_csv(tr, theta), files);
    write_tracked(dir, prefix + "diagnostics.csv", diagnostics_csv(tr), files);
}

inline json run_info(const Trajectory& tr) {
    return {{"steps", tr.steps}, {"clamp_events", tr.clamp_events},
            {"stiffness_retries", tr.stiffness_retries}, {"boundary_leak", tr.boundary_leak}};
}

inline int cmd_run(const CommonOptions& o, std::ostream& out) {
    const ParsedConfig cfg = parse_config(o.config);
    cfg.problem.require_datum_below_obstacle();
    const fs::path dir = resolve_out(o);
    const Trajectory tr = run(cfg.solver, cfg.problem.initial_field(), cfg.problem.obstacle, cfg.problem.flux,
                              cfg.output_times());
    json m = base_manifest("run", cfg, o);
    write_trajectory(dir, "", tr, cfg.problem.obstacle, m["files"]);
    bool ok = false;
    m["run"] = run_info(tr);
    m["checks"] = trajectory_checks(cfg, tr, o.threads, ok);
    write_file(dir / "manifest.json", m.dump(2) + "\n");
    out << m["checks"].dump(2) << "\n";
    return ok ? pass : check_failure;
}

inline int cmd_verify(const std::string& run_dir, std::size_t threads, std::ostream& out) {
    const fs::path dir = run_dir;
    const json m = json::parse(read_file(dir / "manifest.json"));
    verify_inventory(dir, m);
    if (m.at("command") != "run") throw ConfigurationError("verify: only `run` outputs can be verified");
    const ParsedConfig cfg = parse_config_json(m.at("config"));
    if (problem_hash(cfg.resolved) != m.at("problem_hash")) {
        throw HashMismatch("verify: problem hash differs from the manifest");
    }
    const Grid1D g = cfg.problem.grid();
    Trajectory tr;
    tr.snapshots = read_snapshots_csv(read_file(dir / "snapshots.csv"), g);
    read_diagnostics_csv(read_file(dir / "diagnostics.csv"), tr);
    bool ok = false;
    json checks = trajectory_checks(cfg, tr, threads, ok);
    json report = {{"checks", checks}, {"reproduces_manifest", m.contains("checks") && checks == m.at("checks")}};
    out << report.dump(2) << "\n";
    if (!report["reproduces_manifest"].get<bool>()) return execution_error;
    return ok ? pass : check_failure;
}

inline int cmd_sweep(const CommonOptions& o, std::ostream& out) {
    const ParsedConfig cfg = parse_config(o.config);
    if (!cfg.sweep) throw ConfigurationError("sweep: config has no 'sweep' section");
    cfg.problem.require_datum_below_obstacle();
    const fs::path dir = resolve_out(o);
    const auto records = run_sweep(*cfg.sweep, o.threads);
    const auto cauchy = cauchy_check(records);
    json m = base_manifest("sweep", cfg, o);
    json pts = json::array();
    bool all_ok = true;
    std::vector<double> ns, phis, alphas, tvs, dts;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        json pj = {{"n", r.n}, {"eps", r.eps}, {"dx", r.dx}, {"n_cells", r.n_cells}, {"ok", r.ok}};
        if (r.ok) {
            char prefix[32];
            std::snprintf(prefix, sizeof prefix, "point_%02zu_", i);
            write_trajectory(dir, prefix, *r.trajectory, cfg.problem.obstacle, m["files"]);
            pj["max_phi"] = r.max_phi;
            pj["alpha_hat"] = r.alpha_hat;
            pj["mass_dev"] = r.mass_dev;
            pj["tv_max"] = r.tv_max;
            pj["dt_l1_max"] = r.dt_l1_max;
            pj["entropy_min_residual"] = number_or_null(r.entropy_min);
            pj["run"] = run_info(*r.trajectory);
            if (r.n_cells == cfg.sweep->grid_levels.front()) {
                ns.push_back(r.n);
                phis.push_back(r.max_phi);
                alphas.push_back(r.alpha_hat);
                tvs.push_back(r.tv_max);
                dts.push_back(r.dt_l1_max);
            }
        } else {
            all_ok = false;
            pj["error"] = r.error;
        }
        pts.push_back(pj);
    }
    write_tracked(dir, "sweep_summary.csv", sweep_summary_csv(records, cauchy), m["files"]);
    json res;
    res["points"] = pts;
    res["l1_gaps"] = json::array();
    for (double gval : cauchy.gaps) res["l1_gaps"].push_back(number_or_null(gval));
    res["gaps_monotone"] = cauchy.monotone;
    res["warnings"] = cauchy.warnings;
    auto spread = [](const std::vector<double>& v) {
        return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
    };
    bool phi_positive = !phis.empty();
    for (double p : phis) phi_positive = phi_positive && p > 0.0;
    if (ns.size() >= 3 && phi_positive) res["max_phi_slope_empirical"] = rate_fit(ns, phis);
    if (!alphas.empty() && *std::min_element(alphas.begin(), alphas.end()) > 0.0) {
        res["alpha_spread"] = spread(alphas);
        res["tv_spread"] = spread(tvs);
        res["dt_l1_spread"] = spread(dts);
    }
    m["results"] = res;
    write_file(dir / "manifest.json", m.dump(2) + "\n");
    out << res.dump(2) << "\n";
    return all_ok ? pass : execution_error;
}

/// Compatibility test with the configured or default gamma, zeta and T.
inline CompatibilityReport compat_report(const ParsedConfig& cfg) {
    const Field u0 = cfg.problem.initial_field();
    const double gamma = cfg.compat.gamma.value_or(0.5 * cfg.problem.obstacle.lower);
    const Field v0 = construct_v0(u0, cfg.problem.obstacle.lower, gamma);
    const double zeta = cfg.compat.zeta.value_or(1e-8 * l_inf_norm(v0));
    const double T = cfg.compat.T.value_or(cfg.solver.T);
    return check_compatibility(u0, cfg.problem.obstacle, cfg.problem.flux, T, gamma, zeta, cfg.compat.options);
}

inline int cmd_compat(const CommonOptions& o, std::ostream& out) {
    const ParsedConfig cfg = parse_config(o.config);
    const fs::path dir = resolve_out(o);
    const auto rep = compat_report(cfg);
    json m = base_manifest("compat", cfg, o);
    std::ostringstream csv;
    csv << "t,support_integral\n";
    for (std::size_t j = 0; j < rep.support_integral.size(); ++j) {
        csv << format_real(rep.support_integral.times()[j]) << ',' << format_real(rep.support_integral.values()[j])
            << '\n';
    }
    write_tracked(dir, "compat.csv", csv.str(), m["files"]);
    json res = {{"verdict", to_string(rep.verdict)},
                {"beta_hat", rep.beta_hat},
                {"time_of_minimum", rep.time_of_minimum},
                {"gamma", rep.gamma},
                {"zeta", rep.zeta},
                {"margin", rep.margin},
                {"mass_below_at_start", rep.mass_below_at_start},
                {"no_mass_below_obstacle", rep.no_reserve}};
    m["results"] = res;
    write_file(dir / "manifest.json", m.dump(2) + "\n");
    out << "verdict " << to_string(rep.verdict) << "\nbeta_hat " << format_real(rep.beta_hat)
        << "\ntime_of_minimum " << format_real(rep.time_of_minimum) << "\n";
    return rep.verdict == Verdict::compatible ? pass : check_failure;
}

/// True when every successive ratio d[k+1]/d[k] is below one.
inline bool geometric_decrease(const std::vector<double>& d) {
    if (d.size() < 2) return false;
    for (std::size_t k = 1; k < d.size(); ++k) {
        if (!(d[k - 1] > 0.0) || !(d[k] < d[k - 1])) return false;
    }
    return true;
}

/// Contraction estimate from the seeds u0 and seed_scale * u0, held constant
/// on [0, T0].
inline PicardReport picard_report(const ParsedConfig& cfg) {
    const auto& ps = cfg.picard;
    const Field u0 = cfg.problem.initial_field();
    const double T0 = contraction_horizon(cfg.solver.n, ps.options.R, ps.options.target_factor);
    const auto times = uniform_times(T0, ps.snapshots);
    const Trajectory a = constant_trajectory(u0, times, cfg.problem.obstacle);
    const Trajectory b = constant_trajectory(ps.seed_scale * u0, times, cfg.problem.obstacle);
    return estimate_contraction(cfg.solver, cfg.problem.flux, cfg.problem.obstacle, u0, a, b, ps.options);
}

inline int cmd_picard(const CommonOptions& o, std::ostream& out) {
    const ParsedConfig cfg = parse_config(o.config);
    const fs::path dir = resolve_out(o);
    const auto rep = picard_report(cfg);
    json m = base_manifest("picard", cfg, o);
    std::ostringstream csv;
    csv << "iteration,distance\n";
    for (std::size_t k = 0; k < rep.iterate_distances.size(); ++k) {
        csv << k + 1 << ',' << format_real(rep.iterate_distances[k]) << '\n';
    }
    write_tracked(dir, "picard.csv", csv.str(), m["files"]);
    const bool geo = geometric_decrease(rep.iterate_distances);
    json res = {{"n", cfg.solver.n}, {"T0", rep.T0}, {"R", rep.R}, {"K_hat", rep.K_hat},
                {"iterate_distances", rep.iterate_distances}, {"geometric_decrease", geo},
                {"contraction", rep.success}};
    m["results"] = res;
    write_file(dir / "manifest.json", m.dump(2) + "\n");
    out << res.dump(2) << "\n";
    return rep.success && geo ? pass : check_failure;
}

/// Entry point shared by the executable and the tests.
inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Obstacle / mass-constraint conservation-law simulator"};
    app.require_subcommand(1);
    CommonOptions o;
    auto add_common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory (falls back to OCL_OUT_DIR)");
        sub->add_option("--threads", o.threads, "worker threads, 0 = one per core")->capture_default_str();
        sub->add_flag("--seedless", o.seedless, "omit nondeterministic manifest fields");
    };
    auto* run_cmd = app.add_subcommand("run", "integrate one problem and check it");
    add_common(run_cmd);
    auto* sweep_cmd = app.add_subcommand("sweep", "run the (n, eps, dx) ladder");
    add_common(sweep_cmd);
    auto* compat_cmd = app.add_subcommand("compat", "compatibility test of datum and obstacle");
    add_common(compat_cmd);
    auto* picard_cmd = app.add_subcommand("picard", "measure the fixed-point contraction");
    add_common(picard_cmd);
    auto* verify_cmd = app.add_subcommand("verify", "re-run all checks from a run directory");
    std::string run_dir;
    verify_cmd->add_option("run_dir", run_dir, "directory written by `run`")->required()->check(CLI::ExistingDirectory);
    verify_cmd->add_option("--threads", o.threads, "worker threads, 0 = one per core");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? pass : execution_error;
    }
    try {
        if (*run_cmd) return cmd_run(o, out);
        if (*sweep_cmd) return cmd_sweep(o, out);
        if (*compat_cmd) return cmd_compat(o, out);
        if (*picard_cmd) return cmd_picard(o, out);
        if (*verify_cmd) return cmd_verify(run_dir, o.threads, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return execution_error;
    }
    return execution_error;
}

} // namespace ocl::cli
