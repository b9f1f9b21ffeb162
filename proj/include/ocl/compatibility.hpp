#pragma once

#include "ocl/errors.hpp"
#include "ocl/mesh_field.hpp"
#include "ocl/model.hpp"
#include "ocl/penalized_solver.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace ocl {

enum class Verdict { compatible, incompatible, inconclusive };

inline std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::compatible: return "compatible";
    case Verdict::incompatible: return "incompatible";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "unknown";
}

struct CompatibilityReport {
    double gamma = 0.0;
    double beta_hat = 0.0;
    double zeta = 0.0;
    double margin = 0.05;
    Verdict verdict = Verdict::inconclusive;
    double time_of_minimum = 0.0;
    TimeSeries support_integral;   // S(t)
    double mass_below_at_start = 0.0;
    bool no_reserve = false;       // datum has no mass strictly below theta(0)
};

struct CompatibilityOptions {
    double margin = 0.05;
    std::size_t output_count = 50;
    double cfl = 0.5;
    double reserve_floor = 1e-12;
};

/// v0 = min(u0, gamma) with 0 < gamma < theta_lower.
inline Field construct_v0(const Field& u0, double theta_lower, double gamma) {
    if (!(gamma > 0.0) || !(gamma < theta_lower)) {
        throw InvalidArgument("construct_v0: require 0 < gamma < theta_lower (gamma=" +
                              format_real(gamma) + ", theta_lower=" + format_real(theta_lower) + ")");
    }
    Field v0(u0.grid());
    for (std::size_t i = 0; i < u0.size(); ++i) v0[i] = std::min(u0[i], gamma);
    for (std::size_t i = 0; i < u0.size(); ++i) {
        if (v0[i] > u0[i] || v0[i] > theta_lower) {
            throw InternalInvariantError("construct_v0: v0 exceeds u0 or theta_lower at cell " +
                                         std::to_string(i));
        }
    }
    return v0;
}

inline Verdict classify(double beta_hat, double margin) {
    if (beta_hat > margin) return Verdict::compatible;
    if (beta_hat < -margin) return Verdict::incompatible;
    return Verdict::inconclusive;
}

/// int_{v > zeta} theta(t, x) dx on the truncated grid.
inline double thresholded_obstacle_integral(const Field& v, const Field& theta_t, double zeta) {
    require_same_grid(v, theta_t, "thresholded_obstacle_integral");
    CompensatedSum acc;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] > zeta) acc.add(theta_t[i]);
    }
    return acc.value() * v.grid().dx();
}

/// Mass of u0 strictly below theta(0); equality is judged with a relative
/// tolerance of 1e-12 so that u0 = theta * chi_A has no reserve.
inline double strict_mass_below(const Field& u0, const Field& theta0) {
    require_same_grid(u0, theta0, "strict_mass_below");
    CompensatedSum acc;
    for (std::size_t i = 0; i < u0.size(); ++i) {
        if (u0[i] < theta0[i] * (1.0 - 1e-12)) acc.add(u0[i]);
    }
    return acc.value() * u0.grid().dx();
}

/// Sub-solution test with v0 = min(u0, gamma), evolved by the homogeneous law
/// with eps = dx.  beta_hat = min_t S(t) - 1.
inline CompatibilityReport check_compatibility(const Field& u0, const ObstacleSpec& theta,
                                               const FluxSpec& f, double T, double gamma,
                                               double zeta, const CompatibilityOptions& opt = {}) {
    if (!(zeta > 0.0)) throw InvalidArgument("check_compatibility: require zeta > 0");
    if (!(T > 0.0)) throw InvalidArgument("check_compatibility: require T > 0");
    CompatibilityReport rep;
    rep.gamma = gamma;
    rep.zeta = zeta;
    rep.margin = opt.margin;
    const Field v0 = construct_v0(u0, theta.lower, gamma);
    const Grid1D& g = u0.grid();

    HomogeneousOptions ho;
    ho.cfl = opt.cfl;
    const Trajectory v = solve_homogeneous(v0, f, g.dx(), T, uniform_times(T, opt.output_count), ho);

    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : v.snapshots) {
        const double S = thresholded_obstacle_integral(s.u, theta.sample(g, s.t), zeta);
        rep.support_integral.push_back(s.t, S);
        if (S < best) {
            best = S;
            rep.time_of_minimum = s.t;
        }
    }
    rep.beta_hat = best - 1.0;
    rep.verdict = classify(rep.beta_hat, opt.margin);

    rep.mass_below_at_start = strict_mass_below(u0, theta.sample(g, 0.0));
    if (rep.mass_below_at_start <= opt.reserve_floor) {
        rep.no_reserve = true;
        rep.verdict = Verdict::incompatible;
    }
    return rep;
}

struct ComparisonReport {
    double max_violation = 0.0;
    double time_of_max = 0.0;
    double tol = 0.0;
    bool pass = true;
};

/// max over cells and shared snapshot times of (v - u)^+.
inline ComparisonReport check_comparison(const Trajectory& u_traj, const Trajectory& v_traj, double tol) {
    if (u_traj.snapshots.size() != v_traj.snapshots.size()) {
        throw SamplingError("check_comparison: snapshot counts differ");
    }
    ComparisonReport rep;
    rep.tol = tol;
    for (std::size_t k = 0; k < u_traj.snapshots.size(); ++k) {
        const auto& a = u_traj.snapshots[k];
        const auto& b = v_traj.snapshots[k];
        if (a.t != b.t) throw SamplingError("check_comparison: snapshot times differ");
        require_same_grid(a.u, b.u, "check_comparison");
        for (std::size_t i = 0; i < a.u.size(); ++i) {
            const double d = b.u[i] - a.u[i];
            if (d > rep.max_violation) {
                rep.max_violation = d;
                rep.time_of_max = a.t;
            }
        }
    }
    rep.pass = rep.max_violation <= tol;
    return rep;
}

} // namespace ocl
