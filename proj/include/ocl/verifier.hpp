#pragma once

#include "ocl/errors.hpp"
#include "ocl/mesh_field.hpp"
#include "ocl/model.hpp"
#include "ocl/parallel.hpp"
#include "ocl/penalized_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace ocl {

inline double sign0(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

struct EntropyPair {
    double eta;
    double q;
};

/// (|u - v|, sgn(u - v) (f(u) - f(v))) with sgn(0) = 0.
inline EntropyPair kruzkov_pair(double u, double v, const FluxSpec& f) {
    require_finite(u, "kruzkov_pair");
    require_finite(v, "kruzkov_pair");
    return {std::abs(u - v), sign0(u - v) * (f.f(u) - f.f(v))};
}

// ---------------------------------------------------------------------------
// Test functions
// ---------------------------------------------------------------------------

/// exp(1 - 1/(1 - s^2)) on |s| < 1, zero outside; peak value 1 at s = 0.
inline double mollifier(double s) noexcept {
    if (!(std::abs(s) < 1.0)) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

inline double mollifier_prime(double s) noexcept {
    if (!(std::abs(s) < 1.0)) return 0.0;
    const double d = 1.0 - s * s;
    return mollifier(s) * (-2.0 * s / (d * d));
}

/// phi(t, x) = psi((t - tc)/rt) psi((x - xc)/rx).
struct TestBump {
    double t_center = 0.0;
    double x_center = 0.0;
    double t_radius = 1.0;
    double x_radius = 1.0;

    [[nodiscard]] double value(double t, double x) const noexcept {
        return mollifier((t - t_center) / t_radius) * mollifier((x - x_center) / x_radius);
    }
    [[nodiscard]] double dt(double t, double x) const noexcept {
        return mollifier_prime((t - t_center) / t_radius) / t_radius *
               mollifier((x - x_center) / x_radius);
    }
    [[nodiscard]] double dx(double t, double x) const noexcept {
        return mollifier((t - t_center) / t_radius) * mollifier_prime((x - x_center) / x_radius) /
               x_radius;
    }
};

inline void validate_bump(const TestBump& b, const Grid1D& grid, double T) {
    if (!(b.t_radius > 0.0) || !(b.x_radius > 0.0)) {
        throw InvalidArgument("test function: radii must be positive");
    }
    if (b.x_center - b.x_radius < grid.x_min() || b.x_center + b.x_radius > grid.x_max()) {
        throw InvalidArgument("test function: spatial support leaves the domain");
    }
    if (b.t_center + b.t_radius > T * (1.0 + 1e-12)) {
        throw InvalidArgument("test function: temporal support reaches past T");
    }
}

struct EntropyTestConfig {
    std::string family_version = "tensor-mollifier-3x5x2/v2";
    std::vector<double> k_samples;
    std::vector<TestBump> bumps;
    double tolerance = 1e-2;

    void validate() const {
        if (k_samples.empty() || bumps.empty()) {
            throw ConfigurationError("entropy: need at least one k and one test function");
        }
        for (double k : k_samples) {
            if (!(k >= 0.0 && k <= 1.0)) throw ConfigurationError("entropy: k must lie in [0, 1]");
        }
        if (!(tolerance >= 0.0)) throw ConfigurationError("entropy: tolerance must be >= 0");
    }
};

/// 21 k values on [0, 1] and 30 bumps: temporal centers {0, T/4, T/2} with
/// radii {T/4, T/2}, five spatial centers spread over [x_lo, x_hi] with radii
/// {s/2, s} where s is the centre spacing.  The window must sit far enough
/// inside the domain for the widest bumps.  Temporal centers and radii land on
/// snapshot times whenever the snapshot count is a multiple of 4.
inline EntropyTestConfig default_entropy_config(double T, double x_lo, double x_hi) {
    if (!(T > 0.0) || !(x_hi > x_lo)) throw InvalidArgument("default_entropy_config: bad window");
    EntropyTestConfig cfg;
    for (int j = 0; j <= 20; ++j) cfg.k_samples.push_back(j / 20.0);
    const double s = (x_hi - x_lo) / 4.0;
    for (int r = 1; r <= 2; ++r) {
        for (int it = 0; it < 3; ++it) {
            for (int ix = 0; ix < 5; ++ix) {
                TestBump b;
                b.t_center = T * it / 4.0;
                b.t_radius = T * r / 4.0;
                b.x_center = x_lo + s * ix;
                b.x_radius = 0.5 * s * r;
                cfg.bumps.push_back(b);
            }
        }
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Entropy inequalities
// ---------------------------------------------------------------------------

/// theta, theta_t, theta_x at every snapshot time, sampled once and shared by
/// all (k, phi) pairs.
struct ObstacleSamples {
    std::vector<std::vector<double>> value;
    std::vector<std::vector<double>> dt;
    std::vector<std::vector<double>> dx;
    std::vector<double> theta0;
};

inline ObstacleSamples sample_obstacle(const ObstacleSpec& theta, const Grid1D& g,
                                       const std::vector<double>& times) {
    ObstacleSamples s;
    const std::size_t N = g.n_cells();
    for (double t : times) {
        std::vector<double> v(N), a(N), b(N);
        for (std::size_t i = 0; i < N; ++i) {
            const double x = g.center(i);
            v[i] = theta.value(t, x);
            a[i] = theta.dt(t, x);
            b[i] = theta.dx(t, x);
        }
        s.value.push_back(std::move(v));
        s.dt.push_back(std::move(a));
        s.dx.push_back(std::move(b));
    }
    s.theta0.resize(N);
    for (std::size_t i = 0; i < N; ++i) s.theta0[i] = theta.value(0.0, g.center(i));
    return s;
}

namespace detail {

inline std::pair<std::size_t, std::size_t> cell_range(const Grid1D& g, double lo, double hi) {
    const double fl = std::floor((lo - g.x_min()) / g.dx());
    const double fh = std::ceil((hi - g.x_min()) / g.dx());
    const auto a = static_cast<std::size_t>(std::max(0.0, fl));
    const auto b = static_cast<std::size_t>(std::clamp(fh, 0.0, static_cast<double>(g.n_cells())));
    return {a, b};
}

inline double entropy_residual_sampled(const Trajectory& traj, const ObstacleSamples& th,
                                       const FluxSpec& f, const std::vector<double>& lambda, double k,
                                       const TestBump& phi, const Field& u0) {
    const Grid1D& g = u0.grid();
    const double dx = g.dx();
    const auto [i0, i1] = cell_range(g, phi.x_center - phi.x_radius, phi.x_center + phi.x_radius);

    std::vector<double> G(traj.snapshots.size(), 0.0);
    for (std::size_t j = 0; j < traj.snapshots.size(); ++j) {
        const double t = traj.snapshots[j].t;
        if (std::abs(t - phi.t_center) >= phi.t_radius) continue;
        const Field& u = traj.snapshots[j].u;
        CompensatedSum acc;
        for (std::size_t i = i0; i < i1; ++i) {
            const double x = g.center(i);
            const double p = phi.value(t, x);
            const double pt = phi.dt(t, x);
            const double px = phi.dx(t, x);
            if (p == 0.0 && pt == 0.0 && px == 0.0) continue;
            const double kth = k * th.value[j][i];
            const double s = sign0(u[i] - kth);
            const double H = k * th.dt[j][i] + f.df(kth) * k * th.dx[j][i];
            acc.add(std::abs(u[i] - kth) * pt + s * (f.f(u[i]) - f.f(kth)) * px +
                    (lambda[j] * u[i] - H) * s * p);
        }
        G[j] = acc.value() * dx;
    }
    CompensatedSum total;
    for (std::size_t j = 0; j + 1 < G.size(); ++j) {
        total.add(0.5 * (traj.snapshots[j + 1].t - traj.snapshots[j].t) * (G[j] + G[j + 1]));
    }
    CompensatedSum init;
    for (std::size_t i = i0; i < i1; ++i) {
        init.add(std::abs(u0[i] - k * th.theta0[i]) * phi.value(0.0, g.center(i)));
    }
    total.add(init.value() * dx);
    return total.value();
}

inline std::vector<double> lambda_at_snapshots(const Trajectory& traj, const TimeSeries& lambda) {
    std::vector<double> out;
    out.reserve(traj.snapshots.size());
    for (const auto& s : traj.snapshots) out.push_back(lambda.empty() ? 0.0 : lambda.at(s.t));
    return out;
}

inline void require_snapshots(const Trajectory& traj, const char* what) {
    if (traj.snapshots.empty()) throw SamplingError(std::string(what) + ": trajectory has no snapshots");
}

} // namespace detail

/// Quadrature of the entropy inequality for one (k, phi): midpoint in space,
/// trapezoid in time over the snapshot times.  Nonnegative in the continuum.
inline double entropy_residual(const Trajectory& traj, const ObstacleSpec& theta, const FluxSpec& f,
                               const TimeSeries& lambda_series, double k, const TestBump& phi,
                               const Field& u0) {
    detail::require_snapshots(traj, "entropy_residual");
    const double T = traj.snapshots.back().t;
    validate_bump(phi, u0.grid(), T);
    const auto th = sample_obstacle(theta, u0.grid(), traj.snapshot_times());
    return detail::entropy_residual_sampled(traj, th, f, detail::lambda_at_snapshots(traj, lambda_series),
                                            k, phi, u0);
}

struct EntropyReport {
    std::string family_version;
    std::vector<double> k_samples;
    std::size_t n_bumps = 0;
    std::vector<double> residuals;   // index ik * n_bumps + ib
    double min_residual = 0.0;
    double min_k = 0.0;
    std::size_t min_bump = 0;
    double tolerance = 0.0;
    bool pass = false;

    [[nodiscard]] double at(std::size_t ik, std::size_t ib) const { return residuals[ik * n_bumps + ib]; }
};

inline EntropyReport entropy_check(const Trajectory& traj, const ObstacleSpec& theta, const FluxSpec& f,
                                   const Field& u0, const EntropyTestConfig& cfg,
                                   std::size_t threads = 1) {
    cfg.validate();
    detail::require_snapshots(traj, "entropy_check");
    const double T = traj.snapshots.back().t;
    for (const auto& b : cfg.bumps) validate_bump(b, u0.grid(), T);
    const auto th = sample_obstacle(theta, u0.grid(), traj.snapshot_times());
    const auto lam = detail::lambda_at_snapshots(traj, traj.lambda_series);

    EntropyReport rep;
    rep.family_version = cfg.family_version;
    rep.k_samples = cfg.k_samples;
    rep.n_bumps = cfg.bumps.size();
    rep.tolerance = cfg.tolerance;
    rep.residuals.assign(cfg.k_samples.size() * cfg.bumps.size(), 0.0);
    parallel_for(rep.residuals.size(), threads, [&](std::size_t idx) {
        const std::size_t ik = idx / rep.n_bumps;
        const std::size_t ib = idx % rep.n_bumps;
        rep.residuals[idx] =
            detail::entropy_residual_sampled(traj, th, f, lam, cfg.k_samples[ik], cfg.bumps[ib], u0);
    });
    rep.min_residual = std::numeric_limits<double>::infinity();
    for (std::size_t idx = 0; idx < rep.residuals.size(); ++idx) {
        if (rep.residuals[idx] < rep.min_residual) {
            rep.min_residual = rep.residuals[idx];
            rep.min_k = cfg.k_samples[idx / rep.n_bumps];
            rep.min_bump = idx % rep.n_bumps;
        }
    }
    rep.pass = rep.min_residual >= -cfg.tolerance;
    return rep;
}

// ---------------------------------------------------------------------------
// Scalar checks
// ---------------------------------------------------------------------------

/// max_t |int u - 1| over the snapshots and every recorded step.
inline double check_mass(const Trajectory& traj) {
    double dev = 0.0;
    for (const auto& s : traj.snapshots) dev = std::max(dev, std::abs(integrate(s.u) - 1.0));
    for (double m : traj.mass_series.values()) dev = std::max(dev, std::abs(m - 1.0));
    return dev;
}

/// max_t int (u - theta)^+ over the snapshots and every recorded step.
inline double obstacle_violation(const Trajectory& traj, const ObstacleSpec& theta) {
    double v = 0.0;
    for (const auto& s : traj.snapshots) {
        v = std::max(v, excess_mass(s.u, theta.sample(s.u.grid(), s.t)));
    }
    if (!traj.phi_series.empty()) v = std::max(v, traj.phi_series.max_value());
    return v;
}

/// inf_t int_{u < theta} u over the snapshots and every recorded step.
inline double alpha_estimate(const Trajectory& traj, const ObstacleSpec& theta) {
    detail::require_snapshots(traj, "alpha_estimate");
    double a = std::numeric_limits<double>::infinity();
    for (const auto& s : traj.snapshots) a = std::min(a, mass_below(s.u, theta.sample(s.u.grid(), s.t)));
    if (!traj.alpha_series.empty()) a = std::min(a, traj.alpha_series.min_value());
    return a;
}

/// max over snapshots of alpha(t) + phi(t) - int u(t); never positive for
/// nonnegative u.
inline double mass_partition_excess(const Trajectory& traj, const ObstacleSpec& theta) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& s : traj.snapshots) {
        const Field th = theta.sample(s.u.grid(), s.t);
        worst = std::max(worst, mass_below(s.u, th) + excess_mass(s.u, th) - integrate(s.u));
    }
    return worst;
}

struct LinfReport {
    double margin = 0.0;            // min_t (bound(t) - ||u(t)||_inf)
    std::size_t violations = 0;
    double C_theta = 0.0;
    double alpha_hat = 0.0;
    bool pass = false;
};

/// ||u(t)||_inf <= ||u0||_inf exp(t C_theta / alpha_hat) at every snapshot.
inline LinfReport linf_bound_check(const Trajectory& traj, const Field& u0, double C_theta,
                                   double alpha_hat, double tolerance = 1e-12) {
    if (!(alpha_hat > 0.0)) throw InvalidArgument("linf_bound_check: require alpha_hat > 0");
    if (!(C_theta >= 0.0)) throw InvalidArgument("linf_bound_check: require C_theta >= 0");
    detail::require_snapshots(traj, "linf_bound_check");
    LinfReport rep;
    rep.C_theta = C_theta;
    rep.alpha_hat = alpha_hat;
    const double u0_inf = l_inf_norm(u0);
    rep.margin = std::numeric_limits<double>::infinity();
    for (const auto& s : traj.snapshots) {
        const double bound = u0_inf * std::exp(s.t * C_theta / alpha_hat);
        const double m = bound - l_inf_norm(s.u);
        rep.margin = std::min(rep.margin, m);
        if (m < -tolerance * u0_inf) ++rep.violations;
    }
    rep.pass = rep.violations == 0;
    return rep;
}

/// sup over an (n_times + 1)-point lattice of [0, T] of
/// int H(theta)^- + |theta_xx| dx (midpoint rule on the grid).
inline double c_theta_estimate(const ObstacleSpec& theta, const FluxSpec& f, const Grid1D& grid, double T,
                               std::size_t n_times = 64) {
    if (!(T > 0.0) || n_times == 0) throw InvalidArgument("c_theta_estimate: require T > 0, n_times > 0");
    double best = 0.0;
    for (std::size_t j = 0; j <= n_times; ++j) {
        const double t = T * static_cast<double>(j) / static_cast<double>(n_times);
        CompensatedSum acc;
        for (std::size_t i = 0; i < grid.n_cells(); ++i) {
            const double x = grid.center(i);
            acc.add(negative_part(obstacle_operator(theta, f, t, x)) + std::abs(theta.dxx(t, x)));
        }
        best = std::max(best, acc.value() * grid.dx());
    }
    return best;
}

/// lambda_hat(t) = int H(theta)^- over the discrete coincidence set
/// {|u - theta| <= tau}, at every snapshot.
inline TimeSeries reconstruct_multiplier(const Trajectory& traj, const ObstacleSpec& theta,
                                         const FluxSpec& f, double tau) {
    if (!(tau > 0.0)) throw InvalidArgument("reconstruct_multiplier: require tau > 0");
    TimeSeries out;
    for (const auto& s : traj.snapshots) {
        const Grid1D& g = s.u.grid();
        CompensatedSum acc;
        for (std::size_t i = 0; i < g.n_cells(); ++i) {
            const double x = g.center(i);
            const double th = theta.value(s.t, x);
            if (std::abs(s.u[i] - th) <= tau) acc.add(negative_part(obstacle_operator(theta, f, s.t, x)));
        }
        out.push_back(s.t, acc.value() * g.dx());
    }
    return out;
}

struct MultiplierGap {
    double mean_relative_gap = 0.0;
    double max_relative_gap = 0.0;
    std::size_t samples = 0;
};

/// Mean over snapshots with t > 0 of |lambda_hat - lambda| / max(lambda, zeta).
inline MultiplierGap multiplier_consistency(const TimeSeries& lambda, const TimeSeries& reconstructed,
                                            double zeta) {
    if (!(zeta > 0.0)) throw InvalidArgument("multiplier_consistency: require zeta > 0");
    MultiplierGap gap;
    CompensatedSum acc;
    for (std::size_t j = 0; j < reconstructed.size(); ++j) {
        const double t = reconstructed.times()[j];
        if (t <= 0.0) continue;
        const double l = lambda.at(t);
        const double r = std::abs(reconstructed.values()[j] - l) / std::max(l, zeta);
        acc.add(r);
        gap.max_relative_gap = std::max(gap.max_relative_gap, r);
        ++gap.samples;
    }
    if (gap.samples == 0) throw SamplingError("multiplier_consistency: no snapshot after t = 0");
    gap.mean_relative_gap = acc.value() / static_cast<double>(gap.samples);
    return gap;
}

struct W11Series {
    TimeSeries tv;      // TV(u(t)) at every snapshot
    TimeSeries dt_l1;   // ||u(t_j) - u(t_{j-1})||_1 / (t_j - t_{j-1}), stamped at t_j
};

inline W11Series w11_diagnostics(const Trajectory& traj) {
    W11Series out;
    for (std::size_t j = 0; j < traj.snapshots.size(); ++j) {
        const auto& s = traj.snapshots[j];
        out.tv.push_back(s.t, total_variation(s.u));
        if (j > 0) {
            const auto& p = traj.snapshots[j - 1];
            out.dt_l1.push_back(s.t, l1_distance(s.u, p.u) / (s.t - p.t));
        }
    }
    return out;
}

/// L1 distance between the earliest snapshot and the datum.
inline double ic_recovery_check(const Trajectory& traj, const Field& u0) {
    detail::require_snapshots(traj, "ic_recovery_check");
    return l1_distance(traj.snapshots.front().u, u0);
}

} // namespace ocl
