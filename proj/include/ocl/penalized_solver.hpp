#pragma once

#include "ocl/errors.hpp"
#include "ocl/mesh_field.hpp"
#include "ocl/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ocl {

enum class Splitting { lie, strang };

/// How the nonlocal factor lambda = n int (u - theta)^+ enters the reaction stage.
///  - implicit: lambda is evaluated at the end-of-stage state (scalar fixed point),
///    which makes the discrete mass identity m_new - 1 = (m_old - 1) / (1 - dt lambda).
///  - frozen: lambda is taken from the stage input u* and held fixed.
enum class MultiplierCoupling { implicit, frozen };

inline std::string to_string(Splitting s) { return s == Splitting::lie ? "lie" : "strang"; }
inline std::string to_string(MultiplierCoupling c) {
    return c == MultiplierCoupling::implicit ? "implicit" : "frozen";
}

struct SolverConfig {
    double n = 1.0;                 // penalisation strength
    double eps = 0.0;               // viscosity
    double cfl = 0.5;
    double T = 1.0;
    Splitting splitting = Splitting::lie;
    double reaction_dt_cap = 0.5;   // dt * max(lambda_last, n) <= cap
    double boundary_leak_tol = 1e-6;
    MultiplierCoupling coupling = MultiplierCoupling::implicit;

    void validate() const {
        if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("solver: require n > 0");
        validate_numerics();
    }

    /// Everything except the penalisation strength (n = 0 is the homogeneous law).
    void validate_numerics() const {
        if (!(n >= 0.0) || !std::isfinite(n)) throw ValidationError("solver: require n >= 0");
        if (!(eps >= 0.0) || !std::isfinite(eps)) throw ValidationError("solver: require eps >= 0");
        if (!(cfl > 0.0 && cfl <= 1.0)) throw ValidationError("solver: require 0 < cfl <= 1");
        if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("solver: require T > 0");
        if (!(reaction_dt_cap > 0.0 && reaction_dt_cap < 1.0)) {
            throw ValidationError("solver: require 0 < reaction_dt_cap < 1");
        }
        if (!(boundary_leak_tol >= 0.0)) {
            throw ValidationError("solver: require boundary_leak_tol >= 0");
        }
    }
};

struct SolverState {
    double t = 0.0;
    Field u;
    double lambda_last = 0.0;
    std::size_t step_index = 0;
};

struct Snapshot {
    double t;
    Field u;
};

struct Trajectory {
    std::vector<Snapshot> snapshots;
    TimeSeries lambda_series;
    TimeSeries mass_series;
    TimeSeries phi_series;    // int (u - theta)^+
    TimeSeries tv_series;
    TimeSeries linf_series;
    TimeSeries alpha_series;  // int_{u < theta} u
    double boundary_leak = 0.0;
    std::size_t steps = 0;
    std::size_t clamp_events = 0;
    std::size_t stiffness_retries = 0;

    [[nodiscard]] std::vector<double> snapshot_times() const {
        std::vector<double> t;
        t.reserve(snapshots.size());
        for (const auto& s : snapshots) t.push_back(s.t);
        return t;
    }
    [[nodiscard]] const Grid1D& grid() const {
        if (snapshots.empty()) throw SamplingError("trajectory has no snapshots");
        return snapshots.front().u.grid();
    }
};

// ---------------------------------------------------------------------------
// Elementary pieces
// ---------------------------------------------------------------------------

/// Local Lax-Friedrichs (Rusanov) flux.
inline double numerical_flux(const FluxSpec& f, double u_left, double u_right) {
    require_finite(u_left, "numerical_flux");
    require_finite(u_right, "numerical_flux");
    const double a = f.max_speed(std::min(u_left, u_right), std::max(u_left, u_right));
    return 0.5 * (f.f(u_left) + f.f(u_right)) - 0.5 * a * (u_right - u_left);
}

/// lambda = n * int (u - theta)^+ dx.
inline double compute_lambda(const Field& u, const Field& theta_t, double n) {
    return n * excess_mass(u, theta_t);
}

/// int_{u_i < theta_i} u dx (strict comparison).
inline double mass_below(const Field& u, const Field& theta_t) {
    require_same_grid(u, theta_t, "mass_below");
    CompensatedSum acc;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] < theta_t[i]) acc.add(u[i]);
    }
    return acc.value() * u.grid().dx();
}

/// Explicit-stage step bound cfl / (M/dx + 2 eps/dx^2), further capped so that
/// dt * max(lambda_last, n) <= reaction_dt_cap.
inline double stable_dt(const SolverState& state, const SolverConfig& cfg, const FluxSpec& f) {
    const double dx = state.u.grid().dx();
    if (!(dx > 0.0) || !std::isfinite(dx)) throw ConfigurationError("stable_dt: degenerate grid");
    const double M = lipschitz_bounds(f).M;
    const double rate = M / dx + 2.0 * cfg.eps / (dx * dx);
    double dt = rate > 0.0 ? cfg.cfl / rate : std::numeric_limits<double>::infinity();
    const double reaction = std::max(state.lambda_last, cfg.n);
    if (reaction > 0.0) dt = std::min(dt, cfg.reaction_dt_cap / reaction);
    if (!(dt > 0.0)) throw ConfigurationError("stable_dt: non-positive step");
    return dt;
}

namespace detail {

struct StageAResult {
    Field u;
    double outflow;  // mass that left through the two boundary faces
};

/// Transport + diffusion with zero ghost cells.
inline StageAResult transport_diffusion(const Field& u, const FluxSpec& f, double eps, double dt) {
    const std::size_t N = u.size();
    const double dx = u.grid().dx();
    const double mu = dt / dx;
    const double nu = eps * dt / (dx * dx);
    std::vector<double> face(N + 1);
    for (std::size_t k = 0; k <= N; ++k) {
        const double ul = k == 0 ? 0.0 : u[k - 1];
        const double ur = k == N ? 0.0 : u[k];
        face[k] = numerical_flux(f, ul, ur);
    }
    Field out(u.grid());
    for (std::size_t i = 0; i < N; ++i) {
        const double left = i == 0 ? 0.0 : u[i - 1];
        const double right = i + 1 == N ? 0.0 : u[i + 1];
        out[i] = u[i] - mu * (face[i + 1] - face[i]) + nu * (right - 2.0 * u[i] + left);
    }
    const double out_left = dt * (-face[0]) + eps * dt / dx * u[0];
    const double out_right = dt * face[N] + eps * dt / dx * u[N - 1];
    return {std::move(out), out_left + out_right};
}

/// Solves u = u* + dt (lambda u - n (u - theta)^+) for one cell.  The left side
/// minus the right is strictly increasing in u when dt*lambda < 1, so exactly one
/// of the two linear branches is consistent; equality goes to the lower branch.
inline double solve_reaction_cell(double u_star, double theta, double n, double dt, double lambda) {
    const double below = u_star / (1.0 - dt * lambda);
    if (below <= theta) return below;
    const double above = (u_star + n * dt * theta) / (1.0 - dt * lambda + n * dt);
    if (above < theta * (1.0 - 1e-12)) {
        throw InternalInvariantError("reaction solve: neither branch consistent");
    }
    return above;
}

/// G(lambda) = n dx sum (u_i(lambda) - theta_i)^+ and its derivative.
inline double multiplier_map(const Field& u_star, const Field& theta, double n, double dt,
                             double lambda, double& derivative) {
    CompensatedSum g;
    CompensatedSum dg;
    for (std::size_t i = 0; i < u_star.size(); ++i) {
        const double below = u_star[i] / (1.0 - dt * lambda);
        if (below <= theta[i]) continue;
        const double denom = 1.0 - dt * lambda + n * dt;
        const double above = (u_star[i] + n * dt * theta[i]) / denom;
        g.add(above - theta[i]);
        dg.add(dt * above / denom);
    }
    const double dx = u_star.grid().dx();
    derivative = n * dx * dg.value();
    return n * dx * g.value();
}

/// Smallest fixed point lambda = G(lambda) on [0, 1/dt).  G is convex and
/// nondecreasing, so Newton from 0 increases monotonically to it.
inline double implicit_multiplier(const Field& u_star, const Field& theta, double n, double dt) {
    double dG = 0.0;
    double lambda = 0.0;
    double g = multiplier_map(u_star, theta, n, dt, lambda, dG);
    if (g == 0.0) return 0.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double h = g - lambda;
        if (h <= 1e-15 * std::max(1.0, lambda)) return lambda;
        const double slope = dG - 1.0;
        if (slope >= 0.0) {
            throw StiffnessError("reaction stage: no multiplier fixed point below 1/dt");
        }
        const double next = lambda - h / slope;
        if (!(next * dt < 1.0)) throw StiffnessError("reaction stage: dt * lambda >= 1");
        if (next <= lambda) return lambda;
        lambda = next;
        g = multiplier_map(u_star, theta, n, dt, lambda, dG);
    }
    return lambda;
}

/// Reaction stage on a field; returns the lambda used.
inline double reaction(Field& u, const Field& theta, double n, double dt, MultiplierCoupling coupling,
                       std::optional<double> external_lambda) {
    double lambda = 0.0;
    if (external_lambda) {
        lambda = *external_lambda;
    } else if (coupling == MultiplierCoupling::frozen) {
        lambda = compute_lambda(u, theta, n);
    } else {
        lambda = implicit_multiplier(u, theta, n, dt);
    }
    if (!(dt * lambda < 1.0)) throw StiffnessError("reaction stage: dt * lambda >= 1");
    if (n == 0.0 && lambda == 0.0) return 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = solve_reaction_cell(u[i], theta[i], n, dt, lambda);
    }
    return lambda;
}

/// Optional prescribed lambda(t) for the fixed-point map.
using LambdaFn = std::function<double(double)>;

struct StepOutput {
    SolverState state;
    double outflow;
};

inline StepOutput advance(const SolverState& state, const SolverConfig& cfg, const FluxSpec& f,
                          const ObstacleSpec& theta, double dt, const LambdaFn* prescribed) {
    const Grid1D& grid = state.u.grid();
    auto lam_at = [&](double t) -> std::optional<double> {
        if (prescribed) return (*prescribed)(t);
        return std::nullopt;
    };
    SolverState next{state.t + dt, state.u, state.lambda_last, state.step_index + 1};
    double outflow = 0.0;
    if (cfg.splitting == Splitting::lie) {
        auto a = transport_diffusion(state.u, f, cfg.eps, dt);
        outflow = a.outflow;
        next.u = std::move(a.u);
        const Field th = theta.sample(grid, state.t + dt);
        next.lambda_last = reaction(next.u, th, cfg.n, dt, cfg.coupling, lam_at(state.t));
    } else {
        const double half = 0.5 * dt;
        Field w = state.u;
        const Field th_half = theta.sample(grid, state.t + half);
        reaction(w, th_half, cfg.n, half, cfg.coupling, lam_at(state.t));
        auto a = transport_diffusion(w, f, cfg.eps, dt);
        outflow = a.outflow;
        next.u = std::move(a.u);
        const Field th_end = theta.sample(grid, state.t + dt);
        next.lambda_last = reaction(next.u, th_end, cfg.n, half, cfg.coupling, lam_at(state.t + half));
    }
    return {std::move(next), outflow};
}

} // namespace detail

/// One splitting step of
///   u_t + f(u)_x - eps u_xx = lambda u - n (u - theta)^+
/// with the given dt.  Throws StiffnessError when dt is too large for the
/// reaction stage; callers retry with a smaller step.
inline SolverState step(const SolverState& state, const SolverConfig& cfg, const FluxSpec& f,
                        const ObstacleSpec& theta, double dt) {
    return detail::advance(state, cfg, f, theta, dt, nullptr).state;
}

namespace detail {

inline void record(Trajectory& traj, const SolverState& s, const Field& theta_t) {
    traj.lambda_series.push_back(s.t, s.lambda_last);
    traj.mass_series.push_back(s.t, integrate(s.u));
    traj.phi_series.push_back(s.t, excess_mass(s.u, theta_t));
    traj.tv_series.push_back(s.t, total_variation(s.u));
    traj.linf_series.push_back(s.t, l_inf_norm(s.u));
    traj.alpha_series.push_back(s.t, mass_below(s.u, theta_t));
}

inline std::size_t count_clamped(const Field& u, const FluxSpec& f) {
    std::size_t c = 0;
    for (double v : u.values()) c += f.in_range(v) ? 0 : 1;
    return c;
}

inline std::vector<double> checked_output_times(std::vector<double> times, double T) {
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    for (double t : times) {
        if (!(t >= 0.0 && t <= T * (1.0 + 1e-14))) {
            throw InvalidArgument("output time " + format_real(t) + " outside [0, T]");
        }
    }
    return times;
}

struct IntegrateOptions {
    const LambdaFn* prescribed = nullptr;
    /// Fixed reaction rate for the dt cap (used by the fixed-point map so all
    /// iterates share one time lattice).
    std::optional<double> fixed_reaction_rate;
};

inline Trajectory integrate_problem(const SolverConfig& cfg, const Field& u0, const ObstacleSpec& theta,
                                    const FluxSpec& f, std::vector<double> output_times,
                                    const IntegrateOptions& opt = {}) {
    cfg.validate_numerics();
    for (std::size_t i = 0; i < u0.size(); ++i) {
        if (u0[i] < 0.0) throw InvalidArgument("initial datum must be nonnegative");
    }
    output_times = checked_output_times(std::move(output_times), cfg.T);
    const Grid1D& grid = u0.grid();
    Trajectory traj;
    SolverState state{0.0, u0, 0.0, 0};
    {
        const Field th0 = theta.sample(grid, 0.0);
        state.lambda_last = opt.prescribed ? (*opt.prescribed)(0.0) : compute_lambda(u0, th0, cfg.n);
        record(traj, state, th0);
    }
    std::size_t next_out = 0;
    if (next_out < output_times.size() && output_times[next_out] <= 0.0) {
        traj.snapshots.push_back({0.0, u0});
        ++next_out;
    }
    SolverConfig local = cfg;
    const double T = cfg.T;
    while (state.t < T) {
        SolverState probe = state;
        if (opt.fixed_reaction_rate) probe.lambda_last = *opt.fixed_reaction_rate;
        double dt = stable_dt(probe, local, f);
        double target = T;
        if (next_out < output_times.size()) target = std::min(target, output_times[next_out]);
        bool lands = false;
        if (state.t + dt >= target - 1e-12 * std::max(1.0, T)) {
            dt = target - state.t;
            lands = true;
        }
        std::optional<StepOutput> out;
        for (int attempt = 0;; ++attempt) {
            try {
                out.emplace(advance(state, local, f, theta, dt, opt.prescribed));
                break;
            } catch (const StiffnessError&) {
                if (attempt >= 40) throw;
                dt *= 0.5;
                lands = false;
                ++traj.stiffness_retries;
            }
        }
        if (lands) out->state.t = target;
        if (!(out->state.t > state.t)) {
            throw StiffnessError("time step underflow at t=" + format_real(state.t) + " (lambda=" +
                                 format_real(out->state.lambda_last) + "); the multiplier is unstable");
        }
        state = std::move(out->state);
        traj.boundary_leak += std::abs(out->outflow);
        if (traj.boundary_leak > cfg.boundary_leak_tol) {
            throw BoundaryLeakError("boundary mass leakage " + format_real(traj.boundary_leak) +
                                    " exceeds tolerance " + format_real(cfg.boundary_leak_tol) +
                                    " at t=" + format_real(state.t) + "; enlarge the domain");
        }
        for (double v : state.u.values()) {
            if (v < 0.0 && v < -1e-13 * std::max(1.0, l_inf_norm(state.u))) {
                throw InternalInvariantError("positivity lost at t=" + format_real(state.t));
            }
        }
        traj.clamp_events += count_clamped(state.u, f);
        ++traj.steps;
        record(traj, state, theta.sample(grid, state.t));
        while (next_out < output_times.size() &&
               output_times[next_out] <= state.t + 1e-12 * std::max(1.0, T)) {
            traj.snapshots.push_back({output_times[next_out], state.u});
            ++next_out;
        }
        if (lands && target == T) break;
    }
    return traj;
}

} // namespace detail

/// Obstacle that never binds: constant at the largest finite double.
inline ObstacleSpec inactive_obstacle() {
    ObstacleSpec s = constant_obstacle(std::numeric_limits<double>::max());
    s.family = "none";
    s.parameters.clear();
    return s;
}

/// Evenly spaced output times 0, T/count, ..., T.
inline std::vector<double> uniform_times(double T, std::size_t count) {
    std::vector<double> t(count + 1);
    for (std::size_t k = 0; k <= count; ++k) {
        t[k] = T * static_cast<double>(k) / static_cast<double>(count);
    }
    t.back() = T;
    return t;
}

/// Advances the nonlocal penalised problem to cfg.T, recording diagnostics
/// every step and snapshots at output_times.
inline Trajectory run(const SolverConfig& cfg, const Field& u0, const ObstacleSpec& theta,
                      const FluxSpec& f, const std::vector<double>& output_times) {
    const double m = integrate(u0);
    if (std::abs(m - 1.0) > 1e-12) {
        throw InvalidArgument("run: initial datum must have unit mass (got " + format_real(m) + ")");
    }
    return detail::integrate_problem(cfg, u0, theta, f, output_times);
}

struct HomogeneousOptions {
    double cfl = 0.5;
    double boundary_leak_tol = std::numeric_limits<double>::infinity();
    double reaction_dt_cap = 0.5;
};

/// Viscous (or, with eps = 0, inviscid) conservation law without penalty or
/// multiplier; same scheme as run() with n = 0.
inline Trajectory solve_homogeneous(const Field& v0, const FluxSpec& f, double eps, double T,
                                    const std::vector<double>& output_times,
                                    const HomogeneousOptions& opt = {}) {
    SolverConfig cfg;
    cfg.n = 0.0;
    cfg.eps = eps;
    cfg.cfl = opt.cfl;
    cfg.T = T;
    cfg.reaction_dt_cap = opt.reaction_dt_cap;
    cfg.boundary_leak_tol = opt.boundary_leak_tol;
    return detail::integrate_problem(cfg, v0, inactive_obstacle(), f, output_times);
}

// ---------------------------------------------------------------------------
// Fixed-point (Picard) mode
// ---------------------------------------------------------------------------

/// sup over shared snapshot times of the L1 distance (the norm of
/// C([0, T0]; L1)).
inline double trajectory_distance(const Trajectory& a, const Trajectory& b) {
    if (a.snapshots.size() != b.snapshots.size()) {
        throw SamplingError("trajectory_distance: snapshot counts differ");
    }
    double d = 0.0;
    for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
        if (a.snapshots[k].t != b.snapshots[k].t) {
            throw SamplingError("trajectory_distance: snapshot times differ");
        }
        d = std::max(d, l1_distance(a.snapshots[k].u, b.snapshots[k].u));
    }
    return d;
}

/// sup_t ||u(t)||_{L1} over the snapshots.
inline double trajectory_norm(const Trajectory& a) {
    double m = 0.0;
    for (const auto& s : a.snapshots) {
        CompensatedSum acc;
        for (double v : s.u.values()) acc.add(std::abs(v));
        m = std::max(m, acc.value() * s.u.grid().dx());
    }
    return m;
}

/// Trajectory that holds `u` fixed at every time in `times`, with its
/// excess-mass series filled in so it can seed the fixed-point map.
inline Trajectory constant_trajectory(const Field& u, const std::vector<double>& times,
                                      const ObstacleSpec& theta) {
    Trajectory traj;
    for (double t : times) {
        const Field th = theta.sample(u.grid(), t);
        traj.snapshots.push_back({t, u});
        SolverState s{t, u, 0.0, 0};
        detail::record(traj, s, th);
    }
    return traj;
}

struct PicardOptions {
    double R = 2.0;             // radius of the ball in C([0, T0]; L1)
    double target_factor = 0.5; // K in 2 n T0 exp(2 R n T0) = K
    std::size_t iterations = 5;
};

/// Phi(u_bar): solves the local problem with the nonlocal factor frozen from
/// u_bar, lambda(t) = n * int (u_bar(t) - theta(t))^+, on u_bar's time span.
/// Every call with the same cfg and snapshot times uses the same step lattice.
inline Trajectory picard_iterate(const Trajectory& u_bar, const SolverConfig& cfg, const FluxSpec& f,
                                 const ObstacleSpec& theta, const Field& u0,
                                 const PicardOptions& opt = {}) {
    if (u_bar.snapshots.size() < 2 || u_bar.phi_series.size() < 2) {
        throw SamplingError("picard_iterate: seed needs at least two snapshots and a phi series");
    }
    const auto times = u_bar.snapshot_times();
    const double T0 = times.back();
    if (times.front() != 0.0 || u_bar.phi_series.times().front() > 0.0 ||
        u_bar.phi_series.times().back() < T0 * (1.0 - 1e-12)) {
        throw SamplingError("picard_iterate: seed does not cover [0, T0]");
    }
    if (!(u_bar.snapshots.front().u.grid() == u0.grid())) {
        throw ShapeError("picard_iterate: seed and datum live on different grids");
    }
    SolverConfig local = cfg;
    local.T = T0;
    const double n = cfg.n;
    const TimeSeries& phi = u_bar.phi_series;
    detail::LambdaFn lambda = [&phi, n](double t) { return n * phi.at(t); };
    detail::IntegrateOptions io;
    io.prescribed = &lambda;
    io.fixed_reaction_rate = n * opt.R;
    return detail::integrate_problem(local, u0, theta, f, times, io);
}

/// Root of 2 n T exp(2 R n T) = target, found by bisection.
inline double contraction_horizon(double n, double R, double target = 0.5) {
    if (!(n > 0.0) || !(R > 0.0) || !(target > 0.0)) {
        throw InvalidArgument("contraction_horizon: require n, R, target > 0");
    }
    auto g = [&](double T) { return 2.0 * n * T * std::exp(2.0 * R * n * T) - target; };
    double lo = 0.0;
    double hi = 1.0 / n;
    while (g(hi) < 0.0) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct PicardReport {
    double T0 = 0.0;
    double K_hat = 0.0;
    double R = 0.0;
    std::vector<double> iterate_distances;
    bool success = false;
};

/// Measures the contraction factor of Phi on [0, T0] from two seeds and the
/// successive-iterate distances of the Picard sequence started at seeds.first.
inline PicardReport estimate_contraction(const SolverConfig& cfg, const FluxSpec& f,
                                         const ObstacleSpec& theta, const Field& u0,
                                         const Trajectory& seed_a, const Trajectory& seed_b,
                                         const PicardOptions& opt = {}) {
    PicardReport rep;
    rep.R = opt.R;
    rep.T0 = contraction_horizon(cfg.n, opt.R, opt.target_factor);
    const auto times = seed_a.snapshot_times();
    if (times.empty() || std::abs(times.back() - rep.T0) > 1e-12 * std::max(1.0, rep.T0)) {
        throw SamplingError("estimate_contraction: seeds must end at T0 = " + format_real(rep.T0));
    }
    for (const auto* s : {&seed_a, &seed_b}) {
        if (trajectory_norm(*s) > opt.R) {
            throw InvalidArgument("estimate_contraction: seed outside the ball of radius R");
        }
    }
    const double seed_gap = trajectory_distance(seed_a, seed_b);
    if (seed_gap == 0.0) throw DegenerateSeed("estimate_contraction: seeds are identical");

    const Trajectory phi_a = picard_iterate(seed_a, cfg, f, theta, u0, opt);
    const Trajectory phi_b = picard_iterate(seed_b, cfg, f, theta, u0, opt);
    rep.K_hat = trajectory_distance(phi_a, phi_b) / seed_gap;

    Trajectory prev = seed_a;
    Trajectory cur = phi_a;
    for (std::size_t k = 0; k < opt.iterations; ++k) {
        rep.iterate_distances.push_back(trajectory_distance(cur, prev));
        prev = std::move(cur);
        cur = picard_iterate(prev, cfg, f, theta, u0, opt);
    }
    rep.success = rep.K_hat < 1.0;
    return rep;
}

} // namespace ocl
