#include "catch_amalgamated.hpp"

#include "ocl/penalized_solver.hpp"

#include <cmath>
#include <limits>

using namespace ocl;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

/// Entropy solution of Burgers from the indicator of [0, 1], valid for t < 2:
/// rarefaction on [0, t], plateau 1 up to the shock at 1 + t/2.
double burgers_box_exact(double t, double x) {
    if (x <= 0.0) return 0.0;
    if (x < t) return x / t;
    if (x < 1.0 + 0.5 * t) return 1.0;
    return 0.0;
}

/// Exact cell average of burgers_box_exact over [a, b].
double burgers_box_average(double t, double a, double b) {
    auto primitive = [t](double x) {
        double s = 0.0;
        const double r = std::clamp(x, 0.0, t);
        s += 0.5 * r * r / t;
        const double p = std::clamp(x, t, 1.0 + 0.5 * t);
        s += p - t;
        return s;
    };
    return (primitive(b) - primitive(a)) / (b - a);
}

Field box_field(const Grid1D& g) { return make_initial_field(box_datum(0.0, 1.0), g); }

/// Right-most position where u crosses 1/2, by linear interpolation.
double shock_position(const Field& u) {
    const Grid1D& g = u.grid();
    for (std::size_t i = u.size() - 1; i > 0; --i) {
        if (u[i - 1] >= 0.5 && u[i] < 0.5) {
            const double w = (u[i - 1] - 0.5) / (u[i - 1] - u[i]);
            return g.center(i - 1) + w * g.dx();
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

} // namespace

TEST_CASE("numerical flux examples", "[flux]") {
    const auto b = FluxSpec::burgers();
    CHECK(numerical_flux(b, 0.7, 0.7) == b.f(0.7));
    CHECK(numerical_flux(b, 1.0, 0.0) == 0.75);
    CHECK(numerical_flux(FluxSpec::linear(1.0), 0.0, 1.0) == 0.0);
}

TEST_CASE("multiplier examples", "[lambda]") {
    const Grid1D g(0.0, 0.4, 4);
    const Field th = Field::constant(g, 1.0);
    CHECK(compute_lambda(Field::constant(g, 0.5), th, 10.0) == 0.0);
    const Field u(g, {0.0, 1.5, 0.0, 0.0});
    CHECK_THAT(compute_lambda(u, th, 10.0), WithinAbs(0.5, 1e-15));
    CHECK_THAT(compute_lambda(u, th, 20.0), WithinAbs(2.0 * compute_lambda(u, th, 10.0), 1e-15));
}

TEST_CASE("stable dt examples", "[dt]") {
    const Grid1D g(0.0, 1.0, 100);
    SolverConfig cfg;
    cfg.n = 1e-6;
    cfg.eps = 0.001;
    cfg.cfl = 0.5;
    SolverState s{0.0, Field(g), 0.0, 0};
    CHECK_THAT(stable_dt(s, cfg, FluxSpec::burgers(1.0)), WithinRel(0.5 / 120.0, 1e-14));
    cfg.eps = 0.0;
    cfg.n = 4.0;
    CHECK_THAT(stable_dt(s, cfg, FluxSpec::linear(0.0)), WithinRel(cfg.reaction_dt_cap / 4.0, 1e-14));
    s.lambda_last = 1e8;
    CHECK_THAT(stable_dt(s, cfg, FluxSpec::burgers(1.0)), WithinRel(cfg.reaction_dt_cap / 1e8, 1e-14));
}

TEST_CASE("solver config validation", "[config]") {
    SolverConfig cfg;
    cfg.cfl = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.cfl = 0.5;
    cfg.n = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.n = 1.0;
    cfg.eps = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("zero is a fixed point of a step", "[step]") {
    const Grid1D g(0.0, 1.0, 16);
    SolverConfig cfg;
    cfg.n = 50.0;
    cfg.eps = 0.01;
    const SolverState s{0.0, Field(g), 0.0, 0};
    const auto next = step(s, cfg, FluxSpec::burgers(), constant_obstacle(0.5), 1e-4);
    for (double v : next.u.values()) CHECK(v == 0.0);
}

TEST_CASE("inactive penalty step equals the homogeneous step", "[step]") {
    const Grid1D g(-1.0, 2.0, 60);
    const Field u0 = box_field(g);
    SolverConfig cfg;
    cfg.n = 1e4;
    cfg.eps = 0.02;
    const SolverState s{0.0, u0, 0.0, 0};
    const double dt = 2e-5;
    const auto a = step(s, cfg, FluxSpec::burgers(), constant_obstacle(5.0), dt);
    cfg.n = 0.0;
    const auto b = step(s, cfg, FluxSpec::burgers(), inactive_obstacle(), dt);
    for (std::size_t i = 0; i < g.n_cells(); ++i) CHECK(a.u[i] == b.u[i]);
    CHECK(a.lambda_last == 0.0);
}

TEST_CASE("single active cell matches the hand solution of the reaction step", "[step]") {
    // a = 0, eps = 0: only the reaction acts.  Frozen coupling takes lambda
    // from the pre-reaction field.
    const Grid1D g(0.0, 0.4, 4);
    const Field u(g, {0.2, 1.5, 0.2, 0.2});
    const double theta = 1.0, n = 10.0, dt = 0.01;
    SolverConfig cfg;
    cfg.n = n;
    cfg.coupling = MultiplierCoupling::frozen;
    const auto next = step({0.0, u, 0.0, 0}, cfg, FluxSpec::linear(0.0), constant_obstacle(theta), dt);
    const double lambda = n * 0.5 * 0.1;
    const double hand = (1.5 + n * dt * theta) / (1.0 - dt * lambda + n * dt);
    CHECK_THAT(next.u[1], WithinRel(hand, 1e-14));
    CHECK_THAT(next.u[0], WithinRel(0.2 / (1.0 - dt * lambda), 1e-14));
    // Implicit Euler residual of the reaction ODE.
    const double r = hand - 1.5 - dt * (lambda * hand - n * (hand - theta));
    CHECK(std::abs(r) < 1e-14);
    // Fine fixed-point iteration of the same implicit equation.
    double v = 1.5;
    for (int k = 0; k < 200; ++k) v = 1.5 + dt * (lambda * v - n * std::max(v - theta, 0.0));
    CHECK_THAT(next.u[1], WithinAbs(v, 1e-12));
}

TEST_CASE("implicit coupling conserves mass in a pure reaction step", "[step]") {
    const Grid1D g(0.0, 1.0, 10);
    Field u = Field::constant(g, 0.5);
    u[3] = 3.0;
    u[4] = 2.0;
    u = normalize_mass(u);
    SolverConfig cfg;
    cfg.n = 100.0;
    const auto next = step({0.0, u, 0.0, 0}, cfg, FluxSpec::linear(0.0), constant_obstacle(1.0), 1e-3);
    CHECK_THAT(integrate(next.u), WithinAbs(1.0, 1e-13));
    CHECK(next.lambda_last > 0.0);
}

TEST_CASE("reaction step reports stiffness when dt * lambda >= 1", "[step]") {
    const Grid1D g(0.0, 1.0, 4);
    const Field u(g, {0.0, 4.0, 0.0, 0.0});
    SolverConfig cfg;
    cfg.n = 1000.0;
    cfg.coupling = MultiplierCoupling::frozen;
    CHECK_THROWS_AS(step({0.0, u, 0.0, 0}, cfg, FluxSpec::linear(0.0), constant_obstacle(1.0), 1.0),
                    StiffnessError);
}

TEST_CASE("run with a never-active obstacle matches the homogeneous solve", "[run]") {
    const Grid1D g(-1.0, 3.0, 400);
    const Field u0 = box_field(g);
    SolverConfig cfg;
    cfg.n = 1.0;
    cfg.eps = 0.01;
    cfg.T = 0.5;
    const auto times = uniform_times(cfg.T, 5);
    const auto a = run(cfg, u0, constant_obstacle(1e6), FluxSpec::burgers(), times);
    const auto b = solve_homogeneous(u0, FluxSpec::burgers(), cfg.eps, cfg.T, times);
    REQUIRE(a.snapshots.size() == b.snapshots.size());
    for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
        for (std::size_t i = 0; i < g.n_cells(); ++i) CHECK(a.snapshots[k].u[i] == b.snapshots[k].u[i]);
    }
    for (double m : a.mass_series.values()) CHECK(std::abs(m - 1.0) <= 1e-10);
}

TEST_CASE("a constant state is stationary under pure diffusion", "[run]") {
    const Grid1D g(0.0, 1.0, 50);
    const Field u0 = Field::constant(g, 1.0);
    const auto tr = solve_homogeneous(u0, FluxSpec::linear(0.0), 0.01, 0.1, {0.1});
    // Zero ghost cells drain the two end cells only; the interior stays put.
    const Field& u = tr.snapshots.back().u;
    for (std::size_t i = 10; i < 40; ++i) CHECK_THAT(u[i], WithinAbs(1.0, 1e-12));
}

TEST_CASE("no dynamics without flux or viscosity", "[run]") {
    const Grid1D g(-1.0, 2.0, 30);
    const Field u0 = box_field(g);
    const auto tr = solve_homogeneous(u0, FluxSpec::linear(0.0), 0.0, 1.0, {0.5, 1.0});
    for (std::size_t i = 0; i < g.n_cells(); ++i) CHECK(tr.snapshots.back().u[i] == u0[i]);
}

TEST_CASE("linear advection translates the profile and keeps mass", "[run]") {
    const Grid1D g(-1.0, 4.0, 1000);
    const Field u0 = make_initial_field(bump_datum(0.5, 0.5), g);
    const auto tr = solve_homogeneous(u0, FluxSpec::linear(1.0), 0.0, 1.0, {1.0});
    const Field& u = tr.snapshots.back().u;
    CompensatedSum m1;
    for (std::size_t i = 0; i < u.size(); ++i) m1.add(u[i] * g.center(i));
    CHECK_THAT(m1.value() * g.dx(), WithinAbs(1.5, 1e-3));
    CHECK_THAT(integrate(u), WithinAbs(1.0, 1e-12));
}

TEST_CASE("burgers box: rarefaction and shock match the exact solution", "[oracle]") {
    const Grid1D g(-1.0, 3.0, 1600);
    const Field u0 = box_field(g);
    SolverConfig cfg;
    cfg.n = 1.0;
    cfg.eps = 1e-4;
    cfg.T = 0.5;
    const auto tr = run(cfg, u0, constant_obstacle(1e6), FluxSpec::burgers(), {0.5});
    const Field& u = tr.snapshots.back().u;
    CompensatedSum err;
    for (std::size_t i = 0; i < u.size(); ++i) {
        err.add(std::abs(u[i] - burgers_box_average(0.5, g.left_face(i), g.left_face(i) + g.dx())));
    }
    CHECK(err.value() * g.dx() <= 0.05);
    CHECK(burgers_box_exact(0.5, 0.25) == 0.5);
}

TEST_CASE("burgers shock travels at the Rankine-Hugoniot speed", "[oracle]") {
    const Grid1D g(-1.0, 3.0, 1600);
    const auto tr = solve_homogeneous(box_field(g), FluxSpec::burgers(), 0.0, 1.0, {1.0});
    CHECK(std::abs(shock_position(tr.snapshots.back().u) - 1.5) <= 2.0 * g.dx());
    CHECK_THAT(integrate(tr.snapshots.back().u), WithinAbs(1.0, 1e-10));
}

TEST_CASE("penalized run keeps positivity and mass", "[run]") {
    const Grid1D g(-4.0, 6.0, 1000);
    const Field u0 = make_initial_field(bump_datum(0.0, 1.0), g);
    const auto theta = moving_dip(0.1, 2.0, 0.5, 0.3, 0.5);
    for (auto split : {Splitting::lie, Splitting::strang}) {
        SolverConfig cfg;
        cfg.n = 40.0;
        cfg.eps = 0.025;
        cfg.T = 1.0;
        cfg.splitting = split;
        const auto tr = run(cfg, u0, theta, FluxSpec::burgers(), uniform_times(1.0, 4));
        for (const auto& s : tr.snapshots) {
            for (double v : s.u.values()) CHECK(v >= 0.0);
        }
        for (double m : tr.mass_series.values()) CHECK(std::abs(m - 1.0) <= 1e-10);
        CHECK(tr.phi_series.max_value() > 0.0);
    }
}

TEST_CASE("lie and strang approach each other as dt shrinks", "[run]") {
    const Grid1D g(-2.0, 4.0, 300);
    const Field u0 = make_initial_field(bump_datum(0.0, 1.0), g);
    const auto theta = moving_dip(0.1, 2.0, 0.5, 0.3, 0.5);
    auto gap = [&](double cfl) {
        SolverConfig cfg;
        cfg.n = 20.0;
        cfg.eps = 0.05;
        cfg.T = 0.5;
        cfg.cfl = cfl;
        const auto a = run(cfg, u0, theta, FluxSpec::burgers(), {0.5});
        cfg.splitting = Splitting::strang;
        const auto b = run(cfg, u0, theta, FluxSpec::burgers(), {0.5});
        return l1_distance(a.snapshots.back().u, b.snapshots.back().u);
    };
    CHECK(gap(0.125) < gap(0.5));
}

TEST_CASE("transport stage is order preserving without viscosity", "[monotone]") {
    const Grid1D g(-1.0, 2.0, 120);
    const Field u = box_field(g);
    Field v = u;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += 0.3 * std::exp(-g.center(i) * g.center(i));
    const double dt = 0.5 * g.dx() / 2.0;
    const auto a = detail::transport_diffusion(u, FluxSpec::burgers(), 0.0, dt);
    const auto b = detail::transport_diffusion(v, FluxSpec::burgers(), 0.0, dt);
    for (std::size_t i = 0; i < g.n_cells(); ++i) CHECK(a.u[i] <= b.u[i]);
}

TEST_CASE("boundary leakage beyond tolerance is an error", "[run]") {
    const Grid1D g(0.0, 1.2, 120);
    const Field u0 = box_field(Grid1D(0.0, 1.2, 120));
    SolverConfig cfg;
    cfg.n = 1.0;
    cfg.eps = 0.01;
    cfg.T = 1.0;
    CHECK_THROWS_AS(run(cfg, u0, constant_obstacle(10.0), FluxSpec::burgers(), {1.0}), BoundaryLeakError);
}

TEST_CASE("contraction horizon solves the scalar inequality", "[picard]") {
    const double T0 = contraction_horizon(1.0, 2.0, 0.5);
    CHECK_THAT(2.0 * T0 * std::exp(4.0 * T0), WithinAbs(0.5, 1e-12));
    CHECK_THAT(T0, WithinAbs(0.1418, 1e-3));
    CHECK(contraction_horizon(4.0, 2.0) < T0);
}

TEST_CASE("picard map: identical seeds are degenerate, distinct seeds contract", "[picard]") {
    const Grid1D g(-2.0, 4.0, 600);
    const auto theta = constant_obstacle(0.4);
    const Field u0 = make_initial_field(box_datum(0.0, 2.0), g);
    SolverConfig cfg;
    cfg.n = 1.0;
    cfg.eps = 0.01;
    const double T0 = contraction_horizon(cfg.n, 2.0);
    const auto times = uniform_times(T0, 10);
    const auto seed_a = constant_trajectory(u0, times, theta);
    const auto seed_b = constant_trajectory(2.0 * u0, times, theta);
    CHECK_THROWS_AS(estimate_contraction(cfg, FluxSpec::burgers(), theta, u0, seed_a, seed_a), DegenerateSeed);
    const auto rep = estimate_contraction(cfg, FluxSpec::burgers(), theta, u0, seed_a, seed_b);
    CHECK(rep.success);
    CHECK(rep.K_hat < 1.0);
    for (std::size_t k = 1; k < rep.iterate_distances.size(); ++k) {
        CHECK(rep.iterate_distances[k] <= rep.K_hat * rep.iterate_distances[k - 1]);
    }
}

TEST_CASE("picard map with a seed below the obstacle has no multiplier", "[picard]") {
    const Grid1D g(-2.0, 4.0, 300);
    const auto theta = constant_obstacle(5.0);
    const Field u0 = make_initial_field(box_datum(0.0, 1.0), g);
    SolverConfig cfg;
    cfg.n = 1.0;
    cfg.eps = 0.01;
    const auto times = uniform_times(0.1, 4);
    const auto v = picard_iterate(constant_trajectory(u0, times, theta), cfg, FluxSpec::burgers(), theta, u0);
    for (double l : v.lambda_series.values()) CHECK(l == 0.0);
    CHECK_THROWS_AS(picard_iterate(constant_trajectory(u0, {0.0}, theta), cfg, FluxSpec::burgers(), theta, u0),
                    SamplingError);
}

TEST_CASE("an unstable frozen multiplier stops with a stiffness error", "[run]") {
    const Grid1D g(-5.0, 7.0, 1200);
    const Field u0 = make_initial_field(bump_datum(0.0, 1.0), g);
    SolverConfig cfg;
    cfg.n = 1000.0;
    cfg.eps = 0.01;
    cfg.T = 2.0;
    cfg.coupling = MultiplierCoupling::frozen;
    CHECK_THROWS_AS(run(cfg, u0, moving_dip(0.1, 2.0, 1.8, -0.4, 0.5), FluxSpec::burgers(), {2.0}),
                    StiffnessError);
    cfg.coupling = MultiplierCoupling::implicit;
    CHECK_NOTHROW(run(cfg, u0, moving_dip(0.1, 2.0, 1.8, -0.4, 0.5), FluxSpec::burgers(), {2.0}));
}
