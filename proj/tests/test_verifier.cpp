#include "catch_amalgamated.hpp"

#include "ocl/verifier.hpp"

#include <cmath>

using namespace ocl;
using Catch::Matchers::WithinAbs;

namespace {

ObstacleSpec parabola_obstacle(double lower) {
    ObstacleSpec s;
    s.family = "parabola";
    s.lower = lower;
    s.value = [lower](double, double x) { return lower + x * x; };
    s.dt = [](double, double) { return 0.0; };
    s.dx = [](double, double x) { return 2.0 * x; };
    s.dxx = [](double, double) { return 2.0; };
    return s;
}

Trajectory single_snapshot(const Field& u) {
    Trajectory tr;
    tr.snapshots.push_back({0.0, u});
    return tr;
}

/// Inviscid Burgers from the indicator of [0, 1] with an obstacle that never binds.
const Trajectory& burgers_box_run() {
    static const Trajectory tr = [] {
        const Grid1D g(-1.0, 3.0, 1600);
        SolverConfig cfg;
        cfg.n = 1.0;
        cfg.eps = 0.0;
        cfg.T = 1.0;
        return run(cfg, make_initial_field(box_datum(0.0, 1.0), g), constant_obstacle(5.0),
                   FluxSpec::burgers(), uniform_times(1.0, 40));
    }();
    return tr;
}

} // namespace

TEST_CASE("kruzkov pair examples", "[kruzkov]") {
    const auto b = FluxSpec::burgers();
    const auto same = kruzkov_pair(0.3, 0.3, b);
    CHECK(same.eta == 0.0);
    CHECK(same.q == 0.0);
    const auto p = kruzkov_pair(2.0, 1.0, b);
    CHECK(p.eta == 1.0);
    CHECK(p.q == 1.5);
    for (double u : {0.0, 0.4, 1.3}) {
        for (double v : {0.1, 0.4, 2.0}) {
            const auto a = kruzkov_pair(u, v, b);
            const auto c = kruzkov_pair(v, u, b);
            CHECK(a.eta == c.eta);
            CHECK(a.q == c.q);
            CHECK(a.eta >= 0.0);
            CHECK((a.eta == 0.0) == (u == v));
        }
    }
}

TEST_CASE("test bumps are smooth, nonnegative and compactly supported", "[bump]") {
    CHECK(mollifier(0.0) == 1.0);
    CHECK(mollifier(1.0) == 0.0);
    CHECK(mollifier(-1.5) == 0.0);
    const double h = 1e-6;
    for (double s : {-0.7, -0.2, 0.3, 0.8}) {
        CHECK_THAT(mollifier_prime(s), WithinAbs((mollifier(s + h) - mollifier(s - h)) / (2 * h), 1e-6));
    }
    const auto cfg = default_entropy_config(2.0, -2.0, 4.0);
    CHECK(cfg.k_samples.size() == 21);
    CHECK(cfg.bumps.size() == 30);
    const Grid1D g(-5.0, 7.0, 100);
    for (const auto& b : cfg.bumps) {
        CHECK_NOTHROW(validate_bump(b, g, 2.0));
        CHECK(b.value(2.0, b.x_center) == 0.0);
    }
    TestBump out;
    out.x_center = 6.5;
    CHECK_THROWS_AS(validate_bump(out, g, 2.0), InvalidArgument);
}

TEST_CASE("entropy residual of a stationary constant state vanishes", "[entropy]") {
    const Grid1D g(-1.0, 3.0, 400);
    const Field u0 = Field::constant(g, 0.5);
    const auto tr = solve_homogeneous(u0, FluxSpec::linear(0.0), 0.0, 1.0, uniform_times(1.0, 40));
    const auto theta = constant_obstacle(1.0);
    const auto cfg = default_entropy_config(1.0, 0.0, 2.0);
    for (double k : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        for (const auto& b : cfg.bumps) {
            CHECK(std::abs(entropy_residual(tr, theta, FluxSpec::linear(0.0), tr.lambda_series, k, b, u0)) <= 1e-3);
        }
    }
}

TEST_CASE("entropy residuals of a burgers shock run stay above the floor", "[entropy]") {
    const auto& tr = burgers_box_run();
    const Field& u0 = tr.snapshots.front().u;
    auto cfg = default_entropy_config(1.0, 0.0, 2.0);
    const auto rep = entropy_check(tr, constant_obstacle(5.0), FluxSpec::burgers(), u0, cfg, 2);
    CHECK(rep.residuals.size() == 21 * 30);
    CHECK(rep.min_residual >= -1e-2);
    CHECK(rep.pass);
    // k = 0 is the classical inequality against zero.
    for (std::size_t ib = 0; ib < rep.n_bumps; ++ib) CHECK(rep.at(0, ib) >= -rep.tolerance);
}

TEST_CASE("mass check examples", "[mass]") {
    const auto& tr = burgers_box_run();
    CHECK(check_mass(tr) <= 1e-10);
    CHECK_THAT(integrate(tr.snapshots.front().u) - 1.0, WithinAbs(0.0, 1e-12));
    const Field u = 2.0 * tr.snapshots.front().u;
    CHECK(check_mass(single_snapshot(u)) == std::abs(integrate(u) - 1.0));
}

TEST_CASE("obstacle violation and alpha examples", "[alpha]") {
    const Grid1D g(0.0, 1.0, 10);
    const Field one = Field::constant(g, 1.0);
    CHECK(obstacle_violation(single_snapshot(one), constant_obstacle(2.0)) == 0.0);
    CHECK_THAT(alpha_estimate(single_snapshot(one), constant_obstacle(2.0)), WithinAbs(1.0, 1e-15));
    CHECK(alpha_estimate(single_snapshot(one), constant_obstacle(1.0)) == 0.0);
    const auto tr = single_snapshot(one);
    CHECK(mass_partition_excess(tr, constant_obstacle(0.5)) <= 1e-15);
    // Far too weak a penalty: violation bounded by the mass.
    const Grid1D h(-5.0, 7.0, 600);
    SolverConfig cfg;
    cfg.n = 1.0;
    cfg.eps = 0.05;
    const auto weak = run(cfg, make_initial_field(bump_datum(0.0, 1.0), h), constant_obstacle(0.3),
                          FluxSpec::burgers(), uniform_times(1.0, 4));
    const double v = obstacle_violation(weak, constant_obstacle(0.3));
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
}

TEST_CASE("penalty strength shrinks the mass defect and the violation", "[mass]") {
    const Grid1D g(-5.0, 7.0, 1200);
    const Field u0 = make_initial_field(bump_datum(0.0, 1.0), g);
    const auto theta = moving_dip(0.1, 2.0, 1.8, -0.4, 0.5);
    double prev_phi = 1.0;
    double prev_mass = 1.0;
    double prev_alpha = 0.0;
    for (double n : {100.0, 1000.0}) {
        SolverConfig cfg;
        cfg.n = n;
        cfg.eps = 0.01;
        cfg.T = 2.0;
        const auto tr = run(cfg, u0, theta, FluxSpec::burgers(), uniform_times(2.0, 20));
        const double mass = check_mass(tr);
        CHECK(mass > 0.0);
        CHECK(mass < prev_mass);
        prev_mass = mass;
        const double phi = obstacle_violation(tr, theta);
        CHECK(phi < prev_phi);
        prev_phi = phi;
        const double a = alpha_estimate(tr, theta);
        if (prev_alpha > 0.0) CHECK(std::abs(a - prev_alpha) <= 0.2 * prev_alpha);
        prev_alpha = a;
    }
}

TEST_CASE("c_theta examples", "[ctheta]") {
    const Grid1D g(0.0, 1.0, 100);
    CHECK(c_theta_estimate(constant_obstacle(0.3), FluxSpec::burgers(), g, 1.0) == 0.0);
    CHECK_THAT(c_theta_estimate(parabola_obstacle(0.5), FluxSpec::linear(1.0), g, 1.0), WithinAbs(2.0, 1e-12));
    const Grid1D r(-5.0, 7.0, 2400);
    const auto dip = moving_dip(0.1, 2.0, 1.8, -0.4, 0.5);
    const double c64 = c_theta_estimate(dip, FluxSpec::burgers(), r, 2.0, 64);
    const double c128 = c_theta_estimate(dip, FluxSpec::burgers(), r, 2.0, 128);
    CHECK(std::abs(c128 - c64) < 0.01 * c64);
}

TEST_CASE("linf bound examples", "[linf]") {
    const auto& tr = burgers_box_run();
    const Field& u0 = tr.snapshots.front().u;
    const auto rep = linf_bound_check(tr, u0, 0.0, 1.0);
    CHECK(rep.pass);
    CHECK(rep.margin == 0.0);
    CHECK_THROWS_AS(linf_bound_check(tr, u0, 1.0, 0.0), InvalidArgument);
}

TEST_CASE("multiplier reconstruction examples", "[multiplier]") {
    const auto& tr = burgers_box_run();
    const auto rec = reconstruct_multiplier(tr, constant_obstacle(5.0), FluxSpec::burgers(), 0.1);
    for (double v : rec.values()) CHECK(v == 0.0);
    for (double v : tr.lambda_series.values()) CHECK(v == 0.0);
    // H(theta) = 2x >= 0 on [0, 1]: no reconstruction even in full contact.
    const Grid1D g(0.0, 1.0, 50);
    const auto par = parabola_obstacle(0.5);
    const auto contact = single_snapshot(par.sample(g, 0.0));
    const auto none = reconstruct_multiplier(contact, par, FluxSpec::linear(1.0), 1e-3);
    for (double v : none.values()) CHECK(v == 0.0);
    // A moving obstacle gives a nonnegative reconstruction.
    const auto dip = moving_dip(0.1, 2.0, 0.5, 1.0, 0.5);
    const auto some = reconstruct_multiplier(contact, dip, FluxSpec::burgers(), 10.0);
    for (double v : some.values()) CHECK(v >= 0.0);
}

TEST_CASE("multiplier consistency is a relative gap after t = 0", "[multiplier]") {
    const TimeSeries lam({0.0, 1.0, 2.0}, {5.0, 1.0, 2.0});
    const TimeSeries rec({0.0, 1.0, 2.0}, {0.0, 1.1, 1.8});
    const auto gap = multiplier_consistency(lam, rec, 1e-3);
    CHECK(gap.samples == 2);
    CHECK_THAT(gap.mean_relative_gap, WithinAbs(0.1, 1e-12));
    CHECK_THAT(gap.max_relative_gap, WithinAbs(0.1, 1e-12));
}

TEST_CASE("w11 diagnostics examples", "[w11]") {
    const Grid1D g(-1.0, 2.0, 30);
    const Field u0 = make_initial_field(box_datum(0.0, 1.0), g);
    const auto still = solve_homogeneous(u0, FluxSpec::linear(0.0), 0.0, 1.0, uniform_times(1.0, 4));
    const auto w = w11_diagnostics(still);
    for (double v : w.dt_l1.values()) CHECK(v == 0.0);
    CHECK(w.tv.values().front() == total_variation(u0));
}

TEST_CASE("initial condition recovery examples", "[ic]") {
    const auto& tr = burgers_box_run();
    CHECK(ic_recovery_check(tr, tr.snapshots.front().u) == 0.0);
    // Lipschitz datum: the drift is linear in t1.
    const Grid1D g(-5.0, 7.0, 2400);
    const Field u0 = make_initial_field(bump_datum(0.0, 1.0), g);
    const auto theta = moving_dip(0.1, 2.0, 1.8, -0.4, 0.5);
    auto drift = [&](double t1) {
        SolverConfig cfg;
        cfg.n = 10.0;
        cfg.eps = 0.1;
        cfg.T = t1;
        return ic_recovery_check(run(cfg, u0, theta, FluxSpec::burgers(), {t1}), u0);
    };
    const double d2 = drift(0.02);
    const double d1 = drift(0.01);
    CHECK_THAT(d1 / d2, WithinAbs(0.5, 0.05));
    // Box datum under the heat kernel: O(sqrt(eps t1)) + O(t1).
    const Field box = make_initial_field(box_datum(0.0, 1.0), g);
    const double eps = 0.01, t1 = 0.01;
    const auto heat = solve_homogeneous(box, FluxSpec::burgers(), eps, t1, {t1});
    CHECK(l1_distance(heat.snapshots.back().u, box) <= 2.0 * std::sqrt(eps * t1) + 2.0 * t1);
}
