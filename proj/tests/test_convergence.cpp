#include "catch_amalgamated.hpp"

#include "ocl/convergence.hpp"

#include <cmath>
#include <random>

using namespace ocl;
using Catch::Matchers::WithinAbs;

namespace {

SweepConfig small_sweep(std::vector<double> ns, std::vector<std::size_t> levels) {
    SweepConfig cfg;
    cfg.points = coupled_ladder(ns);
    cfg.grid_levels = std::move(levels);
    cfg.problem.flux = FluxSpec::burgers();
    cfg.problem.obstacle = moving_dip(0.1, 2.0, 1.0, -0.4, 0.5);
    cfg.problem.datum = bump_datum(0.0, 1.0);
    cfg.problem.x_min = -5.0;
    cfg.problem.x_max = 7.0;
    cfg.solver.T = 1.0;
    cfg.output_times = uniform_times(1.0, 8);
    return cfg;
}

} // namespace

TEST_CASE("rate fit examples", "[rate]") {
    const std::vector<double> xs = {10, 40, 160, 640};
    std::vector<double> inv, cst, noisy;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> noise(-0.01, 0.01);
    for (double x : xs) {
        inv.push_back(1.0 / x);
        cst.push_back(3.0);
        noisy.push_back(std::pow(x, -0.5) * (1.0 + noise(rng)));
    }
    CHECK_THAT(rate_fit(xs, inv), WithinAbs(-1.0, 1e-12));
    CHECK_THAT(rate_fit(xs, cst), WithinAbs(0.0, 1e-12));
    CHECK_THAT(rate_fit(xs, noisy), WithinAbs(-0.5, 0.05));
    std::vector<double> scaled;
    for (double y : noisy) scaled.push_back(123.0 * y);
    CHECK_THAT(rate_fit(xs, scaled), WithinAbs(rate_fit(xs, noisy), 1e-12));
    CHECK_THROWS_AS(rate_fit({1, 2, 3}, {1, 0, 1}), InvalidArgument);
    CHECK_THROWS_AS(rate_fit({1, 2}, {1, 1}), InvalidArgument);
}

TEST_CASE("agglomeration preserves mass", "[restrict]") {
    const Grid1D fine(-1.0, 2.0, 64);
    const Grid1D coarse(-1.0, 2.0, 16);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    Field f(fine);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = d(rng);
    CHECK_THAT(integrate(agglomerate(f, coarse)), WithinAbs(integrate(f), 1e-14));
    CHECK_THROWS_AS(agglomerate(f, Grid1D(-1.0, 2.0, 24)), ShapeError);
    CHECK_THROWS_AS(agglomerate(f, Grid1D(0.0, 2.0, 16)), ShapeError);
}

TEST_CASE("sweep config invariants", "[sweep]") {
    auto cfg = small_sweep({10, 40}, {100});
    CHECK_NOTHROW(cfg.validate());
    cfg.points = {{10, 0.1}, {10, 0.05}};
    CHECK_THROWS_AS(cfg.validate(), ConfigurationError);
    cfg.points = {{10, 0.1}, {40, 0.2}};
    CHECK_THROWS_AS(cfg.validate(), ConfigurationError);
    cfg = small_sweep({10}, {100, 300});
    CHECK_THROWS_AS(cfg.validate(), ConfigurationError);
}

TEST_CASE("a single-point sweep is a run", "[sweep]") {
    const auto cfg = small_sweep({40}, {300});
    const auto recs = run_sweep(cfg);
    REQUIRE(recs.size() == 1);
    REQUIRE(recs[0].ok);
    SolverConfig sc = cfg.solver;
    sc.n = 40;
    sc.eps = 1.0 / 40;
    const auto p = cfg.problem.with_cells(300);
    const auto tr = run(sc, p.initial_field(), p.obstacle, p.flux, cfg.output_times);
    const Field& a = recs[0].final_field();
    const Field& b = tr.snapshots.back().u;
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    CHECK(recs[0].max_phi == obstacle_violation(tr, p.obstacle));
}

TEST_CASE("identical sweeps give identical records whatever the thread count", "[sweep]") {
    const auto cfg = small_sweep({10, 40, 160}, {150, 300});
    const auto a = run_sweep(cfg, 1);
    const auto b = run_sweep(cfg, 4);
    REQUIRE(a.size() == 6);
    REQUIRE(b.size() == 6);
    for (std::size_t r = 0; r < a.size(); ++r) {
        REQUIRE(a[r].ok);
        CHECK(a[r].n == b[r].n);
        CHECK(a[r].n_cells == b[r].n_cells);
        CHECK(a[r].max_phi == b[r].max_phi);
        CHECK(a[r].mass_dev == b[r].mass_dev);
        const Field& fa = a[r].final_field();
        const Field& fb = b[r].final_field();
        for (std::size_t i = 0; i < fa.size(); ++i) CHECK(fa[i] == fb[i]);
    }
    CHECK(a[0].n_cells == 150);
    CHECK(a[3].n_cells == 300);
}

TEST_CASE("a failing point is recorded and the rest go on", "[sweep]") {
    auto cfg = small_sweep({10, 40}, {100});
    cfg.problem.x_min = -1.0;
    cfg.problem.x_max = 1.5;   // too small: mass leaks through the boundary
    const auto recs = run_sweep(cfg, 2);
    REQUIRE(recs.size() == 2);
    for (const auto& r : recs) {
        CHECK_FALSE(r.ok);
        CHECK(r.error.find("leak") != std::string::npos);
    }
}

TEST_CASE("cauchy check examples", "[cauchy]") {
    const auto cfg = small_sweep({40}, {300});
    auto recs = run_sweep(cfg);
    recs.push_back(recs[0]);
    recs.push_back(recs[0]);
    const auto same = cauchy_check(recs);
    for (double g : same.gaps) CHECK(g == 0.0);

    const auto ladder = run_sweep(small_sweep({10, 40, 160, 640}, {600}), 2);
    const auto rep = cauchy_check(ladder);
    REQUIRE(rep.gaps.size() == 3);
    CHECK(rep.monotone);
    CHECK(rep.warnings.empty());
}

TEST_CASE("grid refinement gaps shrink at first order", "[cauchy]") {
    const auto recs = run_sweep(small_sweep({40}, {150, 300, 600, 1200}), 2);
    const auto rep = cauchy_check(recs);
    REQUIRE(rep.gaps.size() == 3);
    for (std::size_t i = 1; i < rep.gaps.size(); ++i) {
        const double ratio = rep.gaps[i - 1] / rep.gaps[i];
        CHECK(ratio > 1.4);
        CHECK(ratio < 2.8);
    }
}

TEST_CASE("non-monotone gaps are reported as warnings", "[cauchy]") {
    const auto base = run_sweep(small_sweep({10, 40}, {300}));
    std::vector<SweepRecord> recs = {base[0], base[1], base[1], base[0]};
    const auto rep = cauchy_check(recs);
    CHECK_FALSE(rep.monotone);
    CHECK_FALSE(rep.warnings.empty());
}
