// Runs the reference problem for one penalty strength and prints the main
// diagnostics.  Usage: reference_demo [n] [cells_per_unit]
#include "ocl/compatibility.hpp"
#include "ocl/penalized_solver.hpp"
#include "ocl/verifier.hpp"

#include <cstdio>
#include <cstdlib>

int main(int argc, char** argv) {
    using namespace ocl;
    const double n = argc > 1 ? std::atof(argv[1]) : 160.0;
    const long per = argc > 2 ? std::atol(argv[2]) : 200;

    const Grid1D grid(-5.0, 7.0, static_cast<std::size_t>(12 * per));
    const FluxSpec f = FluxSpec::burgers();
    const ObstacleSpec theta = moving_dip(0.1, 2.0, 1.8, -0.4, 0.5);
    const Field u0 = make_initial_field(bump_datum(0.0, 1.0), grid);

    SolverConfig cfg;
    cfg.n = n;
    cfg.eps = 1.0 / n;
    cfg.T = 2.0;
    const Trajectory tr = run(cfg, u0, theta, f, uniform_times(cfg.T, 40));

    std::printf("n = %g, eps = %g, dx = %g, steps = %zu\n", n, cfg.eps, grid.dx(), tr.steps);
    std::printf("max |mass - 1|        %.3e\n", check_mass(tr));
    std::printf("max int (u - theta)^+ %.3e\n", obstacle_violation(tr, theta));
    std::printf("alpha_hat             %.4f\n", alpha_estimate(tr, theta));
    std::printf("max lambda            %.4f\n", tr.lambda_series.max_value());
    std::printf("\n   t      mass        lambda      phi\n");
    for (std::size_t j = 0; j < tr.snapshots.size(); j += 4) {
        const auto& s = tr.snapshots[j];
        std::printf("%5.2f  %.10f  %.6f  %.3e\n", s.t, integrate(s.u), tr.lambda_series.at(s.t),
                    excess_mass(s.u, theta.sample(grid, s.t)));
    }
    return 0;
}
