#pragma once

#include "ocl/errors.hpp"
#include "ocl/mesh_field.hpp"
#include "ocl/model.hpp"
#include "ocl/parallel.hpp"
#include "ocl/penalized_solver.hpp"
#include "ocl/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace ocl {

struct SweepPoint {
    double n = 1.0;
    double eps = 0.0;
};

/// (n, c / n) for every n.
inline std::vector<SweepPoint> coupled_ladder(const std::vector<double>& ns, double c = 1.0) {
    std::vector<SweepPoint> out;
    for (double n : ns) {
        if (!(n > 0.0)) throw InvalidArgument("coupled_ladder: n must be positive");
        out.push_back({n, c / n});
    }
    return out;
}

struct SweepConfig {
    std::vector<SweepPoint> points;
    std::vector<std::size_t> grid_levels;   // cell counts, each twice the previous
    ProblemSpec problem;
    SolverConfig solver;                    // n and eps are taken from the points
    std::vector<double> output_times;
    std::optional<EntropyTestConfig> entropy;
    std::size_t w11_stride = 1;             // snapshots per dt-L1 difference

    void validate() const {
        if (points.empty()) throw ConfigurationError("sweep: no (n, eps) points");
        for (std::size_t i = 1; i < points.size(); ++i) {
            if (!(points[i].n > points[i - 1].n)) throw ConfigurationError("sweep: n must be strictly increasing");
            if (!(points[i].eps <= points[i - 1].eps)) throw ConfigurationError("sweep: eps must be nonincreasing");
        }
        if (grid_levels.empty()) throw ConfigurationError("sweep: no grid levels");
        for (std::size_t i = 1; i < grid_levels.size(); ++i) {
            if (grid_levels[i] != 2 * grid_levels[i - 1]) {
                throw ConfigurationError("sweep: grid levels must be successive dx halvings");
            }
        }
        if (w11_stride == 0) throw ConfigurationError("sweep: w11_stride must be >= 1");
        if (output_times.empty()) throw ConfigurationError("sweep: no output times");
    }
};

struct SweepRecord {
    double n = 0.0;
    double eps = 0.0;
    double dx = 0.0;
    std::size_t n_cells = 0;
    bool ok = false;
    std::string error;
    std::optional<Trajectory> trajectory;
    double alpha_hat = std::numeric_limits<double>::quiet_NaN();
    double max_phi = std::numeric_limits<double>::quiet_NaN();
    double mass_dev = std::numeric_limits<double>::quiet_NaN();
    double tv_max = std::numeric_limits<double>::quiet_NaN();
    double dt_l1_max = std::numeric_limits<double>::quiet_NaN();
    double entropy_min = std::numeric_limits<double>::quiet_NaN();
    double K_hat = std::numeric_limits<double>::quiet_NaN();

    [[nodiscard]] const Field& final_field() const {
        if (!trajectory || trajectory->snapshots.empty()) {
            throw SamplingError("sweep record has no final field");
        }
        return trajectory->snapshots.back().u;
    }
};

/// max over snapshot pairs (j, j + stride) of ||u_{j+stride} - u_j||_1 / dt.
inline double max_dt_l1(const Trajectory& traj, std::size_t stride) {
    if (stride == 0) throw InvalidArgument("max_dt_l1: stride must be >= 1");
    double best = 0.0;
    for (std::size_t j = 0; j + stride < traj.snapshots.size(); j += stride) {
        const auto& a = traj.snapshots[j];
        const auto& b = traj.snapshots[j + stride];
        best = std::max(best, l1_distance(b.u, a.u) / (b.t - a.t));
    }
    return best;
}

/// Runs one point and fills every diagnostic.  Errors are captured in the
/// record.
inline SweepRecord run_point(const SweepConfig& cfg, const SweepPoint& pt, std::size_t cells) {
    SweepRecord rec;
    rec.n = pt.n;
    rec.eps = pt.eps;
    rec.n_cells = cells;
    try {
        const ProblemSpec prob = cfg.problem.with_cells(cells);
        const Grid1D g = prob.grid();
        rec.dx = g.dx();
        SolverConfig sc = cfg.solver;
        sc.n = pt.n;
        sc.eps = pt.eps;
        const Field u0 = prob.initial_field();
        Trajectory tr = run(sc, u0, prob.obstacle, prob.flux, cfg.output_times);
        rec.alpha_hat = alpha_estimate(tr, prob.obstacle);
        rec.max_phi = obstacle_violation(tr, prob.obstacle);
        rec.mass_dev = check_mass(tr);
        const auto w = w11_diagnostics(tr);
        rec.tv_max = w.tv.max_value();
        rec.dt_l1_max = max_dt_l1(tr, cfg.w11_stride);
        if (cfg.entropy) {
            rec.entropy_min = entropy_check(tr, prob.obstacle, prob.flux, u0, *cfg.entropy, 1).min_residual;
        }
        rec.trajectory = std::move(tr);
        rec.ok = true;
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
    }
    return rec;
}

/// One record per (grid level, point), ordered by (n_cells, n, eps).  Points
/// run concurrently; a failure at one point is recorded and the rest go on.
inline std::vector<SweepRecord> run_sweep(const SweepConfig& cfg, std::size_t threads = 1) {
    cfg.validate();
    std::vector<std::pair<std::size_t, SweepPoint>> jobs;
    for (std::size_t cells : cfg.grid_levels) {
        for (const auto& p : cfg.points) jobs.emplace_back(cells, p);
    }
    std::vector<SweepRecord> out(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t i) {
        out[i] = run_point(cfg, jobs[i].second, jobs[i].first);
    });
    std::stable_sort(out.begin(), out.end(), [](const SweepRecord& a, const SweepRecord& b) {
        return std::tie(a.n_cells, a.n, a.eps) < std::tie(b.n_cells, b.n, b.eps);
    });
    return out;
}

/// Least-squares slope of log ys against log xs.
inline double rate_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw InvalidArgument("rate_fit: xs and ys differ in length");
    if (xs.size() < 3) throw InvalidArgument("rate_fit: need at least 3 points");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0) || !std::isfinite(xs[i]) || !std::isfinite(ys[i])) {
            throw InvalidArgument("rate_fit: inputs must be finite and positive");
        }
    }
    const double m = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += std::log(xs[i]);
        my += std::log(ys[i]);
    }
    mx /= m;
    my /= m;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = std::log(xs[i]) - mx;
        sxy += dx * (std::log(ys[i]) - my);
        sxx += dx * dx;
    }
    if (!(sxx > 0.0)) throw InvalidArgument("rate_fit: xs must not all coincide");
    return sxy / sxx;
}

/// Fine-to-coarse cell averaging onto `coarse`.  Requires the same extent and
/// an integer cell ratio; preserves sum(u) * dx.
inline Field agglomerate(const Field& fine, const Grid1D& coarse) {
    const Grid1D& g = fine.grid();
    const double tol = 1e-12 * std::max(1.0, g.length());
    if (std::abs(g.x_min() - coarse.x_min()) > tol || std::abs(g.x_max() - coarse.x_max()) > tol) {
        throw ShapeError("agglomerate: grids cover different intervals");
    }
    if (g.n_cells() % coarse.n_cells() != 0) {
        throw ShapeError("agglomerate: fine cell count is not a multiple of the coarse one");
    }
    const std::size_t r = g.n_cells() / coarse.n_cells();
    Field out(coarse);
    for (std::size_t i = 0; i < coarse.n_cells(); ++i) {
        CompensatedSum acc;
        for (std::size_t k = 0; k < r; ++k) acc.add(fine[i * r + k]);
        out[i] = acc.value() / static_cast<double>(r);
    }
    return out;
}

/// L1 distance on the coarser of the two grids.
inline double cross_grid_distance(const Field& a, const Field& b) {
    if (a.grid() == b.grid()) return l1_distance(a, b);
    if (a.size() > b.size()) return l1_distance(agglomerate(a, b.grid()), b);
    return l1_distance(a, agglomerate(b, a.grid()));
}

struct CauchyReport {
    std::vector<double> gaps;   // gaps[i] = distance(record i, record i + 1)
    bool monotone = true;
    std::vector<std::string> warnings;
};

/// Successive L1 gaps between final fields.  Non-monotone gaps are reported
/// as warnings.
inline CauchyReport cauchy_check(const std::vector<SweepRecord>& records) {
    CauchyReport rep;
    for (std::size_t i = 0; i + 1 < records.size(); ++i) {
        if (!records[i].ok || !records[i + 1].ok) {
            rep.gaps.push_back(std::numeric_limits<double>::quiet_NaN());
            rep.warnings.push_back("gap " + std::to_string(i) + ": failed point");
            continue;
        }
        rep.gaps.push_back(cross_grid_distance(records[i].final_field(), records[i + 1].final_field()));
    }
    for (std::size_t i = 1; i < rep.gaps.size(); ++i) {
        if (!(rep.gaps[i] < rep.gaps[i - 1])) {
            rep.monotone = false;
            rep.warnings.push_back("gap " + std::to_string(i) + " does not decrease (" +
                                   format_real(rep.gaps[i - 1]) + " -> " + format_real(rep.gaps[i]) + ")");
        }
    }
    return rep;
}

} // namespace ocl
