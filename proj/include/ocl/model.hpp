#pragma once

#include "ocl/errors.hpp"
#include "ocl/mesh_field.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace ocl {

// ---------------------------------------------------------------------------
// Flux
// ---------------------------------------------------------------------------

enum class FluxKind { linear, burgers, cubic };

inline std::string to_string(FluxKind k) {
    switch (k) {
    case FluxKind::linear: return "linear";
    case FluxKind::burgers: return "burgers";
    case FluxKind::cubic: return "cubic";
    }
    return "?";
}

struct FluxValue {
    double value;
    bool clamped;  // argument was outside the declared range [0, L]
};

/// Scalar flux with f(0) = 0 and closed-form derivatives.
///
/// `linear`: f(u) = a u.  `burgers`: f(u) = u^2/2.  `cubic`: f(u) = c u^3.
/// The declared working range is [0, range]; arguments outside it are clamped
/// before evaluation (see eval_flux for the flagged variant).
class FluxSpec {
public:
    static FluxSpec linear(double a, double range = 4.0) { return {FluxKind::linear, a, range}; }
    static FluxSpec burgers(double range = 4.0) { return {FluxKind::burgers, 1.0, range}; }
    static FluxSpec cubic(double c, double range = 4.0) { return {FluxKind::cubic, c, range}; }

    [[nodiscard]] FluxKind kind() const noexcept { return kind_; }
    [[nodiscard]] double parameter() const noexcept { return param_; }
    [[nodiscard]] double range() const noexcept { return range_; }

    [[nodiscard]] bool in_range(double u) const noexcept { return u >= 0.0 && u <= range_; }
    [[nodiscard]] double clamp(double u) const noexcept { return std::clamp(u, 0.0, range_); }

    [[nodiscard]] double f(double u) const noexcept {
        u = clamp(u);
        switch (kind_) {
        case FluxKind::linear: return param_ * u;
        case FluxKind::burgers: return 0.5 * u * u;
        case FluxKind::cubic: return param_ * u * u * u;
        }
        return 0.0;
    }
    [[nodiscard]] double df(double u) const noexcept {
        u = clamp(u);
        switch (kind_) {
        case FluxKind::linear: return param_;
        case FluxKind::burgers: return u;
        case FluxKind::cubic: return 3.0 * param_ * u * u;
        }
        return 0.0;
    }
    [[nodiscard]] double d2f(double u) const noexcept {
        u = clamp(u);
        switch (kind_) {
        case FluxKind::linear: return 0.0;
        case FluxKind::burgers: return 1.0;
        case FluxKind::cubic: return 6.0 * param_ * u;
        }
        return 0.0;
    }

    /// sup |f'| over [lo, hi] (both ends inside the working range after clamping).
    /// |f'| is quasi-convex for every family, so the sup sits at an endpoint.
    [[nodiscard]] double max_speed(double lo, double hi) const noexcept {
        return std::max(std::abs(df(lo)), std::abs(df(hi)));
    }

private:
    FluxSpec(FluxKind k, double p, double range) : kind_(k), param_(p), range_(range) {
        if (!std::isfinite(p)) throw InvalidArgument("FluxSpec: non-finite parameter");
        if (!std::isfinite(range) || !(range > 0.0)) {
            throw InvalidArgument("FluxSpec: declared range L must be finite and positive");
        }
    }

    FluxKind kind_;
    double param_;
    double range_;
};

inline void require_finite(double u, const char* what) {
    if (!std::isfinite(u)) throw InvalidArgument(std::string(what) + ": non-finite argument");
}

inline FluxValue eval_flux(const FluxSpec& spec, double u) {
    require_finite(u, "eval_flux");
    return {spec.f(u), !spec.in_range(u)};
}
inline FluxValue eval_flux_prime(const FluxSpec& spec, double u) {
    require_finite(u, "eval_flux_prime");
    return {spec.df(u), !spec.in_range(u)};
}
inline FluxValue eval_flux_second(const FluxSpec& spec, double u) {
    require_finite(u, "eval_flux_second");
    return {spec.d2f(u), !spec.in_range(u)};
}

struct LipschitzBounds {
    double M;        // sup |f'|
    double M_prime;  // sup |f''|
};

/// Analytic sup |f'| and sup |f''| over [lo, hi], without range clamping.
inline LipschitzBounds lipschitz_bounds(const FluxSpec& spec, double lo, double hi) {
    require_finite(lo, "lipschitz_bounds");
    require_finite(hi, "lipschitz_bounds");
    if (lo > hi) throw InvalidArgument("lipschitz_bounds: empty range");
    const double p = spec.parameter();
    const double amax = std::max(std::abs(lo), std::abs(hi));
    switch (spec.kind()) {
    case FluxKind::linear: return {std::abs(p), 0.0};
    case FluxKind::burgers: return {amax, 1.0};
    case FluxKind::cubic: return {3.0 * std::abs(p) * amax * amax, 6.0 * std::abs(p) * amax};
    }
    return {0.0, 0.0};
}

inline LipschitzBounds lipschitz_bounds(const FluxSpec& spec) {
    return lipschitz_bounds(spec, 0.0, spec.range());
}

// ---------------------------------------------------------------------------
// Obstacle
// ---------------------------------------------------------------------------

using SpaceTimeFn = std::function<double(double t, double x)>;

/// Obstacle theta(t, x) >= lower > 0 with its first and second derivatives.
struct ObstacleSpec {
    std::string family;
    std::vector<std::pair<std::string, double>> parameters;
    double lower = 0.0;
    SpaceTimeFn value;
    SpaceTimeFn dt;
    SpaceTimeFn dx;
    SpaceTimeFn dxx;

    [[nodiscard]] Field sample(const Grid1D& grid, double t) const {
        Field out(grid);
        for (std::size_t i = 0; i < grid.n_cells(); ++i) out[i] = value(t, grid.center(i));
        return out;
    }
};

inline void require_positive_lower(double lower) {
    if (!std::isfinite(lower) || !(lower > 0.0)) {
        throw ValidationError("obstacle: requires theta >= theta_lower > 0 (got theta_lower = " +
                              format_real(lower) + ")");
    }
}

inline ObstacleSpec constant_obstacle(double theta_bar) {
    require_positive_lower(theta_bar);
    ObstacleSpec s;
    s.family = "constant";
    s.parameters = {{"value", theta_bar}};
    s.lower = theta_bar;
    s.value = [theta_bar](double, double) { return theta_bar; };
    s.dt = [](double, double) { return 0.0; };
    s.dx = [](double, double) { return 0.0; };
    s.dxx = [](double, double) { return 0.0; };
    return s;
}

/// Gaussian dip of depth `amplitude` whose floor `lower` travels with
/// x0(t) = center + speed * t:
///   theta = lower + amplitude * (1 - exp(-((x - x0(t)) / width)^2)).
inline ObstacleSpec moving_dip(double lower, double amplitude, double center, double speed,
                               double width) {
    require_positive_lower(lower);
    if (!(amplitude >= 0.0) || !(width > 0.0) || !std::isfinite(center) || !std::isfinite(speed)) {
        throw ValidationError("moving_dip: require amplitude >= 0, width > 0, finite center/speed");
    }
    ObstacleSpec s;
    s.family = "moving_dip";
    s.parameters = {{"lower", lower}, {"amplitude", amplitude}, {"center", center},
                    {"speed", speed}, {"width", width}};
    s.lower = lower;
    auto arg = [=](double t, double x) { return (x - center - speed * t) / width; };
    s.value = [=](double t, double x) {
        const double z = arg(t, x);
        return lower + amplitude * (1.0 - std::exp(-z * z));
    };
    s.dx = [=](double t, double x) {
        const double z = arg(t, x);
        return amplitude * std::exp(-z * z) * 2.0 * z / width;
    };
    s.dt = [=](double t, double x) {
        const double z = arg(t, x);
        return -speed * amplitude * std::exp(-z * z) * 2.0 * z / width;
    };
    s.dxx = [=](double t, double x) {
        const double z = arg(t, x);
        return amplitude * std::exp(-z * z) * (2.0 / (width * width)) * (1.0 - 2.0 * z * z);
    };
    return s;
}

namespace detail {
inline double softplus(double z) noexcept {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}
inline double logistic(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}
} // namespace detail

/// Stationary smoothed ramp: flat at `lower` left of `window_lo`, rising with
/// `slope` across [window_lo, window_hi], flat again to the right.  Corners are
/// rounded on the scale `smoothing`.
inline ObstacleSpec ramp_obstacle(double lower, double slope, double window_lo, double window_hi,
                                  double smoothing) {
    require_positive_lower(lower);
    if (!(slope >= 0.0) || !(window_hi > window_lo) || !(smoothing > 0.0)) {
        throw ValidationError("ramp: require slope >= 0, window_lo < window_hi, smoothing > 0");
    }
    ObstacleSpec s;
    s.family = "ramp";
    s.parameters = {{"lower", lower}, {"slope", slope}, {"window_lo", window_lo},
                    {"window_hi", window_hi}, {"smoothing", smoothing}};
    s.lower = lower;
    const double w = smoothing;
    s.value = [=](double, double x) {
        return lower + slope * w *
                           (detail::softplus((x - window_lo) / w) -
                            detail::softplus((x - window_hi) / w));
    };
    s.dt = [](double, double) { return 0.0; };
    s.dx = [=](double, double x) {
        return slope * (detail::logistic((x - window_lo) / w) - detail::logistic((x - window_hi) / w));
    };
    s.dxx = [=](double, double x) {
        const double a = detail::logistic((x - window_lo) / w);
        const double b = detail::logistic((x - window_hi) / w);
        return slope / w * (a * (1.0 - a) - b * (1.0 - b));
    };
    return s;
}

/// H(theta) = d_t theta + d_x f(theta) = d_t theta + f'(theta) d_x theta.
inline double obstacle_operator(const ObstacleSpec& theta, const FluxSpec& f, double t, double x) {
    require_finite(t, "obstacle_operator");
    require_finite(x, "obstacle_operator");
    return theta.dt(t, x) + f.df(theta.value(t, x)) * theta.dx(t, x);
}

/// H of the scaled obstacle k*theta, used by the entropy inequalities.
inline double scaled_obstacle_operator(const ObstacleSpec& theta, const FluxSpec& f, double k,
                                       double t, double x) {
    return k * theta.dt(t, x) + f.df(k * theta.value(t, x)) * k * theta.dx(t, x);
}

inline double negative_part(double v) noexcept { return std::max(-v, 0.0); }

struct ObstacleCheck {
    double min_value;        // min of theta over the lattice
    double max_mass_jump;    // max |int theta(t+h) - int theta(t)| over lattice steps
    double gradient_w11;     // int int |theta_t| + |theta_x| + |theta_xx| over the box
};

/// Samples theta on an (n_times + 1) x n_cells lattice of [0, T] x grid and
/// enforces theta >= lower.  The derivative norm is only available on the
/// truncated box and is recorded, not bounded.
inline ObstacleCheck validate_obstacle(const ObstacleSpec& theta, const Grid1D& grid, double T,
                                       std::size_t n_times = 64) {
    require_positive_lower(theta.lower);
    if (!(T > 0.0)) throw InvalidArgument("validate_obstacle: T must be positive");
    ObstacleCheck out{std::numeric_limits<double>::infinity(), 0.0, 0.0};
    double prev_mass = 0.0;
    const double ht = T / static_cast<double>(n_times);
    CompensatedSum w11;
    for (std::size_t j = 0; j <= n_times; ++j) {
        const double t = ht * static_cast<double>(j);
        CompensatedSum mass;
        for (std::size_t i = 0; i < grid.n_cells(); ++i) {
            const double x = grid.center(i);
            const double v = theta.value(t, x);
            if (!std::isfinite(v)) throw ValidationError("obstacle: non-finite value");
            out.min_value = std::min(out.min_value, v);
            mass.add(v);
            w11.add(std::abs(theta.dt(t, x)) + std::abs(theta.dx(t, x)) + std::abs(theta.dxx(t, x)));
        }
        const double m = mass.value() * grid.dx();
        if (j > 0) out.max_mass_jump = std::max(out.max_mass_jump, std::abs(m - prev_mass));
        prev_mass = m;
    }
    out.gradient_w11 = w11.value() * grid.dx() * ht;
    if (out.min_value < theta.lower - 1e-12) {
        throw ValidationError("obstacle: requires theta >= theta_lower > 0; sampled minimum " +
                              format_real(out.min_value) + " < theta_lower " +
                              format_real(theta.lower));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Initial data
// ---------------------------------------------------------------------------

/// Nonnegative initial datum before discretisation and normalisation.
struct InitialData {
    std::string family;
    std::vector<std::pair<std::string, double>> parameters;
    double support_lo = 0.0;
    double support_hi = 0.0;
    std::function<double(double)> value;
    /// Exact cell average over [a, b]; empty for families averaged by quadrature.
    std::function<double(double a, double b)> exact_average;
};

inline InitialData piecewise_constant_datum(std::vector<double> breaks, std::vector<double> values) {
    if (breaks.size() < 2 || values.size() + 1 != breaks.size()) {
        throw ValidationError("piecewise_constant: need k+1 breaks for k values");
    }
    for (std::size_t i = 1; i < breaks.size(); ++i) {
        if (!(breaks[i] > breaks[i - 1])) {
            throw ValidationError("piecewise_constant: breaks must increase");
        }
    }
    for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ValidationError("piecewise_constant: values must be finite and >= 0");
        }
    }
    InitialData d;
    d.family = "piecewise_constant";
    d.support_lo = breaks.front();
    d.support_hi = breaks.back();
    d.value = [breaks, values](double x) {
        if (x < breaks.front() || x >= breaks.back()) return 0.0;
        const auto it = std::upper_bound(breaks.begin(), breaks.end(), x);
        return values[static_cast<std::size_t>(it - breaks.begin()) - 1];
    };
    d.exact_average = [breaks, values](double a, double b) {
        CompensatedSum acc;
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double lo = std::max(a, breaks[k]);
            const double hi = std::min(b, breaks[k + 1]);
            if (hi > lo) acc.add(values[k] * (hi - lo));
        }
        return acc.value() / (b - a);
    };
    return d;
}

/// Indicator of [lo, hi] scaled to unit mass.
inline InitialData box_datum(double lo, double hi) {
    if (!(hi > lo)) throw ValidationError("box: require lo < hi");
    auto d = piecewise_constant_datum({lo, hi}, {1.0 / (hi - lo)});
    d.family = "box";
    d.parameters = {{"lo", lo}, {"hi", hi}};
    return d;
}

/// cos^2 bump of half-width h centred at c; unit mass before discretisation.
inline InitialData bump_datum(double center, double half_width) {
    if (!(half_width > 0.0) || !std::isfinite(center)) {
        throw ValidationError("bump: require half_width > 0");
    }
    InitialData d;
    d.family = "bump";
    d.parameters = {{"center", center}, {"half_width", half_width}};
    d.support_lo = center - half_width;
    d.support_hi = center + half_width;
    d.value = [=](double x) {
        const double z = (x - center) / half_width;
        if (std::abs(z) >= 1.0) return 0.0;
        const double c = std::cos(0.5 * std::numbers::pi * z);
        return c * c / half_width;
    };
    return d;
}

/// Piecewise-linear interpolation of (x_k, v_k), zero outside [x_0, x_last].
inline InitialData table_datum(std::vector<double> xs, std::vector<double> vs) {
    if (xs.size() < 2 || xs.size() != vs.size()) {
        throw ValidationError("custom_table: need >= 2 points with matching values");
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i > 0 && !(xs[i] > xs[i - 1])) throw ValidationError("custom_table: x must increase");
        if (!(vs[i] >= 0.0) || !std::isfinite(vs[i])) {
            throw ValidationError("custom_table: values must be finite and >= 0");
        }
    }
    InitialData d;
    d.family = "custom_table";
    d.support_lo = xs.front();
    d.support_hi = xs.back();
    d.value = [xs, vs](double x) {
        if (x < xs.front() || x > xs.back()) return 0.0;
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        if (it == xs.end()) return vs.back();
        const auto j = static_cast<std::size_t>(it - xs.begin());
        const double w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
        return (1.0 - w) * vs[j - 1] + w * vs[j];
    };
    return d;
}

/// Cell averages of the datum (exact for piecewise-constant families, 5-point
/// Gauss-Legendre per cell otherwise).  Not normalised.
inline Field discretize(const InitialData& datum, const Grid1D& grid) {
    static constexpr double nodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                        0.5384693101056831, 0.9061798459386640};
    static constexpr double weights[5] = {0.2369268850561891, 0.4786286704993665,
                                          0.5688888888888889, 0.4786286704993665,
                                          0.2369268850561891};
    Field out(grid);
    for (std::size_t i = 0; i < grid.n_cells(); ++i) {
        const double a = grid.left_face(i);
        const double b = a + grid.dx();
        if (datum.exact_average) {
            out[i] = datum.exact_average(a, b);
            continue;
        }
        double acc = 0.0;
        for (int q = 0; q < 5; ++q) {
            acc += weights[q] * datum.value(0.5 * (a + b) + 0.5 * grid.dx() * nodes[q]);
        }
        out[i] = 0.5 * acc;
    }
    out.validate();
    return out;
}

/// Rescales a nonnegative field to unit mass.
inline Field normalize_mass(const Field& u0) {
    for (std::size_t i = 0; i < u0.size(); ++i) {
        if (u0[i] < 0.0) {
            throw DegenerateDatum("normalize_mass: negative value at cell " + std::to_string(i));
        }
    }
    const double m = integrate(u0);
    if (!(m > 0.0)) throw DegenerateDatum("normalize_mass: datum has zero mass");
    if (m == 1.0) return u0;
    return (1.0 / m) * u0;
}

/// Discretises, checks u0 >= 0 and TV(u0) < inf, and normalises to unit mass.
inline Field make_initial_field(const InitialData& datum, const Grid1D& grid) {
    Field u0 = normalize_mass(discretize(datum, grid));
    if (!std::isfinite(total_variation(u0))) throw ValidationError("initial datum: infinite TV");
    return u0;
}

// ---------------------------------------------------------------------------
// Problem
// ---------------------------------------------------------------------------

/// Flux, obstacle, datum and the truncated domain they live on.
struct ProblemSpec {
    FluxSpec flux = FluxSpec::burgers();
    ObstacleSpec obstacle;
    InitialData datum;
    double x_min = 0.0;
    double x_max = 1.0;
    std::size_t n_cells = 100;

    [[nodiscard]] Grid1D grid() const { return Grid1D(x_min, x_max, n_cells); }
    [[nodiscard]] Field initial_field() const { return make_initial_field(datum, grid()); }
    [[nodiscard]] ProblemSpec with_cells(std::size_t cells) const {
        ProblemSpec p = *this;
        p.n_cells = cells;
        return p;
    }

    /// Obstacle bounds on [0, T] and a well-formed datum.
    void validate(double T) const {
        validate_obstacle(obstacle, grid(), T);
        (void)initial_field();
    }

    /// 0 <= u0 <= theta(0) cellwise, required by the constrained problem but
    /// not by the local fixed-point mode.
    void require_datum_below_obstacle() const {
        const Grid1D g = grid();
        const Field u0 = initial_field();
        const Field th0 = obstacle.sample(g, 0.0);
        for (std::size_t i = 0; i < u0.size(); ++i) {
            if (u0[i] > th0[i] * (1.0 + 1e-12)) {
                throw ValidationError("problem: requires 0 <= u0 <= theta(0); violated at x = " +
                                      format_real(g.center(i)));
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Regularised sign
// ---------------------------------------------------------------------------

/// Lipschitz approximations of sgn and (.)^+ on the scale delta.
class RegularizedSign {
public:
    explicit RegularizedSign(double delta) : delta_(delta) {
        if (!(delta > 0.0) || !std::isfinite(delta)) {
            throw InvalidArgument("RegularizedSign: delta must be positive");
        }
    }
    [[nodiscard]] double delta() const noexcept { return delta_; }

    /// Linear on [-delta, delta], +-1 outside.
    [[nodiscard]] double sgn(double u) const noexcept { return std::clamp(u / delta_, -1.0, 1.0); }

    /// int_0^u sgn_delta(v)^+ dv
    [[nodiscard]] double i_delta(double u) const noexcept {
        if (u <= 0.0) return 0.0;
        if (u <= delta_) return 0.5 * u * u / delta_;
        return u - 0.5 * delta_;
    }

    /// u * sgn_delta(u)^+
    [[nodiscard]] double pos_delta(double u) const noexcept { return u * std::max(sgn(u), 0.0); }

private:
    double delta_;
};

inline double sgn_delta(const RegularizedSign& rs, double u) { return rs.sgn(u); }
inline double i_delta(const RegularizedSign& rs, double u) { return rs.i_delta(u); }
inline double pos_delta(const RegularizedSign& rs, double u) { return rs.pos_delta(u); }

} // namespace ocl
