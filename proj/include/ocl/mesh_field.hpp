#pragma once

#include "ocl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ocl {

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            carry_ += (sum_ - t) + x;
        } else {
            carry_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + carry_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

/// Uniform 1-D mesh on [x_min, x_max] with n_cells cells.
class Grid1D {
public:
    Grid1D(double x_min, double x_max, std::size_t n_cells)
        : x_min_(x_min), x_max_(x_max), n_cells_(n_cells) {
        if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_max > x_min)) {
            throw InvalidArgument("Grid1D: require finite x_min < x_max");
        }
        if (n_cells < 4) {
            throw InvalidArgument("Grid1D: require n_cells >= 4");
        }
        dx_ = (x_max_ - x_min_) / static_cast<double>(n_cells_);
        if (!(dx_ > 0.0)) {
            throw InvalidArgument("Grid1D: degenerate cell width");
        }
    }

    [[nodiscard]] double x_min() const noexcept { return x_min_; }
    [[nodiscard]] double x_max() const noexcept { return x_max_; }
    [[nodiscard]] std::size_t n_cells() const noexcept { return n_cells_; }
    [[nodiscard]] double dx() const noexcept { return dx_; }
    [[nodiscard]] double length() const noexcept { return x_max_ - x_min_; }

    [[nodiscard]] double center(std::size_t i) const noexcept {
        return x_min_ + (static_cast<double>(i) + 0.5) * dx_;
    }
    [[nodiscard]] double left_face(std::size_t i) const noexcept {
        return x_min_ + static_cast<double>(i) * dx_;
    }

    friend bool operator==(const Grid1D&, const Grid1D&) = default;

private:
    double x_min_;
    double x_max_;
    std::size_t n_cells_;
    double dx_ = 0.0;
};

/// Cell averages of a scalar on a Grid1D.
class Field {
public:
    explicit Field(Grid1D grid) : grid_(grid), values_(grid.n_cells(), 0.0) {}

    Field(Grid1D grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.n_cells()) {
            throw ShapeError("Field: value count " + std::to_string(values_.size()) +
                             " does not match n_cells " + std::to_string(grid_.n_cells()));
        }
        validate();
    }

    template <class Fn>
    static Field from_function(const Grid1D& grid, Fn&& fn) {
        std::vector<double> v(grid.n_cells());
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = fn(grid.center(i));
        }
        return Field(grid, std::move(v));
    }

    static Field constant(const Grid1D& grid, double value) {
        return Field(grid, std::vector<double>(grid.n_cells(), value));
    }

    [[nodiscard]] const Grid1D& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::span<double> mutable_values() noexcept { return values_; }
    [[nodiscard]] const std::vector<double>& data() const noexcept { return values_; }

    double operator[](std::size_t i) const noexcept { return values_[i]; }
    double& operator[](std::size_t i) noexcept { return values_[i]; }

    /// Throws InvalidField when any value is NaN or infinite.
    void validate() const {
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                throw InvalidField("Field: non-finite value at cell " + std::to_string(i));
            }
        }
    }

    friend bool operator==(const Field&, const Field&) = default;

private:
    Grid1D grid_;
    std::vector<double> values_;
};

inline void require_same_grid(const Field& a, const Field& b, const char* what) {
    if (!(a.grid() == b.grid())) {
        throw ShapeError(std::string(what) + ": fields live on different grids");
    }
}

inline Field operator+(const Field& a, const Field& b) {
    require_same_grid(a, b, "operator+");
    Field out(a.grid());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline Field operator-(const Field& a, const Field& b) {
    require_same_grid(a, b, "operator-");
    Field out(a.grid());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline Field operator*(double s, const Field& a) {
    Field out(a.grid());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
    return out;
}

/// Sum of u_i * dx with compensated summation.
inline double integrate(const Field& field) {
    field.validate();
    CompensatedSum acc;
    for (double v : field.values()) acc.add(v);
    return acc.value() * field.grid().dx();
}

inline double total_variation(const Field& field) {
    field.validate();
    CompensatedSum acc;
    const auto v = field.values();
    for (std::size_t i = 0; i + 1 < v.size(); ++i) acc.add(std::abs(v[i + 1] - v[i]));
    return acc.value();
}

inline double l1_distance(const Field& a, const Field& b) {
    require_same_grid(a, b, "l1_distance");
    CompensatedSum acc;
    for (std::size_t i = 0; i < a.size(); ++i) acc.add(std::abs(a[i] - b[i]));
    return acc.value() * a.grid().dx();
}

inline double l_inf_norm(const Field& field) {
    double m = 0.0;
    for (double v : field.values()) m = std::max(m, std::abs(v));
    return m;
}

inline Field positive_part(const Field& field) {
    Field out(field.grid());
    for (std::size_t i = 0; i < field.size(); ++i) out[i] = std::max(field[i], 0.0);
    return out;
}

/// Integral of (a - b)^+ without materialising the difference.
inline double excess_mass(const Field& a, const Field& b) {
    require_same_grid(a, b, "excess_mass");
    CompensatedSum acc;
    for (std::size_t i = 0; i < a.size(); ++i) acc.add(std::max(a[i] - b[i], 0.0));
    return acc.value() * a.grid().dx();
}

/// Shortest round-trip decimal text for a double (17 significant digits).
inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes rows "x_center,value".
inline void write_field_csv(std::ostream& os, const Field& field) {
    os << "x,value\n";
    for (std::size_t i = 0; i < field.size(); ++i) {
        os << format_real(field.grid().center(i)) << ',' << format_real(field[i]) << '\n';
    }
}

/// Strictly increasing sample times with one value per time.
class TimeSeries {
public:
    TimeSeries() = default;
    TimeSeries(std::vector<double> times, std::vector<double> values)
        : times_(std::move(times)), values_(std::move(values)) {
        if (times_.size() != values_.size()) {
            throw ShapeError("TimeSeries: times and values differ in length");
        }
        for (std::size_t i = 1; i < times_.size(); ++i) {
            if (!(times_[i] > times_[i - 1])) {
                throw InvalidArgument("TimeSeries: times must be strictly increasing");
            }
        }
    }

    void push_back(double t, double value) {
        if (!times_.empty() && !(t > times_.back())) {
            throw InvalidArgument("TimeSeries: times must be strictly increasing");
        }
        times_.push_back(t);
        values_.push_back(value);
    }

    [[nodiscard]] std::size_t size() const noexcept { return times_.size(); }
    [[nodiscard]] bool empty() const noexcept { return times_.empty(); }
    [[nodiscard]] const std::vector<double>& times() const noexcept { return times_; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }

    /// Linear interpolation; throws SamplingError outside [front, back].
    [[nodiscard]] double at(double t) const {
        if (times_.empty()) throw SamplingError("TimeSeries: empty series");
        const double tol = 1e-12 * std::max(1.0, std::abs(times_.back()));
        if (t < times_.front() - tol || t > times_.back() + tol) {
            throw SamplingError("TimeSeries: t=" + format_real(t) + " outside sampled range");
        }
        if (t <= times_.front()) return values_.front();
        if (t >= times_.back()) return values_.back();
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        const auto j = static_cast<std::size_t>(it - times_.begin());
        const double w = (t - times_[j - 1]) / (times_[j] - times_[j - 1]);
        return (1.0 - w) * values_[j - 1] + w * values_[j];
    }

    [[nodiscard]] double max_value() const {
        if (values_.empty()) throw SamplingError("TimeSeries: empty series");
        return *std::max_element(values_.begin(), values_.end());
    }
    [[nodiscard]] double min_value() const {
        if (values_.empty()) throw SamplingError("TimeSeries: empty series");
        return *std::min_element(values_.begin(), values_.end());
    }

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

private:
    std::vector<double> times_;
    std::vector<double> values_;
};

} // namespace ocl
