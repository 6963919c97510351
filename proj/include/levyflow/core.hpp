#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace levyflow {

/// Piecewise linear drift velocity: a0 - a1*x left of the breakpoint,
/// a2 - a3*x right of it. Evaluation at exactly x_mid takes the left branch.
struct DriftParams {
    double a0 = 0.0;  // m/day
    double a1 = 0.0;  // 1/day
    double a2 = 0.0;  // m/day
    double a3 = 0.0;  // 1/day
    double x_mid = 0.0;  // m
};

inline double eval_drift(const DriftParams& d, double x) {
    return x <= d.x_mid ? d.a0 - d.a1 * x : d.a2 - d.a3 * x;
}

/// Model parameters of the forward equation. `b` is the composite diffusion
/// coefficient multiplying the fractional term (units m^alpha/day with
/// alpha = 2 - lambda); `mass_constant` scales density to concentration,
/// c = K * p.
struct FadeParams {
    double lambda = 0.5;        // fractional-integral order, in (0,1)
    double gamma = 0.5;         // forward-vs-backward weight, in [0,1]
    double b = 1.0;             // diffusion coefficient
    DriftParams drift;
    double x_left = 0.0;        // m
    double x_right = 1.0;       // m
    double mass_constant = 1.0; // concentration * m

    void validate() const {
        if (!(lambda > 0.0 && lambda < 1.0))
            throw std::invalid_argument("FadeParams: lambda must lie in (0,1)");
        if (!(gamma >= 0.0 && gamma <= 1.0))
            throw std::invalid_argument("FadeParams: gamma must lie in [0,1]");
        if (!(b > 0.0))
            throw std::invalid_argument("FadeParams: b must be positive");
        if (!(x_left < x_right))
            throw std::invalid_argument("FadeParams: domain bounds out of order");
        if (!(mass_constant > 0.0))
            throw std::invalid_argument("FadeParams: mass constant must be positive");
        if (!(drift.x_mid >= x_left && drift.x_mid <= x_right))
            throw std::invalid_argument("FadeParams: drift breakpoint outside domain");
        // Inflow side only. The outflow-side value is allowed to go negative:
        // the published MADE fits do, and out-of-domain characteristic feet are
        // clamped, which already realizes zero inflow there.
        if (eval_drift(drift, x_left) < 0.0)
            throw std::invalid_argument("FadeParams: drift must be non-negative at the inflow boundary");
    }

    double drift_at(double x) const {
        if (x < x_left || x > x_right)
            throw std::domain_error("drift_at: x outside [x_left, x_right]");
        return eval_drift(drift, x);
    }

    double alpha() const { return 2.0 - lambda; }
};

/// Uniform spatial partition x_0..x_I plus a strictly increasing time
/// partition t_0..t_N. Dual points sit at the cell midpoints.
class SpaceTimeGrid {
public:
    SpaceTimeGrid(double x_left, double x_right, std::size_t cells, std::vector<double> times)
        : x_left_(x_left), x_right_(x_right), cells_(cells), times_(std::move(times)) {
        if (!(x_left_ < x_right_))
            throw std::invalid_argument("SpaceTimeGrid: domain bounds out of order");
        if (cells_ < 2)
            throw std::invalid_argument("SpaceTimeGrid: need at least 2 cells");
        h_ = (x_right_ - x_left_) / static_cast<double>(cells_);
        if (times_.empty() || times_.front() != 0.0)
            throw std::invalid_argument("SpaceTimeGrid: time partition must start at 0");
        for (std::size_t n = 1; n < times_.size(); ++n)
            if (!(times_[n] > times_[n - 1]))
                throw std::invalid_argument("SpaceTimeGrid: times must be strictly increasing");
    }

    /// Builds the grid from explicit node coordinates, rejecting non-uniform
    /// spacing (the closed-form stiffness entries assume a single h).
    static SpaceTimeGrid from_nodes(std::span<const double> nodes, std::vector<double> times,
                                    double rel_tol = 1e-12) {
        if (nodes.size() < 3)
            throw std::invalid_argument("SpaceTimeGrid: need at least 3 nodes");
        const double h = nodes[1] - nodes[0];
        for (std::size_t i = 1; i + 1 < nodes.size(); ++i)
            if (std::abs((nodes[i + 1] - nodes[i]) - h) > rel_tol * std::max(1.0, std::abs(h)))
                throw std::invalid_argument("SpaceTimeGrid: non-uniform spacing");
        return SpaceTimeGrid(nodes.front(), nodes.back(), nodes.size() - 1, std::move(times));
    }

    static std::vector<double> uniform_times(double t_end, double dt) {
        if (!(dt > 0.0) || !(t_end > 0.0))
            throw std::invalid_argument("uniform_times: dt and t_end must be positive");
        const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
        if (steps == 0 || std::abs(steps * dt - t_end) > 1e-9 * t_end)
            throw std::invalid_argument("uniform_times: t_end must be a multiple of dt");
        std::vector<double> t(steps + 1);
        for (std::size_t n = 0; n <= steps; ++n) t[n] = static_cast<double>(n) * dt;
        t.back() = t_end;
        return t;
    }

    double x_left() const { return x_left_; }
    double x_right() const { return x_right_; }
    std::size_t cells() const { return cells_; }           // I
    std::size_t node_count() const { return cells_ + 1; }  // I+1
    double h() const { return h_; }
    double node(std::size_t i) const { return x_left_ + h_ * static_cast<double>(i); }
    /// Dual point x_{i+1/2}, i = 0..I-1.
    double dual(std::size_t i) const { return x_left_ + h_ * (static_cast<double>(i) + 0.5); }
    const std::vector<double>& times() const { return times_; }

private:
    double x_left_, x_right_, h_;
    std::size_t cells_;
    std::vector<double> times_;
};

/// Nodal coefficients of the piecewise-linear density at one time level.
struct DensitySnapshot {
    std::vector<double> values;  // I+1 nodal densities, 1/m
    double time = 0.0;           // days
};

/// Hat-function interpolation of a snapshot.
inline double eval_piecewise_linear(const DensitySnapshot& snap, const SpaceTimeGrid& grid, double x) {
    if (x < grid.x_left() || x > grid.x_right())
        throw std::domain_error("eval_piecewise_linear: x outside domain");
    if (snap.values.size() != grid.node_count())
        throw std::invalid_argument("eval_piecewise_linear: snapshot/grid size mismatch");
    const double s = (x - grid.x_left()) / grid.h();
    auto cell = static_cast<std::size_t>(s);
    if (cell >= grid.cells()) cell = grid.cells() - 1;
    const double theta = s - static_cast<double>(cell);
    return snap.values[cell] * (1.0 - theta) + snap.values[cell + 1] * theta;
}

inline double trapezoid_mass(const DensitySnapshot& snap, const SpaceTimeGrid& grid) {
    double m = 0.0;
    for (std::size_t i = 0; i + 1 < snap.values.size(); ++i)
        m += 0.5 * (snap.values[i] + snap.values[i + 1]);
    return m * grid.h();
}

/// Observed (location, concentration) pairs grouped by observation time.
struct ObservationSet {
    struct Point {
        double x;  // m
        double c;  // concentration
    };
    struct Group {
        double time;    // days
        double weight;  // dimensionless, > 0
        std::vector<Point> points;
    };
    std::vector<Group> groups;

    void validate(double x_left, double x_right) const {
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (!(groups[g].weight > 0.0))
                throw std::invalid_argument("ObservationSet: weights must be positive");
            for (std::size_t k = g + 1; k < groups.size(); ++k)
                if (groups[g].time == groups[k].time)
                    throw std::invalid_argument("ObservationSet: duplicate group time");
            for (const auto& pt : groups[g].points) {
                if (pt.x < x_left || pt.x > x_right)
                    throw std::invalid_argument("ObservationSet: location outside domain");
                if (pt.c < 0.0)
                    throw std::invalid_argument("ObservationSet: negative concentration");
            }
        }
    }

    std::size_t total_points() const {
        std::size_t n = 0;
        for (const auto& g : groups) n += g.points.size();
        return n;
    }
};

}  // namespace levyflow
