#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "levyflow/core.hpp"
#include "levyflow/linalg.hpp"
#include "levyflow/stiffness.hpp"

namespace levyflow {

/// Backward characteristic tracking: integrates dr/dt = a(r) from t_n down to
/// t_n - dt with explicit Euler substeps, then clamps to the domain.
inline double track_foot(const DriftParams& drift, double x_head, double dt,
                         std::size_t substeps, double x_left, double x_right) {
    if (!(dt > 0.0)) throw std::invalid_argument("track_foot: dt must be positive");
    if (substeps < 1) throw std::invalid_argument("track_foot: need at least one substep");
    const double tau = dt / static_cast<double>(substeps);
    double r = x_head;
    for (std::size_t s = 0; s < substeps; ++s) r -= tau * eval_drift(drift, r);
    return std::clamp(r, x_left, x_right);
}

/// Feet of all I dual points at the previous time level.
struct CharacteristicFeet {
    std::vector<double> feet;  // x*_{i+1/2}, i = 0..I-1
};

inline CharacteristicFeet track_feet(const SpaceTimeGrid& grid, const DriftParams& drift,
                                     double dt, std::size_t substeps) {
    CharacteristicFeet out;
    out.feet.resize(grid.cells());
    for (std::size_t i = 0; i < grid.cells(); ++i)
        out.feet[i] = track_foot(drift, grid.dual(i), dt, substeps, grid.x_left(), grid.x_right());
    for (std::size_t i = 1; i < out.feet.size(); ++i)
        if (out.feet[i] < out.feet[i - 1])
            throw std::runtime_error("track_feet: characteristics crossed between dual points " +
                                     std::to_string(i - 1) + " and " + std::to_string(i));
    return out;
}

/// Accumulation stencil at the new time level: exact integral of the
/// piecewise-linear density over the dual cell [x_{i-1/2}, x_{i+1/2}],
/// (1/8) [ dx_i (p_{i-1} + 3 p_i) + dx_{i+1} (3 p_i + p_{i+1}) ].
inline double accumulation_new(const DensitySnapshot& p, const SpaceTimeGrid& grid, std::size_t i) {
    if (i < 1 || i > grid.cells() - 1)
        throw std::invalid_argument("accumulation_new: cell index out of range");
    const double h = grid.h();
    return (h * (p.values[i - 1] + 3.0 * p.values[i]) + h * (3.0 * p.values[i] + p.values[i + 1])) / 8.0;
}

/// Exact integral of the piecewise-linear snapshot over [a, b], splitting at
/// every grid node in between.
inline double integrate_linear(const DensitySnapshot& p, const SpaceTimeGrid& grid,
                               double a, double b) {
    if (b < a) throw std::invalid_argument("integrate_linear: reversed interval");
    const double h = grid.h();
    const double xl = grid.x_left();
    auto cell_of = [&](double x) {
        auto c = static_cast<long long>(std::floor((x - xl) / h));
        return static_cast<std::size_t>(std::clamp<long long>(c, 0, static_cast<long long>(grid.cells()) - 1));
    };
    // integral over [x, right node of `cell`] restricted to one cell
    auto piece = [&](std::size_t cell, double lo, double hi) {
        const double x0 = grid.node(cell);
        const double v0 = p.values[cell];
        const double slope = (p.values[cell + 1] - v0) / h;
        const double tl = lo - x0, th = hi - x0;
        return v0 * (th - tl) + 0.5 * slope * (th * th - tl * tl);
    };
    const std::size_t ca = cell_of(a), cb = cell_of(b);
    if (ca == cb) return piece(ca, a, b);
    double total = piece(ca, a, grid.node(ca + 1));
    for (std::size_t c = ca + 1; c < cb; ++c) total += piece(c, grid.node(c), grid.node(c + 1));
    total += piece(cb, grid.node(cb), b);
    return total;
}

/// Accumulation at the previous time level: integral of p over the tracked
/// cell [foot_left, foot_right].
inline double accumulation_old(const DensitySnapshot& p_prev, const SpaceTimeGrid& grid,
                               double foot_left, double foot_right) {
    if (foot_right < foot_left)
        throw std::invalid_argument("accumulation_old: reversed feet (crossing characteristics)");
    if (foot_left < grid.x_left() || foot_right > grid.x_right())
        throw std::invalid_argument("accumulation_old: feet outside domain");
    return integrate_linear(p_prev, grid, foot_left, foot_right);
}

struct SolveOptions {
    std::size_t substeps = 4;          // characteristic-tracking Euler substeps per step
    double negativity_tol = 0.10;      // error when min p < -tol * max p at extraction
    bool iterative = false;            // matrix-free BiCGSTAB instead of dense LU
    double iterative_tol = 1e-12;
};

/// The per-step implicit system M p^n = r with M = (mass stencil) + dt * Z.
/// M does not depend on the drift, so one factorization serves a whole
/// forward solve (and a whole drift fit).
class ImplicitStep {
public:
    ImplicitStep(const SpaceTimeGrid& grid, const StiffnessMatrix& z, double dt,
                 const SolveOptions& opts = {})
        : grid_(&grid), z_(&z), dt_(dt), opts_(opts) {
        if (!(dt > 0.0)) throw std::invalid_argument("ImplicitStep: dt must be positive");
        const std::size_t n = grid.cells() - 1;
        if (z.size() != n) throw std::invalid_argument("ImplicitStep: stiffness/grid size mismatch");
        if (std::abs(z.provenance().h - grid.h()) > 1e-12 * grid.h())
            throw std::invalid_argument("ImplicitStep: stiffness built for a different spacing");
        if (!opts.iterative) {
            const double h = grid.h();
            DenseMatrix m(n, n);
            for (std::size_t i = 1; i <= n; ++i)
                for (std::size_t j = 1; j <= n; ++j) m(i - 1, j - 1) = dt * z.entry(i, j);
            for (std::size_t i = 0; i < n; ++i) {
                m(i, i) += 6.0 * h / 8.0;
                if (i > 0) m(i, i - 1) += h / 8.0;
                if (i + 1 < n) m(i, i + 1) += h / 8.0;
            }
            lu_ = std::make_unique<LuFactorization>(std::move(m));
            if (lu_->diagonal_condition_estimate() < 1e-15)
                throw std::runtime_error("ImplicitStep: near-singular system (pivot ratio " +
                                         std::to_string(lu_->diagonal_condition_estimate()) + ")");
        }
    }

    double dt() const { return dt_; }

    /// One scheme step from p_prev (at time t). Returns raw nodal values;
    /// negativity policy is applied by the caller at snapshot extraction.
    DensitySnapshot advance(const DensitySnapshot& p_prev, const DriftParams& drift) const {
        const auto& grid = *grid_;
        const std::size_t n = grid.cells() - 1;
        const auto feet = track_feet(grid, drift, dt_, opts_.substeps);
        std::vector<double> rhs(n);
        for (std::size_t i = 1; i <= n; ++i)
            rhs[i - 1] = accumulation_old(p_prev, grid, feet.feet[i - 1], feet.feet[i]);
        std::vector<double> interior;
        if (opts_.iterative) {
            const double h = grid.h();
            auto apply = [&](const std::vector<double>& v) {
                std::vector<double> out = z_->multiply(v);
                for (std::size_t i = 0; i < n; ++i) {
                    double acc = dt_ * out[i] + 6.0 * h / 8.0 * v[i];
                    if (i > 0) acc += h / 8.0 * v[i - 1];
                    if (i + 1 < n) acc += h / 8.0 * v[i + 1];
                    out[i] = acc;
                }
                return out;
            };
            interior = bicgstab(apply, rhs, opts_.iterative_tol);
        } else {
            interior = lu_->solve(rhs);
        }
        DensitySnapshot out;
        out.time = p_prev.time + dt_;
        out.values.assign(grid.node_count(), 0.0);
        std::copy(interior.begin(), interior.end(), out.values.begin() + 1);
        return out;
    }

private:
    const SpaceTimeGrid* grid_;
    const StiffnessMatrix* z_;
    double dt_;
    SolveOptions opts_;
    std::unique_ptr<LuFactorization> lu_;
};

/// Clamp small transient undershoots at snapshot extraction. The scheme is
/// not positivity preserving; singular initial data produces a few-percent
/// undershoot in the first steps which then decays. Violations beyond the
/// relative tolerance indicate an unstable configuration and raise.
inline void enforce_nonnegative(DensitySnapshot& snap, double tol_rel) {
    double mx = 0.0, mn = 0.0;
    for (double v : snap.values) {
        mx = std::max(mx, v);
        mn = std::min(mn, v);
    }
    if (mn < 0.0 && -mn > tol_rel * std::max(mx, 1e-300))
        throw std::runtime_error("DensitySnapshot: negative density " + std::to_string(mn) +
                                 " exceeds " + std::to_string(tol_rel) + " of peak " +
                                 std::to_string(mx) + " at t = " + std::to_string(snap.time));
    for (double& v : snap.values) v = std::max(v, 0.0);
}

/// One public scheme step: assembles and factors the system for this call.
/// Inside time loops prefer ImplicitStep directly.
inline DensitySnapshot step(const DensitySnapshot& p_prev, const StiffnessMatrix& z,
                            const SpaceTimeGrid& grid, const FadeParams& params, double dt,
                            const SolveOptions& opts = {}) {
    const auto& pr = z.provenance();
    if (pr.lambda != params.lambda || pr.gamma != params.gamma || pr.b != params.b)
        throw std::invalid_argument("step: stiffness matrix built for different parameters");
    ImplicitStep op(grid, z, dt, opts);
    DensitySnapshot out = op.advance(p_prev, params.drift);
    double mx = 0.0, mn = 0.0;
    for (double v : out.values) { mx = std::max(mx, v); mn = std::min(mn, v); }
    if (mn < 0.0 && -mn > opts.negativity_tol * std::max(mx, 1e-300))
        throw std::runtime_error("step: negative density beyond tolerance");
    return out;
}

struct ForwardSolution {
    std::vector<DensitySnapshot> snapshots;
    FadeParams params;
    SpaceTimeGrid grid;
};

/// Discrete point source: unit-mass two-node delta at y0.
inline DensitySnapshot initial_point_source(const SpaceTimeGrid& grid, double y0) {
    if (!(y0 > grid.x_left() && y0 < grid.x_right()))
        throw std::invalid_argument("initial_point_source: y0 must lie strictly inside the domain");
    DensitySnapshot snap;
    snap.time = 0.0;
    snap.values.assign(grid.node_count(), 0.0);
    const double h = grid.h();
    const double s = (y0 - grid.x_left()) / h;
    auto k = static_cast<std::size_t>(s);
    if (k >= grid.cells()) k = grid.cells() - 1;
    const double theta = s - static_cast<double>(k);
    if (theta == 0.0) {
        snap.values[k] = 1.0 / h;  // k >= 1 since y0 > x_left
    } else if (k == 0) {
        snap.values[1] = 1.0 / h;  // boundary node cannot carry mass
    } else if (k + 1 == grid.cells()) {
        snap.values[k] = 1.0 / h;
    } else {
        // lumped two-node split: trapezoid mass 1, lumped mean y0
        snap.values[k] = (1.0 - theta) / h;
        snap.values[k + 1] = theta / h;
    }
    return snap;
}

inline ForwardSolution solve_forward(const FadeParams& params, const SpaceTimeGrid& grid,
                                     const DensitySnapshot& initial,
                                     const std::vector<double>& output_times,
                                     const SolveOptions& opts = {}) {
    params.validate();
    if (initial.values.size() != grid.node_count())
        throw std::invalid_argument("solve_forward: initial snapshot does not match grid");
    const auto& times = grid.times();
    const double t_end = times.back();
    auto is_requested = [&](double t) {
        for (double q : output_times)
            if (std::abs(q - t) <= 1e-9 * std::max(1.0, t_end)) return true;
        return false;
    };
    for (double q : output_times) {
        bool found = false;
        for (double t : times)
            if (std::abs(q - t) <= 1e-9 * std::max(1.0, t_end)) { found = true; break; }
        if (!found)
            throw std::invalid_argument("solve_forward: requested output time " + std::to_string(q) +
                                        " is not in the time partition");
    }

    ForwardSolution sol{{}, params, grid};
    DensitySnapshot current = initial;
    current.time = times.front();
    if (is_requested(current.time)) {
        DensitySnapshot out = current;
        enforce_nonnegative(out, opts.negativity_tol);
        sol.snapshots.push_back(std::move(out));
    }

    StiffnessMatrix z = assemble(grid, params);
    std::optional<double> cached_dt;
    std::unique_ptr<ImplicitStep> op;
    for (std::size_t n = 1; n < times.size(); ++n) {
        const double dt = times[n] - times[n - 1];
        if (!cached_dt || std::abs(*cached_dt - dt) > 1e-12 * std::max(1.0, dt)) {
            op = std::make_unique<ImplicitStep>(grid, z, dt, opts);
            cached_dt = dt;
        }
        current = op->advance(current, params.drift);
        current.time = times[n];
        if (is_requested(current.time)) {
            DensitySnapshot out = current;
            enforce_nonnegative(out, opts.negativity_tol);
            sol.snapshots.push_back(std::move(out));
        }
    }
    return sol;
}

}  // namespace levyflow
