#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "levyflow/core.hpp"
#include "levyflow/solver.hpp"

namespace levyflow {

/// Which drift coefficient pair is optimized; the other pair stays frozen.
enum class FitPair { a0a1, a2a3 };

using Alpha = std::array<double, 2>;

struct FitTraceEntry;

struct FitError : std::runtime_error {
    FitError(const std::string& what, Alpha alpha_at)
        : std::runtime_error(what), alpha(alpha_at) {}
    Alpha alpha;
    std::vector<FitTraceEntry> trace_so_far;  // filled when thrown out of fit()
};

struct FitProblem {
    ObservationSet observations;   // on density scale, p_hat = c / K
    FadeParams base_params;        // lambda, gamma, b, K and the frozen pair
    SpaceTimeGrid grid;
    DensitySnapshot initial;
    SolveOptions solve_options{};
    FitPair free_pair = FitPair::a0a1;
    double fd_delta_rel = 1e-6;    // forward-difference step, relative
    double fd_delta_floor = 1e-9;  // absolute floor
    double armijo_rho = 0.5;       // backtracking ratio, in (0,1)
    double armijo_sigma = 1e-4;    // sufficient-decrease fraction, in (0,1/2)
    std::size_t armijo_max_backtracks = 40;
    double penalty0 = 1e-2;        // initial L-M penalty
    double tol = 1e-8;             // stop when |step| <= tol
    std::size_t max_iter = 100;
    bool adaptive_penalty = false; // classical increase/halve instead of always halving

    void validate() const {
        if (!(armijo_rho > 0.0 && armijo_rho < 1.0))
            throw std::invalid_argument("FitProblem: rho must lie in (0,1)");
        if (!(armijo_sigma > 0.0 && armijo_sigma < 0.5))
            throw std::invalid_argument("FitProblem: sigma must lie in (0,1/2)");
        if (!(penalty0 > 0.0)) throw std::invalid_argument("FitProblem: penalty0 must be positive");
        if (!(fd_delta_rel > 0.0)) throw std::invalid_argument("FitProblem: fd delta must be positive");
        if (!(tol > 0.0)) throw std::invalid_argument("FitProblem: tol must be positive");
        if (observations.groups.empty())
            throw std::invalid_argument("FitProblem: no observations");
    }

    FadeParams with_alpha(const Alpha& a) const {
        FadeParams p = base_params;
        if (free_pair == FitPair::a0a1) {
            p.drift.a0 = a[0];
            p.drift.a1 = a[1];
        } else {
            p.drift.a2 = a[0];
            p.drift.a3 = a[1];
        }
        return p;
    }

    bool feasible(const Alpha& a) const {
        const FadeParams p = with_alpha(a);
        return eval_drift(p.drift, p.x_left) >= 0.0;
    }
};

struct FitTraceEntry {
    std::size_t iteration;
    Alpha alpha;
    double objective;
    double penalty;
    double step_length;  // rho^m
    Alpha direction;
};

struct FitTrace {
    std::vector<FitTraceEntry> entries;
};

struct FitResult {
    Alpha alpha;
    double objective;
    FitTrace trace;
    std::size_t iterations;
    bool converged;
};

namespace detail {

/// Residual provider seam: maps alpha to the stacked, sqrt(weight)-scaled
/// residual vector. Tests plant analytic maps here; the solver-backed
/// provider below is the production one.
using ResidualFn = std::function<std::vector<double>(const Alpha&)>;

inline double objective_of(const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return 0.5 * s;
}

/// Forward model bound to a fit problem. The implicit system matrix does not
/// depend on the drift, so the factorization is built once per problem and
/// shared by every residual evaluation.
class ForwardModel {
public:
    explicit ForwardModel(const FitProblem& prob) : prob_(&prob) {
        for (const auto& g : prob.observations.groups) obs_times_.push_back(g.time);
    }

    std::vector<double> residual(const Alpha& alpha) const {
        const FitProblem& prob = *prob_;
        if (!prob.feasible(alpha))
            throw FitError("residual: drift infeasible (negative at inflow boundary)", alpha);
        FadeParams params = prob.with_alpha(alpha);
        ForwardSolution sol = [&] {
            try {
                return solve_forward(params, prob.grid, prob.initial, obs_times_, prob.solve_options);
            } catch (const std::exception& e) {
                throw FitError(std::string("forward solve failed: ") + e.what(), alpha);
            }
        }();
        std::vector<double> r;
        r.reserve(prob.observations.total_points());
        for (std::size_t g = 0; g < prob.observations.groups.size(); ++g) {
            const auto& group = prob.observations.groups[g];
            const double sw = std::sqrt(group.weight);
            const DensitySnapshot& snap = sol.snapshots[g];
            for (const auto& pt : group.points)
                r.push_back(sw * (eval_piecewise_linear(snap, prob.grid, pt.x) - pt.c));
        }
        return r;
    }

private:
    const FitProblem* prob_;
    std::vector<double> obs_times_;
};

struct JacobianResult {
    std::vector<std::array<double, 2>> jacobian;  // rows of J
    std::vector<double> residual;
    double objective;
};

inline JacobianResult fd_jacobian_impl(const ResidualFn& residual_fn, const Alpha& alpha,
                                       double delta_rel, double delta_floor) {
    JacobianResult out;
    out.residual = residual_fn(alpha);
    out.objective = objective_of(out.residual);
    out.jacobian.assign(out.residual.size(), {0.0, 0.0});
    for (std::size_t c = 0; c < 2; ++c) {
        const double delta = std::max(delta_rel * std::abs(alpha[c]), delta_floor);
        Alpha shifted = alpha;
        shifted[c] += delta;
        const std::vector<double> rp = residual_fn(shifted);
        if (rp.size() != out.residual.size())
            throw std::runtime_error("fd_jacobian: residual size changed under perturbation");
        for (std::size_t k = 0; k < rp.size(); ++k)
            out.jacobian[k][c] = (rp[k] - out.residual[k]) / delta;
    }
    return out;
}

inline Alpha jt_r(const JacobianResult& jr) {
    Alpha g{0.0, 0.0};
    for (std::size_t k = 0; k < jr.residual.size(); ++k) {
        g[0] += jr.jacobian[k][0] * jr.residual[k];
        g[1] += jr.jacobian[k][1] * jr.residual[k];
    }
    return g;
}

}  // namespace detail

/// Weighted half sum of squared residuals at alpha (one forward solve).
inline double objective(const Alpha& alpha, const FitProblem& problem) {
    problem.validate();
    detail::ForwardModel model(problem);
    return detail::objective_of(model.residual(alpha));
}

struct Jacobian {
    std::vector<std::array<double, 2>> rows;
    std::vector<double> residual;
    double objective;
};

/// Forward-difference Jacobian of the stacked residual; one extra forward
/// solve per free parameter.
inline Jacobian fd_jacobian(const Alpha& alpha, const FitProblem& problem) {
    problem.validate();
    detail::ForwardModel model(problem);
    auto jr = detail::fd_jacobian_impl([&](const Alpha& a) { return model.residual(a); }, alpha,
                                       problem.fd_delta_rel, problem.fd_delta_floor);
    return {std::move(jr.jacobian), std::move(jr.residual), jr.objective};
}

/// d = -(J^T J + penalty I_2)^{-1} J^T r.
inline Alpha lm_direction(const std::vector<std::array<double, 2>>& jacobian,
                          const std::vector<double>& residual, double penalty) {
    if (penalty < 0.0) throw std::invalid_argument("lm_direction: penalty must be non-negative");
    if (jacobian.size() != residual.size())
        throw std::invalid_argument("lm_direction: jacobian/residual size mismatch");
    double a00 = penalty, a01 = 0.0, a11 = penalty, g0 = 0.0, g1 = 0.0;
    for (std::size_t k = 0; k < residual.size(); ++k) {
        a00 += jacobian[k][0] * jacobian[k][0];
        a01 += jacobian[k][0] * jacobian[k][1];
        a11 += jacobian[k][1] * jacobian[k][1];
        g0 += jacobian[k][0] * residual[k];
        g1 += jacobian[k][1] * residual[k];
    }
    const double det = a00 * a11 - a01 * a01;
    const double scale = std::max({std::abs(a00), std::abs(a11), 1e-300});
    if (std::abs(det) <= 1e-14 * scale * scale) {
        if (penalty == 0.0)
            throw std::runtime_error("lm_direction: J^T J is singular; increase the penalty");
        throw std::runtime_error("lm_direction: normal equations numerically singular");
    }
    return {-(a11 * g0 - a01 * g1) / det, -(a00 * g1 - a01 * g0) / det};
}

struct ArmijoResult {
    std::size_t backtracks;  // m
    double step;             // rho^m
    Alpha alpha;             // accepted point
    double objective;        // objective there
};

namespace detail {

inline ArmijoResult armijo_impl(const ResidualFn& residual_fn, const Alpha& alpha,
                                const Alpha& direction, const Alpha& gradient, double obj0,
                                double rho, double sigma, std::size_t max_backtracks,
                                const std::function<bool(const Alpha&)>& feasible) {
    const double slope = direction[0] * gradient[0] + direction[1] * gradient[1];
    double step = 1.0;
    for (std::size_t m = 0; m <= max_backtracks; ++m, step *= rho) {
        const Alpha trial{alpha[0] + step * direction[0], alpha[1] + step * direction[1]};
        if (!feasible(trial)) continue;  // infeasible trial counts as a failed m
        double obj;
        try {
            obj = objective_of(residual_fn(trial));
        } catch (const FitError&) {
            continue;
        }
        if (obj <= obj0 + sigma * step * slope) return {m, step, trial, obj};
    }
    throw FitError("armijo_step: no acceptable step within backtrack cap", alpha);
}

}  // namespace detail

/// Armijo backtracking from alpha along d: smallest m >= 0 with
/// objective(alpha + rho^m d) <= objective(alpha) + sigma rho^m d.(J^T r).
inline ArmijoResult armijo_step(const Alpha& alpha, const Alpha& direction,
                                const FitProblem& problem) {
    problem.validate();
    if (!std::isfinite(direction[0]) || !std::isfinite(direction[1]))
        throw std::invalid_argument("armijo_step: direction must be finite");
    detail::ForwardModel model(problem);
    auto residual_fn = [&](const Alpha& a) { return model.residual(a); };
    auto jr = detail::fd_jacobian_impl(residual_fn, alpha, problem.fd_delta_rel,
                                       problem.fd_delta_floor);
    return detail::armijo_impl(residual_fn, alpha, direction, detail::jt_r(jr), jr.objective,
                               problem.armijo_rho, problem.armijo_sigma,
                               problem.armijo_max_backtracks,
                               [&](const Alpha& a) { return problem.feasible(a); });
}

namespace detail {

inline FitResult fit_impl(const ResidualFn& residual_fn, const FitProblem& problem,
                          const Alpha& alpha0) {
    if (!problem.feasible(alpha0))
        throw FitError("fit: initial point infeasible", alpha0);
    FitResult result;
    result.alpha = alpha0;
    result.converged = false;
    double penalty = problem.penalty0;
    Alpha alpha = alpha0;
    try {
        for (std::size_t k = 0; k < problem.max_iter; ++k) {
            const JacobianResult jr =
                fd_jacobian_impl(residual_fn, alpha, problem.fd_delta_rel, problem.fd_delta_floor);
            const Alpha gradient = jt_r(jr);
            const Alpha d = lm_direction(jr.jacobian, jr.residual, penalty);
            const double dnorm = std::hypot(d[0], d[1]);
            if (dnorm == 0.0) {
                result.trace.entries.push_back({k, alpha, jr.objective, penalty, 0.0, d});
                result.alpha = alpha;
                result.objective = jr.objective;
                result.iterations = k;
                result.converged = true;
                return result;
            }
            ArmijoResult ar = armijo_impl(residual_fn, alpha, d, gradient, jr.objective,
                                          problem.armijo_rho, problem.armijo_sigma,
                                          problem.armijo_max_backtracks,
                                          [&](const Alpha& a) { return problem.feasible(a); });
            result.trace.entries.push_back({k, alpha, jr.objective, penalty, ar.step, d});
            alpha = ar.alpha;
            result.alpha = alpha;
            result.objective = ar.objective;
            result.iterations = k + 1;
            if (problem.adaptive_penalty)
                penalty = ar.backtracks == 0 ? penalty / 2.0 : penalty * 4.0;
            else
                penalty /= 2.0;  // halved every iteration, as specified
            if (ar.step * dnorm <= problem.tol) {
                result.converged = true;
                return result;
            }
        }
    } catch (FitError e) {
        e.trace_so_far = result.trace.entries;
        throw e;
    }
    return result;
}

}  // namespace detail

/// Full parameter identification loop: solve, finite-difference Jacobian,
/// damped direction, Armijo step, halve the penalty; stops when the step
/// length reaches tol or the iteration cap.
inline FitResult fit(const FitProblem& problem, const Alpha& alpha0) {
    problem.validate();
    detail::ForwardModel model(problem);
    return detail::fit_impl([&](const Alpha& a) { return model.residual(a); }, problem, alpha0);
}

}  // namespace levyflow
