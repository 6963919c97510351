#pragma once

// Independent quadrature oracle for the stiffness entries: evaluates the
// left/right fractional integrals of the hat-function derivatives directly
// from their integral definitions with tanh-sinh quadrature (which absorbs
// the (x-s)^(lambda-1) endpoint singularity), then forms the dual-point flux
// difference. Shares no code with the closed-form entries it checks.

#include <cmath>
#include <cstddef>
#include <functional>

namespace oracle {

// Tanh-sinh quadrature on (a, b). The integrand receives the node plus its
// distances to both endpoints, computed without cancellation, so endpoint
// singularities can be evaluated stably. Recomputes the sum per level;
// plenty fast at test sizes.
inline double tanh_sinh(const std::function<double(double, double, double)>& f, double a,
                        double b) {
    const double half = 0.5 * (b - a);
    const double pi_half = 1.5707963267948966;
    const double t_max = 4.0;
    double prev = 0.0;
    for (int level = 3; level <= 11; ++level) {
        const double step = t_max / static_cast<double>(1 << level);
        const int n = 1 << level;
        double sum = 0.0;
        for (int k = -n; k <= n; ++k) {
            const double t = k * step;
            const double u = pi_half * std::sinh(t);
            // 1 -/+ tanh(u) without cancellation
            const double om = 2.0 / (1.0 + std::exp(2.0 * u));   // 1 - tanh(u)
            const double op = 2.0 / (1.0 + std::exp(-2.0 * u));  // 1 + tanh(u)
            const double dist_a = half * op;
            const double dist_b = half * om;
            const double x = a + dist_a;
            const double w = pi_half * std::cosh(t) / std::pow(std::cosh(u), 2);
            if (dist_a <= 0.0 || dist_b <= 0.0) continue;
            sum += w * f(x, dist_a, dist_b);
        }
        const double result = sum * step * half;
        if (level > 5 && std::abs(result - prev) < 1e-13 * std::max(1.0, std::abs(result)))
            return result;
        prev = result;
    }
    return prev;
}

struct HatDerivative {
    // phi_j' for the hat at node j on a uniform grid: +1/h on (x_{j-1}, x_j),
    // -1/h on (x_j, x_{j+1}).
    double x_left, h;
    std::size_t j;
    double node(std::size_t k) const { return x_left + h * static_cast<double>(k); }
};

// (J_L f)(x) = 1/Gamma(lambda) * integral_{x_l}^{x} (x-s)^(lambda-1) f(s) ds
inline double left_fractional_of_hat_derivative(const HatDerivative& hd, double x, double lambda,
                                                double domain_left) {
    double total = 0.0;
    const double legs[2][3] = {
        {hd.node(hd.j - 1), hd.node(hd.j), 1.0 / hd.h},
        {hd.node(hd.j), hd.node(hd.j + 1), -1.0 / hd.h},
    };
    for (const auto& leg : legs) {
        const double lo = std::max(leg[0], domain_left);
        const double hi = std::min(leg[1], x);
        if (hi <= lo) continue;
        const double c = leg[2];
        const bool singular_at_hi = hi == x;
        total += tanh_sinh(
            [&](double s, double /*da*/, double db) {
                const double dist = singular_at_hi ? db : (x - hi) + db;
                return std::pow(dist, lambda - 1.0) * c;
            },
            lo, hi);
    }
    return total / std::tgamma(lambda);
}

// (J_R f)(x) = 1/Gamma(lambda) * integral_{x}^{x_r} (s-x)^(lambda-1) f(s) ds
inline double right_fractional_of_hat_derivative(const HatDerivative& hd, double x, double lambda,
                                                 double domain_right) {
    double total = 0.0;
    const double legs[2][3] = {
        {hd.node(hd.j - 1), hd.node(hd.j), 1.0 / hd.h},
        {hd.node(hd.j), hd.node(hd.j + 1), -1.0 / hd.h},
    };
    for (const auto& leg : legs) {
        const double lo = std::max(leg[0], x);
        const double hi = std::min(leg[1], domain_right);
        if (hi <= lo) continue;
        const double c = leg[2];
        const bool singular_at_lo = lo == x;
        total += tanh_sinh(
            [&](double s, double da, double /*db*/) {
                const double dist = singular_at_lo ? da : (lo - x) + da;
                return std::pow(dist, lambda - 1.0) * c;
            },
            lo, hi);
    }
    return total / std::tgamma(lambda);
}

// Stiffness entry from the definition: flux-operator difference between the
// dual points of cell i applied to hat j. 1-based indices, domain [xl, xl+I*h].
inline double stiffness_entry_quadrature(std::size_t i, std::size_t j, std::size_t cells,
                                         double lambda, double gamma, double b, double h,
                                         double x_left = 0.0) {
    const double x_right = x_left + h * static_cast<double>(cells);
    const HatDerivative hd{x_left, h, j};
    const double xm = x_left + h * (static_cast<double>(i) - 0.5);
    const double xp = x_left + h * (static_cast<double>(i) + 0.5);
    const double vm = gamma * left_fractional_of_hat_derivative(hd, xm, lambda, x_left) +
                      (1.0 - gamma) * right_fractional_of_hat_derivative(hd, xm, lambda, x_right);
    const double vp = gamma * left_fractional_of_hat_derivative(hd, xp, lambda, x_left) +
                      (1.0 - gamma) * right_fractional_of_hat_derivative(hd, xp, lambda, x_right);
    return b * (vm - vp);
}

}  // namespace oracle
