#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace levyflow {

/// Row-major dense matrix, just big enough for the per-step linear solves.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    std::vector<double> multiply(const std::vector<double>& v) const {
        if (v.size() != cols_) throw std::invalid_argument("DenseMatrix::multiply: size mismatch");
        std::vector<double> out(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) {
            const double* r = row(i);
            double acc = 0.0;
            for (std::size_t j = 0; j < cols_; ++j) acc += r[j] * v[j];
            out[i] = acc;
        }
        return out;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

/// LU factorization with partial pivoting. Factor once, solve many
/// right-hand sides; the forward solver reuses one factorization for the
/// whole time loop since its matrix does not depend on the drift.
class LuFactorization {
public:
    explicit LuFactorization(DenseMatrix a) : lu_(std::move(a)), piv_(lu_.rows()) {
        if (lu_.rows() != lu_.cols())
            throw std::invalid_argument("LuFactorization: matrix must be square");
        const std::size_t n = lu_.rows();
        for (std::size_t i = 0; i < n; ++i) piv_[i] = i;
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t p = k;
            double best = std::abs(lu_(k, k));
            for (std::size_t i = k + 1; i < n; ++i) {
                const double v = std::abs(lu_(i, k));
                if (v > best) { best = v; p = i; }
            }
            if (best == 0.0)
                throw std::runtime_error("LuFactorization: singular matrix (zero pivot at column " +
                                         std::to_string(k) + ")");
            if (p != k) {
                std::swap(piv_[p], piv_[k]);
                for (std::size_t j = 0; j < n; ++j) std::swap(lu_(p, j), lu_(k, j));
            }
            const double inv = 1.0 / lu_(k, k);
            for (std::size_t i = k + 1; i < n; ++i) {
                const double f = lu_(i, k) * inv;
                lu_(i, k) = f;
                if (f == 0.0) continue;
                double* ri = lu_.row(i);
                const double* rk = lu_.row(k);
                for (std::size_t j = k + 1; j < n; ++j) ri[j] -= f * rk[j];
            }
        }
    }

    std::vector<double> solve(const std::vector<double>& rhs) const {
        const std::size_t n = lu_.rows();
        if (rhs.size() != n) throw std::invalid_argument("LuFactorization::solve: size mismatch");
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = rhs[piv_[i]];
        for (std::size_t i = 1; i < n; ++i) {
            const double* r = lu_.row(i);
            double acc = x[i];
            for (std::size_t j = 0; j < i; ++j) acc -= r[j] * x[j];
            x[i] = acc;
        }
        for (std::size_t ii = n; ii-- > 0;) {
            const double* r = lu_.row(ii);
            double acc = x[ii];
            for (std::size_t j = ii + 1; j < n; ++j) acc -= r[j] * x[j];
            x[ii] = acc / r[ii];
        }
        return x;
    }

    /// Crude reciprocal condition estimate from the factor diagonal; good
    /// enough for the "singular system" diagnostic.
    double diagonal_condition_estimate() const {
        double mn = std::abs(lu_(0, 0)), mx = mn;
        for (std::size_t i = 1; i < lu_.rows(); ++i) {
            const double v = std::abs(lu_(i, i));
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        return mx == 0.0 ? 0.0 : mn / mx;
    }

private:
    DenseMatrix lu_;
    std::vector<std::size_t> piv_;
};

/// Unpreconditioned BiCGSTAB on an operator given as a callback. Used by the
/// matrix-free solve path; the per-step systems are mass-dominated and
/// converge in a few dozen iterations.
inline std::vector<double> bicgstab(
    const std::function<std::vector<double>(const std::vector<double>&)>& apply,
    const std::vector<double>& rhs, double rel_tol = 1e-12, std::size_t max_iter = 10000) {
    const std::size_t n = rhs.size();
    std::vector<double> x(n, 0.0);
    std::vector<double> r = rhs;
    std::vector<double> r0 = r;
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };
    const double rhs_norm = std::sqrt(dot(rhs, rhs));
    if (rhs_norm == 0.0) return x;
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    std::vector<double> v(n, 0.0), p(n, 0.0);
    for (std::size_t it = 0; it < max_iter; ++it) {
        const double rho_new = dot(r0, r);
        if (rho_new == 0.0) throw std::runtime_error("bicgstab: breakdown (rho = 0)");
        if (it == 0) {
            p = r;
        } else {
            const double beta = (rho_new / rho) * (alpha / omega);
            for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        rho = rho_new;
        v = apply(p);
        alpha = rho / dot(r0, v);
        std::vector<double> s(n);
        for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        if (std::sqrt(dot(s, s)) <= rel_tol * rhs_norm) {
            for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
            return x;
        }
        std::vector<double> t = apply(s);
        const double tt = dot(t, t);
        if (tt == 0.0) throw std::runtime_error("bicgstab: breakdown (t = 0)");
        omega = dot(t, s) / tt;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        if (std::sqrt(dot(r, r)) <= rel_tol * rhs_norm) return x;
        if (omega == 0.0) throw std::runtime_error("bicgstab: breakdown (omega = 0)");
    }
    throw std::runtime_error("bicgstab: no convergence within iteration cap");
}

}  // namespace levyflow
