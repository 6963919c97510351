#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "levyflow/core.hpp"
#include "levyflow/linalg.hpp"

namespace levyflow {

/// Closed-form entry of the fractional-diffusion stiffness matrix.
///
/// The matrix couples the hat-basis coefficients p_1..p_{I-1} through the
/// two-sided fractional integral of order lambda applied to the basis
/// derivatives, with the flux difference taken between the dual points
/// x_{i-1/2} and x_{i+1/2}. Entries with |i-j| >= 2 depend only on i-j, so
/// the matrix is Toeplitz away from the three central diagonals (which are
/// themselves constant along their diagonal).
///
/// Indices are 1-based (i, j in 1..I-1) to match the assembled system.
inline double stiffness_entry(std::size_t i, std::size_t j, std::size_t cells,
                              double lambda, double gamma, double b, double h) {
    if (i < 1 || j < 1 || i > cells - 1 || j > cells - 1)
        throw std::invalid_argument("stiffness_entry: index out of range");
    if (!(lambda > 0.0 && lambda < 1.0))
        throw std::invalid_argument("stiffness_entry: lambda must lie in (0,1)");
    if (!(h > 0.0)) throw std::invalid_argument("stiffness_entry: h must be positive");

    const double c = b * std::pow(h, lambda - 1.0) / std::tgamma(lambda + 1.0);
    auto pl = [lambda](double t) { return std::pow(t, lambda); };

    if (i == j)
        return c * (std::pow(2.0, -lambda) + 2.0 * pl(0.5) - pl(1.5));
    if (j + 1 == i)  // sub-adjacent
        return c * (3.0 * pl(1.5) * gamma - 3.0 * pl(0.5) * gamma - pl(2.5) * gamma -
                    std::pow(2.0, -lambda) * (1.0 - gamma));
    if (j == i + 1)  // super-adjacent
        return c * (3.0 * pl(1.5) * (1.0 - gamma) - 3.0 * pl(0.5) * (1.0 - gamma) -
                    pl(2.5) * (1.0 - gamma) - std::pow(2.0, -lambda) * gamma);
    if (j + 2 <= i) {  // lower tail, second difference of the left integral
        const double k = static_cast<double>(i - j);
        return c * gamma *
               ((pl(k + 0.5) - 2.0 * pl(k - 0.5) + pl(k - 1.5)) -
                (pl(k + 1.5) - 2.0 * pl(k + 0.5) + pl(k - 0.5)));
    }
    // upper tail, mirrored under gamma <-> 1-gamma
    const double k = static_cast<double>(j - i);
    return c * (1.0 - gamma) *
           ((2.0 * pl(k + 0.5) - pl(k - 0.5) - pl(k + 1.5)) -
            (2.0 * pl(k - 0.5) - pl(k - 1.5) - pl(k + 0.5)));
}

/// Structure-aware storage of the (I-1)x(I-1) stiffness matrix: two scalars
/// for the adjacent diagonals, one for the main diagonal, and one band array
/// per tail, indexed by offset. O(I) scalars instead of O(I^2).
class StiffnessMatrix {
public:
    struct Provenance {
        double lambda, gamma, b, h;
    };

    StiffnessMatrix(std::size_t cells, Provenance prov)
        : n_(cells - 1), prov_(prov) {
        if (cells < 2) throw std::invalid_argument("StiffnessMatrix: need at least 2 cells");
        diag_ = stiffness_entry(1, 1, cells, prov.lambda, prov.gamma, prov.b, prov.h);
        if (n_ >= 2) {
            sub_ = stiffness_entry(2, 1, cells, prov.lambda, prov.gamma, prov.b, prov.h);
            super_ = stiffness_entry(1, 2, cells, prov.lambda, prov.gamma, prov.b, prov.h);
        }
        if (n_ >= 3) {
            lower_band_.resize(n_ - 2);
            upper_band_.resize(n_ - 2);
            for (std::size_t k = 2; k < n_; ++k) {
                lower_band_[k - 2] = stiffness_entry(k + 1, 1, cells, prov.lambda, prov.gamma, prov.b, prov.h);
                upper_band_[k - 2] = stiffness_entry(1, k + 1, cells, prov.lambda, prov.gamma, prov.b, prov.h);
            }
        }
    }

    std::size_t size() const { return n_; }
    const Provenance& provenance() const { return prov_; }
    double diagonal() const { return diag_; }
    double sub_adjacent() const { return sub_; }
    double super_adjacent() const { return super_; }
    const std::vector<double>& lower_band() const { return lower_band_; }
    const std::vector<double>& upper_band() const { return upper_band_; }

    /// Entry (i, j), 1-based, reconstructed from the band representation.
    double entry(std::size_t i, std::size_t j) const {
        if (i < 1 || j < 1 || i > n_ || j > n_)
            throw std::invalid_argument("StiffnessMatrix::entry: index out of range");
        if (i == j) return diag_;
        if (j + 1 == i) return sub_;
        if (j == i + 1) return super_;
        if (j + 2 <= i) return lower_band_[i - j - 2];
        return upper_band_[j - i - 2];
    }

    std::vector<double> multiply(const std::vector<double>& v) const {
        if (v.size() != n_) throw std::invalid_argument("StiffnessMatrix::multiply: dimension mismatch");
        std::vector<double> out(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            double acc = diag_ * v[i];
            if (i > 0) acc += sub_ * v[i - 1];
            if (i + 1 < n_) acc += super_ * v[i + 1];
            for (std::size_t k = 2; k <= i; ++k) acc += lower_band_[k - 2] * v[i - k];
            for (std::size_t k = 2; i + k < n_; ++k) acc += upper_band_[k - 2] * v[i + k];
            out[i] = acc;
        }
        return out;
    }

    DenseMatrix to_dense() const {
        DenseMatrix m(n_, n_);
        for (std::size_t i = 1; i <= n_; ++i)
            for (std::size_t j = 1; j <= n_; ++j) m(i - 1, j - 1) = entry(i, j);
        return m;
    }

private:
    std::size_t n_;
    Provenance prov_;
    double diag_ = 0.0, sub_ = 0.0, super_ = 0.0;
    std::vector<double> lower_band_, upper_band_;
};

inline StiffnessMatrix assemble(const SpaceTimeGrid& grid, const FadeParams& params) {
    params.validate();
    if (std::abs((grid.x_right() - grid.x_left()) - grid.h() * static_cast<double>(grid.cells())) >
        1e-9 * (grid.x_right() - grid.x_left()))
        throw std::invalid_argument("assemble: grid spacing inconsistent");
    return StiffnessMatrix(grid.cells(),
                           {params.lambda, params.gamma, params.b, grid.h()});
}

inline std::vector<double> matvec(const StiffnessMatrix& z, const std::vector<double>& v) {
    return z.multiply(v);
}

inline DenseMatrix to_dense(const StiffnessMatrix& z) { return z.to_dense(); }

}  // namespace levyflow
