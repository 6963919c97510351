#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "levyflow/stiffness.hpp"
#include "support/frac_quadrature_oracle.hpp"

using namespace levyflow;

namespace {

FadeParams day224_params() {
    FadeParams p;
    p.lambda = 0.80;
    p.gamma = 0.9999;
    p.b = 0.1859783;
    p.drift = {0.110, 0.00032, 0.0003, 0.00019, 9.375};
    p.x_left = 0.0;
    p.x_right = 300.0;
    p.mass_constant = 56778.24;
    return p;
}

}  // namespace

TEST_CASE("diagonal entry matches the closed-form expression") {
    for (double lambda : {0.3, 0.5, 0.8}) {
        for (double gamma : {0.0, 0.25, 1.0}) {
            const double b = 1.7, h = 0.4;
            const double expected = b * std::pow(h, lambda - 1.0) / std::tgamma(lambda + 1.0) *
                                    (std::pow(2.0, -lambda) + 2.0 * std::pow(0.5, lambda) -
                                     std::pow(1.5, lambda));
            CHECK(stiffness_entry(3, 3, 10, lambda, gamma, b, h) ==
                  Catch::Approx(expected).epsilon(1e-14));
        }
    }
}

TEST_CASE("adjacent entries swap under gamma = 1/2") {
    const double lambda = 0.63, b = 2.2, h = 0.9;
    CHECK(stiffness_entry(4, 3, 12, lambda, 0.5, b, h) ==
          Catch::Approx(stiffness_entry(4, 5, 12, lambda, 0.5, b, h)).epsilon(1e-14));
}

TEST_CASE("tail entries are Toeplitz") {
    const double lambda = 0.8, gamma = 0.9999, b = 0.1859783, h = 0.5;
    CHECK(stiffness_entry(5, 2, 20, lambda, gamma, b, h) ==
          Catch::Approx(stiffness_entry(6, 3, 20, lambda, gamma, b, h)).epsilon(1e-15));
    // property over several offsets and both triangles
    for (std::size_t k = 2; k <= 6; ++k) {
        CHECK(stiffness_entry(2 + k, 2, 20, lambda, 0.3, b, h) ==
              Catch::Approx(stiffness_entry(3 + k, 3, 20, lambda, 0.3, b, h)).epsilon(1e-15));
        CHECK(stiffness_entry(2, 2 + k, 20, lambda, 0.3, b, h) ==
              Catch::Approx(stiffness_entry(3, 3 + k, 20, lambda, 0.3, b, h)).epsilon(1e-15));
    }
}

TEST_CASE("entry agrees with the fractional-integral quadrature oracle") {
    // lower-tail entry at offset 2, fully one-sided weights
    const double lambda = 0.8, gamma = 1.0, b = 1.0, h = 1.0;
    const double closed = stiffness_entry(5, 3, 10, lambda, gamma, b, h);
    const double quad = oracle::stiffness_entry_quadrature(5, 3, 10, lambda, gamma, b, h);
    CHECK(closed == Catch::Approx(quad).epsilon(1e-8));
}

TEST_CASE("quadrature consistency across the whole small matrix") {
    // every entry on a 10-cell grid, both orders, three weights
    const double b = 1.3, h = 0.7;
    for (double lambda : {0.3, 0.8}) {
        for (double gamma : {0.0, 0.5, 1.0}) {
            for (std::size_t i = 1; i <= 9; ++i) {
                for (std::size_t j = 1; j <= 9; ++j) {
                    const double closed = stiffness_entry(i, j, 10, lambda, gamma, b, h);
                    const double quad =
                        oracle::stiffness_entry_quadrature(i, j, 10, lambda, gamma, b, h);
                    const double scale = std::max(std::abs(quad), 1e-12);
                    CHECK_THAT(closed, Catch::Matchers::WithinAbs(quad, 1e-6 * scale));
                }
            }
        }
    }
}

TEST_CASE("skew pairing: gamma <-> 1-gamma transposes off-diagonal entries") {
    std::mt19937 gen(42);
    std::uniform_real_distribution<double> unif(0.05, 0.95);
    for (int rep = 0; rep < 20; ++rep) {
        const double lambda = unif(gen);
        const double gamma = unif(gen);
        const double b = 0.5 + unif(gen);
        const double h = 0.2 + unif(gen);
        for (std::size_t i = 1; i <= 7; ++i)
            for (std::size_t j = 1; j <= 7; ++j) {
                if (i == j) continue;
                CHECK(stiffness_entry(i, j, 8, lambda, gamma, b, h) ==
                      Catch::Approx(stiffness_entry(j, i, 8, lambda, 1.0 - gamma, b, h))
                          .epsilon(1e-12).margin(1e-15));
            }
    }
}

TEST_CASE("entries scale linearly in b and as h^(lambda-1) in spacing") {
    const double lambda = 0.45, gamma = 0.7;
    const double base = stiffness_entry(4, 2, 10, lambda, gamma, 1.0, 1.0);
    CHECK(stiffness_entry(4, 2, 10, lambda, gamma, 3.5, 1.0) ==
          Catch::Approx(3.5 * base).epsilon(1e-13));
    const double h = 0.37;
    CHECK(stiffness_entry(4, 2, 10, lambda, gamma, 1.0, h) ==
          Catch::Approx(std::pow(h, lambda - 1.0) * base).epsilon(1e-13));
}

TEST_CASE("index and parameter validation") {
    CHECK_THROWS_AS(stiffness_entry(0, 1, 10, 0.5, 0.5, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(stiffness_entry(1, 10, 10, 0.5, 0.5, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(stiffness_entry(1, 1, 10, 1.2, 0.5, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(stiffness_entry(1, 1, 10, 0.5, 0.5, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("assemble: dense expansion equals entrywise formulas") {
    SpaceTimeGrid grid(0.0, 4.0, 4, {0.0, 1.0});
    FadeParams p = day224_params();
    p.lambda = 0.5;
    p.gamma = 1.0;
    p.b = 1.0;
    p.x_right = 4.0;
    p.drift = {0.1, 0.0, 0.1, 0.0, 2.0};
    const StiffnessMatrix z = assemble(grid, p);
    REQUIRE(z.size() == 3);
    const DenseMatrix dense = to_dense(z);
    for (std::size_t i = 1; i <= 3; ++i)
        for (std::size_t j = 1; j <= 3; ++j)
            CHECK(dense(i - 1, j - 1) ==
                  Catch::Approx(stiffness_entry(i, j, 4, p.lambda, p.gamma, p.b, grid.h()))
                      .epsilon(1e-14).margin(1e-18));
}

TEST_CASE("assemble keeps O(I) storage on the day-224 configuration") {
    SpaceTimeGrid grid(0.0, 300.0, 600, {0.0, 1.0});
    const StiffnessMatrix z = assemble(grid, day224_params());
    CHECK(z.size() == 599);
    CHECK(z.lower_band().size() <= 600);
    CHECK(z.upper_band().size() <= 600);
}

TEST_CASE("closed forms are continuous in the lambda -> 1 limit") {
    const double gamma = 0.5, b = 1.0, h = 1.0;
    for (std::size_t i = 1; i <= 5; ++i)
        for (std::size_t j = 1; j <= 5; ++j) {
            const double near = stiffness_entry(i, j, 6, 1.0 - 1e-6, gamma, b, h);
            // the formulas evaluated directly at lambda = 1
            const double at_one = [&] {
                const double c = b / std::tgamma(2.0);
                const double diff = static_cast<double>(i) - static_cast<double>(j);
                if (i == j) return c * (0.5 + 2.0 * 0.5 - 1.5);
                if (std::abs(diff) == 1.0) {
                    const double g = diff > 0 ? gamma : 1.0 - gamma;
                    const double other = 1.0 - g;
                    return c * (3.0 * 1.5 * g - 3.0 * 0.5 * g - 2.5 * g - 0.5 * other);
                }
                return 0.0;  // third differences of a linear function vanish
            }();
            CHECK_THAT(near, Catch::Matchers::WithinAbs(at_one, 2e-5));
        }
}

TEST_CASE("matvec equals dense multiplication") {
    SpaceTimeGrid grid(0.0, 300.0, 50, {0.0, 1.0});
    const StiffnessMatrix z = assemble(grid, day224_params());
    const std::size_t n = z.size();

    SECTION("zero vector") {
        std::vector<double> v(n, 0.0);
        for (double out : matvec(z, v)) CHECK(out == 0.0);
    }
    SECTION("unit basis vectors give dense columns") {
        const DenseMatrix dense = to_dense(z);
        for (std::size_t k : {std::size_t{0}, n / 2, n - 1}) {
            std::vector<double> e(n, 0.0);
            e[k] = 1.0;
            const auto col = matvec(z, e);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(col[i] == Catch::Approx(dense(i, k)).epsilon(1e-15).margin(1e-300));
        }
    }
    SECTION("random vectors match the dense oracle to 1e-12") {
        const DenseMatrix dense = to_dense(z);
        std::mt19937 gen(7);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (int rep = 0; rep < 5; ++rep) {
            std::vector<double> v(n);
            for (auto& x : v) x = unif(gen);
            const auto fast = matvec(z, v);
            const auto ref = dense.multiply(v);
            for (std::size_t i = 0; i < n; ++i)
                CHECK_THAT(fast[i],
                           Catch::Matchers::WithinRel(ref[i], 1e-12) ||
                               Catch::Matchers::WithinAbs(ref[i], 1e-15));
        }
    }
    SECTION("dimension mismatch") {
        std::vector<double> v(n + 1, 0.0);
        CHECK_THROWS_AS(matvec(z, v), std::invalid_argument);
    }
}

TEST_CASE("to_dense layout on the smallest grid") {
    SpaceTimeGrid grid(0.0, 3.0, 3, {0.0, 1.0});
    FadeParams p = day224_params();
    p.x_right = 3.0;
    p.drift.x_mid = 1.5;
    const StiffnessMatrix z = assemble(grid, p);
    const DenseMatrix dense = to_dense(z);
    REQUIRE(dense.rows() == 2);
    CHECK(dense(0, 0) == z.diagonal());
    CHECK(dense(1, 1) == z.diagonal());
    CHECK(dense(0, 1) == z.super_adjacent());
    CHECK(dense(1, 0) == z.sub_adjacent());
}

TEST_CASE("day-224 entry (10,3) on I=20 equals the direct formula") {
    SpaceTimeGrid grid(0.0, 300.0, 20, {0.0, 1.0});
    const FadeParams p = day224_params();
    const StiffnessMatrix z = assemble(grid, p);
    CHECK(z.entry(10, 3) ==
          Catch::Approx(stiffness_entry(10, 3, 20, p.lambda, p.gamma, p.b, grid.h()))
              .epsilon(1e-14));
}
