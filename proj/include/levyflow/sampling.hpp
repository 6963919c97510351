#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace levyflow {

/// xoshiro256** seeded through splitmix64. Plain uint64 arithmetic, so a seed
/// reproduces the same batch on every platform. Worker k of a partitioned
/// batch uses derive_seed(seed, k) on its index range.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& s : state_) {
            x += 0x9E3779B97F4A7C15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
            s = z ^ (z >> 31);
        }
    }

    std::uint64_t next() {
        auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1) — never returns an exact endpoint.
    double uniform_open() {
        double u;
        do { u = uniform01(); } while (u == 0.0);
        return u;
    }

    static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t worker) {
        std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ULL * (worker + 1));
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_[4];
};

/// Trapezoid-rule CDF on a point grid. `normalized` is false when the input
/// densities do not integrate to 1 (accepted, flagged).
struct EmpiricalCdf {
    std::vector<double> grid_points;
    std::vector<double> cdf_values;
    std::vector<double> densities;
    bool normalized = true;

    double total_mass() const { return cdf_values.back(); }
};

inline EmpiricalCdf build_cdf(std::vector<double> grid_points, std::vector<double> densities) {
    if (grid_points.size() < 2 || grid_points.size() != densities.size())
        throw std::invalid_argument("build_cdf: need matching grids of at least two points");
    for (std::size_t i = 1; i < grid_points.size(); ++i)
        if (!(grid_points[i] > grid_points[i - 1]))
            throw std::invalid_argument("build_cdf: grid must be strictly increasing");
    for (double d : densities)
        if (d < 0.0) throw std::invalid_argument("build_cdf: negative density");
    EmpiricalCdf cdf;
    cdf.cdf_values.resize(grid_points.size());
    cdf.cdf_values[0] = 0.0;
    for (std::size_t r = 1; r < grid_points.size(); ++r)
        cdf.cdf_values[r] = cdf.cdf_values[r - 1] +
                            (grid_points[r] - grid_points[r - 1]) * (densities[r] + densities[r - 1]) / 2.0;
    cdf.normalized = std::abs(cdf.cdf_values.back() - 1.0) <= 1e-8;
    cdf.grid_points = std::move(grid_points);
    cdf.densities = std::move(densities);
    return cdf;
}

/// Inverse of the piecewise-linear CDF interpolant. Exactly inverts build_cdf
/// between knots; flat (zero-density) segments map to their left endpoint;
/// u below F(y_0) gives y_0 and u at or above F(y_n) gives y_n.
inline double inverse_cdf(const EmpiricalCdf& cdf, double u) {
    if (!(u >= 0.0 && u < 1.0)) throw std::invalid_argument("inverse_cdf: u must lie in [0,1)");
    const auto& f = cdf.cdf_values;
    const auto& y = cdf.grid_points;
    if (u < f.front()) return y.front();
    if (u >= f.back()) return y.back();
    // first knot at or above u; an exact hit lands on the left end of any
    // flat (zero-density) run
    auto it = std::lower_bound(f.begin(), f.end(), u);
    const std::size_t idx = static_cast<std::size_t>(it - f.begin());
    if (f[idx] == u) return y[idx];
    const std::size_t r = idx - 1;  // f[r] < u < f[r+1]
    const double df = f[r + 1] - f[r];
    const double t = (u - f[r]) / df;
    return std::clamp(y[r] + t * (y[r + 1] - y[r]), y[r], y[r + 1]);
}

struct SampleBatch {
    std::vector<double> values;
    std::uint64_t seed = 0;
    double time = 0.0;
};

inline SampleBatch sample(const EmpiricalCdf& cdf, std::size_t n, std::uint64_t seed,
                          double time = 0.0) {
    if (n < 1) throw std::invalid_argument("sample: need at least one draw");
    SampleBatch batch;
    batch.seed = seed;
    batch.time = time;
    batch.values.resize(n);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) batch.values[i] = inverse_cdf(cdf, rng.uniform01());
    return batch;
}

/// Chambers–Mallows–Stuck draw of a standard alpha-stable variate in the
/// common S1 parameterization (alpha != 1).
inline double stable_standard(double alpha, double beta, Rng& rng) {
    const double v = std::numbers::pi * (rng.uniform_open() - 0.5);
    const double w = -std::log(rng.uniform_open());
    const double tb = beta * std::tan(0.5 * std::numbers::pi * alpha);
    const double b0 = std::atan(tb) / alpha;
    const double s0 = std::pow(1.0 + tb * tb, 0.5 / alpha);
    return s0 * std::sin(alpha * (v + b0)) / std::pow(std::cos(v), 1.0 / alpha) *
           std::pow(std::cos(v - alpha * (v + b0)) / w, (1.0 - alpha) / alpha);
}

/// Independent validation sampler: n i.i.d. draws of Stable(alpha, beta, mu, sigma).
inline SampleBatch stable_oracle_sample(double alpha, double beta, double mu, double sigma,
                                        std::size_t n, std::uint64_t seed) {
    if (!(alpha > 0.0 && alpha <= 2.0) || alpha == 1.0)
        throw std::invalid_argument("stable_oracle_sample: alpha must lie in (0,2], alpha != 1");
    if (!(beta >= -1.0 && beta <= 1.0))
        throw std::invalid_argument("stable_oracle_sample: beta must lie in [-1,1]");
    if (!(sigma > 0.0)) throw std::invalid_argument("stable_oracle_sample: sigma must be positive");
    if (n < 1) throw std::invalid_argument("stable_oracle_sample: need at least one draw");
    SampleBatch batch;
    batch.seed = seed;
    batch.values.resize(n);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) batch.values[i] = mu + sigma * stable_standard(alpha, beta, rng);
    return batch;
}

/// Standard normal CDF and its inverse (Newton on erfc; accurate to ~1e-13).
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie in (0,1)");
    double lo = -40.0, hi = 40.0;
    double x = 0.0;
    for (int it = 0; it < 200; ++it) {
        const double f = normal_cdf(x) - p;
        if (f > 0.0) hi = x; else lo = x;
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
        double next = pdf > 0.0 ? x - f / pdf : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);  // keep Newton bracketed
        if (std::abs(next - x) < 1e-15 * std::max(1.0, std::abs(next))) { x = next; break; }
        x = next;
    }
    return x;
}

struct IntervalEstimate {
    double estimate;
    double lower;
    double upper;
};

/// Empirical P(Y in (a,b)) with the asymptotic normal confidence interval
/// phat -/+ z * sqrt(phat (1 - phat) / N).
inline IntervalEstimate interval_probability_ci(const SampleBatch& batch, double a, double b,
                                                double confidence) {
    if (batch.values.empty()) throw std::invalid_argument("interval_probability_ci: empty batch");
    if (!(a < b)) throw std::invalid_argument("interval_probability_ci: need a < b");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw std::invalid_argument("interval_probability_ci: confidence must lie in (0,1)");
    std::size_t hits = 0;
    for (double v : batch.values)
        if (v > a && v < b) ++hits;
    const double n = static_cast<double>(batch.values.size());
    const double phat = static_cast<double>(hits) / n;
    const double z = normal_quantile(0.5 + confidence / 2.0);
    const double half = z * std::sqrt(phat * (1.0 - phat) / n);
    return {phat, phat - half, phat + half};
}

/// Histogram density: count / (N * bin width) per bin.
inline std::vector<double> empirical_density(const SampleBatch& batch,
                                             const std::vector<double>& bin_edges) {
    if (bin_edges.size() < 2) throw std::invalid_argument("empirical_density: need at least one bin");
    for (std::size_t i = 1; i < bin_edges.size(); ++i)
        if (!(bin_edges[i] > bin_edges[i - 1]))
            throw std::invalid_argument("empirical_density: bin edges must be strictly increasing");
    std::vector<double> density(bin_edges.size() - 1, 0.0);
    const double n = static_cast<double>(batch.values.size());
    for (double v : batch.values) {
        if (v < bin_edges.front() || v >= bin_edges.back()) {
            if (v == bin_edges.back()) density.back() += 1.0;  // closed last bin
            continue;
        }
        auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), v);
        density[static_cast<std::size_t>(it - bin_edges.begin()) - 1] += 1.0;
    }
    for (std::size_t k = 0; k < density.size(); ++k)
        density[k] /= n * (bin_edges[k + 1] - bin_edges[k]);
    return density;
}

/// Two-sided Kolmogorov–Smirnov distance between a batch and a reference CDF
/// given as a callable.
template <typename Cdf>
double ks_distance(std::vector<double> values, Cdf&& ref) {
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double f = ref(values[i]);
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
        d = std::max(d, std::abs(static_cast<double>(i) / n - f));
    }
    return d;
}

/// Evaluates the piecewise-linear CDF interpolant anywhere (clamped outside).
inline double eval_cdf(const EmpiricalCdf& cdf, double x) {
    const auto& y = cdf.grid_points;
    const auto& f = cdf.cdf_values;
    if (x <= y.front()) return f.front();
    if (x >= y.back()) return f.back();
    auto it = std::upper_bound(y.begin(), y.end(), x);
    const std::size_t r = static_cast<std::size_t>(it - y.begin()) - 1;
    const double t = (x - y[r]) / (y[r + 1] - y[r]);
    return f[r] + t * (f[r + 1] - f[r]);
}

}  // namespace levyflow
