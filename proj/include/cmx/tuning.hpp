#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

#include "cmx/intervals.hpp"
#include "cmx/sketch.hpp"

namespace cmx {

/// Probability mass on the integer grid {0, ..., size-1} plus the mass beyond it.
struct GriddedDistribution {
  std::vector<double> pmf;
  double tail_mass = 0.0;
  /// Set when an operation pushed mass past the end of the grid.
  bool overflow = false;

  std::size_t size() const { return pmf.size(); }
  double grid_max() const { return static_cast<double>(pmf.size()) - 1.0; }
  double total() const { return std::accumulate(pmf.begin(), pmf.end(), 0.0) + tail_mass; }

  double cdf(double x) const {
    if (x < 0.0) return 0.0;
    const auto top = std::min(pmf.size(), static_cast<std::size_t>(std::floor(x)) + 1);
    return std::accumulate(pmf.begin(), pmf.begin() + static_cast<std::ptrdiff_t>(top), 0.0);
  }

  /// Smallest grid value with cdf >= q; +inf when the grid does not reach q.
  double quantile(double q) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
      acc += pmf[i];
      if (acc >= q - 1e-12) return static_cast<double>(i);
    }
    return std::numeric_limits<double>::infinity();
  }

  static GriddedDistribution point(std::size_t at, std::size_t size) {
    if (at >= size) throw std::invalid_argument("point mass lies outside the grid");
    GriddedDistribution g;
    g.pmf.assign(size, 0.0);
    g.pmf[at] = 1.0;
    return g;
  }

  /// Builds from a (possibly truncated) pmf; tail_mass = 1 - sum.
  static GriddedDistribution from_pmf(std::vector<double> pmf) {
    GriddedDistribution g;
    g.pmf = std::move(pmf);
    for (double p : g.pmf) {
      if (!(p >= 0.0)) throw std::invalid_argument("pmf entries must be non-negative");
    }
    g.tail_mass = std::max(0.0, 1.0 - std::accumulate(g.pmf.begin(), g.pmf.end(), 0.0));
    return g;
  }
};

inline GriddedDistribution poisson_pmf(double lambda, std::size_t size) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("poisson rate must be non-negative");
  std::vector<double> p(size, 0.0);
  for (std::size_t i = 0; i < size; ++i) {
    p[i] = lambda == 0.0 ? (i == 0 ? 1.0 : 0.0)
                         : std::exp(static_cast<double>(i) * std::log(lambda) - lambda - std::lgamma(static_cast<double>(i) + 1.0));
  }
  return GriddedDistribution::from_pmf(std::move(p));
}

/// Compound-Poisson(lambda, g) by the Panjer recursion; g is a pmf on {0, 1, ...}.
inline GriddedDistribution compound_poisson(double lambda, std::span<const double> g, std::size_t size) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("poisson rate must be non-negative");
  if (g.empty() || size == 0) throw std::invalid_argument("empty jump distribution or grid");
  const double g0 = g[0];
  std::vector<double> p(size, 0.0);
  p[0] = std::exp(-lambda * (1.0 - g0));
  for (std::size_t n = 1; n < size; ++n) {
    double acc = 0.0;
    const std::size_t top = std::min(n, g.size() - 1);
    for (std::size_t j = 1; j <= top; ++j) acc += static_cast<double>(j) * g[j] * p[n - j];
    p[n] = lambda * acc / static_cast<double>(n);
  }
  return GriddedDistribution::from_pmf(std::move(p));
}

namespace detail {

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace detail

/// r-fold self-convolution by raising the zero-padded transform to the r-th power.
/// The result is truncated to `output_size` grid points (default: the full support
/// r (size - 1) + 1); mass beyond it goes to tail_mass and sets overflow.
inline GriddedDistribution convolve_power(const GriddedDistribution& f, std::size_t r, std::size_t output_size = 0) {
  if (r < 1) throw std::invalid_argument("convolution power must be at least 1");
  if (f.pmf.empty()) throw std::invalid_argument("empty distribution");
  const std::size_t full = r * (f.size() - 1) + 1;
  const std::size_t out_size = output_size == 0 ? full : output_size;

  std::vector<double> result;
  if (r == 1) {
    result = f.pmf;
  } else {
    const std::size_t n = detail::next_pow2(full);
    const std::size_t nc = n / 2 + 1;
    std::unique_ptr<double, detail::FftwDeleter> buf(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
    std::unique_ptr<fftw_complex, detail::FftwDeleter> freq(
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nc)));
    fftw_plan fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), buf.get(), freq.get(), FFTW_ESTIMATE);
    fftw_plan inv = fftw_plan_dft_c2r_1d(static_cast<int>(n), freq.get(), buf.get(), FFTW_ESTIMATE);
    std::fill(buf.get(), buf.get() + n, 0.0);
    std::copy(f.pmf.begin(), f.pmf.end(), buf.get());
    fftw_execute(fwd);
    for (std::size_t i = 0; i < nc; ++i) {
      std::complex<double> z(freq.get()[i][0], freq.get()[i][1]);
      z = std::pow(z, static_cast<int>(r));
      freq.get()[i][0] = z.real();
      freq.get()[i][1] = z.imag();
    }
    fftw_execute(inv);
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    result.assign(buf.get(), buf.get() + full);
    const double norm = 1.0 / static_cast<double>(n);
    for (auto& x : result) x = std::max(0.0, x * norm);
  }

  GriddedDistribution out;
  out.overflow = f.overflow;
  if (out_size < result.size()) {
    double dropped = 0.0;
    for (std::size_t i = out_size; i < result.size(); ++i) dropped += result[i];
    if (dropped > 0.0) out.overflow = true;
    result.resize(out_size);
  } else {
    result.resize(out_size, 0.0);
  }
  out.pmf = std::move(result);
  const double kept = std::accumulate(out.pmf.begin(), out.pmf.end(), 0.0);
  // Anything not on the grid is tail: the input's own tail compounds, plus truncation.
  out.tail_mass = std::max(0.0, 1.0 - kept);
  return out;
}

/// Histogram of the counters of a 1 x B sketch as a pmf on {0, ..., size-1}.
inline GriddedDistribution empirical_error_pmf(const CountPlusSketch& sketch, std::size_t size = 4096) {
  if (sketch.depth() != 1) throw std::invalid_argument("error pmf needs a single-replicate sketch");
  if (size == 0) throw std::invalid_argument("empty grid");
  std::vector<double> pmf(size, 0.0);
  std::size_t beyond = 0;
  for (auto c : sketch.counters()) {
    if (c < size) {
      pmf[c] += 1.0;
    } else {
      ++beyond;
    }
  }
  const auto n = static_cast<double>(sketch.counters().size());
  for (auto& p : pmf) p /= n;
  GriddedDistribution g;
  g.pmf = std::move(pmf);
  g.tail_mass = static_cast<double>(beyond) / n;
  g.overflow = beyond > 0;
  return g;
}

struct TuningCurve {
  std::size_t budget = 0;
  std::vector<std::size_t> depths;
  std::vector<double> levels;
  /// widths[level index][depth index]
  std::vector<std::vector<double>> widths;
  /// Optimal depth per level (ties go to the smaller depth).
  std::vector<std::size_t> optimal;
};

/// Width of the one-sided Min interval for every candidate depth at a fixed budget.
///
/// `base` is the counter distribution of a 1 x B sketch. A depth-r sketch of width B / r has
/// errors distributed as base^{*r}; the width is its quantile at Beta^{-1}(level; 1, r).
/// Widths that fall beyond `grid_size` are +inf.
inline TuningCurve width_curve(const GriddedDistribution& base, std::size_t budget, std::span<const double> levels,
                               std::span<const std::size_t> depths, std::size_t grid_size = 0) {
  if (depths.empty() || levels.empty()) throw std::invalid_argument("need at least one depth and one level");
  TuningCurve curve;
  curve.budget = budget;
  curve.depths.assign(depths.begin(), depths.end());
  curve.levels.assign(levels.begin(), levels.end());
  curve.widths.assign(levels.size(), std::vector<double>(depths.size(), 0.0));
  const std::size_t grid = grid_size == 0 ? std::max<std::size_t>(4096, base.size()) : grid_size;
  for (std::size_t j = 0; j < depths.size(); ++j) {
    const std::size_t r = depths[j];
    if (r < 1) throw std::invalid_argument("depths must be positive");
    if (budget / r < 1) throw std::invalid_argument("depth exceeds budget");
    const auto errors = convolve_power(base, r, grid);
    for (std::size_t i = 0; i < levels.size(); ++i) {
      curve.widths[i][j] = errors.quantile(beta_inverse_cdf(levels[i], 1.0, static_cast<double>(r)));
    }
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < depths.size(); ++j) {
      const double w = curve.widths[i][j];
      const double b = curve.widths[i][best];
      if (w < b || (w == b && depths[j] < depths[best])) best = j;
    }
    curve.optimal.push_back(depths[best]);
  }
  return curve;
}

}  // namespace cmx
