#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "cmx/empirical.hpp"
#include "cmx/sketch.hpp"
#include "cmx/statistic.hpp"

namespace cmx {

// ---------------------------------------------------------------------------
// Beta distribution helpers for order statistics of uniforms.

/// Inverse c.d.f. of Beta(a, b). Beta(1, r) uses the closed form 1 - (1 - q)^(1/r).
inline double beta_inverse_cdf(double q, double a, double b) {
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("probability must be in [0, 1]");
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("beta parameters must be positive");
  if (a == 1.0) return -std::expm1(std::log1p(-q) / b);
  return boost::math::ibeta_inv(a, b, q);
}

inline double beta_cdf(double x, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  if (a == 1.0) return -std::expm1(b * std::log1p(-x));
  return boost::math::ibeta(a, b, x);
}

// ---------------------------------------------------------------------------

enum class IntervalKind { bootstrap_two_sided, order_statistic_one_sided, order_statistic_two_sided, markov_baseline };

inline std::string_view to_string(IntervalKind k) {
  switch (k) {
    case IntervalKind::bootstrap_two_sided: return "bootstrap_two_sided";
    case IntervalKind::order_statistic_one_sided: return "order_statistic_one_sided";
    case IntervalKind::order_statistic_two_sided: return "order_statistic_two_sided";
    case IntervalKind::markov_baseline: return "markov_baseline";
  }
  return "unknown";
}

/// Interval for a count. lo/hi are truncated at zero; raw_lo/raw_hi are not.
/// `level` is the nominal coverage, `achieved` the coverage implied by the discrete error law.
struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.0;
  IntervalKind kind = IntervalKind::bootstrap_two_sided;
  double raw_lo = 0.0;
  double raw_hi = 0.0;
  double achieved = 0.0;

  double width() const { return hi - lo; }
  double raw_width() const { return raw_hi - raw_lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
};

inline ConfidenceInterval make_interval(double raw_lo, double raw_hi, double level, IntervalKind kind, double achieved) {
  ConfidenceInterval ci;
  ci.raw_lo = raw_lo;
  ci.raw_hi = raw_hi;
  ci.lo = std::max(0.0, raw_lo);
  ci.hi = std::max(0.0, raw_hi);
  ci.level = level;
  ci.kind = kind;
  ci.achieved = achieved;
  return ci;
}

// ---------------------------------------------------------------------------
// Bias model: the distribution G of T over error draws and its mean mu.

struct BiasModel {
  EmpiricalCdf distribution;
  double mu = 0.0;
};

/// T applied to each of the k columns of the sketch (all counters, no exclusion).
inline BiasModel column_bias_model(const CountPlusSketch& sketch, const Statistic& stat) {
  auto g = column_statistic_distribution(sketch, stat);
  const double mu = g.mean();
  return {std::move(g), mu};
}

/// T applied to `resamples` draws of r values with replacement from the error sample.
inline BiasModel bootstrap_bias_model(const ErrorSample& errors, const Statistic& stat, std::size_t r,
                                      std::size_t resamples = 1000, std::uint64_t seed = 0) {
  auto g = bootstrap_statistic_distribution(errors, stat, r, resamples, seed);
  const double mu = g.mean();
  return {std::move(g), mu};
}

// ---------------------------------------------------------------------------

/// [T(V) - u_b, T(V) - u_a] with u = G^{-1}; nominal level b - a.
inline ConfidenceInterval bootstrap_ci(double statistic_value, const EmpiricalCdf& g, double a, double b) {
  if (!(a >= 0.0 && a < b && b <= 1.0)) throw std::invalid_argument("need 0 <= a < b <= 1");
  const double ua = g.quantile(a);
  const double ub = g.quantile(b);
  const double achieved = g.cdf(ub) - g.cdf_strict(ua);
  return make_interval(statistic_value - ub, statistic_value - ua, b - a, IntervalKind::bootstrap_two_sided, achieved);
}

inline ConfidenceInterval bootstrap_ci(const Statistic& stat, const CountPlusSketch& sketch, std::string_view item,
                                       double a, double b, const BiasModel& model) {
  return bootstrap_ci(stat(sketch.item_values(item)), model.distribution, a, b);
}

/// Equal-tailed bootstrap interval at `level`.
inline ConfidenceInterval bootstrap_ci(const Statistic& stat, const CountPlusSketch& sketch, std::string_view item,
                                       double level, const BiasModel& model) {
  return bootstrap_ci(stat, sketch, item, (1.0 - level) / 2.0, (1.0 + level) / 2.0, model);
}

/// Interval for the i-th order statistic of the item's r counters, mapped through the error
/// quantile function. Two-sided uses equal Beta(i, r-i+1) tails; one-sided (i = 1 only) returns
/// [T - F^{-1}(b), T] with b the level-quantile of Beta(1, r).
inline ConfidenceInterval order_statistic_ci(std::span<const double> values, std::size_t order, double level,
                                             const EmpiricalCdf& errors, bool one_sided = false) {
  const std::size_t r = values.size();
  if (order < 1 || order > r) throw std::out_of_range("order index must be in [1, r]");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must be in (0, 1)");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double t = sorted[order - 1];
  const double a = static_cast<double>(order);
  const double b = static_cast<double>(r - order + 1);
  if (one_sided) {
    if (order != 1) throw std::invalid_argument("one-sided order-statistic interval is defined for the minimum");
    const double q = beta_inverse_cdf(level, 1.0, b);
    const double ub = errors.quantile(q);
    return make_interval(t - ub, t, level, IntervalKind::order_statistic_one_sided, beta_cdf(errors.cdf(ub), 1.0, b));
  }
  const double qa = beta_inverse_cdf((1.0 - level) / 2.0, a, b);
  const double qb = beta_inverse_cdf((1.0 + level) / 2.0, a, b);
  const double ua = errors.quantile(qa);
  const double ub = errors.quantile(qb);
  const double achieved = beta_cdf(errors.cdf(ub), a, b) - beta_cdf(errors.cdf_strict(ua), a, b);
  return make_interval(t - ub, t - ua, level, IntervalKind::order_statistic_two_sided, achieved);
}

inline ConfidenceInterval order_statistic_ci(const CountPlusSketch& sketch, std::string_view item, std::size_t order,
                                             double level, const EmpiricalCdf& errors, bool one_sided = false) {
  return order_statistic_ci(sketch.item_values(item), order, level, errors, one_sided);
}

/// Markov-inequality width n_tot * alpha^(-1/r) / k.
inline double markov_width(double total, std::uint32_t width, std::uint32_t depth, double alpha) {
  return total * std::pow(alpha, -1.0 / static_cast<double>(depth)) / static_cast<double>(width);
}

/// Markov width after optimizing depth at a fixed budget B = r k: -log(alpha) n_tot / B.
inline double markov_optimized_width(double total, double budget, double alpha) { return -std::log(alpha) * total / budget; }

/// (Min - n_tot alpha^(-1/r) / k, Min] at level 1 - alpha.
inline ConfidenceInterval markov_ci(const CountPlusSketch& sketch, std::string_view item, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0, 1)");
  const auto v = sketch.item_values(item);
  const double m = *std::min_element(v.begin(), v.end());
  const double w = markov_width(static_cast<double>(sketch.total_count()), sketch.width(), sketch.depth(), alpha);
  return make_interval(m - w, m, 1.0 - alpha, IntervalKind::markov_baseline, 1.0 - alpha);
}

// ---------------------------------------------------------------------------

/// Stand-in for an infinite width ratio (baseline width over a zero-width interval).
inline constexpr double kCappedRatio = 1e12;

struct WidthRatioSummary {
  std::size_t count = 0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  std::vector<double> ratios;
};

/// Per-item ratio of baseline raw width to candidate raw width, with quartiles.
inline WidthRatioSummary width_ratio_report(std::span<const ConfidenceInterval> baseline,
                                            std::span<const ConfidenceInterval> candidate) {
  if (baseline.size() != candidate.size()) throw std::invalid_argument("interval lists differ in length");
  if (baseline.empty()) throw std::invalid_argument("no intervals to compare");
  WidthRatioSummary s;
  s.count = baseline.size();
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    const double num = baseline[i].raw_width();
    const double den = candidate[i].raw_width();
    double ratio;
    if (den > 0.0) {
      ratio = std::min(num / den, kCappedRatio);
    } else {
      ratio = num > 0.0 ? kCappedRatio : 1.0;
    }
    s.ratios.push_back(ratio);
  }
  std::vector<double> sorted = s.ratios;
  std::sort(sorted.begin(), sorted.end());
  // Linear interpolation between order statistics.
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  s.q1 = q(0.25);
  s.median = q(0.5);
  s.q3 = q(0.75);
  return s;
}

}  // namespace cmx
