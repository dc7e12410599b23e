#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "cmx/empirical.hpp"
#include "cmx/intervals.hpp"
#include "cmx/logconcave.hpp"
#include "cmx/sketch.hpp"
#include "cmx/statistic.hpp"

namespace cmx {

/// Point estimate of a count. value = max(0, raw).
struct Estimate {
  double value = 0.0;
  double raw = 0.0;
  std::string statistic;
  bool truncated = false;
  bool degenerate = false;
};

inline Estimate make_estimate(double raw, std::string statistic) {
  Estimate e;
  e.raw = raw;
  e.value = std::max(0.0, raw);
  e.truncated = raw < 0.0;
  e.statistic = std::move(statistic);
  return e;
}

struct EstimateWithInterval {
  Estimate estimate;
  ConfidenceInterval interval;
};

inline Estimate min_estimate(const CountPlusSketch& sketch, std::string_view item) {
  const auto v = sketch.item_values(item);
  return make_estimate(*std::min_element(v.begin(), v.end()), "min");
}

/// T(V) - mu, truncated at zero.
inline Estimate debias(const Statistic& stat, std::span<const double> values, double mu) {
  return make_estimate(stat(values) - mu, "debiased_" + stat.name());
}

inline Estimate debias(const Statistic& stat, const CountPlusSketch& sketch, std::string_view item, const BiasModel& model) {
  return debias(stat, sketch.item_values(item), model.mu);
}

/// Debiased estimate plus the two-sided bootstrap interval from the same bias model.
inline EstimateWithInterval debias_with_interval(const Statistic& stat, const CountPlusSketch& sketch,
                                                 std::string_view item, const BiasModel& model, double level) {
  const auto v = sketch.item_values(item);
  const double t = stat(v);
  return {make_estimate(t - model.mu, "debiased_" + stat.name()),
          bootstrap_ci(t, model.distribution, (1.0 - level) / 2.0, (1.0 + level) / 2.0)};
}

// ---------------------------------------------------------------------------
// Debiased Min with a one-sided interval.

/// Error quantiles for the Min estimator. The sketch form follows the rank convention
/// "mu = k-th smallest counter, u_b = ceil(b r k)-th smallest"; the error-sample form uses
/// mu = F^{-1}(1/(r+1)) and u_b = F^{-1}(b).
class DebiasedMinModel {
 public:
  explicit DebiasedMinModel(const CountPlusSketch& sketch) : depth_(sketch.depth()), rank_form_(true) {
    sorted_.reserve(sketch.counters().size());
    for (auto c : sketch.counters()) sorted_.push_back(static_cast<double>(c));
    std::sort(sorted_.begin(), sorted_.end());
    mu_ = sorted_[sketch.width() - 1];
  }

  DebiasedMinModel(const ErrorSample& errors, std::uint32_t depth)
      : sorted_(errors.values().begin(), errors.values().end()), depth_(depth), rank_form_(false) {
    if (depth < 1) throw std::invalid_argument("depth must be positive");
    mu_ = EmpiricalCdf::quantile_sorted(sorted_, 1.0 / (depth + 1.0));
  }

  double mu() const { return mu_; }
  std::uint32_t depth() const { return depth_; }

  /// Upper error bound at `level`: F^{-1}(Beta^{-1}(level; 1, r)).
  double error_bound(double level) const {
    const double b = beta_inverse_cdf(level, 1.0, depth_);
    if (!rank_form_) return EmpiricalCdf::quantile_sorted(sorted_, b);
    auto rank = static_cast<std::size_t>(std::ceil(b * static_cast<double>(sorted_.size()) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted_.size());
    return sorted_[rank - 1];
  }

  EstimateWithInterval query(std::span<const double> values, double level) const {
    const double m = *std::min_element(values.begin(), values.end());
    auto est = make_estimate(m - mu_, "debiased_min");
    const double ub = error_bound(level);
    return {est, make_interval(m - ub, m, level, IntervalKind::order_statistic_one_sided, level)};
  }

  EstimateWithInterval query(const CountPlusSketch& sketch, std::string_view item, double level) const {
    return query(sketch.item_values(item), level);
  }

 private:
  std::vector<double> sorted_;
  std::uint32_t depth_;
  bool rank_form_;
  double mu_ = 0.0;
};

inline EstimateWithInterval debiased_min(const CountPlusSketch& sketch, std::string_view item, double level) {
  return DebiasedMinModel(sketch).query(sketch, item, level);
}

// ---------------------------------------------------------------------------
// Likelihood estimators.

/// argmax over [0, min counter] of sum_i log f(V_i - theta); largest maximizer on ties.
inline Estimate mle_estimate(std::span<const double> values, const LogConcaveDensity& f) {
  const double upper = *std::min_element(values.begin(), values.end());
  return make_estimate(maximize_shift(f, values, 0.0, std::max(0.0, upper)), "mle");
}

inline Estimate mle_estimate(const CountPlusSketch& sketch, std::string_view item, const LogConcaveDensity& f) {
  return mle_estimate(sketch.item_values(item), f);
}

/// Bootstrap bias model for the (untruncated) MLE statistic.
inline BiasModel mle_bias_model(const ErrorSample& errors, const LogConcaveDensity& f, std::size_t r,
                                std::size_t resamples = 1000, std::uint64_t seed = 0) {
  return bootstrap_bias_model(errors, Statistic::mle(f), r, resamples, seed);
}

inline Estimate debiased_mle(const CountPlusSketch& sketch, std::string_view item, const LogConcaveDensity& f,
                             const BiasModel& model) {
  auto e = debias(Statistic::mle(f), sketch, item, model);
  e.statistic = "debiased_mle";
  return e;
}

/// Convenience form: fits nothing, but builds the bootstrap bias from all counters.
inline Estimate debiased_mle(const CountPlusSketch& sketch, std::string_view item, const LogConcaveDensity& f,
                             std::size_t resamples, std::uint64_t seed = 0) {
  return debiased_mle(sketch, item, f, mle_bias_model(error_sample(sketch), f, sketch.depth(), resamples, seed));
}

// ---------------------------------------------------------------------------
// Bayes estimator on the integer grid.

enum class BayesLoss { squared, absolute, zero_one };

/// Log prior mass over non-negative integer counts (need not be normalized).
struct Prior {
  std::function<double(std::int64_t)> log_mass;

  static Prior uniform() {
    return {[](std::int64_t) { return 0.0; }};
  }
  static Prior point(std::int64_t m) {
    return {[m](std::int64_t n) { return n == m ? 0.0 : -std::numeric_limits<double>::infinity(); }};
  }
  static Prior custom(std::function<double(std::int64_t)> log_mass) { return {std::move(log_mass)}; }
};

/// Log likelihood of one error value under f: the atom for an exact zero, otherwise the
/// continuous part.
inline double error_log_likelihood(const LogConcaveDensity& f, double e) {
  if (f.atom_at_zero() > 0.0 && e == 0.0) return std::log(f.atom_at_zero());
  return f.log_pdf(e);
}

/// Normalized posterior over n = 0..floor(min counter). Empty when every grid point has zero mass.
inline std::vector<double> bayes_posterior(std::span<const double> values, const LogConcaveDensity& f, const Prior& prior) {
  const double upper = *std::min_element(values.begin(), values.end());
  const auto top = static_cast<std::int64_t>(std::floor(std::max(0.0, upper)));
  std::vector<double> logp(static_cast<std::size_t>(top + 1));
  double best = -std::numeric_limits<double>::infinity();
  for (std::int64_t n = 0; n <= top; ++n) {
    double lp = prior.log_mass(n);
    if (std::isfinite(lp)) {
      for (double v : values) lp += error_log_likelihood(f, v - static_cast<double>(n));
    }
    logp[static_cast<std::size_t>(n)] = lp;
    if (lp > best) best = lp;
  }
  if (!std::isfinite(best)) return {};
  double sum = 0.0;
  for (auto& lp : logp) {
    lp = std::isfinite(lp) ? std::exp(lp - best) : 0.0;
    sum += lp;
  }
  for (auto& p : logp) p /= sum;
  return logp;
}

/// Posterior mean (squared loss), median (absolute) or mode (zero-one, largest on ties).
/// Falls back to the Min estimate with degenerate = true when the posterior has no mass.
inline Estimate bayes_estimate(std::span<const double> values, const LogConcaveDensity& f, const Prior& prior,
                               BayesLoss loss) {
  const auto post = bayes_posterior(values, f, prior);
  if (post.empty()) {
    auto e = make_estimate(*std::min_element(values.begin(), values.end()), "bayes");
    e.degenerate = true;
    return e;
  }
  double result = 0.0;
  switch (loss) {
    case BayesLoss::squared:
      for (std::size_t n = 0; n < post.size(); ++n) result += static_cast<double>(n) * post[n];
      break;
    case BayesLoss::absolute: {
      double acc = 0.0;
      for (std::size_t n = 0; n < post.size(); ++n) {
        acc += post[n];
        if (acc >= 0.5 - 1e-12) {
          result = static_cast<double>(n);
          break;
        }
      }
      break;
    }
    case BayesLoss::zero_one: {
      double best = -1.0;
      for (std::size_t n = 0; n < post.size(); ++n) {
        if (post[n] >= best) {
          best = post[n];
          result = static_cast<double>(n);
        }
      }
      break;
    }
  }
  return make_estimate(result, "bayes");
}

inline Estimate bayes_estimate(const CountPlusSketch& sketch, std::string_view item, const LogConcaveDensity& f,
                               const Prior& prior = Prior::uniform(), BayesLoss loss = BayesLoss::squared) {
  return bayes_estimate(sketch.item_values(item), f, prior, loss);
}

// ---------------------------------------------------------------------------
// Counter-braids decoding with the full universe of items.

class UniverseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CounterBraidsResult {
  std::vector<std::string> items;
  std::vector<std::int64_t> lower;
  std::vector<std::int64_t> upper;
  std::size_t iterations = 0;
  bool converged = false;

  bool exact() const { return lower == upper; }
};

struct CounterBraidsOptions {
  std::size_t max_iters = 100;
  /// Called after every iteration with (iteration, lower, upper).
  std::function<void(std::size_t, std::span<const std::int64_t>, std::span<const std::int64_t>)> observer;
};

/// Alternating upper/lower bound refinement. Starting from lower = 0:
///   upper_x = min_i (V_i - (M lower)_i + lower_x)
///   lower_x = max(0, max_i (upper_x - (M upper)_i + V_i))
/// Each bound is kept monotone, so lower <= n <= upper holds at every step when the universe is
/// complete. Throws UniverseError when the bounds prove an inserted item is missing.
inline CounterBraidsResult counter_braids(const CountPlusSketch& sketch, std::span<const std::string> universe,
                                          const CounterBraidsOptions& opts = {}) {
  CounterBraidsResult res;
  std::unordered_set<std::string> seen;
  for (const auto& item : universe) {
    if (seen.insert(item).second) res.items.push_back(item);
  }
  const std::size_t n = res.items.size();
  const std::size_t r = sketch.depth();
  if (n == 0) {
    if (sketch.total_count() != 0) throw UniverseError("empty universe for a non-empty sketch");
    res.converged = true;
    return res;
  }
  std::vector<std::size_t> cells(n * r);
  for (std::size_t x = 0; x < n; ++x) {
    const auto row = sketch.design_row(res.items[x]);
    std::copy(row.begin(), row.end(), cells.begin() + static_cast<std::ptrdiff_t>(x * r));
  }
  const auto counters = sketch.counters();
  std::vector<std::int64_t> v(counters.begin(), counters.end());
  std::vector<std::int64_t> load(v.size());
  auto apply = [&](const std::vector<std::int64_t>& x) {
    std::fill(load.begin(), load.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a = 0; a < r; ++a) load[cells[i * r + a]] += x[i];
    }
  };

  res.lower.assign(n, 0);
  res.upper.assign(n, std::numeric_limits<std::int64_t>::max());
  const auto total = static_cast<std::int64_t>(sketch.total_count());
  for (std::size_t it = 1; it <= opts.max_iters; ++it) {
    const auto prev_lower = res.lower;
    const auto prev_upper = res.upper;
    apply(res.lower);
    for (std::size_t x = 0; x < n; ++x) {
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      for (std::size_t a = 0; a < r; ++a) {
        const std::size_t c = cells[x * r + a];
        best = std::min(best, v[c] - load[c] + res.lower[x]);
      }
      res.upper[x] = std::min(res.upper[x], best);
    }
    apply(res.upper);
    for (std::size_t x = 0; x < n; ++x) {
      std::int64_t best = 0;
      for (std::size_t a = 0; a < r; ++a) {
        const std::size_t c = cells[x * r + a];
        best = std::max(best, res.upper[x] - load[c] + v[c]);
      }
      res.lower[x] = std::max(res.lower[x], best);
    }
    res.iterations = it;
    if (opts.observer) opts.observer(it, res.lower, res.upper);

    std::int64_t sum_lower = 0, sum_upper = 0;
    for (std::size_t x = 0; x < n; ++x) {
      if (res.lower[x] > res.upper[x]) throw UniverseError("bounds crossed: the universe is missing an inserted item");
      sum_lower += res.lower[x];
      sum_upper += res.upper[x];
    }
    if (sum_upper < total || sum_lower > total) {
      throw UniverseError("bounds are inconsistent with the total count: the universe is missing an inserted item");
    }
    if (res.lower == prev_lower && res.upper == prev_upper) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace cmx
