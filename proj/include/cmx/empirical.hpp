#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cmx/io.hpp"
#include "cmx/sketch.hpp"

namespace cmx {

/// Empirical c.d.f. over a finite multiset of draws.
///
/// cdf(x) = P(Z <= x), cdf_strict(x) = P(Z < x), quantile(q) = inf{x : cdf(x) >= q}.
class EmpiricalCdf {
 public:
  EmpiricalCdf() = default;

  explicit EmpiricalCdf(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw std::invalid_argument("empirical cdf needs at least one value");
    std::sort(values_.begin(), values_.end());
    mean_ = std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
  }

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::span<const double> values() const { return values_; }
  double min() const { return values_.front(); }
  double max() const { return values_.back(); }
  double mean() const { return mean_; }

  double cdf(double x) const {
    const auto it = std::upper_bound(values_.begin(), values_.end(), x);
    return static_cast<double>(it - values_.begin()) / static_cast<double>(values_.size());
  }

  double cdf_strict(double x) const {
    const auto it = std::lower_bound(values_.begin(), values_.end(), x);
    return static_cast<double>(it - values_.begin()) / static_cast<double>(values_.size());
  }

  double quantile(double q) const { return quantile_sorted(values_, q); }

  /// Generalized inverse on an already sorted, non-empty range.
  static double quantile_sorted(std::span<const double> sorted, double q) {
    const auto n = static_cast<double>(sorted.size());
    // The tiny slack keeps q*n that should be an integer from rounding up a rank.
    auto rank = static_cast<std::ptrdiff_t>(std::ceil(q * n - 1e-9));
    rank = std::clamp<std::ptrdiff_t>(rank, 1, static_cast<std::ptrdiff_t>(sorted.size()));
    return sorted[static_cast<std::size_t>(rank - 1)];
  }

  /// Distinct support points with their cumulative probabilities.
  std::vector<std::pair<double, double>> steps() const {
    std::vector<std::pair<double, double>> out;
    const auto n = static_cast<double>(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (i + 1 < values_.size() && values_[i + 1] == values_[i]) continue;
      out.emplace_back(values_[i], static_cast<double>(i + 1) / n);
    }
    return out;
  }

  void write_csv(std::ostream& out) const {
    out << "value,cumulative_probability\n";
    for (const auto& [v, p] : steps()) out << format_number(v) << ',' << format_number(p) << '\n';
  }

 private:
  std::vector<double> values_;
  double mean_ = 0.0;
};

/// Kolmogorov (sup-norm) distance between two empirical c.d.f.s.
inline double ks_distance(const EmpiricalCdf& a, const EmpiricalCdf& b) {
  auto va = a.values();
  auto vb = b.values();
  std::size_t i = 0, j = 0;
  double best = 0.0;
  const auto na = static_cast<double>(va.size());
  const auto nb = static_cast<double>(vb.size());
  while (i < va.size() || j < vb.size()) {
    double x;
    if (j >= vb.size() || (i < va.size() && va[i] <= vb[j])) {
      x = va[i];
    } else {
      x = vb[j];
    }
    while (i < va.size() && va[i] <= x) ++i;
    while (j < vb.size() && vb[j] <= x) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return best;
}

/// Draws from the error distribution: sketch counters minus an optional exclusion set.
///
/// Values are sorted ascending. Trimming is recorded here and applied only by consumers that
/// ask for trimmed() (density fitting); quantile queries always see every value.
class ErrorSample {
 public:
  ErrorSample() = default;

  ErrorSample(std::vector<double> values, double trim_fraction, IndexSet excluded = {}, std::uint64_t epoch = 0)
      : values_(std::move(values)), excluded_(std::move(excluded)), trim_fraction_(trim_fraction), epoch_(epoch) {
    if (!(trim_fraction_ >= 0.0 && trim_fraction_ < 0.5)) throw std::invalid_argument("trim fraction must be in [0, 0.5)");
    if (values_.empty()) throw std::invalid_argument("error sample is empty");
    std::sort(values_.begin(), values_.end());
  }

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  const IndexSet& excluded() const { return excluded_; }
  double trim_fraction() const { return trim_fraction_; }
  std::uint64_t source_epoch() const { return epoch_; }

  /// Number of largest values dropped by trimming.
  std::size_t trim_count() const {
    return static_cast<std::size_t>(std::floor(trim_fraction_ * static_cast<double>(values_.size()) + 1e-9));
  }

  std::span<const double> trimmed() const { return std::span<const double>(values_).first(values_.size() - trim_count()); }

  EmpiricalCdf cdf() const { return EmpiricalCdf(values_); }
  double quantile(double q) const { return EmpiricalCdf::quantile_sorted(values_, q); }

 private:
  std::vector<double> values_;
  IndexSet excluded_;
  double trim_fraction_ = 0.01;
  std::uint64_t epoch_ = 0;
};

inline constexpr double kDefaultTrimFraction = 0.01;

/// Error sample from every counter not in `exclude`.
inline ErrorSample error_sample(const CountPlusSketch& sketch, const IndexSet& exclude = {},
                                double trim_fraction = kDefaultTrimFraction) {
  std::vector<char> skip(sketch.counters().size(), 0);
  IndexSet excluded;
  for (const auto& c : exclude) {
    if (c.replicate >= sketch.depth() || c.column >= sketch.width()) throw std::out_of_range("exclusion index out of range");
    char& s = skip[sketch.flat(c.replicate, c.column)];
    if (!s) excluded.push_back(c);
    s = 1;
  }
  if (excluded.size() == sketch.counters().size()) throw std::invalid_argument("exclusion covers every counter");
  std::vector<double> values;
  values.reserve(sketch.counters().size() - excluded.size());
  const auto counters = sketch.counters();
  for (std::size_t i = 0; i < counters.size(); ++i) {
    if (!skip[i]) values.push_back(static_cast<double>(counters[i]));
  }
  return ErrorSample(std::move(values), trim_fraction, std::move(excluded), sketch.epoch());
}

/// Distribution of T over the k columns (T applied to the r counters of column i).
/// The mean of the result is the bias estimate mu.
template <class Stat>
EmpiricalCdf column_statistic_distribution(const CountPlusSketch& sketch, const Stat& stat) {
  std::vector<double> z;
  z.reserve(sketch.width());
  std::vector<double> column(sketch.depth());
  for (std::uint32_t i = 0; i < sketch.width(); ++i) {
    for (std::uint32_t a = 0; a < sketch.depth(); ++a) column[a] = static_cast<double>(sketch.counter(a, i));
    z.push_back(stat(std::span<const double>(column)));
  }
  return EmpiricalCdf(std::move(z));
}

/// Distribution of T over B resamples of r i.i.d. draws (with replacement) from the errors.
template <class Stat>
EmpiricalCdf bootstrap_statistic_distribution(std::span<const double> errors, const Stat& stat, std::size_t r,
                                              std::size_t resamples, std::uint64_t seed) {
  if (errors.empty()) throw std::invalid_argument("bootstrap needs a non-empty error sample");
  if (resamples < 1) throw std::invalid_argument("bootstrap needs at least one resample");
  if (r < 1) throw std::invalid_argument("bootstrap needs r >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, errors.size() - 1);
  std::vector<double> draw(r);
  std::vector<double> z;
  z.reserve(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    for (auto& d : draw) d = errors[pick(rng)];
    z.push_back(stat(std::span<const double>(draw)));
  }
  return EmpiricalCdf(std::move(z));
}

template <class Stat>
EmpiricalCdf bootstrap_statistic_distribution(const ErrorSample& errors, const Stat& stat, std::size_t r,
                                              std::size_t resamples = 1000, std::uint64_t seed = 0) {
  return bootstrap_statistic_distribution(errors.values(), stat, r, resamples, seed);
}

/// True when the live sketch's error c.d.f. has moved at least `delta` (sup-norm) away from the
/// stored one. A delta of 1 or more never triggers.
inline bool should_refresh(const ErrorSample& current, const CountPlusSketch& live, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("refresh threshold must be positive");
  if (delta >= 1.0) return false;
  const ErrorSample now = error_sample(live, current.excluded(), current.trim_fraction());
  return ks_distance(current.cdf(), now.cdf()) >= delta;
}

}  // namespace cmx
