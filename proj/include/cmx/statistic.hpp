#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cmx/logconcave.hpp"

namespace cmx {

enum class StatisticKind { min, max, mean, median, quantile, trimmed_mean, mle, custom };

/// A named function over the r counter values of one item.
///
/// Every built-in kind is translation equivariant: T(v + c) = T(v) + c. The mle kind maximizes
/// sum_i log f(v_i - theta) over theta <= min(v) without a lower clamp at zero, which would break
/// the property.
class Statistic {
 public:
  using Fn = std::function<double(std::span<const double>)>;

  static Statistic min() { return Statistic(StatisticKind::min, "min", 0.0); }
  static Statistic max() { return Statistic(StatisticKind::max, "max", 0.0); }
  static Statistic mean() { return Statistic(StatisticKind::mean, "mean", 0.0); }
  static Statistic median() { return Statistic(StatisticKind::median, "median", 0.0); }

  /// Lower order statistic at level p: the max(1, ceil(p r))-th smallest value.
  static Statistic quantile(double p) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level must be in (0, 1]");
    return Statistic(StatisticKind::quantile, "quantile(" + format_number(p) + ")", p);
  }

  /// Mean after dropping the ceil(alpha r) largest values.
  static Statistic trimmed_mean(double alpha = 0.25) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("trim level must be in [0, 1)");
    return Statistic(StatisticKind::trimmed_mean, "trimmed_mean(" + format_number(alpha) + ")", alpha);
  }

  static Statistic mle(std::shared_ptr<const LogConcaveDensity> density) {
    if (!density) throw std::invalid_argument("mle statistic needs a density");
    Statistic s(StatisticKind::mle, "mle", 0.0);
    s.density_ = std::move(density);
    return s;
  }

  static Statistic mle(const LogConcaveDensity& density) {
    return mle(std::make_shared<const LogConcaveDensity>(density));
  }

  static Statistic custom(std::string name, Fn fn) {
    Statistic s(StatisticKind::custom, std::move(name), 0.0);
    s.fn_ = std::move(fn);
    return s;
  }

  StatisticKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double parameter() const { return param_; }
  const std::shared_ptr<const LogConcaveDensity>& density() const { return density_; }

  /// 1-based order index used for a sample of r values (min and quantile kinds only).
  std::size_t order_index(std::size_t r) const {
    if (kind_ == StatisticKind::min) return 1;
    if (kind_ == StatisticKind::quantile) {
      const auto i = static_cast<std::size_t>(std::ceil(param_ * static_cast<double>(r) - 1e-9));
      return std::clamp<std::size_t>(i, 1, r);
    }
    throw std::logic_error("statistic " + name_ + " is not an order statistic");
  }

  double operator()(std::span<const double> v) const {
    if (v.empty()) throw std::invalid_argument("statistic needs at least one value");
    switch (kind_) {
      case StatisticKind::min:
        return *std::min_element(v.begin(), v.end());
      case StatisticKind::max:
        return *std::max_element(v.begin(), v.end());
      case StatisticKind::mean:
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      case StatisticKind::median: {
        std::vector<double> s(v.begin(), v.end());
        std::sort(s.begin(), s.end());
        const std::size_t n = s.size();
        return n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
      }
      case StatisticKind::quantile: {
        std::vector<double> s(v.begin(), v.end());
        const std::size_t i = order_index(s.size()) - 1;
        std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(i), s.end());
        return s[i];
      }
      case StatisticKind::trimmed_mean: {
        std::vector<double> s(v.begin(), v.end());
        std::sort(s.begin(), s.end());
        auto drop = static_cast<std::size_t>(std::ceil(param_ * static_cast<double>(s.size()) - 1e-9));
        drop = std::min(drop, s.size() - 1);
        const std::size_t keep = s.size() - drop;
        return std::accumulate(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(keep), 0.0) / static_cast<double>(keep);
      }
      case StatisticKind::mle: {
        const double upper = *std::min_element(v.begin(), v.end());
        return maximize_shift(*density_, v, -std::numeric_limits<double>::infinity(), upper);
      }
      case StatisticKind::custom:
        return fn_(v);
    }
    return 0.0;
  }

 private:
  Statistic(StatisticKind kind, std::string name, double param) : kind_(kind), name_(std::move(name)), param_(param) {}

  StatisticKind kind_;
  std::string name_;
  double param_;
  std::shared_ptr<const LogConcaveDensity> density_;
  Fn fn_;
};

/// Randomized check of T(v + c) == T(v) + c (relative tolerance 1e-9) on vectors of length r.
inline bool translation_check(const Statistic& stat, std::size_t r = 4, std::size_t trials = 200, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> value(0.0, 100.0);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  std::vector<double> v(r), w(r);
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& x : v) x = std::round(value(rng));
    const double c = t % 2 ? std::round(shift(rng)) : shift(rng);
    for (std::size_t i = 0; i < r; ++i) w[i] = v[i] + c;
    const double base = stat(v);
    const double moved = stat(w);
    const double scale = 1.0 + std::abs(base) + std::abs(c);
    if (!(std::abs(moved - (base + c)) <= 1e-9 * scale)) return false;
  }
  return true;
}

}  // namespace cmx
