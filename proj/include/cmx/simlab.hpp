#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cmx/empirical.hpp"
#include "cmx/estimators.hpp"
#include "cmx/intervals.hpp"
#include "cmx/io.hpp"
#include "cmx/logconcave.hpp"
#include "cmx/sketch.hpp"
#include "cmx/statistic.hpp"

namespace cmx {

// ---------------------------------------------------------------------------
// Count distributions.

enum class CountFamily { zipf_mandelbrot, negative_binomial, point, truncated_normal };

/// Parametric family for synthetic item counts.
///   zipf_mandelbrot(alpha, a): p(x) ∝ (a + x)^(-alpha) on {1, ..., d}
///   negative_binomial(size, p): mean size (1 - p) / p
///   point(c): every count equals c
///   truncated_normal(offset, sigma): round(sigma (Z - offset)) with Z ~ N(0,1) given Z >= offset
struct CountDistribution {
  CountFamily family = CountFamily::point;
  double first = 1.0;
  double second = 0.0;

  static CountDistribution zipf_mandelbrot(double alpha, double a = 0.0) {
    return checked({CountFamily::zipf_mandelbrot, alpha, a});
  }
  static CountDistribution negative_binomial(double size, double p) {
    return checked({CountFamily::negative_binomial, size, p});
  }
  static CountDistribution point(double c) { return checked({CountFamily::point, c, 0.0}); }
  static CountDistribution truncated_normal(double offset, double sigma) {
    return checked({CountFamily::truncated_normal, offset, sigma});
  }

  std::string describe() const {
    switch (family) {
      case CountFamily::zipf_mandelbrot: return "zipf_mandelbrot(" + format_number(first) + "," + format_number(second) + ")";
      case CountFamily::negative_binomial: return "negative_binomial(" + format_number(first) + "," + format_number(second) + ")";
      case CountFamily::point: return "point(" + format_number(first) + ")";
      case CountFamily::truncated_normal: return "truncated_normal(" + format_number(first) + "," + format_number(second) + ")";
    }
    return "unknown";
  }

 private:
  static CountDistribution checked(CountDistribution d) {
    switch (d.family) {
      case CountFamily::zipf_mandelbrot:
        if (!(d.first > 0.0) || !(d.second > -1.0)) throw std::invalid_argument("zipf needs alpha > 0 and a > -1");
        break;
      case CountFamily::negative_binomial:
        if (!(d.first > 0.0) || !(d.second > 0.0 && d.second < 1.0)) {
          throw std::invalid_argument("negative binomial needs size > 0 and p in (0, 1)");
        }
        break;
      case CountFamily::point:
        if (!(d.first >= 0.0) || d.first != std::floor(d.first)) throw std::invalid_argument("point count must be a non-negative integer");
        break;
      case CountFamily::truncated_normal:
        if (!(d.second > 0.0) || !std::isfinite(d.first)) throw std::invalid_argument("truncated normal needs sigma > 0");
        break;
    }
    return d;
  }
};

/// Z ~ N(0, 1) conditioned on Z >= t. Plain rejection near the mode, exponential-proposal
/// rejection in the far tail.
template <class Rng>
double sample_upper_tail_normal(double t, Rng& rng) {
  if (t < 0.5) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (;;) {
      const double z = n(rng);
      if (z >= t) return z;
    }
  }
  const double rate = 0.5 * (t + std::sqrt(t * t + 4.0));
  std::exponential_distribution<double> e(rate);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    const double z = t + e(rng);
    const double d = z - rate;
    if (u(rng) <= std::exp(-0.5 * d * d)) return z;
  }
}

/// Draws counts from one distribution; the Zipf table is built once.
class CountSampler {
 public:
  CountSampler(const CountDistribution& dist, std::size_t universe) : dist_(dist) {
    if (universe < 1) throw std::invalid_argument("universe must be non-empty");
    if (dist.family == CountFamily::zipf_mandelbrot) {
      cdf_.resize(universe);
      double acc = 0.0;
      for (std::size_t x = 1; x <= universe; ++x) {
        acc += std::pow(dist.second + static_cast<double>(x), -dist.first);
        cdf_[x - 1] = acc;
      }
      for (auto& c : cdf_) c /= acc;
      cdf_.back() = 1.0;
    }
  }

  template <class Rng>
  std::int64_t operator()(Rng& rng) const {
    switch (dist_.family) {
      case CountFamily::zipf_mandelbrot: {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double q = u(rng);
        const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), q);
        return static_cast<std::int64_t>(it - cdf_.begin()) + 1;
      }
      case CountFamily::negative_binomial: {
        // Gamma-Poisson mixture handles non-integer size.
        std::gamma_distribution<double> gamma(dist_.first, (1.0 - dist_.second) / dist_.second);
        const double lambda = gamma(rng);
        if (lambda <= 0.0) return 0;
        std::poisson_distribution<std::int64_t> pois(lambda);
        return pois(rng);
      }
      case CountFamily::point:
        return static_cast<std::int64_t>(dist_.first);
      case CountFamily::truncated_normal:
        return static_cast<std::int64_t>(std::llround(dist_.second * (sample_upper_tail_normal(dist_.first, rng) - dist_.first)));
    }
    return 0;
  }

 private:
  CountDistribution dist_;
  std::vector<double> cdf_;
};

/// Exact mean of the Zipf-Mandelbrot law on {1, ..., d}.
inline double zipf_mandelbrot_mean(double alpha, double a, std::size_t d) {
  double num = 0.0, den = 0.0;
  for (std::size_t x = 1; x <= d; ++x) {
    const double w = std::pow(a + static_cast<double>(x), -alpha);
    num += static_cast<double>(x) * w;
    den += w;
  }
  return num / den;
}

struct ItemCount {
  std::string item;
  std::int64_t count = 0;
};

inline std::string item_name(std::size_t i) { return "item" + std::to_string(i); }

/// d items named item0 .. item{d-1} with i.i.d. counts; deterministic per seed.
inline std::vector<ItemCount> generate(const CountDistribution& dist, std::size_t universe, std::uint64_t seed) {
  const CountSampler sampler(dist, universe);
  std::mt19937_64 rng(seed);
  std::vector<ItemCount> out;
  out.reserve(universe);
  for (std::size_t i = 0; i < universe; ++i) out.push_back({item_name(i), sampler(rng)});
  return out;
}

inline CountPlusSketch build_sketch(std::span<const ItemCount> items, const SketchConfig& config) {
  CountPlusSketch s(config);
  for (const auto& ic : items) s.update(ic.item, ic.count);
  return s;
}

/// The m items with the largest counts (ties by name), in that order.
inline std::vector<ItemCount> top_items(std::span<const ItemCount> items, std::size_t m) {
  std::vector<ItemCount> sorted(items.begin(), items.end());
  const std::size_t take = std::min(m, sorted.size());
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(take), sorted.end(),
                    [](const ItemCount& a, const ItemCount& b) { return a.count != b.count ? a.count > b.count : a.item < b.item; });
  sorted.resize(take);
  return sorted;
}

// ---------------------------------------------------------------------------
// Metrics.

inline double mean_squared(std::span<const double> errors) {
  if (errors.empty()) throw std::invalid_argument("no errors");
  double s = 0.0;
  for (double e : errors) s += e * e;
  return s / static_cast<double>(errors.size());
}

inline double rmse(std::span<const double> errors) { return std::sqrt(mean_squared(errors)); }

inline double mean_signed_error(std::span<const double> errors) {
  if (errors.empty()) throw std::invalid_argument("no errors");
  return std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
}

/// MSE of the second estimator over the MSE of the first; > 1 favors the first.
/// +inf when only the first is exact, 1 when both are.
inline double relative_efficiency(std::span<const double> first_errors, std::span<const double> second_errors) {
  if (first_errors.size() != second_errors.size()) throw std::invalid_argument("error lists differ in length");
  const double m1 = mean_squared(first_errors);
  const double m2 = mean_squared(second_errors);
  if (m1 == 0.0) return m2 == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return m2 / m1;
}

/// Fraction of closed intervals [lo, hi] containing the truth.
inline double coverage(std::span<const ConfidenceInterval> intervals, std::span<const double> truths) {
  if (intervals.size() != truths.size()) throw std::invalid_argument("interval and truth lists differ in length");
  if (intervals.empty()) throw std::invalid_argument("no intervals");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i) hit += intervals[i].contains(truths[i]) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(intervals.size());
}

// ---------------------------------------------------------------------------
// Estimator suite shared by the evaluation harness and the CLI.

inline const std::vector<std::string>& estimator_names() {
  static const std::vector<std::string> names{"min", "debiased-min", "debiased-mean", "debiased-median",
                                              "mle", "debiased-mle", "bayes"};
  return names;
}

inline bool is_estimator_name(std::string_view name) {
  const auto& n = estimator_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

struct SuiteOptions {
  /// 0: distribution of T over the sketch columns; > 0: bootstrap with this many resamples.
  std::size_t resamples = 0;
  double trim_fraction = kDefaultTrimFraction;
  std::uint64_t seed = 0;
};

/// Query-time state for one estimator on one sketch: the statistic, its error distribution G
/// and bias mu, and the fitted density for likelihood estimators.
class EstimatorSuite {
 public:
  EstimatorSuite(const CountPlusSketch& sketch, std::string name, const SuiteOptions& opts = {})
      : sketch_(&sketch), name_(std::move(name)) {
    if (!is_estimator_name(name_)) throw std::invalid_argument("unknown estimator '" + name_ + "'");
    if (name_ == "min" || name_ == "debiased-min") {
      min_model_ = std::make_unique<DebiasedMinModel>(sketch);
      return;
    }
    const bool likelihood = name_ == "mle" || name_ == "debiased-mle" || name_ == "bayes";
    if (likelihood) {
      const auto errors = error_sample(sketch, {}, opts.trim_fraction);
      density_ = std::make_shared<const LogConcaveDensity>(
          name_ == "bayes" ? fit_log_concave_with_zero_atom(errors) : fit_log_concave(errors));
      stat_ = std::make_unique<Statistic>(Statistic::mle(density_));
    } else if (name_ == "debiased-mean") {
      stat_ = std::make_unique<Statistic>(Statistic::mean());
    } else {
      stat_ = std::make_unique<Statistic>(Statistic::median());
    }
    if (opts.resamples == 0) {
      bias_ = column_bias_model(sketch, *stat_);
    } else {
      bias_ = bootstrap_bias_model(error_sample(sketch), *stat_, sketch.depth(), opts.resamples, opts.seed);
    }
  }

  const std::string& name() const { return name_; }
  const LogConcaveDensity* density() const { return density_.get(); }
  double mu() const { return min_model_ ? min_model_->mu() : bias_.mu; }

  EstimateWithInterval query(std::string_view item, double level) const {
    const auto v = sketch_->item_values(item);
    if (min_model_) {
      auto out = min_model_->query(v, level);
      if (name_ == "min") out.estimate = make_estimate(*std::min_element(v.begin(), v.end()), "min");
      return out;
    }
    const double t = (*stat_)(v);
    const auto ci = bootstrap_ci(t, bias_.distribution, (1.0 - level) / 2.0, (1.0 + level) / 2.0);
    if (name_ == "mle") return {mle_estimate(v, *density_), ci};
    if (name_ == "bayes") return {bayes_estimate(v, *density_, Prior::uniform(), BayesLoss::squared), ci};
    return {make_estimate(t - bias_.mu, name_), ci};
  }

 private:
  const CountPlusSketch* sketch_;
  std::string name_;
  std::unique_ptr<DebiasedMinModel> min_model_;
  std::shared_ptr<const LogConcaveDensity> density_;
  std::unique_ptr<Statistic> stat_;
  BiasModel bias_;
};

// ---------------------------------------------------------------------------
// Scenarios.

struct ScenarioConfig {
  CountDistribution distribution = CountDistribution::zipf_mandelbrot(2.0, 0.0);
  std::size_t universe = 100000;
  std::uint32_t depth = 4;
  std::uint32_t width = 16384;
  std::uint64_t seed = 1;
  /// True when the scenario file set the seed itself.
  bool seed_given = false;
  std::size_t top = 2000;
  std::vector<std::string> estimators{"min", "debiased-min", "debiased-mean", "debiased-median", "mle", "debiased-mle"};
  std::vector<double> levels{0.5, 0.9, 0.99};
  std::size_t resamples = 0;
  double trim_fraction = kDefaultTrimFraction;
  /// Optional TSV stream replacing the synthetic generator.
  std::string source;
  bool strict = true;
};

namespace detail {

inline std::string trim_ws(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto part = trim_ws(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!part.empty()) out.push_back(part);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw std::invalid_argument("bad number for '" + key + "': " + v);
  return x;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("bad integer for '" + key + "': " + v);
  return x;
}

}  // namespace detail

/// Reads a flat "key = value" scenario file ('#' starts a comment). Keys:
///   distribution (zipf | negative_binomial | point | truncated_normal), alpha, offset, size, p,
///   count, sigma, d, depth, width, seed, top, estimators, levels, bootstrap, trim, source, strict
inline ScenarioConfig parse_scenario(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto t = detail::trim_ws(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("scenario line " + std::to_string(lineno) + ": expected key = value");
    kv[detail::trim_ws(t.substr(0, eq))] = detail::trim_ws(t.substr(eq + 1));
  }
  static const std::vector<std::string> known{"distribution", "alpha", "offset", "size", "p", "count", "sigma", "d",
                                              "depth", "width", "seed", "top", "estimators", "levels", "bootstrap",
                                              "trim", "source", "strict"};
  for (const auto& [k, v] : kv) {
    if (std::find(known.begin(), known.end(), k) == known.end()) throw std::invalid_argument("unknown scenario key '" + k + "'");
  }
  auto num = [&](const std::string& k, double def) { return kv.count(k) ? detail::parse_double(k, kv[k]) : def; };
  auto uint = [&](const std::string& k, std::uint64_t def) { return kv.count(k) ? detail::parse_uint(k, kv[k]) : def; };

  ScenarioConfig cfg;
  const std::string family = kv.count("distribution") ? kv["distribution"] : "zipf";
  if (family == "zipf" || family == "zipf_mandelbrot") {
    cfg.distribution = CountDistribution::zipf_mandelbrot(num("alpha", 2.0), num("offset", 0.0));
  } else if (family == "negative_binomial" || family == "nb") {
    cfg.distribution = CountDistribution::negative_binomial(num("size", 30.0), num("p", 0.01));
  } else if (family == "point") {
    cfg.distribution = CountDistribution::point(num("count", 1.0));
  } else if (family == "truncated_normal") {
    cfg.distribution = CountDistribution::truncated_normal(num("offset", 0.0), num("sigma", 1.0));
  } else {
    throw std::invalid_argument("unknown distribution '" + family + "'");
  }
  cfg.universe = uint("d", cfg.universe);
  cfg.depth = static_cast<std::uint32_t>(uint("depth", cfg.depth));
  cfg.width = static_cast<std::uint32_t>(uint("width", cfg.width));
  cfg.seed = uint("seed", cfg.seed);
  cfg.seed_given = kv.count("seed") > 0;
  cfg.top = uint("top", cfg.top);
  cfg.resamples = uint("bootstrap", cfg.resamples);
  cfg.trim_fraction = num("trim", cfg.trim_fraction);
  if (kv.count("estimators")) {
    cfg.estimators = detail::split_list(kv["estimators"]);
    for (const auto& e : cfg.estimators) {
      if (!is_estimator_name(e)) throw std::invalid_argument("unknown estimator '" + e + "'");
    }
  }
  if (kv.count("levels")) {
    cfg.levels.clear();
    for (const auto& l : detail::split_list(kv["levels"])) {
      const double x = detail::parse_double("levels", l);
      if (!(x > 0.0 && x < 1.0)) throw std::invalid_argument("levels must be in (0, 1)");
      cfg.levels.push_back(x);
    }
  }
  if (kv.count("source")) cfg.source = kv["source"];
  if (kv.count("strict")) cfg.strict = kv["strict"] != "false" && kv["strict"] != "0";
  if (cfg.universe < 1 || cfg.depth < 1 || cfg.width < 1 || cfg.top < 1) {
    throw std::invalid_argument("d, depth, width and top must be positive");
  }
  return cfg;
}

struct QueryRecord {
  std::string item;
  double truth = 0.0;
  std::string estimator;
  double estimate = 0.0;
  double raw = 0.0;
  double level = 0.0;
  ConfidenceInterval interval;
};

struct EstimatorSummary {
  std::string estimator;
  std::size_t queries = 0;
  double rmse = 0.0;
  double mean_signed_error = 0.0;
  /// MSE of the Min estimator over this estimator's MSE (> 1 means better than Min).
  double relative_efficiency = 1.0;
  std::vector<double> coverage;      // per level
  std::vector<double> median_width;  // per level
};

struct EvalReport {
  std::vector<double> levels;
  std::vector<EstimatorSummary> rows;
  std::vector<QueryRecord> queries;
  double wall_seconds = 0.0;

  const EstimatorSummary& row(std::string_view estimator) const {
    for (const auto& r : rows) {
      if (r.estimator == estimator) return r;
    }
    throw std::out_of_range("no report row for '" + std::string(estimator) + "'");
  }

  /// Metrics only; wall time is left out so identical runs give identical bytes.
  void write_report_csv(std::ostream& out) const {
    out << "estimator,queries,rmse,mean_signed_error,relative_efficiency,level,coverage,median_width\n";
    for (const auto& r : rows) {
      for (std::size_t l = 0; l < levels.size(); ++l) {
        write_csv_row(out, {r.estimator, std::to_string(r.queries), format_number(r.rmse), format_number(r.mean_signed_error),
                            format_number(r.relative_efficiency), format_number(levels[l]), format_number(r.coverage[l]),
                            format_number(r.median_width[l])});
      }
    }
  }

  void write_queries_csv(std::ostream& out) const {
    out << "item,truth,estimator,estimate,raw,level,lo,hi,kind\n";
    for (const auto& q : queries) {
      write_csv_row(out, {q.item, format_number(q.truth), q.estimator, format_number(q.estimate), format_number(q.raw),
                          format_number(q.level), format_number(q.interval.lo), format_number(q.interval.hi),
                          std::string(to_string(q.interval.kind))});
    }
  }
};

/// Items and exact counts for a scenario: synthetic, or aggregated from a TSV stream.
inline std::vector<ItemCount> scenario_items(const ScenarioConfig& cfg) {
  if (cfg.source.empty()) return generate(cfg.distribution, cfg.universe, cfg.seed);
  std::ifstream in(cfg.source);
  if (!in) throw std::runtime_error("cannot open " + cfg.source);
  std::unordered_map<std::string, std::int64_t> counts;
  std::vector<std::string> order;
  for_each_record(in, cfg.strict, [&](std::string_view item, std::int64_t c) {
    auto [it, fresh] = counts.try_emplace(std::string(item), 0);
    if (fresh) order.push_back(it->first);
    it->second += c;
  });
  std::vector<ItemCount> out;
  out.reserve(order.size());
  for (const auto& k : order) out.push_back({k, counts[k]});
  return out;
}

inline EvalReport run_scenario(const ScenarioConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const auto items = scenario_items(cfg);
  if (items.empty()) throw std::invalid_argument("scenario has no items");
  const auto sketch = build_sketch(items, SketchConfig::from_master_seed(cfg.depth, cfg.width, cfg.seed));
  const auto queries = top_items(items, cfg.top);

  EvalReport report;
  report.levels = cfg.levels;
  std::vector<double> min_errors;
  for (const auto& q : queries) {
    const auto v = sketch.item_values(q.item);
    min_errors.push_back(*std::min_element(v.begin(), v.end()) - static_cast<double>(q.count));
  }

  SuiteOptions opts;
  opts.resamples = cfg.resamples;
  opts.trim_fraction = cfg.trim_fraction;
  opts.seed = cfg.seed;
  for (const auto& name : cfg.estimators) {
    const EstimatorSuite suite(sketch, name, opts);
    EstimatorSummary row;
    row.estimator = name;
    row.queries = queries.size();
    std::vector<double> errors;
    std::vector<std::vector<ConfidenceInterval>> intervals(cfg.levels.size());
    std::vector<double> truths;
    for (const auto& q : queries) {
      const double truth = static_cast<double>(q.count);
      truths.push_back(truth);
      for (std::size_t l = 0; l < cfg.levels.size(); ++l) {
        const auto r = suite.query(q.item, cfg.levels[l]);
        if (l == 0) errors.push_back(r.estimate.value - truth);
        intervals[l].push_back(r.interval);
        report.queries.push_back({q.item, truth, name, r.estimate.value, r.estimate.raw, cfg.levels[l], r.interval});
      }
      if (cfg.levels.empty()) {
        const auto r = suite.query(q.item, 0.5);
        errors.push_back(r.estimate.value - truth);
      }
    }
    row.rmse = rmse(errors);
    row.mean_signed_error = mean_signed_error(errors);
    row.relative_efficiency = relative_efficiency(errors, min_errors);
    for (std::size_t l = 0; l < cfg.levels.size(); ++l) {
      row.coverage.push_back(coverage(intervals[l], truths));
      std::vector<double> widths;
      for (const auto& ci : intervals[l]) widths.push_back(ci.width());
      std::nth_element(widths.begin(), widths.begin() + static_cast<std::ptrdiff_t>(widths.size() / 2), widths.end());
      row.median_width.push_back(widths[widths.size() / 2]);
    }
    report.rows.push_back(std::move(row));
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Location experiment: one count observed through r errors from a truncated normal.

struct LocationResult {
  double offset = 0.0;
  double rmse_min = 0.0;
  double rmse_mean = 0.0;
  double rmse_mle = 0.0;

  double best() const { return std::min({rmse_min, rmse_mean, rmse_mle}); }
};

/// Errors are sigma (Z - offset) with Z ~ N(0,1) given Z >= offset: a large negative offset puts
/// little density near zero, a large positive one a lot. A pool of `pool` errors stands in for
/// the other counters; each trial draws r fresh errors. Every estimator is debiased by its mean
/// over `resamples` bootstrap draws from the pool.
inline LocationResult run_location_experiment(double offset, double sigma, std::size_t r, std::size_t pool,
                                              std::size_t trials, std::size_t resamples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto draw = [&] { return sigma * (sample_upper_tail_normal(offset, rng) - offset); };
  std::vector<double> errors(pool);
  for (auto& e : errors) e = draw();
  const ErrorSample sample(errors, kDefaultTrimFraction);
  const auto f = std::make_shared<const LogConcaveDensity>(fit_log_concave(sample));
  const Statistic stats[3] = {Statistic::min(), Statistic::mean(), Statistic::mle(f)};
  double mu[3];
  for (int s = 0; s < 3; ++s) mu[s] = bootstrap_bias_model(sample, stats[s], r, resamples, seed + 1).mu;

  double sq[3] = {0.0, 0.0, 0.0};
  std::vector<double> obs(r);
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& o : obs) o = draw();
    for (int s = 0; s < 3; ++s) {
      const double e = stats[s](obs) - mu[s];
      sq[s] += e * e;
    }
  }
  const double n = static_cast<double>(trials);
  return {offset, std::sqrt(sq[0] / n), std::sqrt(sq[1] / n), std::sqrt(sq[2] / n)};
}

}  // namespace cmx
