#include <gtest/gtest.h>

#include <map>
#include <random>
#include <sstream>

#include "cmx/empirical.hpp"
#include "cmx/simlab.hpp"
#include "cmx/statistic.hpp"

using namespace cmx;

namespace {

// 2 x 3 sketch with counters {1,2,3; 1,2,3}.
CountPlusSketch small_sketch() {
  return CountPlusSketch::from_state(SketchConfig(2, 3, {1, 2}), 6, {1, 2, 3, 1, 2, 3});
}

// Rows of a real sketch always share one sum.
CountPlusSketch two_by_three() {
  return CountPlusSketch::from_state(SketchConfig(2, 3, {1, 2}), 15, {4, 5, 6, 3, 5, 7});
}

}  // namespace

TEST(ErrorSample, AllCountersSorted) {
  const auto e = error_sample(two_by_three());
  const std::vector<double> want{3, 4, 5, 5, 6, 7};
  EXPECT_TRUE(std::equal(want.begin(), want.end(), e.values().begin(), e.values().end()));
}

TEST(ErrorSample, Exclusion) {
  const auto s = small_sketch();
  const auto e = error_sample(s, {{0, 0}, {1, 2}});
  const std::vector<double> want{1, 2, 2, 3};
  EXPECT_TRUE(std::equal(want.begin(), want.end(), e.values().begin(), e.values().end()));
  EXPECT_EQ(e.size() + e.excluded().size(), 6u);
  IndexSet all;
  for (std::uint32_t a = 0; a < 2; ++a) {
    for (std::uint32_t c = 0; c < 3; ++c) all.push_back({a, c});
  }
  EXPECT_THROW(error_sample(s, all), std::invalid_argument);
}

TEST(ErrorSample, TrimDropsLargestOnePercent) {
  std::vector<double> v(10000);
  std::iota(v.begin(), v.end(), 0.0);
  const ErrorSample e(v, 0.01);
  EXPECT_EQ(e.trimmed().size(), 9900u);
  EXPECT_EQ(e.trimmed().back(), 9899.0);
  // Quantile queries see every value.
  EXPECT_EQ(e.quantile(1.0), 9999.0);
  EXPECT_THROW(ErrorSample(v, 0.5), std::invalid_argument);
}

TEST(EmpiricalCdf, Quantiles) {
  const EmpiricalCdf f({1, 2, 3, 4});
  EXPECT_EQ(f.quantile(0.5), 2.0);
  EXPECT_EQ(f.quantile(0.0), 1.0);
  EXPECT_EQ(f.quantile(1.0), 4.0);
  EXPECT_EQ(f.cdf(2.0), 0.5);
  EXPECT_EQ(f.cdf_strict(2.0), 0.25);
}

TEST(EmpiricalCdf, GeneralizedInverseProperties) {
  std::mt19937_64 rng(4);
  std::vector<double> v(257);
  for (auto& x : v) x = static_cast<double>(rng() % 40);
  const EmpiricalCdf f(v);
  for (double x : v) EXPECT_LE(f.quantile(f.cdf(x)), x);
  for (int i = 0; i <= 100; ++i) {
    const double q = i / 100.0;
    EXPECT_GE(f.cdf(f.quantile(q)), q - 1e-12);
  }
}

TEST(EmpiricalCdf, UniformQuantileMonteCarlo) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(100000);
  for (auto& x : v) x = u(rng);
  EXPECT_NEAR(EmpiricalCdf(v).quantile(0.3), 0.3, 0.01);
}

TEST(EmpiricalCdf, CsvExport) {
  std::ostringstream out;
  EmpiricalCdf({0, 0, 1, 3}).write_csv(out);
  EXPECT_EQ(out.str(), "value,cumulative_probability\n0,0.5\n1,0.75\n3,1\n");
}

TEST(ColumnStatistic, MinAndMean) {
  // r = 2, k = 2: columns (1,1) and (2,2), then (3,3) and (4,4).
  const auto s = CountPlusSketch::from_state(SketchConfig(2, 2, {1, 2}), 3, {1, 2, 1, 2});
  const auto g_min = column_statistic_distribution(s, Statistic::min());
  EXPECT_EQ(g_min.mean(), 1.5);
  const auto s2 = CountPlusSketch::from_state(SketchConfig(2, 2, {1, 2}), 7, {3, 4, 3, 4});
  const auto g_mean = column_statistic_distribution(s2, Statistic::mean());
  EXPECT_EQ(g_mean.mean(), 3.5);
}

TEST(ColumnStatistic, MinOfPoissonMatchesMonteCarlo) {
  constexpr std::uint32_t r = 4, k = 4096;
  std::mt19937_64 rng(21);
  std::poisson_distribution<std::uint64_t> pois(3.0);
  // Independent counters per cell; rows balanced by building the state directly.
  std::vector<std::uint64_t> counters(r * k);
  for (auto& c : counters) c = pois(rng);
  std::uint64_t target = 0;
  for (std::uint32_t a = 0; a < r; ++a) {
    std::uint64_t sum = 0;
    for (std::uint32_t i = 0; i < k; ++i) sum += counters[a * k + i];
    target = std::max(target, sum);
  }
  // Pad each row's last counter so every row sums to the same total; one cell per row is perturbed.
  for (std::uint32_t a = 0; a < r; ++a) {
    std::uint64_t sum = 0;
    for (std::uint32_t i = 0; i < k; ++i) sum += counters[a * k + i];
    counters[a * k + k - 1] += target - sum;
  }
  const auto s = CountPlusSketch::from_state(SketchConfig::from_master_seed(r, k, 1), target, counters);
  const double mu = column_statistic_distribution(s, Statistic::min()).mean();

  // Oracle: Monte Carlo of min over 4 i.i.d. Poisson(3) draws.
  constexpr int trials = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int t = 0; t < trials; ++t) {
    std::uint64_t m = pois(rng);
    for (std::uint32_t a = 1; a < r; ++a) m = std::min(m, pois(rng));
    sum += static_cast<double>(m);
    sum2 += static_cast<double>(m * m);
  }
  const double mc = sum / trials;
  const double var = sum2 / trials - mc * mc;
  // The sketch value is itself an average over k columns; combine both standard errors.
  const double se = std::sqrt(var / trials + var / (k - 1));
  EXPECT_NEAR(mu, mc, 2.0 * se + 20.0 / k);
}

TEST(Bootstrap, ConstantErrorsGivePointMass) {
  const std::vector<double> errors(50, 7.0);
  for (const auto& stat : {Statistic::min(), Statistic::mean(), Statistic::median(), Statistic::trimmed_mean()}) {
    const auto g = bootstrap_statistic_distribution(std::span<const double>(errors), stat, 5, 200, 3);
    EXPECT_EQ(g.min(), 7.0);
    EXPECT_EQ(g.max(), 7.0);
  }
}

TEST(Bootstrap, BernoulliFromTwoValues) {
  const std::vector<double> errors{0.0, 1.0};
  constexpr std::size_t B = 4000;
  const auto g = bootstrap_statistic_distribution(std::span<const double>(errors), Statistic::min(), 1, B, 9);
  EXPECT_NEAR(g.cdf(0.0), 0.5, 3.0 / std::sqrt(static_cast<double>(B)));
}

TEST(Bootstrap, MedianMeanMatchesEnumeration) {
  const std::vector<double> errors{0, 0, 1, 1, 2, 3, 5, 8, 40, 250};
  constexpr std::size_t r = 4, B = 2000;
  const auto stat = Statistic::median();
  // Oracle: all 10^4 ordered tuples.
  double exact = 0.0, exact2 = 0.0;
  std::vector<double> t(r);
  for (int code = 0; code < 10000; ++code) {
    int c = code;
    for (std::size_t j = 0; j < r; ++j, c /= 10) t[j] = errors[static_cast<std::size_t>(c % 10)];
    const double m = stat(t);
    exact += m;
    exact2 += m * m;
  }
  exact /= 10000;
  const double sd = std::sqrt(exact2 / 10000 - exact * exact);
  const auto g = bootstrap_statistic_distribution(std::span<const double>(errors), stat, r, B, 12);
  EXPECT_NEAR(g.mean(), exact, 3.0 * sd / std::sqrt(static_cast<double>(B)));
}

TEST(Bootstrap, DeterministicForSeed) {
  const std::vector<double> errors{0, 1, 2, 3, 4, 9};
  const auto a = bootstrap_statistic_distribution(std::span<const double>(errors), Statistic::mean(), 3, 100, 5);
  const auto b = bootstrap_statistic_distribution(std::span<const double>(errors), Statistic::mean(), 3, 100, 5);
  EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  EXPECT_THROW(bootstrap_statistic_distribution(std::span<const double>(), Statistic::mean(), 3, 100, 5),
               std::invalid_argument);
}

TEST(Bootstrap, ColumnAndBootstrapBiasAgree) {
  CountPlusSketch s(SketchConfig::from_master_seed(4, 4096, 3));
  std::mt19937_64 rng(2);
  std::geometric_distribution<int> geo(0.2);
  for (int i = 0; i < 30000; ++i) s.update("e" + std::to_string(i), geo(rng));
  const auto stat = Statistic::mean();
  const auto boot = bootstrap_statistic_distribution(error_sample(s), stat, 4, 4000, 8);
  const double boot_se = std::sqrt(std::accumulate(boot.values().begin(), boot.values().end(), 0.0,
                                                   [&](double acc, double z) { return acc + (z - boot.mean()) * (z - boot.mean()); }) /
                                   static_cast<double>(boot.size() - 1)) /
                         std::sqrt(static_cast<double>(boot.size()));
  const auto item = "e17";
  const double mu_all = column_statistic_distribution(s, stat).mean();
  const auto excluded = bootstrap_statistic_distribution(error_sample(s, s.indices(item)), stat, 4, 4000, 8);
  EXPECT_LT(std::abs(mu_all - excluded.mean()), 3.0 * boot_se);
  EXPECT_LT(std::abs(mu_all - boot.mean()), 3.0 * boot_se);
}

TEST(Refresh, UnchangedAndDoubled) {
  CountPlusSketch s(SketchConfig::from_master_seed(2, 64, 1));
  for (int i = 0; i < 300; ++i) s.update("r" + std::to_string(i), 1 + i % 3);
  const auto sample = error_sample(s);
  EXPECT_FALSE(should_refresh(sample, s, 0.01));
  EXPECT_FALSE(should_refresh(sample, s, 1.0));
  EXPECT_THROW(should_refresh(sample, s, 0.0), std::invalid_argument);
  const auto doubled = merge(s, s);
  // Oracle: direct sup-distance between the two step functions over all support points.
  const auto before = sample.cdf();
  const auto after = error_sample(doubled).cdf();
  double ks = 0.0;
  for (double x : before.values()) ks = std::max(ks, std::abs(before.cdf(x) - after.cdf(x)));
  for (double x : after.values()) ks = std::max(ks, std::abs(before.cdf(x) - after.cdf(x)));
  EXPECT_EQ(should_refresh(sample, doubled, 0.01), ks >= 0.01);
  EXPECT_TRUE(should_refresh(sample, doubled, 0.01));
}

TEST(Refresh, LogarithmicUnderDoublingGrowth) {
  // Heavy-tailed counts make the error law a scale family, so the ECDF moves by a fixed amount
  // per doubling of the stream: refreshes per doubling should stay flat rather than grow.
  CountPlusSketch s(SketchConfig::from_master_seed(1, 256, 3));
  std::mt19937_64 rng(5);
  const CountSampler counts(CountDistribution::zipf_mandelbrot(1.5, 0.0), 1000000);
  auto sample = error_sample(s);
  int refreshes = 0;
  std::map<std::size_t, int> at;
  for (std::size_t n = 1; n <= (1u << 16); ++n) {
    s.update("g" + std::to_string(n), counts(rng));
    if (should_refresh(sample, s, 0.1)) {
      sample = error_sample(s);
      ++refreshes;
    }
    if ((n & (n - 1)) == 0) at[n] = refreshes;
  }
  const int early = at[1u << 12] - at[1u << 8];
  const int late = at[1u << 16] - at[1u << 12];
  EXPECT_GT(early, 0);
  EXPECT_LE(late, early + early / 2 + 3);
  EXPECT_LE(refreshes, 4 * 16);
}
