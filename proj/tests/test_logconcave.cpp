#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <sstream>

#include "cmx/logconcave.hpp"

using namespace cmx;

namespace {

std::vector<double> sorted_sample(std::size_t n, std::uint64_t seed, auto&& draw) {
  std::mt19937_64 rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = draw(rng);
  std::sort(x.begin(), x.end());
  return x;
}

// Independent closed form of the objective in unit coordinates:
// sum_i w_i phi(u_i) - sum over segments of delta * (e^b - e^a) / (b - a).
double unit_objective(const std::vector<double>& u, const std::vector<double>& w, const std::vector<std::size_t>& support,
                      const std::vector<double>& theta) {
  double v = 0.0;
  for (std::size_t a = 0; a + 1 < support.size(); ++a) {
    const std::size_t lo = support[a], hi = support[a + 1];
    for (std::size_t i = lo; i < hi; ++i) {
      const double t = (u[i] - u[lo]) / (u[hi] - u[lo]);
      v += w[i] * ((1 - t) * theta[a] + t * theta[a + 1]);
    }
    const double d = theta[a + 1] - theta[a];
    const double integral = std::abs(d) < 1e-12 ? std::exp(theta[a]) : (std::exp(theta[a + 1]) - std::exp(theta[a])) / d;
    v -= (u[hi] - u[lo]) * integral;
  }
  v += w[support.back()] * theta.back();
  return v;
}

void expect_valid_fit(const LogConcaveDensity& f, std::span<const double> data) {
  EXPECT_LE(f.max_concavity_violation(), 1e-9);
  EXPECT_NEAR(f.knot_range_mass(), 1.0, 1e-6);
  EXPECT_NEAR(f.total_mass(), 1.0, 1e-6);
  EXPECT_LT(f.right_slope(), 0.0);
  EXPECT_LE(optimality_certificate(f, data), 1e-6);
  EXPECT_GE(f.knots().front(), data.front());
  EXPECT_LE(f.knots().back(), data.back());
}

}  // namespace

TEST(LogConcaveFit, TwoPointDataIsUniform) {
  const std::vector<double> x{0.0, 1.0};
  const auto f = fit_log_concave(x);
  ASSERT_EQ(f.knots().size(), 2u);
  for (double t = 0.0; t <= 1.0; t += 0.01) EXPECT_NEAR(f.log_density(t), 0.0, 1e-6);
  EXPECT_LE(optimality_certificate(f, x), 1e-6);
}

TEST(LogConcaveFit, TwoPointObjectiveOptimumByGrid) {
  // Oracle: brute force over linear phi(x) = a + b x on [0,1] for (phi(0) + phi(1)) / 2 - integral e^phi.
  double best = -1e300, best_a = 0, best_b = 0;
  for (double a = -1.0; a <= 1.0; a += 0.01) {
    for (double b = -1.0; b <= 1.0; b += 0.01) {
      const double integral = std::abs(b) < 1e-12 ? std::exp(a) : std::exp(a) * (std::exp(b) - 1.0) / b;
      const double val = (a + (a + b)) / 2.0 - integral;
      if (val > best) {
        best = val;
        best_a = a;
        best_b = b;
      }
    }
  }
  const auto f = fit_log_concave(std::vector<double>{0.0, 1.0});
  EXPECT_NEAR(f.phi()[0], best_a, 0.01);
  EXPECT_NEAR(f.phi()[1] - f.phi()[0], best_b, 0.01);
}

TEST(LogConcaveFit, NormalSampleSatisfiesPostconditions) {
  const auto x = sorted_sample(20000, 3, [](auto& rng) { return std::normal_distribution<double>(5.0, 2.0)(rng); });
  const auto f = fit_log_concave(x);
  expect_valid_fit(f, x);
  EXPECT_FALSE(f.is_decreasing());
}

TEST(LogConcaveFit, TiedIntegerSampleSatisfiesPostconditions) {
  const auto x = sorted_sample(10000, 4, [](auto& rng) {
    return static_cast<double>(std::poisson_distribution<int>(7.0)(rng));
  });
  expect_valid_fit(fit_log_concave(x), x);
}

TEST(LogConcaveFit, GeometricSlopeApproachesLogRatio) {
  constexpr double q = 0.95;
  const auto x = sorted_sample(100000, 5, [](auto& rng) {
    return static_cast<double>(std::geometric_distribution<int>(1.0 - q)(rng));
  });
  const auto f = fit_log_concave(x);
  expect_valid_fit(f, x);
  // Slope over the bulk of the data (10th to 90th percentile).
  const double lo = x[x.size() / 10], hi = x[9 * x.size() / 10];
  const double slope = (f.log_density(hi) - f.log_density(lo)) / (hi - lo);
  EXPECT_NEAR(slope, std::log(q), 0.05 * std::abs(std::log(q)));
}

TEST(LogConcaveFit, TruncatedNormalHasInteriorMode) {
  const auto x = sorted_sample(10000, 6, [](auto& rng) {
    double v;
    do {
      v = std::normal_distribution<double>(5.0, 1.0)(rng);
    } while (v < 0.0);
    return v;
  });
  const auto f = fit_log_concave(x);
  EXPECT_FALSE(f.is_decreasing());
  EXPECT_FALSE(project_decreasing_check(x));
}

TEST(LogConcaveFit, DecreasingPmfsGiveDecreasingFits) {
  using Draw = std::function<double(std::mt19937_64&)>;
  const std::vector<std::pair<std::string, Draw>> families{
      {"discretized exponential", [](auto& rng) { return std::floor(10.0 * std::exponential_distribution<double>(1.0)(rng)); }},
      {"geometric", [](auto& rng) { return static_cast<double>(std::geometric_distribution<int>(0.3)(rng)); }},
      {"poisson(0.5)", [](auto& rng) { return static_cast<double>(std::poisson_distribution<int>(0.5)(rng)); }},
  };
  for (const auto& [name, draw] : families) {
    int decreasing = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      decreasing += project_decreasing_check(sorted_sample(10000, 100 + seed, draw));
    }
    EXPECT_GE(decreasing, 18) << name;
  }
}

TEST(LogConcaveFit, AffineEquivariance) {
  const auto x = sorted_sample(3000, 7, [](auto& rng) { return std::gamma_distribution<double>(3.0, 2.0)(rng); });
  std::vector<double> shifted(x);
  for (auto& v : shifted) v += 123.25;
  const auto f = fit_log_concave(x);
  const auto g = fit_log_concave(shifted);
  ASSERT_EQ(f.knots().size(), g.knots().size());
  for (std::size_t i = 0; i < f.knots().size(); ++i) {
    EXPECT_NEAR(g.knots()[i], f.knots()[i] + 123.25, 1e-9);
    EXPECT_NEAR(g.phi()[i], f.phi()[i], 1e-7);
  }
}

TEST(LogConcaveFit, DegenerateAndEmpty) {
  const std::vector<double> same(10, 4.0);
  const auto f = fit_log_concave(same);
  EXPECT_TRUE(f.degenerate());
  EXPECT_NEAR(f.knot_range_mass(), 1.0, 1e-12);
  EXPECT_NEAR(f.knots()[1], 4.0, 0.0);
  EXPECT_NEAR(f.knots().back() - f.knots().front(), 1.0, 1e-12);
  EXPECT_THROW(fit_log_concave(std::span<const double>()), std::invalid_argument);
}

TEST(LogConcaveFit, ErrorSampleFitUsesTrimmedValues) {
  std::vector<double> v(1000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i % 50);
  v.back() = 1e6;
  const ErrorSample e(v, 0.01);
  const auto f = fit_log_concave(e);
  EXPECT_LE(f.knots().back(), 49.0);
  EXPECT_LE(optimality_certificate(f, e), 1e-6);
}

TEST(LogConcaveFit, ZeroAtomCarriesZeroFraction) {
  std::vector<double> v;
  for (int i = 0; i < 400; ++i) v.push_back(0.0);
  for (int i = 0; i < 600; ++i) v.push_back(1.0 + i % 7);
  const ErrorSample e(v, 0.0);
  const auto f = fit_log_concave_with_zero_atom(e);
  EXPECT_NEAR(f.atom_at_zero(), 0.4, 1e-12);
  EXPECT_NEAR(f.total_mass(), 1.0, 1e-9);
}

TEST(Certificate, PerturbedFitIsRejected) {
  const auto x = sorted_sample(5000, 8, [](auto& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); });
  const auto f = fit_log_concave(x);
  ASSERT_LE(optimality_certificate(f, x), 1e-6);
  ASSERT_GE(f.knots().size(), 3u);
  auto phi = f.phi();
  phi[phi.size() / 2] += 0.1;
  const LogConcaveDensity bumped(f.knots(), phi);
  EXPECT_GT(optimality_certificate(bumped, x), 1e-3);
}

TEST(Certificate, GradientMatchesFiniteDifferences) {
  // Random data and a random feasible (concave) phi on a random support.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> u(40);
  for (auto& v : u) v = unif(rng);
  std::sort(u.begin(), u.end());
  u.front() = 0.0;
  u.back() = 1.0;
  const std::vector<double> w(u.size(), 1.0 / static_cast<double>(u.size()));
  const std::vector<std::size_t> support{0, 7, 15, 22, 31, 39};
  std::vector<double> theta;
  for (auto s : support) theta.push_back(0.4 - 3.0 * (u[s] - 0.4) * (u[s] - 0.4) + 0.1 * unif(rng));

  detail::LogConcaveSolver solver(u, w, {});
  const auto g = solver.gradient(support, theta);
  for (std::size_t a = 0; a < theta.size(); ++a) {
    const double h = 1e-5;
    auto up = theta, down = theta;
    up[a] += h;
    down[a] -= h;
    const double fd = (unit_objective(u, w, support, up) - unit_objective(u, w, support, down)) / (2 * h);
    EXPECT_NEAR(g[a], fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Certificate, DirectionalDerivativeMatchesFiniteDifference) {
  // Bending phi down at a non-knot data point: derivative of the objective along -(u - u_j)_+.
  std::vector<double> u{0.0, 0.1, 0.25, 0.4, 0.6, 0.7, 0.9, 1.0};
  const std::vector<double> w(u.size(), 1.0 / 8.0);
  const std::vector<double> phi{-0.2, 0.0, 0.15, 0.2, 0.1, 0.05, -0.2, -0.3};
  detail::LogConcaveSolver solver(u, w, {});
  const auto h = solver.directional_derivatives_for(phi);
  // Evaluate the objective as a full-support spline with a kink added at u_j.
  const std::vector<std::size_t> all{0, 1, 2, 3, 4, 5, 6, 7};
  for (std::size_t j = 1; j + 1 < u.size(); ++j) {
    const double t = 1e-6;
    auto bent = phi;
    for (std::size_t i = j; i < u.size(); ++i) bent[i] -= t * (u[i] - u[j]);
    const double fd = (unit_objective(u, w, all, bent) - unit_objective(u, w, all, phi)) / t;
    EXPECT_NEAR(h[j], fd, 1e-5);
  }
}

TEST(LogDensity, InterpolationAndTails) {
  const LogConcaveDensity f({0.0, 2.0, 4.0}, {0.0, 1.0, -1.0});
  EXPECT_EQ(f.log_density(2.0), 1.0);
  EXPECT_DOUBLE_EQ(f.log_density(0.5), 0.25);
  EXPECT_DOUBLE_EQ(f.log_density(3.0), 0.0);
  EXPECT_DOUBLE_EQ(f.log_density(104.0), -1.0 - 100.0);
  EXPECT_TRUE(std::isfinite(f.log_density(1e6)));
  EXPECT_NEAR(f.total_mass(), 1.0, 1e-12);
}

TEST(LogDensity, DecreasingFlag) {
  EXPECT_TRUE(LogConcaveDensity({0.0, 1.0, 3.0}, {0.0, 0.0, -2.0}).is_decreasing());
  EXPECT_FALSE(LogConcaveDensity({0.0, 1.0, 3.0}, {0.0, 0.5, -2.0}).is_decreasing());
}

TEST(LogDensity, CsvExport) {
  std::ostringstream out;
  LogConcaveDensity({0.0, 2.0}, {-0.5, -1.5}).write_csv(out);
  EXPECT_EQ(out.str(), "knot,phi\n0,-0.5\n2,-1.5\n");
}

TEST(Shift, MatchesGridSearch) {
  const auto x = sorted_sample(5000, 11, [](auto& rng) { return std::normal_distribution<double>(3.0, 1.5)(rng); });
  const auto f = fit_log_concave(x);
  const std::vector<double> y{10.0, 12.0, 14.0};
  const double got = maximize_shift(f, y, 0.0, 10.0);
  double best = -1e300, arg = 0.0;
  for (int i = 0; i <= 100000; ++i) {
    const double t = i * 1e-4;
    const double v = shift_log_likelihood(f, y, t);
    if (v >= best) {
      best = v;
      arg = t;
    }
  }
  // The exact maximizer can only beat the grid, and must sit within one grid step of its argmax.
  EXPECT_GE(shift_log_likelihood(f, y, got), best - 1e-12);
  EXPECT_NEAR(got, arg, 1e-4 + 1e-6);
}

TEST(Shift, DecreasingDensityGivesUpperBound) {
  const LogConcaveDensity f({0.0, 1.0, 5.0}, {0.0, -0.2, -3.0});
  const std::vector<double> y{7.0, 9.0, 30.0};
  EXPECT_EQ(maximize_shift(f, y, 0.0, 7.0), 7.0);
}

TEST(Shift, SingleValueShiftsToMode) {
  const LogConcaveDensity f({0.0, 2.0, 6.0}, {-1.0, 0.0, -2.0});
  EXPECT_EQ(maximize_shift(f, std::vector<double>{9.0}, 0.0, 9.0), 7.0);
  EXPECT_EQ(maximize_shift(f, std::vector<double>{1.0}, 0.0, 1.0), 0.0);
}

TEST(Shift, ObjectiveIsUnimodalOnGrid) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = sorted_sample(2000, 20 + seed, [](auto& rng) { return std::gamma_distribution<double>(2.0, 3.0)(rng); });
    const auto f = fit_log_concave(x);
    std::mt19937_64 rng(seed);
    std::vector<double> y(4);
    for (auto& v : y) v = 20.0 + 10.0 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    int turns = 0;
    double prev = shift_log_likelihood(f, y, 0.0);
    bool rising = true;
    for (double t = 0.05; t <= 20.0; t += 0.05) {
      const double v = shift_log_likelihood(f, y, t);
      if (rising && v < prev - 1e-12) {
        rising = false;
        ++turns;
      } else if (!rising && v > prev + 1e-12) {
        ++turns;
      }
      prev = v;
    }
    EXPECT_LE(turns, 1);
  }
}
