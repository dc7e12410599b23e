#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cmx/empirical.hpp"
#include "cmx/io.hpp"

namespace cmx {

namespace detail {

/// j_n(d) = integral_0^1 t^n e^{t d} dt for n = 0, 1, 2, with d <= 0.
inline void exp_moments(double d, double& j0, double& j1, double& j2) {
  if (d > -1.0) {
    // Series sum_k d^k / (k! (n + k + 1)); |d| < 1 converges fast and avoids cancellation.
    double term = 1.0;
    j0 = j1 = j2 = 0.0;
    for (int k = 0; k < 40; ++k) {
      j0 += term / (k + 1);
      j1 += term / (k + 2);
      j2 += term / (k + 3);
      term *= d / (k + 1);
      if (std::abs(term) < 1e-20) break;
    }
    return;
  }
  const double e = std::exp(d);
  j0 = std::expm1(d) / d;
  j1 = (e * (d - 1.0) + 1.0) / (d * d);
  j2 = (e * (d * d - 2.0 * d + 2.0) - 2.0) / (d * d * d);
}

/// integral_0^1 t^n exp((1 - t) a + t b) dt, n = 0, 1, 2. Exponentials are taken of max(a, b).
struct SegmentMoments {
  double i0, i1, i2;
};

inline SegmentMoments segment_moments(double a, double b) {
  double j0, j1, j2;
  if (b <= a) {
    exp_moments(b - a, j0, j1, j2);
    const double e = std::exp(a);
    return {e * j0, e * j1, e * j2};
  }
  exp_moments(a - b, j0, j1, j2);
  const double e = std::exp(b);
  return {e * j0, e * (j0 - j1), e * (j0 - 2.0 * j1 + j2)};
}

/// Distinct sorted values with their relative weights (summing to one).
struct WeightedData {
  std::vector<double> x;
  std::vector<double> w;
};

inline WeightedData collapse_ties(std::span<const double> sorted) {
  WeightedData out;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    out.x.push_back(sorted[i]);
    out.w.push_back(static_cast<double>(j - i) / n);
    i = j;
  }
  return out;
}

}  // namespace detail

/// Log-concave density with a piecewise-linear log density between knots and linear tails.
///
/// phi holds the fitted log density at the knots; between knots it is linearly interpolated
/// and outside it is extended with left_slope / right_slope. The continuous part is renormalized
/// over [support_min, inf) by log_norm(); an optional atom at zero carries the remaining mass.
/// Optional overrides when building a density by hand; unset slopes come from the end segments.
struct DensityShape {
  std::optional<double> left_slope;
  std::optional<double> right_slope;
  std::optional<double> support_min;
  double atom_at_zero = 0.0;
  bool degenerate = false;
};

class LogConcaveDensity {
 public:
  using Shape = DensityShape;

  LogConcaveDensity() = default;

  LogConcaveDensity(std::vector<double> knots, std::vector<double> phi, Shape shape = {})
      : knots_(std::move(knots)), phi_(std::move(phi)), atom_(shape.atom_at_zero), degenerate_(shape.degenerate) {
    if (knots_.size() < 2 || knots_.size() != phi_.size()) {
      throw std::invalid_argument("log-concave density needs at least two knots with matching phi values");
    }
    for (std::size_t i = 1; i < knots_.size(); ++i) {
      if (!(knots_[i] > knots_[i - 1])) throw std::invalid_argument("knots must be strictly increasing");
    }
    if (!(atom_ >= 0.0 && atom_ < 1.0)) throw std::invalid_argument("atom mass must be in [0, 1)");
    left_slope_ = shape.left_slope.value_or(segment_slope(0));
    const double last = segment_slope(knots_.size() - 2);
    // A non-decreasing last segment would make the tail non-integrable; fall back to a unit decay
    // over the knot span.
    right_slope_ = shape.right_slope.value_or(last < 0.0 ? last : -1.0 / (knots_.back() - knots_.front()));
    if (!(right_slope_ < 0.0)) throw std::invalid_argument("right tail slope must be negative");
    support_min_ = std::min(shape.support_min.value_or(knots_.front()), knots_.front());
    if (support_min_ < knots_.front() && !(left_slope_ > 0.0 || std::isfinite(support_min_))) {
      throw std::invalid_argument("left tail is not integrable");
    }
    log_norm_ = -std::log(continuous_mass_raw());
  }

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& phi() const { return phi_; }
  double left_slope() const { return left_slope_; }
  double right_slope() const { return right_slope_; }
  double atom_at_zero() const { return atom_; }
  double support_min() const { return support_min_; }
  bool degenerate() const { return degenerate_; }

  /// Additive constant turning exp(log_density) into a proper density on [support_min, inf).
  double log_norm() const { return log_norm_; }

  double segment_slope(std::size_t a) const { return (phi_[a + 1] - phi_[a]) / (knots_[a + 1] - knots_[a]); }

  /// Fitted log density with linear extension; exact at knots and never -inf.
  double log_density(double x) const {
    if (x <= knots_.front()) return x == knots_.front() ? phi_.front() : phi_.front() + left_slope_ * (x - knots_.front());
    if (x >= knots_.back()) return x == knots_.back() ? phi_.back() : phi_.back() + right_slope_ * (x - knots_.back());
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    const std::size_t a = static_cast<std::size_t>(it - knots_.begin()) - 1;
    if (knots_[a] == x) return phi_[a];
    return phi_[a] + (x - knots_[a]) * segment_slope(a);
  }

  /// Derivative of the log density on the piece containing x (right derivative at knots).
  double slope_at(double x) const {
    if (x < knots_.front()) return left_slope_;
    if (x >= knots_.back()) return right_slope_;
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    return segment_slope(static_cast<std::size_t>(it - knots_.begin()) - 1);
  }

  /// Normalized log density of the continuous part (mass 1 - atom).
  double log_pdf(double x) const { return std::log1p(-atom_) + log_norm_ + log_density(x); }

  /// Mass of the fitted spline over the knot range alone.
  double knot_range_mass() const {
    double m = 0.0;
    for (std::size_t a = 0; a + 1 < knots_.size(); ++a) {
      m += (knots_[a + 1] - knots_[a]) * detail::segment_moments(phi_[a], phi_[a + 1]).i0;
    }
    return m;
  }

  /// Continuous mass after renormalization plus the atom; equals one up to rounding.
  double total_mass() const { return (1.0 - atom_) * std::exp(log_norm_) * continuous_mass_raw() + atom_; }

  /// True iff the log density never increases (all slopes, tails included, are <= 0).
  bool is_decreasing() const {
    if (left_slope_ > 0.0) return false;
    for (std::size_t a = 0; a + 1 < knots_.size(); ++a) {
      if (segment_slope(a) > 0.0) return false;
    }
    return true;
  }

  /// Largest second difference of phi over knot spacings (<= 0 for a concave spline).
  double max_concavity_violation() const {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 1; a + 1 < knots_.size(); ++a) worst = std::max(worst, segment_slope(a) - segment_slope(a - 1));
    return knots_.size() > 2 ? worst : 0.0;
  }

  LogConcaveDensity with_atom_at_zero(double atom) const {
    LogConcaveDensity out = *this;
    if (!(atom >= 0.0 && atom < 1.0)) throw std::invalid_argument("atom mass must be in [0, 1)");
    out.atom_ = atom;
    return out;
  }

  void write_csv(std::ostream& out) const {
    out << "knot,phi\n";
    for (std::size_t i = 0; i < knots_.size(); ++i) out << format_number(knots_[i]) << ',' << format_number(phi_[i]) << '\n';
  }

 private:
  double continuous_mass_raw() const {
    double m = knot_range_mass();
    const double left_len = knots_.front() - support_min_;
    if (left_len > 0.0) {
      // integral over [support_min, x_1] of exp(phi_1 + left_slope * (x - x_1))
      const double d = -left_slope_ * left_len;
      const double j0 = d == 0.0 ? 1.0 : std::expm1(d) / d;
      m += left_len * std::exp(phi_.front()) * j0;
    }
    m += std::exp(phi_.back()) / (-right_slope_);
    return m;
  }

  std::vector<double> knots_;
  std::vector<double> phi_;
  double left_slope_ = 0.0;
  double right_slope_ = -1.0;
  double support_min_ = 0.0;
  double atom_ = 0.0;
  double log_norm_ = 0.0;
  bool degenerate_ = false;
};

struct LogConcaveFitOptions {
  /// Knot insertion threshold on the directional derivative (unit-range coordinates).
  double insert_tolerance = 1e-11;
  /// Newton stops when the max-norm of the gradient falls below this.
  double gradient_tolerance = 1e-13;
  int max_newton_iterations = 200;
  /// Lower end of the normalization range; defaults to the smallest observation.
  std::optional<double> support_min;
};

namespace detail {

/// Active-set maximizer of  sum_i w_i phi(u_i) - integral_0^1 exp(phi)  over concave
/// piecewise-linear phi with knots at data points, for data rescaled to [0, 1].
class LogConcaveSolver {
 public:
  LogConcaveSolver(std::vector<double> u, std::vector<double> w, const LogConcaveFitOptions& opts)
      : u_(std::move(u)), w_(std::move(w)), opts_(opts) {}

  void solve() {
    const std::size_t m = u_.size();
    support_ = {0, m - 1};
    theta_ = {0.0, 0.0};
    solve_feasible(std::nullopt);
    const std::size_t max_rounds = 20 * m + 100;
    for (std::size_t round = 0; round < max_rounds; ++round) {
      const auto h = directional_derivatives(theta_);
      std::size_t best = 0;
      double best_val = opts_.insert_tolerance;
      std::size_t s = 0;
      for (std::size_t j = 1; j + 1 < m; ++j) {
        while (s < support_.size() && support_[s] < j) ++s;
        if (s < support_.size() && support_[s] == j) continue;
        if (h[j] > best_val) {
          best_val = h[j];
          best = j;
        }
      }
      if (best == 0) return;
      if (!insert_knot(best)) return;
    }
  }

  const std::vector<std::size_t>& support() const { return support_; }
  const std::vector<double>& theta() const { return theta_; }

  /// phi at every data point, interpolated from the support values.
  std::vector<double> phi_at_data(const std::vector<std::size_t>& support, const std::vector<double>& theta) const {
    std::vector<double> phi(u_.size());
    for (std::size_t a = 0; a + 1 < support.size(); ++a) {
      const std::size_t lo = support[a], hi = support[a + 1];
      const double span = u_[hi] - u_[lo];
      for (std::size_t i = lo; i <= hi; ++i) {
        const double t = (u_[i] - u_[lo]) / span;
        phi[i] = i == hi ? theta[a + 1] : theta[a] + t * (theta[a + 1] - theta[a]);
      }
    }
    return phi;
  }

  /// H_j = integral_{u_j}^1 (u - u_j) e^phi du - sum_i w_i (u_i - u_j)_+ ; positive values mean
  /// bending phi down at u_j increases the objective.
  std::vector<double> directional_derivatives(const std::vector<double>& theta) const {
    return directional_derivatives_for(phi_at_data(support_, theta));
  }

  std::vector<double> directional_derivatives_for(const std::vector<double>& phi) const {
    const std::size_t m = u_.size();
    std::vector<double> h(m, 0.0);
    double mass_right = 0.0, first_moment = 0.0, weight_right = w_[m - 1], data_moment = 0.0;
    for (std::size_t j = m - 1; j-- > 0;) {
      const double delta = u_[j + 1] - u_[j];
      const auto mom = segment_moments(phi[j], phi[j + 1]);
      first_moment += delta * mass_right + delta * delta * mom.i1;
      mass_right += delta * mom.i0;
      data_moment += delta * weight_right;
      weight_right += w_[j];
      h[j] = first_moment - data_moment;
    }
    return h;
  }

  /// Gradient of the objective with respect to the support values (hat-function directions).
  std::vector<double> gradient(const std::vector<std::size_t>& support, const std::vector<double>& theta) const {
    const auto c = coefficients(support);
    std::vector<double> g(c);
    for (std::size_t a = 0; a + 1 < support.size(); ++a) {
      const double delta = u_[support[a + 1]] - u_[support[a]];
      const auto mom = segment_moments(theta[a], theta[a + 1]);
      g[a] -= delta * (mom.i0 - mom.i1);
      g[a + 1] -= delta * mom.i1;
    }
    return g;
  }

 private:
  std::vector<double> coefficients(const std::vector<std::size_t>& support) const {
    std::vector<double> c(support.size(), 0.0);
    for (std::size_t a = 0; a + 1 < support.size(); ++a) {
      const std::size_t lo = support[a], hi = support[a + 1];
      const double span = u_[hi] - u_[lo];
      for (std::size_t i = lo; i < hi; ++i) {
        const double t = (u_[i] - u_[lo]) / span;
        c[a] += w_[i] * (1.0 - t);
        c[a + 1] += w_[i] * t;
      }
    }
    c.back() += w_[support.back()];
    return c;
  }

  double objective(const std::vector<double>& c, const std::vector<double>& theta) const {
    double v = 0.0;
    for (std::size_t a = 0; a < theta.size(); ++a) v += c[a] * theta[a];
    for (std::size_t a = 0; a + 1 < theta.size(); ++a) {
      v -= (u_[support_[a + 1]] - u_[support_[a]]) * segment_moments(theta[a], theta[a + 1]).i0;
    }
    return v;
  }

  /// Damped Newton on the current support (unconstrained; the objective is strictly concave).
  void newton(std::vector<double>& theta) const {
    const auto c = coefficients(support_);
    const std::size_t n = theta.size();
    std::vector<double> g(n), diag(n), off(n > 0 ? n - 1 : 0), step(n), trial(n);
    double current = objective(c, theta);
    for (int it = 0; it < opts_.max_newton_iterations; ++it) {
      g = c;
      std::fill(diag.begin(), diag.end(), 0.0);
      for (std::size_t a = 0; a + 1 < n; ++a) {
        const double delta = u_[support_[a + 1]] - u_[support_[a]];
        const auto mom = segment_moments(theta[a], theta[a + 1]);
        g[a] -= delta * (mom.i0 - mom.i1);
        g[a + 1] -= delta * mom.i1;
        diag[a] += delta * (mom.i0 - 2.0 * mom.i1 + mom.i2);
        diag[a + 1] += delta * mom.i2;
        off[a] = delta * (mom.i1 - mom.i2);
      }
      double gmax = 0.0;
      for (double v : g) gmax = std::max(gmax, std::abs(v));
      if (gmax <= opts_.gradient_tolerance) return;
      solve_tridiagonal(diag, off, g, step);
      double decrement = 0.0;
      for (std::size_t a = 0; a < n; ++a) decrement += g[a] * step[a];
      double t = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls) {
        for (std::size_t a = 0; a < n; ++a) trial[a] = theta[a] + t * step[a];
        const double value = objective(c, trial);
        if (std::isfinite(value) && value >= current + 1e-4 * t * decrement) {
          theta = trial;
          current = value;
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved || decrement < 1e-26) return;
    }
  }

  /// Symmetric positive definite tridiagonal solve (Thomas algorithm).
  static void solve_tridiagonal(const std::vector<double>& diag, const std::vector<double>& off,
                                const std::vector<double>& rhs, std::vector<double>& x) {
    const std::size_t n = diag.size();
    std::vector<double> c(n, 0.0), d(n, 0.0);
    double denom = diag[0];
    c[0] = n > 1 ? off[0] / denom : 0.0;
    d[0] = rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
      denom = diag[i] - off[i - 1] * c[i - 1];
      c[i] = i + 1 < n ? off[i] / denom : 0.0;
      d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / denom;
    }
    x.assign(n, 0.0);
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
  }

  /// Slope change at every interior support point (<= 0 means concave there).
  std::vector<double> bends(const std::vector<double>& theta) const {
    std::vector<double> b(theta.size(), 0.0);
    for (std::size_t a = 1; a + 1 < theta.size(); ++a) {
      const double left = (theta[a] - theta[a - 1]) / (u_[support_[a]] - u_[support_[a - 1]]);
      const double right = (theta[a + 1] - theta[a]) / (u_[support_[a + 1]] - u_[support_[a]]);
      b[a] = right - left;
    }
    return b;
  }

  /// Adds data index j to the support and re-solves. Returns false if no progress was possible.
  bool insert_knot(std::size_t j) {
    const auto pos = std::upper_bound(support_.begin(), support_.end(), j);
    const std::size_t a = static_cast<std::size_t>(pos - support_.begin());
    const std::size_t lo = support_[a - 1], hi = support_[a];
    const double t = (u_[j] - u_[lo]) / (u_[hi] - u_[lo]);
    const double value = theta_[a - 1] + t * (theta_[a] - theta_[a - 1]);
    support_.insert(support_.begin() + static_cast<std::ptrdiff_t>(a), j);
    theta_.insert(theta_.begin() + static_cast<std::ptrdiff_t>(a), value);
    return solve_feasible(j);
  }

  /// Newton on the current support; while the optimum is not concave, walk towards it until the
  /// first knot straightens and drop that knot.
  bool solve_feasible(std::optional<std::size_t> inserted) {
    for (std::size_t guard = 0; guard < 4 * u_.size() + 16; ++guard) {
      std::vector<double> target = theta_;
      newton(target);
      const auto b_now = bends(theta_);
      const auto b_target = bends(target);
      double t_star = 1.0;
      std::size_t drop = 0;
      for (std::size_t a = 1; a + 1 < target.size(); ++a) {
        if (b_target[a] <= 0.0) continue;
        const double t = b_now[a] >= 0.0 ? 0.0 : b_now[a] / (b_now[a] - b_target[a]);
        if (t < t_star || drop == 0) {
          if (t <= t_star) {
            t_star = t;
            drop = a;
          }
        }
      }
      if (drop == 0) {
        theta_ = std::move(target);
        return true;
      }
      if (inserted && support_[drop] == *inserted && t_star <= 0.0) {
        // The new knot cannot bend the right way: undo and stop inserting.
        support_.erase(support_.begin() + static_cast<std::ptrdiff_t>(drop));
        theta_.erase(theta_.begin() + static_cast<std::ptrdiff_t>(drop));
        return false;
      }
      for (std::size_t a = 0; a < theta_.size(); ++a) theta_[a] += t_star * (target[a] - theta_[a]);
      support_.erase(support_.begin() + static_cast<std::ptrdiff_t>(drop));
      theta_.erase(theta_.begin() + static_cast<std::ptrdiff_t>(drop));
      inserted.reset();
    }
    return true;
  }

  std::vector<double> u_;
  std::vector<double> w_;
  LogConcaveFitOptions opts_;
  std::vector<std::size_t> support_;
  std::vector<double> theta_;
};

/// Narrow tent around a single repeated value.
inline LogConcaveDensity degenerate_density(double value, const LogConcaveFitOptions& opts) {
  constexpr double half_width = 0.5;
  constexpr double steepness = 8.0;  // log-density drop per unit distance from the value
  std::vector<double> knots{value - half_width, value, value + half_width};
  std::vector<double> phi{-steepness * half_width, 0.0, -steepness * half_width};
  DensityShape shape;
  shape.left_slope = steepness;
  shape.right_slope = -steepness;
  shape.support_min = opts.support_min;
  shape.degenerate = true;
  LogConcaveDensity raw(knots, phi, shape);
  // Shift phi so the knot range carries unit mass, like a regular fit.
  const double shift = -std::log(raw.knot_range_mass());
  for (auto& p : phi) p += shift;
  return LogConcaveDensity(std::move(knots), std::move(phi), shape);
}

}  // namespace detail

/// Log-concave maximum likelihood fit to sorted values (ties become weights).
///
/// Maximizes sum_i w_i phi(x_i) - integral exp(phi) over concave piecewise-linear phi with knots at
/// distinct data points. The result integrates to one over the data range before tail extension.
/// A sample with a single distinct value yields a flagged narrow tent.
inline LogConcaveDensity fit_log_concave(std::span<const double> sorted_values, const LogConcaveFitOptions& opts = {}) {
  if (sorted_values.empty()) throw std::invalid_argument("cannot fit a density to an empty sample");
  if (!std::is_sorted(sorted_values.begin(), sorted_values.end())) throw std::invalid_argument("values must be sorted");
  auto data = detail::collapse_ties(sorted_values);
  if (data.x.size() < 2) return detail::degenerate_density(data.x.front(), opts);

  const double origin = data.x.front();
  const double scale = data.x.back() - origin;
  std::vector<double> u(data.x.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = (data.x[i] - origin) / scale;
  u.back() = 1.0;

  detail::LogConcaveSolver solver(std::move(u), data.w, opts);
  solver.solve();

  const double log_scale = std::log(scale);
  std::vector<double> knots, phi;
  for (std::size_t a = 0; a < solver.support().size(); ++a) {
    knots.push_back(data.x[solver.support()[a]]);
    phi.push_back(solver.theta()[a] - log_scale);
  }
  DensityShape shape;
  shape.support_min = opts.support_min;
  return LogConcaveDensity(std::move(knots), std::move(phi), shape);
}

/// Fit on the trimmed error sample (largest trim_fraction of values dropped).
inline LogConcaveDensity fit_log_concave(const ErrorSample& sample, const LogConcaveFitOptions& opts = {}) {
  return fit_log_concave(sample.trimmed(), opts);
}

/// Continuous fit on the positive errors plus an atom at zero holding the fraction of exact zeros.
inline LogConcaveDensity fit_log_concave_with_zero_atom(const ErrorSample& sample, const LogConcaveFitOptions& opts = {}) {
  const auto all = sample.values();
  const auto zeros = static_cast<std::size_t>(std::upper_bound(all.begin(), all.end(), 0.0) - all.begin());
  const double atom = static_cast<double>(zeros) / static_cast<double>(all.size());
  const auto kept = sample.trimmed();
  std::span<const double> positive = kept.size() > zeros ? kept.subspan(zeros) : std::span<const double>{};
  if (positive.empty()) return fit_log_concave(kept, opts);
  return fit_log_concave(positive, opts).with_atom_at_zero(std::min(atom, 1.0 - 1e-12));
}

/// Largest violation of the first-order optimality conditions of the MLE objective at `f`.
///
/// Directions are raising/lowering phi at each knot (two-sided) and bending phi down at every
/// other data point (one-sided). Evaluated in unit-range coordinates, so the value is scale free.
inline double optimality_certificate(const LogConcaveDensity& f, std::span<const double> sorted_values) {
  auto data = detail::collapse_ties(sorted_values);
  if (data.x.size() < 2) return 0.0;
  const double origin = data.x.front();
  const double scale = data.x.back() - origin;
  const double log_scale = std::log(scale);
  std::vector<double> u(data.x.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = (data.x[i] - origin) / scale;

  // Map the density's knots onto data indices.
  std::vector<std::size_t> support;
  std::vector<double> theta;
  for (std::size_t a = 0; a < f.knots().size(); ++a) {
    const auto it = std::lower_bound(data.x.begin(), data.x.end(), f.knots()[a]);
    if (it == data.x.end() || *it != f.knots()[a]) return std::numeric_limits<double>::infinity();
    support.push_back(static_cast<std::size_t>(it - data.x.begin()));
    theta.push_back(f.phi()[a] + log_scale);
  }
  if (support.front() != 0 || support.back() != data.x.size() - 1) return std::numeric_limits<double>::infinity();

  detail::LogConcaveSolver probe(u, data.w, {});
  double worst = 0.0;
  for (double g : probe.gradient(support, theta)) worst = std::max(worst, std::abs(g));
  std::vector<double> phi(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) phi[i] = f.log_density(data.x[i]) + log_scale;
  const auto h = probe.directional_derivatives_for(phi);
  std::size_t s = 0;
  for (std::size_t j = 1; j + 1 < u.size(); ++j) {
    while (s < support.size() && support[s] < j) ++s;
    if (s < support.size() && support[s] == j) continue;
    worst = std::max(worst, h[j]);
  }
  return worst;
}

inline double optimality_certificate(const LogConcaveDensity& f, const ErrorSample& sample) {
  return optimality_certificate(f, sample.trimmed());
}

/// Fits a density to a sample drawn from a decreasing mass function and reports whether the fit
/// is decreasing (the log-concave projection of a decreasing pmf is decreasing).
inline bool project_decreasing_check(std::span<const double> sorted_sample) {
  return fit_log_concave(sorted_sample).is_decreasing();
}

/// Largest maximizer over [lower, upper] of  sum_i log f(y_i - theta).
///
/// The objective is concave and piecewise linear in theta with breakpoints y_i - knot, so the
/// maximizer is found exactly by bisection over the breakpoints. With a decreasing density the
/// objective never decreases and the result is `upper` exactly.
inline double maximize_shift(const LogConcaveDensity& f, std::span<const double> y, double lower, double upper) {
  std::vector<double> bps;
  bps.reserve(y.size() * f.knots().size());
  for (double yi : y) {
    for (double k : f.knots()) bps.push_back(yi - k);
  }
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end()), bps.end());

  auto slope = [&](double theta) {
    double s = 0.0;
    for (double yi : y) s -= f.slope_at(yi - theta);
    return s;
  };
  auto sample_point = [&](std::size_t piece) {
    if (piece == 0) return bps.front() - 1.0;
    if (piece == bps.size()) return bps.back() + 1.0;
    return 0.5 * (bps[piece - 1] + bps[piece]);
  };

  // First piece (theta -> -inf) has slope -r * right_slope > 0. Find the first piece with a
  // negative slope; the maximizer set ends at its left breakpoint.
  std::size_t lo = 0, hi = bps.size() + 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (slope(sample_point(mid)) < 0.0) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  const double peak = lo > bps.size() ? std::numeric_limits<double>::infinity() : bps[lo - 1];
  return std::min(upper, std::max(lower, peak));
}

/// Location log-likelihood sum_i log_density(y_i - theta).
inline double shift_log_likelihood(const LogConcaveDensity& f, std::span<const double> y, double theta) {
  double v = 0.0;
  for (double yi : y) v += f.log_density(yi - theta);
  return v;
}

}  // namespace cmx
