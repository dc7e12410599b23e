#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmx/empirical.hpp"
#include "cmx/estimators.hpp"
#include "cmx/intervals.hpp"
#include "cmx/logconcave.hpp"
#include "cmx/sketch.hpp"
#include "cmx/statistic.hpp"

namespace cmx {

/// Sparse 0/1 design for an item set: column s holds the r counters item s hashes to.
/// Also keeps the inverse map from a flat counter index to the items that touch it.
class DesignMatrix {
 public:
  DesignMatrix(const CountPlusSketch& sketch, std::span<const std::string> items)
      : items_(items.begin(), items.end()), depth_(sketch.depth()), rows_(sketch.counters().size()) {
    cells_.reserve(items_.size() * depth_);
    for (const auto& item : items_) {
      const auto row = sketch.design_row(item);
      cells_.insert(cells_.end(), row.begin(), row.end());
    }
    // CSR inverse map.
    offsets_.assign(rows_ + 1, 0);
    for (auto c : cells_) ++offsets_[c + 1];
    for (std::size_t i = 0; i < rows_; ++i) offsets_[i + 1] += offsets_[i];
    members_.resize(cells_.size());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t s = 0; s < items_.size(); ++s) {
      for (std::size_t a = 0; a < depth_; ++a) members_[fill[cells_[s * depth_ + a]]++] = s;
    }
  }

  const std::vector<std::string>& items() const { return items_; }
  std::size_t columns() const { return items_.size(); }
  std::size_t rows() const { return rows_; }
  std::size_t depth() const { return depth_; }

  /// Flat counter indices of column s.
  std::span<const std::size_t> cells(std::size_t s) const {
    return std::span<const std::size_t>(cells_).subspan(s * depth_, depth_);
  }

  /// Items whose column has a one in flat row c.
  std::span<const std::size_t> members(std::size_t c) const {
    return std::span<const std::size_t>(members_).subspan(offsets_[c], offsets_[c + 1] - offsets_[c]);
  }

  /// M theta as a dense vector over all counters.
  std::vector<double> apply(std::span<const double> theta) const {
    std::vector<double> out(rows_, 0.0);
    for (std::size_t s = 0; s < items_.size(); ++s) {
      for (auto c : cells(s)) out[c] += theta[s];
    }
    return out;
  }

  /// M^T M (shared-counter counts), dense.
  Eigen::MatrixXd gram() const {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(columns()), static_cast<Eigen::Index>(columns()));
    for (std::size_t c = 0; c < rows_; ++c) {
      const auto m = members(c);
      for (auto s : m) {
        for (auto t : m) g(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) += 1.0;
      }
    }
    return g;
  }

 private:
  std::vector<std::string> items_;
  std::size_t depth_;
  std::size_t rows_;
  std::vector<std::size_t> cells_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> members_;
};

struct JointEstimate {
  std::vector<std::string> items;
  std::vector<double> theta;
  bool converged = false;
  std::size_t iterations = 0;
  double final_objective = 0.0;
  bool rank_deficient = false;
  /// Objective after each outer iteration (joint_mle only).
  std::vector<double> objective_trace;
};

inline std::vector<double> counter_values(const CountPlusSketch& sketch) {
  const auto c = sketch.counters();
  return std::vector<double>(c.begin(), c.end());
}

/// Largest item set for which the rank of M is checked exactly.
inline constexpr std::size_t kMaxRankCheck = 1024;

/// argmin ||V - M theta||^2 over theta >= 0 by projected cyclic coordinate descent.
/// converged is false when M is rank deficient (the minimizer is not unique) or the iteration
/// limit is hit.
inline JointEstimate least_squares(const CountPlusSketch& sketch, std::span<const std::string> items,
                                   std::size_t max_iters = 10000, double tol = 1e-10) {
  if (items.empty()) throw std::invalid_argument("least squares needs at least one item");
  const DesignMatrix m(sketch, items);
  const auto v = counter_values(sketch);
  JointEstimate out;
  out.items = m.items();
  out.theta.assign(m.columns(), 0.0);
  std::vector<double> resid = v;
  const double r = static_cast<double>(m.depth());
  for (std::size_t it = 1; it <= max_iters; ++it) {
    double change = 0.0, scale = 0.0;
    for (std::size_t s = 0; s < m.columns(); ++s) {
      double g = 0.0;
      for (auto c : m.cells(s)) g += resid[c];
      const double next = std::max(0.0, out.theta[s] + g / r);
      const double d = next - out.theta[s];
      if (d != 0.0) {
        for (auto c : m.cells(s)) resid[c] -= d;
        out.theta[s] = next;
      }
      change = std::max(change, std::abs(d));
      scale = std::max(scale, std::abs(next));
    }
    out.iterations = it;
    if (change <= tol * (1.0 + scale)) {
      out.converged = true;
      break;
    }
  }
  double obj = 0.0;
  for (double x : resid) obj += x * x;
  out.final_objective = obj;
  if (m.columns() <= kMaxRankCheck) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m.gram());
    if (lu.rank() < static_cast<Eigen::Index>(m.columns())) {
      out.rank_deficient = true;
      out.converged = false;
    }
  }
  return out;
}

struct JointMleOptions {
  /// Starting point; defaults to the per-item Debiased Min (column bias).
  std::optional<std::vector<double>> init;
  double tol = 1e-4;
  std::size_t max_outer = 50;
  std::size_t max_inner_passes = 20;
  /// Also keep M theta <= V on the item cells.
  bool constrained = false;
  double trim_fraction = kDefaultTrimFraction;
};

struct JointMleResult {
  JointEstimate estimate;
  LogConcaveDensity density;
};

/// sum over all counters of log f(V - M theta).
inline double joint_objective(const LogConcaveDensity& f, std::span<const double> residuals) {
  double total = 0.0;
  for (double x : residuals) total += f.log_pdf(x);
  return total;
}

namespace detail {

inline LogConcaveDensity fit_residuals(const std::vector<double>& resid, double trim_fraction) {
  std::vector<double> sorted = resid;
  std::sort(sorted.begin(), sorted.end());
  const auto drop = static_cast<std::size_t>(std::floor(trim_fraction * static_cast<double>(sorted.size()) + 1e-9));
  std::span<const double> kept(sorted.data(), sorted.size() - drop);
  LogConcaveFitOptions opts;
  opts.support_min = sorted.front();
  return fit_log_concave(kept, opts);
}

}  // namespace detail

/// Alternates a log-concave fit on the residuals of all counters with exact cyclic coordinate
/// ascent on theta. Each coordinate keeps its residuals at or above the density's support
/// minimum and theta >= 0. A refit is kept only if it does not lower the objective, so the
/// objective never decreases.
inline JointMleResult joint_mle(const CountPlusSketch& sketch, std::span<const std::string> items,
                                const JointMleOptions& opts = {}) {
  if (items.empty()) throw std::invalid_argument("joint estimation needs at least one item");
  const DesignMatrix m(sketch, items);
  const auto v = counter_values(sketch);
  const std::size_t n = m.columns();

  std::vector<double> theta;
  if (opts.init) {
    if (opts.init->size() != n) throw std::invalid_argument("initial estimate has the wrong length");
    theta = *opts.init;
    for (double t : theta) {
      if (!(t >= 0.0)) throw std::invalid_argument("initial estimate must be non-negative");
    }
  } else {
    const double mu = column_bias_model(sketch, Statistic::min()).mu;
    theta.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
      double lo = std::numeric_limits<double>::infinity();
      for (auto c : m.cells(s)) {
        // Constrained: split each cell evenly among its items so the start is feasible.
        const double share = opts.constrained ? v[c] / static_cast<double>(m.members(c).size()) : v[c] - mu;
        lo = std::min(lo, share);
      }
      theta[s] = std::max(0.0, lo);
    }
  }

  std::vector<double> resid = v;
  {
    const auto mt = m.apply(theta);
    for (std::size_t c = 0; c < resid.size(); ++c) resid[c] -= mt[c];
  }
  if (opts.constrained) {
    for (double x : resid) {
      if (x < 0.0) throw std::invalid_argument("initial estimate violates M theta <= V");
    }
  }

  LogConcaveDensity f = detail::fit_residuals(resid, opts.trim_fraction);
  double objective = joint_objective(f, resid);
  if (!std::isfinite(objective)) throw std::runtime_error("non-finite joint objective");

  JointMleResult out;
  out.estimate.items = m.items();
  std::vector<double> y(m.depth());
  for (std::size_t outer = 1; outer <= opts.max_outer; ++outer) {
    double outer_change = 0.0;
    for (std::size_t pass = 0; pass < opts.max_inner_passes; ++pass) {
      double pass_change = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const auto cells = m.cells(s);
        double lo_y = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < cells.size(); ++a) {
          y[a] = resid[cells[a]] + theta[s];
          lo_y = std::min(lo_y, y[a]);
        }
        double upper = lo_y - f.support_min();
        if (opts.constrained) upper = std::min(upper, lo_y);
        upper = std::max(0.0, upper);
        double next = maximize_shift(f, y, 0.0, upper);
        // Bounds move with the density; never accept a coordinate step that loses likelihood.
        if (shift_log_likelihood(f, y, next) < shift_log_likelihood(f, y, theta[s])) next = theta[s];
        const double d = next - theta[s];
        if (d != 0.0) {
          for (auto c : cells) resid[c] -= d;
          theta[s] = next;
        }
        pass_change = std::max(pass_change, std::abs(d));
      }
      outer_change = std::max(outer_change, pass_change);
      if (pass_change <= opts.tol) break;
    }
    objective = joint_objective(f, resid);

    LogConcaveDensity refit = detail::fit_residuals(resid, opts.trim_fraction);
    const double refit_objective = joint_objective(refit, resid);
    if (refit_objective >= objective) {
      f = std::move(refit);
      objective = refit_objective;
    }
    if (!std::isfinite(objective)) throw std::runtime_error("non-finite joint objective");
    out.estimate.objective_trace.push_back(objective);
    out.estimate.iterations = outer;
    if (outer_change <= opts.tol) {
      out.estimate.converged = true;
      break;
    }
  }
  out.estimate.theta = std::move(theta);
  out.estimate.final_objective = objective;
  out.density = std::move(f);
  return out;
}

}  // namespace cmx
