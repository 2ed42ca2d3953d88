#pragma once

// Independent reference computations used only by the tests. None of these share code
// with the library beyond plain value types.

#include "mppi_orca/orca.hpp"
#include "mppi_orca/safe_sampler.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace oracle {

/// Nearest point of the truncated VO boundary found by walking the boundary (two legs
/// and the cut-off arc) at a fixed arc-length step.
struct SweepResult {
  Eigen::Vector2d point;
  double distance = 0.0;
};

inline SweepResult vo_boundary_sweep(const Eigen::Vector2d& rel_pos, double radius, double tau,
                                     const Eigen::Vector2d& v, double step = 1e-3) {
  const double d = rel_pos.norm();
  const double phi = std::atan2(rel_pos.y(), rel_pos.x());
  const double beta = std::asin(radius / d);
  const Eigen::Vector2d center = rel_pos / tau;
  const double small_r = radius / tau;
  const double leg_start = std::sqrt(d * d - radius * radius) / tau;
  const double leg_end = leg_start + v.norm() + d / tau + 10.0;

  SweepResult best{Eigen::Vector2d::Zero(), std::numeric_limits<double>::infinity()};
  auto consider = [&](const Eigen::Vector2d& q) {
    const double dist = (q - v).norm();
    if (dist < best.distance) best = {q, dist};
  };
  for (double side : {-1.0, 1.0}) {
    const double a = phi + side * beta;
    const Eigen::Vector2d dir(std::cos(a), std::sin(a));
    for (double s = leg_start; s <= leg_end; s += step) consider(s * dir);
  }
  // The arc faces the origin and spans pi - 2 beta around the back of the small disc.
  const double half = 0.5 * std::numbers::pi - beta;
  const double back = phi + std::numbers::pi;
  const int arc_steps = std::max(2, static_cast<int>(std::ceil(2.0 * half * small_r / step)));
  for (int k = 0; k <= arc_steps; ++k) {
    const double a = back - half + 2.0 * half * k / arc_steps;
    consider(center + small_r * Eigen::Vector2d(std::cos(a), std::sin(a)));
  }
  return best;
}

/// Membership by dense time sampling: some t in [0, tau] puts t v inside the disc.
inline bool vo_contains_sampled(const Eigen::Vector2d& rel_pos, double radius, double tau,
                                const Eigen::Vector2d& v, int samples = 20000) {
  for (int k = 0; k <= samples; ++k) {
    const double t = tau * k / samples;
    if ((t * v - rel_pos).norm() < radius) return true;
  }
  return false;
}

/// Coarse-to-fine grid minimization of a function over a box. Each level evaluates a
/// (points^dim) lattice and re-centers a window of half the width on the best point.
/// Returns the best value once the lattice spacing drops below `resolution`.
struct GridResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
};

inline GridResult grid_minimize(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd lo,
                                Eigen::VectorXd hi, double resolution, int points = 17) {
  const auto dim = lo.size();
  const Eigen::VectorXd box_lo = lo, box_hi = hi;
  GridResult best;
  Eigen::VectorXd x(dim);
  std::vector<int> idx(static_cast<std::size_t>(dim));
  while (true) {
    const Eigen::VectorXd spacing = (hi - lo) / (points - 1);
    std::fill(idx.begin(), idx.end(), 0);
    while (true) {
      for (Eigen::Index d = 0; d < dim; ++d) x[d] = lo[d] + spacing[d] * idx[static_cast<std::size_t>(d)];
      const double v = f(x);
      if (v < best.value) best = {x, v};
      Eigen::Index d = 0;
      while (d < dim && ++idx[static_cast<std::size_t>(d)] == points) idx[static_cast<std::size_t>(d++)] = 0;
      if (d == dim) break;
    }
    if (spacing.maxCoeff() <= resolution) return best;
    const Eigen::VectorXd half = 0.25 * (hi - lo);
    lo = (best.x - half).cwiseMax(box_lo);
    hi = (best.x + half).cwiseMin(box_hi);
    // Keep the window width when clipped against the outer box.
    for (Eigen::Index d = 0; d < dim; ++d) {
      const double w = 2.0 * half[d];
      if (hi[d] - lo[d] < w) {
        if (lo[d] == box_lo[d]) hi[d] = std::min(box_hi[d], lo[d] + w);
        else lo[d] = std::max(box_lo[d], hi[d] - w);
      }
    }
  }
}

/// Distribution-adjustment objective with an exact penalty for constraint violation.
/// Variables are (mean', stddev'); mirrors the math, not the library's program layout.
struct AdjustProblem {
  Eigen::VectorXd mean, stddev, lower, upper;
  std::vector<mppi_orca::TightenedConstraint> rows;
  double z = 0.0;  // standard normal quantile of delta_u

  double violation(const Eigen::VectorXd& mu, const Eigen::VectorXd& s) const {
    double v = 0.0;
    for (const auto& r : rows) v += std::max(0.0, r.a_prime.dot(mu) + z * r.a_prime.cwiseProduct(s).norm() - r.b_double_prime);
    for (Eigen::Index k = 0; k < mu.size(); ++k) {
      v += std::max(0.0, mu[k] + z * s[k] - upper[k]);
      v += std::max(0.0, lower[k] - mu[k] + z * s[k]);
      v += std::max(0.0, -s[k]);
    }
    return v;
  }
  double cost(const Eigen::VectorXd& mu, const Eigen::VectorXd& s) const {
    return (mu - mean).cwiseAbs().sum() + (s - stddev).cwiseAbs().sum();
  }
};

inline double grid_adjust_objective(const AdjustProblem& p, double resolution = 1e-3, double penalty = 1e4) {
  const auto m = p.mean.size();
  Eigen::VectorXd lo(2 * m), hi(2 * m);
  lo << p.lower, Eigen::VectorXd::Zero(m);
  hi << p.upper, (p.upper - p.lower).cwiseMax(p.stddev) * 0.5;
  auto f = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd mu = x.head(m), s = x.tail(m);
    return p.cost(mu, s) + penalty * p.violation(mu, s);
  };
  return grid_minimize(f, lo, hi, resolution).value;
}

/// Smallest distance between two discs' centers over t in [0, horizon] when they move
/// with constant velocities from p_a and p_b (exact single-integrator motion).
inline double closest_approach(const Eigen::Vector2d& p_a, const Eigen::Vector2d& v_a, const Eigen::Vector2d& p_b,
                               const Eigen::Vector2d& v_b, double horizon) {
  const Eigen::Vector2d dp = p_b - p_a, dv = v_b - v_a;
  const double vv = dv.squaredNorm();
  const double t = vv > 0.0 ? std::clamp(-dp.dot(dv) / vv, 0.0, horizon) : 0.0;
  return (dp + t * dv).norm();
}

/// Closest point of the half-plane a.v + c <= 0 (|a| = 1) to v.
inline Eigen::Vector2d project_onto(const mppi_orca::HalfPlane& hp, const Eigen::Vector2d& v) {
  const double excess = hp.value(v);
  return excess <= 0.0 ? v : Eigen::Vector2d(v - excess * hp.normal());
}

}  // namespace oracle
