#pragma once

#include "mppi_orca/conic.hpp"
#include "mppi_orca/orca.hpp"

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

namespace mppi_orca {

/// Independent Gaussian over the controls: N(mean, diag(stddev^2)).
struct ControlDistribution {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};

/// a_prime . u <= b_double_prime
struct TightenedConstraint {
  Eigen::VectorXd a_prime;
  double b_double_prime = 0.0;
};

struct ControlSpaceConstraint {
  Eigen::VectorXd a_prime;
  double b_prime = 0.0;
};

struct SafetyConfig {
  double delta_o = 0.9975;
  double delta_nu = 0.999;
  double delta_u = 0.999;

  double composite() const { return delta_o * delta_nu * delta_u; }
  void validate() const {
    for (double d : {delta_o, delta_nu, delta_u})
      if (!(d > 0.0 && d < 1.0)) throw std::invalid_argument("safety: probabilities must lie in (0,1)");
  }
};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Inverse standard normal CDF: Acklam's rational approximation refined by one Halley step.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must lie in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

/// Maps a velocity half-plane onto the controls of a control-affine model linearized at the
/// current state. Velocities are (p_{t+1} - p_t) / dt. Empty when the constraint does not
/// depend on the control.
template <class DerivedF, class DerivedG>
std::optional<ControlSpaceConstraint> to_control_space(const HalfPlane& hp,
                                                       const Eigen::MatrixBase<DerivedF>& drift,
                                                       const Eigen::MatrixBase<DerivedG>& actuation,
                                                       const Eigen::Vector2d& p, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("to_control_space: dt must be positive");
  ControlSpaceConstraint out;
  out.a_prime = ((hp.a * actuation.row(0) + hp.b * actuation.row(1)) / dt).transpose();
  out.b_prime = -(hp.c + (hp.a * (drift[0] - p.x()) + hp.b * (drift[1] - p.y())) / dt);
  if (out.a_prime.cwiseAbs().maxCoeff() <= 1e-12) return std::nullopt;
  return out;
}

/// Shrinks the right-hand side so the row still holds with probability delta_nu after
/// the executed control is perturbed by N(0, diag(sigma^2)).
inline TightenedConstraint tighten_for_execution(const Eigen::VectorXd& a_prime, double b_prime,
                                                 const Eigen::VectorXd& sigma, double delta_nu) {
  const double spread = a_prime.cwiseProduct(sigma).norm();
  const double margin = spread > 0.0 ? normal_quantile(delta_nu) * spread : 0.0;
  return {a_prime, b_prime - margin};
}

inline constexpr double kChanceRowBackoff = 1e-10;

struct AdjustResult {
  ControlDistribution distribution;
  SolveReport report;
  bool used_lp = false;
};

/// Closest (1-norm over mean and stddev) Gaussian whose samples satisfy each tightened row
/// and each control bound with probability delta_u.
inline AdjustResult adjust_distribution(const ControlDistribution& nominal,
                                        const std::vector<TightenedConstraint>& constraints,
                                        const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                        double delta_u, SolverSettings settings = {}) {
  const auto m = nominal.mean.size();
  if (nominal.stddev.size() != m || lower.size() != m || upper.size() != m)
    throw std::invalid_argument("adjust_distribution: dimension mismatch");
  if ((nominal.stddev.array() < 0.0).any())
    throw std::invalid_argument("adjust_distribution: stddev must be non-negative");
  if ((lower.array() > upper.array()).any())
    throw std::invalid_argument("adjust_distribution: inconsistent bounds");
  if (!(delta_u >= 0.5 && delta_u < 1.0))
    throw std::invalid_argument("adjust_distribution: delta_u must lie in [0.5, 1)");

  const double z = std::max(0.0, normal_quantile(delta_u));
  const Eigen::Index n = 4 * m;  // [mean', stddev', |mean' - mean|, |stddev' - stddev|]
  auto mu = [](Eigen::Index k) { return k; };
  auto sd = [m](Eigen::Index k) { return m + k; };
  auto em = [m](Eigen::Index k) { return 2 * m + k; };
  auto es = [m](Eigen::Index k) { return 3 * m + k; };

  ConicProgram prog;
  prog.objective = Eigen::VectorXd::Zero(n);
  prog.objective.tail(2 * m).setOnes();
  prog.lower = Eigen::VectorXd::Zero(n);
  prog.upper = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double width = upper[k] - lower[k];
    prog.lower[mu(k)] = lower[k];
    prog.upper[mu(k)] = upper[k];
    prog.upper[sd(k)] = std::max(nominal.stddev[k], width) + 1.0;
    prog.upper[em(k)] = std::abs(nominal.mean[k]) + std::max(std::abs(lower[k]), std::abs(upper[k])) + 1.0;
    prog.upper[es(k)] = prog.upper[sd(k)] + nominal.stddev[k] + 1.0;
    prog.std_block.push_back(static_cast<int>(sd(k)));
  }

  auto row = [&] { return LinearRow{Eigen::VectorXd::Zero(n), 0.0, false}; };
  for (Eigen::Index k = 0; k < m; ++k) {
    LinearRow r1 = row(), r2 = row(), r3 = row(), r4 = row(), up = row(), lo = row();
    r1.coeffs[mu(k)] = 1.0;  r1.coeffs[em(k)] = -1.0; r1.rhs = nominal.mean[k];
    r2.coeffs[mu(k)] = -1.0; r2.coeffs[em(k)] = -1.0; r2.rhs = -nominal.mean[k];
    r3.coeffs[sd(k)] = 1.0;  r3.coeffs[es(k)] = -1.0; r3.rhs = nominal.stddev[k];
    r4.coeffs[sd(k)] = -1.0; r4.coeffs[es(k)] = -1.0; r4.rhs = -nominal.stddev[k];
    up.coeffs[mu(k)] = 1.0;  up.coeffs[sd(k)] = z;    up.rhs = upper[k];
    lo.coeffs[mu(k)] = -1.0; lo.coeffs[sd(k)] = z;    lo.rhs = -lower[k];
    for (auto* r : {&r1, &r2, &r3, &r4, &up, &lo}) prog.linear_rows.push_back(std::move(*r));
  }
  for (const auto& c : constraints) {
    if (c.a_prime.size() != m) throw std::invalid_argument("adjust_distribution: constraint size mismatch");
    // A binding row with zero spread would sit on a knife edge; back off by a hair so
    // roundoff cannot put the whole distribution on the wrong side.
    ConeRow r{z, c.a_prime, Eigen::VectorXd::Zero(n), c.b_double_prime - kChanceRowBackoff, true};
    r.coeffs.head(m) = c.a_prime;
    prog.cone_rows.push_back(std::move(r));
  }

  settings.enable_relaxation = true;
  AdjustResult out;
  out.used_lp = cone_rows_are_linear(prog);
  out.report = out.used_lp ? solve_lp(linearize_cone_rows(prog), settings) : solve_socp(prog, settings);

  if (out.report.status == SolveStatus::infeasible) {
    out.distribution.mean = nominal.mean.cwiseMax(lower).cwiseMin(upper);
    out.distribution.stddev = Eigen::VectorXd::Zero(m);
    out.report.status = SolveStatus::relaxed;
    return out;
  }
  out.distribution.mean = out.report.x.segment(0, m);
  out.distribution.stddev = out.report.x.segment(m, m).cwiseMax(0.0);
  return out;
}

}  // namespace mppi_orca
