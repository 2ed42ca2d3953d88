#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace mppi_orca {

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::remainder(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  return a;
}

/// Pose of a differential-drive robot.
struct AgentState {
  double px = 0.0;
  double py = 0.0;
  double theta = 0.0;

  Eigen::Vector2d position() const { return {px, py}; }
  Eigen::Vector3d vec() const { return {px, py, theta}; }
  static AgentState from_vec(const Eigen::Vector3d& v) { return {v.x(), v.y(), wrap_angle(v.z())}; }
  bool operator==(const AgentState&) const = default;
};

/// Diagonal actuation noise: executed control = commanded + N(0, diag(sigma^2)).
template <int M>
struct ActuationNoise {
  Eigen::Matrix<double, M, 1> sigma = Eigen::Matrix<double, M, 1>::Zero();
};

/// Generic control-affine system x' = F(x) + G(x) nu with dt folded into F and G.
template <int N, int M>
struct ControlAffineModel {
  using State = Eigen::Matrix<double, N, 1>;
  using Control = Eigen::Matrix<double, M, 1>;
  using Actuation = Eigen::Matrix<double, N, M>;
  static constexpr int kStateDim = N;
  static constexpr int kControlDim = M;

  std::function<State(const State&)> drift;
  std::function<Actuation(const State&)> actuation;
  Control lower;
  Control upper;
  double dt = 0.1;

  State step(const State& x, const Control& nu) const { return drift(x) + actuation(x) * nu; }
  static Eigen::Vector2d position(const State& x) { return x.template head<2>(); }
};

/// Unicycle / differential-drive kinematics with u = (v, w):
///   p' = p + dt * v * (cos th, sin th),  th' = wrap(th + dt * w).
struct DiffDriveModel {
  using State = AgentState;
  using Control = Eigen::Vector2d;
  using Actuation = Eigen::Matrix<double, 3, 2>;
  static constexpr int kStateDim = 3;
  static constexpr int kControlDim = 2;

  double dt = 0.1;
  Control lower{-1.0, -2.0};
  Control upper{1.0, 2.0};

  Eigen::Vector3d drift(const AgentState& x) const { return x.vec(); }

  Actuation actuation(const AgentState& x) const {
    Actuation g;
    g << dt * std::cos(x.theta), 0.0,
         dt * std::sin(x.theta), 0.0,
         0.0, dt;
    return g;
  }

  AgentState step(const AgentState& x, const Control& nu) const {
    return {x.px + dt * nu[0] * std::cos(x.theta), x.py + dt * nu[0] * std::sin(x.theta),
            wrap_angle(x.theta + dt * nu[1])};
  }

  static Eigen::Vector2d position(const AgentState& x) { return x.position(); }

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("dynamics: dt must be positive");
    for (int k = 0; k < kControlDim; ++k) {
      if (!(lower[k] < upper[k]))
        throw std::invalid_argument("dynamics: control_lower[" + std::to_string(k) +
                                    "] must be below control_upper");
    }
  }
};

/// Draws nu = u + eps, eps[k] ~ N(0, sigma[k]^2). The result is not clamped.
template <int M, class Gen>
Eigen::Matrix<double, M, 1> sample_executed_control(const Eigen::Matrix<double, M, 1>& u,
                                                    const ActuationNoise<M>& noise, Gen& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Matrix<double, M, 1> nu = u;
  for (int k = 0; k < u.size(); ++k) nu[k] += noise.sigma[k] * normal(rng);
  return nu;
}

template <class Derived>
auto clamp_control(const Eigen::MatrixBase<Derived>& nu, const Eigen::MatrixBase<Derived>& lower,
                   const Eigen::MatrixBase<Derived>& upper) {
  return nu.cwiseMax(lower).cwiseMin(upper).eval();
}

template <class Model>
typename Model::Control clamp_control(const typename Model::Control& nu, const Model& model) {
  return nu.cwiseMax(model.lower).cwiseMin(model.upper);
}

template <class Model>
typename Model::State step(const typename Model::State& x, const typename Model::Control& nu,
                           const Model& model) {
  return model.step(x, nu);
}

}  // namespace mppi_orca
