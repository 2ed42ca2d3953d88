#pragma once

#include "mppi_orca/dynamics.hpp"
#include "mppi_orca/perception.hpp"
#include "mppi_orca/safe_sampler.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mppi_orca {

/// Sampling controller parameters. None of these are fixed by the method itself; the
/// defaults are tuned for the 0.1 s differential-drive benchmarks.
struct MppiConfig {
  int samples = 300;
  int horizon = 20;
  double lambda = 0.01;
  double kappa = 2.0;  // sampling covariance = kappa * actuation covariance
  double w_term = 10.0;
  double w_goal = 1.0;
  double w_dist = 1.0;
  double w_col = 1e3;
  double w_vel = 0.05;
  double d_la = 4.0;  // look-ahead diameter
  double d_th = 1.0;
  double goal_tolerance = 0.4;

  void validate() const {
    if (samples < 1) throw std::invalid_argument("mppi: samples must be >= 1");
    if (horizon < 1) throw std::invalid_argument("mppi: horizon must be >= 1");
    if (!(lambda > 0.0)) throw std::invalid_argument("mppi: lambda must be positive");
    if (!(kappa >= 1.0)) throw std::invalid_argument("mppi: kappa must be >= 1");
  }
};

template <int M>
struct ControlSequence {
  using Control = Eigen::Matrix<double, M, 1>;
  std::vector<Control> controls;
  std::vector<Control> noises;
};

struct RolloutEvaluation {
  double state_cost = 0.0;
  double penalized_cost = 0.0;
  double weight = 0.0;
};

/// Neighbor forecast aligned with rollout steps: entry t is the neighbor t+1 steps ahead,
/// buffer[t] the collision buffer r_unc derived from its predicted covariance.
struct NeighborForecast {
  std::vector<Eigen::Vector2d> pos;
  std::vector<double> buffer;
};

/// Everything the running cost needs besides the rollout itself.
struct CostContext {
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  Eigen::Vector2d goal_projection = Eigen::Vector2d::Zero();
  double robot_radius = 0.3;
  std::vector<NeighborForecast> neighbors;
};

inline constexpr double kVelocityCostCap = 1e3;

/// Goal projected onto the look-ahead circle (diameter d_la) around the current position.
inline Eigen::Vector2d goal_projection(const Eigen::Vector2d& p0, const Eigen::Vector2d& goal, double d_la) {
  const double radius = 0.5 * d_la;
  const Eigen::Vector2d d = goal - p0;
  const double dist = d.norm();
  if (dist <= radius) return goal;
  return p0 + (radius / dist) * d;
}

inline double goal_cost(const AgentState& x, const Eigen::Vector2d& goal_proj) {
  return (x.position() - goal_proj).norm();
}

inline double distance_cost_from_sq(double min_dist2, double d_th) {
  if (min_dist2 > d_th * d_th) return 0.0;
  return 1.0 / std::max(min_dist2, 1e-12);
}

inline double distance_cost(const AgentState& x, const std::vector<NeighborPrediction>& predicted,
                            double d_th) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& n : predicted) best = std::min(best, (x.position() - n.pos).squaredNorm());
  return distance_cost_from_sq(best, d_th);
}

inline double collision_cost(const AgentState& x, const std::vector<NeighborPrediction>& predicted,
                             double r, double delta_o) {
  for (const auto& n : predicted) {
    const double reach = 2.0 * r + uncertainty_radius(n.cov, delta_o);
    if ((x.position() - n.pos).squaredNorm() < reach * reach) return 1.0;
  }
  return 0.0;
}

template <class Derived>
double velocity_cost(const Eigen::MatrixBase<Derived>& u) {
  const double norm = u.norm();
  if (norm <= 1.0 / kVelocityCostCap) return kVelocityCostCap;
  return 1.0 / norm;
}

/// Draws one control sequence: step 0 from the adjusted distribution, later steps around
/// u_init with sampling stddev sigma_star. Controls are clamped; noises are recorded as
/// (clamped control - u_init) so the importance penalty sees what was rolled out.
template <class Model, class Gen>
void sample_rollout_into(const typename Model::State& x0,
                         const std::vector<typename Model::Control>& u_init,
                         const ControlDistribution& first_step,
                         const typename Model::Control& sigma_star, const Model& model, Gen& rng,
                         ControlSequence<Model::kControlDim>& seq,
                         std::vector<typename Model::State>& traj) {
  constexpr int m = Model::kControlDim;
  const auto horizon = u_init.size();
  seq.controls.resize(horizon);
  seq.noises.resize(horizon);
  traj.resize(horizon + 1);
  traj[0] = x0;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t t = 0; t < horizon; ++t) {
    typename Model::Control u;
    if (t == 0) {
      for (int k = 0; k < m; ++k) u[k] = first_step.mean[k] + first_step.stddev[k] * normal(rng);
    } else {
      for (int k = 0; k < m; ++k) u[k] = u_init[t][k] + sigma_star[k] * normal(rng);
    }
    u = clamp_control(u, model);
    seq.controls[t] = u;
    seq.noises[t] = u - u_init[t];
    traj[t + 1] = model.step(traj[t], u);
  }
}

template <class Model, class Gen>
std::pair<ControlSequence<Model::kControlDim>, std::vector<typename Model::State>> sample_rollout(
    const typename Model::State& x0, const std::vector<typename Model::Control>& u_init,
    const ControlDistribution& first_step, const typename Model::Control& sigma_star,
    const Model& model, Gen& rng) {
  std::pair<ControlSequence<Model::kControlDim>, std::vector<typename Model::State>> out;
  sample_rollout_into(x0, u_init, first_step, sigma_star, model, rng, out.first, out.second);
  return out;
}

inline Eigen::Vector2d state_position(const AgentState& x) { return x.position(); }
template <class Derived>
Eigen::Vector2d state_position(const Eigen::MatrixBase<Derived>& x) { return x.template head<2>(); }

/// S = w_term q_goal(x_T) + sum_t q(x_{t+1}, u_t); S_tilde adds the importance-sampling
/// control penalty. Components with zero actuation variance carry no penalty.
template <int M, class State>
RolloutEvaluation evaluate_rollout(const ControlSequence<M>& seq, const std::vector<State>& traj,
                                   const MppiConfig& cfg, const Eigen::Matrix<double, M, 1>& sigma,
                                   const CostContext& ctx) {
  const auto horizon = seq.controls.size();
  Eigen::Matrix<double, M, 1> inv_var;
  for (int k = 0; k < sigma.size(); ++k) inv_var[k] = sigma[k] > 0.0 ? 1.0 / (sigma[k] * sigma[k]) : 0.0;
  const double keep = 1.0 - 1.0 / cfg.kappa;
  const double gol2 = cfg.goal_tolerance * cfg.goal_tolerance;
  const double two_r = 2.0 * ctx.robot_radius;

  double state_cost = 0.0;
  double penalty = 0.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    const Eigen::Vector2d p = state_position(traj[t + 1]);
    double q = cfg.w_goal * (p - ctx.goal_projection).norm();
    if ((p - ctx.goal).squaredNorm() >= gol2) {
      double min_d2 = std::numeric_limits<double>::infinity();
      bool hit = false;
      for (const auto& nb : ctx.neighbors) {
        const double d2 = (p - nb.pos[t]).squaredNorm();
        min_d2 = std::min(min_d2, d2);
        const double reach = two_r + nb.buffer[t];
        hit = hit || d2 < reach * reach;
      }
      if (cfg.w_dist != 0.0) q += cfg.w_dist * distance_cost_from_sq(min_d2, cfg.d_th);
      if (hit) q += cfg.w_col;
      if (cfg.w_vel != 0.0) q += cfg.w_vel * velocity_cost(seq.controls[t]);
    }
    state_cost += q;

    const auto& eps = seq.noises[t];
    const auto u = (seq.controls[t] - eps).eval();
    for (int k = 0; k < u.size(); ++k)
      penalty += inv_var[k] * (u[k] * u[k] + 2.0 * u[k] * eps[k] + keep * eps[k] * eps[k]);
  }
  state_cost += cfg.w_term * (state_position(traj[horizon]) - ctx.goal_projection).norm();

  RolloutEvaluation ev;
  ev.state_cost = state_cost;
  ev.penalized_cost = state_cost + 0.5 * cfg.lambda * penalty;
  return ev;
}

/// Softmax of -S_tilde / lambda, shifted by the minimum S_tilde.
inline std::vector<double> compute_weights(const std::vector<double>& penalized_costs, double lambda) {
  if (penalized_costs.empty()) throw std::invalid_argument("compute_weights: no rollouts");
  const double rho = *std::min_element(penalized_costs.begin(), penalized_costs.end());
  std::vector<double> w(penalized_costs.size());
  double total = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = std::exp(-(penalized_costs[k] - rho) / lambda);
    total += w[k];
  }
  for (auto& x : w) x /= total;
  return w;
}

inline void compute_weights(std::vector<RolloutEvaluation>& evals, double lambda) {
  std::vector<double> costs(evals.size());
  for (std::size_t k = 0; k < evals.size(); ++k) costs[k] = evals[k].penalized_cost;
  const auto w = compute_weights(costs, lambda);
  for (std::size_t k = 0; k < evals.size(); ++k) evals[k].weight = w[k];
}

template <int M>
struct ShiftResult {
  Eigen::Matrix<double, M, 1> command;
  std::vector<Eigen::Matrix<double, M, 1>> next_u_init;
};

/// Weighted average of the sampled sequences; returns its first control and the sequence
/// shifted by one step with the last control repeated.
template <int M>
ShiftResult<M> update_and_shift(const std::vector<ControlSequence<M>>& samples,
                                const std::vector<double>& weights,
                                const std::vector<Eigen::Matrix<double, M, 1>>& u_init) {
  if (samples.size() != weights.size() || samples.empty())
    throw std::invalid_argument("update_and_shift: samples and weights must match");
  const auto horizon = u_init.size();
  std::vector<Eigen::Matrix<double, M, 1>> optimal(horizon, Eigen::Matrix<double, M, 1>::Zero());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (weights[k] == 0.0) continue;
    for (std::size_t t = 0; t < horizon; ++t) optimal[t] += weights[k] * samples[k].controls[t];
  }
  ShiftResult<M> out;
  out.command = optimal[0];
  out.next_u_init.assign(optimal.begin() + 1, optimal.end());
  out.next_u_init.push_back(optimal.back());
  return out;
}

template <int M>
struct MppiOutput {
  Eigen::Matrix<double, M, 1> command;
  double best_cost = 0.0;
};

/// Receding-horizon MPPI for one agent.
template <class Model>
class MppiController {
 public:
  using State = typename Model::State;
  using Control = typename Model::Control;
  static constexpr int M = Model::kControlDim;

  MppiController(Model model, MppiConfig cfg, Control sigma)
      : model_(std::move(model)), cfg_(cfg), sigma_(sigma) {
    cfg_.validate();
    reset();
  }

  void reset() { u_init_.assign(static_cast<std::size_t>(cfg_.horizon), Control::Zero()); }

  const std::vector<Control>& nominal_sequence() const { return u_init_; }
  void set_nominal_sequence(std::vector<Control> u) { u_init_ = std::move(u); }
  const MppiConfig& config() const { return cfg_; }
  const Model& model() const { return model_; }
  Control sampling_stddev() const { return std::sqrt(cfg_.kappa) * sigma_; }

  /// Nominal step-0 distribution before safety adjustment.
  ControlDistribution first_step_nominal() const {
    return {Eigen::VectorXd(u_init_.front()), Eigen::VectorXd(sampling_stddev())};
  }

  template <class Gen>
  MppiOutput<M> plan(const State& x0, const ControlDistribution& first_step, const CostContext& ctx,
                     Gen& rng) {
    const auto k_samples = static_cast<std::size_t>(cfg_.samples);
    samples_.resize(k_samples);
    costs_.resize(k_samples);
    const Control sigma_star = sampling_stddev();
    for (std::size_t k = 0; k < k_samples; ++k) {
      sample_rollout_into(x0, u_init_, first_step, sigma_star, model_, rng, samples_[k], traj_);
      costs_[k] = evaluate_rollout(samples_[k], traj_, cfg_, sigma_, ctx).penalized_cost;
    }
    const auto weights = compute_weights(costs_, cfg_.lambda);
    auto shifted = update_and_shift<M>(samples_, weights, u_init_);
    u_init_ = std::move(shifted.next_u_init);
    MppiOutput<M> out;
    out.command = shifted.command;
    out.best_cost = *std::min_element(costs_.begin(), costs_.end());
    return out;
  }

 private:
  Model model_;
  MppiConfig cfg_;
  Control sigma_;
  std::vector<Control> u_init_;
  std::vector<ControlSequence<M>> samples_;
  std::vector<double> costs_;
  std::vector<State> traj_;
};

}  // namespace mppi_orca
