#pragma once

#include "mppi_orca/dynamics.hpp"
#include "mppi_orca/mppi.hpp"
#include "mppi_orca/orca.hpp"
#include "mppi_orca/perception.hpp"
#include "mppi_orca/rng.hpp"
#include "mppi_orca/safe_sampler.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mppi_orca {

struct ScenarioAgent {
  AgentState start;
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  double radius = 0.3;
};

struct Workspace {
  Eigen::Vector2d min = Eigen::Vector2d::Constant(-10.0);
  Eigen::Vector2d max = Eigen::Vector2d::Constant(10.0);
};

struct Scenario {
  std::string name;
  std::vector<ScenarioAgent> agents;
  Workspace workspace;
};

struct NoiseConfig {
  Eigen::Vector2d actuation_sigma{0.1, 0.2};
  ObservationNoise observation{Eigen::Matrix2d::Identity() * 0.01, Eigen::Matrix2d::Identity() * 0.01};
};

struct OrcaConfig {
  double tau = 1.0;
  double alpha_resp = 0.5;
  bool v_opt_zero = false;
};

struct SimConfig {
  DiffDriveModel dynamics;
  int max_steps = 1000;
  double goal_tolerance = 0.4;
  NoiseConfig noise;
  SafetyConfig safety;
  MppiConfig mppi;
  OrcaConfig orca;
  TrackingConfig tracking;
  double observation_radius = std::numeric_limits<double>::infinity();
  // Predecessor behaviour: no observation buffer, no execution tightening, no r_unc.
  bool disable_buffers = false;
  bool record_trajectories = true;

  void validate() const {
    dynamics.validate();
    if (max_steps < 1) throw std::invalid_argument("sim: max_steps must be >= 1");
    if (!(goal_tolerance > 0.0)) throw std::invalid_argument("sim: goal_tolerance must be positive");
    if ((noise.actuation_sigma.array() < 0.0).any())
      throw std::invalid_argument("sim: actuation sigma must be non-negative");
    detail::require_psd(noise.observation.sigma_p, "sim: sigma_p");
    detail::require_psd(noise.observation.sigma_v, "sim: sigma_v");
    safety.validate();
    if (safety.delta_u < 0.5) throw std::invalid_argument("sim: delta_u must be >= 0.5");
    mppi.validate();
    if (!(orca.tau > 0.0)) throw std::invalid_argument("sim: orca tau must be positive");
    if (!(orca.alpha_resp >= 0.5 && orca.alpha_resp <= 1.0))
      throw std::invalid_argument("sim: alpha_resp must lie in [0.5, 1]");
    if (!(tracking.process_noise >= 0.0)) throw std::invalid_argument("sim: process noise must be >= 0");
    if (!(observation_radius > 0.0)) throw std::invalid_argument("sim: observation radius must be positive");
  }
};

struct AgentLog {
  std::vector<AgentState> states;          // states[0] is the start
  std::vector<Eigen::Vector2d> commands;   // commands[t] produced states[t + 1]
  std::vector<std::uint8_t> degraded;
};

struct EpisodeResult {
  bool success = false;
  bool collided = false;
  bool timed_out = false;
  int makespan_steps = 0;
  int steps_run = 0;
  double min_pairwise_distance = std::numeric_limits<double>::infinity();
  int safety_degraded_steps = 0;
  std::vector<AgentLog> agents;
  std::vector<std::pair<int, int>> collision_pairs;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Scenarios.

inline Scenario make_circle_scenario(int n, double diameter, double r) {
  if (n < 2) throw std::invalid_argument("circle scenario: need at least two agents");
  if (!(diameter > 0.0) || !(r > 0.0)) throw std::invalid_argument("circle scenario: bad geometry");
  const double radius = 0.5 * diameter;
  const double chord = 2.0 * radius * std::sin(std::numbers::pi / n);
  if (!(chord > 2.0 * r)) throw std::invalid_argument("circle scenario: agents too close on the circle");
  Scenario s;
  s.name = "circle";
  const double extent = radius + 2.0 * r;
  s.workspace = {Eigen::Vector2d::Constant(-extent), Eigen::Vector2d::Constant(extent)};
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n;
    const Eigen::Vector2d p(radius * std::cos(a), radius * std::sin(a));
    s.agents.push_back({{p.x(), p.y(), wrap_angle(a + std::numbers::pi)}, -p, r});
  }
  return s;
}

/// Uniform starts and goals inside a side x side square. Starts and goals are each kept
/// min_sep apart; headings are uniform.
template <class Gen>
Scenario make_random_scenario(int n, double side, double r, double min_sep, Gen& rng) {
  if (n < 1) throw std::invalid_argument("random scenario: need at least one agent");
  if (!(side > 2.0 * r)) throw std::invalid_argument("random scenario: side too small");
  constexpr int kMaxRejections = 10000;
  const double half = 0.5 * side;
  std::uniform_real_distribution<double> coord(-half + r, half - r);
  std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
  int rejections = 0;
  auto place = [&](std::vector<Eigen::Vector2d>& pts) {
    while (static_cast<int>(pts.size()) < n) {
      const Eigen::Vector2d p(coord(rng), coord(rng));
      const bool ok = std::all_of(pts.begin(), pts.end(),
                                  [&](const Eigen::Vector2d& q) { return (p - q).norm() >= min_sep; });
      if (ok) {
        pts.push_back(p);
      } else if (++rejections >= kMaxRejections) {
        throw std::runtime_error("random scenario: too dense, placement rejected " +
                                 std::to_string(kMaxRejections) + " times");
      }
    }
  };
  std::vector<Eigen::Vector2d> starts, goals;
  place(starts);
  place(goals);
  Scenario s;
  s.name = "random";
  s.workspace = {Eigen::Vector2d::Constant(-half), Eigen::Vector2d::Constant(half)};
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    s.agents.push_back({{starts[k].x(), starts[k].y(), wrap_angle(heading(rng))}, goals[k], r});
  }
  return s;
}

/// True iff some pair of centers is strictly closer than 2r.
inline bool check_collision(std::span<const AgentState> states, double r) {
  for (std::size_t i = 0; i < states.size(); ++i)
    for (std::size_t j = i + 1; j < states.size(); ++j)
      if ((states[i].position() - states[j].position()).squaredNorm() < 4.0 * r * r) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Per-agent decentralized controller.

struct Decision {
  Eigen::Vector2d command = Eigen::Vector2d::Zero();
  bool degraded = false;
  int active_constraints = 0;
  int dropped_constraints = 0;
};

/// Controller owned by one agent. It sees its own exact state and the noisy observations
/// handed to it; it has no access to other agents' ground truth.
class AgentController {
 public:
  AgentController(int id, const ScenarioAgent& spec, const SimConfig& cfg)
      : id_(id), goal_(spec.goal), radius_(spec.radius), cfg_(cfg),
        mppi_(cfg.dynamics, with_tolerance(cfg.mppi, cfg.goal_tolerance), cfg.noise.actuation_sigma) {}

  int id() const { return id_; }
  const std::map<int, NeighborTrack>& tracks() const { return tracks_; }

  template <class Gen>
  Decision decide(const AgentState& self, std::span<const Observation> observations, int step, Gen& rng) {
    const double dt = cfg_.dynamics.dt;
    update_tracks(observations, step);

    const bool buffers = !cfg_.disable_buffers;
    const double r_o = buffers ? uncertainty_radius(cfg_.noise.observation.sigma_p, cfg_.safety.delta_o) : 0.0;
    const Eigen::Vector2d heading(std::cos(self.theta), std::sin(self.theta));
    const Eigen::Vector2d v_self = cfg_.orca.v_opt_zero ? Eigen::Vector2d::Zero()
                                                        : Eigen::Vector2d(last_command_[0] * heading);
    const Eigen::Vector3d drift = cfg_.dynamics.drift(self);
    const auto actuation = cfg_.dynamics.actuation(self);
    const Eigen::VectorXd exec_sigma = buffers ? Eigen::VectorXd(cfg_.noise.actuation_sigma)
                                               : Eigen::VectorXd(Eigen::VectorXd::Zero(2));

    Decision out;
    std::vector<TightenedConstraint> rows;
    for (const auto& obs : observations) {
      const auto& track = tracks_.at(obs.neighbor_id);
      OrcaInput in;
      in.p_i = self.position();
      in.r_i = radius_;
      in.obs_pos = obs.pos_hat;
      in.r_j = radius_;
      in.r_o = r_o;
      in.v_opt_i = v_self;
      in.v_opt_j = cfg_.orca.v_opt_zero ? Eigen::Vector2d::Zero() : Eigen::Vector2d(track.mean.tail<2>());
      in.tau = cfg_.orca.tau;
      in.alpha_resp = cfg_.orca.alpha_resp;
      in.dt = dt;
      const HalfPlane hp = orca_halfplane(in);
      auto cs = to_control_space(hp, drift, actuation, self.position(), dt);
      if (!cs) {
        ++out.dropped_constraints;
        continue;
      }
      rows.push_back(tighten_for_execution(cs->a_prime, cs->b_prime, exec_sigma, cfg_.safety.delta_nu));
    }
    out.active_constraints = static_cast<int>(rows.size());

    const auto adjusted = adjust_distribution(mppi_.first_step_nominal(), rows, cfg_.dynamics.lower,
                                              cfg_.dynamics.upper, cfg_.safety.delta_u);
    out.degraded = adjusted.report.status != SolveStatus::optimal;

    CostContext ctx;
    ctx.goal = goal_;
    ctx.goal_projection = goal_projection(self.position(), goal_, cfg_.mppi.d_la);
    ctx.robot_radius = radius_;
    const int horizon = cfg_.mppi.horizon;
    for (const auto& [nid, track] : tracks_) {
      if (track.last_update != step) continue;  // only currently observed neighbors
      const auto pred = predict_track(track, horizon, dt, cfg_.tracking.process_noise);
      NeighborForecast f;
      f.pos.reserve(pred.size());
      f.buffer.reserve(pred.size());
      for (const auto& p : pred) {
        f.pos.push_back(p.pos);
        f.buffer.push_back(buffers ? uncertainty_radius(p.cov, cfg_.safety.delta_o) : 0.0);
      }
      ctx.neighbors.push_back(std::move(f));
    }

    out.command = mppi_.plan(self, adjusted.distribution, ctx, rng).command;
    last_command_ = out.command;
    return out;
  }

 private:
  static MppiConfig with_tolerance(MppiConfig m, double tol) {
    m.goal_tolerance = tol;
    return m;
  }

  void update_tracks(std::span<const Observation> observations, int step) {
    const double dt = cfg_.dynamics.dt;
    const double q = cfg_.tracking.process_noise;
    for (const auto& obs : observations) {
      auto it = tracks_.find(obs.neighbor_id);
      if (it == tracks_.end()) {
        tracks_.emplace(obs.neighbor_id, init_track(obs, cfg_.noise.observation, cfg_.tracking.init_cov_scale));
        continue;
      }
      NeighborTrack& tr = it->second;
      // Bridge any missed steps with pure prediction before the correction.
      const int gap = step - tr.last_update;
      for (int g = 1; g < gap; ++g) tr = kalman_predict(tr, dt, q);
      tr = kalman_update(tr, obs, dt, q, cfg_.noise.observation);
    }
  }

  int id_;
  Eigen::Vector2d goal_;
  double radius_;
  SimConfig cfg_;
  MppiController<DiffDriveModel> mppi_;
  std::map<int, NeighborTrack> tracks_;
  Eigen::Vector2d last_command_ = Eigen::Vector2d::Zero();
};

// ---------------------------------------------------------------------------
// Episodes.

/// Runs one seeded episode. Each step: every active agent observes a snapshot of the
/// previous ground truth, plans, and then all executed (noisy, clamped) controls are
/// applied at once. Agents within goal_tolerance of their goal park and stay put.
inline EpisodeResult run_episode(const Scenario& scenario, const SimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int n = static_cast<int>(scenario.agents.size());
  if (n == 0) throw std::invalid_argument("run_episode: empty scenario");

  EpisodeResult res;
  res.seed = seed;
  res.agents.resize(static_cast<std::size_t>(n));

  std::vector<AgentState> states(static_cast<std::size_t>(n));
  std::vector<Eigen::Vector2d> velocities(static_cast<std::size_t>(n), Eigen::Vector2d::Zero());
  std::vector<bool> parked(static_cast<std::size_t>(n), false);
  std::vector<AgentController> controllers;
  controllers.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    states[k] = scenario.agents[k].start;
    controllers.emplace_back(i, scenario.agents[k], cfg);
    if (cfg.record_trajectories) res.agents[k].states.push_back(states[k]);
  }

  auto pair_scan = [&](const std::vector<AgentState>& s) {
    bool hit = false;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(j);
        const double d = (s[a].position() - s[b].position()).norm();
        res.min_pairwise_distance = std::min(res.min_pairwise_distance, d);
        if (d < scenario.agents[a].radius + scenario.agents[b].radius) {
          hit = true;
          res.collision_pairs.emplace_back(i, j);
        }
      }
    return hit;
  };
  auto at_goal = [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    return (states[k].position() - scenario.agents[k].goal).norm() <= cfg.goal_tolerance;
  };

  if (pair_scan(states)) {
    res.collided = true;
    return res;
  }
  for (int i = 0; i < n; ++i) parked[static_cast<std::size_t>(i)] = at_goal(i);

  const ActuationNoise<2> act_noise{cfg.noise.actuation_sigma};
  std::vector<Eigen::Vector2d> commands(static_cast<std::size_t>(n));
  std::vector<std::uint8_t> degraded(static_cast<std::size_t>(n));
  std::vector<Observation> observations;

  for (int step = 0; step < cfg.max_steps; ++step) {
    if (std::all_of(parked.begin(), parked.end(), [](bool b) { return b; })) break;
    const std::vector<AgentState> snapshot = states;
    const std::vector<Eigen::Vector2d> vel_snapshot = velocities;

    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      commands[k].setZero();
      degraded[k] = 0;
      if (parked[k]) continue;
      observations.clear();
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const auto kj = static_cast<std::size_t>(j);
        if ((snapshot[kj].position() - snapshot[k].position()).norm() > cfg.observation_radius) continue;
        auto orng = make_stream(seed, {tag(StreamTag::observation), k, static_cast<std::uint64_t>(step), kj});
        observations.push_back(observe(snapshot[kj].position(), vel_snapshot[kj], cfg.noise.observation,
                                       orng, j, step));
      }
      auto prng = make_stream(seed, {tag(StreamTag::rollout), k, static_cast<std::uint64_t>(step)});
      const Decision d = controllers[k].decide(snapshot[k], observations, step, prng);
      commands[k] = d.command;
      degraded[k] = d.degraded ? 1 : 0;
      res.safety_degraded_steps += d.degraded ? 1 : 0;
    }

    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (parked[k]) {
        velocities[k].setZero();
        continue;
      }
      auto arng = make_stream(seed, {tag(StreamTag::actuation), k, static_cast<std::uint64_t>(step)});
      const Eigen::Vector2d executed =
          clamp_control(sample_executed_control<2>(commands[k], act_noise, arng), cfg.dynamics);
      const AgentState next = cfg.dynamics.step(snapshot[k], executed);
      velocities[k] = (next.position() - snapshot[k].position()) / cfg.dynamics.dt;
      states[k] = next;
    }

    res.steps_run = step + 1;
    if (cfg.record_trajectories) {
      for (int i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        res.agents[k].states.push_back(states[k]);
        res.agents[k].commands.push_back(commands[k]);
        res.agents[k].degraded.push_back(degraded[k]);
      }
    }

    if (pair_scan(states)) {
      res.collided = true;
      return res;
    }
    for (int i = 0; i < n; ++i) parked[static_cast<std::size_t>(i)] = parked[static_cast<std::size_t>(i)] || at_goal(i);
  }

  if (std::all_of(parked.begin(), parked.end(), [](bool b) { return b; })) {
    res.success = true;
    res.makespan_steps = res.steps_run;
  } else {
    res.timed_out = true;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Metrics.

struct Metrics {
  int episodes = 0;
  double success_rate = 0.0;    // percent
  double collision_rate = 0.0;  // percent
  double timeout_rate = 0.0;    // percent
  double mean_makespan_s = std::numeric_limits<double>::quiet_NaN();
  double std_makespan_s = std::numeric_limits<double>::quiet_NaN();
  double mean_min_dist_m = 0.0;
  double degraded_steps_mean = 0.0;
};

/// Success, collision and timeout are disjoint outcomes. Makespan statistics use
/// successful episodes only (sample standard deviation).
inline Metrics aggregate(std::span<const EpisodeResult> results, double dt) {
  if (results.empty()) throw std::invalid_argument("aggregate: no episodes");
  Metrics m;
  m.episodes = static_cast<int>(results.size());
  std::vector<double> makespans;
  int succ = 0, col = 0, tout = 0;
  double min_dist = 0.0, degraded = 0.0;
  for (const auto& r : results) {
    succ += r.success;
    col += r.collided;
    tout += r.timed_out;
    if (r.success) makespans.push_back(r.makespan_steps * dt);
    min_dist += std::isfinite(r.min_pairwise_distance) ? r.min_pairwise_distance : 0.0;
    degraded += r.safety_degraded_steps;
  }
  const double count = static_cast<double>(results.size());
  m.success_rate = 100.0 * succ / count;
  m.collision_rate = 100.0 * col / count;
  m.timeout_rate = 100.0 * tout / count;
  m.mean_min_dist_m = min_dist / count;
  m.degraded_steps_mean = degraded / count;
  if (!makespans.empty()) {
    const double mean = std::accumulate(makespans.begin(), makespans.end(), 0.0) / makespans.size();
    double var = 0.0;
    for (double v : makespans) var += (v - mean) * (v - mean);
    m.mean_makespan_s = mean;
    m.std_makespan_s = makespans.size() > 1 ? std::sqrt(var / (makespans.size() - 1)) : 0.0;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Batch execution.

struct EpisodeTask {
  Scenario scenario;
  SimConfig config;
  std::uint64_t seed = 0;
};

/// Runs tasks on up to `jobs` threads; results keep task order.
inline std::vector<EpisodeResult> run_batch(const std::vector<EpisodeTask>& tasks, int jobs) {
  std::vector<EpisodeResult> out(tasks.size());
  jobs = std::max(1, jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i)
      out[i] = run_episode(tasks[i].scenario, tasks[i].config, tasks[i].seed);
    return out;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++)
      out[i] = run_episode(tasks[i].scenario, tasks[i].config, tasks[i].seed);
  };
  std::vector<std::future<void>> pool;
  for (int w = 0; w < jobs; ++w) pool.push_back(std::async(std::launch::async, worker));
  for (auto& f : pool) f.get();
  return out;
}

}  // namespace mppi_orca
