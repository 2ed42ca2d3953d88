#pragma once

// Batch experiment plumbing: JSON run configs, sweeps, metrics.csv, manifests,
// trajectory logs and SVG plots. Everything here is deterministic for a given config.

#include "mppi_orca/simulator.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#ifndef MPPI_ORCA_VERSION
#define MPPI_ORCA_VERSION "0.1.0"
#endif

namespace mppi_orca {

/// Raised for anything wrong with a user-supplied configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScenarioSpec {
  std::string type = "circle";  // "circle" or "random"
  double diameter = 12.0;
  double side = 20.0;
  double radius = 0.3;
  double min_sep = -1.0;  // negative: 4 * radius
  double effective_min_sep() const { return min_sep < 0.0 ? 4.0 * radius : min_sep; }
};

struct SweepSpec {
  std::vector<int> n_agents{2, 4, 8, 10};
  int instances = 1;
  int seeds = 10;
  std::uint64_t master_seed = 1;
  std::vector<std::string> ablations;
};

struct RunConfig {
  SimConfig sim;
  ScenarioSpec scenario;
  SweepSpec sweep;
};

inline const std::vector<std::string>& known_ablations() {
  static const std::vector<std::string> names{"disable_buffers", "v_opt_zero"};
  return names;
}

/// Method label used in metrics.csv. The buffer-free ablation is the predecessor method.
inline std::string method_label(const std::string& ablation) {
  if (ablation.empty()) return "mppi-orca-prob";
  if (ablation == "disable_buffers") return "mppi-orca";
  if (ablation == "v_opt_zero") return "mppi-orca-prob-vopt0";
  throw ConfigError("unknown ablation '" + ablation + "'");
}

inline SimConfig apply_ablation(SimConfig cfg, const std::string& ablation) {
  if (ablation == "disable_buffers") cfg.disable_buffers = true;
  else if (ablation == "v_opt_zero") cfg.orca.v_opt_zero = true;
  else if (!ablation.empty()) throw ConfigError("unknown ablation '" + ablation + "'");
  return cfg;
}

// ---------------------------------------------------------------------------
// JSON <-> config.

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::string& section, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError("section '" + section + "' must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + section + "." + k + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + section + "." + key + "': " + e.what());
  }
}

inline void read_vec2(const json& j, const char* key, Eigen::Vector2d& out, const std::string& section) {
  if (!j.contains(key)) return;
  std::array<double, 2> v{};
  read(j, key, v, section);
  out = {v[0], v[1]};
}

inline json vec2(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

inline Eigen::Vector2d diag_std(const Eigen::Matrix2d& cov) {
  return {std::sqrt(cov(0, 0)), std::sqrt(cov(1, 1))};
}

}  // namespace detail

/// Every knob, materialized. This is also the body of manifest.json.
inline nlohmann::json to_json(const RunConfig& rc) {
  using nlohmann::json;
  using detail::vec2;
  const SimConfig& s = rc.sim;
  json j;
  j["dynamics"] = {{"dt", s.dynamics.dt},
                   {"control_lower", vec2(s.dynamics.lower)},
                   {"control_upper", vec2(s.dynamics.upper)},
                   {"max_steps", s.max_steps},
                   {"goal_tolerance", s.goal_tolerance}};
  j["noise"] = {{"actuation_std", vec2(s.noise.actuation_sigma)},
                {"observation_pos_std", vec2(detail::diag_std(s.noise.observation.sigma_p))},
                {"observation_vel_std", vec2(detail::diag_std(s.noise.observation.sigma_v))},
                {"tracking_process_noise", s.tracking.process_noise},
                {"tracking_init_cov_scale", s.tracking.init_cov_scale}};
  j["safety"] = {{"delta_o", s.safety.delta_o}, {"delta_nu", s.safety.delta_nu}, {"delta_u", s.safety.delta_u}};
  const MppiConfig& m = s.mppi;
  j["mppi"] = {{"samples", m.samples}, {"horizon", m.horizon}, {"lambda", m.lambda}, {"kappa", m.kappa},
               {"w_term", m.w_term},   {"w_goal", m.w_goal},   {"w_dist", m.w_dist}, {"w_col", m.w_col},
               {"w_vel", m.w_vel},     {"d_la", m.d_la},       {"d_th", m.d_th}};
  j["orca"] = {{"tau", s.orca.tau}, {"alpha_resp", s.orca.alpha_resp}, {"v_opt_zero", s.orca.v_opt_zero},
               {"disable_buffers", s.disable_buffers}};
  if (std::isfinite(s.observation_radius)) j["orca"]["observation_radius"] = s.observation_radius;
  j["scenario"] = {{"type", rc.scenario.type},   {"diameter", rc.scenario.diameter},
                   {"side", rc.scenario.side},   {"radius", rc.scenario.radius},
                   {"min_sep", rc.scenario.effective_min_sep()}};
  j["sweep"] = {{"n_agents", rc.sweep.n_agents}, {"instances", rc.sweep.instances},
                {"seeds", rc.sweep.seeds},       {"master_seed", rc.sweep.master_seed},
                {"ablations", rc.sweep.ablations}};
  return j;
}

/// Parses a run config. Missing keys keep their defaults; unknown keys are errors. A
/// top-level "manifest" object (written by the runner) is ignored so manifests re-run.
inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::read;
  using detail::read_vec2;
  using detail::reject_unknown;
  reject_unknown(j, "<root>", {"dynamics", "noise", "safety", "mppi", "orca", "scenario", "sweep", "manifest"});
  RunConfig rc;
  SimConfig& s = rc.sim;

  if (j.contains("dynamics")) {
    const auto& d = j["dynamics"];
    reject_unknown(d, "dynamics", {"dt", "control_lower", "control_upper", "max_steps", "goal_tolerance"});
    read(d, "dt", s.dynamics.dt, "dynamics");
    read_vec2(d, "control_lower", s.dynamics.lower, "dynamics");
    read_vec2(d, "control_upper", s.dynamics.upper, "dynamics");
    read(d, "max_steps", s.max_steps, "dynamics");
    read(d, "goal_tolerance", s.goal_tolerance, "dynamics");
  }
  if (j.contains("noise")) {
    const auto& d = j["noise"];
    reject_unknown(d, "noise", {"actuation_std", "observation_pos_std", "observation_vel_std",
                                "tracking_process_noise", "tracking_init_cov_scale"});
    read_vec2(d, "actuation_std", s.noise.actuation_sigma, "noise");
    Eigen::Vector2d ps = detail::diag_std(s.noise.observation.sigma_p);
    Eigen::Vector2d vs = detail::diag_std(s.noise.observation.sigma_v);
    read_vec2(d, "observation_pos_std", ps, "noise");
    read_vec2(d, "observation_vel_std", vs, "noise");
    if ((ps.array() < 0.0).any() || (vs.array() < 0.0).any())
      throw ConfigError("noise: standard deviations must be non-negative");
    s.noise.observation.sigma_p = ps.cwiseAbs2().asDiagonal();
    s.noise.observation.sigma_v = vs.cwiseAbs2().asDiagonal();
    read(d, "tracking_process_noise", s.tracking.process_noise, "noise");
    read(d, "tracking_init_cov_scale", s.tracking.init_cov_scale, "noise");
  }
  if (j.contains("safety")) {
    const auto& d = j["safety"];
    reject_unknown(d, "safety", {"delta_o", "delta_nu", "delta_u"});
    read(d, "delta_o", s.safety.delta_o, "safety");
    read(d, "delta_nu", s.safety.delta_nu, "safety");
    read(d, "delta_u", s.safety.delta_u, "safety");
  }
  if (j.contains("mppi")) {
    const auto& d = j["mppi"];
    reject_unknown(d, "mppi", {"samples", "horizon", "lambda", "kappa", "w_term", "w_goal", "w_dist", "w_col",
                               "w_vel", "d_la", "d_th"});
    MppiConfig& m = s.mppi;
    read(d, "samples", m.samples, "mppi");
    read(d, "horizon", m.horizon, "mppi");
    read(d, "lambda", m.lambda, "mppi");
    read(d, "kappa", m.kappa, "mppi");
    read(d, "w_term", m.w_term, "mppi");
    read(d, "w_goal", m.w_goal, "mppi");
    read(d, "w_dist", m.w_dist, "mppi");
    read(d, "w_col", m.w_col, "mppi");
    read(d, "w_vel", m.w_vel, "mppi");
    read(d, "d_la", m.d_la, "mppi");
    read(d, "d_th", m.d_th, "mppi");
  }
  if (j.contains("orca")) {
    const auto& d = j["orca"];
    reject_unknown(d, "orca", {"tau", "alpha_resp", "v_opt_zero", "disable_buffers", "observation_radius"});
    read(d, "tau", s.orca.tau, "orca");
    read(d, "alpha_resp", s.orca.alpha_resp, "orca");
    read(d, "v_opt_zero", s.orca.v_opt_zero, "orca");
    read(d, "disable_buffers", s.disable_buffers, "orca");
    read(d, "observation_radius", s.observation_radius, "orca");
  }
  if (j.contains("scenario")) {
    const auto& d = j["scenario"];
    reject_unknown(d, "scenario", {"type", "diameter", "side", "radius", "min_sep"});
    read(d, "type", rc.scenario.type, "scenario");
    read(d, "diameter", rc.scenario.diameter, "scenario");
    read(d, "side", rc.scenario.side, "scenario");
    read(d, "radius", rc.scenario.radius, "scenario");
    read(d, "min_sep", rc.scenario.min_sep, "scenario");
  }
  if (j.contains("sweep")) {
    const auto& d = j["sweep"];
    reject_unknown(d, "sweep", {"n_agents", "instances", "seeds", "master_seed", "ablations"});
    read(d, "n_agents", rc.sweep.n_agents, "sweep");
    read(d, "instances", rc.sweep.instances, "sweep");
    read(d, "seeds", rc.sweep.seeds, "sweep");
    read(d, "master_seed", rc.sweep.master_seed, "sweep");
    read(d, "ablations", rc.sweep.ablations, "sweep");
  }

  if (rc.scenario.type != "circle" && rc.scenario.type != "random")
    throw ConfigError("scenario.type must be 'circle' or 'random'");
  if (rc.sweep.n_agents.empty()) throw ConfigError("sweep.n_agents must not be empty");
  for (int n : rc.sweep.n_agents)
    if (n < 2) throw ConfigError("sweep.n_agents entries must be >= 2");
  if (rc.sweep.instances < 1 || rc.sweep.seeds < 1) throw ConfigError("sweep: instances and seeds must be >= 1");
  for (const auto& a : rc.sweep.ablations) method_label(a);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return rc;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Sweep expansion.

struct EpisodeKey {
  std::string scenario;
  int n_agents = 0;
  int instance = 0;
  int repetition = 0;
  std::string ablation;

  std::string name() const {
    std::ostringstream os;
    os << scenario << "_n" << n_agents << "_i" << instance << "_r" << repetition << "_" << method_label(ablation);
    return os.str();
  }
};

struct PlannedEpisode {
  EpisodeKey key;
  EpisodeTask task;
};

/// Scenario for one sweep point. Random instances come from their own seeded stream, so
/// every method and repetition sees the same layout.
inline Scenario build_scenario(const RunConfig& rc, int n, int instance) {
  if (rc.scenario.type == "circle") return make_circle_scenario(n, rc.scenario.diameter, rc.scenario.radius);
  auto rng = make_stream(rc.sweep.master_seed, {tag(StreamTag::scenario), static_cast<std::uint64_t>(n),
                                                static_cast<std::uint64_t>(instance)});
  return make_random_scenario(n, rc.scenario.side, rc.scenario.radius, rc.scenario.effective_min_sep(), rng);
}

/// Episode seed; independent of the method so ablations are paired with the full method.
inline std::uint64_t episode_seed(const RunConfig& rc, int n, int instance, int repetition) {
  return stream_seed(rc.sweep.master_seed, {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(instance),
                                            static_cast<std::uint64_t>(repetition)});
}

inline std::vector<std::string> methods_of(const RunConfig& rc) {
  std::vector<std::string> out{""};
  for (const auto& a : rc.sweep.ablations)
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  return out;
}

inline std::vector<PlannedEpisode> plan_sweep(const RunConfig& rc, bool record_trajectories) {
  std::vector<PlannedEpisode> out;
  for (int n : rc.sweep.n_agents)
    for (const auto& ablation : methods_of(rc))
      for (int inst = 0; inst < rc.sweep.instances; ++inst) {
        const Scenario scenario = build_scenario(rc, n, inst);
        for (int rep = 0; rep < rc.sweep.seeds; ++rep) {
          PlannedEpisode p;
          p.key = {rc.scenario.type, n, inst, rep, ablation};
          p.task.scenario = scenario;
          p.task.config = apply_ablation(rc.sim, ablation);
          p.task.config.record_trajectories = record_trajectories;
          p.task.seed = episode_seed(rc, n, inst, rep);
          out.push_back(std::move(p));
        }
      }
  return out;
}

// ---------------------------------------------------------------------------
// Output files.

inline const char* kMetricsHeader =
    "scenario,n_agents,method,episodes,success_rate,collision_rate,timeout_rate,mean_makespan_s,"
    "std_makespan_s,mean_min_dist_m,degraded_steps_mean";

/// RFC 4180 field quoting.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string fixed(double v, int digits = 4) {
  if (!std::isfinite(v)) return "";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

struct MetricsRow {
  std::string scenario;
  int n_agents = 0;
  std::string method;
  Metrics metrics;
};

/// Makespan columns stay blank unless more than half the episodes succeeded.
inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  os << kMetricsHeader << "\r\n";
  for (const auto& r : rows) {
    const Metrics& m = r.metrics;
    const bool show_makespan = m.success_rate > 50.0;
    os << csv_field(r.scenario) << ',' << r.n_agents << ',' << csv_field(r.method) << ',' << m.episodes << ','
       << fixed(m.success_rate, 2) << ',' << fixed(m.collision_rate, 2) << ',' << fixed(m.timeout_rate, 2) << ','
       << (show_makespan ? fixed(m.mean_makespan_s, 3) : "") << ','
       << (show_makespan ? fixed(m.std_makespan_s, 3) : "") << ',' << fixed(m.mean_min_dist_m, 4) << ','
       << fixed(m.degraded_steps_mean, 2) << "\r\n";
  }
  return os.str();
}

/// One JSON object per step: poses, commands and degraded flags of every agent.
inline void write_trajectory_jsonl(const EpisodeResult& res, std::ostream& os) {
  using nlohmann::json;
  if (res.agents.empty()) return;
  const std::size_t steps = res.agents.front().states.size();
  for (std::size_t t = 0; t < steps; ++t) {
    json line;
    line["step"] = t;
    json poses = json::array(), cmds = json::array(), degr = json::array();
    for (const auto& a : res.agents) {
      poses.push_back({a.states[t].px, a.states[t].py, a.states[t].theta});
      if (t < a.commands.size()) {
        cmds.push_back({a.commands[t].x(), a.commands[t].y()});
        degr.push_back(a.degraded[t] != 0);
      } else {
        cmds.push_back(nullptr);
        degr.push_back(nullptr);
      }
    }
    line["pose"] = std::move(poses);
    line["command"] = std::move(cmds);
    line["degraded"] = std::move(degr);
    os << line.dump() << '\n';
  }
}

/// Static SVG of the recorded paths: one polyline per agent, hollow start markers, goal
/// crosses, and a red ring where a collision ended the episode.
inline std::string trajectory_svg(const Scenario& scenario, const EpisodeResult& res) {
  constexpr double kSize = 600.0, kPad = 40.0;
  const Eigen::Vector2d lo = scenario.workspace.min, hi = scenario.workspace.max;
  const double span = std::max({hi.x() - lo.x(), hi.y() - lo.y(), 1e-9});
  const double scale = (kSize - 2.0 * kPad) / span;
  auto X = [&](double x) { return fixed(kPad + (x - lo.x()) * scale, 2); };
  auto Y = [&](double y) { return fixed(kSize - kPad - (y - lo.y()) * scale, 2); };
  auto color = [](std::size_t i, std::size_t n) {
    std::ostringstream os;
    os << "hsl(" << (n == 0 ? 0 : static_cast<int>(360 * i / n)) << ",70%,45%)";
    return os.str();
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
     << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<g id=\"axes\" stroke=\"#888\" stroke-width=\"1\" fill=\"none\">\n"
     << "<rect x=\"" << X(lo.x()) << "\" y=\"" << Y(hi.y()) << "\" width=\"" << fixed(span * scale, 2)
     << "\" height=\"" << fixed(span * scale, 2) << "\"/>\n";
  if (lo.x() < 0.0 && hi.x() > 0.0)
    os << "<line x1=\"" << X(0) << "\" y1=\"" << Y(lo.y()) << "\" x2=\"" << X(0) << "\" y2=\"" << Y(hi.y())
       << "\" stroke-dasharray=\"4 4\"/>\n";
  if (lo.y() < 0.0 && hi.y() > 0.0)
    os << "<line x1=\"" << X(lo.x()) << "\" y1=\"" << Y(0) << "\" x2=\"" << X(hi.x()) << "\" y2=\"" << Y(0)
       << "\" stroke-dasharray=\"4 4\"/>\n";
  os << "</g>\n";

  const std::size_t n = res.agents.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& states = res.agents[i].states;
    if (states.empty()) continue;
    const std::string c = color(i, n);
    os << "<polyline class=\"path\" fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t t = 0; t < states.size(); ++t)
      os << (t ? " " : "") << X(states[t].px) << ',' << Y(states[t].py);
    os << "\"/>\n";
    os << "<circle class=\"start\" cx=\"" << X(states.front().px) << "\" cy=\"" << Y(states.front().py)
       << "\" r=\"4\" fill=\"none\" stroke=\"" << c << "\"/>\n";
    if (i < scenario.agents.size()) {
      const auto& g = scenario.agents[i].goal;
      os << "<path class=\"goal\" stroke=\"" << c << "\" d=\"M" << X(g.x() - 0.2) << ' ' << Y(g.y() - 0.2) << " L"
         << X(g.x() + 0.2) << ' ' << Y(g.y() + 0.2) << " M" << X(g.x() - 0.2) << ' ' << Y(g.y() + 0.2) << " L"
         << X(g.x() + 0.2) << ' ' << Y(g.y() - 0.2) << "\"/>\n";
    }
  }
  for (const auto& [a, b] : res.collision_pairs) {
    const auto ia = static_cast<std::size_t>(a), ib = static_cast<std::size_t>(b);
    if (ia >= n || ib >= n || res.agents[ia].states.empty() || res.agents[ib].states.empty()) continue;
    const Eigen::Vector2d mid = 0.5 * (res.agents[ia].states.back().position() + res.agents[ib].states.back().position());
    os << "<circle class=\"collision\" cx=\"" << X(mid.x()) << "\" cy=\"" << Y(mid.y())
       << "\" r=\"8\" fill=\"none\" stroke=\"red\" stroke-width=\"2\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline void plot_trajectories(const Scenario& scenario, const EpisodeResult& res, const std::filesystem::path& out) {
  std::ofstream f(out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + out.string());
  f << trajectory_svg(scenario, res);
}

// ---------------------------------------------------------------------------
// Sweep driver.

struct SweepOptions {
  int jobs = 1;
  bool trajectories = false;
  bool plots = false;
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Resolved config plus a "manifest" block listing every episode seed.
inline nlohmann::json build_manifest(const RunConfig& rc) {
  using nlohmann::json;
  json j = to_json(rc);
  json points = json::array();
  for (int n : rc.sweep.n_agents)
    for (const auto& ablation : methods_of(rc)) {
      json seeds = json::array();
      for (int inst = 0; inst < rc.sweep.instances; ++inst)
        for (int rep = 0; rep < rc.sweep.seeds; ++rep) seeds.push_back(episode_seed(rc, n, inst, rep));
      points.push_back({{"scenario", rc.scenario.type}, {"n_agents", n}, {"method", method_label(ablation)},
                        {"seeds", std::move(seeds)}});
    }
  j["manifest"] = {{"code_version", MPPI_ORCA_VERSION},
                   {"master_seed", rc.sweep.master_seed},
                   {"timestamp", utc_timestamp()},
                   {"points", std::move(points)}};
  return j;
}

/// Runs the whole sweep into out_dir and returns the metrics rows in sweep order.
inline std::vector<MetricsRow> run_sweep(const RunConfig& rc, const std::filesystem::path& out_dir,
                                         const SweepOptions& opt = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream mf(out_dir / "manifest.json", std::ios::binary);
    mf << build_manifest(rc).dump(2) << '\n';
  }

  const auto planned = plan_sweep(rc, opt.trajectories || opt.plots);
  std::vector<EpisodeTask> tasks;
  tasks.reserve(planned.size());
  for (const auto& p : planned) tasks.push_back(p.task);
  const auto results = run_batch(tasks, opt.jobs);

  if (opt.trajectories) fs::create_directories(out_dir / "trajectories");
  if (opt.plots) fs::create_directories(out_dir / "plots");
  for (std::size_t i = 0; i < planned.size(); ++i) {
    const std::string name = planned[i].key.name();
    if (opt.trajectories) {
      std::ofstream tf(out_dir / "trajectories" / (name + ".jsonl"), std::ios::binary);
      write_trajectory_jsonl(results[i], tf);
    }
    if (opt.plots) plot_trajectories(planned[i].task.scenario, results[i], out_dir / "plots" / (name + ".svg"));
  }

  std::vector<MetricsRow> rows;
  std::size_t begin = 0;
  while (begin < planned.size()) {
    std::size_t end = begin;
    const auto& k0 = planned[begin].key;
    while (end < planned.size() && planned[end].key.n_agents == k0.n_agents &&
           planned[end].key.ablation == k0.ablation)
      ++end;
    const std::span<const EpisodeResult> group(results.data() + begin, end - begin);
    rows.push_back({k0.scenario, k0.n_agents, method_label(k0.ablation), aggregate(group, rc.sim.dynamics.dt)});
    begin = end;
  }

  std::ofstream cf(out_dir / "metrics.csv", std::ios::binary);
  cf << metrics_csv(rows);
  return rows;
}

}  // namespace mppi_orca
