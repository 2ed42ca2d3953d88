#pragma once

// Small dense solvers for linear objectives over linear and second-order-cone rows.
// Problems here have a handful of variables and tens of rows, so everything is dense
// and deterministic: a two-phase tableau simplex with Bland's rule for pure LPs and a
// log-barrier path-following method for programs with genuine cone rows.

#include <Eigen/Core>
#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace mppi_orca {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// row . x <= rhs
struct LinearRow {
  Eigen::VectorXd coeffs;
  double rhs = 0.0;
  bool relaxable = false;
};

/// gain * || std_coeffs o s(x) ||_2 + coeffs . x <= rhs, where s(x) = x[std_block].
struct ConeRow {
  double gain = 0.0;
  Eigen::VectorXd std_coeffs;
  Eigen::VectorXd coeffs;
  double rhs = 0.0;
  bool relaxable = false;
};

struct ConicProgram {
  Eigen::VectorXd objective;
  std::vector<LinearRow> linear_rows;
  std::vector<ConeRow> cone_rows;
  std::vector<int> std_block;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int num_vars() const { return static_cast<int>(objective.size()); }
};

enum class SolveStatus { optimal, infeasible, relaxed };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::relaxed: return "relaxed";
  }
  return "?";
}

struct SolveReport {
  Eigen::VectorXd x;
  SolveStatus status = SolveStatus::infeasible;
  double objective = 0.0;
  double max_violation = 0.0;
  double slack_used = 0.0;
};

/// All solver tolerances live here.
struct SolverSettings {
  double linear_feasibility_tol = 1e-8;
  double cone_feasibility_tol = 1e-5;
  double pivot_tol = 1e-11;
  double reduced_cost_tol = 1e-11;
  double barrier_gap = 1e-9;
  double newton_tol = 1e-11;
  int max_newton_iters = 100;
  int max_pivots = 10000;
  bool enable_relaxation = false;
  double relaxation_weight = 1e3;  // multiplied by the objective scale
  double relaxation_threshold = 1e-7;
};

namespace detail {

inline void check_dimensions(const ConicProgram& prog) {
  const int n = prog.num_vars();
  if (n == 0) throw std::invalid_argument("conic: empty decision vector");
  if (prog.lower.size() != n || prog.upper.size() != n)
    throw std::invalid_argument("conic: bound vectors must match the objective size");
  for (int j = 0; j < n; ++j)
    if (prog.lower[j] > prog.upper[j])
      throw std::invalid_argument("conic: lower bound above upper bound for variable " +
                                  std::to_string(j));
  for (const auto& r : prog.linear_rows)
    if (r.coeffs.size() != n) throw std::invalid_argument("conic: linear row size mismatch");
  const auto nb = prog.std_block.size();
  for (int idx : prog.std_block)
    if (idx < 0 || idx >= n) throw std::invalid_argument("conic: std_block index out of range");
  for (const auto& r : prog.cone_rows) {
    if (r.coeffs.size() != n) throw std::invalid_argument("conic: cone row size mismatch");
    if (static_cast<std::size_t>(r.std_coeffs.size()) != nb)
      throw std::invalid_argument("conic: cone row std_coeffs must match std_block");
    if (!(r.gain >= 0.0)) throw std::invalid_argument("conic: cone gain must be non-negative");
  }
}

inline double cone_norm(const ConicProgram& prog, const ConeRow& r, const Eigen::VectorXd& x) {
  double acc = 0.0;
  for (std::size_t k = 0; k < prog.std_block.size(); ++k) {
    const double y = r.std_coeffs[static_cast<Eigen::Index>(k)] * x[prog.std_block[k]];
    acc += y * y;
  }
  return r.gain * std::sqrt(acc);
}

struct Violation {
  double linear = 0.0;
  double cone = 0.0;
  double relaxable = 0.0;
};

inline Violation measure_violation(const ConicProgram& prog, const Eigen::VectorXd& x) {
  Violation v;
  for (int j = 0; j < prog.num_vars(); ++j) {
    v.linear = std::max({v.linear, prog.lower[j] - x[j], x[j] - prog.upper[j]});
  }
  for (const auto& r : prog.linear_rows) {
    const double e = r.coeffs.dot(x) - r.rhs;
    if (r.relaxable) v.relaxable = std::max(v.relaxable, e);
    else v.linear = std::max(v.linear, e);
  }
  for (const auto& r : prog.cone_rows) {
    const double e = cone_norm(prog, r, x) + r.coeffs.dot(x) - r.rhs;
    if (r.relaxable) v.relaxable = std::max(v.relaxable, e);
    else v.cone = std::max(v.cone, e);
  }
  return v;
}

/// Appends one shared non-negative slack subtracted from every relaxable row.
inline ConicProgram with_relaxation(const ConicProgram& prog, double weight) {
  const int n = prog.num_vars();
  ConicProgram out;
  out.objective.resize(n + 1);
  out.objective << prog.objective, weight;
  out.lower.resize(n + 1);
  out.upper.resize(n + 1);
  out.lower << prog.lower, 0.0;
  out.upper << prog.upper, kInf;
  out.std_block = prog.std_block;
  double slack_cap = 1.0;
  for (const auto& r : prog.linear_rows) {
    LinearRow row{Eigen::VectorXd::Zero(n + 1), r.rhs, r.relaxable};
    row.coeffs.head(n) = r.coeffs;
    if (r.relaxable) row.coeffs[n] = -1.0;
    slack_cap += std::abs(r.rhs) + r.coeffs.cwiseAbs().sum();
    out.linear_rows.push_back(std::move(row));
  }
  for (const auto& r : prog.cone_rows) {
    ConeRow row{r.gain, r.std_coeffs, Eigen::VectorXd::Zero(n + 1), r.rhs, r.relaxable};
    row.coeffs.head(n) = r.coeffs;
    if (r.relaxable) row.coeffs[n] = -1.0;
    slack_cap += std::abs(r.rhs) + r.coeffs.cwiseAbs().sum() + r.gain * r.std_coeffs.cwiseAbs().sum();
    out.cone_rows.push_back(std::move(row));
  }
  // A finite cap keeps the barrier path bounded; it never binds for sensible programs.
  const double box = [&] {
    double m = 1.0;
    for (int j = 0; j < n; ++j) {
      if (std::isfinite(prog.lower[j])) m = std::max(m, std::abs(prog.lower[j]));
      if (std::isfinite(prog.upper[j])) m = std::max(m, std::abs(prog.upper[j]));
    }
    return m;
  }();
  out.upper[n] = slack_cap * (1.0 + box);
  return out;
}

// ---------------------------------------------------------------------------
// Tableau simplex.

enum class LpOutcome { optimal, infeasible, unbounded };

struct Tableau {
  Eigen::MatrixXd t;             // rows x (cols + 1), last column is the rhs
  std::vector<int> basis;        // basic column per row
  Eigen::VectorXd reduced;       // cols + 1, last entry is -objective
  std::vector<bool> blocked;     // columns barred from entering

  int cols() const { return static_cast<int>(t.cols()) - 1; }
  int rows() const { return static_cast<int>(t.rows()); }

  void pivot(int r, int c) {
    const double p = t(r, c);
    t.row(r) /= p;
    for (int i = 0; i < rows(); ++i) {
      if (i == r) continue;
      const double f = t(i, c);
      if (f != 0.0) t.row(i) -= f * t.row(r);
    }
    const double f = reduced[c];
    if (f != 0.0) reduced -= f * t.row(r).transpose();
    basis[static_cast<std::size_t>(r)] = c;
  }

  void price(const Eigen::VectorXd& cost) {
    reduced.setZero(cols() + 1);
    reduced.head(cols()) = cost;
    for (int i = 0; i < rows(); ++i) {
      const double cb = cost[basis[static_cast<std::size_t>(i)]];
      if (cb != 0.0) reduced -= cb * t.row(i).transpose();
    }
  }

  // Bland's rule: lowest-index improving column, lowest-index basic variable on ties.
  LpOutcome run(const SolverSettings& s) {
    for (int it = 0; it < s.max_pivots; ++it) {
      int enter = -1;
      for (int j = 0; j < cols(); ++j) {
        if (!blocked[static_cast<std::size_t>(j)] && reduced[j] < -s.reduced_cost_tol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return LpOutcome::optimal;
      int leave = -1;
      double best = kInf;
      for (int i = 0; i < rows(); ++i) {
        const double a = t(i, enter);
        if (a <= s.pivot_tol) continue;
        const double ratio = t(i, cols()) / a;
        const auto bi = basis[static_cast<std::size_t>(i)];
        if (leave < 0 || ratio < best - 1e-14) {
          best = ratio;
          leave = i;
        } else if (ratio <= best + 1e-14 && bi < basis[static_cast<std::size_t>(leave)]) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      if (leave < 0) return LpOutcome::unbounded;
      pivot(leave, enter);
    }
    throw std::runtime_error("simplex: pivot limit exceeded");
  }
};

struct VarMap {
  enum Kind { shifted, mirrored, split } kind;
  int col;
  double offset;
};

}  // namespace detail

/// Dense two-phase primal simplex for programs without cone rows.
inline SolveReport solve_lp(const ConicProgram& program, const SolverSettings& settings = {}) {
  detail::check_dimensions(program);
  if (!program.cone_rows.empty()) throw std::invalid_argument("solve_lp: program has cone rows");

  const ConicProgram prog =
      settings.enable_relaxation
          ? detail::with_relaxation(program, settings.relaxation_weight *
                                                 std::max(1.0, program.objective.cwiseAbs().maxCoeff()))
          : program;
  const int n = prog.num_vars();

  // Map x onto non-negative columns y.
  std::vector<detail::VarMap> map;
  int ny = 0;
  std::vector<std::pair<int, double>> upper_rows;  // (col, width)
  for (int j = 0; j < n; ++j) {
    const double lo = prog.lower[j], hi = prog.upper[j];
    if (std::isfinite(lo)) {
      map.push_back({detail::VarMap::shifted, ny, lo});
      if (std::isfinite(hi)) upper_rows.emplace_back(ny, hi - lo);
      ny += 1;
    } else if (std::isfinite(hi)) {
      map.push_back({detail::VarMap::mirrored, ny, hi});
      ny += 1;
    } else {
      map.push_back({detail::VarMap::split, ny, 0.0});
      ny += 2;
    }
  }

  const int m = static_cast<int>(prog.linear_rows.size() + upper_rows.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, ny);
  Eigen::VectorXd b(m);
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(ny);

  auto place = [&](int j, double coef, auto&& put) {
    const auto& vm = map[static_cast<std::size_t>(j)];
    switch (vm.kind) {
      case detail::VarMap::shifted: put(vm.col, coef); return coef * vm.offset;
      case detail::VarMap::mirrored: put(vm.col, -coef); return coef * vm.offset;
      case detail::VarMap::split: put(vm.col, coef); put(vm.col + 1, -coef); return 0.0;
    }
    return 0.0;
  };

  for (int j = 0; j < n; ++j)
    place(j, prog.objective[j], [&](int c, double v) { cost[c] += v; });

  int r = 0;
  for (const auto& row : prog.linear_rows) {
    double shift = 0.0;
    for (int j = 0; j < n; ++j)
      if (row.coeffs[j] != 0.0) shift += place(j, row.coeffs[j], [&](int c, double v) { a(r, c) += v; });
    b[r] = row.rhs - shift;
    ++r;
  }
  for (auto [col, width] : upper_rows) {
    a(r, col) = 1.0;
    b[r] = width;
    ++r;
  }

  // Columns: y (ny), slacks (m), artificials (one per negative rhs row).
  std::vector<int> art_rows;
  for (int i = 0; i < m; ++i)
    if (b[i] < 0.0) art_rows.push_back(i);
  const int na = static_cast<int>(art_rows.size());
  const int cols = ny + m + na;

  detail::Tableau tab;
  tab.t = Eigen::MatrixXd::Zero(m, cols + 1);
  tab.basis.assign(static_cast<std::size_t>(m), -1);
  tab.blocked.assign(static_cast<std::size_t>(cols), false);
  for (int i = 0; i < m; ++i) {
    const double sign = b[i] < 0.0 ? -1.0 : 1.0;
    tab.t.row(i).head(ny) = sign * a.row(i);
    tab.t(i, ny + i) = sign;
    tab.t(i, cols) = sign * b[i];
    tab.basis[static_cast<std::size_t>(i)] = ny + i;
  }
  for (int k = 0; k < na; ++k) {
    const int i = art_rows[static_cast<std::size_t>(k)];
    tab.t(i, ny + m + k) = 1.0;
    tab.basis[static_cast<std::size_t>(i)] = ny + m + k;
  }

  SolveReport report;
  if (na > 0) {
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(cols);
    phase1.tail(na).setOnes();
    tab.price(phase1);
    tab.run(settings);
    const double infeas = -tab.reduced[cols];
    if (infeas > settings.linear_feasibility_tol) {
      report.status = SolveStatus::infeasible;
      report.x = Eigen::VectorXd::Zero(program.num_vars());
      return report;
    }
    // Drive zero-level artificials out of the basis where possible.
    for (int i = 0; i < m; ++i) {
      if (tab.basis[static_cast<std::size_t>(i)] < ny + m) continue;
      for (int j = 0; j < ny + m; ++j) {
        if (std::abs(tab.t(i, j)) > 1e-9) {
          tab.pivot(i, j);
          break;
        }
      }
    }
    for (int j = ny + m; j < cols; ++j) tab.blocked[static_cast<std::size_t>(j)] = true;
  }

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(cols);
  phase2.head(ny) = cost;
  tab.price(phase2);
  if (tab.run(settings) == detail::LpOutcome::unbounded)
    throw std::domain_error("solve_lp: objective unbounded below");

  Eigen::VectorXd y = Eigen::VectorXd::Zero(cols);
  for (int i = 0; i < m; ++i) y[tab.basis[static_cast<std::size_t>(i)]] = tab.t(i, cols);
  Eigen::VectorXd x(n);
  for (int j = 0; j < n; ++j) {
    const auto& vm = map[static_cast<std::size_t>(j)];
    switch (vm.kind) {
      case detail::VarMap::shifted: x[j] = vm.offset + y[vm.col]; break;
      case detail::VarMap::mirrored: x[j] = vm.offset - y[vm.col]; break;
      case detail::VarMap::split: x[j] = y[vm.col] - y[vm.col + 1]; break;
    }
  }

  const int n0 = program.num_vars();
  report.x = x.head(n0);
  report.objective = program.objective.dot(report.x);
  report.slack_used = settings.enable_relaxation ? std::max(0.0, x[n0]) : 0.0;
  const auto viol = detail::measure_violation(program, report.x);
  report.max_violation = std::max({viol.linear, viol.cone, viol.relaxable, 0.0});
  report.status = report.slack_used > settings.relaxation_threshold ? SolveStatus::relaxed
                                                                      : SolveStatus::optimal;
  return report;
}

namespace detail {

// t(x) = h - g.x  must satisfy  t >= ||Y x||  (Y empty for linear rows).
struct BarrierRow {
  Eigen::VectorXd g;
  double h = 0.0;
  Eigen::MatrixXd y;  // k x n, k == 0 for linear rows
  bool cone() const { return y.rows() > 0; }
};

struct BarrierProblem {
  Eigen::VectorXd c;
  std::vector<BarrierRow> rows;
  double degree() const {
    double d = 0.0;
    for (const auto& r : rows) d += r.cone() ? 2.0 : 1.0;
    return d;
  }
};

inline bool strictly_inside(const BarrierProblem& bp, const Eigen::VectorXd& x) {
  for (const auto& r : bp.rows) {
    const double t = r.h - r.g.dot(x);
    if (!(t > 0.0)) return false;
    if (r.cone() && !(t * t - (r.y * x).squaredNorm() > 0.0)) return false;
  }
  return true;
}

inline double barrier_value(const BarrierProblem& bp, const Eigen::VectorXd& x, double scale) {
  double v = scale * bp.c.dot(x);
  for (const auto& r : bp.rows) {
    const double t = r.h - r.g.dot(x);
    v -= r.cone() ? std::log(t * t - (r.y * x).squaredNorm()) : std::log(t);
  }
  return v;
}

inline void barrier_derivatives(const BarrierProblem& bp, const Eigen::VectorXd& x, double scale,
                                Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
  const auto n = x.size();
  grad = scale * bp.c;
  hess.setZero(n, n);
  for (const auto& r : bp.rows) {
    const double t = r.h - r.g.dot(x);
    if (!r.cone()) {
      grad += r.g / t;
      hess.noalias() += (r.g * r.g.transpose()) / (t * t);
      continue;
    }
    const Eigen::VectorXd yv = r.y * x;
    const double s = t * t - yv.squaredNorm();
    const Eigen::VectorXd q = t * r.g + r.y.transpose() * yv;
    grad += 2.0 * q / s;
    hess.noalias() += (2.0 / s) * (r.y.transpose() * r.y - r.g * r.g.transpose());
    hess.noalias() += (4.0 / (s * s)) * (q * q.transpose());
  }
}

template <class Stop>
Eigen::VectorXd path_follow(const BarrierProblem& bp, Eigen::VectorXd x, const SolverSettings& s,
                            Stop&& stop_early) {
  const double degree = std::max(1.0, bp.degree());
  double scale = 1.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  while (true) {
    for (int it = 0; it < s.max_newton_iters; ++it) {
      barrier_derivatives(bp, x, scale, grad, hess);
      const double reg = 1e-14 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
      hess.diagonal().array() += reg;
      const Eigen::VectorXd step = hess.ldlt().solve(-grad);
      const double decrement = -grad.dot(step);
      if (!(decrement > 2.0 * s.newton_tol)) break;
      const double f0 = barrier_value(bp, x, scale);
      double alpha = 1.0;
      Eigen::VectorXd cand = x + step;
      int shrink = 0;
      while (shrink < 60 && (!strictly_inside(bp, cand) ||
                             barrier_value(bp, cand, scale) >
                                 f0 - 0.25 * alpha * decrement + 1e-13 * std::abs(f0))) {
        alpha *= 0.5;
        cand = x + alpha * step;
        ++shrink;
      }
      if (shrink == 60) break;
      x = cand;
      if (x.cwiseAbs().maxCoeff() > 1e12) throw std::domain_error("conic: objective unbounded below");
      if (stop_early(x)) return x;
    }
    if (degree / scale < s.barrier_gap) break;
    scale *= 10.0;
  }
  return x;
}

inline BarrierProblem to_barrier(const ConicProgram& prog) {
  const int n = prog.num_vars();
  BarrierProblem bp;
  bp.c = prog.objective;
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(prog.lower[j])) {
      BarrierRow r{Eigen::VectorXd::Zero(n), -prog.lower[j], {}};
      r.g[j] = -1.0;
      bp.rows.push_back(std::move(r));
    }
    if (std::isfinite(prog.upper[j])) {
      BarrierRow r{Eigen::VectorXd::Zero(n), prog.upper[j], {}};
      r.g[j] = 1.0;
      bp.rows.push_back(std::move(r));
    }
  }
  for (const auto& row : prog.linear_rows) bp.rows.push_back({row.coeffs, row.rhs, {}});
  for (const auto& row : prog.cone_rows) {
    std::vector<int> active;
    for (std::size_t k = 0; k < prog.std_block.size(); ++k)
      if (row.gain * row.std_coeffs[static_cast<Eigen::Index>(k)] != 0.0) active.push_back(static_cast<int>(k));
    BarrierRow r{row.coeffs, row.rhs, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(active.size()), n)};
    for (std::size_t i = 0; i < active.size(); ++i) {
      const auto k = static_cast<std::size_t>(active[i]);
      r.y(static_cast<Eigen::Index>(i), prog.std_block[k]) =
          row.gain * row.std_coeffs[static_cast<Eigen::Index>(k)];
    }
    bp.rows.push_back(std::move(r));
  }
  return bp;
}

}  // namespace detail

/// Log-barrier interior-point solver for linear objective with linear and SOC rows.
inline SolveReport solve_socp(const ConicProgram& program, const SolverSettings& settings = {}) {
  detail::check_dimensions(program);
  const ConicProgram prog =
      settings.enable_relaxation
          ? detail::with_relaxation(program, settings.relaxation_weight *
                                                 std::max(1.0, program.objective.cwiseAbs().maxCoeff()))
          : program;
  const int n = prog.num_vars();
  for (int j = 0; j < n; ++j)
    if (!(prog.lower[j] < prog.upper[j]))
      throw std::invalid_argument("solve_socp: fixed variables are not supported");

  const detail::BarrierProblem bp = detail::to_barrier(prog);

  Eigen::VectorXd x0(n);
  for (int j = 0; j < n; ++j) {
    const double lo = prog.lower[j], hi = prog.upper[j];
    if (std::isfinite(lo) && std::isfinite(hi)) x0[j] = 0.5 * (lo + hi);
    else if (std::isfinite(lo)) x0[j] = lo + 1.0;
    else if (std::isfinite(hi)) x0[j] = hi - 1.0;
    else x0[j] = 0.0;
  }
  // Relaxation slack starts high enough to make every relaxable row strictly feasible.
  if (settings.enable_relaxation) {
    double need = 0.0;
    for (const auto& r : prog.linear_rows)
      if (r.relaxable) need = std::max(need, r.coeffs.head(n - 1).dot(x0.head(n - 1)) - r.rhs);
    for (const auto& r : prog.cone_rows)
      if (r.relaxable)
        need = std::max(need, detail::cone_norm(prog, r, x0) +
                                  r.coeffs.head(n - 1).dot(x0.head(n - 1)) - r.rhs);
    x0[n - 1] = std::min(need + 1.0, 0.5 * (need + 1.0 + prog.upper[n - 1]));
  }

  SolveReport report;
  report.x = Eigen::VectorXd::Zero(program.num_vars());

  if (!detail::strictly_inside(bp, x0)) {
    // Phase I: minimize z subject to every non-bound row relaxed by z, z >= -1.
    const int nb = static_cast<int>(bp.rows.size() - prog.linear_rows.size() - prog.cone_rows.size());
    detail::BarrierProblem p1;
    p1.c = Eigen::VectorXd::Zero(n + 1);
    p1.c[n] = 1.0;
    double z0 = 0.0;
    for (std::size_t i = 0; i < bp.rows.size(); ++i) {
      const auto& r = bp.rows[i];
      detail::BarrierRow q{Eigen::VectorXd::Zero(n + 1), r.h, Eigen::MatrixXd::Zero(r.y.rows(), n + 1)};
      q.g.head(n) = r.g;
      if (r.cone()) q.y.leftCols(n) = r.y;
      if (static_cast<int>(i) >= nb) {
        q.g[n] = -1.0;
        const double t = r.h - r.g.dot(x0);
        const double need = r.cone() ? (r.y * x0).norm() - t : -t;
        z0 = std::max(z0, need);
      }
      p1.rows.push_back(std::move(q));
    }
    detail::BarrierRow zfloor{Eigen::VectorXd::Zero(n + 1), 1.0, {}};
    zfloor.g[n] = -1.0;
    p1.rows.push_back(std::move(zfloor));
    Eigen::VectorXd xz(n + 1);
    xz << x0, z0 + 1.0;
    SolverSettings s1 = settings;
    s1.barrier_gap = 1e-12;
    xz = detail::path_follow(p1, xz, s1, [&](const Eigen::VectorXd& v) { return v[n] < -1e-3; });
    if (!(xz[n] < 0.0) || !detail::strictly_inside(bp, xz.head(n))) {
      report.status = SolveStatus::infeasible;
      return report;
    }
    x0 = xz.head(n);
  }

  const Eigen::VectorXd x = detail::path_follow(bp, x0, settings, [](const Eigen::VectorXd&) { return false; });

  const int n0 = program.num_vars();
  report.x = x.head(n0);
  report.objective = program.objective.dot(report.x);
  report.slack_used = settings.enable_relaxation ? std::max(0.0, x[n0]) : 0.0;
  const auto viol = detail::measure_violation(program, report.x);
  report.max_violation = std::max({viol.linear, viol.cone, viol.relaxable, 0.0});
  report.status = report.slack_used > settings.relaxation_threshold ? SolveStatus::relaxed
                                                                      : SolveStatus::optimal;
  return report;
}

/// True when each cone row touches at most one standard-deviation coordinate, in which
/// case gain * |c_k| * s_k is linear for s_k >= 0.
inline bool cone_rows_are_linear(const ConicProgram& prog) {
  for (const auto& r : prog.cone_rows) {
    int nz = 0;
    for (Eigen::Index k = 0; k < r.std_coeffs.size(); ++k) nz += (r.std_coeffs[k] != 0.0 && r.gain != 0.0);
    if (nz > 1) return false;
  }
  for (std::size_t k = 0; k < prog.std_block.size(); ++k)
    if (prog.lower[prog.std_block[k]] < 0.0) return false;
  return true;
}

/// Rewrites single-coordinate cone rows as linear rows; requires cone_rows_are_linear().
inline ConicProgram linearize_cone_rows(const ConicProgram& prog) {
  ConicProgram out = prog;
  out.cone_rows.clear();
  for (const auto& r : prog.cone_rows) {
    LinearRow row{r.coeffs, r.rhs, r.relaxable};
    for (std::size_t k = 0; k < prog.std_block.size(); ++k)
      row.coeffs[prog.std_block[k]] += r.gain * std::abs(r.std_coeffs[static_cast<Eigen::Index>(k)]);
    out.linear_rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace mppi_orca
