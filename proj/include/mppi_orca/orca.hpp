#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace mppi_orca {

/// Truncated velocity obstacle of a neighbor at rel_pos (neighbor minus ego) in relative
/// velocity space: { v : exists t in [0, tau] with t v in D(rel_pos, combined_radius) }.
struct VOGeometry {
  Eigen::Vector2d rel_pos = Eigen::Vector2d::Zero();
  double combined_radius = 0.0;
  double tau = 1.0;
};

/// Velocity half-plane a vx + b vy + c <= 0 with |(a, b)| = 1.
struct HalfPlane {
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;

  Eigen::Vector2d normal() const { return {a, b}; }
  double value(const Eigen::Vector2d& v) const { return a * v.x() + b * v.y() + c; }
  bool contains(const Eigen::Vector2d& v, double tol = 0.0) const { return value(v) <= tol; }
};

/// Change u to the nearest VO boundary point and outward normal n there.
struct BoundaryPoint {
  Eigen::Vector2d u = Eigen::Vector2d::Zero();
  Eigen::Vector2d n = Eigen::Vector2d::UnitX();
};

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

inline bool vo_contains(const VOGeometry& geom, const Eigen::Vector2d& v_rel) {
  const Eigen::Vector2d& p = geom.rel_pos;
  const double r2 = geom.combined_radius * geom.combined_radius;
  const double vv = v_rel.squaredNorm();
  double t = 0.0;
  if (vv > 0.0) t = std::clamp(v_rel.dot(p) / vv, 0.0, geom.tau);
  return (t * v_rel - p).squaredNorm() < r2;
}

/// Nearest point of the VO boundary to v_rel. Empty when the discs overlap, since the
/// cone is then undefined.
inline std::optional<BoundaryPoint> nearest_boundary(const VOGeometry& geom,
                                                     const Eigen::Vector2d& v_rel) {
  if (!(geom.tau > 0.0)) throw std::invalid_argument("nearest_boundary: tau must be positive");
  const Eigen::Vector2d& p = geom.rel_pos;
  const double r = geom.combined_radius;
  const double dist2 = p.squaredNorm();
  if (dist2 <= r * r) return std::nullopt;

  const double inv_tau = 1.0 / geom.tau;
  const Eigen::Vector2d w = v_rel - inv_tau * p;
  const double w2 = w.squaredNorm();
  const double dot1 = w.dot(p);

  BoundaryPoint out;
  if (dot1 < 0.0 && dot1 * dot1 > r * r * w2) {
    // Closest to the truncation arc.
    const double wl = std::sqrt(w2);
    const Eigen::Vector2d unit_w = w / wl;
    out.u = (r * inv_tau - wl) * unit_w;
    out.n = unit_w;
    return out;
  }

  // Closest to one of the two legs.
  const double leg = std::sqrt(dist2 - r * r);
  Eigen::Vector2d dir;
  if (cross2(p, w) > 0.0) {
    dir = Eigen::Vector2d(p.x() * leg - p.y() * r, p.x() * r + p.y() * leg) / dist2;
  } else {
    dir = Eigen::Vector2d(p.x() * leg + p.y() * r, -p.x() * r + p.y() * leg) / dist2;
  }
  out.u = v_rel.dot(dir) * dir - v_rel;
  Eigen::Vector2d n(-dir.y(), dir.x());
  if (n.dot(p) > 0.0) n = -n;
  out.n = n;
  return out;
}

struct OrcaInput {
  Eigen::Vector2d p_i = Eigen::Vector2d::Zero();
  double r_i = 0.0;
  Eigen::Vector2d obs_pos = Eigen::Vector2d::Zero();
  double r_j = 0.0;
  double r_o = 0.0;
  Eigen::Vector2d v_opt_i = Eigen::Vector2d::Zero();
  Eigen::Vector2d v_opt_j = Eigen::Vector2d::Zero();
  double tau = 5.0;
  double alpha_resp = 0.5;
  double dt = 0.1;  // only used when the inflated discs already overlap
};

struct OrcaConstraint {
  HalfPlane plane;
  bool degenerate = false;
};

inline HalfPlane make_halfplane(const Eigen::Vector2d& point, const Eigen::Vector2d& n) {
  // (v - point) . n >= 0  <=>  -n . v + n . point <= 0
  const Eigen::Vector2d unit = n.normalized();
  return {-unit.x(), -unit.y(), unit.dot(point)};
}

/// ORCA half-plane against one neighbor with the radius inflated by the observation buffer r_o.
inline OrcaConstraint orca_constraint(const OrcaInput& in) {
  if (!(in.alpha_resp >= 0.5 && in.alpha_resp <= 1.0))
    throw std::invalid_argument("orca: alpha_resp must lie in [0.5, 1]");
  if (!(in.tau > 0.0)) throw std::invalid_argument("orca: tau must be positive");

  VOGeometry geom{in.obs_pos - in.p_i, in.r_i + in.r_j + in.r_o, in.tau};
  const Eigen::Vector2d v_rel = in.v_opt_i - in.v_opt_j;

  if (auto bp = nearest_boundary(geom, v_rel)) {
    return {make_halfplane(in.v_opt_i + in.alpha_resp * bp->u, bp->n), false};
  }

  // Overlap: push apart along the neighbor-to-ego line so the penetration closes within dt.
  const double dist = geom.rel_pos.norm();
  const Eigen::Vector2d n = dist > 1e-12 ? Eigen::Vector2d(-geom.rel_pos / dist)
                                         : Eigen::Vector2d::UnitX();
  const double penetration = geom.combined_radius - dist;
  const double needed = penetration / in.dt - v_rel.dot(n);
  const Eigen::Vector2d u = needed * n;
  return {make_halfplane(in.v_opt_i + in.alpha_resp * u, n), true};
}

inline HalfPlane orca_halfplane(const OrcaInput& in) { return orca_constraint(in).plane; }

}  // namespace mppi_orca
