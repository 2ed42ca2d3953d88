#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Cholesky>

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mppi_orca {

/// Gaussian noise on observed neighbor position and velocity.
struct ObservationNoise {
  Eigen::Matrix2d sigma_p = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d sigma_v = Eigen::Matrix2d::Zero();
};

struct Observation {
  Eigen::Vector2d pos_hat = Eigen::Vector2d::Zero();
  Eigen::Vector2d vel_hat = Eigen::Vector2d::Zero();
  int neighbor_id = -1;
  int time_step = 0;
};

/// Constant-velocity Kalman track, mean = (px, py, vx, vy).
struct NeighborTrack {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d cov = Eigen::Matrix4d::Identity();
  int neighbor_id = -1;
  int last_update = 0;
};

/// Predicted neighbor position some steps ahead.
struct NeighborPrediction {
  Eigen::Vector2d pos = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
};

struct TrackingConfig {
  double process_noise = 0.5;  // white-acceleration PSD, (m/s^2)^2
  double init_cov_scale = 2.0;
};

namespace detail {

template <class Derived>
void require_psd(const Eigen::MatrixBase<Derived>& m, const char* what) {
  constexpr double tol = 1e-9;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > tol * scale) {
    std::ostringstream os;
    os << what << ": covariance not symmetric (max asymmetry " << asym << ")";
    throw std::invalid_argument(os.str());
  }
  using Mat = Eigen::Matrix<double, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>;
  Eigen::SelfAdjointEigenSolver<Mat> es(Mat(m), Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < -tol * scale) {
    std::ostringstream os;
    os << what << ": covariance not positive semi-definite (min eigenvalue " << min_eig << ")";
    throw std::invalid_argument(os.str());
  }
}

inline Eigen::Matrix4d cv_transition(double dt) {
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 2) = dt;
  f(1, 3) = dt;
  return f;
}

inline Eigen::Matrix4d cv_process_noise(double dt, double q) {
  Eigen::Matrix4d qm = Eigen::Matrix4d::Zero();
  const double a = q * dt * dt * dt / 3.0;
  const double b = q * dt * dt / 2.0;
  const double c = q * dt;
  qm(0, 0) = qm(1, 1) = a;
  qm(0, 2) = qm(2, 0) = qm(1, 3) = qm(3, 1) = b;
  qm(2, 2) = qm(3, 3) = c;
  return qm;
}

}  // namespace detail

/// Samples a noisy observation of a neighbor; position and velocity draws are independent.
template <class Gen>
Observation observe(const Eigen::Vector2d& true_pos, const Eigen::Vector2d& true_vel,
                    const ObservationNoise& noise, Gen& rng, int neighbor_id = -1,
                    int time_step = 0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](const Eigen::Matrix2d& cov) {
    // LDLT tolerates singular (e.g. zero) covariances.
    Eigen::LDLT<Eigen::Matrix2d> ldlt(cov);
    Eigen::Vector2d z(normal(rng), normal(rng));
    Eigen::Vector2d d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
    Eigen::Vector2d y = ldlt.matrixL() * d.cwiseProduct(z).eval();
    return (ldlt.transpositionsP().transpose() * y).eval();
  };
  Observation obs;
  obs.pos_hat = true_pos + draw(noise.sigma_p);
  obs.vel_hat = true_vel + draw(noise.sigma_v);
  obs.neighbor_id = neighbor_id;
  obs.time_step = time_step;
  return obs;
}

/// Starts a track at the first observation with covariance scale * blkdiag(sigma_p, sigma_v).
inline NeighborTrack init_track(const Observation& obs, const ObservationNoise& noise,
                                double init_cov_scale) {
  NeighborTrack t;
  t.mean << obs.pos_hat, obs.vel_hat;
  t.cov.setZero();
  t.cov.topLeftCorner<2, 2>() = init_cov_scale * noise.sigma_p;
  t.cov.bottomRightCorner<2, 2>() = init_cov_scale * noise.sigma_v;
  t.neighbor_id = obs.neighbor_id;
  t.last_update = obs.time_step;
  return t;
}

/// Constant-velocity prediction over one interval (used alone for missed observations).
inline NeighborTrack kalman_predict(const NeighborTrack& track, double dt, double process_noise) {
  if (!(dt > 0.0)) throw std::invalid_argument("kalman_predict: dt must be positive");
  detail::require_psd(track.cov, "kalman_predict: track covariance");
  const Eigen::Matrix4d f = detail::cv_transition(dt);
  NeighborTrack out = track;
  out.mean = f * track.mean;
  out.cov = f * track.cov * f.transpose() + detail::cv_process_noise(dt, process_noise);
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

/// Predict-then-correct update; both position and velocity are measured directly.
inline NeighborTrack kalman_update(const NeighborTrack& track, const Observation& obs, double dt,
                                   double process_noise, const ObservationNoise& noise) {
  if (obs.neighbor_id != track.neighbor_id)
    throw std::invalid_argument("kalman_update: observation is for a different neighbor");
  detail::require_psd(noise.sigma_p, "kalman_update: sigma_p");
  detail::require_psd(noise.sigma_v, "kalman_update: sigma_v");

  NeighborTrack pred = kalman_predict(track, dt, process_noise);

  Eigen::Matrix4d r = Eigen::Matrix4d::Zero();
  r.topLeftCorner<2, 2>() = noise.sigma_p;
  r.bottomRightCorner<2, 2>() = noise.sigma_v;

  Eigen::Vector4d z;
  z << obs.pos_hat, obs.vel_hat;
  const Eigen::Matrix4d s = pred.cov + r;
  // K = P S^-1; solve on the transposed system since S and P are symmetric.
  const Eigen::Matrix4d gain = s.ldlt().solve(pred.cov).transpose();
  const Eigen::Matrix4d i_k = Eigen::Matrix4d::Identity() - gain;

  NeighborTrack out = pred;
  out.mean = pred.mean + gain * (z - pred.mean);
  out.cov = i_k * pred.cov * i_k.transpose() + gain * r * gain.transpose();  // Joseph form
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  out.last_update = obs.time_step;
  return out;
}

/// Constant-velocity extrapolation; element t-1 is t steps ahead.
inline std::vector<NeighborPrediction> predict_track(const NeighborTrack& track, int horizon_steps,
                                                     double dt, double process_noise) {
  if (horizon_steps < 1) throw std::invalid_argument("predict_track: horizon_steps must be >= 1");
  std::vector<NeighborPrediction> out;
  out.reserve(static_cast<std::size_t>(horizon_steps));
  NeighborTrack cur = track;
  const Eigen::Matrix4d f = detail::cv_transition(dt);
  const Eigen::Matrix4d qm = detail::cv_process_noise(dt, process_noise);
  for (int t = 0; t < horizon_steps; ++t) {
    cur.mean = f * cur.mean;
    cur.cov = f * cur.cov * f.transpose() + qm;
    out.push_back({cur.mean.head<2>(), cur.cov.topLeftCorner<2, 2>()});
  }
  return out;
}

/// Inverse CDF of the chi-square distribution with two degrees of freedom.
inline double chi2_2dof_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("chi2 quantile: probability must be in (0,1)");
  return -2.0 * std::log1p(-p);
}

inline double max_eigenvalue(const Eigen::Matrix2d& cov) {
  const double a = cov(0, 0), d = cov(1, 1), b = 0.5 * (cov(0, 1) + cov(1, 0));
  const double mid = 0.5 * (a + d);
  const double rad = std::sqrt(0.25 * (a - d) * (a - d) + b * b);
  return mid + rad;
}

/// Radius of the disk holding a 2-D Gaussian sample with probability >= delta.
inline double uncertainty_radius(const Eigen::Matrix2d& cov, double delta) {
  if (!(delta > 0.0 && delta < 1.0))
    throw std::invalid_argument("uncertainty_radius: delta must be in (0,1)");
  return std::sqrt(std::max(0.0, max_eigenvalue(cov)) * chi2_2dof_quantile(delta));
}

}  // namespace mppi_orca
