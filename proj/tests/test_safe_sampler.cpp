#include "mppi_orca/dynamics.hpp"
#include "mppi_orca/rng.hpp"
#include "mppi_orca/safe_sampler.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace mppi_orca;
using Catch::Approx;

namespace {

// Bisection on the erfc-based CDF, independent of the rational approximation.
double quantile_by_bisection(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("normal quantile") {
  CHECK(normal_quantile(0.5) == Approx(0.0).margin(1e-12));
  CHECK(normal_quantile(0.999) == Approx(3.0902).margin(1e-4));
  for (double p : {1e-6, 0.01, 0.02425, 0.1, 0.3, 0.9, 0.97575, 0.99, 0.999, 0.9975, 1 - 1e-9}) {
    CHECK(normal_quantile(p) == Approx(quantile_by_bisection(p)).margin(1e-6));
  }
  for (double p : {0.9, 0.99, 0.999, 0.9975}) CHECK(normal_cdf(normal_quantile(p)) == Approx(p).margin(1e-6));
  CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
  CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
}

TEST_CASE("to_control_space for the differential drive") {
  const DiffDriveModel model;
  const HalfPlane hp{0.6, 0.8, -0.3};
  const AgentState x{1.0, 2.0, 0.0};
  const auto cs = to_control_space(hp, model.drift(x), model.actuation(x), x.position(), model.dt);
  REQUIRE(cs);
  CHECK(cs->a_prime[0] == Approx(0.6));
  CHECK(cs->a_prime[1] == Approx(0.0).margin(1e-15));
  CHECK(cs->b_prime == Approx(0.3));

  // Heading along (0.6, 0.8) makes the forward speed carry the full normal.
  const AgentState y{1.0, 2.0, std::atan2(0.8, 0.6)};
  const auto cy = to_control_space(hp, model.drift(y), model.actuation(y), y.position(), model.dt);
  REQUIRE(cy);
  CHECK(cy->a_prime[0] == Approx(1.0));

  // Heading perpendicular to the normal: the row no longer depends on the control.
  const AgentState z{1.0, 2.0, std::atan2(0.6, -0.8)};
  CHECK_FALSE(to_control_space(hp, model.drift(z), model.actuation(z), z.position(), model.dt));
}

TEST_CASE("to_control_space for a single integrator") {
  const double dt = 0.1;
  const HalfPlane hp{0.0, -1.0, 0.4};
  const Eigen::Vector2d p(3, -1);
  const Eigen::Matrix2d g = dt * Eigen::Matrix2d::Identity();
  const auto cs = to_control_space(hp, p, g, p, dt);
  REQUIRE(cs);
  CHECK(cs->a_prime.isApprox(Eigen::Vector2d(0.0, -1.0)));
  CHECK(cs->b_prime == Approx(-0.4));

  // Translation invariance.
  const Eigen::Vector2d shift(10, -7);
  const auto moved = to_control_space(hp, Eigen::Vector2d(p + shift), g, Eigen::Vector2d(p + shift), dt);
  REQUIRE(moved);
  CHECK(moved->a_prime.isApprox(cs->a_prime));
  CHECK(moved->b_prime == Approx(cs->b_prime));
}

TEST_CASE("control-space rows reproduce the velocity half-plane") {
  // For any control, a' . u <= b' iff the resulting velocity satisfies the half-plane.
  const DiffDriveModel model;
  auto rng = make_stream(43, {43});
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double ang = 3.0 * u(rng);
    const HalfPlane hp{std::cos(ang), std::sin(ang), 0.5 * u(rng)};
    const AgentState x{5 * u(rng), 5 * u(rng), 3 * u(rng)};
    const auto cs = to_control_space(hp, model.drift(x), model.actuation(x), x.position(), model.dt);
    if (!cs) continue;
    const Eigen::Vector2d nu(u(rng), 2 * u(rng));
    const Eigen::Vector2d vel = (model.step(x, nu).position() - x.position()) / model.dt;
    CHECK(cs->a_prime.dot(nu) - cs->b_prime == Approx(hp.value(vel)).margin(1e-12));
  }
}

TEST_CASE("execution tightening") {
  const Eigen::VectorXd a = Eigen::Vector2d(0.8, 0.0);
  CHECK(tighten_for_execution(a, 1.0, Eigen::Vector2d(0.1, 0.2), 0.999).b_double_prime ==
        Approx(0.7528).margin(1e-4));
  CHECK(tighten_for_execution(a, 1.0, Eigen::Vector2d::Zero(), 0.999).b_double_prime == 1.0);
  double prev = 2.0;
  for (double d : {0.6, 0.9, 0.99, 0.999}) {
    const double b = tighten_for_execution(a, 1.0, Eigen::Vector2d(0.1, 0.2), d).b_double_prime;
    CHECK(b < prev);
    prev = b;
  }
}

TEST_CASE("adjust_distribution keeps a feasible nominal") {
  const ControlDistribution nominal{Eigen::Vector2d(0.2, 0.1), Eigen::Vector2d(0.14, 0.28)};
  const Eigen::Vector2d lo(-1, -2), hi(1, 2);
  const auto empty = adjust_distribution(nominal, {}, lo, hi, 0.999);
  CHECK(empty.report.status == SolveStatus::optimal);
  CHECK(empty.report.objective == Approx(0.0).margin(1e-9));
  CHECK(empty.distribution.mean.isApprox(nominal.mean, 1e-9));
  CHECK(empty.distribution.stddev.isApprox(nominal.stddev, 1e-9));

  // Slack of exactly z * |a o s| plus a margin.
  const double z = normal_quantile(0.999);
  const TightenedConstraint c{Eigen::Vector2d(1.0, 0.0), 0.2 + z * 0.14 + 0.05};
  const auto loose = adjust_distribution(nominal, {c}, lo, hi, 0.999);
  CHECK(loose.report.objective == Approx(0.0).margin(1e-9));
  const auto& d = loose.distribution;
  CHECK(c.a_prime.dot(d.mean) + z * c.a_prime.cwiseProduct(d.stddev).norm() <= c.b_double_prime + 1e-9);
}

TEST_CASE("adjust_distribution tight case against the grid oracle") {
  const ControlDistribution nominal{Eigen::Vector2d(0.9, 0.0), Eigen::Vector2d(0.1, 0.2)};
  const Eigen::Vector2d lo(-1, -2), hi(1, 2);
  const TightenedConstraint c{Eigen::Vector2d(1.0, 0.0), 0.5};
  const auto res = adjust_distribution(nominal, {c}, lo, hi, 0.999);
  REQUIRE(res.report.status == SolveStatus::optimal);
  CHECK(res.used_lp);

  // Only (mean_0, stddev_0) matter: minimize |m - 0.9| + |s - 0.1| s.t. m + 3.0902 s <= 0.5.
  const double z = normal_quantile(0.999);
  auto f = [&](const Eigen::VectorXd& x) {
    const double viol = std::max(0.0, x[0] + z * x[1] - 0.5) + std::max(0.0, x[0] + z * x[1] - 1.0) +
                        std::max(0.0, -1.0 - x[0] + z * x[1]);
    return std::abs(x[0] - 0.9) + std::abs(x[1] - 0.1) + 1e4 * viol;
  };
  const auto g = oracle::grid_minimize(f, Eigen::Vector2d(-1, 0), Eigen::Vector2d(1, 1), 1e-3);
  CHECK(res.report.objective == Approx(g.value).margin(3e-3));
  CHECK(res.distribution.mean[1] == Approx(0.0).margin(1e-9));
  CHECK(res.distribution.stddev[1] == Approx(0.2).margin(1e-9));
}

TEST_CASE("adjust_distribution with coupled rows uses the cone solver") {
  const ControlDistribution nominal{Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.1, 0.1)};
  const TightenedConstraint c{Eigen::Vector2d(0.6, 0.8), 0.3};
  const auto res = adjust_distribution(nominal, {c}, Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1), 0.99);
  REQUIRE(res.report.status == SolveStatus::optimal);
  CHECK_FALSE(res.used_lp);
  oracle::AdjustProblem p{nominal.mean, nominal.stddev, Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1), {c},
                          normal_quantile(0.99)};
  CHECK(res.report.objective == Approx(oracle::grid_adjust_objective(p)).margin(3e-3));
}

TEST_CASE("zero-noise reduction is the 1-norm projection of the mean") {
  // s* = 0 and delta_u -> 0.5: z = 0 and the stddev block stays at zero.
  const ControlDistribution nominal{Eigen::Vector2d(0.8, 0.3), Eigen::Vector2d::Zero()};
  const TightenedConstraint c{Eigen::Vector2d(1.0, 0.0), 0.25};
  const auto res = adjust_distribution(nominal, {c}, Eigen::Vector2d(-1, -2), Eigen::Vector2d(1, 2), 0.5);
  REQUIRE(res.report.status == SolveStatus::optimal);
  CHECK(res.distribution.mean[0] == Approx(0.25).margin(1e-9));
  CHECK(res.distribution.mean[1] == Approx(0.3).margin(1e-9));
  CHECK(res.distribution.stddev.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("adjust_distribution degrades gracefully when rows conflict") {
  const ControlDistribution nominal{Eigen::Vector2d(0.5, 0.0), Eigen::Vector2d(0.14, 0.28)};
  const TightenedConstraint up{Eigen::Vector2d(1.0, 0.0), -0.5};
  const TightenedConstraint down{Eigen::Vector2d(-1.0, 0.0), -0.5};
  const auto res = adjust_distribution(nominal, {up, down}, Eigen::Vector2d(-1, -2), Eigen::Vector2d(1, 2), 0.999);
  CHECK(res.report.status == SolveStatus::relaxed);
  CHECK(res.report.slack_used > 0.0);
  CHECK((res.distribution.stddev.array() >= 0.0).all());
  CHECK((res.distribution.mean.array() >= Eigen::Array2d(-1, -2)).all());
  CHECK((res.distribution.mean.array() <= Eigen::Array2d(1, 2)).all());
}

TEST_CASE("adjust_distribution validates its inputs") {
  const ControlDistribution nominal{Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.1, 0.1)};
  const Eigen::Vector2d lo(-1, -1), hi(1, 1);
  CHECK_THROWS_AS(adjust_distribution(nominal, {}, lo, hi, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(adjust_distribution(nominal, {}, hi, lo, 0.9), std::invalid_argument);
  const ControlDistribution neg{Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(-0.1, 0.1)};
  CHECK_THROWS_AS(adjust_distribution(neg, {}, lo, hi, 0.9), std::invalid_argument);
}

TEST_CASE("adjusted distribution satisfies its chance constraints") {
  auto rng = make_stream(47, {47});
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> g;
  const double delta_u = 0.999;
  const Eigen::Vector2d lo(-1, -2), hi(1, 2);
  for (int trial = 0; trial < 10; ++trial) {
    const ControlDistribution nominal{Eigen::Vector2d(0.8 * u(rng), 1.5 * u(rng)), Eigen::Vector2d(0.14, 0.28)};
    std::vector<TightenedConstraint> rows;
    for (int k = 0; k < 2; ++k) {
      const double a = 3.0 * u(rng);
      rows.push_back({Eigen::Vector2d(std::cos(a), trial % 2 ? std::sin(a) : 0.0), 0.1 + 0.5 * std::abs(u(rng))});
    }
    const auto res = adjust_distribution(nominal, rows, lo, hi, delta_u);
    if (res.report.status != SolveStatus::optimal) continue;
    const auto& d = res.distribution;
    constexpr int n = 20000;
    std::vector<int> ok(rows.size(), 0);
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector2d x(d.mean[0] + d.stddev[0] * g(rng), d.mean[1] + d.stddev[1] * g(rng));
      for (std::size_t k = 0; k < rows.size(); ++k) ok[k] += rows[k].a_prime.dot(x) <= rows[k].b_double_prime;
    }
    for (int c : ok) CHECK(static_cast<double>(c) / n >= delta_u - 0.005);
  }
}
