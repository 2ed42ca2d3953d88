#include "mppi_orca/dynamics.hpp"
#include "mppi_orca/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace mppi_orca;
using Catch::Approx;

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  constexpr double pi = std::numbers::pi;
  CHECK(wrap_angle(pi) == Approx(pi));
  CHECK(wrap_angle(-pi) == Approx(pi));
  CHECK(wrap_angle(3.0 * pi) == Approx(pi));
  CHECK(wrap_angle(2.0 * pi + 0.25) == Approx(0.25));
  CHECK(wrap_angle(-0.5) == Approx(-0.5));
  for (double a = -20.0; a < 20.0; a += 0.37) {
    const double w = wrap_angle(a);
    CHECK(w > -pi);
    CHECK(w <= pi);
    CHECK(std::remainder(w - a, 2.0 * pi) == Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("clamp_control clips into the actuator bounds") {
  const DiffDriveModel model;
  CHECK(clamp_control(Eigen::Vector2d(0.5, 0.0), model) == Eigen::Vector2d(0.5, 0.0));
  CHECK(clamp_control(Eigen::Vector2d(1.7, -3.0), model) == Eigen::Vector2d(1.0, -2.0));
  CHECK(clamp_control(Eigen::Vector2d(-1.0, 2.0), model) == Eigen::Vector2d(-1.0, 2.0));
}

TEST_CASE("clamp_control is idempotent") {
  const DiffDriveModel model;
  auto rng = make_stream(7, {1});
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector2d nu(u(rng), u(rng));
    const Eigen::Vector2d once = clamp_control(nu, model);
    CHECK(clamp_control(once, model) == once);
  }
}

TEST_CASE("diff-drive step uses the dt-scaled update") {
  const DiffDriveModel model;
  const AgentState a = model.step({0, 0, 0}, Eigen::Vector2d(1, 0));
  CHECK(a.px == Approx(0.1));
  CHECK(a.py == Approx(0.0).margin(1e-15));
  CHECK(a.theta == Approx(0.0).margin(1e-15));

  const AgentState b = model.step({0, 0, std::numbers::pi / 2}, Eigen::Vector2d(1, 0));
  CHECK(b.px == Approx(0.0).margin(1e-15));
  CHECK(b.py == Approx(0.1));
  CHECK(b.theta == Approx(std::numbers::pi / 2));

  const AgentState x{1.5, -2.0, 0.7};
  CHECK(model.step(x, Eigen::Vector2d::Zero()) == x);
}

TEST_CASE("step agrees with x + G(x) nu") {
  const DiffDriveModel model;
  auto rng = make_stream(11, {2});
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const AgentState x{u(rng), u(rng), wrap_angle(u(rng))};
    const Eigen::Vector2d nu(u(rng) / 3.0, u(rng) / 1.5);
    const Eigen::Vector3d expect = model.drift(x) + model.actuation(x) * nu;
    const AgentState got = model.step(x, nu);
    CHECK(got.px == Approx(expect.x()));
    CHECK(got.py == Approx(expect.y()));
    CHECK(std::remainder(got.theta - expect.z(), 2.0 * std::numbers::pi) == Approx(0.0).margin(1e-12));
    // Displacement and heading change have exact magnitudes.
    CHECK((got.position() - x.position()).norm() == Approx(model.dt * std::abs(nu[0])).margin(1e-12));
    CHECK(std::abs(std::remainder(got.theta - x.theta, 2.0 * std::numbers::pi)) ==
          Approx(model.dt * std::abs(nu[1])).margin(1e-12));
  }
}

TEST_CASE("generic control-affine model steps F + G nu") {
  ControlAffineModel<2, 2> single;
  single.drift = [](const Eigen::Vector2d& x) { return x; };
  single.actuation = [](const Eigen::Vector2d&) { return Eigen::Matrix2d(0.1 * Eigen::Matrix2d::Identity()); };
  single.lower = Eigen::Vector2d::Constant(-1);
  single.upper = Eigen::Vector2d::Constant(1);
  const Eigen::Vector2d x1 = step(Eigen::Vector2d(1, 2), Eigen::Vector2d(1, -1), single);
  CHECK(x1.isApprox(Eigen::Vector2d(1.1, 1.9)));
}

TEST_CASE("model validation rejects inverted bounds") {
  DiffDriveModel model;
  CHECK_NOTHROW(model.validate());
  model.upper[1] = -3.0;
  CHECK_THROWS_AS(model.validate(), std::invalid_argument);
  model = {};
  model.dt = 0.0;
  CHECK_THROWS_AS(model.validate(), std::invalid_argument);
}

TEST_CASE("executed control noise") {
  SECTION("zero noise returns the command exactly") {
    auto rng = make_stream(1, {0});
    const ActuationNoise<2> none{};
    CHECK(sample_executed_control<2>(Eigen::Vector2d(0.5, 0.1), none, rng) == Eigen::Vector2d(0.5, 0.1));
  }
  SECTION("moments match the benchmark covariance") {
    auto rng = make_stream(3, {4});
    const ActuationNoise<2> noise{Eigen::Vector2d(0.1, 0.2)};
    constexpr int n = 100000;
    Eigen::Vector2d sum = Eigen::Vector2d::Zero(), sq = Eigen::Vector2d::Zero();
    bool unclamped = false;
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector2d nu = sample_executed_control<2>(Eigen::Vector2d(1.0, 0.0), noise, rng);
      unclamped = unclamped || nu[0] > 1.0;
      sum += nu;
      sq += (nu - Eigen::Vector2d(1.0, 0.0)).cwiseAbs2();
    }
    const Eigen::Vector2d mean = sum / n;
    CHECK(std::abs(mean[0] - 1.0) < 0.002);
    CHECK(std::abs(mean[1]) < 0.004);
    const Eigen::Vector2d var = sq / n;
    CHECK(var[0] == Approx(0.01).epsilon(0.05));
    CHECK(var[1] == Approx(0.04).epsilon(0.05));
    CHECK(unclamped);  // the draw itself is not clipped
  }
}
