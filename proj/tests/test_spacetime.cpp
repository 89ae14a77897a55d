#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mvcov/gaussian.hpp"
#include "mvcov/spacetime.hpp"

using namespace mvcov;

namespace {

SpaceTimePtr demo_model() {
  Eigen::MatrixXd xis(2, 1);
  xis << 0.0, 1.0;
  return make_spacetime(2, 1.0, Phi1Kind::exponential, PsiSpec::power(1.0),
                        PsiSpec::identity(), xis);
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("spacetime value at the joint origin is sigma2") {
  const auto m = demo_model();
  CHECK(eval_st(*m, 0, 0, vec2(0, 0), 0.0) == 1.0);
  Eigen::MatrixXd xis(2, 1);
  xis << 0.5, 0.5;  // v = 0 for i != j as well
  const auto m2 = make_spacetime(2, 2.5, Phi1Kind::exponential,
                                 PsiSpec::power(1.0), PsiSpec::identity(), xis);
  CHECK(eval_st(*m2, 0, 1, vec2(0, 0), 0.0) == 2.5);
}

TEST_CASE("spacetime hand-evaluated point") {
  // sigma2=1, d=2, phi1=exp, psi1=1+t, psi2=1, u=1, |h|=1, v=0:
  // psi1(1) = 2, so C = (1/2) exp(-1/2)
  const auto m = demo_model();
  CHECK_THAT(eval_st(*m, 0, 0, vec2(1, 0), 1.0),
             Catch::Matchers::WithinRel(0.5 * std::exp(-0.5), 1e-14));
  CHECK_THAT(eval_st(*m, 0, 0, vec2(0, 1), 1.0),
             Catch::Matchers::WithinAbs(0.30327, 1e-5));
}

TEST_CASE("spacetime marginals share one spatio-temporal covariance") {
  const auto m = demo_model();
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 30; ++t) {
    const Eigen::VectorXd h = vec2(u(rng), u(rng));
    const double lag = u(rng);
    CHECK(eval_st(*m, 0, 0, h, lag) == eval_st(*m, 1, 1, h, lag));
  }
}

TEST_CASE("spacetime dependence is even in h and u separately") {
  const auto m = demo_model();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 50; ++t) {
    const Eigen::VectorXd h = vec2(u(rng), u(rng));
    const double lag = u(rng);
    const int i = static_cast<int>(rng() % 2), j = static_cast<int>(rng() % 2);
    CHECK(eval_st(*m, i, j, h, lag) == eval_st(*m, i, j, -h, lag));
    CHECK(eval_st(*m, i, j, h, lag) == eval_st(*m, i, j, h, -lag));
  }
}

TEST_CASE("delay variant reduces to the base for zero lambda or i = j") {
  const auto m = demo_model();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd lambda(1);
  lambda << 0.7;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 40; ++t) {
    const Eigen::VectorXd h = vec2(u(rng), u(rng));
    const double lag = u(rng);
    CHECK(eval_st_asym_delay(*m, zero, 0, 1, h, lag) == eval_st(*m, 0, 1, h, lag));
    CHECK(eval_st_asym_delay(*m, lambda, 0, 0, h, lag) == eval_st(*m, 0, 0, h, lag));
    CHECK(eval_st_asym_delay(*m, lambda, 1, 1, h, lag) == eval_st(*m, 1, 1, h, lag));
  }
}

TEST_CASE("delay shifts the peak over time to lambda^T (xi_1 - xi_2)") {
  const auto m = demo_model();
  Eigen::VectorXd lambda(1);
  lambda << -1.0;  // lambda^T (xi_0 - xi_1) = (-1)(0 - 1) = 1
  double best = -1e30, arg = 0.0;
  for (double lag = -3.0; lag <= 3.0; lag += 0.05) {
    const double v = eval_st_asym_delay(*m, lambda, 0, 1, vec2(0, 0), lag);
    if (v > best) {
      best = v;
      arg = lag;
    }
  }
  CHECK_THAT(arg, Catch::Matchers::WithinAbs(1.0, 1e-9));
}

TEST_CASE("velocity variant reduces to the base when it should") {
  const auto m = demo_model();
  const Eigen::VectorXd zero_h = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd zero_xi = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd gh(2);
  gh << 1.0, 0.0;
  Eigen::VectorXd gxi(1);
  gxi << 0.4;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 40; ++t) {
    const Eigen::VectorXd h = vec2(u(rng), u(rng));
    const double lag = u(rng);
    CHECK(eval_st_asym_velocity(*m, zero_h, zero_xi, 0, 1, h, lag) ==
          eval_st(*m, 0, 1, h, lag));
    // u = 0 cancels the velocity terms entirely
    CHECK(eval_st_asym_velocity(*m, gh, gxi, 0, 1, h, 0.0) ==
          eval_st(*m, 0, 1, h, 0.0));
  }
  // exact cancellation: h = gamma_h * u
  CHECK(eval_st_asym_velocity(*m, gh, zero_xi, 0, 1, vec2(1, 0), 1.0) ==
        eval_st(*m, 0, 1, vec2(0, 0), 1.0));
}

TEST_CASE("asymmetric variants satisfy C^a_ij(h,u) = C^a_ji(-h,-u)") {
  const auto base = demo_model();
  Eigen::VectorXd lambda(1);
  lambda << 0.9;
  Eigen::VectorXd gh(2);
  gh << 0.3, -0.8;
  Eigen::VectorXd gxi(1);
  gxi << -0.2;
  const SpaceTimeDelayModel delay(base, lambda);
  const SpaceTimeVelocityModel vel(base, gh, gxi);
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 60; ++t) {
    Eigen::VectorXd hf(3);
    hf << u(rng), u(rng), u(rng);
    const int i = static_cast<int>(rng() % 2), j = static_cast<int>(rng() % 2);
    CHECK(delay.smooth_lag(i, j, hf) == delay.smooth_lag(j, i, -hf));
    CHECK(vel.smooth_lag(i, j, hf) == vel.smooth_lag(j, i, -hf));
  }
}

TEST_CASE("joint covariance over space-time designs passes the validity check") {
  const auto base = demo_model();
  CHECK(validate_model(*base, {20}, 3, 99).pass);
  Eigen::VectorXd lambda(1);
  lambda << 0.5;
  CHECK(validate_model(SpaceTimeDelayModel(base, lambda), {20}, 3, 99).pass);
  Eigen::VectorXd gh(2);
  gh << 0.4, 0.1;
  Eigen::VectorXd gxi(1);
  gxi << 0.3;
  CHECK(validate_model(SpaceTimeVelocityModel(base, gh, gxi), {20}, 3, 99).pass);
  // a nonseparable catalog member
  Eigen::MatrixXd xis(3, 2);
  xis << 0.0, 0.0, 1.0, 0.2, -0.4, 0.9;
  const auto m2 = make_spacetime(2, 1.7, Phi1Kind::inverse_linear,
                                 PsiSpec::power(0.5), PsiSpec::power(0.8), xis);
  CHECK(validate_model(*m2, {18}, 3, 99).pass);
}

TEST_CASE("spacetime catalog and dimension errors") {
  Eigen::MatrixXd xis(2, 1);
  xis << 0.0, 1.0;
  CHECK_THROWS_AS(make_spacetime(2, 1.0, Phi1Kind::exponential,
                                 PsiSpec::power(1.5), PsiSpec::identity(), xis),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_spacetime(2, -1.0, Phi1Kind::exponential,
                                 PsiSpec::power(1.0), PsiSpec::identity(), xis),
                  std::invalid_argument);
  const auto m = demo_model();
  Eigen::VectorXd h3(3);
  h3 << 0, 0, 0;
  CHECK_THROWS_AS(eval_st(*m, 0, 0, h3, 0.0), std::invalid_argument);
}
