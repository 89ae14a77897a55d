#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "mvcov/kernels.hpp"

using namespace mvcov;

namespace {

// half-integer closed forms, evaluated independently of the Bessel path
double matern_half(double x) { return std::exp(-x); }
double matern_three_halves(double x) { return (1.0 + x) * std::exp(-x); }
double matern_five_halves(double x) {
  return (1.0 + x + x * x / 3.0) * std::exp(-x);
}

}  // namespace

TEST_CASE("matern correlation equals 1 at the origin") {
  CHECK(matern_corr(0.0, {0.5, 1.0}) == 1.0);
  CHECK(matern_corr(0.0, {2.31, 0.01}) == 1.0);
  CHECK(matern_corr(0.0, {17.0, 250.0}) == 1.0);
}

TEST_CASE("matern half-integer closed forms") {
  CHECK_THAT(matern_corr(1.0, {0.5, 1.0}),
             Catch::Matchers::WithinRel(std::exp(-1.0), 1e-12));
  CHECK_THAT(matern_corr(1.0, {1.5, 1.0}),
             Catch::Matchers::WithinRel(2.0 * std::exp(-1.0), 1e-12));
  for (double x = 1e-6; x <= 50.0; x *= 1.18) {
    CAPTURE(x);
    CHECK_THAT(matern_corr(x, {0.5, 1.0}),
               Catch::Matchers::WithinRel(matern_half(x), 1e-10));
    CHECK_THAT(matern_corr(x, {1.5, 1.0}),
               Catch::Matchers::WithinRel(matern_three_halves(x), 1e-10));
    CHECK_THAT(matern_corr(x, {2.5, 1.0}),
               Catch::Matchers::WithinRel(matern_five_halves(x), 1e-10));
  }
}

TEST_CASE("matern matches the committed high-precision table") {
  std::ifstream f(std::string(MVCOV_TEST_DATA_DIR) + "/matern_oracle.csv");
  REQUIRE(f.good());
  std::string line;
  std::getline(f, line);  // header
  int rows = 0;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    std::string nu_s, x_s, m_s;
    std::getline(ss, nu_s, ',');
    std::getline(ss, x_s, ',');
    std::getline(ss, m_s, ',');
    const double nu = std::stod(nu_s), x = std::stod(x_s), m = std::stod(m_s);
    CAPTURE(nu, x);
    CHECK_THAT(matern_corr(x, {nu, 1.0}), Catch::Matchers::WithinRel(m, 1e-8));
    ++rows;
  }
  CHECK(rows >= 400);
}

TEST_CASE("matern is continuous in the smoothness") {
  for (double nu : {0.3, 0.5, 0.9999999, 1.0, 1.5, 2.4999999, 5.0, 9.5})
    for (double x : {0.01, 0.2, 0.5, 1.9, 2.0, 2.1, 10.0, 40.0}) {
      CAPTURE(nu, x);
      CHECK(std::abs(matern_corr(x, {nu, 1.0}) - matern_corr(x, {nu + 1e-7, 1.0})) <=
            1e-5);
    }
}

TEST_CASE("matern is nonincreasing and decays to zero") {
  for (double nu : {0.4, 1.0, 2.7}) {
    double prev = 1.0;
    for (double x = 1e-4; x < 80.0; x *= 1.07) {
      const double v = matern_corr(x, {nu, 1.0});
      CHECK(v <= prev + 1e-15);
      CHECK(v > 0.0);
      prev = v;
    }
  }
  CHECK(matern_corr(1e6, {0.5, 1.0}) == 0.0);  // underflow clamps to exact zero
}

TEST_CASE("matern rejects invalid input") {
  CHECK_THROWS_AS(matern_corr(-1.0, {0.5, 1.0}), std::domain_error);
  CHECK_THROWS_AS(matern_corr(1.0, {-0.5, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(matern_corr(1.0, {0.5, 0.0}), std::invalid_argument);
}

TEST_CASE("powered exponential special cases") {
  CHECK(powered_exp_corr(0.0, {1.0, 1.0}) == 1.0);
  CHECK_THAT(powered_exp_corr(1.0, {1.0, 1.0}),
             Catch::Matchers::WithinRel(std::exp(-1.0), 1e-14));
  CHECK_THAT(powered_exp_corr(2.0, {1.0, 2.0}),
             Catch::Matchers::WithinRel(std::exp(-4.0), 1e-14));
  CHECK_THROWS_AS(powered_exp_corr(1.0, {1.0, 2.5}), std::invalid_argument);
  CHECK_THROWS_AS(powered_exp_corr(1.0, {1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("askey taper has exact compact support") {
  const AskeyParams p{2.0, 2.0};
  CHECK(askey_corr(0.0, p, 2) == 1.0);
  CHECK_THAT(askey_corr(1.0, p, 2), Catch::Matchers::WithinRel(0.25, 1e-14));
  CHECK(askey_corr(2.0, p, 2) == 0.0);
  CHECK(askey_corr(2.0000001, p, 2) == 0.0);
  CHECK(askey_corr(100.0, p, 2) == 0.0);
  // validity requires mu >= (d+1)/2
  CHECK_THROWS_AS(askey_corr(1.0, {2.0, 1.2}, 2), std::domain_error);
  CHECK_NOTHROW(askey_corr(1.0, {2.0, 1.2}, 1));
}

TEST_CASE("askey raw amplitude matches the beta-function form") {
  // b^{nu+1} B(gamma+1, nu+1) with B evaluated through lgamma
  const double b = 2.0, gamma_ij = 1.0, nu = 2.0;
  const double beta_fn = std::tgamma(2.0) * std::tgamma(3.0) / std::tgamma(5.0);
  CHECK_THAT(askey_raw_amplitude(b, gamma_ij, nu),
             Catch::Matchers::WithinRel(std::pow(b, 3.0) * beta_fn, 1e-12));
}

TEST_CASE("smoothing kernel shape and scale equivariance") {
  CHECK(smoothing_kernel(0.0, 1.0) == 1.0);
  CHECK_THAT(smoothing_kernel(1.0, 1.0),
             Catch::Matchers::WithinRel(std::exp(-0.5), 1e-14));
  // K(r / lambda): doubling both r and lambda leaves the value unchanged
  for (double r : {0.3, 1.0, 4.0})
    CHECK(smoothing_kernel(r, 0.7) == smoothing_kernel(2 * r, 1.4));
  CHECK_THROWS_AS(smoothing_kernel(1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(smoothing_kernel(1.0, -1.0), std::domain_error);
}

TEST_CASE("all correlations are 1 at zero and nonincreasing") {
  const Correlation cs[] = {Correlation::matern(1.2, 2.0),
                            Correlation::powered_exp(0.5, 1.3),
                            Correlation::askey(3.0, 2.5)};
  for (const auto& c : cs) {
    CHECK(c(0.0) == 1.0);
    double prev = 1.0;
    for (double r = 0.01; r < 10.0; r *= 1.15) {
      const double v = c(r);
      CHECK(v <= prev + 1e-15);
      prev = v;
    }
  }
}
