#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mvcov/gaussian.hpp"
#include "mvcov/models.hpp"

using namespace mvcov;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

Eigen::MatrixXd beta2(double b12) {
  Eigen::MatrixXd b(2, 2);
  b << 1.0, b12, b12, 1.0;
  return b;
}

// Table-style parsimonious generator reused across the test suite
ModelPtr table_parsimonious() {
  return make_parsimonious_matern(2, vec2(1.61, 0.19), vec2(1.33, 0.54),
                                  1.0 / 367.1, beta2(-0.49));
}

Eigen::MatrixXd random_sites(int n, int d, double box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, box);
  Eigen::MatrixXd s(n, d);
  for (int k = 0; k < n; ++k)
    for (int c = 0; c < d; ++c) s(k, c) = u(rng);
  return s;
}

}  // namespace

TEST_CASE("separable collocated value is R") {
  Eigen::MatrixXd r(2, 2);
  r << 2.0, -0.5, -0.5, 1.0;
  const ModelPtr m = make_separable(2, Correlation::matern(1.0, 0.7), r);
  const Eigen::VectorXd s = vec2(3.0, -1.0);
  CHECK(m->eval(0, 1, s, s) == -0.5);
  CHECK(m->eval(0, 0, s, s) == 2.0);
}

TEST_CASE("separable rejects a non-symmetric or indefinite R") {
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 0.4, 0.1, 1.0;
  CHECK_THROWS_AS(make_separable(2, Correlation::matern(1.0, 1.0), bad),
                  std::invalid_argument);
  Eigen::MatrixXd indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(make_separable(2, Correlation::matern(1.0, 1.0), indef),
                  std::invalid_argument);
}

TEST_CASE("full bivariate matern collocated cross value from table parameters") {
  const ModelPtr m = make_full_bivariate_matern(
      2, vec2(1.63, 0.19), vec2(1.31, 0.55), vec2(1.0 / 384.3, 1.0 / 361.6),
      0.5 * (1.31 + 0.55), 1.0 / 420.1, -0.60);
  const Eigen::VectorXd s = vec2(10.0, 20.0);
  CHECK_THAT(m->eval(0, 1, s, s),
             Catch::Matchers::WithinRel(-0.60 * 1.63 * 0.19, 1e-12));
  CHECK_THAT(m->eval(0, 1, s, s), Catch::Matchers::WithinAbs(-0.18582, 1e-6));
}

TEST_CASE("lmc with one factor is separable") {
  Eigen::MatrixXd loadings(2, 1);
  loadings << 1.0, 1.0;
  const ModelPtr lmc =
      make_lmc(2, {Correlation::powered_exp(1.0, 1.0)}, loadings);
  Eigen::MatrixXd r = Eigen::MatrixXd::Ones(2, 2);
  const ModelPtr sep = make_separable(2, Correlation::powered_exp(1.0, 1.0), r);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int t = 0; t < 50; ++t) {
    const Eigen::VectorXd s1 = vec2(u(rng), u(rng)), s2 = vec2(u(rng), u(rng));
    const double h = (s1 - s2).norm();
    CHECK_THAT(lmc->eval(0, 1, s1, s2),
               Catch::Matchers::WithinAbs(std::exp(-h), 1e-14));
    CHECK(lmc->eval(0, 1, s1, s2) == sep->eval(0, 1, s1, s2));
  }
}

TEST_CASE("lmc collocated matrix is A A^T exactly") {
  Eigen::MatrixXd a(3, 2);
  a << 1.0, 0.5, -0.3, 1.2, 0.0, 2.0;
  const ModelPtr lmc = make_lmc(
      2, {Correlation::matern(0.8, 1.0), Correlation::matern(1.6, 0.4)}, a);
  const Eigen::MatrixXd expected = a * a.transpose();
  const Eigen::VectorXd s = vec2(0.0, 0.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(lmc->eval(i, j, s, s) == expected(i, j));
}

TEST_CASE("lmc rejects rank-deficient loadings") {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 2.0, 0.5, 1.0;  // second column is a multiple of the first
  CHECK_THROWS_AS(
      make_lmc(2, {Correlation::matern(0.5, 1.0), Correlation::matern(1.5, 1.0)}, a),
      std::invalid_argument);
}

TEST_CASE("parsimonious matern marginals reproduce the matern correlation") {
  const ModelPtr m = table_parsimonious();
  const auto* mm = dynamic_cast<const MultiMaternModel*>(m.get());
  REQUIRE(mm);
  for (double r : {0.0, 10.0, 150.0, 400.0, 1200.0}) {
    CHECK_THAT(mm->smooth_iso(0, 0, r) / (1.61 * 1.61),
               Catch::Matchers::WithinAbs(matern_corr(r, {1.33, 1.0 / 367.1}), 1e-12));
    CHECK_THAT(mm->smooth_iso(1, 1, r) / (0.19 * 0.19),
               Catch::Matchers::WithinAbs(matern_corr(r, {0.54, 1.0 / 367.1}), 1e-12));
  }
}

TEST_CASE("parsimonious matern accepts the table beta and rejects an extreme one") {
  CHECK_NOTHROW(table_parsimonious());
  // a 5x5 grid joint covariance already exhibits a negative eigenvalue here
  CHECK_THROWS_AS(make_parsimonious_matern(2, vec2(1.61, 0.19), vec2(1.33, 0.54),
                                           1.0 / 367.1, beta2(-0.999)),
                  std::invalid_argument);
}

TEST_CASE("latentdim validates beta_sep") {
  Eigen::MatrixXd xis(2, 1);
  xis << 0.0, 1.0;
  CHECK_THROWS_AS(make_latentdim(2, xis, vec2(1.0, 1.0), 0.0, 1.0, 1.5),
                  std::invalid_argument);
  CHECK_NOTHROW(make_latentdim(2, xis, vec2(1.0, 1.0), 0.0, 1.0, 1.0));
}

TEST_CASE("latentdim with beta_sep 0 is separable in space and variables") {
  Eigen::MatrixXd xis(3, 2);
  xis << 0.0, 0.0, 1.0, -0.5, 2.0, 0.3;
  Eigen::VectorXd sigma(3);
  sigma << 1.0, 2.0, 0.5;
  const ModelPtr m = make_latentdim(2, xis, sigma, 0.0, 0.8, 0.0);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int t = 0; t < 30; ++t) {
    const Eigen::VectorXd h = vec2(u(rng), u(rng));
    double ratio0 = m->smooth_eval(0, 0, h, zero) / m->smooth_eval(0, 0, zero, zero);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double ratio =
            m->smooth_eval(i, j, h, zero) / m->smooth_eval(i, j, zero, zero);
        CHECK_THAT(ratio, Catch::Matchers::WithinAbs(ratio0, 1e-13));
      }
  }
}

TEST_CASE("latentdim nugget enters only at exact co-location") {
  Eigen::MatrixXd xis(2, 1);
  xis << 0.0, 0.7;
  const ModelPtr m = make_latentdim(2, xis, vec2(1.0, 1.0), 0.3, 1.0, 0.5);
  const Eigen::VectorXd s = vec2(1.0, 2.0);
  const Eigen::VectorXd s_eps = vec2(1.0, 2.0 + 1e-12);
  CHECK(m->eval(0, 0, s, s) == m->smooth_eval(0, 0, s, s) + 0.09);
  CHECK(m->eval(0, 0, s, s_eps) == m->smooth_eval(0, 0, s, s_eps));
  CHECK(m->eval(0, 1, s, s) == m->smooth_eval(0, 1, s, s));
}

TEST_CASE("asymmetric shifts reduce to the base when zero and preserve marginals") {
  const ModelPtr base = table_parsimonious();
  const ModelPtr zero_shift = asymmetrize(base, Eigen::MatrixXd::Zero(2, 2));
  Eigen::MatrixXd shifts = Eigen::MatrixXd::Zero(2, 2);
  shifts(1, 0) = 100.0;
  const ModelPtr shifted = asymmetrize(base, shifts);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-500.0, 500.0);
  for (int t = 0; t < 40; ++t) {
    const Eigen::VectorXd s1 = vec2(u(rng), u(rng)), s2 = vec2(u(rng), u(rng));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(zero_shift->eval(i, j, s1, s2) == base->eval(i, j, s1, s2));
    for (int i = 0; i < 2; ++i)
      CHECK(shifted->eval(i, i, s1, s2) == base->eval(i, i, s1, s2));
  }
}

TEST_CASE("asymmetric shift moves the cross-covariance peak to a2 - a1") {
  const ModelPtr base = table_parsimonious();
  Eigen::MatrixXd shifts = Eigen::MatrixXd::Zero(2, 2);
  shifts(1, 0) = 100.0;
  const auto shifted = std::make_shared<AsymShiftModel>(base, shifts);
  // dense lag-grid search
  double best = -1e30;
  Eigen::VectorXd argmax = vec2(0, 0);
  for (double hx = -450; hx <= 450; hx += 25)
    for (double hy = -450; hy <= 450; hy += 25) {
      const double v = -shifted->smooth_lag(0, 1, vec2(hx, hy));
      if (v > best) {
        best = v;
        argmax = vec2(hx, hy);
      }
    }
  CHECK(argmax[0] == 100.0);
  CHECK(argmax[1] == 0.0);
}

TEST_CASE("asymmetric shift requires a pinned first shift and a stationary base") {
  const ModelPtr base = table_parsimonious();
  Eigen::MatrixXd shifts = Eigen::MatrixXd::Zero(2, 2);
  shifts(0, 0) = 1.0;
  CHECK_THROWS_AS(asymmetrize(base, shifts), std::invalid_argument);

  std::vector<SigmaField> fields;
  Eigen::MatrixXd grid_sites(1, 2);
  grid_sites << 0.0, 0.0;
  for (int i = 0; i < 2; ++i)
    fields.push_back({grid_sites, Eigen::VectorXd::Ones(1)});
  const ModelPtr nonstat = scale_variance(base, fields);
  CHECK_THROWS_AS(asymmetrize(nonstat, Eigen::MatrixXd::Zero(2, 2)),
                  std::invalid_argument);
}

TEST_CASE("taper zeroes the covariance beyond the support radius") {
  const ModelPtr base = table_parsimonious();
  const ModelPtr tapered = taper(base, {300.0, 2.0});
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(2);
  for (double r : {300.0, 350.0, 1000.0})
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(tapered->eval(i, j, vec2(r, 0.0), origin) == 0.0);
  CHECK(tapered->eval(0, 0, vec2(299.0, 0.0), origin) != 0.0);
  CHECK(tapered->eval(0, 0, origin, origin) == base->eval(0, 0, origin, origin));
}

TEST_CASE("validity report passes for structurally valid families") {
  Eigen::MatrixXd r(2, 2);
  r << 1.5, 0.7, 0.7, 1.0;
  CHECK(validate_model(*make_separable(2, Correlation::matern(1.0, 0.5), r), {20},
                       2, 42)
            .pass);
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 0.2, -0.4, 0.9;
  CHECK(validate_model(
            *make_lmc(2, {Correlation::matern(0.7, 1.2), Correlation::matern(2.0, 0.3)}, a),
            {20}, 2, 42)
            .pass);
  CHECK(validate_model(*table_parsimonious(), {30}, 3, 42).pass);
  CHECK(validate_model(*taper(table_parsimonious(), {250.0, 1.5}), {25}, 2, 42).pass);
  Eigen::MatrixXd shifts = Eigen::MatrixXd::Zero(2, 2);
  shifts(1, 1) = 120.0;
  CHECK(validate_model(*asymmetrize(table_parsimonious(), shifts), {25}, 2, 42).pass);
}

TEST_CASE("eval obeys the transpose relation exactly") {
  Eigen::MatrixXd xis(2, 1);
  xis << 0.0, 1.3;
  Eigen::MatrixXd shifts = Eigen::MatrixXd::Zero(2, 2);
  shifts(1, 0) = 2.0;
  const std::vector<ModelPtr> models = {
      table_parsimonious(),
      make_latentdim(2, xis, vec2(1.0, 0.6), 0.1, 0.9, 0.4),
      asymmetrize(table_parsimonious(), shifts),
      taper(table_parsimonious(), {500.0, 2.0}),
  };
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-400.0, 400.0);
  for (const auto& m : models)
    for (int t = 0; t < 200; ++t) {
      const Eigen::VectorXd s1 = vec2(u(rng), u(rng)), s2 = vec2(u(rng), u(rng));
      const int i = static_cast<int>(rng() % 2), j = static_cast<int>(rng() % 2);
      CHECK(m->eval(i, j, s1, s2) == m->eval(j, i, s2, s1));
    }
}

TEST_CASE("cross-covariances satisfy the collocated Cauchy-Schwarz bound") {
  Eigen::MatrixXd xis(2, 1);
  xis << 0.0, 0.8;
  const std::vector<ModelPtr> models = {
      table_parsimonious(),
      make_latentdim(2, xis, vec2(1.4, 0.5), 0.0, 0.6, 0.7),
      make_lmc(2, {Correlation::matern(0.9, 0.01), Correlation::matern(1.8, 0.002)},
               (Eigen::MatrixXd(2, 2) << 1.0, 0.3, -0.7, 0.4).finished()),
  };
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-600.0, 600.0);
  for (const auto& m : models)
    for (int t = 0; t < 3400; ++t) {
      const Eigen::VectorXd s1 = vec2(u(rng), u(rng)), s2 = vec2(u(rng), u(rng));
      const int i = static_cast<int>(rng() % 2), j = static_cast<int>(rng() % 2);
      const double cij = m->eval(i, j, s1, s2);
      const double bound = m->eval(i, i, s1, s1) * m->eval(j, j, s2, s2);
      CHECK(cij * cij <= bound * (1.0 + 1e-12));
    }
}

TEST_CASE("variance scaling multiplies by the field values") {
  Eigen::MatrixXd beta = beta2(-0.3);
  const ModelPtr base = make_parsimonious_matern(2, vec2(1.0, 1.0), vec2(0.8, 1.4),
                                                 0.5, beta);
  Eigen::MatrixXd field_sites(2, 2);
  field_sites << 0.0, 0.0, 10.0, 0.0;
  std::vector<SigmaField> fields;
  fields.push_back({field_sites, vec2(2.0, 3.0)});
  fields.push_back({field_sites, vec2(0.5, 4.0)});
  const ModelPtr scaled = scale_variance(base, fields);
  const Eigen::VectorXd near0 = vec2(1.0, 0.0), near1 = vec2(9.0, 0.5);
  CHECK(scaled->eval(0, 0, near0, near0) == 4.0 * base->eval(0, 0, near0, near0));
  CHECK(scaled->eval(0, 1, near0, near1) ==
        2.0 * 4.0 * base->eval(0, 1, near0, near1));
  CHECK_FALSE(scaled->stationary());
  // strictly positive fields are required
  std::vector<SigmaField> bad;
  bad.push_back({field_sites, vec2(1.0, 0.0)});
  bad.push_back({field_sites, vec2(1.0, 1.0)});
  CHECK_THROWS_AS(scale_variance(base, bad), std::invalid_argument);
}

TEST_CASE("nugget wrapper adds white noise variance on the diagonal") {
  const ModelPtr base = table_parsimonious();
  const ModelPtr noisy = add_nugget(base, vec2(0.5, 0.2));
  const Eigen::VectorXd s = vec2(3.0, 4.0);
  CHECK(noisy->eval(0, 0, s, s) == base->eval(0, 0, s, s) + 0.25);
  CHECK(noisy->eval(1, 1, s, s) == base->eval(1, 1, s, s) + 0.04);
  CHECK(noisy->eval(0, 1, s, s) == base->eval(0, 1, s, s));
  CHECK_THROWS_AS(add_nugget(base, vec2(-0.1, 0.0)), std::invalid_argument);
}

TEST_CASE("index and dimension errors are reported") {
  const ModelPtr m = table_parsimonious();
  const Eigen::VectorXd s = vec2(0.0, 0.0);
  CHECK_THROWS_AS(m->eval(0, 2, s, s), std::out_of_range);
  CHECK_THROWS_AS(m->eval(-1, 0, s, s), std::out_of_range);
  Eigen::VectorXd s3(3);
  s3 << 0, 0, 0;
  CHECK_THROWS_AS(m->eval(0, 0, s3, s3), std::invalid_argument);
  CHECK_NOTHROW(eval_cross_cov(*m, 0, 1, s, s));
}
