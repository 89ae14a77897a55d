#pragma once

// Derivative-free Nelder-Mead simplex search on an unconstrained space.

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace mvcov {

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  int evals = 0;
  bool converged = false;
};

struct NelderMeadOptions {
  int max_evals = 2000;
  double ftol = 1e-9;
  double initial_step = 0.5;
};

inline NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& fn,
    const Eigen::VectorXd& x0, const NelderMeadOptions& opt = {}) {
  constexpr double kBig = 1e300;
  const int m = static_cast<int>(x0.size());
  NelderMeadResult res;
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double f = fn(x);
    return std::isfinite(f) ? f : kBig;
  };

  if (m == 0) {
    res.x = x0;
    res.f = eval(x0);
    res.evals = evals;
    res.converged = true;
    return res;
  }

  std::vector<Eigen::VectorXd> xs(m + 1, x0);
  std::vector<double> fs(m + 1);
  fs[0] = eval(x0);
  for (int i = 0; i < m; ++i) {
    xs[i + 1][i] += opt.initial_step;
    fs[i + 1] = eval(xs[i + 1]);
  }
  std::vector<int> ord(m + 1);

  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
  while (evals < opt.max_evals) {
    std::iota(ord.begin(), ord.end(), 0);
    std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    const int best = ord[0], worst = ord[m], second_worst = ord[m - 1];
    if (fs[worst] - fs[best] <= opt.ftol * (std::abs(fs[best]) + opt.ftol) &&
        fs[best] < kBig) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(m);
    for (int i = 0; i <= m; ++i)
      if (i != worst) centroid += xs[i];
    centroid /= m;

    const Eigen::VectorXd xr = centroid + alpha * (centroid - xs[worst]);
    const double fr = eval(xr);
    if (fr < fs[best]) {
      const Eigen::VectorXd xe = centroid + gamma * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        xs[worst] = xe;
        fs[worst] = fe;
      } else {
        xs[worst] = xr;
        fs[worst] = fr;
      }
    } else if (fr < fs[second_worst]) {
      xs[worst] = xr;
      fs[worst] = fr;
    } else {
      const bool outside = fr < fs[worst];
      const Eigen::VectorXd xc =
          outside ? centroid + rho * (xr - centroid)
                  : centroid + rho * (xs[worst] - centroid);
      const double fc = eval(xc);
      if (fc < std::min(fr, fs[worst])) {
        xs[worst] = xc;
        fs[worst] = fc;
      } else {
        for (int i = 0; i <= m; ++i) {
          if (i == best) continue;
          xs[i] = xs[best] + sigma * (xs[i] - xs[best]);
          fs[i] = eval(xs[i]);
          if (evals >= opt.max_evals) break;
        }
      }
    }
  }

  int best = 0;
  for (int i = 1; i <= m; ++i)
    if (fs[i] < fs[best]) best = i;
  res.x = xs[best];
  res.f = fs[best];
  res.evals = evals;
  return res;
}

}  // namespace mvcov
