#pragma once

// Site layouts and multivariate field samples.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mvcov {

// An ordered list of d-dimensional coordinates. When has_time is set the
// last column is a time index and the spatial part is the leading columns.
struct SpatialDesign {
  Eigen::MatrixXd sites;  // n x d, one row per site
  bool has_time = false;

  SpatialDesign() = default;
  explicit SpatialDesign(Eigen::MatrixXd s, bool time = false)
      : sites(std::move(s)), has_time(time) {}

  int n() const { return static_cast<int>(sites.rows()); }
  int dim() const { return static_cast<int>(sites.cols()); }

  Eigen::VectorXd site(int k) const { return sites.row(k).transpose(); }

  double distance(int k, int l) const {
    return (sites.row(k) - sites.row(l)).norm();
  }

  double diameter() const {
    double d = 0.0;
    for (int k = 0; k < n(); ++k)
      for (int l = k + 1; l < n(); ++l) d = std::max(d, distance(k, l));
    return d;
  }

  // regular grid with the given spacing per axis, row-major over axes
  static SpatialDesign grid(const std::vector<int>& shape, double spacing) {
    if (shape.empty()) throw std::invalid_argument("grid: empty shape");
    long n = 1;
    for (int s : shape) {
      if (s < 1) throw std::invalid_argument("grid: axis size must be >= 1");
      n *= s;
    }
    const int d = static_cast<int>(shape.size());
    Eigen::MatrixXd sites(n, d);
    std::vector<int> idx(d, 0);
    for (long k = 0; k < n; ++k) {
      for (int ax = 0; ax < d; ++ax) sites(k, ax) = idx[ax] * spacing;
      for (int ax = d - 1; ax >= 0; --ax) {
        if (++idx[ax] < shape[ax]) break;
        idx[ax] = 0;
      }
    }
    return SpatialDesign(std::move(sites));
  }

  // cartesian product of a spatial design with evenly spaced time points
  static SpatialDesign space_time(const SpatialDesign& space, int steps,
                                  double dt) {
    if (steps < 1) throw std::invalid_argument("space_time: steps must be >= 1");
    const int ns = space.n(), d = space.dim();
    Eigen::MatrixXd sites(static_cast<long>(ns) * steps, d + 1);
    long row = 0;
    for (int t = 0; t < steps; ++t)
      for (int k = 0; k < ns; ++k, ++row) {
        sites.block(row, 0, 1, d) = space.sites.row(k);
        sites(row, d) = t * dt;
      }
    SpatialDesign out(std::move(sites));
    out.has_time = true;
    return out;
  }
};

// T replications of a p-variate field on a common design. NaN marks a
// missing observation of one variable at one site.
struct FieldSample {
  SpatialDesign design;
  std::vector<Eigen::MatrixXd> reps;  // each n x p

  int n() const { return design.n(); }
  int p() const { return reps.empty() ? 0 : static_cast<int>(reps[0].cols()); }
  int t_count() const { return static_cast<int>(reps.size()); }

  void check_consistent() const {
    for (const auto& r : reps)
      if (r.rows() != design.n() || r.cols() != p())
        throw std::invalid_argument("FieldSample: replication shape mismatch");
  }

  bool has_missing() const {
    for (const auto& r : reps)
      if (r.hasNaN()) return true;
    return false;
  }

  // per-variable sample standard deviation pooled over sites and replications
  Eigen::VectorXd pooled_stddev() const {
    const int pv = p();
    Eigen::VectorXd out(pv);
    for (int i = 0; i < pv; ++i) {
      double s = 0.0, s2 = 0.0;
      long m = 0;
      for (const auto& r : reps)
        for (int k = 0; k < r.rows(); ++k) {
          const double v = r(k, i);
          if (std::isnan(v)) continue;
          s += v;
          s2 += v * v;
          ++m;
        }
      if (m < 2) throw std::invalid_argument("pooled_stddev: not enough data");
      const double mean = s / m;
      out[i] = std::sqrt(std::max(0.0, s2 / m - mean * mean));
    }
    return out;
  }
};

}  // namespace mvcov
