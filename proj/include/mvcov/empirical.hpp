#pragma once

// Moment-based estimators: the binned empirical cross-covariance, both
// cross-variograms, and the kernel-smoothed nonparametric estimator.
//
// The cross-variogram here carries no 1/2 factor: for i == j it estimates
// E{Z_i(s1) - Z_i(s2)}^2, i.e. twice the classical semivariogram.

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "mvcov/design.hpp"
#include "mvcov/kernels.hpp"

namespace mvcov {

// Disjoint lag bins. Vector mode assigns an ordered pair to the nearest
// center within the tolerance radius; distance mode bins by ||h|| into
// half-open intervals.
struct LagBinning {
  enum class Mode { vector_lags, distance };

  Mode mode = Mode::vector_lags;
  Eigen::MatrixXd centers;    // vector mode: B x d
  double tol = 0.0;           // vector mode assignment radius
  std::vector<double> edges;  // distance mode: ascending edges

  int bins() const {
    return mode == Mode::vector_lags
               ? static_cast<int>(centers.rows())
               : static_cast<int>(edges.size()) - 1;
  }

  // bin index for the ordered lag h, or -1 when the pair is unused
  int assign(const Eigen::VectorXd& h) const {
    if (mode == Mode::vector_lags) {
      int best = -1;
      double bd = tol * tol;
      for (int b = 0; b < centers.rows(); ++b) {
        const double d = (centers.row(b).transpose() - h).squaredNorm();
        if (d <= bd) {
          bd = d;
          best = b;
        }
      }
      return best;
    }
    const double r = h.norm();
    for (int b = 0; b + 1 < static_cast<int>(edges.size()); ++b)
      if (r >= edges[b] && r < edges[b + 1]) return b;
    return -1;
  }

  // reporting coordinate of a bin: the lag vector, or the interval midpoint
  Eigen::VectorXd representative(int b, int dim) const {
    if (mode == Mode::vector_lags) return centers.row(b).transpose();
    Eigen::VectorXd r = Eigen::VectorXd::Zero(dim);
    r[0] = 0.5 * (edges[b] + edges[b + 1]);
    return r;
  }

  // one bin per distinct lag vector present in the design
  static LagBinning exact(const SpatialDesign& design, double snap = 1e-9) {
    std::vector<Eigen::VectorXd> lags;
    for (int k = 0; k < design.n(); ++k)
      for (int l = 0; l < design.n(); ++l) {
        const Eigen::VectorXd h = (design.sites.row(k) - design.sites.row(l)).transpose();
        bool found = false;
        for (const auto& c : lags)
          if ((c - h).norm() <= snap) {
            found = true;
            break;
          }
        if (!found) lags.push_back(h);
      }
    LagBinning b;
    b.mode = Mode::vector_lags;
    b.tol = snap;
    b.centers.resize(static_cast<int>(lags.size()), design.dim());
    for (int i = 0; i < static_cast<int>(lags.size()); ++i)
      b.centers.row(i) = lags[i].transpose();
    return b;
  }

  static LagBinning vector_centers(Eigen::MatrixXd centers, double tol) {
    if (!(tol > 0)) throw std::invalid_argument("LagBinning: tolerance must be > 0");
    LagBinning b;
    b.mode = Mode::vector_lags;
    b.centers = std::move(centers);
    b.tol = tol;
    return b;
  }

  static LagBinning distance_bins(double max_dist, int count) {
    if (count < 1 || !(max_dist > 0))
      throw std::invalid_argument("LagBinning: need positive bin count and range");
    LagBinning b;
    b.mode = Mode::distance;
    b.edges.resize(count + 1);
    for (int i = 0; i <= count; ++i) b.edges[i] = max_dist * i / count;
    b.edges.back() = std::nextafter(b.edges.back(), std::numeric_limits<double>::infinity());
    return b;
  }

  // one bin per distinct pair distance in the design (good for grids)
  static LagBinning distance_exact(const SpatialDesign& design,
                                   double snap = 1e-9) {
    std::vector<double> ds;
    for (int k = 0; k < design.n(); ++k)
      for (int l = 0; l < design.n(); ++l) {
        const double r = design.distance(k, l);
        bool found = false;
        for (double d : ds)
          if (std::abs(d - r) <= snap) {
            found = true;
            break;
          }
        if (!found) ds.push_back(r);
      }
    std::sort(ds.begin(), ds.end());
    LagBinning b;
    b.mode = Mode::distance;
    b.edges.reserve(ds.size() + 1);
    b.edges.push_back(0.0);
    for (std::size_t i = 0; i + 1 < ds.size(); ++i)
      b.edges.push_back(0.5 * (ds[i] + ds[i + 1]));
    b.edges.push_back(ds.back() + snap);
    return b;
  }
};

struct BinEstimate {
  Eigen::VectorXd lag;      // representative lag (vector or distance midpoint)
  long pair_count = 0;      // ordered site pairs assigned to the bin
  bool empty = true;        // no usable data landed in the bin
  Eigen::MatrixXd value;    // p x p estimate; NaN where no data
  Eigen::MatrixXd terms;    // p x p count of (pair, replication) terms used
};

using EmpiricalTable = std::vector<BinEstimate>;

namespace detail {

inline void center_reps(std::vector<Eigen::MatrixXd>& reps) {
  for (auto& r : reps) {
    for (int i = 0; i < r.cols(); ++i) {
      double s = 0.0;
      long m = 0;
      for (int k = 0; k < r.rows(); ++k)
        if (!std::isnan(r(k, i))) {
          s += r(k, i);
          ++m;
        }
      if (m == 0) continue;
      const double mean = s / m;
      for (int k = 0; k < r.rows(); ++k)
        if (!std::isnan(r(k, i))) r(k, i) -= mean;
    }
  }
}

struct PairAssignment {
  std::vector<std::vector<std::pair<int, int>>> pairs;  // per bin, ordered (k, l)
  std::vector<double> mean_dist;                        // per bin, over its pairs
};

inline PairAssignment assign_pairs(const SpatialDesign& design,
                                   const LagBinning& binning) {
  PairAssignment pa;
  pa.pairs.resize(binning.bins());
  pa.mean_dist.assign(binning.bins(), 0.0);
  for (int k = 0; k < design.n(); ++k)
    for (int l = 0; l < design.n(); ++l) {
      const Eigen::VectorXd h =
          (design.sites.row(k) - design.sites.row(l)).transpose();
      const int b = binning.assign(h);
      if (b >= 0) {
        pa.pairs[b].push_back({k, l});
        pa.mean_dist[b] += h.norm();
      }
    }
  for (int b = 0; b < binning.bins(); ++b)
    if (!pa.pairs[b].empty()) pa.mean_dist[b] /= static_cast<double>(pa.pairs[b].size());
  return pa;
}

// distance-mode bins report the mean pair distance rather than the interval
// midpoint
inline void set_bin_lag(BinEstimate& out, const LagBinning& binning,
                        const PairAssignment& pa, int b, int dim) {
  out.lag = binning.representative(b, dim);
  if (binning.mode == LagBinning::Mode::distance && !pa.pairs[b].empty())
    out.lag[0] = pa.mean_dist[b];
}

}  // namespace detail

// Per-bin average of (Z(s_k) - Zbar)(Z(s_l) - Zbar)^T over the ordered pairs
// assigned to the bin; per-replication estimates are averaged with equal
// weight. Set pre_centered for residual inputs that are already mean zero.
inline EmpiricalTable empirical_cross_cov(const FieldSample& sample,
                                          const LagBinning& binning,
                                          bool pre_centered = false) {
  sample.check_consistent();
  if (sample.n() < 2)
    throw std::invalid_argument("empirical_cross_cov: need at least two sites");
  const int p = sample.p();
  auto reps = sample.reps;
  if (!pre_centered) detail::center_reps(reps);
  const auto pa = detail::assign_pairs(sample.design, binning);

  EmpiricalTable table(binning.bins());
  for (int b = 0; b < binning.bins(); ++b) {
    auto& out = table[b];
    detail::set_bin_lag(out, binning, pa, b, sample.design.dim());
    out.pair_count = static_cast<long>(pa.pairs[b].size());
    out.value = Eigen::MatrixXd::Constant(p, p, std::nan(""));
    out.terms = Eigen::MatrixXd::Zero(p, p);
    if (pa.pairs[b].empty()) continue;
    Eigen::MatrixXd mean_of_reps = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd rep_counts = Eigen::MatrixXd::Zero(p, p);
    for (const auto& r : reps) {
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
      Eigen::MatrixXd cnt = Eigen::MatrixXd::Zero(p, p);
      for (const auto& [k, l] : pa.pairs[b])
        for (int i = 0; i < p; ++i) {
          if (std::isnan(r(k, i))) continue;
          for (int j = 0; j < p; ++j) {
            if (std::isnan(r(l, j))) continue;
            acc(i, j) += r(k, i) * r(l, j);
            cnt(i, j) += 1.0;
          }
        }
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
          if (cnt(i, j) > 0) {
            mean_of_reps(i, j) += acc(i, j) / cnt(i, j);
            rep_counts(i, j) += 1.0;
            out.terms(i, j) += cnt(i, j);
          }
    }
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j)
        if (rep_counts(i, j) > 0) {
          out.value(i, j) = mean_of_reps(i, j) / rep_counts(i, j);
          out.empty = false;
        }
  }
  return table;
}

// Per-bin average of {Z_i(s_k) - Z_i(s_l)}{Z_j(s_k) - Z_j(s_l)}; pairs where
// either variable is missing at either site are excluded.
inline EmpiricalTable cross_variogram(const FieldSample& sample,
                                      const LagBinning& binning) {
  sample.check_consistent();
  if (sample.n() < 2)
    throw std::invalid_argument("cross_variogram: need at least two sites");
  const int p = sample.p();
  const auto pa = detail::assign_pairs(sample.design, binning);

  EmpiricalTable table(binning.bins());
  long used_total = 0;
  for (int b = 0; b < binning.bins(); ++b) {
    auto& out = table[b];
    detail::set_bin_lag(out, binning, pa, b, sample.design.dim());
    out.pair_count = static_cast<long>(pa.pairs[b].size());
    out.value = Eigen::MatrixXd::Constant(p, p, std::nan(""));
    out.terms = Eigen::MatrixXd::Zero(p, p);
    if (pa.pairs[b].empty()) continue;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
    for (const auto& r : sample.reps)
      for (const auto& [k, l] : pa.pairs[b])
        for (int i = 0; i < p; ++i) {
          if (std::isnan(r(k, i)) || std::isnan(r(l, i))) continue;
          const double di = r(k, i) - r(l, i);
          for (int j = 0; j < p; ++j) {
            if (std::isnan(r(k, j)) || std::isnan(r(l, j))) continue;
            acc(i, j) += di * (r(k, j) - r(l, j));
            out.terms(i, j) += 1.0;
          }
        }
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j)
        if (out.terms(i, j) > 0) {
          out.value(i, j) = acc(i, j) / out.terms(i, j);
          out.empty = false;
          used_total += static_cast<long>(out.terms(i, j));
        }
  }
  if (used_total == 0)
    throw std::invalid_argument(
        "cross_variogram: no co-located pairs available (variables never observed at the same sites)");
  return table;
}

// Per-bin average of {Z_i(s_k) - Z_j(s_l)}^2 on per-replication centered
// data; needs only Z_i at s_k and Z_j at s_l, so disjoint observation site
// sets per variable are fine.
inline EmpiricalTable pseudo_cross_variogram(const FieldSample& sample,
                                             const LagBinning& binning,
                                             bool pre_centered = false) {
  sample.check_consistent();
  if (sample.n() < 2)
    throw std::invalid_argument("pseudo_cross_variogram: need at least two sites");
  const int p = sample.p();
  auto reps = sample.reps;
  if (!pre_centered) detail::center_reps(reps);
  const auto pa = detail::assign_pairs(sample.design, binning);

  EmpiricalTable table(binning.bins());
  long used_total = 0;
  for (int b = 0; b < binning.bins(); ++b) {
    auto& out = table[b];
    detail::set_bin_lag(out, binning, pa, b, sample.design.dim());
    out.pair_count = static_cast<long>(pa.pairs[b].size());
    out.value = Eigen::MatrixXd::Constant(p, p, std::nan(""));
    out.terms = Eigen::MatrixXd::Zero(p, p);
    if (pa.pairs[b].empty()) continue;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
    for (const auto& r : reps)
      for (const auto& [k, l] : pa.pairs[b])
        for (int i = 0; i < p; ++i) {
          if (std::isnan(r(k, i))) continue;
          for (int j = 0; j < p; ++j) {
            if (std::isnan(r(l, j))) continue;
            const double d = r(k, i) - r(l, j);
            acc(i, j) += d * d;
            out.terms(i, j) += 1.0;
          }
        }
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j)
        if (out.terms(i, j) > 0) {
          out.value(i, j) = acc(i, j) / out.terms(i, j);
          out.empty = false;
          used_total += static_cast<long>(out.terms(i, j));
        }
  }
  if (used_total == 0)
    throw std::invalid_argument("pseudo_cross_variogram: no usable pairs");
  return table;
}

// Kernel-smoothed estimate at the location pair (x, y): weighted average of
// Z_i(s_k) Z_j(s_l) with weights K_lambda(||x - s_k||) K_lambda(||y - s_l||).
// The input is treated as mean zero unless center_first is set.
inline Eigen::MatrixXd kernel_cross_cov(const FieldSample& sample,
                                        double lambda,
                                        const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y,
                                        bool center_first = false) {
  sample.check_consistent();
  if (!(lambda > 0))
    throw std::domain_error("kernel_cross_cov: bandwidth must be > 0");
  if (x.size() != sample.design.dim() || y.size() != sample.design.dim())
    throw std::invalid_argument("kernel_cross_cov: location dimension mismatch");
  const int n = sample.n(), p = sample.p();
  auto reps = sample.reps;
  if (center_first) detail::center_reps(reps);

  Eigen::VectorXd wx(n), wy(n);
  for (int k = 0; k < n; ++k) {
    wx[k] = smoothing_kernel((x - sample.design.site(k)).norm(), lambda);
    wy[k] = smoothing_kernel((y - sample.design.site(k)).norm(), lambda);
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd rep_counts = Eigen::MatrixXd::Zero(p, p);
  for (const auto& r : reps) {
    Eigen::MatrixXd num = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd den = Eigen::MatrixXd::Zero(p, p);
    for (int k = 0; k < n; ++k) {
      if (wx[k] == 0.0) continue;
      for (int l = 0; l < n; ++l) {
        const double w = wx[k] * wy[l];
        if (w == 0.0) continue;
        for (int i = 0; i < p; ++i) {
          if (std::isnan(r(k, i))) continue;
          for (int j = 0; j < p; ++j) {
            if (std::isnan(r(l, j))) continue;
            num(i, j) += w * r(k, i) * r(l, j);
            den(i, j) += w;
          }
        }
      }
    }
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j)
        if (den(i, j) > 0) {
          out(i, j) += num(i, j) / den(i, j);
          rep_counts(i, j) += 1.0;
        }
  }
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) {
      if (!(rep_counts(i, j) > 0))
        throw std::runtime_error(
            "kernel_cross_cov: total kernel weight is zero; increase the bandwidth");
      out(i, j) /= rep_counts(i, j);
    }
  return out;
}

}  // namespace mvcov
