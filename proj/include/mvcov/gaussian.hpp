#pragma once

// Joint covariance assembly, Cholesky factorization with an explicit jitter
// ladder, exact simulation, and the mean-zero Gaussian log-likelihood with
// independent replications.
//
// Ordering convention used everywhere: site-major, variable-minor; the joint
// index of variable i at site k is k*p + i.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvcov/design.hpp"
#include "mvcov/models.hpp"
#include "mvcov/threading.hpp"

namespace mvcov {

struct JointCovariance {
  SpatialDesign design;
  int p = 0;
  Eigen::MatrixXd sigma;  // np x np

  // populated by factorize()
  bool factorized = false;
  Eigen::MatrixXd chol;  // lower factor L with L L^T = sigma + jitter I
  double logdet = std::numeric_limits<double>::quiet_NaN();
  double jitter = 0.0;

  int joint_size() const { return design.n() * p; }
  int index(int site, int var) const { return site * p + var; }
};

inline JointCovariance assemble_sigma(const CrossCovModel& model,
                                      const SpatialDesign& design,
                                      int threads = 1) {
  if (design.dim() != model.dimension())
    throw std::invalid_argument("assemble_sigma: design dimension " +
                                std::to_string(design.dim()) +
                                " does not match model dimension " +
                                std::to_string(model.dimension()));
  const int n = design.n();
  const int p = model.num_variables();
  JointCovariance jc;
  jc.design = design;
  jc.p = p;
  jc.sigma.resize(n * p, n * p);

  if (model.isotropic()) {
    // evaluate each variable pair once per distinct distance
    std::map<double, std::vector<std::pair<int, int>>> by_dist;
    for (int k = 0; k < n; ++k)
      for (int l = k; l < n; ++l)
        by_dist[design.distance(k, l)].push_back({k, l});
    std::vector<std::pair<const double, std::vector<std::pair<int, int>>>*>
        groups;
    groups.reserve(by_dist.size());
    for (auto& kv : by_dist) groups.push_back(&kv);
    parallel_for(static_cast<long>(groups.size()), threads, [&](long g) {
      const double r = groups[g]->first;
      Eigen::MatrixXd block(p, p);
      for (int i = 0; i < p; ++i)
        for (int j = i; j < p; ++j) {
          block(i, j) = model.smooth_iso(i, j, r);
          block(j, i) = block(i, j);
        }
      for (const auto& [k, l] : groups[g]->second) {
        jc.sigma.block(k * p, l * p, p, p) = block;
        if (l != k) jc.sigma.block(l * p, k * p, p, p) = block.transpose();
      }
    });
  } else {
    parallel_for(n, threads, [&](long k) {
      const Eigen::VectorXd sk = design.site(static_cast<int>(k));
      for (int l = static_cast<int>(k); l < n; ++l) {
        const Eigen::VectorXd sl = design.site(l);
        for (int i = 0; i < p; ++i)
          for (int j = 0; j < p; ++j) {
            if (l == static_cast<int>(k) && j < i) continue;
            const double c = model.smooth_eval(i, j, sk, sl);
            jc.sigma(k * p + i, l * p + j) = c;
            jc.sigma(l * p + j, k * p + i) = c;
          }
      }
    });
  }

  // nuggets enter on the diagonal only (exact co-location of a variable
  // with itself); repeated sites in the design stay nugget-free off-diagonal,
  // matching distinct measurements at one location
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd sk = design.site(k);
    for (int i = 0; i < p; ++i) jc.sigma(k * p + i, k * p + i) += model.nugget(i, sk);
  }
  return jc;
}

struct JitterPolicy {
  // relative to the mean diagonal, tried in order until the factorization
  // succeeds
  std::vector<double> steps{0.0, 1e-10, 1e-8, 1e-6};
};

namespace detail {

// Reference unblocked Cholesky that tolerates exactly semidefinite input
// (zero rows/columns). Returns the failing pivot, or -1 on success.
inline int psd_cholesky(const Eigen::MatrixXd& a, Eigen::MatrixXd& l) {
  const int n = static_cast<int>(a.rows());
  const double scale = std::max(a.diagonal().maxCoeff(), 0.0);
  l = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (d <= 0.0) {
      if (d >= -1e-14 * std::max(scale, 1.0)) {
        // semidefinite pivot: admissible only if the rest of the column
        // vanishes as well
        bool zero_col = true;
        for (int i = j + 1; i < n && zero_col; ++i) {
          const double off = a(i, j) - l.row(i).head(j).dot(l.row(j).head(j));
          if (std::abs(off) > 1e-12 * std::max(scale, 1.0)) zero_col = false;
        }
        if (zero_col) {
          l(j, j) = 0.0;
          continue;
        }
      }
      return j;
    }
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
  }
  return -1;
}

}  // namespace detail

// Factorizes sigma + eps*I, escalating eps over the jitter ladder. The
// applied jitter is recorded on the JointCovariance.
inline void factorize(JointCovariance& jc, const JitterPolicy& policy = {}) {
  const int m = jc.joint_size();
  if (jc.sigma.rows() != m || jc.sigma.cols() != m)
    throw std::invalid_argument("factorize: sigma not assembled");
  const double mean_diag = jc.sigma.diagonal().mean();
  for (double step : policy.steps) {
    const double eps = step * mean_diag;
    Eigen::MatrixXd shifted = jc.sigma;
    shifted.diagonal().array() += eps;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success) {
      jc.chol = llt.matrixL();
      jc.logdet = 2.0 * jc.chol.diagonal().array().log().sum();
      jc.jitter = eps;
      jc.factorized = true;
      return;
    }
  }
  // exactly semidefinite matrices (e.g. a zero variance scale) are handled
  // by the reference routine; otherwise report the offending pivot
  Eigen::MatrixXd l;
  const int pivot = detail::psd_cholesky(jc.sigma, l);
  if (pivot < 0) {
    jc.chol = std::move(l);
    // a zero pivot means the factor is singular (no finite logdet)
    if ((jc.chol.diagonal().array() <= 0.0).any())
      jc.logdet = -std::numeric_limits<double>::infinity();
    else
      jc.logdet = 2.0 * jc.chol.diagonal().array().log().sum();
    jc.jitter = 0.0;
    jc.factorized = true;
    return;
  }
  std::ostringstream os;
  os << "factorize: matrix is not nonnegative definite (pivot " << pivot
     << " = site " << pivot / jc.p << ", variable " << pivot % jc.p
     << " failed after jitter escalation)";
  throw std::runtime_error(os.str());
}

// T independent mean-zero draws z_t = L w_t; bit-reproducible under a fixed
// seed on a given platform.
inline FieldSample simulate(const CrossCovModel& model,
                            const SpatialDesign& design, int t_count,
                            std::uint64_t seed, int threads = 1) {
  if (t_count < 1)
    throw std::invalid_argument("simulate: replication count must be >= 1");
  JointCovariance jc = assemble_sigma(model, design, threads);
  factorize(jc);
  const int n = design.n(), p = model.num_variables();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  FieldSample out;
  out.design = design;
  out.reps.reserve(t_count);
  Eigen::VectorXd w(n * p);
  for (int t = 0; t < t_count; ++t) {
    for (int idx = 0; idx < n * p; ++idx) w[idx] = gauss(rng);
    const Eigen::VectorXd z = jc.chol * w;
    Eigen::MatrixXd rep(n, p);
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < p; ++i) rep(k, i) = z[k * p + i];
    out.reps.push_back(std::move(rep));
  }
  return out;
}

struct LogLikResult {
  double value = -std::numeric_limits<double>::infinity();
  bool ok = false;
  double jitter = 0.0;
  std::string note;
};

namespace detail {

// canonical site order: lexicographic in the coordinates (stable), so the
// likelihood value does not depend on how the caller ordered the sites
inline std::vector<int> canonical_order(const Eigen::MatrixXd& sites) {
  std::vector<int> order(sites.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    for (int c = 0; c < sites.cols(); ++c) {
      if (sites(a, c) < sites(b, c)) return true;
      if (sites(a, c) > sites(b, c)) return false;
    }
    return false;
  });
  return order;
}

// indices of observed (site-major) entries for one replication
inline std::vector<int> observed_indices(const Eigen::MatrixXd& rep) {
  std::vector<int> idx;
  for (int k = 0; k < rep.rows(); ++k)
    for (int i = 0; i < rep.cols(); ++i)
      if (!std::isnan(rep(k, i))) idx.push_back(k * static_cast<int>(rep.cols()) + i);
  return idx;
}

}  // namespace detail

// l = -(T/2)(np log 2pi + logdet Sigma) - 1/2 sum_t z_t^T Sigma^{-1} z_t.
// Replications with missing entries are handled by factoring each distinct
// missingness pattern once. Returns a -inf sentinel when Sigma cannot be
// factorized so optimizers can reject the parameter point.
inline LogLikResult loglik(const CrossCovModel& model,
                           const FieldSample& sample, int threads = 1) {
  sample.check_consistent();
  if (sample.t_count() < 1)
    throw std::invalid_argument("loglik: sample has no replications");
  const auto order = detail::canonical_order(sample.design.sites);
  SpatialDesign design;
  design.has_time = sample.design.has_time;
  design.sites.resize(sample.design.n(), sample.design.dim());
  for (int k = 0; k < sample.design.n(); ++k)
    design.sites.row(k) = sample.design.sites.row(order[k]);

  const int p = sample.p();
  std::vector<Eigen::MatrixXd> reps;
  reps.reserve(sample.t_count());
  for (const auto& r : sample.reps) {
    Eigen::MatrixXd rr(r.rows(), r.cols());
    for (int k = 0; k < r.rows(); ++k) rr.row(k) = r.row(order[k]);
    reps.push_back(std::move(rr));
  }

  LogLikResult res;
  JointCovariance jc;
  try {
    jc = assemble_sigma(model, design, threads);
  } catch (const std::exception& e) {
    res.note = e.what();
    return res;
  }

  // group replications by missingness pattern
  std::map<std::vector<int>, std::vector<int>> patterns;
  for (int t = 0; t < static_cast<int>(reps.size()); ++t)
    patterns[detail::observed_indices(reps[t])].push_back(t);

  constexpr double log2pi = 1.8378770664093454836;
  double total = 0.0;
  double max_jitter = 0.0;
  for (const auto& [idx, ts] : patterns) {
    if (idx.empty()) continue;  // fully missing replication contributes nothing
    const int m = static_cast<int>(idx.size());
    JointCovariance sub;
    sub.p = 1;  // pattern indices are already flattened
    sub.design.sites.resize(m, 1);
    sub.sigma.resize(m, m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) sub.sigma(a, b) = jc.sigma(idx[a], idx[b]);
    try {
      factorize(sub);
    } catch (const std::exception& e) {
      res.note = e.what();
      res.value = -std::numeric_limits<double>::infinity();
      return res;
    }
    if (std::isinf(sub.logdet)) {
      res.note = "singular covariance";
      res.value = -std::numeric_limits<double>::infinity();
      return res;
    }
    max_jitter = std::max(max_jitter, sub.jitter);
    Eigen::VectorXd z(m);
    for (int t : ts) {
      for (int a = 0; a < m; ++a) z[a] = reps[t](idx[a] / p, idx[a] % p);
      const Eigen::VectorXd w =
          sub.chol.triangularView<Eigen::Lower>().solve(z);
      total += -0.5 * (m * log2pi + sub.logdet) - 0.5 * w.squaredNorm();
    }
  }
  res.value = total;
  res.jitter = max_jitter;
  res.ok = true;
  return res;
}

// ---------------------------------------------------------------------------
// binary debug dump of Sigma (and L when factorized): little-endian, 8-byte
// IEEE doubles, row-major, preceded by a fixed header

inline constexpr char kSigmaDumpMagic[8] = {'M', 'V', 'C', 'O', 'V', 'S', 'I', 'G'};
inline constexpr char kOrderingTag[16] = "site-major\0\0\0\0\0";

inline void write_sigma_dump(const JointCovariance& jc, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_sigma_dump: cannot open " + path);
  f.write(kSigmaDumpMagic, 8);
  const std::uint32_t version = 1;
  const std::uint32_t flags = jc.factorized ? 1u : 0u;
  const std::uint64_t n = static_cast<std::uint64_t>(jc.design.n());
  const std::uint64_t p = static_cast<std::uint64_t>(jc.p);
  f.write(reinterpret_cast<const char*>(&version), 4);
  f.write(reinterpret_cast<const char*>(&flags), 4);
  f.write(reinterpret_cast<const char*>(&n), 8);
  f.write(reinterpret_cast<const char*>(&p), 8);
  f.write(kOrderingTag, 16);
  const auto write_mat = [&](const Eigen::MatrixXd& m) {
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) {
        const double v = m(r, c);
        f.write(reinterpret_cast<const char*>(&v), 8);
      }
  };
  write_mat(jc.sigma);
  if (jc.factorized) write_mat(jc.chol);
  if (!f) throw std::runtime_error("write_sigma_dump: write failed for " + path);
}

inline JointCovariance read_sigma_dump(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_sigma_dump: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (std::memcmp(magic, kSigmaDumpMagic, 8) != 0)
    throw std::runtime_error("read_sigma_dump: bad magic in " + path);
  std::uint32_t version = 0, flags = 0;
  std::uint64_t n = 0, p = 0;
  char tag[16];
  f.read(reinterpret_cast<char*>(&version), 4);
  f.read(reinterpret_cast<char*>(&flags), 4);
  f.read(reinterpret_cast<char*>(&n), 8);
  f.read(reinterpret_cast<char*>(&p), 8);
  f.read(tag, 16);
  if (version != 1) throw std::runtime_error("read_sigma_dump: unsupported version");
  JointCovariance jc;
  jc.p = static_cast<int>(p);
  jc.design.sites = Eigen::MatrixXd::Zero(static_cast<long>(n), 1);
  const long m = static_cast<long>(n * p);
  const auto read_mat = [&](Eigen::MatrixXd& out) {
    out.resize(m, m);
    for (long r = 0; r < m; ++r)
      for (long c = 0; c < m; ++c) {
        double v;
        f.read(reinterpret_cast<char*>(&v), 8);
        out(r, c) = v;
      }
  };
  read_mat(jc.sigma);
  if (flags & 1u) {
    read_mat(jc.chol);
    jc.factorized = true;
    jc.logdet = 2.0 * jc.chol.diagonal().array().log().sum();
  }
  if (!f) throw std::runtime_error("read_sigma_dump: truncated file " + path);
  return jc;
}

}  // namespace mvcov
