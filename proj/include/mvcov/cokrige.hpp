#pragma once

// Simple (mean-zero) co-kriging with predictive variances, the closed-form
// Gaussian CRPS, and the hold-out cross-validation harness.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvcov/design.hpp"
#include "mvcov/gaussian.hpp"
#include "mvcov/models.hpp"

namespace mvcov {

struct CokrigeOptions {
  // predict the noisy observable (prior variance includes the nugget);
  // switch off to predict the latent smooth process
  bool predict_observable = true;
  JitterPolicy jitter;
};

// Predictions for every variable at every target site, site-major ordering
// (index = target_site * p + variable), one column per replication.
struct PredictionResult {
  SpatialDesign targets;
  int p = 0;
  Eigen::MatrixXd mean;      // (q*p) x T
  Eigen::MatrixXd variance;  // (q*p) x T (columns differ only under missing data)

  int index(int site, int var) const { return site * p + var; }
};

inline PredictionResult cokrige(const CrossCovModel& model,
                                const SpatialDesign& obs_design,
                                const FieldSample& obs_values,
                                const SpatialDesign& target_design,
                                const CokrigeOptions& options = {}) {
  obs_values.check_consistent();
  if (obs_design.n() != obs_values.n())
    throw std::invalid_argument("cokrige: observation design/value mismatch");
  if (obs_design.dim() != model.dimension() ||
      target_design.dim() != model.dimension())
    throw std::invalid_argument("cokrige: design dimension mismatch");
  const int p = model.num_variables();
  if (obs_values.p() != p)
    throw std::invalid_argument("cokrige: variable count mismatch");
  const int q = target_design.n();
  const int t_count = obs_values.t_count();

  const JointCovariance jc = assemble_sigma(model, obs_design);

  // cross-covariances between every observation entry and every target entry
  // (no nugget: a prediction is a new draw at the target location)
  const int no = obs_design.n() * p;
  const int nq = q * p;
  Eigen::MatrixXd cross(no, nq);
  for (int k = 0; k < obs_design.n(); ++k) {
    const Eigen::VectorXd sk = obs_design.site(k);
    for (int t = 0; t < q; ++t) {
      const Eigen::VectorXd st = target_design.site(t);
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
          cross(k * p + i, t * p + j) = model.smooth_eval(i, j, sk, st);
    }
  }
  Eigen::VectorXd prior(nq);
  for (int t = 0; t < q; ++t) {
    const Eigen::VectorXd st = target_design.site(t);
    for (int j = 0; j < p; ++j) {
      double v = model.smooth_eval(j, j, st, st);
      if (options.predict_observable) v += model.nugget(j, st);
      prior[t * p + j] = v;
    }
  }

  PredictionResult out;
  out.targets = target_design;
  out.p = p;
  out.mean.resize(nq, t_count);
  out.variance.resize(nq, t_count);

  // factor once per distinct missingness pattern
  std::map<std::vector<int>, std::vector<int>> patterns;
  for (int t = 0; t < t_count; ++t)
    patterns[detail::observed_indices(obs_values.reps[t])].push_back(t);

  for (const auto& [idx, ts] : patterns) {
    const int m = static_cast<int>(idx.size());
    if (m == 0)
      throw std::invalid_argument("cokrige: a replication has no observations");
    JointCovariance sub;
    sub.p = 1;
    sub.design.sites = Eigen::MatrixXd::Zero(m, 1);
    sub.sigma.resize(m, m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) sub.sigma(a, b) = jc.sigma(idx[a], idx[b]);
    factorize(sub, options.jitter);
    if ((sub.chol.diagonal().array() <= 0.0).any())
      throw std::runtime_error("cokrige: singular observation covariance");

    Eigen::MatrixXd cross_sub(m, nq);
    for (int a = 0; a < m; ++a) cross_sub.row(a) = cross.row(idx[a]);
    // weights W = Sigma_obs^{-1} C_cross via two triangular solves
    const Eigen::MatrixXd half =
        sub.chol.triangularView<Eigen::Lower>().solve(cross_sub);
    const Eigen::MatrixXd weights =
        sub.chol.transpose().triangularView<Eigen::Upper>().solve(half);

    Eigen::VectorXd var(nq);
    for (int c = 0; c < nq; ++c)
      var[c] = std::max(0.0, prior[c] - half.col(c).squaredNorm());

    Eigen::VectorXd z(m);
    for (int t : ts) {
      const auto& rep = obs_values.reps[t];
      for (int a = 0; a < m; ++a) z[a] = rep(idx[a] / p, idx[a] % p);
      out.mean.col(t) = weights.transpose() * z;
      out.variance.col(t) = var;
    }
  }
  return out;
}

// Closed-form CRPS of a normal predictive distribution N(mu, sigma^2) at the
// outcome y; sigma = 0 degenerates to the absolute error.
inline double crps_gaussian(double mu, double sigma, double y) {
  if (!(sigma >= 0.0)) throw std::domain_error("crps_gaussian: sigma must be >= 0");
  if (sigma == 0.0) return std::abs(y - mu);
  const double z = (y - mu) / sigma;
  const double cdf = 0.5 * std::erfc(-z / M_SQRT2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  return sigma * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::sqrt(M_PI));
}

struct VariableScore {
  int variable = 0;
  double rmse = 0.0;
  double crps = 0.0;
  long count = 0;  // scored (site, replication, repeat) triples
};

struct ScoreTable {
  std::string model_name;
  int repeats = 0;
  std::uint64_t seed = 0;
  double holdout_fraction = 0.0;
  std::vector<VariableScore> scores;  // averaged over repeats

  double mean_crps() const {
    double s = 0.0;
    for (const auto& v : scores) s += v.crps;
    return scores.empty() ? 0.0 : s / scores.size();
  }
  double mean_rmse() const {
    double s = 0.0;
    for (const auto& v : scores) s += v.rmse;
    return scores.empty() ? 0.0 : s / scores.size();
  }
};

// Repeatedly holds out a random fraction of sites (the same sites across all
// replications), predicts them from the retained sites with the given
// model's parameters, and scores RMSE and mean CRPS per variable. Scores are
// averaged over repeats; deterministic under the seed.
inline ScoreTable cross_validate(const CrossCovModel& model,
                                 const FieldSample& sample,
                                 double holdout_fraction, int repeats,
                                 std::uint64_t seed,
                                 const CokrigeOptions& options = {}) {
  sample.check_consistent();
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw std::invalid_argument("cross_validate: holdout_fraction must be in (0, 1)");
  if (repeats < 1)
    throw std::invalid_argument("cross_validate: repeats must be >= 1");
  const int n = sample.n(), p = sample.p();
  const int hold = std::max(1, static_cast<int>(std::lround(holdout_fraction * n)));
  if (hold >= n)
    throw std::invalid_argument("cross_validate: degenerate split leaves no retained sites");

  std::mt19937_64 rng(seed);
  // per-repeat scores, averaged at the end (each repeat scores over all
  // held-out locations and replications)
  std::vector<double> rmse_sum(p, 0.0), crps_sum(p, 0.0);
  std::vector<long> repeats_used(p, 0), cnt(p, 0);

  for (int rep = 0; rep < repeats; ++rep) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> held(order.begin(), order.begin() + hold);
    std::vector<int> kept(order.begin() + hold, order.end());

    SpatialDesign obs_design, tgt_design;
    obs_design.has_time = tgt_design.has_time = sample.design.has_time;
    obs_design.sites.resize(static_cast<int>(kept.size()), sample.design.dim());
    tgt_design.sites.resize(static_cast<int>(held.size()), sample.design.dim());
    for (std::size_t a = 0; a < kept.size(); ++a)
      obs_design.sites.row(a) = sample.design.sites.row(kept[a]);
    for (std::size_t a = 0; a < held.size(); ++a)
      tgt_design.sites.row(a) = sample.design.sites.row(held[a]);

    FieldSample obs;
    obs.design = obs_design;
    for (const auto& r : sample.reps) {
      Eigen::MatrixXd o(static_cast<int>(kept.size()), p);
      for (std::size_t a = 0; a < kept.size(); ++a) o.row(a) = r.row(kept[a]);
      obs.reps.push_back(std::move(o));
    }

    const PredictionResult pred = cokrige(model, obs_design, obs, tgt_design, options);
    std::vector<double> sq(p, 0.0), cr(p, 0.0);
    std::vector<long> m(p, 0);
    for (int t = 0; t < sample.t_count(); ++t)
      for (std::size_t a = 0; a < held.size(); ++a)
        for (int j = 0; j < p; ++j) {
          const double truth = sample.reps[t](held[a], j);
          if (std::isnan(truth)) continue;
          const int row = pred.index(static_cast<int>(a), j);
          const double e = pred.mean(row, t) - truth;
          sq[j] += e * e;
          cr[j] += crps_gaussian(pred.mean(row, t),
                                 std::sqrt(pred.variance(row, t)), truth);
          m[j] += 1;
        }
    for (int j = 0; j < p; ++j)
      if (m[j] > 0) {
        rmse_sum[j] += std::sqrt(sq[j] / m[j]);
        crps_sum[j] += cr[j] / m[j];
        repeats_used[j] += 1;
        cnt[j] += m[j];
      }
  }

  ScoreTable table;
  table.model_name = model.family();
  table.repeats = repeats;
  table.seed = seed;
  table.holdout_fraction = holdout_fraction;
  for (int j = 0; j < p; ++j) {
    VariableScore vs;
    vs.variable = j;
    vs.count = cnt[j];
    if (repeats_used[j] > 0) {
      vs.rmse = rmse_sum[j] / repeats_used[j];
      vs.crps = crps_sum[j] / repeats_used[j];
    }
    table.scores.push_back(vs);
  }
  return table;
}

}  // namespace mvcov
