#pragma once

// The cross-covariance model zoo: separable, linear model of
// coregionalization, multivariate Matern, latent-dimension, and the
// asymmetry / variance-scaling / tapering / nugget wrappers.
//
// All models are immutable after construction and evaluation is pure, so a
// model may be shared freely across threads.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mvcov/design.hpp"
#include "mvcov/kernels.hpp"

namespace mvcov {

class CrossCovModel;
using ModelPtr = std::shared_ptr<const CrossCovModel>;

class CrossCovModel {
 public:
  virtual ~CrossCovModel() = default;

  virtual int num_variables() const = 0;
  virtual int dimension() const = 0;
  virtual bool stationary() const = 0;
  // depends on the lag only through its norm (enables distance caching)
  virtual bool isotropic() const { return false; }
  virtual std::string family() const = 0;
  // rough correlation length used to scale randomized validation designs
  virtual double char_length() const = 0;

  // covariance of the smooth component, excluding any nugget
  virtual double smooth_eval(int i, int j, const Eigen::VectorXd& s1,
                             const Eigen::VectorXd& s2) const = 0;

  // isotropic fast path; only called when isotropic() is true
  virtual double smooth_iso(int i, int j, double r) const {
    (void)i, (void)j, (void)r;
    throw std::logic_error(family() + ": smooth_iso on a non-isotropic model");
  }

  // nugget variance of variable i at site s (enters only at exact
  // co-location with i == j)
  virtual double nugget(int i, const Eigen::VectorXd& s) const {
    (void)i, (void)s;
    return 0.0;
  }

  // full covariance C_ij(s1, s2), nugget included at exact co-location
  double eval(int i, int j, const Eigen::VectorXd& s1,
              const Eigen::VectorXd& s2) const {
    check_indices(i, j);
    check_site(s1);
    check_site(s2);
    double c = smooth_eval(i, j, s1, s2);
    if (i == j && s1 == s2) c += nugget(i, s1);
    return c;
  }

  void check_indices(int i, int j) const {
    if (i < 0 || j < 0 || i >= num_variables() || j >= num_variables())
      throw std::out_of_range(family() + ": variable index out of range");
  }
  void check_site(const Eigen::VectorXd& s) const {
    if (static_cast<int>(s.size()) != dimension())
      throw std::invalid_argument(family() + ": site dimension mismatch, expected " +
                                  std::to_string(dimension()) + " got " +
                                  std::to_string(s.size()));
  }
};

inline double eval_cross_cov(const CrossCovModel& model, int i, int j,
                             const Eigen::VectorXd& s1,
                             const Eigen::VectorXd& s2) {
  return model.eval(i, j, s1, s2);
}

// Stationary models implement smooth_lag(h); smooth_eval derives from it.
class StationaryModel : public CrossCovModel {
 public:
  bool stationary() const final { return true; }

  virtual double smooth_lag(int i, int j, const Eigen::VectorXd& h) const = 0;

  double smooth_eval(int i, int j, const Eigen::VectorXd& s1,
                     const Eigen::VectorXd& s2) const final {
    return smooth_lag(i, j, s1 - s2);
  }
};

// ---------------------------------------------------------------------------
// validity checking

struct ValidityTrial {
  int n = 0;
  double min_eig = 0.0;
  double mean_diag = 0.0;
  double ratio = 0.0;  // min_eig / mean_diag
};

struct ValidityReport {
  bool pass = false;
  double tolerance = 0.0;    // pass iff ratio >= -tolerance on every trial
  double worst_ratio = 0.0;  // min over trials of min_eig / mean_diag
  std::vector<ValidityTrial> trials;

  std::string summary() const {
    std::ostringstream os;
    os << (pass ? "PASS" : "FAIL") << ": min eigenvalue / mean diagonal = "
       << worst_ratio << " over " << trials.size() << " trial(s), tolerance -"
       << tolerance;
    return os.str();
  }
};

namespace detail {

inline Eigen::MatrixXd dense_sigma(const CrossCovModel& model,
                                   const Eigen::MatrixXd& sites) {
  const int n = static_cast<int>(sites.rows());
  const int p = model.num_variables();
  Eigen::MatrixXd sigma(n * p, n * p);
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd sk = sites.row(k).transpose();
    for (int l = k; l < n; ++l) {
      const Eigen::VectorXd sl = sites.row(l).transpose();
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) {
          if (l == k && j < i) continue;
          double c = model.smooth_eval(i, j, sk, sl);
          if (i == j && sk == sl) c += model.nugget(i, sk);
          sigma(k * p + i, l * p + j) = c;
          sigma(l * p + j, k * p + i) = c;
        }
    }
  }
  return sigma;
}

inline ValidityTrial eig_trial(const CrossCovModel& model,
                               const Eigen::MatrixXd& sites) {
  const Eigen::MatrixXd sigma = dense_sigma(model, sites);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma,
                                                    Eigen::EigenvaluesOnly);
  ValidityTrial t;
  t.n = static_cast<int>(sites.rows());
  t.min_eig = es.eigenvalues().minCoeff();
  t.mean_diag = sigma.trace() / sigma.rows();
  t.ratio = t.mean_diag > 0 ? t.min_eig / t.mean_diag : 0.0;
  return t;
}

inline Eigen::MatrixXd random_sites(int n, int dim, double box,
                                    std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, box);
  Eigen::MatrixXd sites(n, dim);
  for (int k = 0; k < n; ++k)
    for (int ax = 0; ax < dim; ++ax) sites(k, ax) = u(rng);
  return sites;
}

inline Eigen::MatrixXd grid_sites(int target_count, int dim, double spacing) {
  const int side =
      std::max(2, static_cast<int>(std::ceil(std::pow(double(target_count),
                                                      1.0 / dim))));
  std::vector<int> shape(dim, side);
  Eigen::MatrixXd g = SpatialDesign::grid(shape, spacing).sites;
  if (g.rows() > target_count) g.conservativeResize(target_count, dim);
  return g;
}

}  // namespace detail

// Assembles the joint covariance on randomized designs and reports the
// minimum eigenvalue scaled by the mean diagonal. Passes iff
// min_eig >= -tolerance * trace(Sigma)/(np) on every trial.
inline ValidityReport validate_model(const CrossCovModel& model,
                                     const std::vector<int>& design_sizes,
                                     int trials, std::uint64_t seed,
                                     double tolerance = 1e-8) {
  if (trials < 1) throw std::invalid_argument("validate_model: trials must be >= 1");
  std::mt19937_64 rng(seed);
  const double len = std::max(model.char_length(), 1e-12);
  const double box_mults[3] = {1.0, 4.0, 16.0};
  ValidityReport report;
  report.tolerance = tolerance;
  report.worst_ratio = std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    for (int n : design_sizes) {
      const double box = box_mults[t % 3] * len;
      const Eigen::MatrixXd sites =
          detail::random_sites(n, model.dimension(), box, rng);
      report.trials.push_back(detail::eig_trial(model, sites));
      report.worst_ratio = std::min(report.worst_ratio, report.trials.back().ratio);
    }
  }
  report.pass = report.worst_ratio >= -tolerance;
  return report;
}

namespace detail {

// Construction-time nonnegative-definiteness gate. Stricter than
// validate_model (more sites, tighter tolerance) so that anything accepted
// here survives later randomized validation.
inline void require_nonneg_definite(const CrossCovModel& model,
                                    const std::string& what) {
  constexpr double tol = 1e-9;
  const double len = std::max(model.char_length(), 1e-12);
  const int dim = model.dimension();
  std::mt19937_64 rng(0x5eedc0de);
  for (double mult : {0.3, 1.0, 3.0}) {
    const auto t = eig_trial(model, grid_sites(36, dim, mult * len));
    if (t.ratio < -tol)
      throw std::invalid_argument(what + ": fails nonnegative-definiteness check (min eig/mean diag = " +
                                  std::to_string(t.ratio) + " on a grid design)");
  }
  for (double mult : {0.7, 2.5, 10.0}) {
    const auto t = eig_trial(model, random_sites(40, dim, mult * len, rng));
    if (t.ratio < -tol)
      throw std::invalid_argument(what + ": fails nonnegative-definiteness check (min eig/mean diag = " +
                                  std::to_string(t.ratio) + " on a random design)");
  }
}

inline void require_symmetric(const Eigen::MatrixXd& m, const std::string& what) {
  if (m.rows() != m.cols())
    throw std::invalid_argument(what + ": matrix must be square");
  if (!m.isApprox(m.transpose(), 1e-12))
    throw std::invalid_argument(what + ": matrix must be symmetric");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// separable: C_ij(s1, s2) = rho(||s1 - s2||) R_ij

class SeparableModel final : public StationaryModel {
 public:
  SeparableModel(int dim, Correlation rho, Eigen::MatrixXd r_matrix)
      : dim_(dim), rho_(std::move(rho)), r_(std::move(r_matrix)) {
    if (dim_ < 1) throw std::invalid_argument("separable: dimension must be >= 1");
    rho_.validate(dim_);
    detail::require_symmetric(r_, "separable R");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r_, Eigen::EigenvaluesOnly);
    const double tr = r_.trace();
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(tr, 1e-300))
      throw std::invalid_argument("separable R: must be nonnegative definite");
  }

  int num_variables() const override { return static_cast<int>(r_.rows()); }
  int dimension() const override { return dim_; }
  bool isotropic() const override { return true; }
  std::string family() const override { return "separable"; }
  double char_length() const override { return rho_.length_scale(); }

  double smooth_lag(int i, int j, const Eigen::VectorXd& h) const override {
    return smooth_iso(i, j, h.norm());
  }
  double smooth_iso(int i, int j, double r) const override {
    return rho_(r) * r_(i, j);
  }

  const Correlation& rho() const { return rho_; }
  const Eigen::MatrixXd& r_matrix() const { return r_; }

 private:
  int dim_;
  Correlation rho_;
  Eigen::MatrixXd r_;
};

inline ModelPtr make_separable(int dim, Correlation rho, Eigen::MatrixXd r) {
  return std::make_shared<SeparableModel>(dim, std::move(rho), std::move(r));
}

// ---------------------------------------------------------------------------
// linear model of coregionalization: C_ij(h) = sum_k rho_k(h) A_ik A_jk

class LmcModel final : public StationaryModel {
 public:
  LmcModel(int dim, std::vector<Correlation> rhos, Eigen::MatrixXd loadings)
      : dim_(dim), rhos_(std::move(rhos)), a_(std::move(loadings)) {
    if (dim_ < 1) throw std::invalid_argument("lmc: dimension must be >= 1");
    const int p = static_cast<int>(a_.rows());
    const int r = static_cast<int>(a_.cols());
    if (r < 1 || r > p)
      throw std::invalid_argument("lmc: factor count must be in 1..p");
    if (static_cast<int>(rhos_.size()) != r)
      throw std::invalid_argument("lmc: need one correlation per factor");
    for (const auto& rho : rhos_) rho.validate(dim_);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a_);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 1e-10 * sv(0))
      throw std::invalid_argument("lmc: loading matrix must have full column rank");
  }

  int num_variables() const override { return static_cast<int>(a_.rows()); }
  int dimension() const override { return dim_; }
  bool isotropic() const override { return true; }
  std::string family() const override { return "lmc"; }
  double char_length() const override {
    double len = 0.0;
    for (const auto& rho : rhos_) len = std::max(len, rho.length_scale());
    return len;
  }

  double smooth_lag(int i, int j, const Eigen::VectorXd& h) const override {
    return smooth_iso(i, j, h.norm());
  }
  double smooth_iso(int i, int j, double r) const override {
    double c = 0.0;
    for (int k = 0; k < a_.cols(); ++k) c += rhos_[k](r) * a_(i, k) * a_(j, k);
    return c;
  }

  const std::vector<Correlation>& rhos() const { return rhos_; }
  const Eigen::MatrixXd& loadings() const { return a_; }

 private:
  int dim_;
  std::vector<Correlation> rhos_;
  Eigen::MatrixXd a_;
};

inline ModelPtr make_lmc(int dim, std::vector<Correlation> rhos,
                         Eigen::MatrixXd loadings) {
  return std::make_shared<LmcModel>(dim, std::move(rhos), std::move(loadings));
}

// ---------------------------------------------------------------------------
// multivariate Matern:
//   C_ii(h) = sigma_i^2 M(h | nu_i, a_i)
//   C_ij(h) = beta_ij sigma_i sigma_j M(h | nu_ij, a_ij)

class MultiMaternModel final : public StationaryModel {
 public:
  enum class Variant { parsimonious, full_bivariate, independent };

  MultiMaternModel(Variant variant, int dim, Eigen::VectorXd sigma,
                   Eigen::VectorXd nu, Eigen::VectorXd a, double nu_cross,
                   double a_cross, Eigen::MatrixXd beta, bool run_pd_check)
      : variant_(variant),
        dim_(dim),
        sigma_(std::move(sigma)),
        nu_(std::move(nu)),
        a_(std::move(a)),
        nu_cross_(nu_cross),
        a_cross_(a_cross),
        beta_(std::move(beta)) {
    const int p = static_cast<int>(sigma_.size());
    if (dim_ < 1) throw std::invalid_argument("multimatern: dimension must be >= 1");
    if (p < 1) throw std::invalid_argument("multimatern: need at least one variable");
    if (nu_.size() != p)
      throw std::invalid_argument("multimatern: nu must have one entry per variable");
    if ((sigma_.array() <= 0).any())
      throw std::invalid_argument("multimatern: sigma must be positive");
    if ((nu_.array() <= 0).any())
      throw std::invalid_argument("multimatern: nu must be positive");
    if ((a_.array() <= 0).any())
      throw std::invalid_argument("multimatern: a must be positive");
    switch (variant_) {
      case Variant::parsimonious:
        if (a_.size() != 1)
          throw std::invalid_argument("parsimonious multimatern: a must be a single shared scale");
        break;
      case Variant::independent:
        if (a_.size() != p)
          throw std::invalid_argument("independent multimatern: a must have one entry per variable");
        break;
      case Variant::full_bivariate:
        if (p != 2)
          throw std::invalid_argument("full bivariate multimatern: restricted to p = 2");
        if (a_.size() != 2)
          throw std::invalid_argument("full bivariate multimatern: a must have two entries");
        if (!(nu_cross_ > 0) || !(a_cross_ > 0))
          throw std::invalid_argument("full bivariate multimatern: cross parameters must be positive");
        break;
    }
    if (variant_ == Variant::independent) {
      beta_ = Eigen::MatrixXd::Identity(p, p);
    } else {
      detail::require_symmetric(beta_, "multimatern beta");
      if (beta_.rows() != p)
        throw std::invalid_argument("multimatern: beta must be p x p");
      for (int i = 0; i < p; ++i)
        if (beta_(i, i) != 1.0)
          throw std::invalid_argument("multimatern: beta must have unit diagonal");
    }
    if (run_pd_check && variant_ != Variant::independent && p > 1 &&
        beta_ != Eigen::MatrixXd::Identity(p, p))
      detail::require_nonneg_definite(*this, family());
  }

  int num_variables() const override { return static_cast<int>(sigma_.size()); }
  int dimension() const override { return dim_; }
  bool isotropic() const override { return true; }
  std::string family() const override {
    switch (variant_) {
      case Variant::parsimonious: return "multimatern/parsimonious";
      case Variant::full_bivariate: return "multimatern/full_bivariate";
      default: return "multimatern/independent";
    }
  }
  double char_length() const override { return 1.0 / a_.minCoeff(); }

  double marginal_a(int i) const {
    return variant_ == Variant::parsimonious ? a_[0] : a_[i];
  }
  double cross_a(int i, int j) const {
    if (i == j) return marginal_a(i);
    return variant_ == Variant::full_bivariate ? a_cross_ : a_[0];
  }
  double cross_nu(int i, int j) const {
    if (i == j) return nu_[i];
    if (variant_ == Variant::full_bivariate) return nu_cross_;
    return 0.5 * (nu_[i] + nu_[j]);
  }

  double smooth_lag(int i, int j, const Eigen::VectorXd& h) const override {
    return smooth_iso(i, j, h.norm());
  }
  double smooth_iso(int i, int j, double r) const override {
    const double b = beta_(i, j);
    if (i != j && b == 0.0) return 0.0;
    const double m = matern_corr(r, {cross_nu(i, j), cross_a(i, j)});
    return (i == j ? sigma_[i] * sigma_[i] : b * sigma_[i] * sigma_[j]) * m;
  }

  Variant variant() const { return variant_; }
  const Eigen::VectorXd& sigma() const { return sigma_; }
  const Eigen::VectorXd& nu() const { return nu_; }
  const Eigen::VectorXd& a() const { return a_; }
  double nu_cross() const { return nu_cross_; }
  double a_cross() const { return a_cross_; }
  const Eigen::MatrixXd& beta() const { return beta_; }

 private:
  Variant variant_;
  int dim_;
  Eigen::VectorXd sigma_, nu_, a_;
  double nu_cross_ = 0.0, a_cross_ = 0.0;
  Eigen::MatrixXd beta_;
};

inline ModelPtr make_parsimonious_matern(int dim, Eigen::VectorXd sigma,
                                         Eigen::VectorXd nu, double a,
                                         Eigen::MatrixXd beta,
                                         bool run_pd_check = true) {
  Eigen::VectorXd av(1);
  av << a;
  return std::make_shared<MultiMaternModel>(
      MultiMaternModel::Variant::parsimonious, dim, std::move(sigma),
      std::move(nu), av, 0.0, 0.0, std::move(beta), run_pd_check);
}

inline ModelPtr make_full_bivariate_matern(int dim, Eigen::VectorXd sigma,
                                           Eigen::VectorXd nu,
                                           Eigen::VectorXd a, double nu_cross,
                                           double a_cross, double beta12,
                                           bool run_pd_check = true) {
  Eigen::MatrixXd beta(2, 2);
  beta << 1.0, beta12, beta12, 1.0;
  return std::make_shared<MultiMaternModel>(
      MultiMaternModel::Variant::full_bivariate, dim, std::move(sigma),
      std::move(nu), std::move(a), nu_cross, a_cross, std::move(beta),
      run_pd_check);
}

inline ModelPtr make_independent_matern(int dim, Eigen::VectorXd sigma,
                                        Eigen::VectorXd nu,
                                        Eigen::VectorXd a) {
  return std::make_shared<MultiMaternModel>(
      MultiMaternModel::Variant::independent, dim, std::move(sigma),
      std::move(nu), std::move(a), 0.0, 0.0, Eigen::MatrixXd(), false);
}

// ---------------------------------------------------------------------------
// latent dimensions (exponential form):
//   C_ij(h) = sigma_i sigma_j / w * exp{-alpha ||h|| / w^{beta/2}}
//             + tau^2 I(i=j) I(h=0),   w = ||xi_i - xi_j|| + 1

class LatentDimModel final : public StationaryModel {
 public:
  LatentDimModel(int dim, Eigen::MatrixXd xis, Eigen::VectorXd sigma,
                 double tau, double alpha, double beta_sep)
      : dim_(dim),
        xis_(std::move(xis)),
        sigma_(std::move(sigma)),
        tau_(tau),
        alpha_(alpha),
        beta_sep_(beta_sep) {
    const int p = static_cast<int>(sigma_.size());
    if (dim_ < 1) throw std::invalid_argument("latentdim: dimension must be >= 1");
    if (p < 1) throw std::invalid_argument("latentdim: need at least one variable");
    if (xis_.rows() != p)
      throw std::invalid_argument("latentdim: one latent point per variable");
    if (xis_.cols() < 1 || xis_.cols() > p)
      throw std::invalid_argument("latentdim: latent dimension k must be in 1..p");
    if ((sigma_.array() <= 0).any())
      throw std::invalid_argument("latentdim: sigma must be positive");
    if (!(tau_ >= 0)) throw std::invalid_argument("latentdim: tau must be >= 0");
    if (!(alpha_ > 0)) throw std::invalid_argument("latentdim: alpha must be > 0");
    if (!(beta_sep_ >= 0.0 && beta_sep_ <= 1.0))
      throw std::invalid_argument("latentdim: beta_sep must be in [0, 1]");
  }

  int num_variables() const override { return static_cast<int>(sigma_.size()); }
  int dimension() const override { return dim_; }
  bool isotropic() const override { return true; }
  std::string family() const override { return "latentdim"; }
  double char_length() const override { return 1.0 / alpha_; }

  double smooth_lag(int i, int j, const Eigen::VectorXd& h) const override {
    return smooth_iso(i, j, h.norm());
  }
  double smooth_iso(int i, int j, double r) const override {
    const double w = (xis_.row(i) - xis_.row(j)).norm() + 1.0;
    return sigma_[i] * sigma_[j] / w *
           std::exp(-alpha_ * r / std::pow(w, 0.5 * beta_sep_));
  }

  double nugget(int i, const Eigen::VectorXd&) const override {
    (void)i;
    return tau_ * tau_;
  }

  const Eigen::MatrixXd& xis() const { return xis_; }
  const Eigen::VectorXd& sigma() const { return sigma_; }
  double tau() const { return tau_; }
  double alpha() const { return alpha_; }
  double beta_sep() const { return beta_sep_; }

 private:
  int dim_;
  Eigen::MatrixXd xis_;  // p x k
  Eigen::VectorXd sigma_;
  double tau_, alpha_, beta_sep_;
};

inline ModelPtr make_latentdim(int dim, Eigen::MatrixXd xis,
                               Eigen::VectorXd sigma, double tau, double alpha,
                               double beta_sep) {
  return std::make_shared<LatentDimModel>(dim, std::move(xis),
                                          std::move(sigma), tau, alpha,
                                          beta_sep);
}

// ---------------------------------------------------------------------------
// asymmetry by variable-specific shifts: C^a_ij(h) = C_ij(h + a_i - a_j)

class AsymShiftModel final : public StationaryModel {
 public:
  AsymShiftModel(ModelPtr base, Eigen::MatrixXd shifts)
      : base_(std::move(base)), shifts_(std::move(shifts)) {
    if (!base_) throw std::invalid_argument("asymshift: null base model");
    if (!base_->stationary())
      throw std::invalid_argument("asymshift: base model must be stationary");
    if (shifts_.rows() != base_->num_variables() ||
        shifts_.cols() != base_->dimension())
      throw std::invalid_argument("asymshift: shifts must be p x d");
    if (shifts_.row(0).norm() != 0.0)
      throw std::invalid_argument("asymshift: identifiability requires a_1 = 0");
  }

  int num_variables() const override { return base_->num_variables(); }
  int dimension() const override { return base_->dimension(); }
  std::string family() const override { return "asymshift(" + base_->family() + ")"; }
  double char_length() const override {
    return base_->char_length() + shifts_.rowwise().norm().maxCoeff();
  }

  double smooth_lag(int i, int j, const Eigen::VectorXd& h) const override {
    if (i == j) return base_->smooth_eval(i, i, h, Eigen::VectorXd::Zero(h.size()));
    const Eigen::VectorXd shifted =
        h + (shifts_.row(i) - shifts_.row(j)).transpose();
    return base_->smooth_eval(i, j, shifted, Eigen::VectorXd::Zero(h.size()));
  }

  double nugget(int i, const Eigen::VectorXd& s) const override {
    return base_->nugget(i, s);
  }

  const CrossCovModel& base() const { return *base_; }
  ModelPtr base_ptr() const { return base_; }
  const Eigen::MatrixXd& shifts() const { return shifts_; }

 private:
  ModelPtr base_;
  Eigen::MatrixXd shifts_;  // p x d, row 0 pinned to zero
};

inline ModelPtr asymmetrize(ModelPtr base, Eigen::MatrixXd shifts) {
  return std::make_shared<AsymShiftModel>(std::move(base), std::move(shifts));
}

// ---------------------------------------------------------------------------
// spatially varying standard deviations:
//   C_ij(s1, s2) = sigma_i(s1) sigma_j(s2) base_ij(s1, s2)

// nearest-site lookup table for an empirically estimated std-dev surface
struct SigmaField {
  Eigen::MatrixXd sites;   // m x d
  Eigen::VectorXd values;  // m, strictly positive

  double operator()(const Eigen::VectorXd& s) const {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int k = 0; k < sites.rows(); ++k) {
      const double d = (sites.row(k).transpose() - s).squaredNorm();
      if (d < bd) {
        bd = d;
        best = k;
      }
    }
    return values[best];
  }
};

class VarianceScaleModel final : public CrossCovModel {
 public:
  using Field = std::function<double(const Eigen::VectorXd&)>;

  // gridded surfaces (serializable)
  VarianceScaleModel(ModelPtr base, std::vector<SigmaField> grids)
      : base_(std::move(base)), grids_(std::move(grids)) {
    init_checks(static_cast<int>(grids_.size()));
    for (const auto& g : grids_) {
      if (g.sites.rows() != g.values.size() || g.sites.rows() == 0 ||
          g.sites.cols() != base_->dimension())
        throw std::invalid_argument("varscale: malformed sigma field grid");
      if ((g.values.array() <= 0).any())
        throw std::invalid_argument("varscale: sigma fields must be strictly positive");
    }
    for (const auto& g : grids_) fields_.push_back([g](const Eigen::VectorXd& s) { return g(s); });
  }

  // arbitrary callables (not serializable)
  VarianceScaleModel(ModelPtr base, std::vector<Field> fields)
      : base_(std::move(base)), fields_(std::move(fields)) {
    init_checks(static_cast<int>(fields_.size()));
  }

  int num_variables() const override { return base_->num_variables(); }
  int dimension() const override { return base_->dimension(); }
  bool stationary() const override { return false; }
  std::string family() const override { return "varscale(" + base_->family() + ")"; }
  double char_length() const override { return base_->char_length(); }

  double smooth_eval(int i, int j, const Eigen::VectorXd& s1,
                     const Eigen::VectorXd& s2) const override {
    return field_value(i, s1) * field_value(j, s2) *
           base_->smooth_eval(i, j, s1, s2);
  }

  double nugget(int i, const Eigen::VectorXd& s) const override {
    const double f = field_value(i, s);
    return f * f * base_->nugget(i, s);
  }

  double field_value(int i, const Eigen::VectorXd& s) const {
    const double v = fields_[i](s);
    if (!(v > 0.0))
      throw std::domain_error("varscale: sigma field must be strictly positive at every site");
    return v;
  }

  const CrossCovModel& base() const { return *base_; }
  ModelPtr base_ptr() const { return base_; }
  bool gridded() const { return !grids_.empty(); }
  const std::vector<SigmaField>& grids() const { return grids_; }

 private:
  void init_checks(int count) {
    if (!base_) throw std::invalid_argument("varscale: null base model");
    if (count != base_->num_variables())
      throw std::invalid_argument("varscale: need one sigma field per variable");
  }

  ModelPtr base_;
  std::vector<SigmaField> grids_;
  std::vector<Field> fields_;
};

inline ModelPtr scale_variance(ModelPtr base, std::vector<SigmaField> grids) {
  return std::make_shared<VarianceScaleModel>(std::move(base), std::move(grids));
}

// ---------------------------------------------------------------------------
// covariance tapering: Schur product with a compactly supported Askey taper

class TaperModel final : public CrossCovModel {
 public:
  TaperModel(ModelPtr base, AskeyParams taper)
      : base_(std::move(base)), taper_(taper) {
    if (!base_) throw std::invalid_argument("taper: null base model");
    taper_.validate(base_->dimension());
  }

  int num_variables() const override { return base_->num_variables(); }
  int dimension() const override { return base_->dimension(); }
  bool stationary() const override { return base_->stationary(); }
  bool isotropic() const override { return base_->isotropic(); }
  std::string family() const override { return "taper(" + base_->family() + ")"; }
  double char_length() const override {
    return std::min(base_->char_length(), taper_.b);
  }

  double smooth_eval(int i, int j, const Eigen::VectorXd& s1,
                     const Eigen::VectorXd& s2) const override {
    const double r = (s1 - s2).norm();
    if (r >= taper_.b) return 0.0;
    return std::pow(1.0 - r / taper_.b, taper_.mu) *
           base_->smooth_eval(i, j, s1, s2);
  }

  double smooth_iso(int i, int j, double r) const override {
    if (r >= taper_.b) return 0.0;
    return std::pow(1.0 - r / taper_.b, taper_.mu) * base_->smooth_iso(i, j, r);
  }

  // taper equals 1 at the origin, so nuggets pass through unchanged
  double nugget(int i, const Eigen::VectorXd& s) const override {
    return base_->nugget(i, s);
  }

  const CrossCovModel& base() const { return *base_; }
  ModelPtr base_ptr() const { return base_; }
  const AskeyParams& taper() const { return taper_; }

 private:
  ModelPtr base_;
  AskeyParams taper_;
};

inline ModelPtr taper(ModelPtr base, AskeyParams params) {
  return std::make_shared<TaperModel>(std::move(base), params);
}

// ---------------------------------------------------------------------------
// additive per-variable nugget

class NuggetModel final : public CrossCovModel {
 public:
  NuggetModel(ModelPtr base, Eigen::VectorXd tau)
      : base_(std::move(base)), tau_(std::move(tau)) {
    if (!base_) throw std::invalid_argument("nugget: null base model");
    if (tau_.size() != base_->num_variables())
      throw std::invalid_argument("nugget: need one tau per variable");
    if ((tau_.array() < 0).any())
      throw std::invalid_argument("nugget: tau must be >= 0");
  }

  int num_variables() const override { return base_->num_variables(); }
  int dimension() const override { return base_->dimension(); }
  bool stationary() const override { return base_->stationary(); }
  bool isotropic() const override { return base_->isotropic(); }
  std::string family() const override { return "nugget(" + base_->family() + ")"; }
  double char_length() const override { return base_->char_length(); }

  double smooth_eval(int i, int j, const Eigen::VectorXd& s1,
                     const Eigen::VectorXd& s2) const override {
    return base_->smooth_eval(i, j, s1, s2);
  }
  double smooth_iso(int i, int j, double r) const override {
    return base_->smooth_iso(i, j, r);
  }

  double nugget(int i, const Eigen::VectorXd& s) const override {
    return tau_[i] * tau_[i] + base_->nugget(i, s);
  }

  const CrossCovModel& base() const { return *base_; }
  ModelPtr base_ptr() const { return base_; }
  const Eigen::VectorXd& tau() const { return tau_; }

 private:
  ModelPtr base_;
  Eigen::VectorXd tau_;
};

inline ModelPtr add_nugget(ModelPtr base, Eigen::VectorXd tau) {
  return std::make_shared<NuggetModel>(std::move(base), std::move(tau));
}

}  // namespace mvcov
