#pragma once

// Spatio-temporal multivariate covariances via latent dimensions, with the
// time-delay and velocity asymmetric variants. A space-time model acts on
// sites in R^{d+1} whose last coordinate is the time index.

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "mvcov/models.hpp"

namespace mvcov {

// completely monotone members for the spatial component
enum class Phi1Kind {
  exponential,     // phi1(t) = exp(-t)
  inverse_linear,  // phi1(t) = 1 / (1 + t)
};

// positive functions with completely monotone derivative: (1 + t)^b with
// b in (0, 1], or the constant 1
struct PsiSpec {
  bool one = true;
  double b = 1.0;

  static PsiSpec identity() { return PsiSpec{true, 1.0}; }
  static PsiSpec power(double b) { return PsiSpec{false, b}; }

  void validate(const char* name) const {
    if (!one && !(b > 0.0 && b <= 1.0))
      throw std::invalid_argument(std::string(name) +
                                  ": exponent must be in (0, 1]");
  }
  double operator()(double t) const { return one ? 1.0 : std::pow(1.0 + t, b); }
};

inline double phi1_eval(Phi1Kind kind, double t) {
  return kind == Phi1Kind::exponential ? std::exp(-t) : 1.0 / (1.0 + t);
}

//   C(h, u, v) = sigma^2 / ( psi1{u^2/psi2(||v||^2)}^{d/2} psi2(||v||^2)^{1/2} )
//                * phi1( ||h||^2 / psi1{u^2/psi2(||v||^2)} )
// with v = xi_i - xi_j, valid on R^{d+1+k}.
class SpaceTimeLatentModel final : public StationaryModel {
 public:
  SpaceTimeLatentModel(int space_dim, double sigma2, Phi1Kind phi1,
                       PsiSpec psi1, PsiSpec psi2, Eigen::MatrixXd xis)
      : d_(space_dim),
        sigma2_(sigma2),
        phi1_(phi1),
        psi1_(psi1),
        psi2_(psi2),
        xis_(std::move(xis)) {
    if (d_ < 1) throw std::invalid_argument("spacetime: spatial dimension must be >= 1");
    if (!(sigma2_ > 0)) throw std::invalid_argument("spacetime: sigma2 must be > 0");
    psi1_.validate("spacetime psi1");
    psi2_.validate("spacetime psi2");
    const int p = static_cast<int>(xis_.rows());
    if (p < 1) throw std::invalid_argument("spacetime: need at least one variable");
    if (xis_.cols() < 1 || xis_.cols() > p)
      throw std::invalid_argument("spacetime: latent dimension k must be in 1..p");
  }

  int num_variables() const override { return static_cast<int>(xis_.rows()); }
  int dimension() const override { return d_ + 1; }  // last coordinate is time
  int space_dim() const { return d_; }
  std::string family() const override { return "spacetime"; }
  double char_length() const override { return 1.0; }

  // the generic latent-dimension covariance C(h, u, v)
  double core(double h_sqnorm, double u, double v_sqnorm) const {
    const double p2 = psi2_(v_sqnorm);
    const double p1 = psi1_(u * u / p2);
    return sigma2_ / (std::pow(p1, 0.5 * d_) * std::sqrt(p2)) *
           phi1_eval(phi1_, h_sqnorm / p1);
  }

  double smooth_lag(int i, int j, const Eigen::VectorXd& h_full) const override {
    const double u = h_full[d_];
    const double h2 = h_full.head(d_).squaredNorm();
    return core(h2, u, latent_diff_sqnorm(i, j));
  }

  double latent_diff_sqnorm(int i, int j) const {
    return (xis_.row(i) - xis_.row(j)).squaredNorm();
  }
  Eigen::VectorXd latent_diff(int i, int j) const {
    return (xis_.row(i) - xis_.row(j)).transpose();
  }

  double sigma2() const { return sigma2_; }
  Phi1Kind phi1() const { return phi1_; }
  const PsiSpec& psi1() const { return psi1_; }
  const PsiSpec& psi2() const { return psi2_; }
  const Eigen::MatrixXd& xis() const { return xis_; }

 private:
  int d_;
  double sigma2_;
  Phi1Kind phi1_;
  PsiSpec psi1_, psi2_;
  Eigen::MatrixXd xis_;  // p x k
};

using SpaceTimePtr = std::shared_ptr<const SpaceTimeLatentModel>;

inline SpaceTimePtr make_spacetime(int space_dim, double sigma2, Phi1Kind phi1,
                                   PsiSpec psi1, PsiSpec psi2,
                                   Eigen::MatrixXd xis) {
  return std::make_shared<SpaceTimeLatentModel>(space_dim, sigma2, phi1, psi1,
                                                psi2, std::move(xis));
}

// time-delay asymmetry: C^a_ij(h, u) = C(h, u - lambda^T (xi_i - xi_j), v)
class SpaceTimeDelayModel final : public StationaryModel {
 public:
  SpaceTimeDelayModel(SpaceTimePtr base, Eigen::VectorXd lambda_xi)
      : base_(std::move(base)), lambda_(std::move(lambda_xi)) {
    if (!base_) throw std::invalid_argument("spacetime_delay: null base model");
    if (lambda_.size() != base_->xis().cols())
      throw std::invalid_argument("spacetime_delay: lambda_xi must live in the latent space");
    if (!lambda_.allFinite())
      throw std::invalid_argument("spacetime_delay: lambda_xi must be finite");
  }

  int num_variables() const override { return base_->num_variables(); }
  int dimension() const override { return base_->dimension(); }
  std::string family() const override { return "spacetime_delay"; }
  double char_length() const override { return base_->char_length(); }

  double smooth_lag(int i, int j, const Eigen::VectorXd& h_full) const override {
    const int d = base_->space_dim();
    const Eigen::VectorXd v = base_->latent_diff(i, j);
    const double u = h_full[d] - lambda_.dot(v);
    return base_->core(h_full.head(d).squaredNorm(), u, v.squaredNorm());
  }

  const SpaceTimeLatentModel& base() const { return *base_; }
  SpaceTimePtr base_ptr() const { return base_; }
  const Eigen::VectorXd& lambda_xi() const { return lambda_; }

 private:
  SpaceTimePtr base_;
  Eigen::VectorXd lambda_;
};

// velocity asymmetry: C^a_ij(h, u) = C(h - gamma_h u, u, v - gamma_xi u)
class SpaceTimeVelocityModel final : public StationaryModel {
 public:
  SpaceTimeVelocityModel(SpaceTimePtr base, Eigen::VectorXd gamma_h,
                         Eigen::VectorXd gamma_xi)
      : base_(std::move(base)),
        gamma_h_(std::move(gamma_h)),
        gamma_xi_(std::move(gamma_xi)) {
    if (!base_) throw std::invalid_argument("spacetime_velocity: null base model");
    if (gamma_h_.size() != base_->space_dim())
      throw std::invalid_argument("spacetime_velocity: gamma_h must live in the spatial domain");
    if (gamma_xi_.size() != base_->xis().cols())
      throw std::invalid_argument("spacetime_velocity: gamma_xi must live in the latent space");
    if (!gamma_h_.allFinite() || !gamma_xi_.allFinite())
      throw std::invalid_argument("spacetime_velocity: velocities must be finite");
  }

  int num_variables() const override { return base_->num_variables(); }
  int dimension() const override { return base_->dimension(); }
  std::string family() const override { return "spacetime_velocity"; }
  double char_length() const override {
    return base_->char_length() * (1.0 + gamma_h_.norm() + gamma_xi_.norm());
  }

  double smooth_lag(int i, int j, const Eigen::VectorXd& h_full) const override {
    const int d = base_->space_dim();
    const double u = h_full[d];
    const Eigen::VectorXd h = h_full.head(d) - gamma_h_ * u;
    const Eigen::VectorXd v = base_->latent_diff(i, j) - gamma_xi_ * u;
    return base_->core(h.squaredNorm(), u, v.squaredNorm());
  }

  const SpaceTimeLatentModel& base() const { return *base_; }
  SpaceTimePtr base_ptr() const { return base_; }
  const Eigen::VectorXd& gamma_h() const { return gamma_h_; }
  const Eigen::VectorXd& gamma_xi() const { return gamma_xi_; }

 private:
  SpaceTimePtr base_;
  Eigen::VectorXd gamma_h_, gamma_xi_;
};

// (h, u) entry points mirroring the covariance displays

inline double eval_st(const SpaceTimeLatentModel& model, int i, int j,
                      const Eigen::VectorXd& h, double u) {
  model.check_indices(i, j);
  if (h.size() != model.space_dim())
    throw std::invalid_argument("eval_st: spatial lag dimension mismatch");
  return model.core(h.squaredNorm(), u, model.latent_diff_sqnorm(i, j));
}

inline double eval_st_asym_delay(const SpaceTimeLatentModel& model,
                                 const Eigen::VectorXd& lambda_xi, int i,
                                 int j, const Eigen::VectorXd& h, double u) {
  model.check_indices(i, j);
  if (h.size() != model.space_dim())
    throw std::invalid_argument("eval_st_asym_delay: spatial lag dimension mismatch");
  const Eigen::VectorXd v = model.latent_diff(i, j);
  return model.core(h.squaredNorm(), u - lambda_xi.dot(v), v.squaredNorm());
}

inline double eval_st_asym_velocity(const SpaceTimeLatentModel& model,
                                    const Eigen::VectorXd& gamma_h,
                                    const Eigen::VectorXd& gamma_xi, int i,
                                    int j, const Eigen::VectorXd& h,
                                    double u) {
  model.check_indices(i, j);
  if (h.size() != model.space_dim())
    throw std::invalid_argument("eval_st_asym_velocity: spatial lag dimension mismatch");
  const Eigen::VectorXd hs = h - gamma_h * u;
  const Eigen::VectorXd v = model.latent_diff(i, j) - gamma_xi * u;
  return model.core(hs.squaredNorm(), u, v.squaredNorm());
}

}  // namespace mvcov
