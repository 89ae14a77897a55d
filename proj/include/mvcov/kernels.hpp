#pragma once

// Univariate stationary correlation functions and the smoothing kernel used
// as building blocks by the covariance model families.

#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>

#include "mvcov/specfun.hpp"

namespace mvcov {

// Any correlation value smaller than this is returned as exact zero.
inline constexpr double kCorrelationUnderflow = 1e-300;

struct MaternParams {
  double nu;  // smoothness, > 0
  double a;   // inverse length scale, > 0

  void validate() const {
    if (!(nu > 0.0)) throw std::invalid_argument("MaternParams: nu must be > 0");
    if (!(a > 0.0)) throw std::invalid_argument("MaternParams: a must be > 0");
  }
};

struct PoweredExpParams {
  double phi;    // length scale, > 0
  double kappa;  // exponent in (0, 2]

  void validate() const {
    if (!(phi > 0.0))
      throw std::invalid_argument("PoweredExpParams: phi must be > 0");
    if (!(kappa > 0.0 && kappa <= 2.0))
      throw std::invalid_argument("PoweredExpParams: kappa must be in (0, 2]");
  }
};

struct AskeyParams {
  double b;   // support radius; correlation is exactly 0 for r >= b
  double mu;  // tail exponent; validity on R^d needs mu >= (d+1)/2

  void validate(int dim) const {
    if (!(b > 0.0)) throw std::invalid_argument("AskeyParams: b must be > 0");
    if (!(mu >= 0.5 * (dim + 1)))
      throw std::domain_error("AskeyParams: mu must be >= (d+1)/2 for dimension " +
                              std::to_string(dim));
  }
};

inline double matern_corr(double r, const MaternParams& p) {
  p.validate();
  if (!(r >= 0.0)) throw std::domain_error("matern_corr: distance must be >= 0");
  const double x = p.a * r;
  if (x == 0.0) return 1.0;
  const double k = bessel_k(p.nu, x);
  if (!std::isfinite(k)) return 1.0;  // K overflow only in the r -> 0 limit
  double m = std::exp((1.0 - p.nu) * M_LN2 - std::lgamma(p.nu) +
                      p.nu * std::log(x)) * k;
  if (!std::isfinite(m)) {
    // fall back to a fully logarithmic evaluation near the over/underflow edges
    const double lm = (1.0 - p.nu) * M_LN2 - std::lgamma(p.nu) +
                      p.nu * std::log(x) + std::log(k);
    m = std::exp(lm);
  }
  if (m < kCorrelationUnderflow) return 0.0;
  return m < 1.0 ? m : 1.0;
}

inline double powered_exp_corr(double r, const PoweredExpParams& p) {
  p.validate();
  if (!(r >= 0.0))
    throw std::domain_error("powered_exp_corr: distance must be >= 0");
  const double v = std::exp(-std::pow(r / p.phi, p.kappa));
  return v < kCorrelationUnderflow ? 0.0 : v;
}

inline double askey_corr(double r, const AskeyParams& p, int dim) {
  p.validate(dim);
  if (!(r >= 0.0)) throw std::domain_error("askey_corr: distance must be >= 0");
  if (r >= p.b) return 0.0;
  return std::pow(1.0 - r / p.b, p.mu);
}

// Raw amplitude of the paper-scale Askey cross-covariance b^{nu+1} B(gamma+1, nu+1);
// the correlation-scale askey_corr above is this shape normalized to 1 at r = 0.
inline double askey_raw_amplitude(double b, double gamma_ij, double nu) {
  if (!(b > 0.0) || !(gamma_ij > -1.0) || !(nu > -1.0))
    throw std::domain_error("askey_raw_amplitude: invalid parameters");
  const double log_beta = std::lgamma(gamma_ij + 1.0) + std::lgamma(nu + 1.0) -
                          std::lgamma(gamma_ij + nu + 2.0);
  return std::exp((nu + 1.0) * std::log(b) + log_beta);
}

// Gaussian smoothing kernel K_lambda(r) = exp(-(r/lambda)^2 / 2).
inline double smoothing_kernel(double r, double lambda) {
  if (!(lambda > 0.0))
    throw std::domain_error("smoothing_kernel: bandwidth must be > 0");
  const double t = r / lambda;
  return std::exp(-0.5 * t * t);
}

// Tagged univariate correlation handle used by the separable and LMC families.
class Correlation {
 public:
  using Params = std::variant<MaternParams, PoweredExpParams, AskeyParams>;

  static Correlation matern(double nu, double a) {
    return Correlation(MaternParams{nu, a});
  }
  static Correlation powered_exp(double phi, double kappa) {
    return Correlation(PoweredExpParams{phi, kappa});
  }
  static Correlation askey(double b, double mu) {
    return Correlation(AskeyParams{b, mu});
  }

  explicit Correlation(Params p) : params_(std::move(p)) {}

  // validate for use on R^dim (the Askey member is dimension-restricted)
  void validate(int dim) const {
    if (const auto* m = std::get_if<MaternParams>(&params_))
      m->validate();
    else if (const auto* e = std::get_if<PoweredExpParams>(&params_))
      e->validate();
    else
      std::get<AskeyParams>(params_).validate(dim);
  }

  double operator()(double r) const {
    if (const auto* m = std::get_if<MaternParams>(&params_))
      return matern_corr(r, *m);
    if (const auto* e = std::get_if<PoweredExpParams>(&params_))
      return powered_exp_corr(r, *e);
    const auto& a = std::get<AskeyParams>(params_);
    if (r >= a.b) return 0.0;
    return std::pow(1.0 - r / a.b, a.mu);
  }

  // rough correlation length, used to scale randomized validation designs
  double length_scale() const {
    if (const auto* m = std::get_if<MaternParams>(&params_)) return 1.0 / m->a;
    if (const auto* e = std::get_if<PoweredExpParams>(&params_)) return e->phi;
    return std::get<AskeyParams>(params_).b;
  }

  const Params& params() const { return params_; }

 private:
  Params params_;
};

}  // namespace mvcov
