#pragma once

// Modified Bessel function of the second kind K_nu for real order nu >= 0,
// plus small gamma-function helpers used by the Temme series.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mvcov {
namespace detail {

// Coefficients of 1/Gamma(1+x) = sum b_k x^k on |x| <= 1 (Abramowitz & Stegun 6.1.34).
inline constexpr double kInvGammaCoef[26] = {
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001};

// gam1 = [1/Gamma(1-mu) - 1/Gamma(1+mu)] / (2 mu), continuous through mu = 0,
// gam2 = [1/Gamma(1-mu) + 1/Gamma(1+mu)] / 2, for |mu| <= 1/2.
inline void temme_gamma(double mu, double& gam1, double& gam2, double& gampl,
                        double& gammi) {
  const double mu2 = mu * mu;
  double odd = 0.0, even = 0.0, pw = 1.0;
  for (int k = 0; k + 1 < 26; k += 2) {
    even += kInvGammaCoef[k] * pw;
    odd += kInvGammaCoef[k + 1] * pw;
    pw *= mu2;
  }
  gam1 = -odd;
  gam2 = even;
  gampl = gam2 - mu * gam1;  // 1/Gamma(1+mu)
  gammi = gam2 + mu * gam1;  // 1/Gamma(1-mu)
}

// K_mu(x) and K_{mu+1}(x) by Temme's series; requires |mu| <= 1/2, 0 < x <= 2.
inline void bessel_k_temme(double x, double mu, double& kmu, double& kmu1) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  constexpr int max_iter = 1000;

  const double x2 = 0.5 * x;
  const double pimu = M_PI * mu;
  const double fact = (std::abs(pimu) < eps) ? 1.0 : pimu / std::sin(pimu);
  const double d = -std::log(x2);
  double e = mu * d;
  const double fact2 = (std::abs(e) < eps) ? 1.0 : std::sinh(e) / e;
  double gam1, gam2, gampl, gammi;
  temme_gamma(mu, gam1, gam2, gampl, gammi);
  double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
  double sum = ff;
  e = std::exp(e);
  double p = 0.5 * e / gampl;
  double q = 0.5 / (e * gammi);
  double c = 1.0;
  const double d2 = x2 * x2;
  double sum1 = p;
  for (int i = 1; i <= max_iter; ++i) {
    ff = (i * ff + p + q) / (i * i - mu * mu);
    c *= d2 / i;
    p /= (i - mu);
    q /= (i + mu);
    const double del = c * ff;
    sum += del;
    sum1 += c * (p - i * ff);
    if (std::abs(del) < std::abs(sum) * eps) break;
  }
  kmu = sum;
  kmu1 = sum1 * (2.0 / x);
}

// K_mu(x) and K_{mu+1}(x) by Steed's continued fraction; |mu| <= 1/2, x > 2.
inline void bessel_k_steed(double x, double mu, double& kmu, double& kmu1) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  constexpr int max_iter = 10000;

  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d, delh = d;
  double q1 = 0.0, q2 = 1.0;
  const double a1 = 0.25 - mu * mu;
  double q = a1, c = a1, a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 2; i <= max_iter; ++i) {
    a -= 2 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < eps) break;
  }
  h = a1 * h;
  kmu = std::sqrt(M_PI / (2.0 * x)) * std::exp(-x) / s;
  kmu1 = kmu * (mu + x + 0.5 - h) / x;
}

}  // namespace detail

// K_nu(x) for nu >= 0, x > 0. Underflows to 0 for large x; may overflow to
// +inf for very small x at large nu (callers handle the limit).
inline double bessel_k(double nu, double x) {
  if (!(nu >= 0.0)) throw std::domain_error("bessel_k: order must be >= 0");
  if (!(x > 0.0)) throw std::domain_error("bessel_k: argument must be > 0");
  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;  // in [-1/2, 1/2]
  double kmu, kmu1;
  if (x <= 2.0)
    detail::bessel_k_temme(x, mu, kmu, kmu1);
  else
    detail::bessel_k_steed(x, mu, kmu, kmu1);
  // stable upward recurrence in the order
  for (int i = 1; i <= nl; ++i) {
    const double knext = 2.0 * (mu + i) / x * kmu1 + kmu;
    kmu = kmu1;
    kmu1 = knext;
  }
  return kmu;
}

}  // namespace mvcov
