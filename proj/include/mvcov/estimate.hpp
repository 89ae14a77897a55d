#pragma once

// Maximum-likelihood fitting: named parameter spaces per model family,
// transforms to unconstrained coordinates, multi-start Nelder-Mead search,
// and the staged (marginals first, cross second) protocol.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvcov/cokrige.hpp"
#include "mvcov/gaussian.hpp"
#include "mvcov/models.hpp"
#include "mvcov/optim.hpp"
#include "mvcov/spacetime.hpp"
#include "mvcov/threading.hpp"

namespace mvcov {

// ---------------------------------------------------------------------------
// parameter domains and transforms

struct ParamDomain {
  enum class Kind { unbounded, lower_bounded, interval };
  Kind kind = Kind::unbounded;
  double lo = 0.0, hi = 0.0;

  static ParamDomain real() { return {}; }
  static ParamDomain positive() { return {Kind::lower_bounded, 0.0, 0.0}; }
  static ParamDomain above(double lo) { return {Kind::lower_bounded, lo, 0.0}; }
  static ParamDomain interval(double lo, double hi) {
    return {Kind::interval, lo, hi};
  }

  double to_unconstrained(double v) const {
    switch (kind) {
      case Kind::unbounded: return v;
      case Kind::lower_bounded: return std::log(v - lo);
      case Kind::interval:
        return std::atanh(2.0 * (v - lo) / (hi - lo) - 1.0);
    }
    return v;
  }
  double from_unconstrained(double u) const {
    switch (kind) {
      case Kind::unbounded: return u;
      case Kind::lower_bounded: return lo + std::exp(u);
      case Kind::interval:
        return lo + 0.5 * (hi - lo) * (std::tanh(u) + 1.0);
    }
    return u;
  }
  bool contains(double v) const {
    switch (kind) {
      case Kind::unbounded: return std::isfinite(v);
      case Kind::lower_bounded: return v > lo;
      case Kind::interval: return v > lo && v < hi;
    }
    return false;
  }
};

struct ParamDesc {
  std::string name;
  ParamDomain domain;
  double value = 0.0;
};

// Named view of a model's free parameters plus a builder that reconstructs
// the model from a full value vector.
struct ParamSpace {
  std::vector<ParamDesc> params;
  std::function<ModelPtr(const Eigen::VectorXd&)> build;

  int size() const { return static_cast<int>(params.size()); }
  int index_of(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
      if (params[i].name == name) return i;
    throw std::invalid_argument("unknown parameter name: " + name);
  }
  Eigen::VectorXd values() const {
    Eigen::VectorXd v(size());
    for (int i = 0; i < size(); ++i) v[i] = params[i].value;
    return v;
  }
};

namespace detail {

inline std::string idx1(const std::string& base, int i) {
  return base + std::to_string(i + 1);
}
inline std::string idx2(const std::string& base, int i, int j) {
  return base + std::to_string(i + 1) + "_" + std::to_string(j + 1);
}

inline void append_correlation_params(const Correlation& rho, int dim,
                                      const std::string& prefix,
                                      std::vector<ParamDesc>& out) {
  if (const auto* m = std::get_if<MaternParams>(&rho.params())) {
    out.push_back({prefix + ".nu", ParamDomain::positive(), m->nu});
    out.push_back({prefix + ".a", ParamDomain::positive(), m->a});
  } else if (const auto* e = std::get_if<PoweredExpParams>(&rho.params())) {
    out.push_back({prefix + ".phi", ParamDomain::positive(), e->phi});
    out.push_back({prefix + ".kappa", ParamDomain::interval(0.0, 2.0), e->kappa});
  } else {
    const auto& a = std::get<AskeyParams>(rho.params());
    out.push_back({prefix + ".b", ParamDomain::positive(), a.b});
    out.push_back({prefix + ".mu", ParamDomain::above(0.5 * (dim + 1)), a.mu});
  }
}

inline Correlation correlation_from_values(const Correlation& proto,
                                           const double*& v) {
  if (std::holds_alternative<MaternParams>(proto.params())) {
    const double nu = *v++;
    const double a = *v++;
    return Correlation::matern(nu, a);
  }
  if (std::holds_alternative<PoweredExpParams>(proto.params())) {
    const double phi = *v++;
    const double kappa = *v++;
    return Correlation::powered_exp(phi, kappa);
  }
  const double b = *v++;
  const double mu = *v++;
  return Correlation::askey(b, mu);
}

}  // namespace detail

// Builds the named parameter space of a model. Wrapper families expose their
// base model's parameters plus their own.
inline ParamSpace param_space(const ModelPtr& model) {
  using detail::idx1;
  using detail::idx2;
  ParamSpace sp;

  if (const auto* mm = dynamic_cast<const MultiMaternModel*>(model.get())) {
    const int p = mm->num_variables();
    const int dim = mm->dimension();
    const auto variant = mm->variant();
    for (int i = 0; i < p; ++i)
      sp.params.push_back({idx1("sigma", i), ParamDomain::positive(), mm->sigma()[i]});
    for (int i = 0; i < p; ++i)
      sp.params.push_back({idx1("nu", i), ParamDomain::positive(), mm->nu()[i]});
    if (variant == MultiMaternModel::Variant::parsimonious)
      sp.params.push_back({"a", ParamDomain::positive(), mm->a()[0]});
    else
      for (int i = 0; i < static_cast<int>(mm->a().size()); ++i)
        sp.params.push_back({idx1("a", i), ParamDomain::positive(), mm->a()[i]});
    if (variant == MultiMaternModel::Variant::full_bivariate) {
      sp.params.push_back({"nu12", ParamDomain::positive(), mm->nu_cross()});
      sp.params.push_back({"a12", ParamDomain::positive(), mm->a_cross()});
      sp.params.push_back({"beta12", ParamDomain::interval(-1.0, 1.0), mm->beta()(0, 1)});
    } else if (variant == MultiMaternModel::Variant::parsimonious) {
      for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
          sp.params.push_back({idx2("beta", i, j), ParamDomain::interval(-1.0, 1.0),
                               mm->beta()(i, j)});
    }
    sp.build = [p, dim, variant](const Eigen::VectorXd& v) -> ModelPtr {
      int at = 0;
      Eigen::VectorXd sigma(p), nu(p);
      for (int i = 0; i < p; ++i) sigma[i] = v[at++];
      for (int i = 0; i < p; ++i) nu[i] = v[at++];
      if (variant == MultiMaternModel::Variant::parsimonious) {
        const double a = v[at++];
        Eigen::MatrixXd beta = Eigen::MatrixXd::Identity(p, p);
        for (int i = 0; i < p; ++i)
          for (int j = i + 1; j < p; ++j) {
            beta(i, j) = v[at];
            beta(j, i) = v[at];
            ++at;
          }
        return make_parsimonious_matern(dim, sigma, nu, a, beta);
      }
      if (variant == MultiMaternModel::Variant::independent) {
        Eigen::VectorXd a(p);
        for (int i = 0; i < p; ++i) a[i] = v[at++];
        return make_independent_matern(dim, sigma, nu, a);
      }
      Eigen::VectorXd a(2);
      a[0] = v[at++];
      a[1] = v[at++];
      const double nu12 = v[at++];
      const double a12 = v[at++];
      const double beta12 = v[at++];
      return make_full_bivariate_matern(dim, sigma, nu, a, nu12, a12, beta12);
    };
    return sp;
  }

  if (const auto* sep = dynamic_cast<const SeparableModel*>(model.get())) {
    const int p = sep->num_variables();
    const int dim = sep->dimension();
    detail::append_correlation_params(sep->rho(), dim, "rho", sp.params);
    for (int i = 0; i < p; ++i)
      for (int j = i; j < p; ++j)
        sp.params.push_back({idx2("R", i, j), ParamDomain::real(), sep->r_matrix()(i, j)});
    const Correlation proto = sep->rho();
    sp.build = [p, dim, proto](const Eigen::VectorXd& v) -> ModelPtr {
      const double* at = v.data();
      Correlation rho = detail::correlation_from_values(proto, at);
      Eigen::MatrixXd r(p, p);
      for (int i = 0; i < p; ++i)
        for (int j = i; j < p; ++j) {
          r(i, j) = *at++;
          r(j, i) = r(i, j);
        }
      return make_separable(dim, std::move(rho), std::move(r));
    };
    return sp;
  }

  if (const auto* lmc = dynamic_cast<const LmcModel*>(model.get())) {
    const int p = lmc->num_variables();
    const int r = static_cast<int>(lmc->loadings().cols());
    const int dim = lmc->dimension();
    for (int k = 0; k < r; ++k)
      detail::append_correlation_params(lmc->rhos()[k], dim, idx1("rho", k), sp.params);
    for (int i = 0; i < p; ++i)
      for (int k = 0; k < r; ++k)
        sp.params.push_back({idx2("A", i, k), ParamDomain::real(), lmc->loadings()(i, k)});
    const std::vector<Correlation> protos = lmc->rhos();
    sp.build = [p, r, dim, protos](const Eigen::VectorXd& v) -> ModelPtr {
      const double* at = v.data();
      std::vector<Correlation> rhos;
      rhos.reserve(r);
      for (int k = 0; k < r; ++k)
        rhos.push_back(detail::correlation_from_values(protos[k], at));
      Eigen::MatrixXd a(p, r);
      for (int i = 0; i < p; ++i)
        for (int k = 0; k < r; ++k) a(i, k) = *at++;
      return make_lmc(dim, std::move(rhos), std::move(a));
    };
    return sp;
  }

  if (const auto* ld = dynamic_cast<const LatentDimModel*>(model.get())) {
    const int p = ld->num_variables();
    const int k = static_cast<int>(ld->xis().cols());
    const int dim = ld->dimension();
    for (int i = 0; i < p; ++i)
      sp.params.push_back({idx1("sigma", i), ParamDomain::positive(), ld->sigma()[i]});
    for (int i = 0; i < p; ++i)
      for (int c = 0; c < k; ++c)
        sp.params.push_back({idx2("xi", i, c), ParamDomain::real(), ld->xis()(i, c)});
    sp.params.push_back({"tau", ParamDomain::above(-1e-12), ld->tau()});
    sp.params.push_back({"alpha", ParamDomain::positive(), ld->alpha()});
    sp.params.push_back({"beta_sep", ParamDomain::interval(0.0, 1.0), ld->beta_sep()});
    sp.build = [p, k, dim](const Eigen::VectorXd& v) -> ModelPtr {
      int at = 0;
      Eigen::VectorXd sigma(p);
      for (int i = 0; i < p; ++i) sigma[i] = v[at++];
      Eigen::MatrixXd xis(p, k);
      for (int i = 0; i < p; ++i)
        for (int c = 0; c < k; ++c) xis(i, c) = v[at++];
      const double tau = std::max(0.0, v[at++]);
      const double alpha = v[at++];
      const double beta_sep = std::min(1.0, std::max(0.0, v[at++]));
      return make_latentdim(dim, xis, sigma, tau, alpha, beta_sep);
    };
    return sp;
  }

  if (const auto* st = dynamic_cast<const SpaceTimeLatentModel*>(model.get())) {
    const int p = st->num_variables();
    const int k = static_cast<int>(st->xis().cols());
    const int d = st->space_dim();
    sp.params.push_back({"sigma2", ParamDomain::positive(), st->sigma2()});
    if (!st->psi1().one)
      sp.params.push_back({"psi1.b", ParamDomain::interval(0.0, 1.0), st->psi1().b});
    if (!st->psi2().one)
      sp.params.push_back({"psi2.b", ParamDomain::interval(0.0, 1.0), st->psi2().b});
    for (int i = 0; i < p; ++i)
      for (int c = 0; c < k; ++c)
        sp.params.push_back({idx2("xi", i, c), ParamDomain::real(), st->xis()(i, c)});
    const Phi1Kind phi1 = st->phi1();
    const bool p1_one = st->psi1().one, p2_one = st->psi2().one;
    sp.build = [p, k, d, phi1, p1_one, p2_one](const Eigen::VectorXd& v) -> ModelPtr {
      int at = 0;
      const double sigma2 = v[at++];
      PsiSpec psi1 = p1_one ? PsiSpec::identity() : PsiSpec::power(v[at++]);
      PsiSpec psi2 = p2_one ? PsiSpec::identity() : PsiSpec::power(v[at++]);
      Eigen::MatrixXd xis(p, k);
      for (int i = 0; i < p; ++i)
        for (int c = 0; c < k; ++c) xis(i, c) = v[at++];
      return make_spacetime(d, sigma2, phi1, psi1, psi2, std::move(xis));
    };
    return sp;
  }

  if (const auto* ng = dynamic_cast<const NuggetModel*>(model.get())) {
    ParamSpace base = param_space(ng->base_ptr());
    sp.params = base.params;
    const int p = ng->num_variables();
    for (int i = 0; i < p; ++i)
      sp.params.push_back({idx1("tau", i), ParamDomain::above(-1e-12), ng->tau()[i]});
    const int nb = base.size();
    sp.build = [base, p, nb](const Eigen::VectorXd& v) -> ModelPtr {
      ModelPtr inner = base.build(v.head(nb));
      Eigen::VectorXd tau = v.tail(p).cwiseMax(0.0);
      return add_nugget(std::move(inner), std::move(tau));
    };
    return sp;
  }

  if (const auto* as = dynamic_cast<const AsymShiftModel*>(model.get())) {
    ParamSpace base = param_space(as->base_ptr());
    sp.params = base.params;
    const int p = as->num_variables();
    const int d = as->dimension();
    for (int i = 1; i < p; ++i)  // row 0 pinned to zero
      for (int ax = 0; ax < d; ++ax)
        sp.params.push_back({idx2("shift", i, ax), ParamDomain::real(), as->shifts()(i, ax)});
    const int nb = base.size();
    sp.build = [base, p, d, nb](const Eigen::VectorXd& v) -> ModelPtr {
      ModelPtr inner = base.build(v.head(nb));
      Eigen::MatrixXd shifts = Eigen::MatrixXd::Zero(p, d);
      int at = nb;
      for (int i = 1; i < p; ++i)
        for (int ax = 0; ax < d; ++ax) shifts(i, ax) = v[at++];
      return asymmetrize(std::move(inner), std::move(shifts));
    };
    return sp;
  }

  if (const auto* tp = dynamic_cast<const TaperModel*>(model.get())) {
    ParamSpace base = param_space(tp->base_ptr());
    sp.params = base.params;
    sp.params.push_back({"taper.b", ParamDomain::positive(), tp->taper().b});
    sp.params.push_back({"taper.mu", ParamDomain::above(0.5 * (tp->dimension() + 1)),
                         tp->taper().mu});
    const int nb = base.size();
    sp.build = [base, nb](const Eigen::VectorXd& v) -> ModelPtr {
      ModelPtr inner = base.build(v.head(nb));
      return taper(std::move(inner), AskeyParams{v[nb], v[nb + 1]});
    };
    return sp;
  }

  if (const auto* vs = dynamic_cast<const VarianceScaleModel*>(model.get())) {
    if (!vs->gridded())
      throw std::invalid_argument(
          "param_space: variance-scale model with callable fields is not fittable");
    ParamSpace base = param_space(vs->base_ptr());
    sp.params = base.params;  // the surfaces are estimated empirically, not by MLE
    const std::vector<SigmaField> grids = vs->grids();
    sp.build = [base, grids](const Eigen::VectorXd& v) -> ModelPtr {
      return scale_variance(base.build(v), grids);
    };
    return sp;
  }

  throw std::invalid_argument("param_space: family '" + model->family() +
                              "' has no fittable parameterization");
}

// ---------------------------------------------------------------------------
// fitting

struct FitOptions {
  int starts = 5;
  int max_evals = 2000;   // per start
  double ftol = 1e-9;
  double start_spread = 0.5;  // stddev of start perturbations (unconstrained scale)
  std::uint64_t seed = 0;
  int threads = 1;
};

struct FitReport {
  ModelPtr model;
  double loglik = -std::numeric_limits<double>::infinity();
  int evaluations = 0;
  int starts = 0;
  bool converged = false;
  double best = 0.0, second_best = 0.0;  // per-start final log-likelihoods
  std::vector<double> start_logliks;
  std::uint64_t seed = 0;
};

// A stage of the staged protocol: pin some parameters, free others.
struct FitStage {
  std::vector<std::string> free;         // names of parameters to optimize
  std::map<std::string, double> pin;     // values forced before the stage
};

inline FitReport fit_mle(const ModelPtr& init,
                         const std::vector<std::string>& free_names,
                         const FieldSample& sample, const FitOptions& options) {
  sample.check_consistent();
  if (sample.t_count() < 1)
    throw std::invalid_argument("fit_mle: sample is empty");
  ParamSpace space = param_space(init);

  FitReport report;
  report.seed = options.seed;
  if (free_names.empty()) {
    report.model = init;
    report.loglik = loglik(*init, sample).value;
    report.converged = true;
    report.best = report.second_best = report.loglik;
    return report;
  }

  std::vector<int> free_idx;
  std::set<std::string> seen;
  for (const auto& name : free_names) {
    if (!seen.insert(name).second)
      throw std::invalid_argument("fit_mle: duplicate free parameter " + name);
    free_idx.push_back(space.index_of(name));
  }
  const int m = static_cast<int>(free_idx.size());
  const Eigen::VectorXd base_values = space.values();
  for (int i : free_idx)
    if (!space.params[i].domain.contains(base_values[i]))
      throw std::invalid_argument("fit_mle: initial value of " +
                                  space.params[i].name + " is outside its domain");

  Eigen::VectorXd u0(m);
  for (int c = 0; c < m; ++c)
    u0[c] = space.params[free_idx[c]].domain.to_unconstrained(base_values[free_idx[c]]);

  auto rebuild = [&](const Eigen::VectorXd& u) -> ModelPtr {
    Eigen::VectorXd vals = base_values;
    for (int c = 0; c < m; ++c)
      vals[free_idx[c]] = space.params[free_idx[c]].domain.from_unconstrained(u[c]);
    return space.build(vals);
  };
  auto objective = [&](const Eigen::VectorXd& u) -> double {
    try {
      const ModelPtr candidate = rebuild(u);
      const LogLikResult ll = loglik(*candidate, sample);
      return -ll.value;
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  NelderMeadOptions nm;
  nm.max_evals = options.max_evals;
  nm.ftol = options.ftol;

  std::vector<NelderMeadResult> runs(options.starts);
  parallel_for(options.starts, options.threads, [&](long s) {
    Eigen::VectorXd start = u0;
    if (s > 0) {
      std::mt19937_64 rng(options.seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(s));
      std::normal_distribution<double> g(0.0, options.start_spread);
      for (int c = 0; c < m; ++c) start[c] += g(rng);
    }
    runs[s] = nelder_mead(objective, start, nm);
  });

  int best = 0;
  for (int s = 1; s < options.starts; ++s)
    if (runs[s].f < runs[best].f) best = s;
  report.starts = options.starts;
  for (const auto& r : runs) {
    report.evaluations += r.evals;
    report.start_logliks.push_back(-r.f);
    report.converged = report.converged || r.converged;
  }
  std::vector<double> sorted = report.start_logliks;
  std::sort(sorted.rbegin(), sorted.rend());
  report.best = sorted[0];
  report.second_best = sorted.size() > 1 ? sorted[1] : sorted[0];
  report.model = rebuild(runs[best].x);
  report.loglik = -runs[best].f;
  return report;
}

inline FitReport fit_staged(const ModelPtr& init,
                            const std::vector<FitStage>& stages,
                            const FieldSample& sample,
                            const FitOptions& options) {
  if (stages.empty()) throw std::invalid_argument("fit_staged: no stages");
  ModelPtr model = init;
  FitReport last;
  int total_evals = 0;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto& stage = stages[s];
    if (!stage.pin.empty()) {
      ParamSpace space = param_space(model);
      Eigen::VectorXd vals = space.values();
      for (const auto& [name, value] : stage.pin) vals[space.index_of(name)] = value;
      model = space.build(vals);
    }
    FitOptions stage_options = options;
    stage_options.seed = options.seed + 1000003ull * s;
    try {
      last = fit_mle(model, stage.free, sample, stage_options);
    } catch (const std::exception& e) {
      throw std::runtime_error("fit_staged: stage " + std::to_string(s + 1) +
                               " failed: " + e.what());
    }
    model = last.model;
    const ValidityReport vr = validate_model(*model, {25}, 2, 0xacce55);
    if (!vr.pass)
      throw std::runtime_error("fit_staged: stage " + std::to_string(s + 1) +
                               " produced an invalid model (" + vr.summary() + ")");
    total_evals += last.evaluations;
  }
  last.evaluations = total_evals;
  return last;
}

// ---------------------------------------------------------------------------
// data-driven initial values for the multivariate Matern variants:
// sigma from pooled sample standard deviations, nu = 0.5, 1/a = diameter/4,
// beta from the empirical collocated correlation.

inline Eigen::MatrixXd collocated_correlation(const FieldSample& sample) {
  const int p = sample.p();
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) {
      double si = 0, sj = 0, sii = 0, sjj = 0, sij = 0;
      long m = 0;
      for (const auto& r : sample.reps)
        for (int k = 0; k < r.rows(); ++k) {
          const double a = r(k, i), b = r(k, j);
          if (std::isnan(a) || std::isnan(b)) continue;
          si += a;
          sj += b;
          sii += a * a;
          sjj += b * b;
          sij += a * b;
          ++m;
        }
      if (m < 2) continue;
      const double vi = sii / m - si / m * (si / m);
      const double vj = sjj / m - sj / m * (sj / m);
      const double cij = sij / m - si / m * (sj / m);
      if (vi > 0 && vj > 0) {
        corr(i, j) = cij / std::sqrt(vi * vj);
        corr(j, i) = corr(i, j);
      }
    }
  return corr;
}

inline ModelPtr data_driven_init(MultiMaternModel::Variant variant,
                                 const FieldSample& sample) {
  const int p = sample.p();
  const int dim = sample.design.dim();
  const Eigen::VectorXd sigma = sample.pooled_stddev();
  const Eigen::VectorXd nu = Eigen::VectorXd::Constant(p, 0.5);
  const double diam = sample.design.diameter();
  if (!(diam > 0)) throw std::invalid_argument("data_driven_init: degenerate design");
  const double a = 4.0 / diam;

  if (variant == MultiMaternModel::Variant::independent)
    return make_independent_matern(dim, sigma, nu, Eigen::VectorXd::Constant(p, a));

  Eigen::MatrixXd beta = collocated_correlation(sample);
  // shrink toward independence until the validity gate accepts the start
  for (int attempt = 0; attempt < 6; ++attempt) {
    try {
      if (variant == MultiMaternModel::Variant::parsimonious)
        return make_parsimonious_matern(dim, sigma, nu, a, beta);
      Eigen::VectorXd av = Eigen::VectorXd::Constant(2, a);
      return make_full_bivariate_matern(dim, sigma, nu, av, 0.5, a, beta(0, 1));
    } catch (const std::invalid_argument&) {
      beta *= 0.7;
      for (int i = 0; i < p; ++i) beta(i, i) = 1.0;
    }
  }
  throw std::runtime_error("data_driven_init: could not find a valid starting beta");
}

}  // namespace mvcov
