#pragma once

// Model configuration documents: nested key-value (JSON) with one model per
// file. Unknown keys are errors, and numeric round-trips are lossless.

#include <json.hpp>

#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvcov/estimate.hpp"
#include "mvcov/models.hpp"
#include "mvcov/spacetime.hpp"

namespace mvcov {

using json = nlohmann::json;

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object())
    throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
}

inline double get_number(const json& j, const std::string& key,
                         const std::string& where) {
  if (!j.contains(key))
    throw std::invalid_argument("config: missing key '" + key + "' in " + where);
  if (!j[key].is_number())
    throw std::invalid_argument("config: key '" + key + "' in " + where +
                                " must be a number");
  return j[key].get<double>();
}

inline Eigen::VectorXd get_vector(const json& j, const std::string& key,
                                  const std::string& where) {
  if (!j.contains(key) || !j[key].is_array())
    throw std::invalid_argument("config: key '" + key + "' in " + where +
                                " must be an array");
  const auto& arr = j[key];
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number())
      throw std::invalid_argument("config: '" + key + "' in " + where +
                                  " must contain numbers");
    v[static_cast<int>(i)] = arr[i].get<double>();
  }
  return v;
}

inline Eigen::MatrixXd get_matrix(const json& j, const std::string& key,
                                  const std::string& where) {
  if (!j.contains(key) || !j[key].is_array() || j[key].empty())
    throw std::invalid_argument("config: key '" + key + "' in " + where +
                                " must be a non-empty array of rows");
  const auto& rows = j[key];
  const std::size_t cols = rows[0].is_array() ? rows[0].size() : 0;
  if (cols == 0)
    throw std::invalid_argument("config: '" + key + "' rows must be non-empty arrays");
  Eigen::MatrixXd m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!rows[r].is_array() || rows[r].size() != cols)
      throw std::invalid_argument("config: '" + key + "' in " + where +
                                  " has ragged rows");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<int>(r), static_cast<int>(c)) = rows[r][c].get<double>();
  }
  return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline json correlation_to_json(const Correlation& rho) {
  json j;
  if (const auto* m = std::get_if<MaternParams>(&rho.params())) {
    j["type"] = "matern";
    j["nu"] = m->nu;
    j["a"] = m->a;
  } else if (const auto* e = std::get_if<PoweredExpParams>(&rho.params())) {
    j["type"] = "powered_exp";
    j["phi"] = e->phi;
    j["kappa"] = e->kappa;
  } else {
    const auto& a = std::get<AskeyParams>(rho.params());
    j["type"] = "askey";
    j["b"] = a.b;
    j["mu"] = a.mu;
  }
  return j;
}

inline Correlation correlation_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("type"))
    throw std::invalid_argument("config: " + where + " needs a 'type'");
  const std::string type = j["type"].get<std::string>();
  if (type == "matern") {
    check_keys(j, {"type", "nu", "a"}, where);
    return Correlation::matern(get_number(j, "nu", where), get_number(j, "a", where));
  }
  if (type == "powered_exp") {
    check_keys(j, {"type", "phi", "kappa"}, where);
    return Correlation::powered_exp(get_number(j, "phi", where),
                                    get_number(j, "kappa", where));
  }
  if (type == "askey") {
    check_keys(j, {"type", "b", "mu"}, where);
    return Correlation::askey(get_number(j, "b", where), get_number(j, "mu", where));
  }
  throw std::invalid_argument("config: unknown correlation type '" + type +
                              "' in " + where);
}

inline PsiSpec psi_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("type"))
    throw std::invalid_argument("config: " + where + " needs a 'type'");
  const std::string type = j["type"].get<std::string>();
  if (type == "one") {
    check_keys(j, {"type"}, where);
    return PsiSpec::identity();
  }
  if (type == "power") {
    check_keys(j, {"type", "b"}, where);
    return PsiSpec::power(get_number(j, "b", where));
  }
  throw std::invalid_argument("config: unknown psi type '" + type + "' in " + where);
}

inline json psi_to_json(const PsiSpec& psi) {
  json j;
  if (psi.one) {
    j["type"] = "one";
  } else {
    j["type"] = "power";
    j["b"] = psi.b;
  }
  return j;
}

}  // namespace detail

inline json model_to_json(const CrossCovModel& model);

namespace detail {

inline json spacetime_to_json(const SpaceTimeLatentModel& st) {
  json j;
  j["family"] = "spacetime";
  j["space_dim"] = st.space_dim();
  j["sigma2"] = st.sigma2();
  j["phi1"] = st.phi1() == Phi1Kind::exponential ? "exponential" : "inverse_linear";
  j["psi1"] = psi_to_json(st.psi1());
  j["psi2"] = psi_to_json(st.psi2());
  j["xi"] = matrix_to_json(st.xis());
  return j;
}

inline SpaceTimePtr spacetime_from_json(const json& j) {
  check_keys(j, {"family", "space_dim", "sigma2", "phi1", "psi1", "psi2", "xi"},
             "spacetime model");
  const std::string phi1 = j.at("phi1").get<std::string>();
  Phi1Kind kind;
  if (phi1 == "exponential")
    kind = Phi1Kind::exponential;
  else if (phi1 == "inverse_linear")
    kind = Phi1Kind::inverse_linear;
  else
    throw std::invalid_argument("config: unknown phi1 '" + phi1 + "'");
  return make_spacetime(static_cast<int>(get_number(j, "space_dim", "spacetime")),
                        get_number(j, "sigma2", "spacetime"), kind,
                        psi_from_json(j.at("psi1"), "psi1"),
                        psi_from_json(j.at("psi2"), "psi2"),
                        get_matrix(j, "xi", "spacetime"));
}

}  // namespace detail

inline json model_to_json(const CrossCovModel& model) {
  using namespace detail;
  json j;
  if (const auto* sep = dynamic_cast<const SeparableModel*>(&model)) {
    j["family"] = "separable";
    j["dim"] = sep->dimension();
    j["rho"] = correlation_to_json(sep->rho());
    j["R"] = matrix_to_json(sep->r_matrix());
    return j;
  }
  if (const auto* lmc = dynamic_cast<const LmcModel*>(&model)) {
    j["family"] = "lmc";
    j["dim"] = lmc->dimension();
    json rhos = json::array();
    for (const auto& rho : lmc->rhos()) rhos.push_back(correlation_to_json(rho));
    j["rhos"] = rhos;
    j["A"] = matrix_to_json(lmc->loadings());
    return j;
  }
  if (const auto* mm = dynamic_cast<const MultiMaternModel*>(&model)) {
    j["family"] = "multimatern";
    j["dim"] = mm->dimension();
    j["sigma"] = vector_to_json(mm->sigma());
    j["nu"] = vector_to_json(mm->nu());
    switch (mm->variant()) {
      case MultiMaternModel::Variant::parsimonious:
        j["variant"] = "parsimonious";
        j["a"] = mm->a()[0];
        j["beta"] = matrix_to_json(mm->beta());
        break;
      case MultiMaternModel::Variant::independent:
        j["variant"] = "independent";
        j["a"] = vector_to_json(mm->a());
        break;
      case MultiMaternModel::Variant::full_bivariate:
        j["variant"] = "full_bivariate";
        j["a"] = vector_to_json(mm->a());
        j["nu12"] = mm->nu_cross();
        j["a12"] = mm->a_cross();
        j["beta12"] = mm->beta()(0, 1);
        break;
    }
    return j;
  }
  if (const auto* ld = dynamic_cast<const LatentDimModel*>(&model)) {
    j["family"] = "latentdim";
    j["dim"] = ld->dimension();
    j["xi"] = matrix_to_json(ld->xis());
    j["sigma"] = vector_to_json(ld->sigma());
    j["tau"] = ld->tau();
    j["alpha"] = ld->alpha();
    j["beta_sep"] = ld->beta_sep();
    return j;
  }
  if (const auto* as = dynamic_cast<const AsymShiftModel*>(&model)) {
    j["family"] = "asymshift";
    j["base"] = model_to_json(as->base());
    j["shifts"] = matrix_to_json(as->shifts());
    return j;
  }
  if (const auto* vs = dynamic_cast<const VarianceScaleModel*>(&model)) {
    if (!vs->gridded())
      throw std::invalid_argument(
          "model_to_json: variance-scale model with callable fields is not serializable");
    j["family"] = "varscale";
    j["base"] = model_to_json(vs->base());
    j["field_sites"] = matrix_to_json(vs->grids()[0].sites);
    Eigen::MatrixXd values(vs->grids()[0].values.size(),
                           static_cast<int>(vs->grids().size()));
    for (std::size_t i = 0; i < vs->grids().size(); ++i)
      values.col(static_cast<int>(i)) = vs->grids()[i].values;
    j["field_values"] = matrix_to_json(values);
    return j;
  }
  if (const auto* tp = dynamic_cast<const TaperModel*>(&model)) {
    j["family"] = "taper";
    j["base"] = model_to_json(tp->base());
    j["b"] = tp->taper().b;
    j["mu"] = tp->taper().mu;
    return j;
  }
  if (const auto* ng = dynamic_cast<const NuggetModel*>(&model)) {
    j["family"] = "nugget";
    j["base"] = model_to_json(ng->base());
    j["tau"] = vector_to_json(ng->tau());
    return j;
  }
  if (const auto* st = dynamic_cast<const SpaceTimeLatentModel*>(&model))
    return spacetime_to_json(*st);
  if (const auto* sd = dynamic_cast<const SpaceTimeDelayModel*>(&model)) {
    j["family"] = "spacetime_delay";
    j["base"] = spacetime_to_json(sd->base());
    j["lambda_xi"] = vector_to_json(sd->lambda_xi());
    return j;
  }
  if (const auto* sv = dynamic_cast<const SpaceTimeVelocityModel*>(&model)) {
    j["family"] = "spacetime_velocity";
    j["base"] = spacetime_to_json(sv->base());
    j["gamma_h"] = vector_to_json(sv->gamma_h());
    j["gamma_xi"] = vector_to_json(sv->gamma_xi());
    return j;
  }
  throw std::invalid_argument("model_to_json: unsupported model family '" +
                              model.family() + "'");
}

inline ModelPtr model_from_json(const json& j) {
  using namespace detail;
  if (!j.is_object() || !j.contains("family"))
    throw std::invalid_argument("config: model object needs a 'family'");
  const std::string family = j["family"].get<std::string>();

  if (family == "separable") {
    check_keys(j, {"family", "dim", "rho", "R"}, "separable model");
    return make_separable(static_cast<int>(get_number(j, "dim", "separable")),
                          correlation_from_json(j.at("rho"), "rho"),
                          get_matrix(j, "R", "separable"));
  }
  if (family == "lmc") {
    check_keys(j, {"family", "dim", "rhos", "A"}, "lmc model");
    if (!j.at("rhos").is_array())
      throw std::invalid_argument("config: lmc 'rhos' must be an array");
    std::vector<Correlation> rhos;
    for (const auto& rj : j.at("rhos"))
      rhos.push_back(correlation_from_json(rj, "lmc rho"));
    return make_lmc(static_cast<int>(get_number(j, "dim", "lmc")), std::move(rhos),
                    get_matrix(j, "A", "lmc"));
  }
  if (family == "multimatern") {
    const std::string variant =
        j.contains("variant") ? j["variant"].get<std::string>() : "parsimonious";
    const int dim = static_cast<int>(get_number(j, "dim", "multimatern"));
    const Eigen::VectorXd sigma = get_vector(j, "sigma", "multimatern");
    const Eigen::VectorXd nu = get_vector(j, "nu", "multimatern");
    if (variant == "parsimonious") {
      check_keys(j, {"family", "variant", "dim", "sigma", "nu", "a", "beta"},
                 "parsimonious multimatern");
      return make_parsimonious_matern(dim, sigma, nu,
                                      get_number(j, "a", "multimatern"),
                                      get_matrix(j, "beta", "multimatern"));
    }
    if (variant == "independent") {
      check_keys(j, {"family", "variant", "dim", "sigma", "nu", "a"},
                 "independent multimatern");
      return make_independent_matern(dim, sigma, nu,
                                     get_vector(j, "a", "multimatern"));
    }
    if (variant == "full_bivariate") {
      check_keys(j, {"family", "variant", "dim", "sigma", "nu", "a", "nu12", "a12",
                     "beta12"},
                 "full bivariate multimatern");
      return make_full_bivariate_matern(
          dim, sigma, nu, get_vector(j, "a", "multimatern"),
          get_number(j, "nu12", "multimatern"), get_number(j, "a12", "multimatern"),
          get_number(j, "beta12", "multimatern"));
    }
    throw std::invalid_argument("config: unknown multimatern variant '" + variant + "'");
  }
  if (family == "latentdim") {
    check_keys(j, {"family", "dim", "xi", "sigma", "tau", "alpha", "beta_sep"},
               "latentdim model");
    return make_latentdim(static_cast<int>(get_number(j, "dim", "latentdim")),
                          get_matrix(j, "xi", "latentdim"),
                          get_vector(j, "sigma", "latentdim"),
                          get_number(j, "tau", "latentdim"),
                          get_number(j, "alpha", "latentdim"),
                          get_number(j, "beta_sep", "latentdim"));
  }
  if (family == "asymshift") {
    check_keys(j, {"family", "base", "shifts"}, "asymshift model");
    return asymmetrize(model_from_json(j.at("base")),
                       get_matrix(j, "shifts", "asymshift"));
  }
  if (family == "varscale") {
    check_keys(j, {"family", "base", "field_sites", "field_values"}, "varscale model");
    const Eigen::MatrixXd sites = get_matrix(j, "field_sites", "varscale");
    const Eigen::MatrixXd values = get_matrix(j, "field_values", "varscale");
    std::vector<SigmaField> grids;
    for (int c = 0; c < values.cols(); ++c)
      grids.push_back(SigmaField{sites, values.col(c)});
    return scale_variance(model_from_json(j.at("base")), std::move(grids));
  }
  if (family == "taper") {
    check_keys(j, {"family", "base", "b", "mu"}, "taper model");
    return taper(model_from_json(j.at("base")),
                 AskeyParams{get_number(j, "b", "taper"), get_number(j, "mu", "taper")});
  }
  if (family == "nugget") {
    check_keys(j, {"family", "base", "tau"}, "nugget model");
    return add_nugget(model_from_json(j.at("base")), get_vector(j, "tau", "nugget"));
  }
  if (family == "spacetime") return spacetime_from_json(j);
  if (family == "spacetime_delay") {
    check_keys(j, {"family", "base", "lambda_xi"}, "spacetime_delay model");
    return std::make_shared<SpaceTimeDelayModel>(
        spacetime_from_json(j.at("base")),
        get_vector(j, "lambda_xi", "spacetime_delay"));
  }
  if (family == "spacetime_velocity") {
    check_keys(j, {"family", "base", "gamma_h", "gamma_xi"},
               "spacetime_velocity model");
    return std::make_shared<SpaceTimeVelocityModel>(
        spacetime_from_json(j.at("base")),
        get_vector(j, "gamma_h", "spacetime_velocity"),
        get_vector(j, "gamma_xi", "spacetime_velocity"));
  }
  throw std::invalid_argument("config: unknown model family '" + family + "'");
}

// ---------------------------------------------------------------------------
// fit plans and fit reports

inline std::vector<FitStage> stages_from_json(const json& j) {
  if (!j.is_object() || !j.contains("stages") || !j["stages"].is_array())
    throw std::invalid_argument("fit plan: needs a 'stages' array");
  detail::check_keys(j, {"stages"}, "fit plan");
  std::vector<FitStage> stages;
  for (const auto& sj : j["stages"]) {
    detail::check_keys(sj, {"free", "pin"}, "fit stage");
    FitStage stage;
    if (sj.contains("free"))
      for (const auto& name : sj["free"]) stage.free.push_back(name.get<std::string>());
    if (sj.contains("pin"))
      for (const auto& [name, value] : sj["pin"].items())
        stage.pin[name] = value.get<double>();
    stages.push_back(std::move(stage));
  }
  if (stages.empty()) throw std::invalid_argument("fit plan: no stages given");
  return stages;
}

inline json fit_report_to_json(const FitReport& report) {
  json j;
  j["model"] = model_to_json(*report.model);
  j["loglik"] = report.loglik;
  j["evaluations"] = report.evaluations;
  j["starts"] = report.starts;
  j["seed"] = report.seed;
  j["converged"] = report.converged;
  j["best"] = report.best;
  j["second_best"] = report.second_best;
  j["start_logliks"] = report.start_logliks;
  return j;
}

}  // namespace mvcov
