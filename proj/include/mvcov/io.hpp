#pragma once

// Plain-text I/O: the (site, replication) CSV dataset format, atomic output
// files, and the tidy tables emitted for external plotting.

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvcov/cokrige.hpp"
#include "mvcov/design.hpp"
#include "mvcov/empirical.hpp"

namespace mvcov {

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline bool is_missing_field(const std::string& s) {
  const std::string t = trim(s);
  return t.empty() || t == "NA" || t == "na" || t == "nan" || t == "NaN";
}

inline double parse_double(const std::string& s, const std::string& path,
                           long line_no, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used])))
      ++used;
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw io_error(path + ":" + std::to_string(line_no) + ": cannot parse " +
                   what + " from '" + s + "'");
  }
}

inline long parse_long(const std::string& s, const std::string& path,
                       long line_no, const std::string& what) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw io_error(path + ":" + std::to_string(line_no) + ": cannot parse " +
                   what + " from '" + s + "'");
  }
}

}  // namespace detail

// Writes through a temporary file and renames into place, so a failing
// command never leaves a partial output file behind.
inline void atomic_write(const std::string& path,
                         const std::function<void(std::ostream&)>& writer) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    if (!f) throw io_error("cannot open " + tmp + " for writing");
    writer(f);
    f.flush();
    if (!f) throw io_error("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw io_error("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

inline std::vector<std::string> default_variable_names(int p) {
  std::vector<std::string> names;
  for (int i = 1; i <= p; ++i) names.push_back("Z" + std::to_string(i));
  return names;
}

inline std::vector<std::string> coordinate_names(int dim, bool has_time) {
  std::vector<std::string> names;
  const int spatial = has_time ? dim - 1 : dim;
  static const char* xyz[3] = {"x", "y", "z"};
  for (int c = 0; c < spatial; ++c)
    names.push_back(c < 3 ? xyz[c] : "x" + std::to_string(c + 1));
  if (has_time) names.push_back("t");
  return names;
}

// Dataset layout: one row per (site, replication) with columns
//   site, <coordinates...>, rep, <variables...>
// Missing variable entries are empty or NA.
inline void write_dataset(std::ostream& os, const FieldSample& sample,
                          const std::vector<std::string>& var_names) {
  const int n = sample.n(), p = sample.p(), d = sample.design.dim();
  if (static_cast<int>(var_names.size()) != p)
    throw std::invalid_argument("write_dataset: variable name count mismatch");
  os << "site";
  for (const auto& c : coordinate_names(d, sample.design.has_time)) os << ',' << c;
  os << ",rep";
  for (const auto& v : var_names) os << ',' << v;
  os << '\n';
  for (int t = 0; t < sample.t_count(); ++t)
    for (int k = 0; k < n; ++k) {
      os << k;
      for (int c = 0; c < d; ++c)
        os << ',' << detail::format_double(sample.design.sites(k, c));
      os << ',' << t;
      for (int i = 0; i < p; ++i) {
        const double v = sample.reps[t](k, i);
        os << ',';
        if (!std::isnan(v)) os << detail::format_double(v);
      }
      os << '\n';
    }
}

inline void write_dataset_file(const std::string& path, const FieldSample& sample,
                               const std::vector<std::string>& var_names) {
  atomic_write(path, [&](std::ostream& os) { write_dataset(os, sample, var_names); });
}

struct Dataset {
  FieldSample sample;
  std::vector<std::string> var_names;
};

inline Dataset read_dataset_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open " + path);
  std::string line;
  long line_no = 0;

  if (!std::getline(f, line)) throw io_error(path + ":1: empty file");
  ++line_no;
  const auto header = detail::split_csv(line);
  if (header.size() < 4 || detail::trim(header[0]) != "site")
    throw io_error(path + ":1: header must be site,<coords...>,rep,<variables...>");
  int rep_col = -1;
  for (std::size_t c = 1; c < header.size(); ++c)
    if (detail::trim(header[c]) == "rep") {
      rep_col = static_cast<int>(c);
      break;
    }
  if (rep_col < 2)
    throw io_error(path + ":1: header needs at least one coordinate column before 'rep'");
  const int d = rep_col - 1;
  const int p = static_cast<int>(header.size()) - rep_col - 1;
  if (p < 1) throw io_error(path + ":1: header needs at least one variable column");
  Dataset out;
  for (int i = 0; i < p; ++i)
    out.var_names.push_back(detail::trim(header[rep_col + 1 + i]));
  const bool has_time = detail::trim(header[rep_col - 1]) == "t" && d >= 2;

  struct Row {
    long site, rep;
    Eigen::VectorXd coords;
    Eigen::VectorXd values;
    long line_no;
  };
  std::vector<Row> rows;
  while (std::getline(f, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv(line);
    if (static_cast<int>(fields.size()) != static_cast<int>(header.size()))
      throw io_error(path + ":" + std::to_string(line_no) + ": expected " +
                     std::to_string(header.size()) + " fields, got " +
                     std::to_string(fields.size()));
    Row row;
    row.line_no = line_no;
    row.site = detail::parse_long(fields[0], path, line_no, "site id");
    row.coords.resize(d);
    for (int c = 0; c < d; ++c)
      row.coords[c] = detail::parse_double(fields[1 + c], path, line_no, "coordinate");
    row.rep = detail::parse_long(fields[rep_col], path, line_no, "replication id");
    row.values.resize(p);
    bool any = false;
    for (int i = 0; i < p; ++i) {
      const std::string& s = fields[rep_col + 1 + i];
      if (detail::is_missing_field(s)) {
        row.values[i] = std::nan("");
      } else {
        row.values[i] = detail::parse_double(s, path, line_no, "value");
        any = true;
      }
    }
    if (!any)
      throw io_error(path + ":" + std::to_string(line_no) +
                     ": row has no observed variables");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw io_error(path + ": no data rows");

  std::map<long, int> site_index;
  std::map<long, int> rep_index;
  std::vector<Eigen::VectorXd> site_coords;
  for (const auto& row : rows) {
    auto [it, inserted] = site_index.insert({row.site, static_cast<int>(site_coords.size())});
    if (inserted) {
      site_coords.push_back(row.coords);
    } else if ((site_coords[it->second] - row.coords).norm() > 0.0) {
      throw io_error(path + ":" + std::to_string(row.line_no) + ": site " +
                     std::to_string(row.site) +
                     " has inconsistent coordinates across rows");
    }
    rep_index.insert({row.rep, static_cast<int>(rep_index.size())});
  }

  const int n = static_cast<int>(site_coords.size());
  const int t_count = static_cast<int>(rep_index.size());
  FieldSample& sample = out.sample;
  sample.design.sites.resize(n, d);
  sample.design.has_time = has_time;
  for (int k = 0; k < n; ++k) sample.design.sites.row(k) = site_coords[k].transpose();
  sample.reps.assign(t_count, Eigen::MatrixXd::Constant(n, p, std::nan("")));
  std::map<std::pair<int, int>, long> seen;
  for (const auto& row : rows) {
    const int k = site_index[row.site];
    const int t = rep_index[row.rep];
    if (!seen.insert({{k, t}, row.line_no}).second)
      throw io_error(path + ":" + std::to_string(row.line_no) +
                     ": duplicate (site, rep) row");
    sample.reps[t].row(k) = row.values.transpose();
  }
  return out;
}

// Target sites for prediction: columns site,<coords...>
inline SpatialDesign read_sites_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw io_error(path + ":1: empty file");
  auto header = detail::split_csv(line);
  if (header.size() < 2 || detail::trim(header[0]) != "site")
    throw io_error(path + ":1: header must be site,<coords...>");
  const int d = static_cast<int>(header.size()) - 1;
  const bool has_time = detail::trim(header.back()) == "t" && d >= 2;
  std::vector<Eigen::VectorXd> coords;
  long line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv(line);
    if (static_cast<int>(fields.size()) != d + 1)
      throw io_error(path + ":" + std::to_string(line_no) + ": expected " +
                     std::to_string(d + 1) + " fields");
    Eigen::VectorXd c(d);
    for (int i = 0; i < d; ++i)
      c[i] = detail::parse_double(fields[1 + i], path, line_no, "coordinate");
    coords.push_back(std::move(c));
  }
  if (coords.empty()) throw io_error(path + ": no sites");
  SpatialDesign out;
  out.has_time = has_time;
  out.sites.resize(static_cast<int>(coords.size()), d);
  for (std::size_t k = 0; k < coords.size(); ++k)
    out.sites.row(static_cast<int>(k)) = coords[k].transpose();
  return out;
}

// ---------------------------------------------------------------------------
// tidy output tables

// one row per bin x (i, j): lag coordinates, pair count, estimate
inline void write_empirical_table(std::ostream& os, const EmpiricalTable& table,
                                  const std::vector<std::string>& var_names,
                                  int dim, bool distance_mode) {
  if (distance_mode) {
    os << "dist";
  } else {
    const auto names = coordinate_names(dim, false);
    for (int c = 0; c < dim; ++c) os << (c ? "," : "") << "lag_" << names[c];
  }
  os << ",pairs,var_i,var_j,estimate,terms\n";
  for (const auto& bin : table) {
    for (std::size_t i = 0; i < var_names.size(); ++i)
      for (std::size_t j = 0; j < var_names.size(); ++j) {
        if (distance_mode)
          os << detail::format_double(bin.lag[0]);
        else
          for (int c = 0; c < dim; ++c)
            os << (c ? "," : "") << detail::format_double(bin.lag[c]);
        os << ',' << bin.pair_count << ',' << var_names[i] << ',' << var_names[j]
           << ',';
        const double v = bin.value(static_cast<int>(i), static_cast<int>(j));
        if (!std::isnan(v)) os << detail::format_double(v);
        os << ',' << static_cast<long>(bin.terms(static_cast<int>(i), static_cast<int>(j)))
           << '\n';
      }
  }
}

// columns fixed for regression tests: model,variable,rmse,crps,repeats,seed
inline void write_score_table(std::ostream& os, const ScoreTable& table,
                              const std::vector<std::string>& var_names) {
  os << "model,variable,rmse,crps,repeats,seed\n";
  for (const auto& s : table.scores)
    os << table.model_name << ',' << var_names[s.variable] << ','
       << detail::format_double(s.rmse) << ',' << detail::format_double(s.crps)
       << ',' << table.repeats << ',' << table.seed << '\n';
}

inline void write_prediction_table(std::ostream& os, const PredictionResult& pred,
                                   const std::vector<std::string>& var_names) {
  const int d = pred.targets.dim();
  os << "site";
  for (const auto& c : coordinate_names(d, pred.targets.has_time)) os << ',' << c;
  os << ",rep,variable,mean,variance\n";
  for (int t = 0; t < pred.mean.cols(); ++t)
    for (int k = 0; k < pred.targets.n(); ++k)
      for (int j = 0; j < pred.p; ++j) {
        os << k;
        for (int c = 0; c < d; ++c)
          os << ',' << detail::format_double(pred.targets.sites(k, c));
        const int row = pred.index(k, j);
        os << ',' << t << ',' << var_names[j] << ','
           << detail::format_double(pred.mean(row, t)) << ','
           << detail::format_double(pred.variance(row, t)) << '\n';
      }
}

}  // namespace mvcov
