#include "bregsmooth/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace bregsmooth {

namespace {

std::vector<int> sort_order(const std::vector<double>& key) {
  std::vector<int> order(key.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return key[a] < key[b]; });
  return order;
}

void check_support(const std::vector<double>& v, double lo, double hi, const char* what) {
  if (!(lo < hi)) throw std::invalid_argument(std::string(what) + ": empty support interval");
  for (double t : v)
    if (t < lo || t > hi)
      throw std::invalid_argument(std::string(what) + ": point outside declared support");
}

void check_finite(const std::vector<double>& v, const char* what) {
  for (double t : v)
    if (!std::isfinite(t)) throw std::invalid_argument(std::string(what) + ": non-finite value");
}

// splits on commas or whitespace; returns false for rows that do not parse
// as numbers (header detection)
bool parse_row(const std::string& line, std::vector<double>* out) {
  out->clear();
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    std::istringstream cs(cell);
    double v;
    if (!(cs >> v)) return false;
    std::string rest;
    if (cs >> rest) return false;
    out->push_back(v);
  }
  return !out->empty();
}

std::vector<std::vector<double>> read_numeric_rows(const std::string& path, int min_cols) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::vector<double> row;
  std::string line;
  std::size_t ncols = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    if (!parse_row(line, &row)) {
      if (first_content) {  // header row
        first_content = false;
        continue;
      }
      throw std::invalid_argument("'" + path + "': non-numeric row '" + line + "'");
    }
    first_content = false;
    if (ncols == 0) {
      ncols = row.size();
      if (static_cast<int>(ncols) < min_cols)
        throw std::invalid_argument("'" + path + "': expected at least " +
                                    std::to_string(min_cols) + " columns");
    } else if (row.size() != ncols) {
      throw std::invalid_argument("'" + path + "': ragged row '" + line + "'");
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw std::invalid_argument("'" + path + "': no data rows");
  return rows;
}

}  // namespace

Dataset Dataset::from_xy(std::vector<double> x, std::vector<double> y,
                         std::optional<std::pair<double, double>> support) {
  if (x.size() != y.size()) throw std::invalid_argument("dataset: x and y length mismatch");
  if (x.size() < 2) throw std::invalid_argument("dataset: need at least two observations");
  check_finite(x, "dataset x");
  check_finite(y, "dataset y");
  Dataset d;
  std::vector<int> order = sort_order(x);
  d.x.reserve(x.size());
  d.y.reserve(y.size());
  for (int i : order) {
    d.x.push_back(x[i]);
    d.y.push_back(y[i]);
  }
  if (support) {
    d.support_lo = support->first;
    d.support_hi = support->second;
    check_support(d.x, d.support_lo, d.support_hi, "dataset");
  } else {
    d.support_lo = d.x.front();
    d.support_hi = d.x.back();
  }
  return d;
}

void Dataset::check_family(const ExponentialFamily& family) const {
  for (double v : y) family.check_response(v);
}

VCDataset VCDataset::from_parts(std::vector<double> u, Eigen::MatrixXd X, std::vector<double> y,
                                std::optional<std::pair<double, double>> support) {
  const int n = static_cast<int>(u.size());
  if (X.rows() != n || static_cast<int>(y.size()) != n)
    throw std::invalid_argument("vc dataset: row count mismatch");
  if (X.cols() < 1) throw std::invalid_argument("vc dataset: need at least one covariate column");
  if (n < 2) throw std::invalid_argument("vc dataset: need at least two observations");
  check_finite(u, "vc dataset u");
  check_finite(y, "vc dataset y");
  if (!X.allFinite()) throw std::invalid_argument("vc dataset X: non-finite value");
  VCDataset d;
  std::vector<int> order = sort_order(u);
  d.u.reserve(n);
  d.y.reserve(n);
  d.X.resize(n, X.cols());
  for (int k = 0; k < n; ++k) {
    d.u.push_back(u[order[k]]);
    d.y.push_back(y[order[k]]);
    d.X.row(k) = X.row(order[k]);
  }
  if (support) {
    d.support_lo = support->first;
    d.support_hi = support->second;
    check_support(d.u, d.support_lo, d.support_hi, "vc dataset");
  } else {
    d.support_lo = d.u.front();
    d.support_hi = d.u.back();
  }
  return d;
}

void VCDataset::check_family(const ExponentialFamily& family) const {
  for (double v : y) family.check_response(v);
}

PLDataset PLDataset::from_parts(std::vector<double> u, Eigen::MatrixXd Z, std::vector<double> y,
                                std::optional<std::pair<double, double>> support) {
  const int n = static_cast<int>(u.size());
  if (Z.rows() != n || static_cast<int>(y.size()) != n)
    throw std::invalid_argument("pl dataset: row count mismatch");
  if (n < 3) throw std::invalid_argument("pl dataset: need at least three observations");
  if (n <= Z.cols() + 1)
    throw std::invalid_argument("pl dataset: need more rows than parametric columns plus one");
  check_finite(u, "pl dataset u");
  check_finite(y, "pl dataset y");
  if (!Z.allFinite()) throw std::invalid_argument("pl dataset Z: non-finite value");
  PLDataset d;
  std::vector<int> order = sort_order(u);
  d.u.reserve(n);
  d.y.reserve(n);
  d.Z.resize(n, Z.cols());
  for (int k = 0; k < n; ++k) {
    d.u.push_back(u[order[k]]);
    d.y.push_back(y[order[k]]);
    d.Z.row(k) = Z.row(order[k]);
  }
  if (support) {
    d.support_lo = support->first;
    d.support_hi = support->second;
    check_support(d.u, d.support_lo, d.support_hi, "pl dataset");
  } else {
    d.support_lo = d.u.front();
    d.support_hi = d.u.back();
  }
  return d;
}

Dataset read_dataset_csv(const std::string& path,
                         std::optional<std::pair<double, double>> support) {
  auto rows = read_numeric_rows(path, 2);
  if (rows[0].size() != 2)
    throw std::invalid_argument("'" + path + "': univariate data needs exactly columns x,y");
  std::vector<double> x, y;
  x.reserve(rows.size());
  y.reserve(rows.size());
  for (auto& r : rows) {
    x.push_back(r[0]);
    y.push_back(r[1]);
  }
  return Dataset::from_xy(std::move(x), std::move(y), support);
}

VCDataset read_vc_csv(const std::string& path,
                      std::optional<std::pair<double, double>> support) {
  auto rows = read_numeric_rows(path, 3);
  const int d = static_cast<int>(rows[0].size()) - 2;
  const int n = static_cast<int>(rows.size());
  std::vector<double> u, y;
  Eigen::MatrixXd X(n, d);
  u.reserve(n);
  y.reserve(n);
  for (int i = 0; i < n; ++i) {
    u.push_back(rows[i][0]);
    for (int j = 0; j < d; ++j) X(i, j) = rows[i][j + 1];
    y.push_back(rows[i].back());
  }
  return VCDataset::from_parts(std::move(u), std::move(X), std::move(y), support);
}

PLDataset read_pl_csv(const std::string& path,
                      std::optional<std::pair<double, double>> support) {
  auto rows = read_numeric_rows(path, 3);
  const int q = static_cast<int>(rows[0].size()) - 2;
  const int n = static_cast<int>(rows.size());
  std::vector<double> u, y;
  Eigen::MatrixXd Z(n, q);
  u.reserve(n);
  y.reserve(n);
  for (int i = 0; i < n; ++i) {
    u.push_back(rows[i][0]);
    for (int j = 0; j < q; ++j) Z(i, j) = rows[i][j + 1];
    y.push_back(rows[i].back());
  }
  return PLDataset::from_parts(std::move(u), std::move(Z), std::move(y), support);
}

}  // namespace bregsmooth
