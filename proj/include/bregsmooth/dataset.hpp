#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bregsmooth/family.hpp"

namespace bregsmooth {

// Univariate design, sorted by x on ingest (ties allowed).
struct Dataset {
  std::vector<double> x;
  std::vector<double> y;
  double support_lo = 0.0;
  double support_hi = 0.0;

  int n() const { return static_cast<int>(x.size()); }
  double support_length() const { return support_hi - support_lo; }

  // sorts jointly by x; support defaults to [min(x), max(x)]
  static Dataset from_xy(std::vector<double> x, std::vector<double> y,
                         std::optional<std::pair<double, double>> support = std::nullopt);

  void check_family(const ExponentialFamily& family) const;
};

// Varying-coefficient design: theta(u, x) = x' A(u), rows sorted by u.
struct VCDataset {
  std::vector<double> u;
  Eigen::MatrixXd X;  // n rows, d columns (include a ones column for an intercept)
  std::vector<double> y;
  double support_lo = 0.0;
  double support_hi = 0.0;

  int n() const { return static_cast<int>(u.size()); }
  int d() const { return static_cast<int>(X.cols()); }
  double support_length() const { return support_hi - support_lo; }

  static VCDataset from_parts(std::vector<double> u, Eigen::MatrixXd X, std::vector<double> y,
                              std::optional<std::pair<double, double>> support = std::nullopt);

  void check_family(const ExponentialFamily& family) const;
};

// Partially linear design: theta(u, z) = a(u) + z' beta.
struct PLDataset {
  std::vector<double> u;
  Eigen::MatrixXd Z;  // n rows, q columns, no intercept column
  std::vector<double> y;
  double support_lo = 0.0;
  double support_hi = 0.0;

  int n() const { return static_cast<int>(u.size()); }
  int q() const { return static_cast<int>(Z.cols()); }

  static PLDataset from_parts(std::vector<double> u, Eigen::MatrixXd Z, std::vector<double> y,
                              std::optional<std::pair<double, double>> support = std::nullopt);
};

// CSV readers.  Columns: univariate "x,y"; varying-coefficient
// "u,x1,...,xd,y"; partially linear "u,z1,...,zq,y".  A header row is
// detected and skipped; '#' lines are comments.
Dataset read_dataset_csv(const std::string& path,
                         std::optional<std::pair<double, double>> support = std::nullopt);
VCDataset read_vc_csv(const std::string& path,
                      std::optional<std::pair<double, double>> support = std::nullopt);
PLDataset read_pl_csv(const std::string& path,
                      std::optional<std::pair<double, double>> support = std::nullopt);

}  // namespace bregsmooth
