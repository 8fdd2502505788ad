#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bregsmooth/dataset.hpp"
#include "bregsmooth/divergence.hpp"
#include "bregsmooth/family.hpp"
#include "bregsmooth/locfit.hpp"
#include "bregsmooth/loocv.hpp"

namespace bregsmooth {

// theta(u, x) = x' A(u); the local design row at u is the Kronecker product
// (1, t, ..., t^p) (x) X_j, so beta stacks blocks (A, A', ..., A^(p)/p!).
struct VCFitResult {
  std::vector<double> eval_points;
  std::vector<Eigen::VectorXd> beta;  // length d(p+1) per point
  Eigen::MatrixXd A_hat;              // npts x d, first block of beta
  Eigen::MatrixXd A_se;               // sandwich standard errors for A_hat
  std::vector<int> iterations;
  std::vector<char> converged;
  std::vector<char> saturated;
  std::vector<char> failed;
  std::vector<std::string> messages;

  // observation-level views (fit_vc_observations)
  std::vector<double> theta_hat;  // X_i' A(U_i)
  std::vector<double> m_hat;
  std::vector<double> H_star;
  std::vector<double> S_star;
  std::vector<double> y;
  bool at_observations = false;

  int degree = 0;
  int d = 0;
  double bandwidth = 0.0;

  int n() const { return static_cast<int>(eval_points.size()); }
  int failure_count() const;
};

VCFitResult fit_vc(const VCDataset& data, const ExponentialFamily& family,
                   const LocalFitConfig& config, const std::vector<double>& eval_points);

VCFitResult fit_vc_observations(const VCDataset& data, const ExponentialFamily& family,
                                const LocalFitConfig& config, bool with_diagnostics = true);

// H*_i = (e1 (x) X_i)' {S_n*(U_i; beta)}^{-1} (e1 (x) X_i) K_h(0) b''(theta_i) / a
double hat_diagonal_vc(const VCDataset& data, const ExponentialFamily& family,
                       const LocalFitConfig& config, const Eigen::VectorXd& beta, int i);

// response-free analogue without the b'' weights
double s_diagonal_vc(const VCDataset& data, const LocalFitConfig& config, int i);

// deleted fit at observation i by full refit (evaluated at U_i, X_i)
LooApprox loo_exact_vc(const VCDataset& data, const ExponentialFamily& family,
                       const LocalFitConfig& config, int i);

LooApprox loo_approx_vc(const VCFitResult& fit, const ExponentialFamily& family, int i,
                        LooVariant variant = LooVariant::newton);

// df law sum_i H*_i ~ d{(p+1-a) + C n/(n-d) EK(0) |Omega_U| / h}
double empirical_df_vc(int d, int degree, int n, double h, const Kernel& kernel,
                       double support_length, const DFConstants& constants);

PredictionErrorEstimate err_acv_vc(const VCFitResult& fit, const ExponentialFamily& family,
                                   const BregmanDivergence& divergence,
                                   LooVariant variant = LooVariant::newton);
PredictionErrorEstimate err_ecv_vc(const VCFitResult& fit, const ExponentialFamily& family,
                                   const BregmanDivergence& divergence, const Kernel& kernel,
                                   double support_length, const DFConstants& constants);
PredictionErrorEstimate err_hybrid_vc(const VCFitResult& fit, const ExponentialFamily& family,
                                      const BregmanDivergence& divergence);
PredictionErrorEstimate err_hybrid_ecv_vc(const VCFitResult& fit, const ExponentialFamily& family,
                                          const BregmanDivergence& divergence,
                                          const Kernel& kernel, double support_length,
                                          const DFConstants& hat_constants,
                                          const DFConstants& s_constants);

// dispatcher with default Table-2-style constants; cv_exact refits per point
PredictionErrorEstimate err_criteria_vc(const VCDataset& data, const ExponentialFamily& family,
                                        const BregmanDivergence& divergence, Criterion criterion,
                                        const LocalFitConfig& config);

BandwidthSelection select_bandwidth_vc(const VCDataset& data, const ExponentialFamily& family,
                                       const BregmanDivergence& divergence, Criterion criterion,
                                       const LocalFitConfig& base,
                                       const GridSpec& grid = GridSpec(), int threads = 1);

double spacing_statistic_vc(const VCDataset& data);

std::vector<double> bandwidth_grid_vc(const VCDataset& data, const GridSpec& spec,
                                      std::string* rule_out = nullptr);

}  // namespace bregsmooth
