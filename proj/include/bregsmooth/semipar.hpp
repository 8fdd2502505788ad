#pragma once

#include <Eigen/Dense>

#include "bregsmooth/dataset.hpp"
#include "bregsmooth/divergence.hpp"
#include "bregsmooth/family.hpp"
#include "bregsmooth/locfit.hpp"
#include "bregsmooth/loocv.hpp"

namespace bregsmooth {

// maps counts / binaries onto a scale where least squares makes sense;
// identity for gaussian
double working_response(const ExponentialFamily& family, double y);

// least squares of first differences of y on first differences of Z.
// Differencing kills any smooth additive trend in u, so this is a cheap
// root-n estimate of the parametric part.  q = 0 returns an empty vector.
Eigen::VectorXd difference_estimator(const PLDataset& data);

// same after working_response; experimental outside the gaussian family
Eigen::VectorXd difference_estimator_working(const PLDataset& data,
                                             const ExponentialFamily& family);

// smooth of the partial residuals y - Z beta on u at the observations
// (gaussian only)
LocalFitResult profile_fit(const PLDataset& data, const Eigen::VectorXd& beta,
                           const ExponentialFamily& family, const LocalFitConfig& config);

struct TwoStageResult {
  Eigen::VectorXd beta_diff;     // stage 1: difference estimator
  Eigen::VectorXd beta_profile;  // stage 3: profile refit at the selected bandwidth
  BandwidthSelection selection;  // stage 2: search over the partial residuals
  LocalFitResult a_hat;          // smooth component at the observations, final beta
  int profile_rounds = 0;
  bool profile_converged = false;

  double h_hat() const { return selection.selected_h; }
};

// stage 1 difference estimate, stage 2 bandwidth search on y - Z beta_diff,
// stage 3 alternating smooth / least-squares refit to a fixed point
TwoStageResult two_stage_select(const PLDataset& data, const ExponentialFamily& family,
                                const BregmanDivergence& divergence, Criterion criterion,
                                const LocalFitConfig& base, const GridSpec& grid = GridSpec(),
                                int threads = 1);

}  // namespace bregsmooth
