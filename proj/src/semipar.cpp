#include "bregsmooth/semipar.hpp"

#include <cmath>
#include <stdexcept>

#include "bregsmooth/errors.hpp"

namespace bregsmooth {

double working_response(const ExponentialFamily& family, double y) {
  switch (family.kind()) {
    case FamilyKind::gaussian:
      return y;
    case FamilyKind::poisson:
      if (!family.in_support(y))
        throw std::invalid_argument("working_response: poisson response must be a count");
      return std::log(y + 0.5);
    case FamilyKind::bernoulli:
      if (!family.in_support(y))
        throw std::invalid_argument("working_response: bernoulli response must be 0 or 1");
      return std::log((y + 0.5) / (1.5 - y));
  }
  throw std::logic_error("working_response: unreachable");
}

namespace {

Eigen::VectorXd difference_core(const PLDataset& data, const std::vector<double>& yv) {
  const int n = data.n();
  const int q = data.q();
  if (q == 0) return Eigen::VectorXd();
  Eigen::MatrixXd dz(n - 1, q);
  Eigen::VectorXd dy(n - 1);
  for (int i = 1; i < n; ++i) {
    dz.row(i - 1) = data.Z.row(i) - data.Z.row(i - 1);
    dy(i - 1) = yv[i] - yv[i - 1];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dz);
  if (qr.rank() < q)
    throw singular_matrix_error(
        "difference estimator: differenced parametric design is rank deficient "
        "(constant column?)");
  return qr.solve(dy);
}

std::vector<double> partial_residuals(const PLDataset& data, const Eigen::VectorXd& beta) {
  if (beta.size() != data.q())
    throw std::invalid_argument("partial residuals: coefficient length mismatch");
  std::vector<double> r(data.y);
  for (int i = 0; i < data.n(); ++i)
    if (data.q() > 0) r[i] -= data.Z.row(i).dot(beta);
  return r;
}

void require_gaussian(const ExponentialFamily& family, const char* what) {
  if (family.kind() != FamilyKind::gaussian)
    throw std::invalid_argument(
        std::string(what) +
        ": implemented end to end for gaussian responses only; for counts or "
        "binaries use difference_estimator_working (experimental)");
}

}  // namespace

Eigen::VectorXd difference_estimator(const PLDataset& data) {
  return difference_core(data, data.y);
}

Eigen::VectorXd difference_estimator_working(const PLDataset& data,
                                             const ExponentialFamily& family) {
  if (family.kind() == FamilyKind::gaussian) return difference_core(data, data.y);
  std::vector<double> yv(data.y.size());
  for (size_t i = 0; i < yv.size(); ++i) yv[i] = working_response(family, data.y[i]);
  return difference_core(data, yv);
}

LocalFitResult profile_fit(const PLDataset& data, const Eigen::VectorXd& beta,
                           const ExponentialFamily& family, const LocalFitConfig& config) {
  require_gaussian(family, "profile_fit");
  Dataset working = Dataset::from_xy(data.u, partial_residuals(data, beta),
                                     {{data.support_lo, data.support_hi}});
  return fit_observations(working, family, config, false);
}

TwoStageResult two_stage_select(const PLDataset& data, const ExponentialFamily& family,
                                const BregmanDivergence& divergence, Criterion criterion,
                                const LocalFitConfig& base, const GridSpec& grid, int threads) {
  require_gaussian(family, "two_stage_select");
  base.with_bandwidth(1.0).validate();  // bandwidth comes from stage 2
  TwoStageResult out;
  out.beta_diff = difference_estimator(data);

  Dataset working = Dataset::from_xy(data.u, partial_residuals(data, out.beta_diff),
                                     {{data.support_lo, data.support_hi}});
  out.selection =
      select_bandwidth(working, family, divergence, criterion, base, grid, threads);

  const LocalFitConfig cfg = base.with_bandwidth(out.selection.selected_h);
  const int q = data.q();
  Eigen::VectorXd beta = out.beta_diff;
  if (q == 0) {
    out.beta_profile = beta;
    out.a_hat = profile_fit(data, beta, family, cfg);
    out.profile_rounds = 0;
    out.profile_converged = true;
    return out;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data.Z);
  if (qr.rank() < q)
    throw singular_matrix_error("two_stage_select: parametric design is rank deficient");
  Eigen::Map<const Eigen::VectorXd> yvec(data.y.data(), data.n());
  for (int round = 1; round <= 50; ++round) {
    out.profile_rounds = round;
    LocalFitResult fit = profile_fit(data, beta, family, cfg);
    if (fit.failure_count() > 0)
      throw std::runtime_error("two_stage_select: profile smooth failed at " +
                               std::to_string(fit.failure_count()) + " observations");
    Eigen::VectorXd ahat = Eigen::Map<const Eigen::VectorXd>(fit.m_hat.data(), fit.n());
    Eigen::VectorXd beta_new = qr.solve(yvec - ahat);
    const double delta = (beta_new - beta).lpNorm<Eigen::Infinity>();
    beta = beta_new;
    if (delta < base.tolerance) {
      out.profile_converged = true;
      break;
    }
  }
  out.beta_profile = beta;
  out.a_hat = profile_fit(data, beta, family, cfg);
  return out;
}

}  // namespace bregsmooth
