#include "bregsmooth/loocv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bregsmooth/errors.hpp"
#include "bregsmooth/kernel.hpp"
#include "bregsmooth/parallel.hpp"

namespace bregsmooth {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kQuietNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kLeverageCeiling = 1.0 - 1e-10;

void check_degree_range(int degree) {
  if (degree < 0 || degree > 3)
    throw std::invalid_argument("df constants: calibrated for degrees 0..3 only");
}
}  // namespace

DFConstants DFConstants::lookup(int degree, Design design) {
  check_degree_range(degree);
  if (design == Design::fixed) {
    if (degree <= 1) return {0.55, 1.0};
    return {1.55, 1.0};
  }
  switch (degree) {
    case 0: return {0.30, 0.99};
    case 1: return {0.70, 1.03};
    case 2: return {1.30, 0.99};
    default: return {1.70, 1.03};
  }
}

DFConstants DFConstants::bernoulli_hat(int degree) {
  check_degree_range(degree);
  if (degree == 1) return {0.70, 1.09};
  return lookup(degree, Design::random);
}

DFConstants DFConstants::bernoulli_s(int degree) {
  check_degree_range(degree);
  if (degree == 1) return {0.70, 1.03};
  return lookup(degree, Design::random);
}

DFConstants default_hat_constants(FamilyKind family, int degree) {
  return family == FamilyKind::bernoulli ? DFConstants::bernoulli_hat(degree)
                                         : DFConstants::lookup(degree, DFConstants::Design::random);
}

DFConstants default_s_constants(FamilyKind family, int degree) {
  return family == FamilyKind::bernoulli ? DFConstants::bernoulli_s(degree)
                                         : DFConstants::lookup(degree, DFConstants::Design::random);
}

double empirical_df(int degree, int n, double h, const Kernel& kernel, double support_length,
                    const DFConstants& constants) {
  if (n < 2) throw std::invalid_argument("empirical_df: need n >= 2");
  if (!(h > 0.0)) throw std::invalid_argument("empirical_df: bandwidth must be positive");
  if (!(support_length > 0.0))
    throw std::invalid_argument("empirical_df: support length must be positive");
  const double ek0 = equivalent_kernel_at_zero(kernel, degree);
  return (degree + 1 - constants.a) +
         constants.C * (static_cast<double>(n) / (n - 1)) * ek0 * support_length / h;
}

Criterion parse_criterion(std::string_view token) {
  if (token == "cv") return Criterion::cv_exact;
  if (token == "acv") return Criterion::acv;
  if (token == "ecv") return Criterion::ecv;
  if (token == "hybrid") return Criterion::hybrid;
  if (token == "hybrid-ecv") return Criterion::hybrid_ecv;
  throw std::invalid_argument("criterion: unknown token (expected cv|acv|ecv|hybrid|hybrid-ecv)");
}

const char* criterion_name(Criterion c) {
  switch (c) {
    case Criterion::cv_exact: return "cv";
    case Criterion::acv: return "acv";
    case Criterion::ecv: return "ecv";
    case Criterion::hybrid: return "hybrid";
    case Criterion::hybrid_ecv: return "hybrid-ecv";
  }
  return "?";
}

PointFit loo_exact(const Dataset& data, const ExponentialFamily& family,
                   const LocalFitConfig& config, int i) {
  const int n = data.n();
  if (i < 0 || i >= n) throw std::invalid_argument("loo_exact: index out of range");
  if (n < 3) throw insufficient_data_error("loo_exact: need at least three observations");
  std::vector<double> x, y;
  x.reserve(n - 1);
  y.reserve(n - 1);
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    x.push_back(data.x[j]);
    y.push_back(data.y[j]);
  }
  Dataset reduced =
      Dataset::from_xy(std::move(x), std::move(y), {{data.support_lo, data.support_hi}});
  return fit_at(reduced, family, config, data.x[i]);
}

namespace {

void require_observation_fit(const LocalFitResult& fit, bool need_hat, bool need_s) {
  if (!fit.at_observations || fit.y.empty())
    throw std::invalid_argument("criterion needs a fit evaluated at the observations");
  if (need_hat && fit.H.empty())
    throw std::invalid_argument("criterion needs hat diagonals; refit with diagnostics");
  if (need_s && fit.S_diag.empty())
    throw std::invalid_argument("criterion needs S diagonals; refit with diagnostics");
}

double leverage_ratio(double v, const char* what) {
  if (!(v < kLeverageCeiling))
    throw leverage_error(std::string(what) + " at or above 1; leave-one-out factor blows up");
  return v / (1.0 - v);
}

}  // namespace

LooApprox loo_approx(const LocalFitResult& fit, const ExponentialFamily& family, int i,
                     LooVariant variant) {
  require_observation_fit(fit, variant == LooVariant::newton, variant == LooVariant::lower_bound);
  if (i < 0 || i >= fit.n()) throw std::invalid_argument("loo_approx: index out of range");
  if (fit.failed[i]) throw std::runtime_error("loo_approx: fit failed at this observation");
  const double d = fit.y[i] - fit.m_hat[i];
  const double b2 = family.variance_function(family.clamp_theta(fit.theta_hat[i]).first);
  if (variant == LooVariant::newton) {
    const double r = leverage_ratio(fit.H[i], "hat diagonal");
    return {fit.theta_hat[i] - r * d / b2, fit.m_hat[i] - r * d};
  }
  if (family.kind() != FamilyKind::bernoulli)
    throw std::invalid_argument("lower-bound leave-one-out applies to bernoulli responses");
  const double r = leverage_ratio(fit.S_diag[i], "S diagonal");
  return {fit.theta_hat[i] - 4.0 * r * d, fit.m_hat[i] - 4.0 * b2 * r * d};
}

namespace {

PredictionErrorEstimate finish_estimate(Criterion c, std::vector<double> per_obs, int excluded,
                                        double h, int n) {
  PredictionErrorEstimate est;
  est.criterion = c;
  est.per_observation = std::move(per_obs);
  est.excluded = excluded;
  est.h = h;
  est.n = n;
  if (excluded >= n)
    throw std::runtime_error(std::string(criterion_name(c)) + ": every observation was excluded");
  double sum = 0.0;
  for (double v : est.per_observation)
    if (std::isfinite(v)) sum += v;
  est.value = sum * static_cast<double>(n) / (n - excluded);
  return est;
}

// shared body of the curvature-corrected criteria; `factor(i)` supplies the
// squared deleted-residual inflation for observation i
template <typename FactorFn>
PredictionErrorEstimate corrected_criterion(Criterion c, const LocalFitResult& fit,
                                            const BregmanDivergence& divergence,
                                            FactorFn&& factor) {
  if (!divergence.has_curvature())
    throw std::invalid_argument(std::string(criterion_name(c)) +
                                ": divergence lacks the curvature this correction needs");
  const int n = fit.n();
  std::vector<double> per(n, kQuietNaN);
  int excluded = 0;
  for (int i = 0; i < n; ++i) {
    if (fit.failed[i]) {
      ++excluded;
      continue;
    }
    try {
      const double m = fit.m_hat[i];
      const double yi = fit.y[i];
      const double f = factor(i);
      const double d = yi - m;
      per[i] = divergence.loss(yi, m) + 0.5 * divergence.q_eval(m).q2 * d * d * (1.0 - f);
    } catch (const std::exception&) {
      ++excluded;
    }
  }
  return finish_estimate(c, std::move(per), excluded, fit.bandwidth, n);
}

}  // namespace

PredictionErrorEstimate err_cv_exact(const Dataset& data, const ExponentialFamily& family,
                                     const BregmanDivergence& divergence,
                                     const LocalFitConfig& config) {
  const int n = data.n();
  std::vector<double> per(n, kQuietNaN);
  int excluded = 0;
  for (int i = 0; i < n; ++i) {
    try {
      PointFit deleted = loo_exact(data, family, config, i);
      if (!deleted.converged) {
        ++excluded;
        continue;
      }
      per[i] = divergence.loss(data.y[i], deleted.m);
    } catch (const std::exception&) {
      ++excluded;
    }
  }
  return finish_estimate(Criterion::cv_exact, std::move(per), excluded, config.bandwidth, n);
}

PredictionErrorEstimate err_acv(const LocalFitResult& fit, const ExponentialFamily& family,
                                const BregmanDivergence& divergence, LooVariant variant) {
  require_observation_fit(fit, variant == LooVariant::newton, variant == LooVariant::lower_bound);
  if (variant == LooVariant::lower_bound && family.kind() != FamilyKind::bernoulli)
    throw std::invalid_argument("acv: lower-bound form applies to bernoulli responses");
  auto factor = [&](int i) {
    if (variant == LooVariant::newton) {
      const double r = leverage_ratio(fit.H[i], "hat diagonal");
      const double t = 1.0 + r;  // 1/(1-H)
      return t * t;
    }
    const double r = leverage_ratio(fit.S_diag[i], "S diagonal");
    const double b2 = family.variance_function(family.clamp_theta(fit.theta_hat[i]).first);
    const double t = 1.0 + 4.0 * b2 * r;
    return t * t;
  };
  return corrected_criterion(Criterion::acv, fit, divergence, factor);
}

PredictionErrorEstimate err_ecv(const LocalFitResult& fit, const ExponentialFamily& family,
                                const BregmanDivergence& divergence, const Kernel& kernel,
                                double support_length, const DFConstants& constants) {
  (void)family;
  require_observation_fit(fit, false, false);
  const double df = empirical_df(fit.degree, fit.n(), fit.bandwidth, kernel, support_length,
                                 constants);
  const double hbar = df / fit.n();
  if (!(hbar < kLeverageCeiling))
    throw leverage_error("ecv: empirical df reaches n; bandwidth too small");
  const double t = 1.0 / (1.0 - hbar);
  const double f = t * t;
  return corrected_criterion(Criterion::ecv, fit, divergence, [&](int) { return f; });
}

PredictionErrorEstimate err_hybrid(const LocalFitResult& fit, const ExponentialFamily& family,
                                   const BregmanDivergence& divergence) {
  require_observation_fit(fit, true, true);
  if (family.kind() != FamilyKind::bernoulli)
    throw std::invalid_argument("hybrid: defined for bernoulli responses");
  auto factor = [&](int i) {
    const double rs = leverage_ratio(fit.S_diag[i], "S diagonal");
    const double rh = leverage_ratio(fit.H[i], "hat diagonal");
    const double b2 = family.variance_function(family.clamp_theta(fit.theta_hat[i]).first);
    const double t = 1.0 + 2.0 * b2 * rs + 0.5 * rh;
    return t * t;
  };
  return corrected_criterion(Criterion::hybrid, fit, divergence, factor);
}

PredictionErrorEstimate err_hybrid_ecv(const LocalFitResult& fit, const ExponentialFamily& family,
                                       const BregmanDivergence& divergence, const Kernel& kernel,
                                       double support_length, const DFConstants& hat_constants,
                                       const DFConstants& s_constants) {
  require_observation_fit(fit, false, false);
  if (family.kind() != FamilyKind::bernoulli)
    throw std::invalid_argument("hybrid-ecv: defined for bernoulli responses");
  const int n = fit.n();
  const double hbar =
      empirical_df(fit.degree, n, fit.bandwidth, kernel, support_length, hat_constants) / n;
  const double sbar =
      empirical_df(fit.degree, n, fit.bandwidth, kernel, support_length, s_constants) / n;
  if (!(hbar < kLeverageCeiling) || !(sbar < kLeverageCeiling))
    throw leverage_error("hybrid-ecv: empirical df reaches n; bandwidth too small");
  const double rs = sbar / (1.0 - sbar);
  const double rh = hbar / (1.0 - hbar);
  auto factor = [&](int i) {
    const double b2 = family.variance_function(family.clamp_theta(fit.theta_hat[i]).first);
    const double t = 1.0 + 2.0 * b2 * rs + 0.5 * rh;
    return t * t;
  };
  return corrected_criterion(Criterion::hybrid_ecv, fit, divergence, factor);
}

double spacing_statistic(const Dataset& data) {
  const int n = data.n();
  double gap = 0.0;
  for (int i = 1; i < n; ++i) gap = std::max(gap, data.x[i] - data.x[i - 1]);
  return std::max(5.0 * data.support_length() / n, gap);
}

std::vector<double> bandwidth_grid(const Dataset& data, const GridSpec& spec,
                                   std::string* rule_out) {
  if (spec.npoints < 2) throw std::invalid_argument("bandwidth grid: need at least two points");
  double lo = spec.lo;
  std::string rule;
  if (lo > 0.0) {
    rule = "user";
  } else {
    const double h0 = spacing_statistic(data);
    lo = spec.h_min_multiplier * h0;
    rule = std::to_string(spec.h_min_multiplier) + "*h0, h0=" + std::to_string(h0);
  }
  const double hi = spec.hi > 0.0 ? spec.hi : 0.5 * data.support_length();
  if (!(lo < hi))
    throw std::invalid_argument("bandwidth grid: h_min >= h_max; widen the grid or the data");
  std::vector<double> grid(spec.npoints);
  for (int k = 0; k < spec.npoints; ++k) {
    const double frac = static_cast<double>(k) / (spec.npoints - 1);
    grid[k] = spec.geometric ? lo * std::pow(hi / lo, frac) : lo + frac * (hi - lo);
  }
  if (rule_out) *rule_out = rule;
  return grid;
}

int argmin_first(const std::vector<double>& values) {
  int best = -1;
  double best_v = kInf;
  for (int i = 0; i < static_cast<int>(values.size()); ++i) {
    if (std::isfinite(values[i]) && values[i] < best_v) {
      best_v = values[i];
      best = i;
    }
  }
  return best;
}

BandwidthSelection select_bandwidth(const Dataset& data, const ExponentialFamily& family,
                                    const BregmanDivergence& divergence, Criterion criterion,
                                    const LocalFitConfig& base, const GridSpec& grid,
                                    int threads) {
  BandwidthSelection sel;
  sel.criterion = criterion;
  sel.grid = bandwidth_grid(data, grid, &sel.h_min_rule);
  const int m = static_cast<int>(sel.grid.size());
  sel.criterion_values.assign(m, kInf);
  sel.failed.assign(m, 0);

  const LooVariant variant = base.algorithm == FitAlgorithm::lower_bound
                                 ? LooVariant::lower_bound
                                 : LooVariant::newton;
  const DFConstants hat_c = default_hat_constants(family.kind(), base.degree);
  const DFConstants s_c = default_s_constants(family.kind(), base.degree);
  const double length = data.support_length();

  parallel_for(m, threads, [&](int k) {
    const LocalFitConfig cfg = base.with_bandwidth(sel.grid[k]);
    try {
      PredictionErrorEstimate est;
      switch (criterion) {
        case Criterion::cv_exact:
          est = err_cv_exact(data, family, divergence, cfg);
          break;
        case Criterion::acv: {
          LocalFitResult fit = fit_observations(data, family, cfg, true);
          est = err_acv(fit, family, divergence, variant);
          break;
        }
        case Criterion::ecv: {
          LocalFitResult fit = fit_observations(data, family, cfg, false);
          est = err_ecv(fit, family, divergence, cfg.kernel, length, hat_c);
          break;
        }
        case Criterion::hybrid: {
          LocalFitResult fit = fit_observations(data, family, cfg, true);
          est = err_hybrid(fit, family, divergence);
          break;
        }
        case Criterion::hybrid_ecv: {
          LocalFitResult fit = fit_observations(data, family, cfg, false);
          est = err_hybrid_ecv(fit, family, divergence, cfg.kernel, length, hat_c, s_c);
          break;
        }
      }
      sel.criterion_values[k] = est.value;
    } catch (const std::exception&) {
      sel.failed[k] = 1;
    }
  });

  sel.selected_index = argmin_first(sel.criterion_values);
  if (sel.selected_index < 0)
    throw std::runtime_error("select_bandwidth: criterion failed on the whole grid");
  sel.selected_h = sel.grid[sel.selected_index];
  return sel;
}

}  // namespace bregsmooth
