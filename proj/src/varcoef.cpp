#include "bregsmooth/varcoef.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bregsmooth/errors.hpp"
#include "bregsmooth/parallel.hpp"

namespace bregsmooth {

namespace {

constexpr double kQuietNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLeverageCeiling = 1.0 - 1e-10;

// window design at u with the polynomial factor rescaled by h; row j is
// (1, t_j, ..., t_j^p) (x) X_j
struct VCDesign {
  Eigen::MatrixXd Z;
  Eigen::VectorXd w;
  Eigen::VectorXd yv;
  int npos = 0;
};

VCDesign build_vc_design(const VCDataset& data, const LocalFitConfig& config, double u) {
  const double h = config.bandwidth;
  const int d = data.d();
  const int p1 = config.degree + 1;
  auto lo_it = std::lower_bound(data.u.begin(), data.u.end(), u - h);
  auto hi_it = std::upper_bound(data.u.begin(), data.u.end(), u + h);
  const int lo = static_cast<int>(lo_it - data.u.begin());
  const int cnt = static_cast<int>(hi_it - lo_it);
  VCDesign des;
  des.Z.resize(cnt, d * p1);
  des.w.resize(cnt);
  des.yv.resize(cnt);
  for (int r = 0; r < cnt; ++r) {
    const int j = lo + r;
    const double t = (data.u[j] - u) / h;
    const double kh = config.kernel(t) / h;
    if (kh > 0.0) ++des.npos;
    des.w(r) = kh;
    des.yv(r) = data.y[j];
    double tp = 1.0;
    for (int k = 0; k < p1; ++k) {
      for (int l = 0; l < d; ++l) des.Z(r, k * d + l) = tp * data.X(j, l);
      tp *= t;
    }
  }
  if (des.npos < d * p1 + 1)
    throw insufficient_data_error("vc window at u=" + std::to_string(u) + " holds " +
                                  std::to_string(des.npos) + " weighted points; need " +
                                  std::to_string(d * p1 + 1));
  return des;
}

void fill_mean_var_vc(const VCDesign& des, const ExponentialFamily& family,
                      const Eigen::VectorXd& beta, Eigen::VectorXd* m, Eigen::VectorXd* b2,
                      int* clamped) {
  const int cnt = static_cast<int>(des.w.size());
  m->resize(cnt);
  b2->resize(cnt);
  int nclamp = 0;
  for (int r = 0; r < cnt; ++r) {
    auto [theta, moved] = family.clamp_theta(des.Z.row(r).dot(beta));
    nclamp += moved ? 1 : 0;
    Cumulant c = family.cumulant(theta);
    (*m)(r) = c.b1;
    (*b2)(r) = c.b2;
  }
  if (clamped) *clamped = nclamp;
}

double vc_log_likelihood(const VCDesign& des, const ExponentialFamily& family,
                         const Eigen::VectorXd& beta) {
  double ll = 0.0;
  for (int r = 0; r < des.w.size(); ++r) {
    if (des.w(r) <= 0.0) continue;
    double theta = family.clamp_theta(des.Z.row(r).dot(beta)).first;
    ll += des.w(r) * family.log_likelihood(des.yv(r), theta);
  }
  return ll;
}

Eigen::MatrixXd vc_gram(const VCDesign& des, const Eigen::VectorXd& rowweights, double ridge) {
  Eigen::MatrixXd s = des.Z.transpose() * rowweights.asDiagonal() * des.Z;
  if (ridge > 0.0) s.diagonal().array() += ridge * s.trace() / s.cols();
  return s;
}

struct VCSolve {
  Eigen::VectorXd beta;
  int iterations = 0;
  bool converged = false;
  bool saturated = false;
};

VCSolve solve_vc_newton(const VCDesign& des, const ExponentialFamily& family,
                        const LocalFitConfig& config, Eigen::VectorXd beta) {
  const double a = family.dispersion();
  const bool guard = family.kind() != FamilyKind::gaussian;
  const int maxit = config.effective_max_iterations();
  VCSolve out;
  Eigen::VectorXd m, b2;
  int clamped = 0;
  double ll = guard ? vc_log_likelihood(des, family, beta) : 0.0;
  for (int it = 1; it <= maxit; ++it) {
    out.iterations = it;
    fill_mean_var_vc(des, family, beta, &m, &b2, &clamped);
    if (guard && clamped == des.w.size()) {  // whole window pinned at the clamp
      out.saturated = true;
      out.converged = true;
      break;
    }
    Eigen::VectorXd grad =
        des.Z.transpose() * (des.w.array() * (des.yv - m).array()).matrix() / a;
    Eigen::MatrixXd s = vc_gram(des, (des.w.array() * b2.array()).matrix() / a, config.ridge);
    Eigen::VectorXd step = s.ldlt().solve(grad);
    if (!step.allFinite())
      throw singular_matrix_error("vc newton step: singular local information matrix");
    if (guard) {
      double scale = 1.0;
      Eigen::VectorXd cand = beta + step;
      double ll_new = vc_log_likelihood(des, family, cand);
      int halvings = 0;
      while (ll_new < ll - 1e-12 * (1.0 + std::abs(ll)) && halvings < 30) {
        scale *= 0.5;
        cand = beta + scale * step;
        ll_new = vc_log_likelihood(des, family, cand);
        ++halvings;
      }
      beta = cand;
      ll = ll_new;
      step *= scale;
    } else {
      beta += step;
    }
    if (step.lpNorm<Eigen::Infinity>() <= config.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.beta = std::move(beta);
  return out;
}

VCSolve solve_vc_lower_bound(const VCDesign& des, const ExponentialFamily& family,
                             const LocalFitConfig& config, Eigen::VectorXd beta) {
  const int maxit = config.effective_max_iterations();
  Eigen::MatrixXd nmat = vc_gram(des, (des.w / 4.0).eval(), config.ridge);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(nmat);
  VCSolve out;
  Eigen::VectorXd m, b2;
  int clamped = 0;
  for (int it = 1; it <= maxit; ++it) {
    out.iterations = it;
    fill_mean_var_vc(des, family, beta, &m, &b2, &clamped);
    if (clamped == des.w.size()) {
      out.saturated = true;
      out.converged = true;
      break;
    }
    Eigen::VectorXd grad = des.Z.transpose() * (des.w.array() * (des.yv - m).array()).matrix();
    Eigen::VectorXd step = ldlt.solve(grad);
    if (!step.allFinite())
      throw singular_matrix_error("vc lower-bound step: singular surrogate matrix");
    beta += step;
    if (step.lpNorm<Eigen::Infinity>() <= config.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.beta = std::move(beta);
  return out;
}

// polynomial blocks are stored scaled by h^k; convert per covariate
Eigen::VectorXd vc_scale(const Eigen::VectorXd& beta, int d, double h, bool in) {
  Eigen::VectorXd out = beta;
  const int p1 = static_cast<int>(beta.size()) / d;
  double f = 1.0;
  for (int k = 0; k < p1; ++k) {
    for (int l = 0; l < d; ++l) out(k * d + l) = in ? out(k * d + l) * f : out(k * d + l) / f;
    f *= h;
  }
  return out;
}

Eigen::VectorXd shift_vc(const Eigen::VectorXd& beta, int d, double u0, double u1) {
  const int p1 = static_cast<int>(beta.size()) / d;
  Eigen::VectorXd out(beta.size());
  Eigen::VectorXd coef(p1);
  for (int l = 0; l < d; ++l) {
    for (int k = 0; k < p1; ++k) coef(k) = beta(k * d + l);
    Eigen::VectorXd shifted = shift_polynomial(coef, u0, u1);
    for (int k = 0; k < p1; ++k) out(k * d + l) = shifted(k);
  }
  return out;
}

// unlocalized fit used to seed the first window
Eigen::VectorXd global_glm_start(const VCDataset& data, const ExponentialFamily& family) {
  const int d = data.d();
  const int n = data.n();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  bool const_col = true;
  for (int i = 1; i < n && const_col; ++i) const_col = data.X(i, 0) == data.X(0, 0);
  if (const_col && data.X(0, 0) != 0.0) {
    double ybar = std::accumulate(data.y.begin(), data.y.end(), 0.0) / n;
    switch (family.kind()) {
      case FamilyKind::gaussian: break;
      case FamilyKind::poisson: ybar = std::max(ybar, 1e-4); break;
      case FamilyKind::bernoulli: ybar = std::clamp(ybar, 0.01, 0.99); break;
    }
    beta(0) = family.canonical_link(ybar) / data.X(0, 0);
  }
  try {
    const double a = family.dispersion();
    double ll = -kInf;
    for (int it = 0; it < 50; ++it) {
      Eigen::VectorXd m(n), b2(n);
      double ll_cur = 0.0;
      for (int i = 0; i < n; ++i) {
        double theta = family.clamp_theta(data.X.row(i).dot(beta)).first;
        Cumulant c = family.cumulant(theta);
        m(i) = c.b1;
        b2(i) = c.b2;
        ll_cur += family.log_likelihood(data.y[i], theta);
      }
      Eigen::VectorXd grad = data.X.transpose() * (Eigen::Map<const Eigen::VectorXd>(
                                                       data.y.data(), n) -
                                                   m) /
                             a;
      Eigen::MatrixXd s = data.X.transpose() * b2.asDiagonal() * data.X / a;
      s.diagonal().array() += 1e-10 * s.trace() / d;
      Eigen::VectorXd step = s.ldlt().solve(grad);
      if (!step.allFinite()) break;
      double scale = 1.0;
      Eigen::VectorXd cand = beta + step;
      int halvings = 0;
      while (halvings < 30) {
        double ll_new = 0.0;
        for (int i = 0; i < n; ++i)
          ll_new += family.log_likelihood(data.y[i],
                                          family.clamp_theta(data.X.row(i).dot(cand)).first);
        if (ll_new >= ll_cur - 1e-12 * (1.0 + std::abs(ll_cur))) break;
        scale *= 0.5;
        cand = beta + scale * step;
        ++halvings;
      }
      beta = cand;
      if ((scale * step).lpNorm<Eigen::Infinity>() < 1e-8) break;
      ll = ll_cur;
      (void)ll;
    }
  } catch (const std::exception&) {
    beta.setZero();
  }
  return beta;
}

struct VCPoint {
  Eigen::VectorXd beta;  // unscaled
  Eigen::VectorXd se;    // block-0 sandwich SEs
  int iterations = 0;
  bool converged = false;
  bool saturated = false;
};

VCPoint fit_vc_at(const VCDataset& data, const ExponentialFamily& family,
                  const LocalFitConfig& config, double u, const Eigen::VectorXd* init,
                  double init_center, bool with_se) {
  VCDesign des = build_vc_design(data, config, u);
  const int d = data.d();
  const int p1 = config.degree + 1;
  Eigen::VectorXd beta0;
  if (init) {
    beta0 = vc_scale(shift_vc(*init, d, init_center, u), d, config.bandwidth, true);
  } else {
    beta0 = Eigen::VectorXd::Zero(d * p1);
    beta0.head(d) = global_glm_start(data, family);
  }
  VCSolve sol = config.algorithm == FitAlgorithm::lower_bound
                    ? solve_vc_lower_bound(des, family, config, std::move(beta0))
                    : solve_vc_newton(des, family, config, std::move(beta0));
  VCPoint out;
  out.beta = vc_scale(sol.beta, d, config.bandwidth, false);
  out.iterations = sol.iterations;
  out.converged = sol.converged;
  out.saturated = sol.saturated;
  if (with_se) {
    Eigen::VectorXd m, b2;
    fill_mean_var_vc(des, family, sol.beta, &m, &b2, nullptr);
    const double a = family.dispersion();
    Eigen::MatrixXd s = vc_gram(des, (des.w.array() * b2.array()).matrix() / a, config.ridge);
    Eigen::MatrixXd mid =
        vc_gram(des, (des.w.array().square() * b2.array()).matrix() / a, 0.0);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
    Eigen::MatrixXd sinv_mid = ldlt.solve(mid);
    Eigen::MatrixXd var = ldlt.solve(sinv_mid.transpose());
    out.se.resize(d);
    for (int l = 0; l < d; ++l) out.se(l) = std::sqrt(std::max(var(l, l), 0.0));
  }
  return out;
}

VCFitResult fit_vc_many(const VCDataset& data, const ExponentialFamily& family,
                        const LocalFitConfig& config, const std::vector<double>& points,
                        bool at_observations, bool with_diagnostics) {
  config.validate();
  data.check_family(family);
  if (config.algorithm == FitAlgorithm::lower_bound && family.kind() != FamilyKind::bernoulli)
    throw std::invalid_argument("lower-bound algorithm applies to bernoulli responses only");
  const int npts = static_cast<int>(points.size());
  const int d = data.d();
  VCFitResult out;
  out.eval_points = points;
  out.degree = config.degree;
  out.d = d;
  out.bandwidth = config.bandwidth;
  out.at_observations = at_observations;
  out.beta.resize(npts);
  out.A_hat = Eigen::MatrixXd::Constant(npts, d, kQuietNaN);
  out.A_se = Eigen::MatrixXd::Constant(npts, d, kQuietNaN);
  out.iterations.assign(npts, 0);
  out.converged.assign(npts, 0);
  out.saturated.assign(npts, 0);
  out.failed.assign(npts, 0);
  out.messages.assign(npts, std::string());

  std::vector<int> order(npts);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return points[a] < points[b]; });

  bool have_prev = false;
  Eigen::VectorXd prev_beta;
  double prev_u = 0.0;
  for (int k = 0; k < npts; ++k) {
    const int idx = order[k];
    const double u = points[idx];
    try {
      VCPoint fit = fit_vc_at(data, family, config, u, have_prev ? &prev_beta : nullptr, prev_u,
                              !at_observations);
      out.beta[idx] = fit.beta;
      out.A_hat.row(idx) = fit.beta.head(d).transpose();
      if (fit.se.size() == d) out.A_se.row(idx) = fit.se.transpose();
      out.iterations[idx] = fit.iterations;
      out.converged[idx] = fit.converged ? 1 : 0;
      out.saturated[idx] = fit.saturated ? 1 : 0;
      if (fit.converged && !fit.saturated) {
        prev_beta = fit.beta;
        prev_u = u;
        have_prev = true;
      } else {
        have_prev = false;
      }
    } catch (const std::exception& e) {
      out.failed[idx] = 1;
      out.messages[idx] = e.what();
      have_prev = false;
    }
  }

  if (at_observations) {
    out.y = data.y;
    out.theta_hat.assign(npts, kQuietNaN);
    out.m_hat.assign(npts, kQuietNaN);
    for (int i = 0; i < npts; ++i) {
      if (out.failed[i]) continue;
      double theta = family.clamp_theta(data.X.row(i).dot(out.beta[i].head(d))).first;
      out.theta_hat[i] = theta;
      out.m_hat[i] = family.mean(theta);
    }
    if (with_diagnostics) {
      out.H_star.assign(npts, kQuietNaN);
      out.S_star.assign(npts, kQuietNaN);
      for (int i = 0; i < npts; ++i) {
        if (out.failed[i]) continue;
        try {
          out.H_star[i] = hat_diagonal_vc(data, family, config, out.beta[i], i);
          out.S_star[i] = s_diagonal_vc(data, config, i);
        } catch (const std::exception& e) {
          out.failed[i] = 1;
          out.messages[i] = e.what();
        }
      }
    }
  }
  return out;
}

}  // namespace

int VCFitResult::failure_count() const {
  int c = 0;
  for (char f : failed) c += f != 0;
  return c;
}

VCFitResult fit_vc(const VCDataset& data, const ExponentialFamily& family,
                   const LocalFitConfig& config, const std::vector<double>& eval_points) {
  if (eval_points.empty()) throw std::invalid_argument("fit_vc: no evaluation points");
  return fit_vc_many(data, family, config, eval_points, false, false);
}

VCFitResult fit_vc_observations(const VCDataset& data, const ExponentialFamily& family,
                                const LocalFitConfig& config, bool with_diagnostics) {
  return fit_vc_many(data, family, config, data.u, true, with_diagnostics);
}

double hat_diagonal_vc(const VCDataset& data, const ExponentialFamily& family,
                       const LocalFitConfig& config, const Eigen::VectorXd& beta, int i) {
  config.validate();
  if (i < 0 || i >= data.n()) throw std::invalid_argument("hat_diagonal_vc: index out of range");
  const int d = data.d();
  VCDesign des = build_vc_design(data, config, data.u[i]);
  Eigen::VectorXd bs = vc_scale(beta, d, config.bandwidth, true);
  Eigen::VectorXd m, b2;
  fill_mean_var_vc(des, family, bs, &m, &b2, nullptr);
  const double a = family.dispersion();
  Eigen::MatrixXd s = vc_gram(des, (des.w.array() * b2.array()).matrix() / a, config.ridge);
  Eigen::VectorXd e1x = Eigen::VectorXd::Zero(s.cols());
  e1x.head(d) = data.X.row(i).transpose();
  Eigen::VectorXd z = s.ldlt().solve(e1x);
  if (!z.allFinite())
    throw singular_matrix_error("hat_diagonal_vc: singular information matrix");
  const double theta_i = family.clamp_theta(data.X.row(i).dot(beta.head(d))).first;
  return e1x.dot(z) * config.kernel.at_zero() / config.bandwidth *
         family.variance_function(theta_i) / a;
}

double s_diagonal_vc(const VCDataset& data, const LocalFitConfig& config, int i) {
  config.validate();
  if (i < 0 || i >= data.n()) throw std::invalid_argument("s_diagonal_vc: index out of range");
  const int d = data.d();
  VCDesign des = build_vc_design(data, config, data.u[i]);
  Eigen::MatrixXd s = vc_gram(des, des.w, config.ridge);
  Eigen::VectorXd e1x = Eigen::VectorXd::Zero(s.cols());
  e1x.head(d) = data.X.row(i).transpose();
  Eigen::VectorXd z = s.ldlt().solve(e1x);
  if (!z.allFinite()) throw singular_matrix_error("s_diagonal_vc: singular design matrix");
  return e1x.dot(z) * config.kernel.at_zero() / config.bandwidth;
}

LooApprox loo_exact_vc(const VCDataset& data, const ExponentialFamily& family,
                       const LocalFitConfig& config, int i) {
  const int n = data.n();
  if (i < 0 || i >= n) throw std::invalid_argument("loo_exact_vc: index out of range");
  std::vector<double> u, y;
  Eigen::MatrixXd X(n - 1, data.d());
  u.reserve(n - 1);
  y.reserve(n - 1);
  int r = 0;
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    u.push_back(data.u[j]);
    y.push_back(data.y[j]);
    X.row(r++) = data.X.row(j);
  }
  VCDataset reduced = VCDataset::from_parts(std::move(u), std::move(X), std::move(y),
                                            {{data.support_lo, data.support_hi}});
  VCFitResult fit = fit_vc(reduced, family, config, {data.u[i]});
  if (fit.failed[0]) throw std::runtime_error("loo_exact_vc: deleted fit failed: " + fit.messages[0]);
  if (!fit.converged[0]) throw std::runtime_error("loo_exact_vc: deleted fit did not converge");
  const double theta = family.clamp_theta(data.X.row(i).dot(fit.beta[0].head(data.d()))).first;
  return {theta, family.mean(theta)};
}

namespace {

void require_vc_observation_fit(const VCFitResult& fit, bool need_hat, bool need_s) {
  if (!fit.at_observations || fit.y.empty())
    throw std::invalid_argument("criterion needs a fit evaluated at the observations");
  if (need_hat && fit.H_star.empty())
    throw std::invalid_argument("criterion needs H* diagonals; refit with diagnostics");
  if (need_s && fit.S_star.empty())
    throw std::invalid_argument("criterion needs S* diagonals; refit with diagnostics");
}

double leverage_ratio_vc(double v, const char* what) {
  if (!(v < kLeverageCeiling))
    throw leverage_error(std::string(what) + " at or above 1; leave-one-out factor blows up");
  return v / (1.0 - v);
}

template <typename FactorFn>
PredictionErrorEstimate corrected_criterion_vc(Criterion c, const VCFitResult& fit,
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
  PredictionErrorEstimate est;
  est.criterion = c;
  est.per_observation = std::move(per);
  est.excluded = excluded;
  est.h = fit.bandwidth;
  est.n = n;
  if (excluded >= n)
    throw std::runtime_error(std::string(criterion_name(c)) + ": every observation was excluded");
  double sum = 0.0;
  for (double v : est.per_observation)
    if (std::isfinite(v)) sum += v;
  est.value = sum * static_cast<double>(n) / (n - excluded);
  return est;
}

}  // namespace

LooApprox loo_approx_vc(const VCFitResult& fit, const ExponentialFamily& family, int i,
                        LooVariant variant) {
  require_vc_observation_fit(fit, variant == LooVariant::newton,
                             variant == LooVariant::lower_bound);
  if (i < 0 || i >= fit.n()) throw std::invalid_argument("loo_approx_vc: index out of range");
  if (fit.failed[i]) throw std::runtime_error("loo_approx_vc: fit failed at this observation");
  const double d = fit.y[i] - fit.m_hat[i];
  const double b2 = family.variance_function(family.clamp_theta(fit.theta_hat[i]).first);
  if (variant == LooVariant::newton) {
    const double r = leverage_ratio_vc(fit.H_star[i], "H* diagonal");
    return {fit.theta_hat[i] - r * d / b2, fit.m_hat[i] - r * d};
  }
  if (family.kind() != FamilyKind::bernoulli)
    throw std::invalid_argument("lower-bound leave-one-out applies to bernoulli responses");
  const double r = leverage_ratio_vc(fit.S_star[i], "S* diagonal");
  return {fit.theta_hat[i] - 4.0 * r * d, fit.m_hat[i] - 4.0 * b2 * r * d};
}

double empirical_df_vc(int d, int degree, int n, double h, const Kernel& kernel,
                       double support_length, const DFConstants& constants) {
  if (d < 1) throw std::invalid_argument("empirical_df_vc: need d >= 1");
  if (n <= d) throw std::invalid_argument("empirical_df_vc: need n > d");
  if (!(h > 0.0)) throw std::invalid_argument("empirical_df_vc: bandwidth must be positive");
  if (!(support_length > 0.0))
    throw std::invalid_argument("empirical_df_vc: support length must be positive");
  const double ek0 = equivalent_kernel_at_zero(kernel, degree);
  return d * ((degree + 1 - constants.a) +
              constants.C * (static_cast<double>(n) / (n - d)) * ek0 * support_length / h);
}

PredictionErrorEstimate err_acv_vc(const VCFitResult& fit, const ExponentialFamily& family,
                                   const BregmanDivergence& divergence, LooVariant variant) {
  require_vc_observation_fit(fit, variant == LooVariant::newton,
                             variant == LooVariant::lower_bound);
  if (variant == LooVariant::lower_bound && family.kind() != FamilyKind::bernoulli)
    throw std::invalid_argument("acv: lower-bound form applies to bernoulli responses");
  auto factor = [&](int i) {
    if (variant == LooVariant::newton) {
      const double r = leverage_ratio_vc(fit.H_star[i], "H* diagonal");
      const double t = 1.0 + r;
      return t * t;
    }
    const double r = leverage_ratio_vc(fit.S_star[i], "S* diagonal");
    const double b2 = family.variance_function(family.clamp_theta(fit.theta_hat[i]).first);
    const double t = 1.0 + 4.0 * b2 * r;
    return t * t;
  };
  return corrected_criterion_vc(Criterion::acv, fit, divergence, factor);
}

PredictionErrorEstimate err_ecv_vc(const VCFitResult& fit, const ExponentialFamily& family,
                                   const BregmanDivergence& divergence, const Kernel& kernel,
                                   double support_length, const DFConstants& constants) {
  (void)family;
  require_vc_observation_fit(fit, false, false);
  const double hbar = empirical_df_vc(fit.d, fit.degree, fit.n(), fit.bandwidth, kernel,
                                      support_length, constants) /
                      fit.n();
  if (!(hbar < kLeverageCeiling))
    throw leverage_error("ecv: empirical df reaches n; bandwidth too small");
  const double t = 1.0 / (1.0 - hbar);
  const double f = t * t;
  return corrected_criterion_vc(Criterion::ecv, fit, divergence, [&](int) { return f; });
}

PredictionErrorEstimate err_hybrid_vc(const VCFitResult& fit, const ExponentialFamily& family,
                                      const BregmanDivergence& divergence) {
  require_vc_observation_fit(fit, true, true);
  if (family.kind() != FamilyKind::bernoulli)
    throw std::invalid_argument("hybrid: defined for bernoulli responses");
  auto factor = [&](int i) {
    const double rs = leverage_ratio_vc(fit.S_star[i], "S* diagonal");
    const double rh = leverage_ratio_vc(fit.H_star[i], "H* diagonal");
    const double b2 = family.variance_function(family.clamp_theta(fit.theta_hat[i]).first);
    const double t = 1.0 + 2.0 * b2 * rs + 0.5 * rh;
    return t * t;
  };
  return corrected_criterion_vc(Criterion::hybrid, fit, divergence, factor);
}

PredictionErrorEstimate err_hybrid_ecv_vc(const VCFitResult& fit, const ExponentialFamily& family,
                                          const BregmanDivergence& divergence,
                                          const Kernel& kernel, double support_length,
                                          const DFConstants& hat_constants,
                                          const DFConstants& s_constants) {
  require_vc_observation_fit(fit, false, false);
  if (family.kind() != FamilyKind::bernoulli)
    throw std::invalid_argument("hybrid-ecv: defined for bernoulli responses");
  const int n = fit.n();
  const double hbar = empirical_df_vc(fit.d, fit.degree, n, fit.bandwidth, kernel,
                                      support_length, hat_constants) /
                      n;
  const double sbar = empirical_df_vc(fit.d, fit.degree, n, fit.bandwidth, kernel,
                                      support_length, s_constants) /
                      n;
  if (!(hbar < kLeverageCeiling) || !(sbar < kLeverageCeiling))
    throw leverage_error("hybrid-ecv: empirical df reaches n; bandwidth too small");
  const double rs = sbar / (1.0 - sbar);
  const double rh = hbar / (1.0 - hbar);
  auto factor = [&](int i) {
    const double b2 = family.variance_function(family.clamp_theta(fit.theta_hat[i]).first);
    const double t = 1.0 + 2.0 * b2 * rs + 0.5 * rh;
    return t * t;
  };
  return corrected_criterion_vc(Criterion::hybrid_ecv, fit, divergence, factor);
}

PredictionErrorEstimate err_criteria_vc(const VCDataset& data, const ExponentialFamily& family,
                                        const BregmanDivergence& divergence, Criterion criterion,
                                        const LocalFitConfig& config) {
  const DFConstants hat_c = default_hat_constants(family.kind(), config.degree);
  const DFConstants s_c = default_s_constants(family.kind(), config.degree);
  const double length = data.support_length();
  const LooVariant variant = config.algorithm == FitAlgorithm::lower_bound
                                 ? LooVariant::lower_bound
                                 : LooVariant::newton;
  switch (criterion) {
    case Criterion::cv_exact: {
      const int n = data.n();
      std::vector<double> per(n, kQuietNaN);
      int excluded = 0;
      for (int i = 0; i < n; ++i) {
        try {
          LooApprox deleted = loo_exact_vc(data, family, config, i);
          per[i] = divergence.loss(data.y[i], deleted.m);
        } catch (const std::exception&) {
          ++excluded;
        }
      }
      PredictionErrorEstimate est;
      est.criterion = Criterion::cv_exact;
      est.per_observation = std::move(per);
      est.excluded = excluded;
      est.h = config.bandwidth;
      est.n = n;
      if (excluded >= n) throw std::runtime_error("cv: every observation was excluded");
      double sum = 0.0;
      for (double v : est.per_observation)
        if (std::isfinite(v)) sum += v;
      est.value = sum * static_cast<double>(n) / (n - excluded);
      return est;
    }
    case Criterion::acv: {
      VCFitResult fit = fit_vc_observations(data, family, config, true);
      return err_acv_vc(fit, family, divergence, variant);
    }
    case Criterion::ecv: {
      VCFitResult fit = fit_vc_observations(data, family, config, false);
      return err_ecv_vc(fit, family, divergence, config.kernel, length, hat_c);
    }
    case Criterion::hybrid: {
      VCFitResult fit = fit_vc_observations(data, family, config, true);
      return err_hybrid_vc(fit, family, divergence);
    }
    case Criterion::hybrid_ecv: {
      VCFitResult fit = fit_vc_observations(data, family, config, false);
      return err_hybrid_ecv_vc(fit, family, divergence, config.kernel, length, hat_c, s_c);
    }
  }
  throw std::logic_error("err_criteria_vc: unreachable");
}

double spacing_statistic_vc(const VCDataset& data) {
  const int n = data.n();
  double gap = 0.0;
  for (int i = 1; i < n; ++i) gap = std::max(gap, data.u[i] - data.u[i - 1]);
  return std::max(5.0 * data.support_length() / n, gap);
}

std::vector<double> bandwidth_grid_vc(const VCDataset& data, const GridSpec& spec,
                                      std::string* rule_out) {
  double lo = spec.lo;
  if (lo > 0.0) {
    if (rule_out) *rule_out = "user";
  } else {
    const double h0 = spacing_statistic_vc(data);
    lo = spec.h_min_multiplier * h0;
    if (rule_out)
      *rule_out = std::to_string(spec.h_min_multiplier) + "*h0, h0=" + std::to_string(h0);
  }
  const double hi = spec.hi > 0.0 ? spec.hi : 0.5 * data.support_length();
  if (!(lo < hi))
    throw std::invalid_argument("bandwidth grid: h_min >= h_max; widen the grid or the data");
  if (spec.npoints < 2) throw std::invalid_argument("bandwidth grid: need at least two points");
  std::vector<double> grid(spec.npoints);
  for (int k = 0; k < spec.npoints; ++k) {
    const double frac = static_cast<double>(k) / (spec.npoints - 1);
    grid[k] = spec.geometric ? lo * std::pow(hi / lo, frac) : lo + frac * (hi - lo);
  }
  return grid;
}

BandwidthSelection select_bandwidth_vc(const VCDataset& data, const ExponentialFamily& family,
                                       const BregmanDivergence& divergence, Criterion criterion,
                                       const LocalFitConfig& base, const GridSpec& grid,
                                       int threads) {
  BandwidthSelection sel;
  sel.criterion = criterion;
  sel.grid = bandwidth_grid_vc(data, grid, &sel.h_min_rule);
  const int m = static_cast<int>(sel.grid.size());
  sel.criterion_values.assign(m, kInf);
  sel.failed.assign(m, 0);
  parallel_for(m, threads, [&](int k) {
    try {
      sel.criterion_values[k] =
          err_criteria_vc(data, family, divergence, criterion, base.with_bandwidth(sel.grid[k]))
              .value;
    } catch (const std::exception&) {
      sel.failed[k] = 1;
    }
  });
  sel.selected_index = argmin_first(sel.criterion_values);
  if (sel.selected_index < 0)
    throw std::runtime_error("select_bandwidth_vc: criterion failed on the whole grid");
  sel.selected_h = sel.grid[sel.selected_index];
  return sel;
}

}  // namespace bregsmooth
