#include "bregsmooth/locfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bregsmooth/errors.hpp"

namespace bregsmooth {

namespace {

constexpr double kSaturationTheta = 15.0;
constexpr double kQuietNaN = std::numeric_limits<double>::quiet_NaN();

// window rows with the basis rescaled by h: u_k = ((x_j - x)/h)^k keeps the
// normal equations O(1)-conditioned down to very small bandwidths
struct LocalDesign {
  Eigen::MatrixXd U;
  Eigen::VectorXd w;  // K_h weights, 1/h included
  Eigen::VectorXd yv;
  int npos = 0;
};

LocalDesign build_design(const Dataset& data, const LocalFitConfig& config, double x) {
  const double h = config.bandwidth;
  const int p1 = config.degree + 1;
  auto lo_it = std::lower_bound(data.x.begin(), data.x.end(), x - h);
  auto hi_it = std::upper_bound(data.x.begin(), data.x.end(), x + h);
  const int lo = static_cast<int>(lo_it - data.x.begin());
  const int cnt = static_cast<int>(hi_it - lo_it);
  LocalDesign d;
  d.U.resize(cnt, p1);
  d.w.resize(cnt);
  d.yv.resize(cnt);
  for (int r = 0; r < cnt; ++r) {
    const int j = lo + r;
    const double t = (data.x[j] - x) / h;
    const double kh = config.kernel(t) / h;
    if (kh > 0.0) ++d.npos;
    d.w(r) = kh;
    d.yv(r) = data.y[j];
    double tp = 1.0;
    for (int k = 0; k < p1; ++k) {
      d.U(r, k) = tp;
      tp *= t;
    }
  }
  if (d.npos < config.degree + 2)
    throw insufficient_data_error("local window at x=" + std::to_string(x) + " holds " +
                                  std::to_string(d.npos) + " weighted points; degree " +
                                  std::to_string(config.degree) + " needs " +
                                  std::to_string(config.degree + 2));
  return d;
}

double weighted_log_likelihood(const LocalDesign& d, const ExponentialFamily& family,
                               const Eigen::VectorXd& beta_scaled) {
  double ll = 0.0;
  for (int r = 0; r < d.w.size(); ++r) {
    if (d.w(r) <= 0.0) continue;
    double theta = family.clamp_theta(d.U.row(r).dot(beta_scaled)).first;
    ll += d.w(r) * family.log_likelihood(d.yv(r), theta);
  }
  return ll;
}

Eigen::VectorXd default_init_scaled(const LocalDesign& d, const Dataset& data,
                                    const ExponentialFamily& family, int p1) {
  double sw = 0.0, swy = 0.0;
  for (int r = 0; r < d.w.size(); ++r) {
    sw += d.w(r);
    swy += d.w(r) * d.yv(r);
  }
  double ybar = std::accumulate(data.y.begin(), data.y.end(), 0.0) / data.y.size();
  // shrink toward the global mean so degenerate windows start interior
  double m0 = (swy + ybar) / (sw + 1.0);
  switch (family.kind()) {
    case FamilyKind::gaussian:
      break;
    case FamilyKind::poisson:
      m0 = std::max(m0, 1e-4);
      break;
    case FamilyKind::bernoulli:
      m0 = std::clamp(m0, 0.01, 0.99);
      break;
  }
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p1);
  beta(0) = family.canonical_link(m0);
  return beta;
}

void fill_mean_var(const LocalDesign& d, const ExponentialFamily& family,
                   const Eigen::VectorXd& beta_scaled, Eigen::VectorXd* m,
                   Eigen::VectorXd* b2) {
  const int cnt = static_cast<int>(d.w.size());
  m->resize(cnt);
  b2->resize(cnt);
  for (int r = 0; r < cnt; ++r) {
    double theta = family.clamp_theta(d.U.row(r).dot(beta_scaled)).first;
    Cumulant c = family.cumulant(theta);
    (*m)(r) = c.b1;
    (*b2)(r) = c.b2;
  }
}

Eigen::MatrixXd weighted_gram(const LocalDesign& d, const Eigen::VectorXd& rowweights,
                              double ridge) {
  const int p1 = static_cast<int>(d.U.cols());
  Eigen::MatrixXd s = d.U.transpose() * rowweights.asDiagonal() * d.U;
  if (ridge > 0.0) s.diagonal().array() += ridge * s.trace() / p1;
  return s;
}

struct SolveOutcome {
  Eigen::VectorXd beta_scaled;
  int iterations = 0;
  bool converged = false;
  bool saturated = false;
};

SolveOutcome solve_newton(const LocalDesign& d, const ExponentialFamily& family,
                          const LocalFitConfig& config, Eigen::VectorXd beta) {
  const double a = family.dispersion();
  const bool guard = family.kind() != FamilyKind::gaussian;
  const int maxit = config.effective_max_iterations();
  SolveOutcome out;
  Eigen::VectorXd m, b2;
  double ll = guard ? weighted_log_likelihood(d, family, beta) : 0.0;
  for (int it = 1; it <= maxit; ++it) {
    out.iterations = it;
    fill_mean_var(d, family, beta, &m, &b2);
    Eigen::VectorXd grad =
        d.U.transpose() * (d.w.array() * (d.yv - m).array()).matrix() / a;
    Eigen::MatrixXd s = weighted_gram(d, (d.w.array() * b2.array()).matrix() / a, config.ridge);
    Eigen::VectorXd step = s.ldlt().solve(grad);
    if (!step.allFinite())
      throw singular_matrix_error("newton step: singular local information matrix");
    if (guard) {
      // keep the likelihood from decreasing; plain steps already suffice on
      // quadratic objectives
      double scale = 1.0;
      Eigen::VectorXd cand = beta + step;
      double ll_new = weighted_log_likelihood(d, family, cand);
      int halvings = 0;
      while (ll_new < ll - 1e-12 * (1.0 + std::abs(ll)) && halvings < 30) {
        scale *= 0.5;
        cand = beta + scale * step;
        ll_new = weighted_log_likelihood(d, family, cand);
        ++halvings;
      }
      beta = cand;
      ll = ll_new;
      step *= scale;
    } else {
      beta += step;
    }
    if (guard && std::abs(beta(0)) > kSaturationTheta) {
      out.saturated = true;
      out.converged = true;
      break;
    }
    if (step.lpNorm<Eigen::Infinity>() <= config.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.beta_scaled = std::move(beta);
  return out;
}

SolveOutcome solve_lower_bound(const LocalDesign& d, const ExponentialFamily& family,
                               const LocalFitConfig& config, Eigen::VectorXd beta) {
  const int maxit = config.effective_max_iterations();
  // B = -X'KX/4 bounds every local Hessian from below; one factorization
  // serves all iterations
  Eigen::MatrixXd nmat = weighted_gram(d, (d.w / 4.0).eval(), config.ridge);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(nmat);
  SolveOutcome out;
  Eigen::VectorXd m, b2;
  for (int it = 1; it <= maxit; ++it) {
    out.iterations = it;
    fill_mean_var(d, family, beta, &m, &b2);
    Eigen::VectorXd grad = d.U.transpose() * (d.w.array() * (d.yv - m).array()).matrix();
    Eigen::VectorXd step = ldlt.solve(grad);
    if (!step.allFinite())
      throw singular_matrix_error("lower-bound step: singular surrogate matrix");
    beta += step;
    if (std::abs(beta(0)) > kSaturationTheta) {
      out.saturated = true;
      out.converged = true;
      break;
    }
    if (step.lpNorm<Eigen::Infinity>() <= config.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.beta_scaled = std::move(beta);
  return out;
}

Eigen::VectorXd scale_in(const Eigen::VectorXd& beta, double h) {
  Eigen::VectorXd out = beta;
  double f = 1.0;
  for (int k = 0; k < out.size(); ++k) {
    out(k) *= f;
    f *= h;
  }
  return out;
}

Eigen::VectorXd scale_out(const Eigen::VectorXd& beta, double h) {
  Eigen::VectorXd out = beta;
  double f = 1.0;
  for (int k = 0; k < out.size(); ++k) {
    out(k) /= f;
    f *= h;
  }
  return out;
}

PointFit finish_fit(const SolveOutcome& sol, const ExponentialFamily& family, double h) {
  PointFit fit;
  Eigen::VectorXd beta = sol.beta_scaled;
  if (std::abs(beta(0)) > ExponentialFamily::theta_bound &&
      family.kind() != FamilyKind::gaussian)
    beta(0) = std::copysign(ExponentialFamily::theta_bound, beta(0));
  fit.beta = scale_out(beta, h);
  fit.theta = fit.beta(0);
  fit.m = family.mean(fit.theta);
  fit.iterations = sol.iterations;
  fit.converged = sol.converged;
  fit.saturated = sol.saturated;
  return fit;
}

}  // namespace

FitAlgorithm parse_algorithm(std::string_view token) {
  if (token == "nr") return FitAlgorithm::newton_raphson;
  if (token == "lb") return FitAlgorithm::lower_bound;
  throw std::invalid_argument("algorithm: unknown token (expected nr|lb)");
}

int LocalFitConfig::effective_max_iterations() const {
  if (max_iterations > 0) return max_iterations;
  return algorithm == FitAlgorithm::lower_bound ? 500 : 100;
}

void LocalFitConfig::validate() const {
  if (degree < 0 || degree > 7)
    throw std::invalid_argument("config: degree must lie in [0,7]");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw std::invalid_argument("config: bandwidth must be positive and finite");
  if (!(tolerance > 0.0)) throw std::invalid_argument("config: tolerance must be positive");
  if (ridge < 0.0) throw std::invalid_argument("config: ridge must be nonnegative");
  if (max_iterations < 0) throw std::invalid_argument("config: max_iterations must be >= 0");
}

PointFit fit_at(const Dataset& data, const ExponentialFamily& family,
                const LocalFitConfig& config, double x, const Eigen::VectorXd* init,
                double init_center) {
  config.validate();
  if (config.algorithm == FitAlgorithm::lower_bound && family.kind() != FamilyKind::bernoulli)
    throw std::invalid_argument("lower-bound algorithm applies to bernoulli responses only");
  LocalDesign d = build_design(data, config, x);
  const int p1 = config.degree + 1;
  Eigen::VectorXd beta0;
  if (init) {
    if (init->size() != p1) throw std::invalid_argument("fit_at: init has wrong length");
    beta0 = scale_in(shift_polynomial(*init, init_center, x), config.bandwidth);
    double th0 = family.clamp_theta(beta0(0)).first;
    beta0(0) = th0;
  } else {
    beta0 = default_init_scaled(d, data, family, p1);
  }
  SolveOutcome sol = config.algorithm == FitAlgorithm::lower_bound
                         ? solve_lower_bound(d, family, config, std::move(beta0))
                         : solve_newton(d, family, config, std::move(beta0));
  return finish_fit(sol, family, config.bandwidth);
}

Eigen::VectorXd lb_step(const Dataset& data, const ExponentialFamily& family,
                        const LocalFitConfig& config, double x, const Eigen::VectorXd& beta) {
  config.validate();
  if (family.kind() != FamilyKind::bernoulli)
    throw std::invalid_argument("lower-bound step applies to bernoulli responses only");
  LocalDesign d = build_design(data, config, x);
  Eigen::VectorXd bs = scale_in(beta, config.bandwidth);
  Eigen::MatrixXd nmat = weighted_gram(d, (d.w / 4.0).eval(), config.ridge);
  Eigen::VectorXd m, b2;
  fill_mean_var(d, family, bs, &m, &b2);
  Eigen::VectorXd grad = d.U.transpose() * (d.w.array() * (d.yv - m).array()).matrix();
  Eigen::VectorXd step = nmat.ldlt().solve(grad);
  if (!step.allFinite())
    throw singular_matrix_error("lower-bound step: singular surrogate matrix");
  return scale_out(bs + step, config.bandwidth);
}

double local_log_likelihood(const Dataset& data, const ExponentialFamily& family,
                            const LocalFitConfig& config, double x,
                            const Eigen::VectorXd& beta) {
  config.validate();
  LocalDesign d = build_design(data, config, x);
  return weighted_log_likelihood(d, family, scale_in(beta, config.bandwidth));
}

namespace {

LocalFitResult fit_many(const Dataset& data, const ExponentialFamily& family,
                        const LocalFitConfig& config, const std::vector<double>& points,
                        bool at_observations, bool with_diagnostics) {
  config.validate();
  data.check_family(family);
  const int npts = static_cast<int>(points.size());
  LocalFitResult out;
  out.eval_points = points;
  out.degree = config.degree;
  out.bandwidth = config.bandwidth;
  out.at_observations = at_observations;
  out.beta.resize(npts);
  out.theta_hat.assign(npts, kQuietNaN);
  out.m_hat.assign(npts, kQuietNaN);
  out.iterations.assign(npts, 0);
  out.converged.assign(npts, 0);
  out.saturated.assign(npts, 0);
  out.failed.assign(npts, 0);
  out.messages.assign(npts, std::string());

  // evaluation runs in sorted order so each point can warm-start from its
  // neighbor; output slots keep the caller's order
  std::vector<int> order(npts);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return points[a] < points[b]; });

  bool have_prev = false;
  Eigen::VectorXd prev_beta;
  double prev_x = 0.0;
  for (int k = 0; k < npts; ++k) {
    const int idx = order[k];
    const double x = points[idx];
    try {
      PointFit fit = have_prev ? fit_at(data, family, config, x, &prev_beta, prev_x)
                               : fit_at(data, family, config, x);
      out.beta[idx] = fit.beta;
      out.theta_hat[idx] = fit.theta;
      out.m_hat[idx] = fit.m;
      out.iterations[idx] = fit.iterations;
      out.converged[idx] = fit.converged ? 1 : 0;
      out.saturated[idx] = fit.saturated ? 1 : 0;
      if (fit.converged && !fit.saturated) {
        prev_beta = fit.beta;
        prev_x = x;
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
    if (with_diagnostics) {
      out.H.assign(npts, kQuietNaN);
      out.S_diag.assign(npts, kQuietNaN);
      for (int i = 0; i < npts; ++i) {
        if (out.failed[i]) continue;
        try {
          out.H[i] = hat_diagonal(data, family, config, out.beta[i], i);
          out.S_diag[i] = s_diagonal(data, config, i);
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

LocalFitResult fit_curve(const Dataset& data, const ExponentialFamily& family,
                         const LocalFitConfig& config, const std::vector<double>& eval_points) {
  if (eval_points.empty()) throw std::invalid_argument("fit_curve: no evaluation points");
  return fit_many(data, family, config, eval_points, false, false);
}

LocalFitResult fit_observations(const Dataset& data, const ExponentialFamily& family,
                                const LocalFitConfig& config, bool with_diagnostics) {
  return fit_many(data, family, config, data.x, true, with_diagnostics);
}

double hat_diagonal(const Dataset& data, const ExponentialFamily& family,
                    const LocalFitConfig& config, const Eigen::VectorXd& beta, int i) {
  config.validate();
  if (i < 0 || i >= data.n()) throw std::invalid_argument("hat_diagonal: index out of range");
  LocalDesign d = build_design(data, config, data.x[i]);
  Eigen::VectorXd bs = scale_in(beta, config.bandwidth);
  Eigen::VectorXd m, b2;
  fill_mean_var(d, family, bs, &m, &b2);
  const double a = family.dispersion();
  Eigen::MatrixXd s = weighted_gram(d, (d.w.array() * b2.array()).matrix() / a, config.ridge);
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(s.cols());
  e1(0) = 1.0;
  Eigen::VectorXd z = s.ldlt().solve(e1);
  if (!z.allFinite()) throw singular_matrix_error("hat_diagonal: singular information matrix");
  const double kh0 = config.kernel.at_zero() / config.bandwidth;
  const double b2_i = family.variance_function(family.clamp_theta(beta(0)).first);
  return z(0) * kh0 * b2_i / a;
}

double s_diagonal(const Dataset& data, const LocalFitConfig& config, int i) {
  config.validate();
  if (i < 0 || i >= data.n()) throw std::invalid_argument("s_diagonal: index out of range");
  LocalDesign d = build_design(data, config, data.x[i]);
  Eigen::MatrixXd s = weighted_gram(d, d.w, config.ridge);
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(s.cols());
  e1(0) = 1.0;
  Eigen::VectorXd z = s.ldlt().solve(e1);
  if (!z.allFinite()) throw singular_matrix_error("s_diagonal: singular design matrix");
  return z(0) * config.kernel.at_zero() / config.bandwidth;
}

Eigen::VectorXd shift_polynomial(const Eigen::VectorXd& beta, double x0, double x1) {
  const int p1 = static_cast<int>(beta.size());
  const double dshift = x1 - x0;
  if (dshift == 0.0) return beta;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p1);
  // binomial re-expansion of sum beta_j (t - x0)^j about x1
  for (int k = 0; k < p1; ++k) {
    double coef = 0.0;
    for (int j = k; j < p1; ++j) {
      double binom = 1.0;
      for (int r = 0; r < k; ++r) binom *= static_cast<double>(j - r) / (k - r);
      coef += beta(j) * binom * std::pow(dshift, j - k);
    }
    out(k) = coef;
  }
  return out;
}

int LocalFitResult::failure_count() const {
  int c = 0;
  for (char f : failed) c += f != 0;
  return c;
}

}  // namespace bregsmooth
