#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "bregsmooth/dataset.hpp"
#include "bregsmooth/family.hpp"
#include "bregsmooth/kernel.hpp"

namespace bregsmooth {

enum class FitAlgorithm { newton_raphson, lower_bound };

FitAlgorithm parse_algorithm(std::string_view token);  // nr | lb

struct LocalFitConfig {
  int degree = 1;
  double bandwidth = 0.0;
  Kernel kernel{};
  FitAlgorithm algorithm = FitAlgorithm::newton_raphson;
  int max_iterations = 0;    // 0 picks the per-algorithm default (100 NR, 500 LB)
  double tolerance = 1e-8;   // on the sup-norm of the step
  double ridge = 1e-8;       // scaled by trace(S_n)/(p+1) before adding to the diagonal

  int effective_max_iterations() const;
  void validate() const;
  LocalFitConfig with_bandwidth(double h) const {
    LocalFitConfig c = *this;
    c.bandwidth = h;
    return c;
  }
};

// One local fit: beta(k) estimates theta^{(k)}(x)/k!.
struct PointFit {
  Eigen::VectorXd beta;
  double theta = 0.0;  // beta(0)
  double m = 0.0;      // b'(theta)
  int iterations = 0;
  bool converged = false;
  bool saturated = false;  // stopped at |theta| > 15, degenerate window
};

struct LocalFitResult {
  std::vector<double> eval_points;
  std::vector<Eigen::VectorXd> beta;
  std::vector<double> theta_hat;
  std::vector<double> m_hat;
  std::vector<int> iterations;
  std::vector<char> converged;
  std::vector<char> saturated;
  std::vector<char> failed;
  std::vector<std::string> messages;  // nonempty only where failed

  // filled by fit_observations (evaluation at the design points themselves)
  std::vector<double> H;       // hat diagonals, needs diagnostics
  std::vector<double> S_diag;  // response-free leverage, needs diagnostics
  std::vector<double> y;       // response copy so CV criteria are self-contained
  bool at_observations = false;

  int degree = 0;
  double bandwidth = 0.0;

  int n() const { return static_cast<int>(eval_points.size()); }
  int failure_count() const;
};

// Maximizes the kernel-localized likelihood at one point.  Throws
// insufficient_data_error / singular_matrix_error; warm starts pass the
// previous unscaled beta through `init` (re-centered internally).
PointFit fit_at(const Dataset& data, const ExponentialFamily& family,
                const LocalFitConfig& config, double x,
                const Eigen::VectorXd* init = nullptr, double init_center = 0.0);

// One lower-bound update from beta (unscaled, centered at x); exposed so the
// guaranteed-ascent property is testable step by step.  Bernoulli only.
Eigen::VectorXd lb_step(const Dataset& data, const ExponentialFamily& family,
                        const LocalFitConfig& config, double x, const Eigen::VectorXd& beta);

// Kernel-weighted log-likelihood at x under the polynomial expansion beta.
double local_log_likelihood(const Dataset& data, const ExponentialFamily& family,
                            const LocalFitConfig& config, double x, const Eigen::VectorXd& beta);

// Per-point failures are recorded in the flags rather than thrown.
LocalFitResult fit_curve(const Dataset& data, const ExponentialFamily& family,
                         const LocalFitConfig& config, const std::vector<double>& eval_points);

LocalFitResult fit_observations(const Dataset& data, const ExponentialFamily& family,
                                const LocalFitConfig& config, bool with_diagnostics = true);

// Diagonal of the local smoother at observation i given the converged local
// coefficients there: e1' S_n^{-1} e1 * K_h(0) * b''(theta_i) / a(psi).
double hat_diagonal(const Dataset& data, const ExponentialFamily& family,
                    const LocalFitConfig& config, const Eigen::VectorXd& beta, int i);

// Response-free analogue without the b'' weights: e1' (X'KX)^{-1} e1 * K_h(0).
double s_diagonal(const Dataset& data, const LocalFitConfig& config, int i);

// Re-centers a local polynomial: coefficients about x0 -> about x1.
Eigen::VectorXd shift_polynomial(const Eigen::VectorXd& beta, double x0, double x1);

}  // namespace bregsmooth
