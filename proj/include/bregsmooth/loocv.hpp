#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "bregsmooth/dataset.hpp"
#include "bregsmooth/divergence.hpp"
#include "bregsmooth/locfit.hpp"

namespace bregsmooth {

// Degrees-of-freedom law sum_i H_i ~ (p+1-a) + C * n/(n-1) * EK(0) |Omega|/h.
// The (a, C) pairs were calibrated separately for fixed and random designs;
// bernoulli hat diagonals at p=1 run hotter and get their own C.
struct DFConstants {
  double a = 0.0;
  double C = 1.0;

  enum class Design { fixed, random };
  static DFConstants lookup(int degree, Design design);
  // constants for sum H_i on bernoulli data (degree 1 calibration)
  static DFConstants bernoulli_hat(int degree);
  // constants for the response-free sum S_i on bernoulli data
  static DFConstants bernoulli_s(int degree);
};

double empirical_df(int degree, int n, double h, const Kernel& kernel, double support_length,
                    const DFConstants& constants);

enum class Criterion { cv_exact, acv, ecv, hybrid, hybrid_ecv };
Criterion parse_criterion(std::string_view token);  // cv|acv|ecv|hybrid|hybrid-ecv
const char* criterion_name(Criterion c);

struct PredictionErrorEstimate {
  Criterion criterion;
  double value = 0.0;                    // sum over observations, rescaled for exclusions
  std::vector<double> per_observation;   // NaN at excluded points
  int excluded = 0;
  double h = 0.0;
  int n = 0;
};

// Brute-force leave-one-out refit at observation i; returns the deleted fit.
PointFit loo_exact(const Dataset& data, const ExponentialFamily& family,
                   const LocalFitConfig& config, int i);

struct LooApprox {
  double theta;
  double m;
};
enum class LooVariant { newton, lower_bound };

// First-order deleted values from the full fit's diagonals; the newton form
// uses H_i, the lower-bound form uses the response-free S_i.
LooApprox loo_approx(const LocalFitResult& fit, const ExponentialFamily& family, int i,
                     LooVariant variant = LooVariant::newton);

PredictionErrorEstimate err_cv_exact(const Dataset& data, const ExponentialFamily& family,
                                     const BregmanDivergence& divergence,
                                     const LocalFitConfig& config);

// Curvature-corrected approximate CV from the full fit (needs diagnostics).
PredictionErrorEstimate err_acv(const LocalFitResult& fit, const ExponentialFamily& family,
                                const BregmanDivergence& divergence,
                                LooVariant variant = LooVariant::newton);

// ACV with every H_i replaced by the closed-form average df/n.
PredictionErrorEstimate err_ecv(const LocalFitResult& fit, const ExponentialFamily& family,
                                const BregmanDivergence& divergence, const Kernel& kernel,
                                double support_length, const DFConstants& constants);

// Bernoulli-only blend: half lower-bound step, half newton step.
PredictionErrorEstimate err_hybrid(const LocalFitResult& fit, const ExponentialFamily& family,
                                   const BregmanDivergence& divergence);

PredictionErrorEstimate err_hybrid_ecv(const LocalFitResult& fit, const ExponentialFamily& family,
                                       const BregmanDivergence& divergence, const Kernel& kernel,
                                       double support_length, const DFConstants& hat_constants,
                                       const DFConstants& s_constants);

// Default Table-2-style constants for a family/degree (random design).
DFConstants default_hat_constants(FamilyKind family, int degree);
DFConstants default_s_constants(FamilyKind family, int degree);

struct GridSpec {
  double lo = 0.0;    // <= 0 means rule-based
  double hi = 0.0;    // <= 0 means 0.5 * support length
  int npoints = 30;
  bool geometric = true;
  double h_min_multiplier = 3.0;  // times the spacing statistic h0
};

// h0 = max(5 L / n, widest gap between adjacent design points)
double spacing_statistic(const Dataset& data);

std::vector<double> bandwidth_grid(const Dataset& data, const GridSpec& spec,
                                   std::string* rule_out = nullptr);

// first index attaining the minimum (ties resolve toward smaller h)
int argmin_first(const std::vector<double>& values);

struct BandwidthSelection {
  std::vector<double> grid;
  std::vector<double> criterion_values;  // +inf where the fit failed
  std::vector<char> failed;
  int selected_index = -1;
  double selected_h = 0.0;
  Criterion criterion = Criterion::ecv;
  std::string h_min_rule;
};

BandwidthSelection select_bandwidth(const Dataset& data, const ExponentialFamily& family,
                                    const BregmanDivergence& divergence, Criterion criterion,
                                    const LocalFitConfig& base, const GridSpec& grid = GridSpec(),
                                    int threads = 1);

}  // namespace bregsmooth
