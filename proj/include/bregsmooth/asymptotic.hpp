#pragma once

#include <functional>
#include <string>

#include "bregsmooth/divergence.hpp"
#include "bregsmooth/family.hpp"
#include "bregsmooth/kernel.hpp"

namespace bregsmooth {

// Everything needed to evaluate the closed-form optimal-bandwidth rates:
// the canonical-parameter curve, the design density, and the fit settings.
struct ModelSpec {
  ExponentialFamily family{FamilyKind::gaussian};
  std::function<double(double)> theta;
  std::function<double(double)> theta_deriv;  // (degree+1)-th derivative; optional
  std::function<double(double)> density;
  double lo = 0.0;
  double hi = 1.0;
  int degree = 1;  // odd
  Kernel kernel{KernelKind::epanechnikov};
  int n = 400;

  double length() const { return hi - lo; }
  // finite support, odd degree, callables present, density mass 1 within 1e-6
  void validate() const;
  // analytic derivative when supplied, else central differences with
  // step 1e-3 * length(); the stencil may poke slightly outside the support
  double theta_high_deriv(double x) const;
};

// asymptotically optimal bandwidth for the prediction-error criterion under
// the given divergence; deviance uses its simplified form
double h_ampec(const ModelSpec& spec, const BregmanDivergence& divergence);

// asymptotically optimal bandwidth for integrated squared error of theta_hat
double h_amise(const ModelSpec& spec);

enum class Ordering { similarly, oppositely, neither };
const char* ordering_name(Ordering o);

struct OrderingReport {
  Ordering relation = Ordering::neither;
  double ratio = 0.0;     // h_ampec(deviance) / h_amise
  double bound_lo = 0.0;  // {4 m M / (m + M)^2}^{1/(2p+3)} from the b'' extremes
  double h_ampec_deviance = 0.0;
  double h_amise = 0.0;
};

// grid comparison of F = (theta^(p+1))^2 b'' f against G = 1/b'': when they
// move together the deviance bandwidth sits above h_amise, when they move
// against each other it sits below, with bound_lo <= ratio <= 1
OrderingReport ordering_check(const ModelSpec& spec);

}  // namespace bregsmooth
