#pragma once

#include <string>
#include <string_view>
#include <utility>

namespace bregsmooth {

enum class FamilyKind { gaussian, poisson, bernoulli };

struct Cumulant {
  double b;   // b(theta)
  double b1;  // b'(theta), the mean
  double b2;  // b''(theta), the variance function
};

// One-parameter exponential family in canonical form,
//   log f(y; theta) = {y*theta - b(theta)}/a(psi) + c(y, psi),
// with the c term dropped everywhere since it never involves theta.
class ExponentialFamily {
 public:
  explicit ExponentialFamily(FamilyKind kind, double dispersion = 1.0);

  static ExponentialFamily parse(std::string_view token);

  FamilyKind kind() const { return kind_; }
  double dispersion() const { return dispersion_; }  // a(psi)
  const char* name() const;

  // |theta| above this throws for poisson/bernoulli unless the caller
  // clamps first; exp() is exact noise at this magnitude anyway.
  static constexpr double theta_bound = 30.0;

  Cumulant cumulant(double theta) const;
  double mean(double theta) const;                // b'(theta)
  double variance_function(double theta) const;   // b''(theta)
  double canonical_link(double m) const;          // (b')^{-1}(m)
  double log_likelihood(double y, double theta) const;

  bool in_support(double y) const;
  void check_response(double y) const;  // throws std::domain_error

  // Pulls theta back into the valid range; .second reports whether it moved.
  std::pair<double, bool> clamp_theta(double theta) const;

 private:
  FamilyKind kind_;
  double dispersion_;
};

}  // namespace bregsmooth
