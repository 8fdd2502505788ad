#include "bregsmooth/family.hpp"

#include <cmath>
#include <stdexcept>

namespace bregsmooth {

ExponentialFamily::ExponentialFamily(FamilyKind kind, double dispersion)
    : kind_(kind), dispersion_(dispersion) {
  if (!(dispersion > 0.0) || !std::isfinite(dispersion))
    throw std::invalid_argument("family: dispersion must be positive and finite");
  if (kind != FamilyKind::gaussian && dispersion != 1.0)
    throw std::invalid_argument("family: dispersion is fixed at 1 for poisson/bernoulli");
}

ExponentialFamily ExponentialFamily::parse(std::string_view token) {
  if (token == "gaussian") return ExponentialFamily(FamilyKind::gaussian);
  if (token == "poisson") return ExponentialFamily(FamilyKind::poisson);
  if (token == "bernoulli") return ExponentialFamily(FamilyKind::bernoulli);
  throw std::invalid_argument("family: unknown token '" + std::string(token) +
                              "' (expected gaussian|poisson|bernoulli)");
}

const char* ExponentialFamily::name() const {
  switch (kind_) {
    case FamilyKind::gaussian: return "gaussian";
    case FamilyKind::poisson: return "poisson";
    case FamilyKind::bernoulli: return "bernoulli";
  }
  return "?";
}

Cumulant ExponentialFamily::cumulant(double theta) const {
  if (!std::isfinite(theta)) throw std::domain_error("cumulant: theta not finite");
  switch (kind_) {
    case FamilyKind::gaussian:
      return {0.5 * theta * theta, theta, 1.0};
    case FamilyKind::poisson: {
      if (std::abs(theta) > theta_bound)
        throw std::domain_error("cumulant: |theta| exceeds exp-safe bound for poisson");
      double e = std::exp(theta);
      return {e, e, e};
    }
    case FamilyKind::bernoulli: {
      if (std::abs(theta) > theta_bound)
        throw std::domain_error("cumulant: |theta| exceeds exp-safe bound for bernoulli");
      // log1p/exp arrangement keeps both tails accurate
      double b = theta > 0 ? theta + std::log1p(std::exp(-theta)) : std::log1p(std::exp(theta));
      double m = 1.0 / (1.0 + std::exp(-theta));
      return {b, m, m * (1.0 - m)};
    }
  }
  throw std::logic_error("cumulant: unreachable");
}

double ExponentialFamily::mean(double theta) const { return cumulant(theta).b1; }

double ExponentialFamily::variance_function(double theta) const { return cumulant(theta).b2; }

double ExponentialFamily::canonical_link(double m) const {
  if (!std::isfinite(m)) throw std::domain_error("canonical_link: m not finite");
  switch (kind_) {
    case FamilyKind::gaussian:
      return m;
    case FamilyKind::poisson:
      if (!(m > 0.0)) throw std::domain_error("canonical_link: poisson mean must be positive");
      return std::log(m);
    case FamilyKind::bernoulli:
      if (!(m > 0.0 && m < 1.0))
        throw std::domain_error("canonical_link: bernoulli mean must lie in (0,1)");
      return std::log(m / (1.0 - m));
  }
  throw std::logic_error("canonical_link: unreachable");
}

double ExponentialFamily::log_likelihood(double y, double theta) const {
  check_response(y);
  Cumulant c = cumulant(theta);
  return (y * theta - c.b) / dispersion_;
}

bool ExponentialFamily::in_support(double y) const {
  if (!std::isfinite(y)) return false;
  switch (kind_) {
    case FamilyKind::gaussian:
      return true;
    case FamilyKind::poisson:
      return y >= 0.0 && y == std::floor(y);
    case FamilyKind::bernoulli:
      return y == 0.0 || y == 1.0;
  }
  return false;
}

void ExponentialFamily::check_response(double y) const {
  if (!in_support(y))
    throw std::domain_error(std::string("response outside ") + name() + " support");
}

std::pair<double, bool> ExponentialFamily::clamp_theta(double theta) const {
  if (kind_ == FamilyKind::gaussian) return {theta, false};
  if (theta > theta_bound) return {theta_bound, true};
  if (theta < -theta_bound) return {-theta_bound, true};
  return {theta, false};
}

}  // namespace bregsmooth
