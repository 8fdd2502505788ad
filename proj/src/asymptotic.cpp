#include "bregsmooth/asymptotic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bregsmooth/errors.hpp"
#include "bregsmooth/quadrature.hpp"

namespace bregsmooth {

namespace {

constexpr double kQuadTol = 1e-9;

// Fornberg's recursion: weights w_j with sum_j w_j f(x_j) ~ f^(m)(z)
std::vector<double> fd_weights(double z, const std::vector<double>& x, int m) {
  const int n = static_cast<int>(x.size()) - 1;
  std::vector<std::vector<double>> c(n + 1, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0;
  double c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n + 1);
  for (int j = 0; j <= n; ++j) w[j] = c[j][m];
  return w;
}

double rate_from_ratio(const ModelSpec& spec, double num, double den) {
  const double ratio = num / den;
  if (!std::isfinite(ratio) || !(ratio > 0.0))
    throw divergent_integral_error("bandwidth rate: integral ratio is not positive and finite");
  const double expo = 1.0 / (2.0 * spec.degree + 3.0);
  return cp_constant(spec.kernel, spec.degree) * std::pow(ratio, expo) *
         std::pow(static_cast<double>(spec.n), -expo);
}

}  // namespace

void ModelSpec::validate() const {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
    throw std::invalid_argument("model spec: support must be finite with lo < hi");
  if (degree < 1 || degree > 7 || degree % 2 == 0)
    throw std::invalid_argument("model spec: degree must be odd, between 1 and 7");
  if (!theta) throw std::invalid_argument("model spec: theta function missing");
  if (!density) throw std::invalid_argument("model spec: density function missing");
  if (n < 1) throw std::invalid_argument("model spec: need n >= 1");
  const double mass = adaptive_simpson(density, lo, hi, kQuadTol);
  if (std::abs(mass - 1.0) > 1e-6)
    throw std::invalid_argument("model spec: density mass over the support is " +
                                std::to_string(mass) + ", expected 1");
}

double ModelSpec::theta_high_deriv(double x) const {
  if (theta_deriv) return theta_deriv(x);
  const int m = degree + 1;
  const double step = 1e-3 * length();
  const int half = (m + 2) / 2;  // fourth-order central stencil
  std::vector<double> nodes(2 * half + 1);
  for (int j = 0; j < static_cast<int>(nodes.size()); ++j) nodes[j] = x + (j - half) * step;
  const std::vector<double> w = fd_weights(x, nodes, m);
  double acc = 0.0;
  for (size_t j = 0; j < nodes.size(); ++j) acc += w[j] * theta(nodes[j]);
  return acc;
}

double h_ampec(const ModelSpec& spec, const BregmanDivergence& divergence) {
  spec.validate();
  if (!divergence.has_curvature())
    throw std::invalid_argument(
        "h_ampec: divergence carries no curvature; the rate is undefined for "
        "piecewise-linear losses");
  const double a = spec.family.dispersion();
  double num, den;
  if (divergence.kind() == DivergenceKind::deviance) {
    num = a * spec.length();
    den = adaptive_simpson(
        [&](double x) {
          const double d = spec.theta_high_deriv(x);
          return d * d * spec.family.variance_function(spec.theta(x)) * spec.density(x);
        },
        spec.lo, spec.hi, kQuadTol);
  } else {
    num = a * adaptive_simpson(
                  [&](double x) {
                    const double th = spec.theta(x);
                    const double b2 = spec.family.variance_function(th);
                    return b2 * divergence.q_eval(spec.family.mean(th)).q2;
                  },
                  spec.lo, spec.hi, kQuadTol);
    den = adaptive_simpson(
        [&](double x) {
          const double th = spec.theta(x);
          const double b2 = spec.family.variance_function(th);
          const double d = spec.theta_high_deriv(x);
          return d * d * b2 * b2 * divergence.q_eval(spec.family.mean(th)).q2 *
                 spec.density(x);
        },
        spec.lo, spec.hi, kQuadTol);
  }
  return rate_from_ratio(spec, num, den);
}

double h_amise(const ModelSpec& spec) {
  spec.validate();
  const double a = spec.family.dispersion();
  const double num =
      a * adaptive_simpson(
              [&](double x) { return 1.0 / spec.family.variance_function(spec.theta(x)); },
              spec.lo, spec.hi, kQuadTol);
  const double den = adaptive_simpson(
      [&](double x) {
        const double d = spec.theta_high_deriv(x);
        return d * d * spec.density(x);
      },
      spec.lo, spec.hi, kQuadTol);
  return rate_from_ratio(spec, num, den);
}

const char* ordering_name(Ordering o) {
  switch (o) {
    case Ordering::similarly: return "similarly";
    case Ordering::oppositely: return "oppositely";
    case Ordering::neither: return "neither";
  }
  return "?";
}

OrderingReport ordering_check(const ModelSpec& spec) {
  spec.validate();
  constexpr int kGrid = 512;
  std::vector<double> f_vals(kGrid), g_vals(kGrid);
  double b2_min = std::numeric_limits<double>::infinity();
  double b2_max = -b2_min;
  for (int i = 0; i < kGrid; ++i) {
    const double x = spec.lo + (i + 0.5) * spec.length() / kGrid;
    const double b2 = spec.family.variance_function(spec.theta(x));
    const double d = spec.theta_high_deriv(x);
    f_vals[i] = d * d * b2 * spec.density(x);
    g_vals[i] = 1.0 / b2;
    b2_min = std::min(b2_min, b2);
    b2_max = std::max(b2_max, b2);
  }
  long long sim = 0, opp = 0, total = 0;
  for (int i = 0; i < kGrid; ++i) {
    for (int j = i + 1; j < kGrid; ++j) {
      const double prod = (f_vals[i] - f_vals[j]) * (g_vals[i] - g_vals[j]);
      ++total;
      if (prod > 0.0)
        ++sim;
      else if (prod < 0.0)
        ++opp;
    }
  }
  const double fs = static_cast<double>(sim) / total;
  const double fo = static_cast<double>(opp) / total;
  OrderingReport rep;
  if (fs > 0.01 && fo > 0.01)
    rep.relation = Ordering::neither;
  else
    rep.relation = fs >= fo ? Ordering::similarly : Ordering::oppositely;
  rep.h_ampec_deviance = h_ampec(spec, BregmanDivergence::deviance(spec.family));
  rep.h_amise = h_amise(spec);
  rep.ratio = rep.h_ampec_deviance / rep.h_amise;
  const double expo = 1.0 / (2.0 * spec.degree + 3.0);
  rep.bound_lo = std::pow(4.0 * b2_min * b2_max / ((b2_min + b2_max) * (b2_min + b2_max)), expo);
  return rep;
}

}  // namespace bregsmooth
