#pragma once

#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "bregsmooth/family.hpp"

namespace bregsmooth {

enum class DivergenceKind { quadratic, deviance, exponential_binary, misclassification, hinge };

struct QDerivatives {
  double q;
  double q1;
  double q2;  // zero for the piecewise-linear kinds away from the kink
};

// The q-class: a concave q on the mean scale generates the loss
//   Q(y, m) = q(m) + q'(m)(y - m) - q(y).
// quadratic: q = -m^2, deviance: q = 2{b(theta_m) - m*theta_m},
// exponential_binary: q = 2*sqrt(m(1-m)), misclassification: q = min(m, 1-m),
// hinge: q = 0.5*min(m, 1-m).
class BregmanDivergence {
 public:
  static BregmanDivergence quadratic();
  static BregmanDivergence deviance(const ExponentialFamily& family);
  static BregmanDivergence exponential_binary();
  static BregmanDivergence misclassification();
  static BregmanDivergence hinge();

  // tokens: quadratic | deviance | exploss | misclass | hinge;
  // deviance needs the family it is taken under
  static BregmanDivergence parse(std::string_view token,
                                 const ExponentialFamily* family = nullptr);

  DivergenceKind kind() const { return kind_; }
  const char* name() const;
  bool has_curvature() const;  // usable inside curvature-based CV corrections
  bool binary_scale() const;   // mean space restricted to (0,1)
  const ExponentialFamily& family() const;  // deviance only

  QDerivatives q_eval(double m) const;
  double loss(double y, double m_hat) const;

 private:
  explicit BregmanDivergence(DivergenceKind kind,
                             std::optional<ExponentialFamily> family = std::nullopt)
      : kind_(kind), family_(std::move(family)) {}

  DivergenceKind kind_;
  std::optional<ExponentialFamily> family_;
};

// weight -q''(m)/2 that converts E{(m_hat - m)^2} into the leading
// prediction-error term; finite only for the curvature kinds
double mpec_weight(const BregmanDivergence& div, double m);

// classification losses on the margin scale u, rescaled so every curve
// passes through (0,1): misclass 1{u<=0}, hinge max(1-u,0), exploss e^-u,
// deviance log2(1+e^-2u), quadratic (1-u)^2
double margin_loss(DivergenceKind kind, double u);

// (margin, loss) pairs for the binary-scale kinds; quadratic is rejected
std::vector<std::pair<double, double>> loss_curve_points(const BregmanDivergence& div,
                                                         const std::vector<double>& margins);

}  // namespace bregsmooth
