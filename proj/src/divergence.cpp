#include "bregsmooth/divergence.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bregsmooth {

namespace {
constexpr double kMeanClip = 1e-12;  // binary means are clipped into [clip, 1-clip]

double clip_binary(double m) {
  if (!(m > 0.0 && m < 1.0))
    throw std::domain_error("divergence: binary-scale mean must lie strictly in (0,1)");
  if (m < kMeanClip) return kMeanClip;
  if (m > 1.0 - kMeanClip) return 1.0 - kMeanClip;
  return m;
}

void check_binary_response(double y) {
  if (y != 0.0 && y != 1.0)
    throw std::domain_error("divergence: binary loss needs y in {0,1}");
}
}  // namespace

BregmanDivergence BregmanDivergence::quadratic() {
  return BregmanDivergence(DivergenceKind::quadratic);
}
BregmanDivergence BregmanDivergence::deviance(const ExponentialFamily& family) {
  return BregmanDivergence(DivergenceKind::deviance, family);
}
BregmanDivergence BregmanDivergence::exponential_binary() {
  return BregmanDivergence(DivergenceKind::exponential_binary);
}
BregmanDivergence BregmanDivergence::misclassification() {
  return BregmanDivergence(DivergenceKind::misclassification);
}
BregmanDivergence BregmanDivergence::hinge() {
  return BregmanDivergence(DivergenceKind::hinge);
}

BregmanDivergence BregmanDivergence::parse(std::string_view token,
                                           const ExponentialFamily* family) {
  if (token == "quadratic") return quadratic();
  if (token == "deviance") {
    if (!family)
      throw std::invalid_argument("divergence: deviance requires a family");
    return deviance(*family);
  }
  if (token == "exploss") return exponential_binary();
  if (token == "misclass") return misclassification();
  if (token == "hinge") return hinge();
  throw std::invalid_argument("divergence: unknown token '" + std::string(token) +
                              "' (expected quadratic|deviance|exploss|misclass|hinge)");
}

const char* BregmanDivergence::name() const {
  switch (kind_) {
    case DivergenceKind::quadratic: return "quadratic";
    case DivergenceKind::deviance: return "deviance";
    case DivergenceKind::exponential_binary: return "exploss";
    case DivergenceKind::misclassification: return "misclass";
    case DivergenceKind::hinge: return "hinge";
  }
  return "?";
}

bool BregmanDivergence::has_curvature() const {
  return kind_ == DivergenceKind::quadratic || kind_ == DivergenceKind::deviance ||
         kind_ == DivergenceKind::exponential_binary;
}

bool BregmanDivergence::binary_scale() const {
  switch (kind_) {
    case DivergenceKind::quadratic: return false;
    case DivergenceKind::deviance:
      return family_->kind() == FamilyKind::bernoulli;
    case DivergenceKind::exponential_binary:
    case DivergenceKind::misclassification:
    case DivergenceKind::hinge:
      return true;
  }
  return false;
}

const ExponentialFamily& BregmanDivergence::family() const {
  if (kind_ != DivergenceKind::deviance || !family_)
    throw std::logic_error("divergence: only deviance carries a family");
  return *family_;
}

QDerivatives BregmanDivergence::q_eval(double m) const {
  if (!std::isfinite(m)) throw std::domain_error("q_eval: m not finite");
  switch (kind_) {
    case DivergenceKind::quadratic:
      return {-m * m, -2.0 * m, -2.0};
    case DivergenceKind::deviance: {
      double th = family_->canonical_link(m);
      Cumulant c = family_->cumulant(th);
      return {2.0 * (c.b - m * th), -2.0 * th, -2.0 / c.b2};
    }
    case DivergenceKind::exponential_binary: {
      m = clip_binary(m);
      double v = m * (1.0 - m);
      double s = std::sqrt(v);
      return {2.0 * s, (1.0 - 2.0 * m) / s, -0.5 / (v * s)};
    }
    case DivergenceKind::misclassification:
    case DivergenceKind::hinge: {
      if (!(m > 0.0 && m < 1.0))
        throw std::domain_error("q_eval: binary-scale mean must lie strictly in (0,1)");
      if (m == 0.5)
        throw std::domain_error("q_eval: derivative undefined at the kink m = 1/2");
      double scale = kind_ == DivergenceKind::hinge ? 0.5 : 1.0;
      if (m < 0.5) return {scale * m, scale, 0.0};
      return {scale * (1.0 - m), -scale, 0.0};
    }
  }
  throw std::logic_error("q_eval: unreachable");
}

double BregmanDivergence::loss(double y, double m_hat) const {
  if (!std::isfinite(m_hat)) throw std::domain_error("loss: m_hat not finite");
  switch (kind_) {
    case DivergenceKind::quadratic: {
      if (!std::isfinite(y)) throw std::domain_error("loss: y not finite");
      double d = y - m_hat;
      return d * d;
    }
    case DivergenceKind::deviance: {
      family_->check_response(y);
      switch (family_->kind()) {
        case FamilyKind::gaussian: {
          double d = y - m_hat;
          return d * d;
        }
        case FamilyKind::poisson: {
          if (!(m_hat > 0.0))
            throw std::domain_error("loss: poisson deviance needs m_hat > 0");
          // y*log(y/m) - (y - m), doubled; y log y -> 0 at y = 0
          double t = y > 0.0 ? y * std::log(y / m_hat) : 0.0;
          return 2.0 * (t - (y - m_hat));
        }
        case FamilyKind::bernoulli: {
          double m = clip_binary(m_hat);
          return -2.0 * (y * std::log(m) + (1.0 - y) * std::log1p(-m));
        }
      }
      throw std::logic_error("loss: unreachable");
    }
    case DivergenceKind::exponential_binary: {
      check_binary_response(y);
      double m = clip_binary(m_hat);
      return y == 1.0 ? std::sqrt((1.0 - m) / m) : std::sqrt(m / (1.0 - m));
    }
    case DivergenceKind::misclassification:
    case DivergenceKind::hinge: {
      check_binary_response(y);
      if (!(m_hat > 0.0 && m_hat < 1.0))
        throw std::domain_error("loss: binary-scale mean must lie strictly in (0,1)");
      if (m_hat == 0.5)
        throw std::domain_error("loss: classification undefined at m_hat = 1/2");
      double wrong = (m_hat > 0.5 ? 1.0 : 0.0) != y ? 1.0 : 0.0;
      return kind_ == DivergenceKind::hinge ? 2.0 * wrong : wrong;
    }
  }
  throw std::logic_error("loss: unreachable");
}

double mpec_weight(const BregmanDivergence& div, double m) {
  if (!div.has_curvature())
    throw std::invalid_argument("mpec_weight: needs a divergence with curvature");
  return -0.5 * div.q_eval(m).q2;
}

double margin_loss(DivergenceKind kind, double u) {
  if (!std::isfinite(u)) throw std::domain_error("margin_loss: margin not finite");
  switch (kind) {
    case DivergenceKind::quadratic: {
      double d = 1.0 - u;
      return d * d;
    }
    case DivergenceKind::deviance: {
      double t = -2.0 * u;
      if (t > 36.0) return t / std::log(2.0);  // log1p(e^t) ~ t, avoids overflow
      return std::log1p(std::exp(t)) / std::log(2.0);
    }
    case DivergenceKind::exponential_binary:
      return std::exp(-u);
    case DivergenceKind::misclassification:
      return u <= 0.0 ? 1.0 : 0.0;
    case DivergenceKind::hinge:
      return u < 1.0 ? 1.0 - u : 0.0;
  }
  throw std::logic_error("margin_loss: unreachable");
}

std::vector<std::pair<double, double>> loss_curve_points(const BregmanDivergence& div,
                                                         const std::vector<double>& margins) {
  if (!div.binary_scale())
    throw std::invalid_argument("loss_curve_points: only binary-scale divergences have a margin view");
  std::vector<std::pair<double, double>> out;
  out.reserve(margins.size());
  for (double u : margins) out.emplace_back(u, margin_loss(div.kind(), u));
  return out;
}

}  // namespace bregsmooth
