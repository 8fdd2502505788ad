#include "bregsmooth/kernel.hpp"

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "bregsmooth/quadrature.hpp"

namespace bregsmooth {

namespace {
constexpr int kMaxDegree = 7;

int kind_index(KernelKind k) { return static_cast<int>(k); }
}  // namespace

Kernel Kernel::parse(std::string_view token) {
  if (token == "epanechnikov") return Kernel(KernelKind::epanechnikov);
  if (token == "uniform") return Kernel(KernelKind::uniform);
  if (token == "triangular") return Kernel(KernelKind::triangular);
  throw std::invalid_argument("kernel: unknown token '" + std::string(token) +
                              "' (expected epanechnikov|uniform|triangular)");
}

const char* Kernel::name() const {
  switch (kind_) {
    case KernelKind::epanechnikov: return "epanechnikov";
    case KernelKind::uniform: return "uniform";
    case KernelKind::triangular: return "triangular";
  }
  return "?";
}

double Kernel::operator()(double t) const {
  if (t < -1.0 || t > 1.0) return 0.0;
  switch (kind_) {
    case KernelKind::epanechnikov: return 0.75 * (1.0 - t * t);
    case KernelKind::uniform: return 0.5;
    case KernelKind::triangular: return 1.0 - std::abs(t);
  }
  return 0.0;
}

double Kernel::moment(int k) const {
  if (k < 0) throw std::invalid_argument("kernel moment: negative order");
  if (k % 2 == 1) return 0.0;
  double kd = k;
  switch (kind_) {
    case KernelKind::epanechnikov: return 3.0 / ((kd + 1.0) * (kd + 3.0));
    case KernelKind::uniform: return 1.0 / (kd + 1.0);
    case KernelKind::triangular: return 2.0 / ((kd + 1.0) * (kd + 2.0));
  }
  return 0.0;
}

double Kernel::squared_integral() const {
  switch (kind_) {
    case KernelKind::epanechnikov: return 0.6;
    case KernelKind::uniform: return 0.5;
    case KernelKind::triangular: return 2.0 / 3.0;
  }
  return 0.0;
}

namespace {

// coefficients c solving (mu_{i+j}) c = e1; EK(t) = (sum c_j t^j) K(t)
const Eigen::VectorXd& ek_coeffs(const Kernel& kernel, int degree) {
  if (degree < 0 || degree > kMaxDegree)
    throw std::invalid_argument("equivalent kernel: degree outside [0," +
                                std::to_string(kMaxDegree) + "]");
  struct Table {
    std::array<Eigen::VectorXd, 3 * (kMaxDegree + 1)> c;
    Table() {
      for (KernelKind kind :
           {KernelKind::epanechnikov, KernelKind::uniform, KernelKind::triangular}) {
        Kernel k(kind);
        for (int p = 0; p <= kMaxDegree; ++p) {
          Eigen::MatrixXd s(p + 1, p + 1);
          for (int i = 0; i <= p; ++i)
            for (int j = 0; j <= p; ++j) s(i, j) = k.moment(i + j);
          Eigen::VectorXd e1 = Eigen::VectorXd::Zero(p + 1);
          e1(0) = 1.0;
          c[kind_index(kind) * (kMaxDegree + 1) + p] = s.fullPivLu().solve(e1);
        }
      }
    }
  };
  static const Table table;
  return table.c[kind_index(kernel.kind()) * (kMaxDegree + 1) + degree];
}

}  // namespace

double equivalent_kernel(const Kernel& kernel, int degree, double t) {
  const Eigen::VectorXd& c = ek_coeffs(kernel, degree);
  double poly = 0.0, tp = 1.0;
  for (int j = 0; j <= degree; ++j) {
    poly += c(j) * tp;
    tp *= t;
  }
  return poly * kernel(t);
}

double equivalent_kernel_at_zero(const Kernel& kernel, int degree) {
  return ek_coeffs(kernel, degree)(0) * kernel.at_zero();
}

double cp_constant(const Kernel& kernel, int degree) {
  if (degree < 1 || degree % 2 == 0)
    throw std::invalid_argument("cp_constant: defined for odd degrees only");
  const Eigen::VectorXd& c = ek_coeffs(kernel, degree);
  // int t^{p+1} EK via kernel moments, int EK^2 by quadrature
  double tp1_moment = 0.0;
  for (int j = 0; j <= degree; ++j) tp1_moment += c(j) * kernel.moment(j + degree + 1);
  double ek_sq = adaptive_simpson(
      [&](double t) {
        double v = equivalent_kernel(kernel, degree, t);
        return v * v;
      },
      -1.0, 1.0, 1e-12);
  double fact = 1.0;
  for (int i = 2; i <= degree + 1; ++i) fact *= i;
  double num = fact * fact * ek_sq;
  double den = 2.0 * (degree + 1.0) * tp1_moment * tp1_moment;
  return std::pow(num / den, 1.0 / (2.0 * degree + 3.0));
}

}  // namespace bregsmooth
