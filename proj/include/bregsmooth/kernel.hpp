#pragma once

#include <string_view>
#include <vector>

namespace bregsmooth {

enum class KernelKind { epanechnikov, uniform, triangular };

// Symmetric density kernels supported on [-1,1].
class Kernel {
 public:
  explicit Kernel(KernelKind kind = KernelKind::epanechnikov) : kind_(kind) {}

  static Kernel parse(std::string_view token);

  KernelKind kind() const { return kind_; }
  const char* name() const;

  double operator()(double t) const;
  double at_zero() const { return (*this)(0.0); }
  // K((u)/h)/h with the bandwidth folded in
  double scaled(double u, double h) const { return (*this)(u / h) / h; }

  // closed-form raw moment mu_k = int t^k K(t) dt
  double moment(int k) const;
  double squared_integral() const;  // int K(t)^2 dt

 private:
  KernelKind kind_;
};

// Equivalent kernel of degree-p local polynomial fitting:
//   EK_p(t) = e1' S^{-1} (1, t, ..., t^p)' K(t),  S = (mu_{i+j}).
// Coefficients are cached per (kernel, degree) in a table built on first use.
double equivalent_kernel(const Kernel& kernel, int degree, double t);
double equivalent_kernel_at_zero(const Kernel& kernel, int degree);

// Bandwidth constant of odd-degree local polynomial smoothing,
//   C_p(K) = [ ((p+1)!)^2 int EK^2 / (2(p+1) {int t^{p+1} EK}^2) ]^{1/(2p+3)}.
double cp_constant(const Kernel& kernel, int degree);

}  // namespace bregsmooth
