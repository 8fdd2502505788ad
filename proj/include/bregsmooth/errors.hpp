#pragma once

#include <stdexcept>
#include <string>

namespace bregsmooth {

// Numerical failures that callers may want to catch separately from
// std::domain_error (bad math inputs) and std::invalid_argument (bad usage).

struct singular_matrix_error : std::runtime_error {
  explicit singular_matrix_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct insufficient_data_error : std::runtime_error {
  explicit insufficient_data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Leverage at or above 1: leave-one-out factors 1/(1-H) blow up.
struct leverage_error : std::runtime_error {
  explicit leverage_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct divergent_integral_error : std::runtime_error {
  explicit divergent_integral_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace bregsmooth
