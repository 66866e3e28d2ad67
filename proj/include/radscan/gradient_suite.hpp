#pragma once

#include <functional>
#include <string>
#include <vector>

#include "radscan/gradcheck.hpp"
#include "radscan/tensor.hpp"

namespace radscan {

inline constexpr double kSuiteTolerance = 1e-5;

/// Finite-difference check of <grad, dir> for the scalar `objective` along a
/// random direction over all `params`.
GradCheckReport directional_check(std::string name, const std::function<double()>& objective,
                                  const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                                  std::uint64_t seed, double tolerance, double step = kGradStep);

/// Every differentiable component checked against central differences. With
/// `inject_fault` one analytic gradient is deliberately corrupted so that the
/// harness can be shown to catch it.
std::vector<GradCheckReport> run_gradient_suite(bool inject_fault = false);

}  // namespace radscan
