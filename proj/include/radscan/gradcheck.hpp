#pragma once

#include <functional>
#include <string>
#include <vector>

#include "radscan/tensor.hpp"

namespace radscan {

/// Elements whose gradients are both below this magnitude are compared in
/// absolute rather than relative terms.
inline constexpr double kGradRelFloor = 1e-3;
inline constexpr double kGradStep = 1e-5;

struct GradInputReport {
    std::string name;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::string name;
    std::vector<GradInputReport> inputs;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool passed() const { return max_rel_error < tolerance; }
};

/// An input to perturb together with its analytic cotangent.
struct CheckedInput {
    std::string name;
    Tensor* value;
    Tensor analytic;
};

/// Compares analytic VJPs against central finite differences of the scalar
/// <upstream, forward()>. `forward` must read the inputs through the pointers
/// held in `inputs`, which are perturbed in place and restored.
GradCheckReport vjp_check(std::string name, const std::function<Tensor()>& forward,
                          const Tensor& upstream, std::vector<CheckedInput> inputs,
                          double tolerance, double step = kGradStep);

double relative_error(double analytic, double numeric);

}  // namespace radscan
