#include "radscan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace radscan {

double relative_error(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), kGradRelFloor});
    return std::abs(analytic - numeric) / scale;
}

GradCheckReport vjp_check(std::string name, const std::function<Tensor()>& forward,
                          const Tensor& upstream, std::vector<CheckedInput> inputs,
                          double tolerance, double step) {
    GradCheckReport report{std::move(name), {}, 0.0, tolerance};
    auto objective = [&] { return dot(upstream, forward()); };
    for (auto& in : inputs) {
        require_same_shape(*in.value, in.analytic, "vjp_check");
        GradInputReport r{in.name, 0.0};
        Tensor& x = *in.value;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double saved = x[i];
            x[i] = saved + step;
            const double plus = objective();
            x[i] = saved - step;
            const double minus = objective();
            x[i] = saved;
            const double numeric = (plus - minus) / (2.0 * step);
            r.max_rel_error = std::max(r.max_rel_error, relative_error(in.analytic[i], numeric));
        }
        report.max_rel_error = std::max(report.max_rel_error, r.max_rel_error);
        report.inputs.push_back(std::move(r));
    }
    return report;
}

}  // namespace radscan
