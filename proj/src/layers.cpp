#include "radscan/layers.hpp"

#include <cmath>

namespace radscan {

ConvLayer ConvLayer::make(std::size_t out, std::size_t in, std::size_t k, std::size_t stride, Rng& rng,
                          double gain) {
    const double bound = gain * std::sqrt(3.0 / static_cast<double>(in * k * k));
    return {random_tensor({out, in, k, k}, rng, -bound, bound), Tensor({out}), stride};
}

Tensor ConvLayer::forward(const Tensor& x) const {
    return conv2d(x, kernel, bias, stride, same_padding(kernel));
}

Tensor ConvLayer::backward(const Tensor& x, const Tensor& upstream, ConvLayer& grad) const {
    Conv2dGrads g = conv2d_backward(x, kernel, stride, same_padding(kernel), upstream);
    grad.kernel += g.kernel;
    grad.bias += g.bias;
    return std::move(g.input);
}

AxialLayer AxialLayer::make(std::size_t out, std::size_t in, std::size_t length, Orientation o, Rng& rng,
                            double gain) {
    const double bound = gain * std::sqrt(3.0 / static_cast<double>(in * length));
    return {random_tensor({out, in, length}, rng, -bound, bound), Tensor({out}), o};
}

Tensor AxialLayer::backward(const Tensor& x, const Tensor& upstream, AxialLayer& grad) const {
    Conv2dGrads g = axial_conv_backward(x, kernel, orientation, upstream);
    grad.kernel += g.kernel;
    grad.bias += g.bias;
    return std::move(g.input);
}

Tensor FreqLayer::backward(const Tensor& x, const Tensor& upstream, FreqLayer& grad) const {
    FreqEnhanceGrads g = freq_enhance_backward(x, gains, upstream, gains.size());
    grad.gains += g.gains;
    return std::move(g.input);
}

Tensor relu(const Tensor& x) { return pointwise(x, Pointwise::relu); }

Tensor relu_backward(const Tensor& x, const Tensor& upstream) {
    return pointwise_backward(x, Pointwise::relu, upstream);
}

}  // namespace radscan
