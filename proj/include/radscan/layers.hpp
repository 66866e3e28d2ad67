#pragma once

#include <cstddef>
#include <string>

#include "radscan/numerics.hpp"
#include "radscan/rng.hpp"
#include "radscan/tensor.hpp"

namespace radscan {

// Parameterized wrappers around the primitives. Every layer exposes
// visit(prefix, f) so that a model, its gradient and its optimizer moments
// can be walked in the same order. backward() adds into the matching grad
// object and returns the input cotangent.

struct ConvLayer {
    Tensor kernel;  // {Cout,Cin,k,k}
    Tensor bias;    // {Cout}
    std::size_t stride = 1;

    /// Uniform(-bound, bound) weights with bound = gain * sqrt(3 / fan_in); zero bias.
    static ConvLayer make(std::size_t out, std::size_t in, std::size_t k, std::size_t stride, Rng& rng,
                          double gain);

    Tensor forward(const Tensor& x) const;
    Tensor backward(const Tensor& x, const Tensor& upstream, ConvLayer& grad) const;

    template <typename F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".kernel", kernel);
        f(prefix + ".bias", bias);
    }
};

struct AxialLayer {
    Tensor kernel;  // {Cout,Cin,len}
    Tensor bias;
    Orientation orientation = Orientation::horizontal;

    static AxialLayer make(std::size_t out, std::size_t in, std::size_t length, Orientation o, Rng& rng,
                           double gain);

    Tensor forward(const Tensor& x) const { return axial_conv(x, kernel, bias, orientation); }
    Tensor backward(const Tensor& x, const Tensor& upstream, AxialLayer& grad) const;

    template <typename F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".kernel", kernel);
        f(prefix + ".bias", bias);
    }
};

struct FreqLayer {
    Tensor gains;  // one per radial band, initialized to 1

    static FreqLayer make(std::size_t bands) { return {Tensor({bands}, 1.0)}; }

    Tensor forward(const Tensor& x) const { return freq_enhance(x, gains, gains.size()); }
    Tensor backward(const Tensor& x, const Tensor& upstream, FreqLayer& grad) const;

    template <typename F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".gains", gains);
    }
};

/// Copy of a model whose every parameter is zero.
template <typename M>
M zeros_like_model(M m) {
    m.visit([](const std::string&, Tensor& t) { t.fill(0.0); });
    return m;
}

template <typename M>
std::size_t parameter_count(M m) {
    std::size_t n = 0;
    m.visit([&](const std::string&, Tensor& t) { n += t.size(); });
    return n;
}

/// Hidden-layer activation.
Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& upstream);

}  // namespace radscan
