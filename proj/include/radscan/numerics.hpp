#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "radscan/tensor.hpp"

namespace radscan {

// Differentiable primitives. Each forward has a matching *_backward that maps
// the output cotangent to cotangents of every input and parameter.

struct Padding {
    std::size_t rows = 0;
    std::size_t cols = 0;
};

/// Cross-correlation over (N,C,H,W) or (C,H,W) input with a (Cout,Cin,kh,kw)
/// kernel. `bias` is {Cout} or empty. Output keeps the input's rank.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              Padding padding);
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding);

struct Conv2dGrads {
    Tensor input;
    Tensor kernel;
    Tensor bias;
};
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, std::size_t stride,
                            Padding padding, const Tensor& upstream);

/// Padding that keeps spatial extents at stride 1 for an odd kernel.
Padding same_padding(const Tensor& kernel);

enum class Orientation { horizontal, vertical };

/// Line convolution with a (Cout,Cin,length) kernel laid along one axis,
/// zero "same" padding. Equivalent to conv2d with a 1×length / length×1 kernel.
Tensor axial_conv(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                  Orientation orientation);
Conv2dGrads axial_conv_backward(const Tensor& input, const Tensor& kernel,
                                Orientation orientation, const Tensor& upstream);

// ---------------------------------------------------------------------------
// Fourier transforms over a single H×W plane. Extents must be powers of two.

using Complex = std::complex<double>;

struct Spectrum {
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<Complex> bins;  // row-major, unnormalized forward transform

    Complex& at(std::size_t u, std::size_t v) { return bins[u * w + v]; }
    const Complex& at(std::size_t u, std::size_t v) const { return bins[u * w + v]; }
};

void fft_inplace(std::span<Complex> data, bool inverse);
Spectrum fft2d(const Tensor& plane);
/// Real part of the normalized inverse transform.
Tensor ifft2d(const Spectrum& spectrum);

/// Radial band of frequency bin (u, v): the signed frequency is normalized to
/// unit Nyquist per axis and the [0, sqrt(2)] radius range is split into
/// `bands` rings of equal width. Band 0 holds DC.
std::size_t frequency_band(std::size_t h, std::size_t w, std::size_t u, std::size_t v,
                           std::size_t bands);

inline constexpr std::size_t kDefaultFrequencyBands = 4;

/// Multiplies each plane's spectrum by a learnable per-band gain. `gains`
/// must hold exactly `bands` entries.
Tensor freq_enhance(const Tensor& input, const Tensor& gains,
                    std::size_t bands = kDefaultFrequencyBands);

struct FreqEnhanceGrads {
    Tensor input;
    Tensor gains;
};
FreqEnhanceGrads freq_enhance_backward(const Tensor& input, const Tensor& gains,
                                       const Tensor& upstream,
                                       std::size_t bands = kDefaultFrequencyBands);

// ---------------------------------------------------------------------------

enum class Pointwise { sigmoid, relu, exp, softplus };

double apply_pointwise(Pointwise fn, double x);
Tensor pointwise(const Tensor& input, Pointwise fn);
Tensor pointwise_backward(const Tensor& input, Pointwise fn, const Tensor& upstream);

/// Affine map on the trailing axis: out[..., j] = sum_i in[..., i] W[i, j] + b[j].
Tensor affine_project(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct AffineGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};
AffineGrads affine_project_backward(const Tensor& input, const Tensor& weight,
                                    const Tensor& upstream);

// ---------------------------------------------------------------------------
// Resampling. Bilinear resize samples at half-pixel centers with edge clamping.

Tensor resize_bilinear(const Tensor& input, std::size_t out_h, std::size_t out_w);
Tensor resize_bilinear_backward(const Tensor& input, const Tensor& upstream);

Tensor avg_pool2(const Tensor& input);
Tensor avg_pool2_backward(const Tensor& input, const Tensor& upstream);

/// 2×2 maximum; ties resolve to the raster-first element of each window.
Tensor max_pool2(const Tensor& input);
Tensor max_pool2_backward(const Tensor& input, const Tensor& upstream);

}  // namespace radscan
