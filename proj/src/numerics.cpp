#include "radscan/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "radscan/kernels.hpp"

namespace radscan {

namespace {

kernels::ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernel, std::size_t stride,
                                    Padding padding) {
    const Dims4 d = dims4(input, "conv2d");
    if (kernel.rank() != 4) {
        throw ShapeError("conv2d: kernel must be (Cout,Cin,kh,kw), got " +
                         shape_to_string(kernel.shape()));
    }
    if (kernel.dim(1) != d.c) {
        throw ShapeError("conv2d: input has " + std::to_string(d.c) +
                         " channels but kernel expects " + std::to_string(kernel.dim(1)));
    }
    if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
    const std::size_t kh = kernel.dim(2);
    const std::size_t kw = kernel.dim(3);
    if (d.h + 2 * padding.rows < kh || d.w + 2 * padding.cols < kw) {
        throw ShapeError("conv2d: kernel larger than padded input");
    }
    kernels::ConvGeometry g{};
    g.batch = d.n;
    g.in_channels = d.c;
    g.in_h = d.h;
    g.in_w = d.w;
    g.out_channels = kernel.dim(0);
    g.kernel_h = kh;
    g.kernel_w = kw;
    g.stride = stride;
    g.pad_rows = padding.rows;
    g.pad_cols = padding.cols;
    g.out_h = (d.h + 2 * padding.rows - kh) / stride + 1;
    g.out_w = (d.w + 2 * padding.cols - kw) / stride + 1;
    return g;
}

Shape like_input(const Tensor& input, std::size_t c, std::size_t h, std::size_t w) {
    if (input.rank() == 4) return {input.dim(0), c, h, w};
    return {c, h, w};
}

void check_bias(const Tensor& bias, std::size_t out_channels, const char* what) {
    if (!bias.empty() && (bias.rank() != 1 || bias.dim(0) != out_channels)) {
        throw ShapeError(std::string(what) + ": bias must be {" + std::to_string(out_channels) +
                         "}, got " + shape_to_string(bias.shape()));
    }
}

}  // namespace

Padding same_padding(const Tensor& kernel) {
    if (kernel.rank() != 4 || kernel.dim(2) % 2 == 0 || kernel.dim(3) % 2 == 0) {
        throw ShapeError("same padding needs odd kernel extents, got " +
                         shape_to_string(kernel.shape()));
    }
    return {(kernel.dim(2) - 1) / 2, (kernel.dim(3) - 1) / 2};
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              Padding padding) {
    const auto g = conv_geometry(input, kernel, stride, padding);
    check_bias(bias, g.out_channels, "conv2d");
    Tensor out(like_input(input, g.out_channels, g.out_h, g.out_w));
    kernels::conv2d_forward(g, input.data().data(), kernel.data().data(),
                            bias.empty() ? nullptr : bias.data().data(), out.data().data());
    return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
    return conv2d(input, kernel, bias, stride, Padding{padding, padding});
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, std::size_t stride,
                            Padding padding, const Tensor& upstream) {
    const auto g = conv_geometry(input, kernel, stride, padding);
    if (upstream.shape() != like_input(input, g.out_channels, g.out_h, g.out_w)) {
        throw ShapeError("conv2d_backward: upstream shape " + shape_to_string(upstream.shape()) +
                         " does not match the forward output");
    }
    Conv2dGrads grads{Tensor(input.shape()), Tensor(kernel.shape()), Tensor({g.out_channels})};
    kernels::conv2d_backward(g, input.data().data(), kernel.data().data(), upstream.data().data(),
                             grads.input.data().data(), grads.kernel.data().data(),
                             grads.bias.data().data());
    return grads;
}

// ---------------------------------------------------------------------------

namespace {

Tensor axial_kernel(const Tensor& kernel, Orientation orientation) {
    if (kernel.rank() != 3) {
        throw ShapeError("axial_conv: kernel must be (Cout,Cin,length), got " +
                         shape_to_string(kernel.shape()));
    }
    const std::size_t len = kernel.dim(2);
    if (len % 2 == 0) throw std::invalid_argument("axial_conv: length must be odd, got " + std::to_string(len));
    if (orientation == Orientation::horizontal) return kernel.reshaped({kernel.dim(0), kernel.dim(1), 1, len});
    return kernel.reshaped({kernel.dim(0), kernel.dim(1), len, 1});
}

}  // namespace

Tensor axial_conv(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                  Orientation orientation) {
    const Tensor k = axial_kernel(kernel, orientation);
    return conv2d(input, k, bias, 1, same_padding(k));
}

Conv2dGrads axial_conv_backward(const Tensor& input, const Tensor& kernel,
                                Orientation orientation, const Tensor& upstream) {
    const Tensor k = axial_kernel(kernel, orientation);
    Conv2dGrads g = conv2d_backward(input, k, 1, same_padding(k), upstream);
    g.kernel = g.kernel.reshaped(kernel.shape());
    return g;
}

// ---------------------------------------------------------------------------

double apply_pointwise(Pointwise fn, double x) {
    switch (fn) {
        case Pointwise::sigmoid:
            if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
            else {
                const double e = std::exp(x);
                return e / (1.0 + e);
            }
        case Pointwise::relu:
            return x > 0 ? x : 0.0;
        case Pointwise::exp:
            return std::exp(x);
        case Pointwise::softplus:
            return x > 30 ? x : std::log1p(std::exp(x));
    }
    return x;
}

Tensor pointwise(const Tensor& input, Pointwise fn) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = apply_pointwise(fn, input[i]);
    require_finite(out, "pointwise");
    return out;
}

Tensor pointwise_backward(const Tensor& input, Pointwise fn, const Tensor& upstream) {
    require_same_shape(input, upstream, "pointwise_backward");
    Tensor g(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double x = input[i];
        double d = 0.0;
        switch (fn) {
            case Pointwise::sigmoid: {
                const double s = apply_pointwise(Pointwise::sigmoid, x);
                d = s * (1.0 - s);
                break;
            }
            case Pointwise::relu:
                d = x > 0 ? 1.0 : 0.0;
                break;
            case Pointwise::exp:
                d = std::exp(x);
                break;
            case Pointwise::softplus:
                d = apply_pointwise(Pointwise::sigmoid, x);
                break;
        }
        g[i] = d * upstream[i];
    }
    return g;
}

// ---------------------------------------------------------------------------

Tensor affine_project(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    if (weight.rank() != 2) throw ShapeError("affine_project: weight must be (d_in, d_out)");
    const std::size_t d_in = weight.dim(0);
    const std::size_t d_out = weight.dim(1);
    if (input.rank() == 0 || input.shape().back() != d_in) {
        throw ShapeError("affine_project: input trailing extent " +
                         (input.rank() ? std::to_string(input.shape().back()) : std::string("none")) +
                         " != weight input extent " + std::to_string(d_in));
    }
    check_bias(bias, d_out, "affine_project");
    Shape out_shape = input.shape();
    out_shape.back() = d_out;
    Tensor out(out_shape);
    const std::size_t rows = input.size() / d_in;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = input.data().data() + r * d_in;
        double* o = out.data().data() + r * d_out;
        for (std::size_t j = 0; j < d_out; ++j) o[j] = bias.empty() ? 0.0 : bias[j];
        for (std::size_t i = 0; i < d_in; ++i) {
            const double v = in[i];
            const double* w = weight.data().data() + i * d_out;
            for (std::size_t j = 0; j < d_out; ++j) o[j] += v * w[j];
        }
    }
    return out;
}

AffineGrads affine_project_backward(const Tensor& input, const Tensor& weight,
                                    const Tensor& upstream) {
    const std::size_t d_in = weight.dim(0);
    const std::size_t d_out = weight.dim(1);
    Shape out_shape = input.shape();
    out_shape.back() = d_out;
    if (upstream.shape() != out_shape) throw ShapeError("affine_project_backward: upstream shape mismatch");
    AffineGrads g{Tensor(input.shape()), Tensor(weight.shape()), Tensor({d_out})};
    const std::size_t rows = input.size() / d_in;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = input.data().data() + r * d_in;
        const double* up = upstream.data().data() + r * d_out;
        double* gi = g.input.data().data() + r * d_in;
        for (std::size_t j = 0; j < d_out; ++j) g.bias[j] += up[j];
        for (std::size_t i = 0; i < d_in; ++i) {
            const double* w = weight.data().data() + i * d_out;
            double* gw = g.weight.data().data() + i * d_out;
            double acc = 0.0;
            for (std::size_t j = 0; j < d_out; ++j) {
                acc += up[j] * w[j];
                gw[j] += in[i] * up[j];
            }
            gi[i] = acc;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------

namespace {

struct Tap {
    std::size_t i0, i1;
    double t;
};

// Half-pixel-center source coordinate for each destination index.
std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
    std::vector<Tap> taps(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        const auto i0 = static_cast<std::size_t>(std::floor(src));
        const std::size_t i1 = std::min(i0 + 1, in - 1);
        taps[o] = {i0, i1, src - static_cast<double>(i0)};
    }
    return taps;
}

}  // namespace

Tensor resize_bilinear(const Tensor& input, std::size_t out_h, std::size_t out_w) {
    const Dims4 d = dims4(input, "resize_bilinear");
    if (out_h == 0 || out_w == 0) throw std::invalid_argument("resize_bilinear: target extents must be >= 1");
    const auto ty = bilinear_taps(d.h, out_h);
    const auto tx = bilinear_taps(d.w, out_w);
    Tensor out(like_input(input, d.c, out_h, out_w));
    for (std::size_t p = 0; p < d.n * d.c; ++p) {
        const double* in = input.data().data() + p * d.h * d.w;
        double* o = out.data().data() + p * out_h * out_w;
        for (std::size_t y = 0; y < out_h; ++y) {
            const auto& a = ty[y];
            for (std::size_t x = 0; x < out_w; ++x) {
                const auto& b = tx[x];
                const double top = in[a.i0 * d.w + b.i0] * (1 - b.t) + in[a.i0 * d.w + b.i1] * b.t;
                const double bot = in[a.i1 * d.w + b.i0] * (1 - b.t) + in[a.i1 * d.w + b.i1] * b.t;
                o[y * out_w + x] = top * (1 - a.t) + bot * a.t;
            }
        }
    }
    return out;
}

Tensor resize_bilinear_backward(const Tensor& input, const Tensor& upstream) {
    const Dims4 d = dims4(input, "resize_bilinear_backward");
    const Dims4 u = dims4(upstream, "resize_bilinear_backward");
    if (u.n != d.n || u.c != d.c) throw ShapeError("resize_bilinear_backward: upstream shape mismatch");
    const auto ty = bilinear_taps(d.h, u.h);
    const auto tx = bilinear_taps(d.w, u.w);
    Tensor g(input.shape());
    for (std::size_t p = 0; p < d.n * d.c; ++p) {
        double* gi = g.data().data() + p * d.h * d.w;
        const double* up = upstream.data().data() + p * u.h * u.w;
        for (std::size_t y = 0; y < u.h; ++y) {
            const auto& a = ty[y];
            for (std::size_t x = 0; x < u.w; ++x) {
                const auto& b = tx[x];
                const double v = up[y * u.w + x];
                gi[a.i0 * d.w + b.i0] += v * (1 - a.t) * (1 - b.t);
                gi[a.i0 * d.w + b.i1] += v * (1 - a.t) * b.t;
                gi[a.i1 * d.w + b.i0] += v * a.t * (1 - b.t);
                gi[a.i1 * d.w + b.i1] += v * a.t * b.t;
            }
        }
    }
    return g;
}

namespace {

Dims4 pool_dims(const Tensor& input, const char* what) {
    const Dims4 d = dims4(input, what);
    if (d.h % 2 != 0 || d.w % 2 != 0) {
        throw ShapeError(std::string(what) + ": spatial extents must be even, got " +
                         shape_to_string(input.shape()));
    }
    return d;
}

}  // namespace

Tensor avg_pool2(const Tensor& input) {
    const Dims4 d = pool_dims(input, "avg_pool2");
    const std::size_t oh = d.h / 2, ow = d.w / 2;
    Tensor out(like_input(input, d.c, oh, ow));
    for (std::size_t p = 0; p < d.n * d.c; ++p) {
        const double* in = input.data().data() + p * d.h * d.w;
        double* o = out.data().data() + p * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                const double* r0 = in + 2 * y * d.w + 2 * x;
                const double* r1 = r0 + d.w;
                o[y * ow + x] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
            }
        }
    }
    return out;
}

Tensor avg_pool2_backward(const Tensor& input, const Tensor& upstream) {
    const Dims4 d = pool_dims(input, "avg_pool2_backward");
    const std::size_t oh = d.h / 2, ow = d.w / 2;
    Tensor g(input.shape());
    for (std::size_t p = 0; p < d.n * d.c; ++p) {
        double* gi = g.data().data() + p * d.h * d.w;
        const double* up = upstream.data().data() + p * oh * ow;
        for (std::size_t y = 0; y < d.h; ++y) {
            for (std::size_t x = 0; x < d.w; ++x) gi[y * d.w + x] = 0.25 * up[(y / 2) * ow + x / 2];
        }
    }
    return g;
}

namespace {

// Index inside the 2×2 window (0..3, raster order) holding the maximum.
std::size_t argmax_window(const double* r0, const double* r1) {
    const double v[4] = {r0[0], r0[1], r1[0], r1[1]};
    std::size_t best = 0;
    for (std::size_t k = 1; k < 4; ++k) {
        if (v[k] > v[best]) best = k;
    }
    return best;
}

}  // namespace

Tensor max_pool2(const Tensor& input) {
    const Dims4 d = pool_dims(input, "max_pool2");
    const std::size_t oh = d.h / 2, ow = d.w / 2;
    Tensor out(like_input(input, d.c, oh, ow));
    for (std::size_t p = 0; p < d.n * d.c; ++p) {
        const double* in = input.data().data() + p * d.h * d.w;
        double* o = out.data().data() + p * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                const double* r0 = in + 2 * y * d.w + 2 * x;
                const double* r1 = r0 + d.w;
                const std::size_t k = argmax_window(r0, r1);
                o[y * ow + x] = (k < 2 ? r0 : r1)[k % 2];
            }
        }
    }
    return out;
}

Tensor max_pool2_backward(const Tensor& input, const Tensor& upstream) {
    const Dims4 d = pool_dims(input, "max_pool2_backward");
    const std::size_t oh = d.h / 2, ow = d.w / 2;
    Tensor g(input.shape());
    for (std::size_t p = 0; p < d.n * d.c; ++p) {
        const double* in = input.data().data() + p * d.h * d.w;
        double* gi = g.data().data() + p * d.h * d.w;
        const double* up = upstream.data().data() + p * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                const std::size_t base = 2 * y * d.w + 2 * x;
                const std::size_t k = argmax_window(in + base, in + base + d.w);
                gi[base + (k / 2) * d.w + k % 2] = up[y * ow + x];
            }
        }
    }
    return g;
}

}  // namespace radscan
