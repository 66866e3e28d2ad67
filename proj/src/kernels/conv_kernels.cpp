#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <string>

#include "radscan/kernels.hpp"

namespace radscan::kernels {

int configure_threads_from_env() {
    if (const char* env = std::getenv("RADIAL_SSM_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1) omp_set_num_threads(std::min(cap, omp_get_num_procs()));
    }
    return omp_get_max_threads();
}

namespace {

inline std::size_t in_index(const ConvGeometry& g, std::size_t n, std::size_t c, std::size_t y,
                            std::size_t x) {
    return ((n * g.in_channels + c) * g.in_h + y) * g.in_w + x;
}

inline std::size_t out_index(const ConvGeometry& g, std::size_t n, std::size_t c, std::size_t y,
                             std::size_t x) {
    return ((n * g.out_channels + c) * g.out_h + y) * g.out_w + x;
}

inline std::size_t k_index(const ConvGeometry& g, std::size_t o, std::size_t c, std::size_t ky,
                           std::size_t kx) {
    return ((o * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx;
}

// One output plane; the kernel-tap loops run outermost so the inner loop is a
// contiguous row sweep.
void conv_plane(const ConvGeometry& g, const double* input, const double* kernel,
                const double* bias, double* output, std::size_t n, std::size_t o) {
    double* out = output + out_index(g, n, o, 0, 0);
    const double b = bias ? bias[o] : 0.0;
    std::fill(out, out + g.out_h * g.out_w, b);
    const auto ph = static_cast<long>(g.pad_rows);
    const auto pw = static_cast<long>(g.pad_cols);
    const auto ih = static_cast<long>(g.in_h);
    const auto iw = static_cast<long>(g.in_w);
    const auto stride = static_cast<long>(g.stride);
    for (std::size_t c = 0; c < g.in_channels; ++c) {
        const double* in = input + in_index(g, n, c, 0, 0);
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const double kv = kernel[k_index(g, o, c, ky, kx)];
                if (kv == 0.0) continue;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const long iy = static_cast<long>(oy) * stride + static_cast<long>(ky) - ph;
                    if (iy < 0 || iy >= ih) continue;
                    const double* row = in + iy * iw;
                    double* orow = out + oy * g.out_w;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const long ix = static_cast<long>(ox) * stride + static_cast<long>(kx) - pw;
                        if (ix < 0 || ix >= iw) continue;
                        orow[ox] += kv * row[ix];
                    }
                }
            }
        }
    }
}

}  // namespace

void conv2d_forward_reference(const ConvGeometry& g, const double* input, const double* kernel,
                              const double* bias, double* output) {
    for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t o = 0; o < g.out_channels; ++o) {
            for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                    double acc = bias ? bias[o] : 0.0;
                    for (std::size_t c = 0; c < g.in_channels; ++c) {
                        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
                            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                                const long iy = static_cast<long>(oy * g.stride + ky) -
                                                static_cast<long>(g.pad_rows);
                                const long ix = static_cast<long>(ox * g.stride + kx) -
                                                static_cast<long>(g.pad_cols);
                                if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.in_h) ||
                                    ix >= static_cast<long>(g.in_w)) {
                                    continue;
                                }
                                acc += kernel[k_index(g, o, c, ky, kx)] *
                                       input[in_index(g, n, c, static_cast<std::size_t>(iy),
                                                      static_cast<std::size_t>(ix))];
                            }
                        }
                    }
                    output[out_index(g, n, o, oy, ox)] = acc;
                }
            }
        }
    }
}

void conv2d_forward(const ConvGeometry& g, const double* input, const double* kernel,
                    const double* bias, double* output) {
    const long planes = static_cast<long>(g.batch * g.out_channels);
#pragma omp parallel for schedule(static) if (planes > 1 && g.out_h * g.out_w >= 256)
    for (long p = 0; p < planes; ++p) {
        const auto n = static_cast<std::size_t>(p) / g.out_channels;
        const auto o = static_cast<std::size_t>(p) % g.out_channels;
        conv_plane(g, input, kernel, bias, output, n, o);
    }
}

void conv2d_backward_reference(const ConvGeometry& g, const double* input, const double* kernel,
                               const double* upstream, double* grad_input, double* grad_kernel,
                               double* grad_bias) {
    std::fill(grad_input, grad_input + g.batch * g.in_channels * g.in_h * g.in_w, 0.0);
    std::fill(grad_kernel,
              grad_kernel + g.out_channels * g.in_channels * g.kernel_h * g.kernel_w, 0.0);
    if (grad_bias) std::fill(grad_bias, grad_bias + g.out_channels, 0.0);
    for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t o = 0; o < g.out_channels; ++o) {
            for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                    const double up = upstream[out_index(g, n, o, oy, ox)];
                    if (grad_bias) grad_bias[o] += up;
                    for (std::size_t c = 0; c < g.in_channels; ++c) {
                        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
                            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                                const long iy = static_cast<long>(oy * g.stride + ky) -
                                                static_cast<long>(g.pad_rows);
                                const long ix = static_cast<long>(ox * g.stride + kx) -
                                                static_cast<long>(g.pad_cols);
                                if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.in_h) ||
                                    ix >= static_cast<long>(g.in_w)) {
                                    continue;
                                }
                                const auto ii = in_index(g, n, c, static_cast<std::size_t>(iy),
                                                         static_cast<std::size_t>(ix));
                                grad_kernel[k_index(g, o, c, ky, kx)] += up * input[ii];
                                grad_input[ii] += up * kernel[k_index(g, o, c, ky, kx)];
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward(const ConvGeometry& g, const double* input, const double* kernel,
                     const double* upstream, double* grad_input, double* grad_kernel,
                     double* grad_bias) {
    const auto ph = static_cast<long>(g.pad_rows);
    const auto pw = static_cast<long>(g.pad_cols);
    const auto ih = static_cast<long>(g.in_h);
    const auto iw = static_cast<long>(g.in_w);
    const auto stride = static_cast<long>(g.stride);
    const bool big = g.out_h * g.out_w >= 256;

    // Kernel and bias cotangents: each output channel owns its slice.
#pragma omp parallel for schedule(static) if (g.out_channels > 1 && big)
    for (long ol = 0; ol < static_cast<long>(g.out_channels); ++ol) {
        const auto o = static_cast<std::size_t>(ol);
        if (grad_bias) {
            double acc = 0.0;
            for (std::size_t n = 0; n < g.batch; ++n) {
                const double* up = upstream + out_index(g, n, o, 0, 0);
                for (std::size_t i = 0; i < g.out_h * g.out_w; ++i) acc += up[i];
            }
            grad_bias[o] = acc;
        }
        for (std::size_t c = 0; c < g.in_channels; ++c) {
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
                for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                    double acc = 0.0;
                    for (std::size_t n = 0; n < g.batch; ++n) {
                        const double* in = input + in_index(g, n, c, 0, 0);
                        const double* up = upstream + out_index(g, n, o, 0, 0);
                        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                            const long iy =
                                static_cast<long>(oy) * stride + static_cast<long>(ky) - ph;
                            if (iy < 0 || iy >= ih) continue;
                            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                                const long ix =
                                    static_cast<long>(ox) * stride + static_cast<long>(kx) - pw;
                                if (ix < 0 || ix >= iw) continue;
                                acc += up[oy * g.out_w + ox] * in[iy * iw + ix];
                            }
                        }
                    }
                    grad_kernel[k_index(g, o, c, ky, kx)] = acc;
                }
            }
        }
    }

    // Input cotangent: each (batch, input channel) plane owned by one thread.
    const long planes = static_cast<long>(g.batch * g.in_channels);
#pragma omp parallel for schedule(static) if (planes > 1 && big)
    for (long p = 0; p < planes; ++p) {
        const auto n = static_cast<std::size_t>(p) / g.in_channels;
        const auto c = static_cast<std::size_t>(p) % g.in_channels;
        double* gin = grad_input + in_index(g, n, c, 0, 0);
        std::fill(gin, gin + g.in_h * g.in_w, 0.0);
        for (std::size_t o = 0; o < g.out_channels; ++o) {
            const double* up = upstream + out_index(g, n, o, 0, 0);
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
                for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                    const double kv = kernel[k_index(g, o, c, ky, kx)];
                    if (kv == 0.0) continue;
                    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                        const long iy = static_cast<long>(oy) * stride + static_cast<long>(ky) - ph;
                        if (iy < 0 || iy >= ih) continue;
                        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                            const long ix =
                                static_cast<long>(ox) * stride + static_cast<long>(kx) - pw;
                            if (ix < 0 || ix >= iw) continue;
                            gin[iy * iw + ix] += kv * up[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace radscan::kernels
