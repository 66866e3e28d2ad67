#pragma once

// Hot loops in two flavours: a plain serial reference kept for testing and an
// OpenMP version used by the library. Both produce identical results because
// every output element is reduced by exactly one thread in a fixed order.

#include <cstddef>
#include <span>

namespace radscan::kernels {

/// Number of OpenMP threads, capped by RADIAL_SSM_THREADS when set.
int configure_threads_from_env();

struct ConvGeometry {
    std::size_t batch, in_channels, in_h, in_w;
    std::size_t out_channels, kernel_h, kernel_w;
    std::size_t stride, pad_rows, pad_cols;
    std::size_t out_h, out_w;
};

void conv2d_forward_reference(const ConvGeometry& g, const double* input, const double* kernel,
                              const double* bias, double* output);
void conv2d_forward(const ConvGeometry& g, const double* input, const double* kernel,
                    const double* bias, double* output);

/// Accumulates nothing: all three gradient buffers are overwritten.
/// `grad_bias` may be null.
void conv2d_backward_reference(const ConvGeometry& g, const double* input, const double* kernel,
                               const double* upstream, double* grad_input, double* grad_kernel,
                               double* grad_bias);
void conv2d_backward(const ConvGeometry& g, const double* input, const double* kernel,
                     const double* upstream, double* grad_input, double* grad_kernel,
                     double* grad_bias);

/// Discretized diagonal recurrence, one hidden vector of `state` entries per channel:
///   h_i[c,:] = decay_i ⊙ h_{i-1}[c,:] + drive_i * x_i[c]
///   y_i[c]   = <readout_i, h_i[c,:]> + feedthrough[c] * x_i[c]
/// Sequences are row-major: x is length×channels, decay/drive/readout are length×state.
struct ScanView {
    std::size_t length = 0;
    std::size_t channels = 0;
    std::size_t state = 0;
    const double* x = nullptr;
    const double* decay = nullptr;
    const double* drive = nullptr;
    const double* readout = nullptr;
    const double* feedthrough = nullptr;
};

/// Sequential reference. When `checkpoints` is non-null it receives the state
/// entering every token whose index is a multiple of `stride`
/// (ceil(length/stride) blocks of channels×state values).
void scan_forward_reference(const ScanView& v, double* y, double* checkpoints,
                            std::size_t stride);

/// Same recurrence, channels distributed across threads.
void scan_forward(const ScanView& v, double* y, double* checkpoints, std::size_t stride);

/// Chunked variant: local scans from a zero state inside each chunk, a short
/// sequential carry of chunk-boundary states, then a correction pass using
/// per-chunk cumulative decay products. Chunks are processed in lockstep so the
/// inner loop runs across independent chunks.
void scan_forward_chunked(const ScanView& v, double* y, std::size_t chunk);

}  // namespace radscan::kernels
