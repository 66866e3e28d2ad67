#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "radscan/tensor.hpp"

namespace radscan {

/// State-space parameters for one scan over L tokens with d channels and a
/// d_state-dimensional diagonal state per channel. A = -exp(a_log) < 0.
struct ScanParams {
    Tensor a_log;        // {d_state}
    Tensor b_seq;        // {L, d_state}
    Tensor c_seq;        // {L, d_state}
    Tensor delta_seq;    // {L}, strictly positive
    Tensor feedthrough;  // {d}

    std::size_t length() const { return delta_seq.size(); }
    std::size_t state() const { return a_log.size(); }
};

/// Prior-derived modulation: multiplicative weight w in (0,1) on the input
/// and output maps, additive prompt on the output map.
struct Excitation {
    Tensor w_seq;       // {L, d_state}
    Tensor prompt_seq;  // {L, d_state}

    /// w ≡ 1, prompt ≡ 0.
    static Excitation unit(std::size_t length, std::size_t state);
};

/// One flag per token of the unfolded sequence; 1 marks a bypassed source token.
struct RouteMask {
    std::vector<std::uint8_t> m_seq;
    static RouteMask from_sequence(const Tensor& seq);  // {L} or {L,1}, nonzero -> 1
};

struct AffineParams {
    Tensor weight;  // {d_in, d_out}
    Tensor bias;    // {d_out}
};

struct Discretized {
    Tensor abar;  // {L, d_state}: exp(delta_i * A)
    Tensor bbar;  // {L, d_state}: delta_i * B_i
};

/// Zero-order-hold transition with the simplified input map B̄ = Δ·B.
Discretized discretize_zoh(const Tensor& a_log, const Tensor& delta_seq, const Tensor& b_seq);

/// h_i = Ā_i h_{i-1} + B̄_i x_i,  y_i = C_i h_i + D x_i,  h_0 = 0.
Tensor selective_scan(const Tensor& x_seq, const ScanParams& params);

/// h_i = Ā_i h_{i-1} + (B̄_i ⊙ w_i) x_i,  y_i = (C_i ⊙ w_i + p_i) h_i + D x_i.
Tensor rse_scan(const Tensor& x_seq, const ScanParams& params, const Excitation& exc);

/// Same output as rse_scan through the chunked kernel.
Tensor chunked_scan(const Tensor& x_seq, const ScanParams& params, const Excitation& exc,
                    std::size_t chunk);

/// w_i = sigmoid(affine_w(p_i)), prompt_i = affine_p(p_i) for a radially
/// unfolded contamination sequence ({L} or {L,1}).
Excitation flare_excitation(const Tensor& p_flare_seq, const AffineParams& proj_w,
                            const AffineParams& proj_p);

/// Tokens flagged in `mask` are copied to the output and removed from the
/// recurrence; the remaining tokens are scanned as one compacted sequence and
/// scattered back to their positions.
Tensor hb_route(const Tensor& x_seq, const RouteMask& mask, const ScanParams& params,
                const Excitation& exc);

// ---------------------------------------------------------------------------
// Training path: forward with state checkpoints, analytic reverse pass.

inline constexpr std::size_t kDefaultCheckpointStride = 16;

struct ScanTape {
    Tensor x;
    ScanParams params;
    Excitation exc;
    bool modulated = false;
    Tensor decay, drive, readout;     // kernel inputs, {L, d_state}
    std::vector<double> checkpoints;  // state entering every stride-th token
    std::size_t stride = kDefaultCheckpointStride;
};

struct ScanGrads {
    Tensor x;
    Tensor a_log;
    Tensor b_seq;
    Tensor c_seq;
    Tensor delta_seq;
    Tensor w_seq;
    Tensor prompt_seq;
    Tensor feedthrough;
};

/// rse_scan (or selective_scan when `exc` is null) recording a tape.
Tensor scan_forward_taped(const Tensor& x_seq, const ScanParams& params, const Excitation* exc,
                          ScanTape& tape, std::size_t stride = kDefaultCheckpointStride);

/// Rejects a tape without a complete checkpoint set.
ScanGrads scan_backward(const Tensor& upstream, const ScanTape& tape);

struct RouteTape {
    std::vector<std::uint32_t> active;  // sequence positions that were scanned
    std::size_t length = 0;
    std::size_t channels = 0;
    std::size_t state = 0;
    bool any_active = false;
    ScanTape scan;
};

Tensor hb_route_taped(const Tensor& x_seq, const RouteMask& mask, const ScanParams& params,
                      const Excitation* exc, RouteTape& tape,
                      std::size_t stride = kDefaultCheckpointStride);

/// Cotangents at full sequence length; bypassed tokens pass the upstream
/// straight to x and contribute nothing to the parameters.
ScanGrads hb_route_backward(const Tensor& upstream, const RouteTape& tape);

}  // namespace radscan
