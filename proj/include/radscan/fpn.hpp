#pragma once

#include <cstddef>
#include <vector>

#include "radscan/geometry.hpp"
#include "radscan/layers.hpp"

namespace radscan {

struct FpnConfig {
    std::size_t channels = 8;  // level 0 width; deeper levels use twice this
    std::size_t levels = 3;
    std::size_t bands = kDefaultFrequencyBands;
    std::size_t axial_length = 5;
    double heat_bias = -2.19;  // initial heat ≈ 0.1
    bool zero_heads = false;   // both heads start at exactly zero
};

/// Residual line/frequency block: x + mix(relu(h(x) + v(x) + freq(x))).
struct RflBlock {
    AxialLayer horiz, vert;
    FreqLayer freq;
    ConvLayer mix;

    template <typename F>
    void visit(const std::string& p, F&& f) {
        horiz.visit(p + ".horiz", f);
        vert.visit(p + ".vert", f);
        freq.visit(p + ".freq", f);
        mix.visit(p + ".mix", f);
    }
};

struct FpnModel {
    FpnConfig config;
    ConvLayer stem;
    std::vector<ConvLayer> down;   // level l-1 -> l, stride 2
    std::vector<RflBlock> blocks;  // one per level, 0..levels
    std::vector<ConvLayer> up;     // up[l]: level l+1 -> l after resizing
    ConvLayer flare_head, heat_head;

    static FpnModel init(const FpnConfig& config, Rng& rng);
    std::size_t channels_at(std::size_t level) const;

    template <typename F>
    void visit(F&& f) {
        stem.visit("stem", f);
        for (std::size_t i = 0; i < down.size(); ++i) down[i].visit("down" + std::to_string(i), f);
        for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].visit("rfl" + std::to_string(i), f);
        for (std::size_t i = 0; i < up.size(); ++i) up[i].visit("up" + std::to_string(i), f);
        flare_head.visit("flare_head", f);
        heat_head.visit("heat_head", f);
    }
};

struct RflTape {
    Tensor x, pre;
};

struct FpnTape {
    Tensor input;
    std::vector<Tensor> stem_pre;  // pre-activation per level (stem or down conv)
    std::vector<Tensor> act;       // relu output per level, the block input
    std::vector<RflTape> rfl;
    std::vector<Tensor> enc;       // block output per level
    std::vector<Tensor> resized;   // up[l] input
    std::vector<Tensor> up_pre;    // up[l] output before relu
    std::vector<Tensor> dec;       // decoder output per level
    Tensor flare_pre, heat_pre;
};

struct FpnOutput {
    Tensor flare;  // {1,H,W}
    Tensor heat;   // {1,H,W}
};

/// Both maps are sigmoid outputs at input resolution. Input extents must be
/// divisible by 2^levels (and powers of two for the frequency blocks).
FpnOutput fpn_forward(const FpnModel& model, const Tensor& input, FpnTape* tape = nullptr);

/// Parameter gradients for cotangents on the two sigmoid outputs.
FpnModel fpn_backward(const FpnModel& model, const FpnTape& tape, const Tensor& d_flare, const Tensor& d_heat);

inline constexpr double kPriorThreshold = 0.5;
inline constexpr std::size_t kNmsWindow = 3;

/// Mask by thresholding the heatmap, positions by NMS, contamination raised to
/// at least the threshold inside the mask, then per-scale copies.
PriorBundle priors_from_maps(const Tensor& flare, const Tensor& heat, std::size_t levels,
                             double tau = kPriorThreshold);

PriorBundle fpn_infer_priors(const FpnModel& model, const Tensor& input, std::size_t levels,
                             double tau = kPriorThreshold);

}  // namespace radscan
