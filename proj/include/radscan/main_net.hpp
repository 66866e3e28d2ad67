#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "radscan/geometry.hpp"
#include "radscan/layers.hpp"
#include "radscan/rssm.hpp"

namespace radscan {

struct MainConfig {
    std::size_t channels = 8;
    std::size_t d_state = 4;
    std::size_t groups = 3;  // odd: (groups-1)/2 encoder groups, a bottleneck, as many decoder groups
    bool zero_head = false;
    bool identity_init = false;  // stem and head start by copying RGB through

    std::size_t levels() const { return (groups - 1) / 2; }
};

/// x + proj(rssm(x)) with a 1×1 projection.
struct RssbLayer {
    RssmWeights rssm;
    ConvLayer proj;

    template <typename F>
    void visit(const std::string& p, F&& f) {
        rssm.visit([&](const char* name, Tensor& t) { f(p + ".rssm." + name, t); });
        proj.visit(p + ".proj", f);
    }
};

/// Two cascaded blocks, a 3×3 fusion conv and a residual connection.
struct RssgLayer {
    std::array<RssbLayer, 2> blocks;
    ConvLayer fuse;

    template <typename F>
    void visit(const std::string& p, F&& f) {
        blocks[0].visit(p + ".b0", f);
        blocks[1].visit(p + ".b1", f);
        fuse.visit(p + ".fuse", f);
    }
};

struct MainModel {
    MainConfig config;
    ConvLayer stem;
    std::vector<RssgLayer> enc;   // per level 0..levels-1
    std::vector<ConvLayer> down;  // enc[l] output -> level l+1
    RssgLayer bottleneck;
    std::vector<ConvLayer> up;    // up[l]: resized level l+1 features -> level l
    std::vector<RssgLayer> dec;   // per level
    ConvLayer head;               // -> 6 channels

    /// The stem copies RGB into the first three channels and the head copies
    /// them back to the clean estimate, so an untrained model starts near the
    /// identity on the clean head.
    static MainModel init(const MainConfig& config, Rng& rng);

    template <typename F>
    void visit(F&& f) {
        stem.visit("stem", f);
        for (std::size_t i = 0; i < enc.size(); ++i) enc[i].visit("enc" + std::to_string(i), f);
        for (std::size_t i = 0; i < down.size(); ++i) down[i].visit("down" + std::to_string(i), f);
        bottleneck.visit("mid", f);
        for (std::size_t i = 0; i < up.size(); ++i) up[i].visit("up" + std::to_string(i), f);
        for (std::size_t i = 0; i < dec.size(); ++i) dec[i].visit("dec" + std::to_string(i), f);
        head.visit("head", f);
    }
};

struct RssbTape {
    Tensor x;
    RssmTape rssm;
    Tensor scanned;
};

struct RssgTape {
    Tensor x;
    std::array<RssbTape, 2> blocks;
    Tensor inner;  // second block output, fusion input
};

struct MainTape {
    Tensor input;
    Tensor stem_out;
    std::vector<RssgTape> enc;
    std::vector<Tensor> enc_out;
    RssgTape mid;
    std::vector<Tensor> dec_in;    // resized features entering up[l]
    std::vector<Tensor> dec_out;   // output of the group above, before resizing
    std::vector<RssgTape> dec;
    Tensor head_in;
};

/// Returns the {6,H,W} prediction. `bundle` must hold at least levels()
/// downsampled copies; absent priors select the baseline path per mechanism.
Tensor main_forward(const MainModel& model, const Tensor& input, const PriorBundle& bundle,
                    MainTape* tape = nullptr);

MainModel main_backward(const MainModel& model, const MainTape& tape, const Tensor& d_pred);

}  // namespace radscan
