#include "radscan/fpn.hpp"

#include <cmath>
#include <string>

namespace radscan {

std::size_t FpnModel::channels_at(std::size_t level) const {
    return level == 0 ? config.channels : 2 * config.channels;
}

FpnModel FpnModel::init(const FpnConfig& config, Rng& rng) {
    if (config.channels == 0) throw std::invalid_argument("FpnModel: channels must be positive");
    if (config.axial_length % 2 == 0) throw std::invalid_argument("FpnModel: axial length must be odd");
    FpnModel m;
    m.config = config;
    const double he = std::sqrt(2.0);
    m.stem = ConvLayer::make(m.channels_at(0), 3, 3, 1, rng, he);
    for (std::size_t l = 0; l <= config.levels; ++l) {
        const std::size_t c = m.channels_at(l);
        if (l > 0) m.down.push_back(ConvLayer::make(c, m.channels_at(l - 1), 3, 2, rng, he));
        RflBlock b;
        b.horiz = AxialLayer::make(c, c, config.axial_length, Orientation::horizontal, rng, 0.5);
        b.vert = AxialLayer::make(c, c, config.axial_length, Orientation::vertical, rng, 0.5);
        b.freq = FreqLayer::make(config.bands);
        b.mix = ConvLayer::make(c, c, 1, 1, rng, 0.5);
        m.blocks.push_back(std::move(b));
    }
    for (std::size_t l = 0; l < config.levels; ++l)
        m.up.push_back(ConvLayer::make(m.channels_at(l), m.channels_at(l + 1), 3, 1, rng, he));
    m.flare_head = ConvLayer::make(1, m.channels_at(0), 3, 1, rng, 1.0);
    m.heat_head = ConvLayer::make(1, m.channels_at(0), 3, 1, rng, 1.0);
    m.heat_head.bias.fill(config.heat_bias);
    if (config.zero_heads) {
        for (ConvLayer* h : {&m.flare_head, &m.heat_head}) {
            h->kernel.fill(0.0);
            h->bias.fill(0.0);
        }
    }
    return m;
}

namespace {

Tensor rfl_forward(const RflBlock& b, const Tensor& x, RflTape& tape) {
    tape.x = x;
    tape.pre = b.horiz.forward(x) + b.vert.forward(x) + b.freq.forward(x);
    return x + b.mix.forward(relu(tape.pre));
}

Tensor rfl_backward(const RflBlock& b, const RflTape& tape, const Tensor& upstream, RflBlock& g) {
    const Tensor d_pre = relu_backward(tape.pre, b.mix.backward(relu(tape.pre), upstream, g.mix));
    Tensor dx = upstream;
    dx += b.horiz.backward(tape.x, d_pre, g.horiz);
    dx += b.vert.backward(tape.x, d_pre, g.vert);
    dx += b.freq.backward(tape.x, d_pre, g.freq);
    return dx;
}

}  // namespace

FpnOutput fpn_forward(const FpnModel& model, const Tensor& input, FpnTape* tape) {
    if (input.rank() != 3 || input.dim(0) != 3)
        throw ShapeError("fpn_forward: input must be {3,H,W}, got " + shape_to_string(input.shape()));
    const std::size_t L = model.config.levels;
    const std::size_t H = input.dim(1), W = input.dim(2);
    if (H % (std::size_t{1} << L) != 0 || W % (std::size_t{1} << L) != 0)
        throw ShapeError("fpn_forward: extents " + std::to_string(H) + "x" + std::to_string(W) +
                         " are not divisible by 2^" + std::to_string(L));

    FpnTape local;
    FpnTape& t = tape ? *tape : local;
    t = FpnTape{};
    t.input = input;
    t.rfl.resize(L + 1);
    for (std::size_t l = 0; l <= L; ++l) {
        Tensor pre = l == 0 ? model.stem.forward(input) : model.down[l - 1].forward(t.enc[l - 1]);
        Tensor act = relu(pre);
        t.enc.push_back(rfl_forward(model.blocks[l], act, t.rfl[l]));
        t.stem_pre.push_back(std::move(pre));
        t.act.push_back(std::move(act));
    }
    t.dec.assign(L + 1, Tensor());
    t.resized.assign(L, Tensor());
    t.up_pre.assign(L, Tensor());
    t.dec[L] = t.enc[L];
    for (std::size_t l = L; l-- > 0;) {
        t.resized[l] = resize_bilinear(t.dec[l + 1], t.enc[l].dim(1), t.enc[l].dim(2));
        t.up_pre[l] = model.up[l].forward(t.resized[l]);
        t.dec[l] = relu(t.up_pre[l]) + t.enc[l];
    }
    t.flare_pre = model.flare_head.forward(t.dec[0]);
    t.heat_pre = model.heat_head.forward(t.dec[0]);
    return {pointwise(t.flare_pre, Pointwise::sigmoid), pointwise(t.heat_pre, Pointwise::sigmoid)};
}

FpnModel fpn_backward(const FpnModel& model, const FpnTape& t, const Tensor& d_flare, const Tensor& d_heat) {
    const std::size_t L = model.config.levels;
    FpnModel g = zeros_like_model(model);
    std::vector<Tensor> d_enc(L + 1), d_dec(L + 1);
    d_dec[0] = model.flare_head.backward(t.dec[0], pointwise_backward(t.flare_pre, Pointwise::sigmoid, d_flare),
                                         g.flare_head);
    d_dec[0] += model.heat_head.backward(t.dec[0], pointwise_backward(t.heat_pre, Pointwise::sigmoid, d_heat),
                                         g.heat_head);
    for (std::size_t l = 0; l < L; ++l) {
        d_enc[l] = d_dec[l];
        const Tensor d_up = relu_backward(t.up_pre[l], d_dec[l]);
        const Tensor d_resized = model.up[l].backward(t.resized[l], d_up, g.up[l]);
        d_dec[l + 1] = resize_bilinear_backward(t.dec[l + 1], d_resized);
    }
    d_enc[L] = d_dec[L];
    for (std::size_t l = L + 1; l-- > 0;) {
        const Tensor d_act = rfl_backward(model.blocks[l], t.rfl[l], d_enc[l], g.blocks[l]);
        const Tensor d_pre = relu_backward(t.stem_pre[l], d_act);
        if (l == 0) {
            model.stem.backward(t.input, d_pre, g.stem);
        } else {
            d_enc[l - 1] += model.down[l - 1].backward(t.enc[l - 1], d_pre, g.down[l - 1]);
        }
    }
    return g;
}

PriorBundle priors_from_maps(const Tensor& flare, const Tensor& heat, std::size_t levels, double tau) {
    require_same_shape(flare, heat, "priors_from_maps");
    PriorBundle b;
    b.full.p_mask = threshold_mask(heat, tau);
    b.full.p_position = nms_peaks(heat, tau, kNmsWindow);
    b.full.p_flare = flare;
    for (std::size_t i = 0; i < flare.size(); ++i)
        if (b.full.p_mask[i] != 0.0) b.full.p_flare[i] = std::max(flare[i], tau);
    return downsample_priors(b, levels);
}

PriorBundle fpn_infer_priors(const FpnModel& model, const Tensor& input, std::size_t levels, double tau) {
    const FpnOutput out = fpn_forward(model, input);
    return priors_from_maps(out.flare, out.heat, levels, tau);
}

}  // namespace radscan
