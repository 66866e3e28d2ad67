#include "radscan/main_net.hpp"

#include <cmath>
#include <string>

namespace radscan {

namespace {

RssgLayer make_group(const MainConfig& c, Rng& rng) {
    RssgLayer g;
    for (RssbLayer& b : g.blocks) {
        b.rssm = RssmWeights::init(c.channels, c.d_state, rng);
        b.proj = ConvLayer::make(c.channels, c.channels, 1, 1, rng, 0.3);
    }
    g.fuse = ConvLayer::make(c.channels, c.channels, 3, 1, rng, 0.1);
    return g;
}

void plant_identity(Tensor& kernel, std::size_t out_offset, std::size_t count) {
    const std::size_t cin = kernel.dim(1), k = kernel.dim(2);
    for (std::size_t c = 0; c < count; ++c) {
        for (std::size_t i = 0; i < cin * k * k; ++i) kernel[((out_offset + c) * cin) * k * k + i] *= 0.1;
        kernel[(((out_offset + c) * cin + c) * k + k / 2) * k + k / 2] = 1.0;
    }
}

Tensor rssb_forward(const RssbLayer& b, const Tensor& x, const PriorLevel& pr, RssbTape& t) {
    t.x = x;
    t.scanned = rssm_forward(x, pr, b.rssm, &t.rssm);
    return x + b.proj.forward(t.scanned);
}

Tensor rssb_backward(const RssbLayer& b, const RssbTape& t, const Tensor& up, RssbLayer& g) {
    const Tensor d_scanned = b.proj.backward(t.scanned, up, g.proj);
    RssmGrads rg = rssm_backward(d_scanned, t.rssm, b.rssm);
    std::vector<Tensor*> dst;
    g.rssm.visit([&](const char*, Tensor& v) { dst.push_back(&v); });
    std::size_t k = 0;
    rg.weights.visit([&](const char*, Tensor& v) { *dst[k++] += v; });
    return up + rg.feature;
}

Tensor rssg_forward(const RssgLayer& g, const Tensor& x, const PriorLevel& pr, RssgTape& t) {
    t.x = x;
    const Tensor b0 = rssb_forward(g.blocks[0], x, pr, t.blocks[0]);
    t.inner = rssb_forward(g.blocks[1], b0, pr, t.blocks[1]);
    return x + g.fuse.forward(t.inner);
}

Tensor rssg_backward(const RssgLayer& g, const RssgTape& t, const Tensor& up, RssgLayer& grad) {
    Tensor d = g.fuse.backward(t.inner, up, grad.fuse);
    d = rssb_backward(g.blocks[1], t.blocks[1], d, grad.blocks[1]);
    d = rssb_backward(g.blocks[0], t.blocks[0], d, grad.blocks[0]);
    return up + d;
}

}  // namespace

MainModel MainModel::init(const MainConfig& config, Rng& rng) {
    if (config.groups % 2 == 0) throw std::invalid_argument("MainModel: group count must be odd");
    if (config.channels < 3) throw std::invalid_argument("MainModel: need at least 3 channels");
    MainModel m;
    m.config = config;
    const std::size_t C = config.channels, L = config.levels();
    m.stem = ConvLayer::make(C, 3, 3, 1, rng, 1.0);
    if (config.identity_init) plant_identity(m.stem.kernel, 0, 3);
    for (std::size_t l = 0; l < L; ++l) {
        m.enc.push_back(make_group(config, rng));
        m.down.push_back(ConvLayer::make(C, C, 3, 2, rng, 1.0));
    }
    m.bottleneck = make_group(config, rng);
    for (std::size_t l = 0; l < L; ++l) {
        m.up.push_back(ConvLayer::make(C, C, 3, 1, rng, 0.05));
        m.dec.push_back(make_group(config, rng));
    }
    m.head = ConvLayer::make(6, C, 3, 1, rng, 0.05);
    if (config.identity_init) plant_identity(m.head.kernel, 0, 3);
    if (config.zero_head) {
        m.head.kernel.fill(0.0);
        m.head.bias.fill(0.0);
    }
    return m;
}

namespace {

void check_level(const PriorLevel& pr, std::size_t h, std::size_t w, std::size_t level) {
    for (const Tensor* t : {&pr.p_flare, &pr.p_mask}) {
        if (!t->empty() && t->shape() != Shape{1, h, w})
            throw ShapeError("main_forward: prior at level " + std::to_string(level) + " is " +
                             shape_to_string(t->shape()) + ", features are " + std::to_string(h) + "x" +
                             std::to_string(w));
    }
}

}  // namespace

Tensor main_forward(const MainModel& model, const Tensor& input, const PriorBundle& bundle, MainTape* tape) {
    if (input.rank() != 3 || input.dim(0) != 3)
        throw ShapeError("main_forward: input must be {3,H,W}, got " + shape_to_string(input.shape()));
    const std::size_t L = model.config.levels();
    const std::size_t H = input.dim(1), W = input.dim(2);
    if (H % (std::size_t{1} << L) != 0 || W % (std::size_t{1} << L) != 0)
        throw ShapeError("main_forward: extents are not divisible by 2^" + std::to_string(L));
    if (bundle.levels() < L)
        throw ShapeError("main_forward: prior bundle has " + std::to_string(bundle.levels()) +
                         " scales, the model needs " + std::to_string(L));
    for (std::size_t l = 0; l <= L; ++l) check_level(bundle.level(l), H >> l, W >> l, l);

    MainTape local;
    MainTape& t = tape ? *tape : local;
    t = MainTape{};
    t.input = input;
    t.enc.resize(L);
    t.dec.resize(L);
    t.dec_in.resize(L);
    t.dec_out.resize(L);

    t.stem_out = model.stem.forward(input);
    Tensor f = t.stem_out;
    for (std::size_t l = 0; l < L; ++l) {
        t.enc_out.push_back(rssg_forward(model.enc[l], f, bundle.level(l), t.enc[l]));
        f = model.down[l].forward(t.enc_out[l]);
    }
    t.enc_out.push_back(f);  // bottleneck input
    f = rssg_forward(model.bottleneck, f, bundle.level(L), t.mid);
    for (std::size_t l = L; l-- > 0;) {
        t.dec_out[l] = f;
        t.dec_in[l] = resize_bilinear(f, H >> l, W >> l);
        const Tensor merged = model.up[l].forward(t.dec_in[l]) + t.enc_out[l];
        f = rssg_forward(model.dec[l], merged, bundle.level(l), t.dec[l]);
    }
    t.head_in = f;
    return model.head.forward(f);
}

MainModel main_backward(const MainModel& model, const MainTape& t, const Tensor& d_pred) {
    const std::size_t L = model.config.levels();
    MainModel g = zeros_like_model(model);
    Tensor d = model.head.backward(t.head_in, d_pred, g.head);
    std::vector<Tensor> d_skip(L);
    for (std::size_t l = 0; l < L; ++l) {
        const Tensor d_merged = rssg_backward(model.dec[l], t.dec[l], d, g.dec[l]);
        d_skip[l] = d_merged;
        const Tensor d_in = model.up[l].backward(t.dec_in[l], d_merged, g.up[l]);
        d = resize_bilinear_backward(t.dec_out[l], d_in);
    }
    d = rssg_backward(model.bottleneck, t.mid, d, g.bottleneck);
    for (std::size_t l = L; l-- > 0;) {
        Tensor d_enc = model.down[l].backward(t.enc_out[l], d, g.down[l]);
        d_enc += d_skip[l];
        d = rssg_backward(model.enc[l], t.enc[l], d_enc, g.enc[l]);
    }
    model.stem.backward(t.input, d, g.stem);
    return g;
}

}  // namespace radscan
