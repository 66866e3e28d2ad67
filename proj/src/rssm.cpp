#include "radscan/rssm.hpp"

#include <cmath>
#include <optional>
#include <string>

#include "radscan/numerics.hpp"

namespace radscan {

RssmWeights RssmWeights::init(std::size_t channels, std::size_t state, Rng& rng) {
    const double proj = 1.0 / std::sqrt(static_cast<double>(channels));
    RssmWeights w;
    w.gate_w = random_tensor({channels, channels}, rng, -0.1, 0.1);
    w.gate_b = Tensor({channels}, 2.0);  // gate starts mostly open
    w.a_log = Tensor({state});
    for (std::size_t n = 0; n < state; ++n) w.a_log[n] = std::log(static_cast<double>(n + 1));
    w.proj_b_w = random_tensor({channels, state}, rng, -proj, proj);
    w.proj_b_b = Tensor({state});
    w.proj_c_w = random_tensor({channels, state}, rng, -proj, proj);
    w.proj_c_b = Tensor({state});
    w.proj_dt_w = random_tensor({channels, 1}, rng, -0.1, 0.1);
    w.proj_dt_b = Tensor({1}, std::log(std::expm1(0.1)));
    w.exc_w_w = random_tensor({1, state}, rng, -0.5, 0.5);
    w.exc_w_b = Tensor({state}, 2.0);
    w.exc_p_w = random_tensor({1, state}, rng, -0.1, 0.1);
    w.exc_p_b = Tensor({state});
    w.feedthrough = Tensor({channels}, 1.0);
    return w;
}

RssmWeights RssmWeights::zeros_like(const RssmWeights& w) {
    RssmWeights z = w;
    z.visit([](const char*, Tensor& t) { t.fill(0.0); });
    return z;
}

RadialPlan plan_for(const SourceSet& positions, std::size_t h, std::size_t w) {
    if (positions.empty()) return RadialPlan::raster(h, w);
    return build_radial_plan(compute_distance_map(positions, h, w));
}

namespace {

void check_prior(const Tensor& prior, std::size_t h, std::size_t w, const char* what) {
    if (prior.empty()) return;
    if (prior.shape() != Shape{1, h, w}) {
        throw ShapeError(std::string("rssm_forward: ") + what + " prior " +
                         shape_to_string(prior.shape()) + " does not match feature resolution " +
                         std::to_string(h) + "x" + std::to_string(w));
    }
}

Tensor column(const Tensor& t) { return t.reshaped({t.size(), 1}); }

}  // namespace

Tensor rssm_forward(const Tensor& feature, const PriorLevel& priors, const RssmWeights& weights,
                    RssmTape* tape) {
    if (feature.rank() != 3) throw ShapeError("rssm_forward: feature must be (C,H,W)");
    const std::size_t C = feature.dim(0), H = feature.dim(1), W = feature.dim(2);
    const std::size_t HW = H * W;
    if (C != weights.channels()) throw ShapeError("rssm_forward: channel count does not match weights");
    check_prior(priors.p_flare, H, W, "contamination");
    check_prior(priors.p_mask, H, W, "mask");

    // Channel gate.
    Tensor mean({1, C});
    for (std::size_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (std::size_t p = 0; p < HW; ++p) s += feature[c * HW + p];
        mean[c] = s / static_cast<double>(HW);
    }
    const Tensor gate_pre = affine_project(mean, weights.gate_w, weights.gate_b);
    const Tensor gate = pointwise(gate_pre, Pointwise::sigmoid);
    Tensor gated(feature.shape());
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t p = 0; p < HW; ++p) gated[c * HW + p] = feature[c * HW + p] * gate[c];
    }

    // Shared radial order for features and priors.
    RadialPlan plan = plan_for(priors.p_position, H, W);
    const Tensor seq = radial_unfold(gated, plan);
    const std::size_t L = seq.dim(0);

    ScanParams params;
    params.a_log = weights.a_log;
    params.b_seq = affine_project(seq, weights.proj_b_w, weights.proj_b_b);
    params.c_seq = affine_project(seq, weights.proj_c_w, weights.proj_c_b);
    const Tensor dt_pre = affine_project(seq, weights.proj_dt_w, weights.proj_dt_b);
    params.delta_seq = pointwise(dt_pre, Pointwise::softplus).reshaped({L});
    params.feedthrough = weights.feedthrough;

    Tensor flare_seq, w_pre;
    std::optional<Excitation> exc;
    if (priors.has_flare()) {
        flare_seq = column(radial_unfold(priors.p_flare, plan));
        w_pre = affine_project(flare_seq, weights.exc_w_w, weights.exc_w_b);
        exc = Excitation{pointwise(w_pre, Pointwise::sigmoid),
                         affine_project(flare_seq, weights.exc_p_w, weights.exc_p_b)};
    }
    RouteMask mask;
    if (priors.has_mask()) {
        mask = RouteMask::from_sequence(column(radial_unfold(priors.p_mask, plan)));
    } else {
        mask.m_seq.assign(L, 0);
    }

    RouteTape local_route;
    RouteTape& route = tape ? tape->route : local_route;
    const Tensor y = hb_route_taped(seq, mask, params, exc ? &*exc : nullptr, route);
    Tensor out = radial_fold(y, plan);

    if (tape) {
        tape->feature = feature;
        tape->mean = mean;
        tape->gate = gate;
        tape->gate_pre = gate_pre;
        tape->plan = std::move(plan);
        tape->seq = seq;
        tape->dt_pre = dt_pre;
        tape->flare_seq = flare_seq;
        tape->w_pre = w_pre;
    }
    return out;
}

RssmGrads rssm_backward(const Tensor& upstream, const RssmTape& tape, const RssmWeights& weights) {
    const Tensor& feature = tape.feature;
    require_same_shape(upstream, feature, "rssm_backward");
    const std::size_t C = feature.dim(0), H = feature.dim(1), W = feature.dim(2);
    const std::size_t HW = H * W;
    const std::size_t L = HW;

    RssmGrads g{Tensor(feature.shape()), RssmWeights::zeros_like(weights)};
    const ScanGrads sg = hb_route_backward(radial_unfold(upstream, tape.plan), tape.route);
    g.weights.a_log = sg.a_log;
    g.weights.feedthrough = sg.feedthrough;

    Tensor dseq = sg.x;
    const AffineGrads gb = affine_project_backward(tape.seq, weights.proj_b_w, sg.b_seq);
    const AffineGrads gc = affine_project_backward(tape.seq, weights.proj_c_w, sg.c_seq);
    const Tensor d_dt_pre =
        pointwise_backward(tape.dt_pre, Pointwise::softplus, sg.delta_seq.reshaped({L, 1}));
    const AffineGrads gdt = affine_project_backward(tape.seq, weights.proj_dt_w, d_dt_pre);
    dseq += gb.input;
    dseq += gc.input;
    dseq += gdt.input;
    g.weights.proj_b_w = gb.weight;
    g.weights.proj_b_b = gb.bias;
    g.weights.proj_c_w = gc.weight;
    g.weights.proj_c_b = gc.bias;
    g.weights.proj_dt_w = gdt.weight;
    g.weights.proj_dt_b = gdt.bias;

    if (!tape.flare_seq.empty() && !sg.w_seq.empty()) {
        const Tensor d_w_pre = pointwise_backward(tape.w_pre, Pointwise::sigmoid, sg.w_seq);
        const AffineGrads gw = affine_project_backward(tape.flare_seq, weights.exc_w_w, d_w_pre);
        const AffineGrads gp = affine_project_backward(tape.flare_seq, weights.exc_p_w, sg.prompt_seq);
        g.weights.exc_w_w = gw.weight;
        g.weights.exc_w_b = gw.bias;
        g.weights.exc_p_w = gp.weight;
        g.weights.exc_p_b = gp.bias;
    }

    // Through the gate: gated = feature * sigmoid(mean · Wg + bg).
    const Tensor d_gated = radial_fold(dseq, tape.plan);
    Tensor d_gate({1, C});
    for (std::size_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (std::size_t p = 0; p < HW; ++p) {
            s += d_gated[c * HW + p] * feature[c * HW + p];
            g.feature[c * HW + p] = d_gated[c * HW + p] * tape.gate[c];
        }
        d_gate[c] = s;
    }
    const Tensor d_gate_pre = pointwise_backward(tape.gate_pre, Pointwise::sigmoid, d_gate);
    const AffineGrads gg = affine_project_backward(tape.mean, weights.gate_w, d_gate_pre);
    g.weights.gate_w = gg.weight;
    g.weights.gate_b = gg.bias;
    for (std::size_t c = 0; c < C; ++c) {
        const double share = gg.input[c] / static_cast<double>(HW);
        for (std::size_t p = 0; p < HW; ++p) g.feature[c * HW + p] += share;
    }
    return g;
}

}  // namespace radscan
