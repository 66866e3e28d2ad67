#include "radscan/gradient_suite.hpp"

#include <cmath>

#include "radscan/fpn.hpp"
#include "radscan/losses.hpp"
#include "radscan/main_net.hpp"
#include "radscan/numerics.hpp"
#include "radscan/rng.hpp"
#include "radscan/rssm.hpp"
#include "radscan/scan.hpp"

namespace radscan {

GradCheckReport directional_check(std::string name, const std::function<double()>& objective,
                                  const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                                  std::uint64_t seed, double tolerance, double step) {
    Rng rng(seed);
    std::vector<Tensor> dir;
    double analytic = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        dir.push_back(random_tensor(params[k]->shape(), rng));
        analytic += dot(dir.back(), grads[k]);
    }
    auto shift = [&](double s) {
        for (std::size_t k = 0; k < params.size(); ++k)
            for (std::size_t i = 0; i < params[k]->size(); ++i) (*params[k])[i] += s * dir[k][i];
    };
    const std::vector<Tensor> saved = [&] {
        std::vector<Tensor> v;
        for (Tensor* p : params) v.push_back(*p);
        return v;
    }();
    shift(step);
    const double plus = objective();
    for (std::size_t k = 0; k < params.size(); ++k) *params[k] = saved[k];
    shift(-step);
    const double minus = objective();
    for (std::size_t k = 0; k < params.size(); ++k) *params[k] = saved[k];
    const double err = relative_error(analytic, (plus - minus) / (2.0 * step));
    return {std::move(name), {{"direction", err}}, err, tolerance};
}

namespace {

Tensor scalar(double v) { return Tensor({1}, {v}); }

// Keeps |v - ref| away from zero so L1 kinks stay out of the stencil.
Tensor offset_from(const Tensor& ref, Rng& rng, double gap) {
    Tensor out(ref.shape());
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double mag = gap + 0.2 * rng.uniform();
        out[i] = ref[i] + (rng.uniform() < 0.5 ? -mag : mag);
    }
    return out;
}

template <typename M>
std::vector<Tensor*> params_of(M& m) {
    std::vector<Tensor*> out;
    m.visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
    return out;
}

template <typename M>
std::vector<Tensor> values_of(M m) {
    std::vector<Tensor> out;
    m.visit([&](const std::string&, Tensor& t) { out.push_back(t); });
    return out;
}

}  // namespace

std::vector<GradCheckReport> run_gradient_suite(bool inject_fault) {
    const double tol = kSuiteTolerance;
    std::vector<GradCheckReport> out;
    Rng rng(20240611);

    {  // conv2d, strided
        Tensor x = random_tensor({2, 6, 6}, rng), k = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
        const Padding pad = same_padding(k);
        const Tensor up = random_tensor(conv2d(x, k, b, 2, pad).shape(), rng);
        Conv2dGrads g = conv2d_backward(x, k, 2, pad, up);
        if (inject_fault) g.kernel[0] *= 1.01;
        out.push_back(vjp_check("conv2d", [&] { return conv2d(x, k, b, 2, pad); }, up,
                                {{"input", &x, g.input}, {"kernel", &k, g.kernel}, {"bias", &b, g.bias}}, tol));
    }
    for (Orientation o : {Orientation::horizontal, Orientation::vertical}) {
        Tensor x = random_tensor({2, 5, 6}, rng), k = random_tensor({2, 2, 5}, rng), b = random_tensor({2}, rng);
        const Tensor up = random_tensor({2, 5, 6}, rng);
        const Conv2dGrads g = axial_conv_backward(x, k, o, up);
        out.push_back(vjp_check(o == Orientation::horizontal ? "axial_conv.h" : "axial_conv.v",
                                [&] { return axial_conv(x, k, b, o); }, up,
                                {{"input", &x, g.input}, {"kernel", &k, g.kernel}, {"bias", &b, g.bias}}, tol));
    }
    {
        Tensor x = random_tensor({2, 8, 4}, rng), gains = random_tensor({4}, rng, 0.5, 1.5);
        const Tensor up = random_tensor(x.shape(), rng);
        const FreqEnhanceGrads g = freq_enhance_backward(x, gains, up);
        out.push_back(vjp_check("freq_enhance", [&] { return freq_enhance(x, gains); }, up,
                                {{"input", &x, g.input}, {"gains", &gains, g.gains}}, tol));
    }
    for (Pointwise fn : {Pointwise::sigmoid, Pointwise::exp, Pointwise::softplus}) {
        Tensor x = random_tensor({3, 4}, rng);
        const Tensor up = random_tensor(x.shape(), rng);
        const char* names[] = {"sigmoid", "relu", "exp", "softplus"};
        out.push_back(vjp_check(std::string("pointwise.") + names[static_cast<int>(fn)],
                                [&] { return pointwise(x, fn); }, up,
                                {{"input", &x, pointwise_backward(x, fn, up)}}, tol));
    }
    {
        Tensor x = random_tensor({5, 3}, rng), w = random_tensor({3, 4}, rng), b = random_tensor({4}, rng);
        const Tensor up = random_tensor({5, 4}, rng);
        const AffineGrads g = affine_project_backward(x, w, up);
        out.push_back(vjp_check("affine", [&] { return affine_project(x, w, b); }, up,
                                {{"input", &x, g.input}, {"weight", &w, g.weight}, {"bias", &b, g.bias}}, tol));
    }
    {
        Tensor x = random_tensor({2, 4, 6}, rng);
        const Tensor up = random_tensor({2, 8, 12}, rng);
        out.push_back(vjp_check("resize_bilinear", [&] { return resize_bilinear(x, 8, 12); }, up,
                                {{"input", &x, resize_bilinear_backward(x, up)}}, tol));
        const Tensor up2 = random_tensor({2, 2, 3}, rng);
        out.push_back(vjp_check("avg_pool2", [&] { return avg_pool2(x); }, up2,
                                {{"input", &x, avg_pool2_backward(x, up2)}}, tol));
        out.push_back(vjp_check("max_pool2", [&] { return max_pool2(x); }, up2,
                                {{"input", &x, max_pool2_backward(x, up2)}}, tol));
    }

    {  // scan with and without excitation, and the routed variant
        const std::size_t L = 37, d = 3, n = 4;
        Tensor x = random_tensor({L, d}, rng);
        ScanParams p{random_tensor({n}, rng, -1.0, 0.5), random_tensor({L, n}, rng), random_tensor({L, n}, rng),
                     random_tensor({L}, rng, 0.05, 0.5), random_tensor({d}, rng)};
        Excitation e{random_tensor({L, n}, rng, 0.5, 1.5), random_tensor({L, n}, rng, -0.3, 0.3)};
        const Tensor up = random_tensor({L, d}, rng);
        for (bool modulated : {false, true}) {
            ScanTape tape;
            scan_forward_taped(x, p, modulated ? &e : nullptr, tape, 5);
            const ScanGrads g = scan_backward(up, tape);
            std::vector<CheckedInput> in{{"x", &x, g.x},
                                         {"a_log", &p.a_log, g.a_log},
                                         {"b", &p.b_seq, g.b_seq},
                                         {"c", &p.c_seq, g.c_seq},
                                         {"delta", &p.delta_seq, g.delta_seq},
                                         {"feedthrough", &p.feedthrough, g.feedthrough}};
            if (modulated) {
                in.push_back({"w", &e.w_seq, g.w_seq});
                in.push_back({"prompt", &e.prompt_seq, g.prompt_seq});
            }
            out.push_back(vjp_check(modulated ? "scan.excited" : "scan.plain",
                                    [&] { return modulated ? rse_scan(x, p, e) : selective_scan(x, p); }, up,
                                    std::move(in), tol));
        }
        RouteMask m;
        for (std::size_t i = 0; i < L; ++i) m.m_seq.push_back(i % 3 == 0 ? 1 : 0);
        RouteTape tape;
        hb_route_taped(x, m, p, &e, tape);
        const ScanGrads g = hb_route_backward(up, tape);
        out.push_back(vjp_check("route", [&] { return hb_route(x, m, p, e); }, up,
                                {{"x", &x, g.x},
                                 {"a_log", &p.a_log, g.a_log},
                                 {"b", &p.b_seq, g.b_seq},
                                 {"c", &p.c_seq, g.c_seq},
                                 {"delta", &p.delta_seq, g.delta_seq},
                                 {"w", &e.w_seq, g.w_seq},
                                 {"prompt", &e.prompt_seq, g.prompt_seq},
                                 {"feedthrough", &p.feedthrough, g.feedthrough}},
                                tol));
    }

    {  // full prior-guided module
        RssmWeights w = RssmWeights::init(3, 2, rng);
        Tensor f = random_tensor({3, 4, 4}, rng);
        PriorLevel pr;
        pr.p_position.add({3, 1});
        pr.p_flare = random_tensor({1, 4, 4}, rng, 0.0, 1.0);
        pr.p_mask = Tensor({1, 4, 4});
        pr.p_mask.at(0, 1, 3) = 1.0;
        RssmTape tape;
        const Tensor y = rssm_forward(f, pr, w, &tape);
        const Tensor up = random_tensor(y.shape(), rng);
        RssmGrads g = rssm_backward(up, tape, w);
        std::vector<CheckedInput> in{{"feature", &f, g.feature}};
        std::vector<Tensor*> gp;
        g.weights.visit([&](const char*, Tensor& t) { gp.push_back(&t); });
        std::size_t k = 0;
        w.visit([&](const char* name, Tensor& t) { in.push_back({name, &t, *gp[k++]}); });
        out.push_back(vjp_check("rssm", [&] { return rssm_forward(f, pr, w); }, up, std::move(in), tol));
    }

    {  // losses as scalars
        const Tensor gt = random_tensor({2, 4, 4}, rng, 0.0, 1.0);
        Tensor pred = offset_from(gt, rng, 0.05);
        const Tensor one = scalar(1.0);
        out.push_back(vjp_check("loss.charbonnier", [&] { return scalar(charbonnier(pred, gt).value); }, one,
                                {{"pred", &pred, charbonnier(pred, gt).grad}}, tol));
        out.push_back(vjp_check("loss.l1", [&] { return scalar(l1_loss(pred, gt).value); }, one,
                                {{"pred", &pred, l1_loss(pred, gt).grad}}, tol));
        out.push_back(vjp_check("loss.weak", [&] { return scalar(weak_region_l1(pred, gt).value); }, one,
                                {{"pred", &pred, weak_region_l1(pred, gt).grad}}, tol));

        // Probabilities at least 0.3 from the target saturate the error weight, so
        // the detached weight is locally constant.
        Tensor y({2, 4, 4}), prob({2, 4, 4});
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
            prob[i] = y[i] == 0.0 ? rng.uniform(0.35, 0.95) : rng.uniform(0.05, 0.65);
        }
        out.push_back(vjp_check("loss.bce_err", [&] { return scalar(weighted_bce_err(prob, y).value); }, one,
                                {{"pred", &prob, weighted_bce_err(prob, y).grad}}, tol));

        Tensor heat_gt = random_tensor({1, 6, 6}, rng, 0.0, 0.9);
        heat_gt.at(0, 2, 3) = 1.0;
        Tensor heat = random_tensor({1, 6, 6}, rng, 0.05, 0.95);
        out.push_back(vjp_check("loss.focal", [&] { return scalar(focal_heatmap_loss(heat, heat_gt).value); }, one,
                                {{"pred", &heat, focal_heatmap_loss(heat, heat_gt).grad}}, tol));

        const Tensor input = random_tensor({3, 4, 4}, rng, 0.2, 0.8);
        const Tensor clean_gt = random_tensor({3, 4, 4}, rng, 0.0, 1.0);
        const Tensor flare_gt = random_tensor({3, 4, 4}, rng, 0.0, 0.3);
        Tensor pred6({6, 4, 4});
        for (std::size_t i = 0; i < 48; ++i) {
            pred6[i] = clean_gt[i] + (rng.uniform() < 0.5 ? -0.07 : 0.07);
            pred6[48 + i] = flare_gt[i] + (rng.uniform() < 0.5 ? -0.06 : 0.06);
            // keep the clamped sum away from its breakpoints and from the input
            const double s = pred6[i] + pred6[48 + i];
            if (std::abs(s - input[i]) < 1e-3 || std::abs(s) < 1e-3 || std::abs(s - 1.0) < 1e-3) pred6[48 + i] += 0.01;
        }
        out.push_back(vjp_check("loss.main", [&] { return scalar(main_loss(pred6, clean_gt, flare_gt, input).report.total); },
                                one, {{"pred", &pred6, main_loss(pred6, clean_gt, flare_gt, input).d_pred}}, tol));
    }

    {  // prior network, end to end along a random parameter direction
        FpnConfig c;
        c.channels = 4;
        c.levels = 2;
        FpnModel model = FpnModel::init(c, rng);
        Tensor input = random_tensor({3, 8, 8}, rng, 0.0, 1.0);
        const Tensor uf = random_tensor({1, 8, 8}, rng), uh = random_tensor({1, 8, 8}, rng);
        FpnTape tape;
        fpn_forward(model, input, &tape);
        const FpnModel g = fpn_backward(model, tape, uf, uh);
        out.push_back(directional_check(
            "fpn", [&] { const FpnOutput o = fpn_forward(model, input); return dot(uf, o.flare) + dot(uh, o.heat); },
            params_of(model), values_of(g), 7, tol));
    }
    {  // main network
        MainConfig c;
        c.channels = 4;
        c.d_state = 2;
        c.groups = 3;
        MainModel model = MainModel::init(c, rng);
        // Nonzero head so every layer influences the output.
        for (double& v : model.head.kernel.values()) v += 0.05 * (rng.uniform() - 0.5);
        const Tensor input = random_tensor({3, 16, 16}, rng, 0.0, 1.0);
        PriorBundle b;
        b.full.p_flare = random_tensor({1, 16, 16}, rng, 0.0, 1.0);
        b.full.p_mask = Tensor({1, 16, 16});
        b.full.p_mask.at(0, 5, 9) = 1.0;
        b.full.p_position.add({9, 5});
        const PriorBundle bundle = downsample_priors(b, c.levels());
        const Tensor u = random_tensor({6, 16, 16}, rng);
        MainTape tape;
        main_forward(model, input, bundle, &tape);
        const MainModel g = main_backward(model, tape, u);
        out.push_back(directional_check("main", [&] { return dot(u, main_forward(model, input, bundle)); },
                                        params_of(model), values_of(g), 8, tol));
    }
    return out;
}

}  // namespace radscan
