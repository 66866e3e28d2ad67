#include <doctest.h>

#include <cmath>

#include "radscan/gradcheck.hpp"
#include "radscan/kernels.hpp"
#include "radscan/numerics.hpp"
#include "radscan/rssm.hpp"
#include "radscan/scan.hpp"
#include "test_util.hpp"

using namespace radscan;
using namespace radscan::testing;

namespace {

ScanParams random_params(std::size_t L, std::size_t d, std::size_t N, Rng& rng) {
    ScanParams p;
    p.a_log = random_tensor({N}, rng, -1.0, 1.0);
    p.b_seq = random_tensor({L, N}, rng);
    p.c_seq = random_tensor({L, N}, rng);
    p.delta_seq = random_tensor({L}, rng, 0.05, 0.5);
    p.feedthrough = random_tensor({d}, rng);
    return p;
}

Excitation random_excitation(std::size_t L, std::size_t N, Rng& rng) {
    return {random_tensor({L, N}, rng, 0.05, 0.95), random_tensor({L, N}, rng, -0.5, 0.5)};
}

// Scalar problem with Ā = 0.5 (A = -1, Δ = ln 2) and B̄ = 1 (B = 1/ln 2).
ScanParams half_decay_params() {
    ScanParams p;
    p.a_log = Tensor({1}, 0.0);
    p.delta_seq = Tensor({2}, std::log(2.0));
    p.b_seq = Tensor({2, 1}, 1.0 / std::log(2.0));
    p.c_seq = Tensor({2, 1}, 1.0);
    p.feedthrough = Tensor({1}, 0.0);
    return p;
}

std::vector<double> abar_of(const ScanParams& p) { return discretize_zoh(p.a_log, p.delta_seq, p.b_seq).abar.values(); }
std::vector<double> bbar_of(const ScanParams& p) { return discretize_zoh(p.a_log, p.delta_seq, p.b_seq).bbar.values(); }

}  // namespace

TEST_SUITE("scan") {

TEST_CASE("discretization examples") {
    const Discretized z = discretize_zoh(Tensor({1}, 0.0), Tensor({1}, std::log(2.0)), Tensor({1, 1}, 1.0));
    CHECK(z.abar[0] == doctest::Approx(0.5).epsilon(1e-15));
    const Discretized q = discretize_zoh(Tensor({1}, 0.0), Tensor({1}, 0.25), Tensor({1, 1}, 1.0));
    CHECK(q.bbar[0] == 0.25);
    const Discretized tiny = discretize_zoh(Tensor({1}, 0.0), Tensor({1}, 1e-12), Tensor({1, 1}, 1.0));
    CHECK(tiny.abar[0] == doctest::Approx(1.0));
    CHECK(tiny.bbar[0] < 1e-11);
    CHECK_THROWS(discretize_zoh(Tensor({1}), Tensor({1}, 0.0), Tensor({1, 1})));
    CHECK_THROWS(discretize_zoh(Tensor({1}), Tensor({1}, -0.1), Tensor({1, 1})));
}

TEST_CASE("stability: decay stays inside the unit interval") {
    Rng rng(201);
    for (int t = 0; t < 20; ++t) {
        const ScanParams p = random_params(64, 1, 8, rng);
        for (double a : abar_of(p)) {
            CHECK(a > 0.0);
            CHECK(a < 1.0);
        }
    }
}

TEST_CASE("selective_scan hand recurrence") {
    const ScanParams p = half_decay_params();
    const Tensor y = selective_scan(Tensor({2, 1}, 1.0), p);
    CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(y[1] == doctest::Approx(1.5).epsilon(1e-14));

    Rng rng(202);
    ScanParams r = random_params(10, 3, 4, rng);
    CHECK(max_abs(selective_scan(Tensor({10, 3}), r)) == 0.0);
    r.c_seq.fill(0.0);
    r.feedthrough.fill(1.0);
    const Tensor x = random_tensor({10, 3}, rng);
    CHECK(selective_scan(x, r) == x);
    CHECK_THROWS_AS(selective_scan(Tensor({9, 3}), r), ShapeError);
}

TEST_CASE("rse_scan hand recurrences") {
    const ScanParams p = half_decay_params();
    const Tensor x({2, 1}, 1.0);
    const Tensor y = rse_scan(x, p, Excitation{Tensor({2, 1}, 0.5), Tensor({2, 1}, 0.0)});
    CHECK(y[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(y[1] == doctest::Approx(0.375).epsilon(1e-14));
    const Tensor y2 = rse_scan(x, p, Excitation{Tensor({2, 1}, 0.5), Tensor({2, 1}, 0.5)});
    CHECK(y2[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(y2[1] == doctest::Approx(0.75).epsilon(1e-14));
    CHECK_THROWS_AS(rse_scan(x, p, Excitation::unit(3, 1)), ShapeError);
}

TEST_CASE("rse_scan matches the per-token oracle") {
    Rng rng(203);
    for (int t = 0; t < 10; ++t) {
        const std::size_t L = 1 + rng.below(40), d = 1 + rng.below(4), N = 1 + rng.below(6);
        const ScanParams p = random_params(L, d, N, rng);
        const Excitation e = random_excitation(L, N, rng);
        const Tensor x = random_tensor({L, d}, rng);
        const Tensor want = rse_oracle(x, abar_of(p), bbar_of(p), p.c_seq, e.w_seq, e.prompt_seq, p.feedthrough);
        CHECK(max_abs_diff(rse_scan(x, p, e), want) < 1e-12);
    }
}

TEST_CASE("reduction identity is bit exact") {
    Rng rng(204);
    for (int t = 0; t < 20; ++t) {
        const std::size_t L = 1 + rng.below(300), d = 1 + rng.below(5), N = 1 + rng.below(8);
        const ScanParams p = random_params(L, d, N, rng);
        const Tensor x = random_tensor({L, d}, rng);
        CHECK(rse_scan(x, p, Excitation::unit(L, N)) == selective_scan(x, p));
    }
}

TEST_CASE("flare_excitation examples") {
    const Tensor prior({3}, {0.0, 0.5, 1.0});
    const AffineParams zero{Tensor({1, 2}), Tensor({2})};
    const Excitation e = flare_excitation(prior, zero, zero);
    for (double v : e.w_seq.data()) CHECK(v == 0.5);
    for (double v : e.prompt_seq.data()) CHECK(v == 0.0);

    const AffineParams two{Tensor({1, 1}, 2.0), Tensor({1})};
    const AffineParams none{Tensor({1, 1}), Tensor({1})};
    const Excitation f = flare_excitation(Tensor({2, 1}, {1.0, 0.0}), two, none);
    CHECK(f.w_seq[0] == doctest::Approx(0.880797).epsilon(1e-6));
    CHECK(f.w_seq[1] == 0.5);

    Rng rng(205);
    const Excitation g = flare_excitation(random_tensor({50}, rng, 0.0, 1.0),
                                          {random_tensor({1, 4}, rng, -3, 3), random_tensor({4}, rng)},
                                          {random_tensor({1, 4}, rng), random_tensor({4}, rng)});
    for (double v : g.w_seq.data()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("hb_route examples") {
    Rng rng(206);
    const std::size_t L = 12, d = 3, N = 4;
    const ScanParams p = random_params(L, d, N, rng);
    const Excitation e = random_excitation(L, N, rng);
    const Tensor x = random_tensor({L, d}, rng);

    RouteMask all{std::vector<std::uint8_t>(L, 1)};
    CHECK(hb_route(x, all, p, e) == x);
    RouteMask none{std::vector<std::uint8_t>(L, 0)};
    CHECK(hb_route(x, none, p, e) == rse_scan(x, p, e));

    // Compact-scan-scatter oracle on L = 3, mask [0,1,0].
    const ScanParams p3 = random_params(3, 2, N, rng);
    const Excitation e3 = random_excitation(3, N, rng);
    const Tensor x3 = random_tensor({3, 2}, rng);
    const Tensor y3 = hb_route(x3, RouteMask{{0, 1, 0}}, p3, e3);
    auto keep = [](const Tensor& t, std::size_t cols) {
        Tensor out({2, cols});
        for (std::size_t c = 0; c < cols; ++c) {
            out[c] = t[c];
            out[cols + c] = t[2 * cols + c];
        }
        return out;
    };
    ScanParams pc = p3;
    pc.b_seq = keep(p3.b_seq, N);
    pc.c_seq = keep(p3.c_seq, N);
    pc.delta_seq = Tensor({2}, {p3.delta_seq[0], p3.delta_seq[2]});
    const Tensor yc = rse_scan(keep(x3, 2), pc, Excitation{keep(e3.w_seq, N), keep(e3.prompt_seq, N)});
    CHECK(y3[2] == x3[2]);
    CHECK(y3[3] == x3[3]);
    CHECK(y3[0] == yc[0]);
    CHECK(y3[1] == yc[1]);
    CHECK(y3[4] == yc[2]);
    CHECK(y3[5] == yc[3]);
}

TEST_CASE("bypass integrity on random masks") {
    Rng rng(207);
    for (int t = 0; t < 30; ++t) {
        const std::size_t L = 1 + rng.below(64), d = 1 + rng.below(3), N = 1 + rng.below(4);
        const ScanParams p = random_params(L, d, N, rng);
        const Excitation e = random_excitation(L, N, rng);
        const Tensor x = random_tensor({L, d}, rng);
        RouteMask m;
        const double density = rng.uniform();
        for (std::size_t i = 0; i < L; ++i) m.m_seq.push_back(rng.uniform() < density ? 1 : 0);
        const Tensor y = hb_route(x, m, p, e);
        for (std::size_t i = 0; i < L; ++i)
            if (m.m_seq[i])
                for (std::size_t c = 0; c < d; ++c) CHECK(y[i * d + c] == x[i * d + c]);
    }
}

TEST_CASE("chunked scan equivalence") {
    Rng rng(208);
    const std::size_t L = 1024, d = 2, N = 4;
    const ScanParams p = random_params(L, d, N, rng);
    const Excitation e = random_excitation(L, N, rng);
    const Tensor x = random_tensor({L, d}, rng);
    const Tensor seq = rse_scan(x, p, e);
    CHECK(chunked_scan(x, p, e, L) == seq);
    CHECK(max_abs_diff(chunked_scan(x, p, e, 1), seq) <= 1e-12 * max_abs(seq));
    for (std::size_t chunk : {2u, 16u, 64u, 100u, 5000u}) {
        const double dev = max_abs_diff(chunked_scan(x, p, e, chunk), seq) / max_abs(seq);
        CHECK_MESSAGE(dev < 1e-10, "chunk " << chunk << " deviation " << dev);
    }
    CHECK_THROWS(chunked_scan(x, p, e, 0));
}

TEST_CASE("parallel scan kernel equals serial reference") {
    Rng rng(209);
    const std::size_t L = 200, d = 6, N = 5;
    const ScanParams p = random_params(L, d, N, rng);
    const Tensor x = random_tensor({L, d}, rng);
    const Discretized z = discretize_zoh(p.a_log, p.delta_seq, p.b_seq);
    const kernels::ScanView v{L, d, N, x.data().data(), z.abar.data().data(), z.bbar.data().data(),
                              p.c_seq.data().data(), p.feedthrough.data().data()};
    std::vector<double> y1(L * d), y2(L * d), c1(13 * d * N), c2(13 * d * N);
    kernels::scan_forward_reference(v, y1.data(), c1.data(), 16);
    kernels::scan_forward(v, y2.data(), c2.data(), 16);
    CHECK(y1 == y2);
    CHECK(c1 == c2);
}

TEST_CASE("scan backward matches finite differences") {
    Rng rng(210);
    for (bool modulated : {true, false}) {
        for (std::size_t stride : {1u, 5u, 16u}) {
            const std::size_t L = 32, d = 2, N = 4;
            ScanParams p = random_params(L, d, N, rng);
            Excitation e = random_excitation(L, N, rng);
            Tensor x = random_tensor({L, d}, rng);
            const Tensor up = random_tensor({L, d}, rng);
            ScanTape tape;
            scan_forward_taped(x, p, modulated ? &e : nullptr, tape, stride);
            const ScanGrads g = scan_backward(up, tape);
            std::vector<CheckedInput> inputs{{"x", &x, g.x},
                                             {"a_log", &p.a_log, g.a_log},
                                             {"b", &p.b_seq, g.b_seq},
                                             {"c", &p.c_seq, g.c_seq},
                                             {"delta", &p.delta_seq, g.delta_seq},
                                             {"feedthrough", &p.feedthrough, g.feedthrough}};
            if (modulated) {
                inputs.push_back({"w", &e.w_seq, g.w_seq});
                inputs.push_back({"prompt", &e.prompt_seq, g.prompt_seq});
            }
            const auto r = vjp_check(
                "scan", [&] { return modulated ? rse_scan(x, p, e) : selective_scan(x, p); }, up, inputs, 1e-5);
            CHECK_MESSAGE(r.passed(), "max rel err " << r.max_rel_error);

            Tensor fsum({d});
            for (std::size_t i = 0; i < L; ++i)
                for (std::size_t c = 0; c < d; ++c) fsum[c] += up[i * d + c] * x[i * d + c];
            CHECK(max_abs_diff(fsum, g.feedthrough) < 1e-12);
        }
    }
}

TEST_CASE("scan backward edge cases") {
    Rng rng(211);
    const ScanParams p = random_params(20, 2, 3, rng);
    Excitation e = random_excitation(20, 3, rng);
    const Tensor x = random_tensor({20, 2}, rng);
    ScanTape tape;
    scan_forward_taped(x, p, &e, tape);
    const ScanGrads z = scan_backward(Tensor({20, 2}), tape);
    for (const Tensor* t : {&z.x, &z.a_log, &z.b_seq, &z.c_seq, &z.delta_seq, &z.w_seq, &z.prompt_seq, &z.feedthrough})
        CHECK(max_abs(*t) == 0.0);

    tape.checkpoints.pop_back();
    CHECK_THROWS_WITH(scan_backward(Tensor({20, 2}), tape), doctest::Contains("checkpoint"));
}

TEST_CASE("routed backward matches finite differences") {
    Rng rng(212);
    const std::size_t L = 24, d = 2, N = 3;
    ScanParams p = random_params(L, d, N, rng);
    Excitation e = random_excitation(L, N, rng);
    Tensor x = random_tensor({L, d}, rng);
    RouteMask m;
    for (std::size_t i = 0; i < L; ++i) m.m_seq.push_back(i % 5 == 2 ? 1 : 0);
    const Tensor up = random_tensor({L, d}, rng);
    RouteTape tape;
    hb_route_taped(x, m, p, &e, tape, 4);
    const ScanGrads g = hb_route_backward(up, tape);
    const auto r = vjp_check("route", [&] { return hb_route(x, m, p, e); }, up,
                             {{"x", &x, g.x},
                              {"a_log", &p.a_log, g.a_log},
                              {"b", &p.b_seq, g.b_seq},
                              {"c", &p.c_seq, g.c_seq},
                              {"delta", &p.delta_seq, g.delta_seq},
                              {"w", &e.w_seq, g.w_seq},
                              {"prompt", &e.prompt_seq, g.prompt_seq},
                              {"feedthrough", &p.feedthrough, g.feedthrough}},
                             1e-5);
    CHECK_MESSAGE(r.passed(), "max rel err " << r.max_rel_error);

    RouteTape all_tape;
    hb_route_taped(x, RouteMask{std::vector<std::uint8_t>(L, 1)}, p, &e, all_tape);
    const ScanGrads ga = hb_route_backward(up, all_tape);
    CHECK(ga.x == up);
    CHECK(max_abs(ga.b_seq) == 0.0);
}

TEST_CASE("permutation equivariance of per-token maps") {
    // A pure feedthrough scan is per-token, so unfold/scan/fold equals scanning in raster order.
    Rng rng(213);
    SourceSet s;
    s.add({2, 1});
    const RadialPlan plan = build_radial_plan(compute_distance_map(s, 4, 5));
    const Tensor field = random_tensor({3, 4, 5}, rng);
    ScanParams p = random_params(20, 3, 2, rng);
    p.c_seq.fill(0.0);
    const Tensor a = radial_fold(selective_scan(radial_unfold(field, plan), p), plan);
    const Tensor b = radial_fold(selective_scan(radial_unfold(field, RadialPlan::raster(4, 5)), p),
                                 RadialPlan::raster(4, 5));
    CHECK(a == b);
}

// ---------------------------------------------------------------------------

namespace {

/// Channel gate, radial plan, projections, compaction and scan, recomposed
/// from the oracles and plain loops.
Tensor rssm_oracle(const Tensor& f, const PriorLevel& pr, const RssmWeights& w) {
    const std::size_t C = f.dim(0), H = f.dim(1), W = f.dim(2), HW = H * W, N = w.state();
    std::vector<double> gate(C);
    for (std::size_t c = 0; c < C; ++c) {
        double z = w.gate_b[c];
        for (std::size_t k = 0; k < C; ++k) {
            double m = 0.0;
            for (std::size_t q = 0; q < HW; ++q) m += f[k * HW + q];
            z += m / double(HW) * w.gate_w[k * C + c];
        }
        gate[c] = 1.0 / (1.0 + std::exp(-z));
    }
    std::vector<std::uint32_t> order(HW);
    if (pr.p_position.empty()) {
        for (std::size_t i = 0; i < HW; ++i) order[i] = std::uint32_t(i);
    } else {
        order = plan_oracle(distance_oracle(pr.p_position, H, W));
    }
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < HW; ++i)
        if (!pr.has_mask() || pr.p_mask[order[i]] == 0.0) active.push_back(i);
    const std::size_t La = active.size();

    Tensor x({La, C}), cseq({La, N}), wseq({La, N}, 1.0), pseq({La, N});
    std::vector<double> abar(La * N), bbar(La * N);
    for (std::size_t j = 0; j < La; ++j) {
        const std::size_t pix = order[active[j]];
        for (std::size_t c = 0; c < C; ++c) x[j * C + c] = f[c * HW + pix] * gate[c];
        double dt = w.proj_dt_b[0];
        for (std::size_t c = 0; c < C; ++c) dt += x[j * C + c] * w.proj_dt_w[c];
        dt = std::log1p(std::exp(dt));
        for (std::size_t n = 0; n < N; ++n) {
            double b = w.proj_b_b[n], cc = w.proj_c_b[n];
            for (std::size_t c = 0; c < C; ++c) {
                b += x[j * C + c] * w.proj_b_w[c * N + n];
                cc += x[j * C + c] * w.proj_c_w[c * N + n];
            }
            abar[j * N + n] = std::exp(-std::exp(w.a_log[n]) * dt);
            bbar[j * N + n] = dt * b;
            cseq[j * N + n] = cc;
            if (pr.has_flare()) {
                const double v = pr.p_flare[pix];
                wseq[j * N + n] = 1.0 / (1.0 + std::exp(-(v * w.exc_w_w[n] + w.exc_w_b[n])));
                pseq[j * N + n] = v * w.exc_p_w[n] + w.exc_p_b[n];
            }
        }
    }
    const Tensor y = rse_oracle(x, abar, bbar, cseq, wseq, pseq, w.feedthrough);
    Tensor out({C, H, W});
    for (std::size_t i = 0; i < HW; ++i)
        for (std::size_t c = 0; c < C; ++c) out[c * HW + order[i]] = f[c * HW + order[i]] * gate[c];
    for (std::size_t j = 0; j < La; ++j)
        for (std::size_t c = 0; c < C; ++c) out[c * HW + order[active[j]]] = y[j * C + c];
    return out;
}

}  // namespace

TEST_CASE("rssm matches the composed oracle") {
    Rng rng(220);
    const RssmWeights w = RssmWeights::init(3, 4, rng);
    const Tensor f = random_tensor({3, 4, 4}, rng);
    PriorLevel pr;
    pr.p_position.add({1, 2});
    pr.p_flare = random_tensor({1, 4, 4}, rng, 0.0, 1.0);
    pr.p_mask = Tensor({1, 4, 4});
    pr.p_mask.at(0, 2, 1) = 1.0;
    pr.p_mask.at(0, 1, 1) = 1.0;
    CHECK(max_abs_diff(rssm_forward(f, pr, w), rssm_oracle(f, pr, w)) < 1e-6);
}

TEST_CASE("rssm with empty priors is the baseline pipeline") {
    Rng rng(221);
    const RssmWeights w = RssmWeights::init(2, 3, rng);
    const Tensor f = random_tensor({2, 4, 8}, rng);
    const Tensor got = rssm_forward(f, PriorLevel{}, w);
    CHECK(max_abs_diff(got, rssm_oracle(f, PriorLevel{}, w)) < 1e-12);
}

TEST_CASE("rssm with a full mask passes the gated feature through") {
    Rng rng(222);
    const RssmWeights w = RssmWeights::init(2, 3, rng);
    const Tensor f = random_tensor({2, 4, 4}, rng);
    PriorLevel pr;
    pr.p_mask = Tensor({1, 4, 4}, 1.0);
    pr.p_position.add({0, 0});
    const Tensor y = rssm_forward(f, pr, w);
    CHECK(max_abs_diff(y, rssm_oracle(f, pr, w)) < 1e-14);
    CHECK_THROWS_AS(rssm_forward(f, PriorLevel{Tensor({1, 2, 2}), {}, {}}, w), ShapeError);
}

TEST_CASE("rssm backward matches finite differences") {
    Rng rng(223);
    RssmWeights w = RssmWeights::init(3, 2, rng);
    Tensor f = random_tensor({3, 4, 4}, rng);
    PriorLevel pr;
    pr.p_position.add({3, 0});
    pr.p_flare = random_tensor({1, 4, 4}, rng, 0.0, 1.0);
    pr.p_mask = Tensor({1, 4, 4});
    pr.p_mask.at(0, 0, 3) = 1.0;
    for (const PriorLevel& level : {pr, PriorLevel{}}) {
        RssmTape tape;
        const Tensor out = rssm_forward(f, level, w, &tape);
        const Tensor up = random_tensor(out.shape(), rng);
        const RssmGrads g = rssm_backward(up, tape, w);
        std::vector<CheckedInput> inputs{{"feature", &f, g.feature}};
        RssmWeights gw = g.weights;
        std::vector<Tensor*> grads;
        gw.visit([&](const char*, Tensor& t) { grads.push_back(&t); });
        std::size_t k = 0;
        w.visit([&](const char* name, Tensor& t) {
            if (level.has_flare() || std::string(name).rfind("exc_", 0) != 0)
                inputs.push_back({name, &t, *grads[k]});
            ++k;
        });
        const auto r = vjp_check("rssm", [&] { return rssm_forward(f, level, w); }, up, inputs, 1e-5);
        for (const auto& in : r.inputs) CHECK_MESSAGE(in.max_rel_error < 1e-5, in.name << " " << in.max_rel_error);
    }
}

}
