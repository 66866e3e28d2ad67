#pragma once

#include <cstddef>

#include "radscan/geometry.hpp"
#include "radscan/rng.hpp"
#include "radscan/scan.hpp"

namespace radscan {

/// Parameters of one prior-guided state-space module over C channels with a
/// d_state-dimensional state.
struct RssmWeights {
    Tensor gate_w, gate_b;      // {C,C}, {C}: channel gate from global averages
    Tensor a_log;               // {N}
    Tensor proj_b_w, proj_b_b;  // {C,N}, {N}: token -> B_i
    Tensor proj_c_w, proj_c_b;  // {C,N}, {N}: token -> C_i
    Tensor proj_dt_w, proj_dt_b;  // {C,1}, {1}: token -> softplus^-1(Δ_i)
    Tensor exc_w_w, exc_w_b;    // {1,N}, {N}: contamination -> excitation weight
    Tensor exc_p_w, exc_p_b;    // {1,N}, {N}: contamination -> prompt
    Tensor feedthrough;         // {C}

    template <typename F>
    void visit(F&& f) {
        f("gate_w", gate_w);
        f("gate_b", gate_b);
        f("a_log", a_log);
        f("proj_b_w", proj_b_w);
        f("proj_b_b", proj_b_b);
        f("proj_c_w", proj_c_w);
        f("proj_c_b", proj_c_b);
        f("proj_dt_w", proj_dt_w);
        f("proj_dt_b", proj_dt_b);
        f("exc_w_w", exc_w_w);
        f("exc_w_b", exc_w_b);
        f("exc_p_w", exc_p_w);
        f("exc_p_b", exc_p_b);
        f("feedthrough", feedthrough);
    }

    std::size_t channels() const { return feedthrough.size(); }
    std::size_t state() const { return a_log.size(); }

    /// Standard selective-scan initialization: a_log = log(1..N), Δ bias at softplus^-1(0.1),
    /// small uniform projections.
    static RssmWeights init(std::size_t channels, std::size_t state, Rng& rng);
    static RssmWeights zeros_like(const RssmWeights& w);
};

struct RssmTape {
    Tensor feature;
    Tensor mean;     // {1,C}
    Tensor gate;     // {1,C}
    Tensor gate_pre; // {1,C}
    RadialPlan plan;
    Tensor seq;      // gated tokens, {L,C}
    Tensor dt_pre;   // {L,1}
    Tensor flare_seq;  // {L,1}, empty without a contamination prior
    Tensor w_pre;      // {L,N}
    RouteTape route;
};

/// Channel gate, radial unfold of feature/mask/contamination under one plan,
/// heterogeneous routing around masked tokens with the excited scan inside,
/// then fold. Absent priors fall back to raster order, no bypass, and the
/// unmodulated scan respectively.
Tensor rssm_forward(const Tensor& feature, const PriorLevel& priors, const RssmWeights& weights,
                    RssmTape* tape = nullptr);

struct RssmGrads {
    Tensor feature;
    RssmWeights weights;
};

RssmGrads rssm_backward(const Tensor& upstream, const RssmTape& tape, const RssmWeights& weights);

/// Radial plan for a feature map given (possibly absent) source positions.
RadialPlan plan_for(const SourceSet& positions, std::size_t h, std::size_t w);

}  // namespace radscan
