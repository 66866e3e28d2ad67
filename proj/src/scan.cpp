#include "radscan/scan.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "radscan/kernels.hpp"
#include "radscan/numerics.hpp"

namespace radscan {

Excitation Excitation::unit(std::size_t length, std::size_t state) {
    return {Tensor({length, state}, 1.0), Tensor({length, state}, 0.0)};
}

RouteMask RouteMask::from_sequence(const Tensor& seq) {
    if (!(seq.rank() == 1 || (seq.rank() == 2 && seq.dim(1) == 1))) {
        throw ShapeError("RouteMask: expected {L} or {L,1}, got " + shape_to_string(seq.shape()));
    }
    RouteMask m;
    m.m_seq.resize(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) m.m_seq[i] = seq[i] != 0.0 ? 1 : 0;
    return m;
}

namespace {

void validate(const Tensor& x, const ScanParams& p, const Excitation* exc, const char* what) {
    const std::string w(what);
    if (x.rank() != 2) throw ShapeError(w + ": x_seq must be {L, d}, got " + shape_to_string(x.shape()));
    const std::size_t L = x.dim(0);
    const std::size_t d = x.dim(1);
    const std::size_t N = p.a_log.size();
    if (p.a_log.rank() != 1 || N == 0) throw ShapeError(w + ": a_log must be a non-empty vector");
    if (p.delta_seq.size() != L) {
        throw ShapeError(w + ": length mismatch, x has " + std::to_string(L) + " tokens but delta has " +
                         std::to_string(p.delta_seq.size()));
    }
    const Shape seq_shape{L, N};
    if (p.b_seq.shape() != seq_shape || p.c_seq.shape() != seq_shape) {
        throw ShapeError(w + ": b_seq/c_seq must be " + shape_to_string(seq_shape));
    }
    if (p.feedthrough.size() != d) throw ShapeError(w + ": feedthrough must have one entry per channel");
    if (exc && (exc->w_seq.shape() != seq_shape || exc->prompt_seq.shape() != seq_shape)) {
        throw ShapeError(w + ": excitation must be " + shape_to_string(seq_shape) + ", got " +
                         shape_to_string(exc->w_seq.shape()));
    }
    for (std::size_t i = 0; i < L; ++i) {
        if (!(p.delta_seq[i] > 0.0)) throw std::invalid_argument(w + ": delta must be positive");
    }
}

struct KernelInputs {
    Tensor decay, drive, readout;
};

KernelInputs kernel_inputs(const ScanParams& p, const Excitation* exc) {
    const Discretized disc = discretize_zoh(p.a_log, p.delta_seq, p.b_seq);
    KernelInputs k{disc.abar, disc.bbar, p.c_seq};
    if (exc) {
        for (std::size_t i = 0; i < k.drive.size(); ++i) {
            k.drive[i] = disc.bbar[i] * exc->w_seq[i];
            k.readout[i] = p.c_seq[i] * exc->w_seq[i] + exc->prompt_seq[i];
        }
    }
    return k;
}

kernels::ScanView view_of(const Tensor& x, const ScanParams& p, const KernelInputs& k) {
    kernels::ScanView v;
    v.length = x.dim(0);
    v.channels = x.dim(1);
    v.state = p.a_log.size();
    v.x = x.data().data();
    v.decay = k.decay.data().data();
    v.drive = k.drive.data().data();
    v.readout = k.readout.data().data();
    v.feedthrough = p.feedthrough.data().data();
    return v;
}

Tensor run_scan(const Tensor& x, const ScanParams& p, const Excitation* exc, const char* what) {
    validate(x, p, exc, what);
    const KernelInputs k = kernel_inputs(p, exc);
    Tensor y(x.shape());
    kernels::scan_forward(view_of(x, p, k), y.data().data(), nullptr, 1);
    require_finite(y, what);
    return y;
}

Tensor gather_rows(const Tensor& t, const std::vector<std::uint32_t>& rows) {
    const std::size_t width = t.rank() == 1 ? 1 : t.dim(1);
    Shape s = t.shape();
    s[0] = rows.size();
    Tensor out(s);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy_n(t.data().data() + rows[r] * width, width, out.data().data() + r * width);
    }
    return out;
}

void scatter_rows(const Tensor& src, const std::vector<std::uint32_t>& rows, Tensor& dst) {
    const std::size_t width = src.rank() == 1 ? 1 : src.dim(1);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy_n(src.data().data() + r * width, width, dst.data().data() + rows[r] * width);
    }
}

ScanParams compact_params(const ScanParams& p, const std::vector<std::uint32_t>& rows) {
    return {p.a_log, gather_rows(p.b_seq, rows), gather_rows(p.c_seq, rows),
            gather_rows(p.delta_seq, rows), p.feedthrough};
}

std::vector<std::uint32_t> active_tokens(const RouteMask& mask, std::size_t length) {
    if (mask.m_seq.size() != length) {
        throw ShapeError("hb_route: mask has " + std::to_string(mask.m_seq.size()) +
                         " tokens, sequence has " + std::to_string(length));
    }
    std::vector<std::uint32_t> active;
    for (std::size_t i = 0; i < length; ++i) {
        if (!mask.m_seq[i]) active.push_back(static_cast<std::uint32_t>(i));
    }
    return active;
}

}  // namespace

Discretized discretize_zoh(const Tensor& a_log, const Tensor& delta_seq, const Tensor& b_seq) {
    const std::size_t L = delta_seq.size();
    const std::size_t N = a_log.size();
    if (b_seq.shape() != Shape{L, N}) {
        throw ShapeError("discretize_zoh: b_seq must be {" + std::to_string(L) + ", " +
                         std::to_string(N) + "}, got " + shape_to_string(b_seq.shape()));
    }
    Discretized out{Tensor({L, N}), Tensor({L, N})};
    for (std::size_t i = 0; i < L; ++i) {
        const double dt = delta_seq[i];
        if (!(dt > 0.0)) {
            throw std::invalid_argument("discretize_zoh: step " + std::to_string(i) + " is not positive");
        }
        for (std::size_t n = 0; n < N; ++n) {
            const double a = -std::exp(a_log[n]);
            out.abar[i * N + n] = std::exp(dt * a);
            out.bbar[i * N + n] = dt * b_seq[i * N + n];
        }
    }
    return out;
}

Tensor selective_scan(const Tensor& x_seq, const ScanParams& params) {
    return run_scan(x_seq, params, nullptr, "selective_scan");
}

Tensor rse_scan(const Tensor& x_seq, const ScanParams& params, const Excitation& exc) {
    return run_scan(x_seq, params, &exc, "rse_scan");
}

Tensor chunked_scan(const Tensor& x_seq, const ScanParams& params, const Excitation& exc,
                    std::size_t chunk) {
    if (chunk == 0) throw std::invalid_argument("chunked_scan: chunk must be >= 1");
    validate(x_seq, params, &exc, "chunked_scan");
    const KernelInputs k = kernel_inputs(params, &exc);
    Tensor y(x_seq.shape());
    kernels::scan_forward_chunked(view_of(x_seq, params, k), y.data().data(), chunk);
    return y;
}

Excitation flare_excitation(const Tensor& p_flare_seq, const AffineParams& proj_w,
                            const AffineParams& proj_p) {
    const Tensor col = p_flare_seq.reshaped({p_flare_seq.size(), 1});
    Excitation exc{pointwise(affine_project(col, proj_w.weight, proj_w.bias), Pointwise::sigmoid),
                   affine_project(col, proj_p.weight, proj_p.bias)};
    if (exc.w_seq.shape() != exc.prompt_seq.shape()) {
        throw ShapeError("flare_excitation: weight and prompt projections disagree in width");
    }
    return exc;
}

Tensor hb_route(const Tensor& x_seq, const RouteMask& mask, const ScanParams& params,
                const Excitation& exc) {
    validate(x_seq, params, &exc, "hb_route");
    const auto active = active_tokens(mask, x_seq.dim(0));
    Tensor y = x_seq;
    if (active.empty()) return y;
    const Excitation sub{gather_rows(exc.w_seq, active), gather_rows(exc.prompt_seq, active)};
    const Tensor ys = rse_scan(gather_rows(x_seq, active), compact_params(params, active), sub);
    scatter_rows(ys, active, y);
    return y;
}

// ---------------------------------------------------------------------------

Tensor scan_forward_taped(const Tensor& x_seq, const ScanParams& params, const Excitation* exc,
                          ScanTape& tape, std::size_t stride) {
    if (stride == 0) throw std::invalid_argument("scan_forward_taped: stride must be >= 1");
    validate(x_seq, params, exc, "scan_forward_taped");
    KernelInputs k = kernel_inputs(params, exc);
    const std::size_t L = x_seq.dim(0);
    const std::size_t d = x_seq.dim(1);
    const std::size_t N = params.state();
    tape.x = x_seq;
    tape.params = params;
    tape.modulated = exc != nullptr;
    tape.exc = exc ? *exc : Excitation{};
    tape.stride = stride;
    tape.checkpoints.assign(((L + stride - 1) / stride) * d * N, 0.0);
    Tensor y(x_seq.shape());
    kernels::scan_forward(view_of(x_seq, params, k), y.data().data(), tape.checkpoints.data(), stride);
    tape.decay = std::move(k.decay);
    tape.drive = std::move(k.drive);
    tape.readout = std::move(k.readout);
    require_finite(y, "scan_forward_taped");
    return y;
}

ScanGrads scan_backward(const Tensor& upstream, const ScanTape& tape) {
    const Tensor& x = tape.x;
    if (x.rank() != 2) throw std::invalid_argument("scan_backward: empty tape");
    const std::size_t L = x.dim(0);
    const std::size_t d = x.dim(1);
    const std::size_t N = tape.params.state();
    const std::size_t S = tape.stride;
    if (S == 0 || tape.checkpoints.size() != ((L + S - 1) / S) * d * N) {
        throw std::invalid_argument("scan_backward: tape is missing state checkpoints");
    }
    require_same_shape(upstream, x, "scan_backward");

    Tensor gx({L, d}), g_decay({L, N}), g_drive({L, N}), g_readout({L, N}), g_feed({d});
    std::vector<double> dh(d * N, 0.0);
    std::vector<double> states(S * d * N);  // states after each token of a segment
    const double* D = tape.params.feedthrough.data().data();

    const std::size_t segments = (L + S - 1) / S;
    for (std::size_t s = segments; s-- > 0;) {
        const std::size_t begin = s * S;
        const std::size_t end = std::min(L, begin + S);
        const double* entry = tape.checkpoints.data() + s * d * N;
        // Recompute the segment's states from its checkpoint.
        for (std::size_t i = begin; i < end; ++i) {
            const double* prev = i == begin ? entry : states.data() + (i - 1 - begin) * d * N;
            double* cur = states.data() + (i - begin) * d * N;
            for (std::size_t c = 0; c < d; ++c) {
                const double xi = x[i * d + c];
                for (std::size_t n = 0; n < N; ++n) {
                    cur[c * N + n] = tape.decay[i * N + n] * prev[c * N + n] + tape.drive[i * N + n] * xi;
                }
            }
        }
        for (std::size_t i = end; i-- > begin;) {
            const double* hcur = states.data() + (i - begin) * d * N;
            const double* hprev = i == begin ? entry : states.data() + (i - 1 - begin) * d * N;
            for (std::size_t c = 0; c < d; ++c) {
                const double g = upstream[i * d + c];
                const double xi = x[i * d + c];
                g_feed[c] += g * xi;
                double gxi = g * D[c];
                for (std::size_t n = 0; n < N; ++n) {
                    double& adj = dh[c * N + n];
                    adj += g * tape.readout[i * N + n];
                    g_readout[i * N + n] += g * hcur[c * N + n];
                    g_decay[i * N + n] += adj * hprev[c * N + n];
                    g_drive[i * N + n] += adj * xi;
                    gxi += adj * tape.drive[i * N + n];
                    adj *= tape.decay[i * N + n];
                }
                gx[i * d + c] = gxi;
            }
        }
    }

    // Chain through the discretization and the excitation.
    const ScanParams& p = tape.params;
    ScanGrads g;
    g.x = std::move(gx);
    g.feedthrough = std::move(g_feed);
    g.a_log = Tensor({N});
    g.b_seq = Tensor({L, N});
    g.c_seq = Tensor({L, N});
    g.delta_seq = Tensor({L});
    if (tape.modulated) {
        g.w_seq = Tensor({L, N});
        g.prompt_seq = Tensor({L, N});
    }
    std::vector<double> g_a(N, 0.0);
    for (std::size_t i = 0; i < L; ++i) {
        const double dt = p.delta_seq[i];
        double g_dt = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            const std::size_t k = i * N + n;
            const double a = -std::exp(p.a_log[n]);
            const double bbar = dt * p.b_seq[k];
            double g_bbar = g_drive[k];
            if (tape.modulated) {
                const double w = tape.exc.w_seq[k];
                g.w_seq[k] = g_drive[k] * bbar + g_readout[k] * p.c_seq[k];
                g.prompt_seq[k] = g_readout[k];
                g.c_seq[k] = g_readout[k] * w;
                g_bbar *= w;
            } else {
                g.c_seq[k] = g_readout[k];
            }
            g.b_seq[k] = g_bbar * dt;
            const double decay_term = g_decay[k] * tape.decay[k];
            g_dt += g_bbar * p.b_seq[k] + decay_term * a;
            g_a[n] += decay_term * dt;
        }
        g.delta_seq[i] = g_dt;
    }
    for (std::size_t n = 0; n < N; ++n) g.a_log[n] = g_a[n] * -std::exp(p.a_log[n]);
    return g;
}

Tensor hb_route_taped(const Tensor& x_seq, const RouteMask& mask, const ScanParams& params,
                      const Excitation* exc, RouteTape& tape, std::size_t stride) {
    validate(x_seq, params, exc, "hb_route");
    tape.active = active_tokens(mask, x_seq.dim(0));
    tape.length = x_seq.dim(0);
    tape.channels = x_seq.dim(1);
    tape.state = params.state();
    tape.any_active = !tape.active.empty();
    Tensor y = x_seq;
    if (!tape.any_active) return y;
    const bool all_active = tape.active.size() == tape.length;
    Tensor ys;
    if (all_active) {
        ys = scan_forward_taped(x_seq, params, exc, tape.scan, stride);
        return ys;
    }
    std::optional<Excitation> sub;
    if (exc) sub = Excitation{gather_rows(exc->w_seq, tape.active), gather_rows(exc->prompt_seq, tape.active)};
    ys = scan_forward_taped(gather_rows(x_seq, tape.active), compact_params(params, tape.active),
                            sub ? &*sub : nullptr, tape.scan, stride);
    scatter_rows(ys, tape.active, y);
    return y;
}

ScanGrads hb_route_backward(const Tensor& upstream, const RouteTape& tape) {
    const std::size_t L = tape.length;
    const std::size_t N = tape.state;
    if (upstream.shape() != Shape{L, tape.channels}) throw ShapeError("hb_route_backward: upstream shape mismatch");
    ScanGrads g;
    g.a_log = Tensor({N});
    g.b_seq = Tensor({L, N});
    g.c_seq = Tensor({L, N});
    g.delta_seq = Tensor({L});
    g.feedthrough = Tensor({tape.channels});
    g.x = upstream;  // bypassed tokens are the identity
    const bool modulated = tape.any_active ? tape.scan.modulated : false;
    if (modulated) {
        g.w_seq = Tensor({L, N});
        g.prompt_seq = Tensor({L, N});
    }
    if (!tape.any_active) return g;
    if (tape.active.size() == L) return scan_backward(upstream, tape.scan);

    const ScanGrads inner = scan_backward(gather_rows(upstream, tape.active), tape.scan);
    scatter_rows(inner.x, tape.active, g.x);
    scatter_rows(inner.b_seq, tape.active, g.b_seq);
    scatter_rows(inner.c_seq, tape.active, g.c_seq);
    scatter_rows(inner.delta_seq, tape.active, g.delta_seq);
    if (modulated) {
        scatter_rows(inner.w_seq, tape.active, g.w_seq);
        scatter_rows(inner.prompt_seq, tape.active, g.prompt_seq);
    }
    g.a_log = inner.a_log;
    g.feedthrough = inner.feedthrough;
    return g;
}

}  // namespace radscan
