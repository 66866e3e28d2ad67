#pragma once

// Independent oracles shared by the unit suites. Nothing here calls into the
// implementation paths it is used to check.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "radscan/geometry.hpp"
#include "radscan/rng.hpp"
#include "radscan/tensor.hpp"

namespace radscan::testing {

/// Direct sliding-window cross-correlation on (N,C,H,W).
inline Tensor conv2d_oracle(const Tensor& in, const Tensor& k, const Tensor& bias, std::size_t stride,
                            std::size_t pad_r, std::size_t pad_c) {
    const std::size_t N = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    const std::size_t O = k.dim(0), KH = k.dim(2), KW = k.dim(3);
    const std::size_t OH = (H + 2 * pad_r - KH) / stride + 1;
    const std::size_t OW = (W + 2 * pad_c - KW) / stride + 1;
    Tensor out({N, O, OH, OW});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < O; ++o)
            for (std::size_t y = 0; y < OH; ++y)
                for (std::size_t x = 0; x < OW; ++x) {
                    double acc = bias.empty() ? 0.0 : bias[o];
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t i = 0; i < KH; ++i)
                            for (std::size_t j = 0; j < KW; ++j) {
                                const long yy = long(y * stride + i) - long(pad_r);
                                const long xx = long(x * stride + j) - long(pad_c);
                                if (yy < 0 || xx < 0 || yy >= long(H) || xx >= long(W)) continue;
                                acc += k[((o * C + c) * KH + i) * KW + j] *
                                       in[((n * C + c) * H + std::size_t(yy)) * W + std::size_t(xx)];
                            }
                    out[((n * O + o) * OH + y) * OW + x] = acc;
                }
    return out;
}

/// O(N^2) two-dimensional DFT.
inline std::vector<std::complex<double>> dft2d_oracle(const Tensor& plane) {
    const std::size_t H = plane.dim(0), W = plane.dim(1);
    std::vector<std::complex<double>> out(H * W);
    for (std::size_t u = 0; u < H; ++u)
        for (std::size_t v = 0; v < W; ++v) {
            std::complex<double> acc = 0.0;
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) {
                    const double ang = -2.0 * std::numbers::pi *
                                       (double(u * y) / double(H) + double(v * x) / double(W));
                    acc += plane[y * W + x] * std::complex<double>(std::cos(ang), std::sin(ang));
                }
            out[u * W + v] = acc;
        }
    return out;
}

inline std::vector<double> distance_oracle(const SourceSet& s, std::size_t h, std::size_t w) {
    std::vector<double> d(h * w, kInfiniteDistance);
    if (s.empty()) return d;
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
            double best = kInfiniteDistance;
            for (const Point& p : s.centers) {
                const double dx = double(c) - std::round(p.x);
                const double dy = double(r) - std::round(p.y);
                best = std::min(best, std::sqrt(dx * dx + dy * dy));
            }
            d[r * w + c] = best;
        }
    return d;
}

/// Selection-sort order: repeatedly take the largest remaining distance,
/// lowest raster index first among equals.
inline std::vector<std::uint32_t> plan_oracle(const std::vector<double>& dist) {
    std::vector<bool> used(dist.size(), false);
    std::vector<std::uint32_t> order;
    for (std::size_t step = 0; step < dist.size(); ++step) {
        std::size_t best = dist.size();
        for (std::size_t i = 0; i < dist.size(); ++i) {
            if (used[i]) continue;
            if (best == dist.size() || dist[i] > dist[best]) best = i;
        }
        used[best] = true;
        order.push_back(std::uint32_t(best));
    }
    return order;
}

/// Exhaustive window scan for local maxima with raster-first plateau rule.
inline std::vector<std::pair<long, long>> peaks_oracle(const Tensor& m, std::size_t H, std::size_t W,
                                                       double thr, long half) {
    std::vector<std::pair<long, long>> out;
    for (long r = 0; r < long(H); ++r)
        for (long c = 0; c < long(W); ++c) {
            const double v = m[std::size_t(r) * W + std::size_t(c)];
            if (v < thr) continue;
            bool ok = true;
            for (long dr = -half; dr <= half; ++dr)
                for (long dc = -half; dc <= half; ++dc) {
                    const long rr = r + dr, cc = c + dc;
                    if (rr < 0 || cc < 0 || rr >= long(H) || cc >= long(W)) continue;
                    if (dr == 0 && dc == 0) continue;
                    const double n = m[std::size_t(rr) * W + std::size_t(cc)];
                    if (n > v) ok = false;
                    if (n == v && (rr < r || (rr == r && cc < c))) ok = false;
                }
            if (ok) out.emplace_back(c, r);
        }
    return out;
}

/// Plain per-token loop of the excited recurrence at (L, d, N), h0 = 0.
inline Tensor rse_oracle(const Tensor& x, const std::vector<double>& abar, const std::vector<double>& bbar,
                         const Tensor& cseq, const Tensor& w, const Tensor& p, const Tensor& dfeed) {
    const std::size_t L = x.dim(0), d = x.dim(1), N = cseq.dim(1);
    Tensor y({L, d});
    for (std::size_t c = 0; c < d; ++c) {
        std::vector<double> h(N, 0.0);
        for (std::size_t i = 0; i < L; ++i) {
            double acc = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                h[n] = abar[i * N + n] * h[n] + bbar[i * N + n] * w[i * N + n] * x[i * d + c];
                acc += (cseq[i * N + n] * w[i * N + n] + p[i * N + n]) * h[n];
            }
            y[i * d + c] = acc + dfeed[c] * x[i * d + c];
        }
    }
    return y;
}

}  // namespace radscan::testing
