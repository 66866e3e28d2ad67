#include <algorithm>
#include <vector>

#include "radscan/kernels.hpp"

namespace radscan::kernels {

namespace {

// Runs one channel of the recurrence. Shared by the reference and the
// threaded path so both follow the same arithmetic order.
void scan_channel(const ScanView& v, std::size_t c, double* y, double* checkpoints,
                  std::size_t stride, double* h) {
    const std::size_t n_state = v.state;
    std::fill(h, h + n_state, 0.0);
    const double d = v.feedthrough ? v.feedthrough[c] : 0.0;
    for (std::size_t i = 0; i < v.length; ++i) {
        if (checkpoints && i % stride == 0) {
            double* slot = checkpoints + ((i / stride) * v.channels + c) * n_state;
            std::copy(h, h + n_state, slot);
        }
        const double xi = v.x[i * v.channels + c];
        const double* a = v.decay + i * n_state;
        const double* b = v.drive + i * n_state;
        const double* r = v.readout + i * n_state;
        double acc = 0.0;
        for (std::size_t n = 0; n < n_state; ++n) {
            h[n] = a[n] * h[n] + b[n] * xi;
            acc += r[n] * h[n];
        }
        y[i * v.channels + c] = acc + d * xi;
    }
}


constexpr std::size_t kLockstep = 8;

// Advances chunks j0..j0+group-1 of one channel from a zero state. NS is the
// state width when known at compile time, 0 otherwise.
template <std::size_t NS>
void local_scan_group(const ScanView& v, std::size_t c, double d, double* y, std::size_t chunk,
                      std::size_t j0, std::size_t group, std::size_t n_runtime, double* h_out) {
    const std::size_t N = NS ? NS : n_runtime;
    const std::size_t L = v.length;
    double h[kLockstep * 16];
    std::vector<double> spill;
    double* hs = h;
    if (group * N > kLockstep * 16) {
        spill.assign(group * N, 0.0);
        hs = spill.data();
    } else {
        std::fill(h, h + group * N, 0.0);
    }
    for (std::size_t t = 0; t < chunk; ++t) {
        for (std::size_t g = 0; g < group; ++g) {
            const std::size_t i = (j0 + g) * chunk + t;
            if (i >= L) continue;
            const double xi = v.x[i * v.channels + c];
            const double* a = v.decay + i * N;
            const double* b = v.drive + i * N;
            const double* r = v.readout + i * N;
            double* hg = hs + g * N;
            double acc = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                hg[n] = a[n] * hg[n] + b[n] * xi;
                acc += r[n] * hg[n];
            }
            y[i * v.channels + c] = acc + d * xi;
        }
    }
    std::copy(hs, hs + group * N, h_out);
}

}  // namespace

void scan_forward_reference(const ScanView& v, double* y, double* checkpoints,
                            std::size_t stride) {
    std::vector<double> h(v.state);
    for (std::size_t c = 0; c < v.channels; ++c) scan_channel(v, c, y, checkpoints, stride, h.data());
}

void scan_forward(const ScanView& v, double* y, double* checkpoints, std::size_t stride) {
    const long channels = static_cast<long>(v.channels);
#pragma omp parallel if (channels > 1 && v.length * v.state >= 4096)
    {
        std::vector<double> h(v.state);
#pragma omp for schedule(static)
        for (long c = 0; c < channels; ++c) {
            scan_channel(v, static_cast<std::size_t>(c), y, checkpoints, stride, h.data());
        }
    }
}

void scan_forward_chunked(const ScanView& v, double* y, std::size_t chunk) {
    const std::size_t L = v.length;
    const std::size_t N = v.state;
    if (L == 0) return;
    chunk = std::clamp<std::size_t>(chunk, 1, L);
    const std::size_t n_chunks = (L + chunk - 1) / chunk;

    // Cumulative decay inside each chunk, folded into the readout:
    // corr[i,n] = readout[i,n] * prod_{k=start(i)..i} decay[k,n].
    std::vector<double> prefix(L * N);
    std::vector<double> corr(L * N);
#pragma omp parallel for schedule(static) if (n_chunks > 1 && L * N >= 4096)
    for (long jl = 0; jl < static_cast<long>(n_chunks); ++jl) {
        const std::size_t begin = static_cast<std::size_t>(jl) * chunk;
        const std::size_t end = std::min(L, begin + chunk);
        for (std::size_t n = 0; n < N; ++n) prefix[begin * N + n] = v.decay[begin * N + n];
        for (std::size_t i = begin + 1; i < end; ++i) {
            for (std::size_t n = 0; n < N; ++n) {
                prefix[i * N + n] = prefix[(i - 1) * N + n] * v.decay[i * N + n];
            }
        }
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t n = 0; n < N; ++n) corr[i * N + n] = v.readout[i * N + n] * prefix[i * N + n];
        }
    }

    const long channels = static_cast<long>(v.channels);
#pragma omp parallel if (channels > 1 && L * N >= 4096)
    {
        std::vector<double> local(n_chunks * N);
        std::vector<double> carry_in(n_chunks * N);
#pragma omp for schedule(static)
        for (long cl = 0; cl < channels; ++cl) {
            const auto c = static_cast<std::size_t>(cl);
            const double d = v.feedthrough ? v.feedthrough[c] : 0.0;
            std::fill(local.begin(), local.end(), 0.0);

            // Local scans from a zero state, a group of chunks advanced in lockstep.
            for (std::size_t j0 = 0; j0 < n_chunks; j0 += kLockstep) {
                const std::size_t group = std::min(kLockstep, n_chunks - j0);
                if (N == 4 && group == kLockstep) {
                    local_scan_group<4>(v, c, d, y, chunk, j0, kLockstep, 4, local.data() + j0 * N);
                } else {
                    local_scan_group<0>(v, c, d, y, chunk, j0, group, N, local.data() + j0 * N);
                }
            }

            // Sequential carry of boundary states.
            std::fill(carry_in.begin(), carry_in.begin() + N, 0.0);
            for (std::size_t j = 1; j < n_chunks; ++j) {
                const std::size_t last = j * chunk - 1;
                for (std::size_t n = 0; n < N; ++n) {
                    carry_in[j * N + n] =
                        local[(j - 1) * N + n] + prefix[last * N + n] * carry_in[(j - 1) * N + n];
                }
            }

            // Correction for the state carried into each chunk.
            for (std::size_t j = 1; j < n_chunks; ++j) {
                const double* hc = carry_in.data() + j * N;
                const std::size_t end = std::min(L, (j + 1) * chunk);
                for (std::size_t i = j * chunk; i < end; ++i) {
                    const double* r = corr.data() + i * N;
                    double acc = 0.0;
                    for (std::size_t n = 0; n < N; ++n) acc += r[n] * hc[n];
                    y[i * v.channels + c] += acc;
                }
            }
        }
    }
}

}  // namespace radscan::kernels
