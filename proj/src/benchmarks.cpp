#include "radscan/benchmarks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "radscan/gradcheck.hpp"
#include "radscan/kernels.hpp"
#include "radscan/rng.hpp"

namespace radscan {

namespace {

template <typename F>
double best_seconds(std::size_t repeats, F&& f) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < std::max<std::size_t>(repeats, 1); ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

struct ScanProblem {
    std::vector<double> x, decay, drive, readout, feedthrough;
    kernels::ScanView view;
};

ScanProblem scan_problem(std::size_t length, std::size_t channels, std::size_t state, std::uint64_t seed) {
    Rng rng(seed);
    ScanProblem p;
    auto fill = [&](std::vector<double>& v, std::size_t n, double lo, double hi) {
        v.resize(n);
        for (double& e : v) e = rng.uniform(lo, hi);
    };
    fill(p.x, length * channels, -1.0, 1.0);
    fill(p.decay, length * state, 0.5, 0.999);
    fill(p.drive, length * state, -0.5, 0.5);
    fill(p.readout, length * state, -1.0, 1.0);
    fill(p.feedthrough, channels, -1.0, 1.0);
    p.view = {length, channels, state, p.x.data(), p.decay.data(), p.drive.data(), p.readout.data(),
              p.feedthrough.data()};
    return p;
}

}  // namespace

ScanBenchRow bench_scan(std::size_t length, std::size_t chunk, std::size_t repeats, std::uint64_t seed) {
    const std::size_t channels = 8, state = 4;
    const ScanProblem p = scan_problem(length, channels, state, seed);
    std::vector<double> seq(length * channels), chk(length * channels);
    kernels::scan_forward_reference(p.view, seq.data(), nullptr, 1);
    kernels::scan_forward_chunked(p.view, chk.data(), chunk);

    ScanBenchRow row{length, chunk, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < seq.size(); ++i)
        row.max_rel_deviation = std::max(row.max_rel_deviation, relative_error(chk[i], seq[i]));
    if (!(row.max_rel_deviation < kChunkedTolerance))
        throw std::runtime_error("chunked scan deviates from the sequential scan at L=" + std::to_string(length));

    const double ts = best_seconds(repeats, [&] { kernels::scan_forward_reference(p.view, seq.data(), nullptr, 1); });
    const double tc = best_seconds(repeats, [&] { kernels::scan_forward_chunked(p.view, chk.data(), chunk); });
    row.sequential_tokens_per_s = static_cast<double>(length) / ts;
    row.chunked_tokens_per_s = static_cast<double>(length) / tc;
    return row;
}

KernelBenchRow bench_conv_kernel(std::size_t channels, std::size_t extent, std::size_t repeats, std::uint64_t seed) {
    Rng rng(seed);
    const kernels::ConvGeometry g{1, channels, extent, extent, channels, 3, 3, 1, 1, 1, extent, extent};
    std::vector<double> in(channels * extent * extent), k(channels * channels * 9), b(channels);
    for (double& v : in) v = rng.uniform(-1.0, 1.0);
    for (double& v : k) v = rng.uniform(-1.0, 1.0);
    for (double& v : b) v = rng.uniform(-1.0, 1.0);
    std::vector<double> ref(in.size()), par(in.size());
    KernelBenchRow row;
    row.name = "conv2d " + std::to_string(channels) + "x" + std::to_string(extent) + "x" + std::to_string(extent);
    row.reference_ms = 1e3 * best_seconds(repeats, [&] { kernels::conv2d_forward_reference(g, in.data(), k.data(), b.data(), ref.data()); });
    row.parallel_ms = 1e3 * best_seconds(repeats, [&] { kernels::conv2d_forward(g, in.data(), k.data(), b.data(), par.data()); });
    row.identical = ref == par;
    return row;
}

KernelBenchRow bench_scan_kernel(std::size_t length, std::size_t channels, std::size_t repeats, std::uint64_t seed) {
    const ScanProblem p = scan_problem(length, channels, 4, seed);
    std::vector<double> ref(length * channels), par(length * channels);
    KernelBenchRow row;
    row.name = "scan L=" + std::to_string(length) + " d=" + std::to_string(channels);
    row.reference_ms = 1e3 * best_seconds(repeats, [&] { kernels::scan_forward_reference(p.view, ref.data(), nullptr, 1); });
    row.parallel_ms = 1e3 * best_seconds(repeats, [&] { kernels::scan_forward(p.view, par.data(), nullptr, 1); });
    row.identical = ref == par;
    return row;
}

}  // namespace radscan
