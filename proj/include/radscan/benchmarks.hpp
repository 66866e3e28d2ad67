#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace radscan {

/// Sequential versus chunked scan on one random problem of the given length
/// (8 channels, 4 state entries). Deviation uses relative_error per element.
struct ScanBenchRow {
    std::size_t length = 0;
    std::size_t chunk = 0;
    double sequential_tokens_per_s = 0.0;
    double chunked_tokens_per_s = 0.0;
    double max_rel_deviation = 0.0;

    double speedup() const { return chunked_tokens_per_s / sequential_tokens_per_s; }
};

inline constexpr double kChunkedTolerance = 1e-10;

/// Checks agreement before timing; throws std::runtime_error when the
/// deviation exceeds kChunkedTolerance. Timings are the best of `repeats`.
ScanBenchRow bench_scan(std::size_t length, std::size_t chunk, std::size_t repeats, std::uint64_t seed);

/// Serial reference kernel versus its OpenMP counterpart.
struct KernelBenchRow {
    std::string name;
    double reference_ms = 0.0;
    double parallel_ms = 0.0;
    bool identical = false;
};

KernelBenchRow bench_conv_kernel(std::size_t channels, std::size_t extent, std::size_t repeats, std::uint64_t seed);
KernelBenchRow bench_scan_kernel(std::size_t length, std::size_t channels, std::size_t repeats, std::uint64_t seed);

}  // namespace radscan
