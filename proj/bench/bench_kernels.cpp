#include <cstdio>
#include <exception>

#include "radscan/benchmarks.hpp"
#include "radscan/kernels.hpp"

using namespace radscan;

int main() {
    std::printf("threads\t%d\n", kernels::configure_threads_from_env());
    std::printf("kernel\treference_ms\tparallel_ms\tidentical\n");
    for (const KernelBenchRow& r : {bench_conv_kernel(8, 64, 5, 1), bench_conv_kernel(16, 128, 3, 2),
                                    bench_scan_kernel(16384, 8, 5, 3), bench_scan_kernel(16384, 32, 3, 4)})
        std::printf("%s\t%.3f\t%.3f\t%s\n", r.name.c_str(), r.reference_ms, r.parallel_ms, r.identical ? "yes" : "NO");

    std::printf("\nlength\tchunk\tsequential_tok_s\tchunked_tok_s\tspeedup\tmax_rel_dev\n");
    try {
        for (std::size_t L : {1024u, 4096u, 16384u})
            for (std::size_t chunk : {16u, 64u}) {
                const ScanBenchRow r = bench_scan(L, chunk, 5, L);
                std::printf("%zu\t%zu\t%.4g\t%.4g\t%.2f\t%.2e\n", r.length, r.chunk, r.sequential_tokens_per_s,
                            r.chunked_tokens_per_s, r.speedup(), r.max_rel_deviation);
            }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "bench_kernels: %s\n", e.what());
        return 2;
    }
    return 0;
}
