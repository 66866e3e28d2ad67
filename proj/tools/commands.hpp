#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace radscan::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kVerification = 2 };

/// Raised for checks that ran and failed (as opposed to bad input).
struct VerificationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
};

struct SynthOptions {
    std::size_t n = 8;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t min_sources = 1;
    std::size_t max_sources = 4;
};

struct GradcheckOptions {
    bool inject_fault = false;
};

struct TrainOptions {
    std::string stage;
    std::string dataset;
    std::string fpn;
    std::string resume;
    std::optional<std::size_t> iterations;
    std::optional<std::size_t> stop_at;
    std::optional<double> lr;
};

struct EvalOptions {
    std::string dataset;
    std::string fpn;
    std::string main;
    bool identity = false;
    bool write_images = true;
};

struct BenchOptions {
    std::vector<std::size_t> lengths{1024, 4096, 16384};
    std::size_t chunk = 64;
    std::size_t repeats = 5;
};

int cmd_synth(const GlobalOptions& g, const SynthOptions& o);
int cmd_gradcheck(const GlobalOptions& g, const GradcheckOptions& o);
int cmd_train(const GlobalOptions& g, const TrainOptions& o);
int cmd_eval(const GlobalOptions& g, const EvalOptions& o);
int cmd_ablate(const GlobalOptions& g, const EvalOptions& o);
int cmd_bench(const GlobalOptions& g, const BenchOptions& o);

}  // namespace radscan::cli
